//! Multi-frequency operators: symbols, the multi-frequency Hilbert transform,
//! Hormander-type symbols, bump sums, and ell^q functionals over modulations.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqset::{dist_to_set, FrequencySet};
use crate::grid::{Cube, GridFunction, TorusDomain};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A linear operator on grid functions of one domain.
pub trait GridOperator: Send + Sync {
    fn domain(&self) -> &TorusDomain;
    fn apply(&self, f: &GridFunction) -> Result<GridFunction>;
    fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction>;
    /// Lattice symbol (FFT order) when the operator is a Fourier multiplier.
    fn lattice_symbol(&self) -> Option<&[Complex64]> {
        None
    }
}

fn check_domain(op: &TorusDomain, f: &GridFunction) -> Result<()> {
    if op != f.domain() {
        return Err(Error::DimensionMismatch(format!(
            "operator domain {op:?} vs function domain {:?}",
            f.domain()
        )));
    }
    Ok(())
}

/// Fourier multiplier `idft(m * dft f)` with a sampled lattice symbol.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    domain: TorusDomain,
    symbol: Vec<Complex64>,
}

impl SpectralOperator {
    pub fn new(domain: TorusDomain, symbol: Vec<Complex64>) -> Result<Self> {
        if symbol.len() != domain.len() {
            return Err(Error::DimensionMismatch("symbol length".into()));
        }
        Ok(Self { domain, symbol })
    }

    /// Convolution `(K * f)(x) = sum_y K(x - y) f(y) h^n` as a multiplier.
    pub fn convolution(kernel: &GridFunction) -> Self {
        let d = *kernel.domain();
        let scale = d.cell_volume() * (d.len() as f64).sqrt();
        let symbol = kernel.dft().into_values().into_iter().map(|v| v * scale).collect();
        Self { domain: d, symbol }
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    /// Largest modulus of the symbol.
    pub fn symbol_sup(&self) -> f64 {
        self.symbol.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Convolution kernel `K` with `T f = K * f` (quadrature convention).
    pub fn kernel(&self) -> GridFunction {
        let d = self.domain;
        let scale = 1.0 / (d.cell_volume() * (d.len() as f64).sqrt());
        GridFunction::new(d, self.symbol.clone())
            .expect("symbol has the domain length")
            .idft()
            .scale(Complex64::new(scale, 0.0))
    }

    fn multiply(&self, f: &GridFunction, conj: bool) -> Result<GridFunction> {
        check_domain(&self.domain, f)?;
        let mut g = f.dft();
        g.values_mut()
            .par_iter_mut()
            .zip(self.symbol.par_iter())
            .for_each(|(v, m)| *v *= if conj { m.conj() } else { *m });
        Ok(g.idft())
    }
}

impl GridOperator for SpectralOperator {
    fn domain(&self) -> &TorusDomain {
        &self.domain
    }
    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.multiply(f, false)
    }
    fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction> {
        self.multiply(f, true)
    }
    fn lattice_symbol(&self) -> Option<&[Complex64]> {
        Some(&self.symbol)
    }
}

/// Multiplication by a function in physical space (not a Fourier multiplier).
#[derive(Debug, Clone)]
pub struct PointwiseMultiplier {
    factor: GridFunction,
}

impl PointwiseMultiplier {
    pub fn new(factor: GridFunction) -> Self {
        Self { factor }
    }
}

impl GridOperator for PointwiseMultiplier {
    fn domain(&self) -> &TorusDomain {
        self.factor.domain()
    }
    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.factor.mul(f)
    }
    fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction> {
        self.factor.map(|v| v.conj()).mul(f)
    }
}

/// Which construction produced a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolKind {
    Identity,
    Zero,
    MfHilbert,
    Hormander,
    Bump,
    Lattice,
    Custom,
}

type SymbolFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum SymbolRepr {
    Function(SymbolFn),
    Lattice {
        domain: TorusDomain,
        values: Arc<Vec<Complex64>>,
    },
}

/// A Fourier symbol: a function of the frequency, or values on one lattice.
#[derive(Clone)]
pub struct Symbol {
    kind: SymbolKind,
    theta: Option<FrequencySet>,
    repr: SymbolRepr,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("kind", &self.kind)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

impl Symbol {
    pub fn from_fn(
        kind: SymbolKind,
        theta: Option<FrequencySet>,
        f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind,
            theta,
            repr: SymbolRepr::Function(Arc::new(f)),
        }
    }

    /// Values given on the lattice of `domain` in FFT order.
    pub fn lattice(domain: TorusDomain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch("lattice symbol length".into()));
        }
        Ok(Self {
            kind: SymbolKind::Lattice,
            theta: None,
            repr: SymbolRepr::Lattice {
                domain,
                values: Arc::new(values),
            },
        })
    }

    pub fn identity() -> Self {
        Self::from_fn(SymbolKind::Identity, None, |_| ONE)
    }

    pub fn zero() -> Self {
        Self::from_fn(SymbolKind::Zero, None, |_| ZERO)
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn theta(&self) -> Option<&FrequencySet> {
        self.theta.as_ref()
    }

    /// Value at a frequency; lattice symbols are read at the nearest lattice point.
    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        match &self.repr {
            SymbolRepr::Function(f) => f(xi),
            SymbolRepr::Lattice { domain, values } => values[domain.nearest_frequency_index(xi).0],
        }
    }

    /// Values on the lattice of `domain`, FFT order.
    pub fn sample(&self, domain: &TorusDomain) -> Result<Vec<Complex64>> {
        match &self.repr {
            SymbolRepr::Function(f) => {
                let dim = domain.dim();
                Ok((0..domain.len())
                    .into_par_iter()
                    .map(|k| f(&domain.frequency(k)[..dim]))
                    .collect())
            }
            SymbolRepr::Lattice { domain: d, values } => {
                if d != domain {
                    return Err(Error::DimensionMismatch(
                        "lattice symbol sampled on a different domain".into(),
                    ));
                }
                Ok(values.as_ref().clone())
            }
        }
    }

    /// `sup |m|` over the lattice of `domain`.
    pub fn sup_on(&self, domain: &TorusDomain) -> Result<f64> {
        Ok(self.sample(domain)?.iter().fold(0.0, |m, v| m.max(v.norm())))
    }

    /// Pointwise product with a real function.
    fn times(&self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Symbol {
        let me = self.clone();
        Symbol::from_fn(self.kind, self.theta.clone(), move |xi| me.eval(xi) * g(xi))
    }
}

/// How an operator was specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApplicationMode {
    Multiplier,
    Convolution,
}

/// `T = sum_j T_j`, each piece a Fourier multiplier.
#[derive(Debug, Clone)]
pub struct MultiFreqOperator {
    theta: FrequencySet,
    pieces: Vec<Symbol>,
    total: Symbol,
    mode: ApplicationMode,
}

impl MultiFreqOperator {
    /// Operator from pieces; the total symbol is their sum.
    pub fn from_pieces(theta: FrequencySet, pieces: Vec<Symbol>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("operator needs at least one piece".into()));
        }
        let ps = pieces.clone();
        let total = Symbol::from_fn(pieces[0].kind(), Some(theta.clone()), move |xi| {
            ps.iter().map(|p| p.eval(xi)).sum()
        });
        Ok(Self {
            theta,
            pieces,
            total,
            mode: ApplicationMode::Multiplier,
        })
    }

    /// Operator with a given total symbol split by a smooth partition of unity
    /// adapted to `theta` (one piece per frequency).
    pub fn split(theta: FrequencySet, total: Symbol) -> Self {
        let weights = Arc::new(FrequencyPartition::new(&theta));
        let pieces = (0..theta.len())
            .map(|j| {
                let w = weights.clone();
                total.times(move |xi| w.weight(j, xi))
            })
            .collect();
        Self {
            theta,
            pieces,
            total,
            mode: ApplicationMode::Multiplier,
        }
    }

    /// Sum of convolutions with the given kernels.
    pub fn from_kernels(theta: FrequencySet, kernels: &[GridFunction]) -> Result<Self> {
        let pieces = kernels
            .iter()
            .map(|k| {
                let s = SpectralOperator::convolution(k);
                Symbol::lattice(*k.domain(), s.symbol)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut op = Self::from_pieces(theta, pieces)?;
        op.mode = ApplicationMode::Convolution;
        Ok(op)
    }

    pub fn theta(&self) -> &FrequencySet {
        &self.theta
    }

    pub fn pieces(&self) -> &[Symbol] {
        &self.pieces
    }

    pub fn total_symbol(&self) -> &Symbol {
        &self.total
    }

    pub fn mode(&self) -> ApplicationMode {
        self.mode
    }

    /// Samples the total symbol on `domain`.
    pub fn on(&self, domain: &TorusDomain) -> Result<SpectralOperator> {
        SpectralOperator::new(*domain, self.total.sample(domain)?)
    }

    /// Samples piece `j` on `domain`.
    pub fn piece_on(&self, j: usize, domain: &TorusDomain) -> Result<SpectralOperator> {
        let p = self
            .pieces
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("no piece {j}")))?;
        SpectralOperator::new(*domain, p.sample(domain)?)
    }
}

/// `T f` computed spectrally.
pub fn apply(t: &MultiFreqOperator, f: &GridFunction) -> Result<GridFunction> {
    t.on(f.domain())?.apply(f)
}

/// Smooth weights `psi_j = w_j / sum_k w_k`, `w_k(xi) = (1 + |xi - xi_k|^2/sigma_k^2)^{-4}`.
#[derive(Debug, Clone)]
struct FrequencyPartition {
    theta: FrequencySet,
    sigma: Vec<f64>,
}

impl FrequencyPartition {
    fn new(theta: &FrequencySet) -> Self {
        Self {
            sigma: local_scales(theta),
            theta: theta.clone(),
        }
    }

    fn raw(&self, k: usize, xi: &[f64]) -> f64 {
        let d2: f64 = self
            .theta
            .get(k)
            .iter()
            .zip(xi)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (1.0 + d2 / self.sigma[k].powi(2)).powi(-4)
    }

    fn weight(&self, j: usize, xi: &[f64]) -> f64 {
        let total: f64 = (0..self.theta.len()).map(|k| self.raw(k, xi)).sum();
        self.raw(j, xi) / total
    }
}

/// Half the distance from each frequency to its nearest neighbour (1 for a singleton).
pub fn local_scales(theta: &FrequencySet) -> Vec<f64> {
    let n = theta.len();
    (0..n)
        .map(|j| {
            let mut g = f64::INFINITY;
            for k in 0..n {
                if k != j {
                    let d: f64 = theta
                        .get(j)
                        .iter()
                        .zip(theta.get(k))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    g = g.min(d);
                }
            }
            if g.is_finite() {
                g / 2.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Sign pattern `-1` below `xi_1`, `(-1)^{j+1}` on `[xi_j, xi_{j+1})`, `(-1)^{N+1}` above `xi_N`.
/// A jump point takes its right-limit value.
pub fn mf_hilbert_value(theta: &[f64], xi: f64) -> f64 {
    let count = theta.partition_point(|&t| t <= xi + 1e-12 * (1.0 + xi.abs()));
    if count % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Symbol of the multi-frequency Hilbert transform.
pub fn mf_hilbert_symbol(theta: &FrequencySet) -> Result<Symbol> {
    if theta.dim() != 1 {
        return Err(Error::InvalidParameter("multi-frequency Hilbert transform is one-dimensional".into()));
    }
    let t = theta.first_coords();
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("frequencies must increase strictly".into()));
    }
    Ok(Symbol::from_fn(SymbolKind::MfHilbert, Some(theta.clone()), move |xi| {
        Complex64::new(mf_hilbert_value(&t, xi[0]), 0.0)
    }))
}

/// Multi-frequency Hilbert transform split into one piece per frequency.
pub fn mf_hilbert(theta: &FrequencySet) -> Result<MultiFreqOperator> {
    Ok(MultiFreqOperator::split(theta.clone(), mf_hilbert_symbol(theta)?))
}

/// The repository-wide bump `(1 - t^2)^3` on `[-1, 1]`.
pub fn bump(t: f64) -> f64 {
    let u = 1.0 - t * t;
    if u > 0.0 {
        u * u * u
    } else {
        0.0
    }
}

/// Profile used in [`hormander_symbol`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayProfile {
    /// `(1 - t^2)^3_+`.
    Bump,
    /// `sign(t) (1 - (1 - t^2)^3_+)`: a smoothed jump of size 2 at each frequency.
    Sign,
}

impl DecayProfile {
    fn eval(&self, t: f64) -> f64 {
        match self {
            DecayProfile::Bump => bump(t),
            DecayProfile::Sign => {
                if t == 0.0 {
                    0.0
                } else {
                    t.signum() * (1.0 - bump(t))
                }
            }
        }
    }
}

/// `m(xi) = sum_j psi((xi - xi_j)/sigma_j)` (radial in two dimensions), `sigma_j` half the
/// gap to the nearest other frequency.
pub fn hormander_symbol(theta: &FrequencySet, profile: DecayProfile) -> Symbol {
    let sig = local_scales(theta);
    let th = theta.clone();
    Symbol::from_fn(SymbolKind::Hormander, Some(theta.clone()), move |xi| {
        let mut s = 0.0;
        for (j, f) in th.iter().enumerate() {
            let t = if f.len() == 1 {
                (xi[0] - f[0]) / sig[j]
            } else {
                let d: f64 = f.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let dir = xi[0] - f[0];
                d.copysign(if dir == 0.0 { 1.0 } else { dir }) / sig[j]
            };
            s += profile.eval(t);
        }
        Complex64::new(s, 0.0)
    })
}

/// Finite-difference check of `|Delta^alpha m| <= C d(xi, Theta)^{-|alpha|}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HormanderCheck {
    /// `C` for `|alpha| = 0, 1, 2`.
    pub constants: [f64; 3],
    /// Rows `(lower edge of d bucket in lattice units, max |Delta m| / dxi)`.
    pub first_difference_table: Vec<(f64, f64)>,
}

/// Scans the lattice with axis-wise first and second differences; stencils touching
/// a point of `Theta` are skipped.
pub fn hormander_check(sym: &Symbol, theta: &FrequencySet, domain: &TorusDomain) -> Result<HormanderCheck> {
    if theta.dim() != domain.dim() {
        return Err(Error::DimensionMismatch("frequency set vs domain".into()));
    }
    let dx = domain.frequency_spacing();
    let dim = domain.dim();
    let m = domain.points_per_dim() as i64;
    let vals = sym.sample(domain)?;
    let lattice_index = |k: [i64; 2]| -> Option<usize> {
        if (0..dim).any(|d| k[d] < -m / 2 || k[d] >= m / 2) {
            None
        } else {
            Some(domain.flat_index(k))
        }
    };
    let mut consts = [0.0f64; 3];
    let mut buckets: std::collections::BTreeMap<i32, f64> = Default::default();
    let n_points = domain.len();
    for flat in 0..n_points {
        let [a, b] = domain.multi_index(flat);
        let k = [domain.signed_index(a), if dim == 2 { domain.signed_index(b) } else { 0 }];
        let xi = domain.frequency(flat);
        let dist = dist_to_set(&xi[..dim], theta)?;
        consts[0] = consts[0].max(vals[flat].norm());
        for ax in 0..dim {
            let mut kp = k;
            kp[ax] += 1;
            let mut km = k;
            km[ax] -= 1;
            let (Some(ip), Some(im)) = (lattice_index(kp), lattice_index(km)) else {
                continue;
            };
            let dmin = [ip, im, flat]
                .iter()
                .map(|&i| dist_to_set(&domain.frequency(i)[..dim], theta))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if dmin < 0.5 * dx {
                continue;
            }
            let d1 = (vals[ip] - vals[flat]).norm() / dx;
            let d2 = (vals[ip] - vals[flat] * 2.0 + vals[im]).norm() / (dx * dx);
            consts[1] = consts[1].max(d1 * dmin);
            consts[2] = consts[2].max(d2 * dmin * dmin);
            let bucket = (dist / dx).log2().floor() as i32;
            let e = buckets.entry(bucket).or_insert(0.0);
            *e = e.max(d1);
        }
    }
    Ok(HormanderCheck {
        constants: consts,
        first_difference_table: buckets.into_iter().map(|(b, v)| (2f64.powi(b), v)).collect(),
    })
}

/// `P(u) = int_0^u (1 - t^2)^3 dt`.
fn bump_antiderivative(u: f64) -> f64 {
    let u2 = u * u;
    u * (1.0 - u2 + 0.6 * u2 * u2 - u2 * u2 * u2 / 7.0)
}

/// Plateau cutoff: 1 on `[0, 1/2]`, 0 on `[1, inf)`, built from the bump.
pub fn plateau(u: f64) -> f64 {
    let u = u.abs();
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let p1 = bump_antiderivative(1.0);
        (p1 - bump_antiderivative(4.0 * u - 3.0)) / (2.0 * p1)
    }
}

/// Output of [`bump_sum_operator`].
#[derive(Debug, Clone)]
pub struct BumpSum {
    pub operator: MultiFreqOperator,
    pub cubes: Vec<Cube>,
    /// `sup_t sum_j (r_j t)^{n+1} / (1 + r_j t)^M`.
    pub c_r: f64,
    pub decay_exponent: u32,
}

/// `C(r_1, ..., r_N)` on a logarithmic grid of `t`.
pub fn bump_constant(radii: &[f64], n: usize, decay: u32) -> f64 {
    let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let lo = (1e-4 / rmax).ln();
    let hi = (1e4 / rmin).ln();
    let steps = 8000;
    (0..=steps)
        .map(|i| {
            let t = (lo + (hi - lo) * i as f64 / steps as f64).exp();
            radii
                .iter()
                .map(|&r| (r * t).powi(n as i32 + 1) / (1.0 + r * t).powi(decay as i32))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `T f = sum_j phi_j * f` with `hat phi_j` a smooth cutoff equal to 1 on `Q_j / 2`
/// and supported in `Q_j`; `Theta` is the set of centers.
pub fn bump_sum_operator(cubes: &[Cube], decay: Option<u32>) -> Result<BumpSum> {
    if cubes.is_empty() {
        return Err(Error::InvalidParameter("no cubes".into()));
    }
    let n = cubes[0].dim();
    if cubes.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch("cubes of mixed dimension".into()));
    }
    for i in 0..cubes.len() {
        for k in 0..i {
            let (a, b) = (&cubes[i], &cubes[k]);
            let overlap = (0..n).all(|d| {
                (a.center[d] - b.center[d]).abs() < (a.radius + b.radius) * (1.0 - 1e-12)
            });
            if overlap {
                return Err(Error::InvalidParameter(format!("cubes {k} and {i} overlap")));
            }
        }
    }
    let theta = FrequencySet::new(n, cubes.iter().map(|c| c.center.clone()).collect())?;
    let pieces = cubes
        .iter()
        .map(|c| {
            let c = c.clone();
            Symbol::from_fn(SymbolKind::Bump, Some(theta.clone()), move |xi| {
                let v: f64 = (0..c.dim())
                    .map(|d| plateau((xi[d] - c.center[d]) / c.radius))
                    .product();
                Complex64::new(v, 0.0)
            })
        })
        .collect();
    let decay = decay.unwrap_or(n as u32 + 2);
    let radii: Vec<f64> = cubes.iter().map(|c| c.radius).collect();
    Ok(BumpSum {
        operator: MultiFreqOperator::from_pieces(theta, pieces)?,
        cubes: cubes.to_vec(),
        c_r: bump_constant(&radii, n, decay),
        decay_exponent: decay,
    })
}

/// Measured regularity of the demodulated kernels `e^{-i xi_j . z} K_j(z)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRegularity {
    /// `max_z sum_j |grad K~_j(z)| |z|^{n+1} / C(r)` over `2h <= |z| <= L/4`.
    pub constant: f64,
    /// Same maximum without dividing by `C(r)`.
    pub raw: f64,
}

/// Finite-difference gradient scan of the demodulated bump kernels.
pub fn bump_kernel_regularity(bs: &BumpSum, domain: &TorusDomain) -> Result<KernelRegularity> {
    let n = domain.dim();
    let h = domain.spacing();
    let l = domain.side_length();
    let theta = bs.operator.theta();
    let len = domain.len();
    let mut grad_sum = vec![0.0f64; len];
    for j in 0..theta.len() {
        let kern = bs.operator.piece_on(j, domain)?.kernel();
        let xi = theta.get(j).to_vec();
        let demod: Vec<Complex64> = (0..len)
            .map(|i| {
                let z = signed_displacement(domain, i);
                let ph: f64 = (0..n).map(|d| xi[d] * z[d]).sum();
                kern.values()[i] * Complex64::from_polar(1.0, -ph)
            })
            .collect();
        for (i, g) in grad_sum.iter_mut().enumerate() {
            let [a, b] = domain.multi_index(i);
            let mut g2 = 0.0;
            for ax in 0..n {
                let mut p = [a as i64, b as i64];
                let mut q = p;
                p[ax] += 1;
                q[ax] -= 1;
                let dvz = (demod[domain.flat_index(p)] - demod[domain.flat_index(q)]) / (2.0 * h);
                g2 += dvz.norm_sqr();
            }
            *g += g2.sqrt();
        }
    }
    let mut raw: f64 = 0.0;
    for (i, g) in grad_sum.iter().enumerate() {
        let z = signed_displacement(domain, i);
        let r = z[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= 2.0 * h && r <= l / 4.0 {
            raw = raw.max(g * r.powi(n as i32 + 1));
        }
    }
    Ok(KernelRegularity {
        constant: raw / bs.c_r,
        raw,
    })
}

/// Displacement of a grid point from the origin, folded into `(-L/2, L/2]`.
pub fn signed_displacement(domain: &TorusDomain, flat: usize) -> [f64; 2] {
    let l = domain.side_length();
    let p = domain.point(flat);
    let fold = |x: f64| if x > l / 2.0 { x - l } else { x };
    [fold(p[0]), fold(p[1])]
}

fn lq_aggregate(parts: &[GridFunction], q: f64) -> Result<GridFunction> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    let d = *parts[0].domain();
    let out: Vec<f64> = (0..d.len())
        .into_par_iter()
        .map(|i| {
            if q.is_infinite() {
                parts.iter().fold(0.0f64, |m, p| m.max(p.values()[i].norm()))
            } else {
                parts
                    .iter()
                    .map(|p| p.values()[i].norm().powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q)
            }
        })
        .collect();
    GridFunction::from_real(d, &out)
}

/// `(sum_j |T(e^{i theta_j .} f)|^q)^{1/q}` pointwise; `q = inf` gives the max.
pub fn modulated_lq_functional(
    t: &dyn GridOperator,
    theta: &FrequencySet,
    f: &GridFunction,
    q: f64,
) -> Result<GridFunction> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    let parts = (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mf = GridFunction::plane_wave(*f.domain(), theta.get(j)).mul(f)?;
            t.apply(&mf)
        })
        .collect::<Result<Vec<_>>>()?;
    lq_aggregate(&parts, q)
}

/// Partition of the line into `(-inf, xi_1), [xi_1, xi_2), ..., [xi_N, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    breakpoints: Vec<f64>,
}

impl IntervalPartition {
    /// Breakpoints are sorted; an empty list gives the whole line.
    pub fn from_breakpoints(points: &[f64]) -> Result<Self> {
        let mut b = points.to_vec();
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("breakpoints must be finite".into()));
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        Ok(Self { breakpoints: b })
    }

    pub fn from_theta(theta: &FrequencySet) -> Result<Self> {
        if theta.dim() != 1 {
            return Err(Error::InvalidParameter("interval partitions are one-dimensional".into()));
        }
        Self::from_breakpoints(&theta.first_coords())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.breakpoints.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the interval containing `xi`.
    pub fn bin(&self, xi: f64) -> usize {
        self.breakpoints.partition_point(|&t| t <= xi + 1e-12 * (1.0 + xi.abs()))
    }

    /// Sharp frequency projections `F^{-1}[1_omega F f]`, one per interval.
    pub fn projections(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        let d = *f.domain();
        if d.dim() != 1 {
            return Err(Error::InvalidParameter("interval partitions are one-dimensional".into()));
        }
        let spec = f.dft();
        let bins: Vec<usize> = (0..d.len()).map(|k| self.bin(d.frequency(k)[0])).collect();
        Ok((0..self.len())
            .into_par_iter()
            .map(|w| {
                let v = spec
                    .values()
                    .iter()
                    .zip(&bins)
                    .map(|(&v, &b)| if b == w { v } else { ZERO })
                    .collect();
                GridFunction::new(d, v).expect("same length").idft()
            })
            .collect())
    }
}

/// `(sum_omega |P_omega f|^q)^{1/q}` pointwise.
pub fn rubio_functional(partition: &IntervalPartition, f: &GridFunction, q: f64) -> Result<GridFunction> {
    let parts = partition.projections(f)?;
    lq_aggregate(&parts, q)
}
