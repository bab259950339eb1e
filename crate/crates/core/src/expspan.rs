//! Spans of exponentials `e^{i xi . x}`, `xi` in a frequency set, restricted to boxes:
//! closed-form Gram systems, grid projections in `L^2` and `L^s`, and span constants.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqset::{sumset, FrequencySet};
use crate::grid::{Cube, GridFunction, IndexBox, TorusDomain};

/// Relative eigenvalue floor of closed-form Gram matrices.
pub const GRAM_FLOOR: f64 = 1e-12;

/// Singular values of a sampled exponential matrix below `SVD_FLOOR * sqrt(rows)` are dropped.
pub const SVD_FLOOR: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `int_{c-r}^{c+r} e^{i theta y} dy`.
fn interval_integral(theta: f64, c: f64, r: f64) -> Complex64 {
    let t = theta * r;
    let sinc = if t.abs() < 1e-4 {
        1.0 - t * t / 6.0 + t.powi(4) / 120.0
    } else {
        t.sin() / t
    };
    Complex64::from_polar(2.0 * r * sinc, theta * c)
}

/// Closed-form Gram matrix of the exponentials over a box, with its eigensystem.
#[derive(Debug, Clone)]
pub struct GramSystem {
    theta: FrequencySet,
    region: Cube,
    gram: DMatrix<Complex64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
    condition_estimate: f64,
    clustered_pairs: Vec<(usize, usize)>,
}

impl GramSystem {
    /// `gram[j][k] = int_region e^{i (xi_j - xi_k) . y} dy`.
    pub fn new(theta: &FrequencySet, region: &Cube) -> Result<Self> {
        if theta.dim() != region.dim() {
            return Err(Error::DimensionMismatch("frequency set vs region".into()));
        }
        let n = theta.len();
        let dim = theta.dim();
        let mut gram = DMatrix::from_element(n, n, ZERO);
        let mut clustered = Vec::new();
        for j in 0..n {
            for k in 0..n {
                let mut v = Complex64::new(1.0, 0.0);
                let mut sep2 = 0.0;
                for d in 0..dim {
                    let th = theta.get(j)[d] - theta.get(k)[d];
                    sep2 += th * th;
                    v *= interval_integral(th, region.center[d], region.radius);
                }
                if j == k {
                    v = Complex64::new(region.measure(), 0.0);
                }
                gram[(j, k)] = v;
                if k < j && sep2.sqrt() * region.radius < 1e-6 {
                    clustered.push((k, j));
                }
            }
        }
        let eig = SymmetricEigen::new(gram.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition_estimate = if min > 0.0 { max / min } else { f64::INFINITY };
        Ok(Self {
            theta: theta.clone(),
            region: region.clone(),
            gram,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            condition_estimate,
            clustered_pairs: clustered,
        })
    }

    pub fn theta(&self) -> &FrequencySet {
        &self.theta
    }

    pub fn region(&self) -> &Cube {
        &self.region
    }

    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn clustered_pairs(&self) -> &[(usize, usize)] {
        &self.clustered_pairs
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.min()
    }

    /// Eigenvalue floor `GRAM_FLOOR * |region|`.
    pub fn floor(&self) -> f64 {
        GRAM_FLOOR * self.region.measure()
    }

    /// Errors when an eigenvalue lies below the floor, naming the closest pairs.
    pub fn require_regular(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min >= self.floor() {
            return Ok(());
        }
        let mut pairs = self.clustered_pairs.clone();
        if pairs.is_empty() {
            let mut all: Vec<(f64, usize, usize)> = Vec::new();
            for j in 0..self.theta.len() {
                for k in 0..j {
                    let s: f64 = (0..self.theta.dim())
                        .map(|d| (self.theta.get(j)[d] - self.theta.get(k)[d]).powi(2))
                        .sum();
                    all.push((s, k, j));
                }
            }
            all.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs = all.iter().take(5).map(|&(_, k, j)| (k, j)).collect();
        }
        Err(Error::SingularGram {
            min_eigenvalue: min,
            pairs,
        })
    }

    /// `e(x)^* G^+ e(x)` with `e(x) = (e^{i xi_j . x})_j`, eigenvalues below the floor dropped.
    pub fn kernel_diagonal(&self, x: &[f64]) -> f64 {
        let n = self.theta.len();
        let e: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, dot(self.theta.get(j), x)))
            .collect();
        let floor = self.floor();
        let mut acc = 0.0;
        for k in 0..n {
            let lam = self.eigenvalues[k];
            if lam < floor {
                continue;
            }
            let w: Complex64 = (0..n).map(|j| self.eigenvectors[(j, k)].conj() * e[j]).sum();
            acc += w.norm_sqr() / lam;
        }
        acc
    }
}

/// An element `sum_j c_j e^{i xi_j . x}` of the span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanElement {
    pub theta: FrequencySet,
    pub coefficients: Vec<Complex64>,
}

impl SpanElement {
    pub fn zero(theta: &FrequencySet) -> Self {
        Self {
            theta: theta.clone(),
            coefficients: vec![ZERO; theta.len()],
        }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.theta
            .iter()
            .zip(&self.coefficients)
            .map(|(xi, c)| c * Complex64::from_polar(1.0, dot(xi, x)))
            .sum()
    }

    /// Samples the element on a whole grid.
    pub fn to_grid(&self, domain: TorusDomain) -> GridFunction {
        GridFunction::from_fn(domain, |x| self.eval(x))
    }
}

/// Orthonormal basis of the sampled span on a box shape (box origin at 0).
#[derive(Debug)]
pub struct LocalSpan {
    shape: [usize; 2],
    basis: DMatrix<Complex64>,
    coefficient_map: DMatrix<Complex64>,
}

impl LocalSpan {
    pub fn new(theta: &FrequencySet, domain: &TorusDomain, shape: [usize; 2]) -> Self {
        let h = domain.spacing();
        let dim = domain.dim();
        let rows = if dim == 1 { shape[0] } else { shape[0] * shape[1] };
        let n = theta.len();
        let a = DMatrix::from_fn(rows, n, |k, j| {
            let x = if dim == 1 {
                [k as f64 * h, 0.0]
            } else {
                [(k / shape[1]) as f64 * h, (k % shape[1]) as f64 * h]
            };
            Complex64::from_polar(1.0, dot(theta.get(j), &x[..dim]))
        });
        let svd = SVD::new(a, true, true);
        let u = svd.u.expect("left singular vectors requested");
        let vt = svd.v_t.expect("right singular vectors requested");
        let floor = SVD_FLOOR * (rows as f64).sqrt();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > floor)
            .collect();
        let r = keep.len();
        let basis = DMatrix::from_fn(rows, r, |i, c| u[(i, keep[c])]);
        // coefficients = V S^{-1} U^* values
        let coefficient_map = DMatrix::from_fn(n, r, |j, c| {
            vt[(keep[c], j)].conj() / svd.singular_values[keep[c]]
        });
        Self {
            shape,
            basis,
            coefficient_map,
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Dimension of the retained span.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn rows(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    /// `U^* g`.
    pub fn reduce(&self, g: &[Complex64]) -> DVector<Complex64> {
        self.basis.ad_mul(&DVector::from_column_slice(g))
    }

    /// `U y` as a plain vector.
    pub fn expand(&self, y: &DVector<Complex64>) -> Vec<Complex64> {
        (&self.basis * y).as_slice().to_vec()
    }

    /// Orthogonal projection `U U^* g` of local samples.
    pub fn project(&self, g: &[Complex64]) -> Vec<Complex64> {
        self.expand(&self.reduce(g))
    }

    /// Span coefficients of `U y` for a box whose first point sits at `origin`.
    pub fn coefficients(
        &self,
        theta: &FrequencySet,
        y: &DVector<Complex64>,
        origin: &[f64],
    ) -> Vec<Complex64> {
        let c = &self.coefficient_map * y;
        (0..theta.len())
            .map(|j| c[j] * Complex64::from_polar(1.0, -dot(theta.get(j), origin)))
            .collect()
    }
}

/// Per-shape cache of [`LocalSpan`]s for one frequency set and domain.
#[derive(Debug)]
pub struct SpanCache {
    theta: FrequencySet,
    domain: TorusDomain,
    spans: Mutex<HashMap<[usize; 2], Arc<LocalSpan>>>,
}

impl SpanCache {
    pub fn new(theta: &FrequencySet, domain: &TorusDomain) -> Result<Self> {
        if theta.dim() != domain.dim() {
            return Err(Error::DimensionMismatch("frequency set vs domain".into()));
        }
        Ok(Self {
            theta: theta.clone(),
            domain: *domain,
            spans: Mutex::new(HashMap::new()),
        })
    }

    pub fn theta(&self) -> &FrequencySet {
        &self.theta
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn get(&self, shape: [usize; 2]) -> Arc<LocalSpan> {
        if let Some(s) = self.spans.lock().unwrap_or_else(|e| e.into_inner()).get(&shape) {
            return s.clone();
        }
        let s = Arc::new(LocalSpan::new(&self.theta, &self.domain, shape));
        self.spans
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(shape)
            .or_insert(s)
            .clone()
    }
}

/// Result of a projection onto the span over a target box.
#[derive(Debug, Clone)]
pub struct Projection {
    pub element: SpanElement,
    pub target: IndexBox,
    /// Values of the projection at the target points (local order).
    pub values: Vec<Complex64>,
    /// `f 1_Q` at the target points (local order).
    pub data: Vec<Complex64>,
    /// `||f 1_Q - phi||_{L^s(target)}`.
    pub objective: f64,
    /// Dimension of the sampled span that was used.
    pub rank: usize,
    pub iterations: usize,
}

/// Options of the IRLS solver behind [`project_ls`].
#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Stop when one sweep lowers the objective by less than this fraction.
    pub tol: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
        }
    }
}

fn quadrature_norm(v: &[Complex64], s: f64, cell: f64) -> f64 {
    let sum: f64 = v.iter().map(|z| z.norm().powf(s)).sum();
    (sum * cell).powf(1.0 / s)
}

/// Samples `f 1_Q` on the target box.
fn masked_data(f: &GridFunction, q: &IndexBox, target: &IndexBox) -> Vec<Complex64> {
    let d = f.domain();
    let inside: std::collections::HashSet<usize> = q.flat_indices(d).into_iter().collect();
    target
        .flat_indices(d)
        .into_iter()
        .map(|i| if inside.contains(&i) { f.values()[i] } else { ZERO })
        .collect()
}

/// `L^2(target)` projection of `f 1_Q` using a cached span.
pub fn project_l2_boxes(
    f: &GridFunction,
    cache: &SpanCache,
    q: &IndexBox,
    target: &IndexBox,
) -> Projection {
    let d = f.domain();
    let data = masked_data(f, q, target);
    let span = cache.get(target.shape());
    let y = span.reduce(&data);
    let values = span.expand(&y);
    let resid: Vec<Complex64> = data.iter().zip(&values).map(|(a, b)| a - b).collect();
    let objective = quadrature_norm(&resid, 2.0, d.cell_volume());
    let coefficients = span.coefficients(cache.theta(), &y, &target.origin(d)[..d.dim()]);
    Projection {
        element: SpanElement {
            theta: cache.theta().clone(),
            coefficients,
        },
        target: *target,
        values,
        data,
        objective,
        rank: span.rank(),
        iterations: 0,
    }
}

/// Best `L^2(target)` approximation of `f 1_Q` from the span.
pub fn project_l2(
    f: &GridFunction,
    theta: &FrequencySet,
    q: &Cube,
    target: &Cube,
) -> Result<Projection> {
    let d = f.domain();
    let cache = SpanCache::new(theta, d)?;
    let qb = q.resolve(d)?;
    let tb = target.resolve(d)?;
    Ok(project_l2_boxes(f, &cache, &qb, &tb))
}

/// Minimizes `sum_k |g_k - (U y)_k|^s` over `y` by reweighted least squares
/// started from the `L^2` solution. Returns `(y, objective history)`.
fn irls(
    span: &LocalSpan,
    g: &[Complex64],
    s: f64,
    opts: &IrlsOptions,
) -> std::result::Result<(DVector<Complex64>, Vec<f64>), (DVector<Complex64>, Vec<f64>)> {
    let u = span.basis();
    let gmax = g.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut y = span.reduce(g);
    let objective = |y: &DVector<Complex64>| -> f64 {
        let v = u * y;
        g.iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).norm().powf(s))
            .sum::<f64>()
    };
    let mut obj = objective(&y);
    let mut history = vec![obj];
    if gmax == 0.0 || (s - 2.0).abs() < 1e-15 || span.rank() == 0 {
        return Ok((y, history));
    }
    let eps = 1e-9 * gmax;
    let gv = DVector::from_column_slice(g);
    for _ in 0..opts.max_iter {
        let r = &gv - u * &y;
        let w: Vec<f64> = r.iter().map(|z| z.norm().max(eps).powf(s - 2.0)).collect();
        let mut wu = u.clone();
        for (i, mut row) in wu.row_iter_mut().enumerate() {
            row *= Complex64::new(w[i], 0.0);
        }
        let b = u.ad_mul(&wu);
        let rhs = wu.ad_mul(&gv);
        let y_ls = match b.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match b.lu().solve(&rhs) {
                Some(v) => v,
                None => break,
            },
        };
        let dir = &y_ls - &y;
        let mut best = (obj, 0.0);
        let mut candidates = vec![1.0, 0.5];
        if s > 2.0 {
            candidates.push(1.0 / (s - 1.0));
        }
        for &t in &candidates {
            let o = objective(&(&y + &dir * Complex64::new(t, 0.0)));
            if o < best.0 {
                best = (o, t);
            }
        }
        let mut t = 0.25;
        while best.1 == 0.0 && t > 1e-6 {
            let o = objective(&(&y + &dir * Complex64::new(t, 0.0)));
            if o < best.0 {
                best = (o, t);
            }
            t *= 0.5;
        }
        if best.1 == 0.0 {
            return Ok((y, history));
        }
        y += &dir * Complex64::new(best.1, 0.0);
        let improvement = obj - best.0;
        obj = best.0;
        history.push(obj);
        if improvement <= opts.tol * obj.max(f64::MIN_POSITIVE) {
            return Ok((y, history));
        }
    }
    Err((y, history))
}

/// `L^s(target)` projection of `f 1_Q` using a cached span.
pub fn project_ls_boxes(
    f: &GridFunction,
    cache: &SpanCache,
    q: &IndexBox,
    target: &IndexBox,
    s: f64,
    opts: &IrlsOptions,
) -> Result<Projection> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("s must lie in (1, inf), got {s}")));
    }
    let d = f.domain();
    let data = masked_data(f, q, target);
    let span = cache.get(target.shape());
    let origin = target.origin(d);
    match irls(&span, &data, s, opts) {
        Ok((y, history)) => {
            let values = span.expand(&y);
            let resid: Vec<Complex64> = data.iter().zip(&values).map(|(a, b)| a - b).collect();
            Ok(Projection {
                element: SpanElement {
                    theta: cache.theta().clone(),
                    coefficients: span.coefficients(cache.theta(), &y, &origin[..d.dim()]),
                },
                target: *target,
                objective: quadrature_norm(&resid, s, d.cell_volume()),
                values,
                data,
                rank: span.rank(),
                iterations: history.len() - 1,
            })
        }
        Err((y, history)) => Err(Error::NotConverged {
            iterations: history.len() - 1,
            best_objective: (history.last().copied().unwrap_or(f64::NAN) * d.cell_volume())
                .powf(1.0 / s),
            history,
            best_coefficients: span.coefficients(cache.theta(), &y, &origin[..d.dim()]),
        }),
    }
}

/// Approximate best `L^s(target)` approximation of `f 1_Q` from the span.
pub fn project_ls(
    f: &GridFunction,
    theta: &FrequencySet,
    q: &Cube,
    target: &Cube,
    s: f64,
    opts: &IrlsOptions,
) -> Result<Projection> {
    let d = f.domain();
    let cache = SpanCache::new(theta, d)?;
    let qb = q.resolve(d)?;
    let tb = target.resolve(d)?;
    project_ls_boxes(f, &cache, &qb, &tb, s, opts)
}

/// Options of [`span_constant`].
#[derive(Debug, Clone, Copy)]
pub struct SpanConstantOptions {
    /// Sample points per diameter of `Q`; must be at least `16 N` when set.
    pub samples_per_diameter: Option<usize>,
    /// Number of multi-start maximizations for `p < 2`.
    pub starts: usize,
    pub seed: u64,
    /// Use the multi-start lower bound even at `p = 2`.
    pub force_lower_bound: bool,
}

impl Default for SpanConstantOptions {
    fn default() -> Self {
        Self {
            samples_per_diameter: None,
            starts: 64,
            seed: 0x5eed,
            force_lower_bound: false,
        }
    }
}

/// Value of a span constant computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanConstant {
    pub p: f64,
    pub value: f64,
    pub lower_bound_only: bool,
    /// Point of `Q` where the best ratio was observed.
    pub argmax: Vec<f64>,
    pub samples_per_diameter: usize,
}

fn resolve_samples(theta: &FrequencySet, q: &Cube, opts: &SpanConstantOptions) -> Result<usize> {
    let n = theta.len();
    let min = 16 * n;
    match opts.samples_per_diameter {
        Some(s) if s < min => Err(Error::Precondition(format!(
            "{s} samples per diameter; need at least 16*N = {min}"
        ))),
        Some(s) => Ok(s),
        None => {
            let oscill = (8.0 * theta.diameter() * 2.0 * q.radius / (2.0 * std::f64::consts::PI))
                .ceil() as usize;
            Ok(min.max(oscill))
        }
    }
}

/// Points `c - r + i * 2r/n`, `i = 0..=n`, per axis (tensor grid in two dimensions).
fn closed_samples(q: &Cube, n: usize) -> Vec<Vec<f64>> {
    let axis = |d: usize| -> Vec<f64> {
        (0..=n)
            .map(|i| q.center[d] - q.radius + i as f64 * 2.0 * q.radius / n as f64)
            .collect()
    };
    if q.dim() == 1 {
        axis(0).into_iter().map(|x| vec![x]).collect()
    } else {
        let a = axis(0);
        let b = axis(1);
        a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect()
    }
}

/// `sup_{phi in span} ||phi||_{L^inf(Q)} / (avg_{3Q} |phi|^p)^{1/p}` for `p in [1, 2]`.
///
/// At `p = 2` the value is exact: `sup_x sqrt(|3Q| e(x)^* G^{-1} e(x))` over sample
/// points of `Q`. For `p < 2` it is a lower bound from multi-start maximization.
pub fn span_constant(
    theta: &FrequencySet,
    q: &Cube,
    p: f64,
    opts: &SpanConstantOptions,
) -> Result<SpanConstant> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [1, 2], got {p}")));
    }
    if theta.dim() != q.dim() {
        return Err(Error::DimensionMismatch("frequency set vs box".into()));
    }
    let n_s = resolve_samples(theta, q, opts)?;
    let triple = q.dilate(3.0);
    let gram = GramSystem::new(theta, &triple)?;
    gram.require_regular()?;
    if theta.len() == 1 {
        return Ok(SpanConstant {
            p,
            value: 1.0,
            lower_bound_only: false,
            argmax: q.center.clone(),
            samples_per_diameter: n_s,
        });
    }
    if p == 2.0 && !opts.force_lower_bound {
        let pts = closed_samples(q, n_s);
        let vals: Vec<f64> = pts.par_iter().map(|x| gram.kernel_diagonal(x)).collect();
        let (imax, kmax) = vals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        return Ok(SpanConstant {
            p,
            value: (triple.measure() * kmax).sqrt(),
            lower_bound_only: false,
            argmax: pts[imax].clone(),
            samples_per_diameter: n_s,
        });
    }
    lower_bound_constant(theta, q, p, n_s, opts)
}

/// Sampled span on cell midpoints of `3Q`, `3 n_s` cells per axis.
struct SampledSpan {
    basis: DMatrix<Complex64>,
    points: Vec<Vec<f64>>,
    in_q: Vec<usize>,
}

fn sampled_span(theta: &FrequencySet, q: &Cube, n_s: usize) -> SampledSpan {
    let cells = 3 * n_s;
    let step = 6.0 * q.radius / cells as f64;
    let axis = |d: usize| -> Vec<f64> {
        (0..cells)
            .map(|i| q.center[d] - 3.0 * q.radius + (i as f64 + 0.5) * step)
            .collect()
    };
    let inq = |i: usize| i >= n_s && i < 2 * n_s;
    let mut points = Vec::new();
    let mut in_q = Vec::new();
    if q.dim() == 1 {
        for (i, x) in axis(0).into_iter().enumerate() {
            if inq(i) {
                in_q.push(points.len());
            }
            points.push(vec![x]);
        }
    } else {
        let a = axis(0);
        let b = axis(1);
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                if inq(i) && inq(j) {
                    in_q.push(points.len());
                }
                points.push(vec![x, y]);
            }
        }
    }
    let e = DMatrix::from_fn(points.len(), theta.len(), |k, j| {
        Complex64::from_polar(1.0, dot(theta.get(j), &points[k]))
    });
    let rows = points.len();
    let svd = SVD::new(e, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let floor = SVD_FLOOR * (rows as f64).sqrt();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > floor)
        .collect();
    let basis = DMatrix::from_fn(rows, keep.len(), |i, c| u[(i, keep[c])]);
    SampledSpan {
        basis,
        points,
        in_q,
    }
}

fn sampled_ratio(values: &[Complex64], in_q: &[usize], p: f64) -> (f64, usize) {
    let (imax, sup) = in_q
        .iter()
        .map(|&i| (i, values[i].norm()))
        .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
    let avg = (values.iter().map(|z| z.norm().powf(p)).sum::<f64>() / values.len() as f64)
        .powf(1.0 / p);
    if avg == 0.0 {
        (0.0, imax)
    } else {
        (sup / avg, imax)
    }
}

/// Minimizes `sum_k w_k |phi_k|^2` subject to `phi(x*) = 1`, reweighting towards `L^p`.
fn constrained_min_norm(
    basis: &DMatrix<Complex64>,
    star: usize,
    p_stages: &[f64],
    in_q: &[usize],
    p_eval: f64,
) -> (f64, usize) {
    let rows = basis.nrows();
    let r = basis.ncols();
    let ustar: DVector<Complex64> =
        DVector::from_iterator(r, basis.row(star).iter().map(|z| z.conj()));
    let mut weights = vec![1.0; rows];
    let mut best = (1.0, star);
    for &ps in p_stages {
        let iters = if ps == 2.0 { 1 } else { 60 };
        let mut values: Vec<Complex64> = Vec::new();
        for _ in 0..iters {
            let mut wu = basis.clone();
            for (i, mut row) in wu.row_iter_mut().enumerate() {
                row *= Complex64::new(weights[i], 0.0);
            }
            let b = basis.ad_mul(&wu);
            let z = match b.clone().cholesky() {
                Some(ch) => ch.solve(&ustar),
                None => match b.lu().solve(&ustar) {
                    Some(z) => z,
                    None => break,
                },
            };
            let denom: Complex64 = basis.row(star).iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            if denom.norm() == 0.0 {
                break;
            }
            let z = z / denom;
            let new_values: Vec<Complex64> = (basis * &z).as_slice().to_vec();
            let vmax = new_values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            let eps = 1e-9 * vmax.max(1e-300);
            let change = if values.is_empty() {
                f64::INFINITY
            } else {
                values
                    .iter()
                    .zip(&new_values)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    / vmax.max(1e-300)
            };
            values = new_values;
            for (w, v) in weights.iter_mut().zip(&values) {
                *w = v.norm().max(eps).powf(ps - 2.0);
            }
            if change < 1e-10 {
                break;
            }
        }
        if !values.is_empty() {
            let cand = sampled_ratio(&values, in_q, p_eval);
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }
    best
}

fn lower_bound_constant(
    theta: &FrequencySet,
    q: &Cube,
    p: f64,
    n_s: usize,
    opts: &SpanConstantOptions,
) -> Result<SpanConstant> {
    let ss = sampled_span(theta, q, n_s);
    let mut stages: Vec<f64> = [2.0, 1.5, 1.25, 1.0].into_iter().filter(|&s| s > p).collect();
    stages.push(p);
    let leverage: Vec<f64> = ss
        .in_q
        .iter()
        .map(|&i| ss.basis.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let lev_max = leverage
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
        .0;
    let nq = ss.in_q.len();
    let fixed = [lev_max, 0, nq - 1, nq / 2];
    let stars: Vec<usize> = (0..opts.starts.max(1))
        .map(|k| {
            if k < fixed.len() {
                ss.in_q[fixed[k]]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                ss.in_q[rng.random_range(0..nq)]
            }
        })
        .collect();
    let results: Vec<(f64, usize)> = stars
        .par_iter()
        .map(|&star| constrained_min_norm(&ss.basis, star, &stages, &ss.in_q, p))
        .collect();
    let best = results
        .iter()
        .fold((1.0, ss.in_q[nq / 2]), |a, &v| if v.0 > a.0 { v } else { a });
    Ok(SpanConstant {
        p,
        value: best.0,
        lower_bound_only: true,
        argmax: ss.points[best.1].clone(),
        samples_per_diameter: n_s,
    })
}

/// Upper bound for the `p = 2k` span constant routed through the sumset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvenPBound {
    pub k: usize,
    pub p: f64,
    pub sumset_size: usize,
    /// `C_2(Theta^k)^{1/k}`.
    pub certified_bound: f64,
    /// `(#Theta^k)^{1/(2k)}`.
    pub sumset_envelope: f64,
    /// `(N^k)^{1/(2k)} = N^{1/2}`, the bound from `#Theta^k <= N^k`.
    pub trivial_envelope: f64,
}

/// Bounds `||phi||_{L^inf(Q)} <= C (avg_{3Q} |phi|^{2k})^{1/(2k)}` by applying the
/// exact `p = 2` constant to `phi^k`, which lies in the span of the sumset.
pub fn span_constant_even_p(
    theta: &FrequencySet,
    q: &Cube,
    k: usize,
    opts: &SpanConstantOptions,
) -> Result<EvenPBound> {
    let sk = sumset(theta, k)?;
    let mut o = *opts;
    o.force_lower_bound = false;
    if let Some(s) = o.samples_per_diameter {
        o.samples_per_diameter = Some(s.max(16 * sk.len()));
    }
    let c2 = span_constant(&sk, q, 2.0, &o)?;
    Ok(EvenPBound {
        k,
        p: 2.0 * k as f64,
        sumset_size: sk.len(),
        certified_bound: c2.value.powf(1.0 / k as f64),
        sumset_envelope: (sk.len() as f64).powf(1.0 / (2.0 * k as f64)),
        trivial_envelope: (theta.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gram_diagonal_is_measure_and_hermitian() {
        let t = FrequencySet::from_1d(&[0.0, 1.3, 2.9]).unwrap();
        let q = Cube::new(vec![0.7], 1.1).unwrap();
        let g = GramSystem::new(&t, &q).unwrap();
        for j in 0..3 {
            assert_eq!(g.gram()[(j, j)].re, q.measure());
            for k in 0..3 {
                assert!((g.gram()[(j, k)] - g.gram()[(k, j)].conj()).norm() < 1e-14);
            }
        }
        let quad: Complex64 = (0..200000)
            .map(|i| {
                let y = -0.4 + (i as f64 + 0.5) * 2.2 / 200000.0;
                Complex64::from_polar(2.2 / 200000.0, (1.3 - 2.9) * y)
            })
            .sum();
        assert!((g.gram()[(1, 2)] - quad).norm() < 1e-9);
    }

    #[test]
    fn clustered_pair_is_reported() {
        let t = FrequencySet::from_1d(&[0.0, 1e-8]).unwrap();
        let q = Cube::new(vec![0.0], 1.0).unwrap();
        let g = GramSystem::new(&t, &q).unwrap();
        assert_eq!(g.clustered_pairs(), &[(0, 1)]);
        match g.require_regular() {
            Err(Error::SingularGram { pairs, .. }) => assert_eq!(pairs, vec![(0, 1)]),
            other => panic!("expected singular Gram, got {other:?}"),
        }
    }

    #[test]
    fn single_frequency_constant_is_one() {
        let t = FrequencySet::from_1d(&[2.5]).unwrap();
        let q = Cube::new(vec![0.0], 0.5).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let c = span_constant(&t, &q, p, &SpanConstantOptions::default()).unwrap();
            assert_eq!(c.value, 1.0);
        }
    }

    #[test]
    fn orthogonal_constant_is_sqrt_n() {
        let q = Cube::new(vec![0.0], PI / 3.0).unwrap();
        for n in [1usize, 2, 5, 9] {
            let t = FrequencySet::arithmetic(n).unwrap();
            let c = span_constant(&t, &q, 2.0, &SpanConstantOptions::default()).unwrap();
            assert!((c.value / (n as f64).sqrt() - 1.0).abs() < 1e-9, "n={n} {}", c.value);
        }
    }

    #[test]
    fn samples_precondition_is_enforced() {
        let t = FrequencySet::arithmetic(4).unwrap();
        let q = Cube::new(vec![0.0], 1.0).unwrap();
        let opts = SpanConstantOptions {
            samples_per_diameter: Some(10),
            ..Default::default()
        };
        assert!(matches!(
            span_constant(&t, &q, 2.0, &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn l2_projection_of_member_is_exact() {
        let d = TorusDomain::new(1, 2.0 * PI, 64).unwrap();
        let t = FrequencySet::from_1d(&[1.0, 3.5]).unwrap();
        let f = GridFunction::plane_wave(d, &[1.0]);
        let q = Cube::new(vec![PI], 1.0).unwrap();
        let pr = project_l2(&f, &t, &q, &q).unwrap();
        assert!(pr.objective < 1e-10);
        assert!((pr.element.coefficients[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(pr.element.coefficients[1].norm() < 1e-8);
    }

    #[test]
    fn ls_projection_member_has_zero_objective() {
        let d = TorusDomain::new(1, 2.0 * PI, 64).unwrap();
        let t = FrequencySet::from_1d(&[-2.0, 1.0]).unwrap();
        let f = GridFunction::plane_wave(d, &[-2.0]).scale(Complex64::new(0.3, 0.4));
        let q = Cube::new(vec![PI], PI / 2.0).unwrap();
        for s in [1.5, 3.0, 4.0] {
            let pr = project_ls(&f, &t, &q, &q, s, &IrlsOptions::default()).unwrap();
            assert!(pr.objective < 1e-9, "s={s}: {}", pr.objective);
        }
    }
}
