//! Generalized Bochner-Riesz multipliers on planar domains: Whitney covers,
//! partitions of unity, single-scale pieces, kernel norms and norm scans.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusDomain};
use crate::mfop::{plateau, signed_displacement, GridOperator, SpectralOperator};
use crate::opnorm::{gamma, norm_2_exact, norm_p_power_method, EstimateKind, PowerOptions};
use crate::weights::Weight;

/// Dilation of each Whitney cube carrying its bump.
pub const BUMP_DILATION: f64 = 1.1;
/// Default lower bound on `L 2^j` for kernel computations.
pub const WRAPAROUND_FLOOR: f64 = 64.0;

/// Bounded open subset of the frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlanarDomain {
    Disk { radius: f64 },
    Square { half_side: f64 },
    Annulus { inner: f64, outer: f64 },
}

fn norm2(x: [f64; 2]) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

impl PlanarDomain {
    pub fn unit_disk() -> Self {
        PlanarDomain::Disk { radius: 1.0 }
    }

    /// Parses `disk[:R]`, `square[:a]` or `annulus:r1:r2`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, default: Option<f64>| -> Result<f64> {
            match parts.get(i) {
                Some(v) => v.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}"))),
                None => default.ok_or_else(|| Error::Parse(format!("{s}: missing parameter"))),
            }
        };
        let d = match parts[0] {
            "disk" => PlanarDomain::Disk { radius: num(1, Some(1.0))? },
            "square" => PlanarDomain::Square { half_side: num(1, Some(1.0))? },
            "annulus" => PlanarDomain::Annulus {
                inner: num(1, Some(0.5))?,
                outer: num(2, Some(1.0))?,
            },
            other => return Err(Error::Parse(format!("unknown domain preset {other:?}"))),
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PlanarDomain::Disk { radius } => radius > 0.0,
            PlanarDomain::Square { half_side } => half_side > 0.0,
            PlanarDomain::Annulus { inner, outer } => inner >= 0.0 && outer > inner,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid domain {self:?}")))
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn distance(&self, xi: [f64; 2]) -> f64 {
        match *self {
            PlanarDomain::Disk { radius } => radius - norm2(xi),
            PlanarDomain::Square { half_side: a } => {
                let dx = xi[0].abs() - a;
                let dy = xi[1].abs() - a;
                if dx <= 0.0 && dy <= 0.0 {
                    -(dx.max(dy))
                } else {
                    -norm2([dx.max(0.0), dy.max(0.0)])
                }
            }
            PlanarDomain::Annulus { inner, outer } => {
                let r = norm2(xi);
                (r - inner).min(outer - r)
            }
        }
    }

    pub fn contains(&self, xi: [f64; 2]) -> bool {
        self.distance(xi) > 0.0
    }

    /// Minimum of the distance function over the closed square `[lo, lo + side]^2`.
    pub fn cube_distance(&self, lo: [f64; 2], side: f64) -> f64 {
        let hi = [lo[0] + side, lo[1] + side];
        let far = [lo[0].abs().max(hi[0].abs()), lo[1].abs().max(hi[1].abs())];
        let near = [
            0.0f64.clamp(lo[0], hi[0]).abs(),
            0.0f64.clamp(lo[1], hi[1]).abs(),
        ];
        match *self {
            PlanarDomain::Disk { radius } => radius - norm2(far),
            PlanarDomain::Square { half_side } => half_side - far[0].max(far[1]),
            PlanarDomain::Annulus { inner, outer } => (norm2(near) - inner).min(outer - norm2(far)),
        }
    }

    /// Half-width of a centered bounding square.
    pub fn extent(&self) -> f64 {
        match *self {
            PlanarDomain::Disk { radius } => radius,
            PlanarDomain::Square { half_side } => half_side,
            PlanarDomain::Annulus { outer, .. } => outer,
        }
    }
}

/// Two-dimensional torus whose frequency lattice has spacing `dxi`.
pub fn frequency_lattice(points_per_dim: usize, dxi: f64) -> Result<TorusDomain> {
    if !(dxi > 0.0) {
        return Err(Error::InvalidParameter("lattice spacing must be positive".into()));
    }
    TorusDomain::new(2, 2.0 * PI / dxi, points_per_dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub lo: [f64; 2],
    pub side: f64,
    /// `side / 2`.
    pub radius: f64,
    /// `floor(log2 radius)`.
    pub j: i32,
    /// Distance from the closed cube to the boundary.
    pub distance: f64,
}

impl WhitneyCube {
    pub fn center(&self) -> [f64; 2] {
        [self.lo[0] + self.radius, self.lo[1] + self.radius]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitneyCover {
    pub domain: PlanarDomain,
    pub cubes: Vec<WhitneyCube>,
    pub min_side: f64,
    /// `min_i r_i / d(O_i, boundary)`.
    pub c_low: f64,
    /// `max_i r_i / d(O_i, boundary)`.
    pub c_high: f64,
}

impl WhitneyCover {
    /// Cube counts per scale index `j`.
    pub fn scale_counts(&self) -> BTreeMap<i32, usize> {
        let mut m = BTreeMap::new();
        for c in &self.cubes {
            *m.entry(c.j).or_insert(0) += 1;
        }
        m
    }

    /// Centers of the cubes with scale index `j`.
    pub fn centers(&self, j: i32) -> Vec<[f64; 2]> {
        self.cubes.iter().filter(|c| c.j == j).map(|c| c.center()).collect()
    }

    /// True when no two cubes share interior points.
    pub fn is_disjoint(&self) -> bool {
        for (a, ca) in self.cubes.iter().enumerate() {
            for cb in &self.cubes[a + 1..] {
                let ov = (0..2).all(|d| {
                    ca.lo[d] < cb.lo[d] + cb.side && cb.lo[d] < ca.lo[d] + ca.side
                });
                if ov {
                    return false;
                }
            }
        }
        true
    }
}

/// Maximal dyadic squares with `sqrt(2) side <= d(center)`, selected top-down,
/// never smaller than `min_scale` lattice pixels.
pub fn whitney_cover(domain: &PlanarDomain, lattice: &TorusDomain, min_scale: f64) -> Result<WhitneyCover> {
    domain.validate()?;
    if lattice.dim() != 2 {
        return Err(Error::DimensionMismatch("Whitney covers live in the plane".into()));
    }
    if !(min_scale >= 2.0) {
        return Err(Error::Precondition(format!(
            "min_scale must be at least 2 lattice pixels, got {min_scale}"
        )));
    }
    let dxi = lattice.frequency_spacing();
    let half_width = lattice.points_per_dim() as f64 / 2.0 * dxi;
    if domain.extent() > half_width {
        return Err(Error::Precondition(format!(
            "domain extent {} exceeds the lattice half-width {half_width}",
            domain.extent()
        )));
    }
    let min_side = min_scale * dxi;
    let s0 = 2f64.powi(domain.extent().log2().ceil() as i32);
    let mut stack: Vec<([f64; 2], f64)> = vec![
        ([0.0, 0.0], s0),
        ([0.0, -s0], s0),
        ([-s0, 0.0], s0),
        ([-s0, -s0], s0),
    ];
    let mut cubes = Vec::new();
    while let Some((lo, side)) = stack.pop() {
        let c = [lo[0] + side / 2.0, lo[1] + side / 2.0];
        let dc = domain.distance(c);
        if SQRT_2 * side <= dc {
            let radius = side / 2.0;
            cubes.push(WhitneyCube {
                lo,
                side,
                radius,
                j: radius.log2().floor() as i32,
                distance: domain.cube_distance(lo, side),
            });
        } else if side / 2.0 >= min_side && dc > -side / SQRT_2 {
            let h = side / 2.0;
            for (a, b) in [(0.0, 0.0), (0.0, h), (h, 0.0), (h, h)] {
                stack.push(([lo[0] + a, lo[1] + b], h));
            }
        }
    }
    if cubes.is_empty() {
        return Err(Error::Precondition(format!(
            "no Whitney cube of side >= {min_side} fits in {domain:?}"
        )));
    }
    cubes.sort_by(|a, b| {
        b.side
            .total_cmp(&a.side)
            .then(a.lo[0].total_cmp(&b.lo[0]))
            .then(a.lo[1].total_cmp(&b.lo[1]))
    });
    let ratios = cubes.iter().map(|c| c.radius / c.distance);
    let (c_low, c_high) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    Ok(WhitneyCover {
        domain: *domain,
        cubes,
        min_side,
        c_low,
        c_high,
    })
}

/// `chi_i` on a rectangle of lattice indices (zero where uncovered).
#[derive(Debug, Clone)]
pub struct PouPiece {
    pub k0: [i64; 2],
    pub width: [usize; 2],
    pub values: Vec<f64>,
}

impl PouPiece {
    /// `(flat index, value)` for the nonzero entries.
    pub fn entries<'a>(&'a self, lattice: &'a TorusDomain) -> impl Iterator<Item = (usize, f64)> + 'a {
        (0..self.width[0]).flat_map(move |a| {
            (0..self.width[1]).filter_map(move |b| {
                let v = self.values[a * self.width[1] + b];
                (v != 0.0).then(|| {
                    (
                        lattice.flat_index([self.k0[0] + a as i64, self.k0[1] + b as i64]),
                        v,
                    )
                })
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub pieces: Vec<PouPiece>,
    /// Per lattice point: inside some Whitney cube.
    pub covered: Vec<bool>,
    /// `max_i ||Delta chi_i||_inf r_i` over covered neighbour pairs.
    pub derivative_constant: f64,
    /// Same maximum per scale index.
    pub derivative_by_scale: Vec<(i32, f64)>,
    /// `max |sum_i chi_i - 1|` over covered points.
    pub sum_error: f64,
}

fn index_range(lo: f64, hi: f64, dxi: f64) -> (i64, i64) {
    let a = (lo / dxi - 1e-9).ceil() as i64;
    let b = (hi / dxi - 1e-9).ceil() as i64;
    (a, b)
}

/// Profile equal to 1 for `t <= 1` and vanishing for `t >= BUMP_DILATION`.
fn collar_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else {
        plateau(0.5 + 0.5 * (t - 1.0) / (BUMP_DILATION - 1.0))
    }
}

/// `chi_i = eta_i / sum_k eta_k` where `eta_i` is 1 on the cube and decays to 0
/// across the dilated collar.
pub fn partition_of_unity(cover: &WhitneyCover, lattice: &TorusDomain) -> Result<PartitionOfUnity> {
    let dxi = lattice.frequency_spacing();
    let m = lattice.points_per_dim() as i64;
    let mut covered = vec![false; lattice.len()];
    for c in &cover.cubes {
        let (a0, a1) = index_range(c.lo[0], c.lo[0] + c.side, dxi);
        let (b0, b1) = index_range(c.lo[1], c.lo[1] + c.side, dxi);
        for a in a0..a1 {
            for b in b0..b1 {
                covered[lattice.flat_index([a, b])] = true;
            }
        }
    }
    let raw: Vec<PouPiece> = cover
        .cubes
        .par_iter()
        .map(|c| {
            let half = BUMP_DILATION * c.radius;
            let ctr = c.center();
            let k0 = [
                ((ctr[0] - half) / dxi).ceil() as i64,
                ((ctr[1] - half) / dxi).ceil() as i64,
            ];
            let k1 = [
                ((ctr[0] + half) / dxi).floor() as i64,
                ((ctr[1] + half) / dxi).floor() as i64,
            ];
            let width = [(k1[0] - k0[0] + 1).max(0) as usize, (k1[1] - k0[1] + 1).max(0) as usize];
            let mut values = vec![0.0; width[0] * width[1]];
            for a in 0..width[0] {
                let x = (k0[0] + a as i64) as f64 * dxi;
                let ba = collar_profile((x - ctr[0]).abs() / c.radius);
                for b in 0..width[1] {
                    let y = (k0[1] + b as i64) as f64 * dxi;
                    values[a * width[1] + b] = ba * collar_profile((y - ctr[1]).abs() / c.radius);
                }
            }
            PouPiece { k0, width, values }
        })
        .collect();
    for p in &raw {
        for d in 0..2 {
            if p.k0[d] < -m / 2 || p.k0[d] + p.width[d] as i64 > m / 2 {
                return Err(Error::Precondition("bump support leaves the frequency lattice".into()));
            }
        }
    }
    let mut sum = vec![0.0f64; lattice.len()];
    for p in &raw {
        for (i, v) in p.entries(lattice) {
            sum[i] += v;
        }
    }
    let pieces: Vec<PouPiece> = raw
        .into_par_iter()
        .map(|mut p| {
            for a in 0..p.width[0] {
                for b in 0..p.width[1] {
                    let i = lattice.flat_index([p.k0[0] + a as i64, p.k0[1] + b as i64]);
                    let v = &mut p.values[a * p.width[1] + b];
                    *v = if covered[i] && sum[i] > 0.0 { *v / sum[i] } else { 0.0 };
                }
            }
            p
        })
        .collect();
    let mut total = vec![0.0f64; lattice.len()];
    for p in &pieces {
        for (i, v) in p.entries(lattice) {
            total[i] += v;
        }
    }
    let sum_error = (0..lattice.len())
        .filter(|&i| covered[i])
        .map(|i| (total[i] - 1.0).abs())
        .fold(0.0, f64::max);
    let derivs: Vec<f64> = pieces
        .par_iter()
        .zip(cover.cubes.par_iter())
        .map(|(p, c)| {
            let w1 = p.width[1];
            let is_cov = |a: usize, b: usize| {
                covered[lattice.flat_index([p.k0[0] + a as i64, p.k0[1] + b as i64])]
            };
            let mut mx: f64 = 0.0;
            for a in 0..p.width[0] {
                for b in 0..w1 {
                    if !is_cov(a, b) {
                        continue;
                    }
                    let v = p.values[a * w1 + b];
                    if a + 1 < p.width[0] && is_cov(a + 1, b) {
                        mx = mx.max((p.values[(a + 1) * w1 + b] - v).abs());
                    }
                    if b + 1 < w1 && is_cov(a, b + 1) {
                        mx = mx.max((p.values[a * w1 + b + 1] - v).abs());
                    }
                }
            }
            mx / dxi * c.radius
        })
        .collect();
    let mut by_scale: BTreeMap<i32, f64> = BTreeMap::new();
    for (d, c) in derivs.iter().zip(&cover.cubes) {
        let e = by_scale.entry(c.j).or_insert(0.0);
        *e = e.max(*d);
    }
    Ok(PartitionOfUnity {
        pieces,
        covered,
        derivative_constant: derivs.iter().copied().fold(0.0, f64::max),
        derivative_by_scale: by_scale.into_iter().collect(),
        sum_error,
    })
}

/// Sampled generalized Bochner-Riesz symbol.
#[derive(Debug, Clone)]
pub struct BRSymbol {
    pub delta: f64,
    pub domain: PlanarDomain,
    pub lattice: TorusDomain,
    /// FFT-order samples.
    pub values: Vec<f64>,
    /// `max m / d^delta` over interior lattice points.
    pub profile_constant: f64,
}

impl BRSymbol {
    pub fn operator(&self) -> SpectralOperator {
        SpectralOperator::new(self.lattice, self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .expect("symbol sampled on its lattice")
    }
}

/// `(1 - |xi|^2/R^2)_+^delta` on a disk; otherwise `sum_i chi_i d(c_i)^delta`.
pub fn br_symbol(
    domain: &PlanarDomain,
    delta: f64,
    lattice: &TorusDomain,
    cover: Option<(&WhitneyCover, &PartitionOfUnity)>,
) -> Result<BRSymbol> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let values: Vec<f64> = match (*domain, cover) {
        (PlanarDomain::Disk { radius }, _) => (0..lattice.len())
            .into_par_iter()
            .map(|i| {
                let xi = lattice.frequency(i);
                let u = 1.0 - (xi[0] * xi[0] + xi[1] * xi[1]) / (radius * radius);
                if u > 0.0 {
                    u.powf(delta)
                } else {
                    0.0
                }
            })
            .collect(),
        (_, Some((cv, pou))) => {
            let mut v = vec![0.0; lattice.len()];
            for (p, c) in pou.pieces.iter().zip(&cv.cubes) {
                let dc = domain.distance(c.center()).powf(delta);
                for (i, x) in p.entries(lattice) {
                    v[i] += x * dc;
                }
            }
            v
        }
        (_, None) => {
            return Err(Error::InvalidParameter(
                "non-disk symbols need a cover and partition of unity".into(),
            ))
        }
    };
    let profile_constant = (0..lattice.len())
        .filter_map(|i| {
            let d = domain.distance(lattice.frequency(i));
            (d > 0.0).then(|| values[i] / d.powf(delta))
        })
        .fold(0.0, f64::max);
    Ok(BRSymbol {
        delta,
        domain: *domain,
        lattice: *lattice,
        values,
        profile_constant,
    })
}

/// `R_delta f`.
pub fn br_apply(sym: &BRSymbol, f: &GridFunction) -> Result<GridFunction> {
    sym.operator().apply(f)
}

/// Symbol `sigma_j` of one scale, stored sparsely.
#[derive(Debug, Clone)]
pub struct ScalePiece {
    pub j: i32,
    /// `N_j`, the number of cubes with radius in `[2^j, 2^{j+1})`.
    pub count: usize,
    pub entries: Vec<(usize, f64)>,
}

impl ScalePiece {
    pub fn dense(&self, lattice: &TorusDomain) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); lattice.len()];
        for &(i, x) in &self.entries {
            v[i] = Complex64::new(x, 0.0);
        }
        v
    }

    /// `U_j`.
    pub fn operator(&self, lattice: &TorusDomain) -> SpectralOperator {
        SpectralOperator::new(*lattice, self.dense(lattice)).expect("dense symbol has lattice length")
    }

    pub fn sup(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }

    /// `(sum |sigma_j|^2 dxi^2)^{1/2}`.
    pub fn l2(&self, lattice: &TorusDomain) -> f64 {
        let dxi = lattice.frequency_spacing();
        (self.entries.iter().map(|e| e.1 * e.1).sum::<f64>() * dxi * dxi).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ScaleDecomposition {
    pub delta: f64,
    pub scales: Vec<ScalePiece>,
    /// Symbol values on uncovered lattice points.
    pub collar: Vec<(usize, f64)>,
    /// `(sum_collar |m|^2 dxi^2)^{1/2}`.
    pub collar_l2: f64,
    /// `max |sum_j 2^{j delta} sigma_j + collar - m|`.
    pub exactness_error: f64,
}

impl ScaleDecomposition {
    pub fn scale(&self, j: i32) -> Option<&ScalePiece> {
        self.scales.iter().find(|s| s.j == j)
    }

    pub fn collar_operator(&self, lattice: &TorusDomain) -> SpectralOperator {
        let mut v = vec![Complex64::new(0.0, 0.0); lattice.len()];
        for &(i, x) in &self.collar {
            v[i] = Complex64::new(x, 0.0);
        }
        SpectralOperator::new(*lattice, v).expect("dense symbol has lattice length")
    }
}

/// `sigma_j = sum_{r_l in [2^j, 2^{j+1})} 2^{-j delta} m chi_l` and the uncovered collar.
pub fn decompose_scales(sym: &BRSymbol, cover: &WhitneyCover, pou: &PartitionOfUnity) -> Result<ScaleDecomposition> {
    if pou.pieces.len() != cover.cubes.len() || pou.covered.len() != sym.values.len() {
        return Err(Error::DimensionMismatch("symbol, cover and partition disagree".into()));
    }
    let lat = &sym.lattice;
    let mut acc: BTreeMap<i32, (usize, HashMap<usize, f64>)> = BTreeMap::new();
    for (p, c) in pou.pieces.iter().zip(&cover.cubes) {
        let e = acc.entry(c.j).or_insert_with(|| (0, HashMap::new()));
        e.0 += 1;
        let scale = 2f64.powf(-(c.j as f64) * sym.delta);
        for (i, x) in p.entries(lat) {
            *e.1.entry(i).or_insert(0.0) += scale * sym.values[i] * x;
        }
    }
    let scales: Vec<ScalePiece> = acc
        .into_iter()
        .map(|(j, (count, m))| {
            let mut entries: Vec<(usize, f64)> = m.into_iter().filter(|e| e.1 != 0.0).collect();
            entries.sort_unstable_by_key(|e| e.0);
            ScalePiece { j, count, entries }
        })
        .collect();
    let collar: Vec<(usize, f64)> = (0..lat.len())
        .filter(|&i| !pou.covered[i] && sym.values[i] != 0.0)
        .map(|i| (i, sym.values[i]))
        .collect();
    let dxi = lat.frequency_spacing();
    let collar_l2 = (collar.iter().map(|e| e.1 * e.1).sum::<f64>() * dxi * dxi).sqrt();
    let mut rec = vec![0.0f64; lat.len()];
    for s in &scales {
        let w = 2f64.powf(s.j as f64 * sym.delta);
        for &(i, x) in &s.entries {
            rec[i] += w * x;
        }
    }
    for &(i, x) in &collar {
        rec[i] += x;
    }
    let exactness_error = rec
        .iter()
        .zip(&sym.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ScaleDecomposition {
        delta: sym.delta,
        scales,
        collar,
        collar_l2,
        exactness_error,
    })
}

/// `||sum_j T_j f - (R f - C f)||_2 / ||R f - C f||_2` with `C` the collar multiplier.
pub fn reconstruction_error(sym: &BRSymbol, dec: &ScaleDecomposition, f: &GridFunction) -> Result<f64> {
    let lat = &sym.lattice;
    let mut sum = GridFunction::zeros(*lat);
    for s in &dec.scales {
        let w = 2f64.powf(s.j as f64 * dec.delta);
        let t = s.operator(lat).apply(f)?;
        for (a, b) in sum.values_mut().iter_mut().zip(t.values()) {
            *a += b * w;
        }
    }
    let target = br_apply(sym, f)?.sub(&dec.collar_operator(lat).apply(f)?)?;
    let num = sum.sub(&target)?.l2_sum();
    let den = target.l2_sum();
    Ok(if den > 0.0 { num / den } else { num })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelNorms {
    pub j: i32,
    pub count: usize,
    pub k_l1: f64,
    pub sigma_l2: f64,
    pub k_l2: f64,
    /// `||(1 + 2^j |x|)^M K_j||_{L^2}`.
    pub weighted_l2: f64,
    /// `||(1 + 2^j |x|)^M K_j||_{L^inf}`.
    pub weighted_linf: f64,
    pub decay: u32,
    /// Share of `||K_j||_1` carried by `|x|_inf > L/4`.
    pub tail_fraction: f64,
}

/// Kernel `K_j(x) = (2 pi)^{-1} sum sigma_j(xi) e^{i xi x} dxi^2` and its norms.
pub fn kernel_norms(piece: &ScalePiece, lattice: &TorusDomain, decay: u32, floor: f64) -> Result<KernelNorms> {
    let l = lattice.side_length();
    let scale = 2f64.powi(piece.j);
    if l * scale < floor {
        return Err(Error::Wraparound {
            value: l * scale,
            floor,
            required_side: floor / scale,
        });
    }
    let n = lattice.dim() as i32;
    let dxi = lattice.frequency_spacing();
    let c = (lattice.len() as f64).sqrt() * dxi.powi(n) / (2.0 * PI).powf(n as f64 / 2.0);
    let k = GridFunction::new(*lattice, piece.dense(lattice))?.idft();
    let cell = lattice.cell_volume();
    let rows: Vec<(f64, f64, f64, bool)> = k
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let a = v.norm() * c;
            let z = signed_displacement(lattice, i);
            let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
            let w = (1.0 + scale * r).powi(decay as i32);
            let tail = z[0].abs().max(z[1].abs()) > l / 4.0;
            (a, a * a, w * a, tail)
        })
        .collect();
    let k_l1 = rows.iter().map(|r| r.0).sum::<f64>() * cell;
    let k_l2 = (rows.iter().map(|r| r.1).sum::<f64>() * cell).sqrt();
    let weighted_l2 = (rows.iter().map(|r| r.2 * r.2).sum::<f64>() * cell).sqrt();
    let weighted_linf = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let tail = rows.iter().filter(|r| r.3).map(|r| r.0).sum::<f64>() * cell;
    Ok(KernelNorms {
        j: piece.j,
        count: piece.count,
        k_l1,
        sigma_l2: piece.l2(lattice),
        k_l2,
        weighted_l2,
        weighted_linf,
        decay,
        tail_fraction: if k_l1 > 0.0 { tail / k_l1 } else { 0.0 },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UjRow {
    pub j: i32,
    pub count: usize,
    pub estimate: f64,
    pub kind: EstimateKind,
    /// `2^{-j(n-1)/s}`.
    pub envelope: f64,
    /// `N_j^gamma`.
    pub mf_envelope: f64,
    pub ratio: f64,
}

/// Norm estimates of `U_j` on `L^p(w)` with both envelopes.
#[allow(clippy::too_many_arguments)]
pub fn uj_norm_scan(
    dec: &ScaleDecomposition,
    lattice: &TorusDomain,
    js: &[i32],
    p: f64,
    s: f64,
    t: f64,
    weight: Option<&Weight>,
    opts: &PowerOptions,
) -> Result<Vec<UjRow>> {
    if !(s >= 1.0) {
        return Err(Error::InvalidParameter(format!("s must be >= 1, got {s}")));
    }
    let n = lattice.dim() as f64;
    let g = gamma(t, p, s);
    js.iter()
        .map(|&j| {
            let empty = ScalePiece {
                j,
                count: 0,
                entries: Vec::new(),
            };
            let piece = dec.scale(j).unwrap_or(&empty);
            let op = piece.operator(lattice);
            let est = if p == 2.0 && weight.is_none() {
                norm_2_exact(&op)?
            } else {
                norm_p_power_method(&op, p, weight, opts)?
            };
            let envelope = 2f64.powf(-(j as f64) * (n - 1.0) / s);
            Ok(UjRow {
                j,
                count: piece.count,
                estimate: est.value,
                kind: est.kind,
                envelope,
                mf_envelope: (piece.count as f64).powf(g),
                ratio: est.value / envelope,
            })
        })
        .collect()
}

/// `delta(p)`: `max(2|1/2 - 1/p| - 1/2, 0)` for `n = 2`, `max(n|1/2 - 1/p| - 1/2, 0)` for
/// `n >= 3` outside `(2(n+2)/(n+4), 2(n+2)/n)`.
pub fn delta_p(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let nf = n as f64;
    if n >= 3 {
        let hi = 2.0 * (nf + 2.0) / nf;
        let lo = 2.0 * (nf + 2.0) / (nf + 4.0);
        if p < hi && p > lo {
            return Err(Error::Precondition(format!(
                "no formula for n = {n} with p in ({lo}, {hi})"
            )));
        }
    }
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    Ok((nf * (0.5 - inv).abs() - 0.5).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_values() {
        assert_eq!(delta_p(2, 2.0).unwrap(), 0.0);
        assert_eq!(delta_p(2, 4.0).unwrap(), 0.0);
        assert_eq!(delta_p(2, f64::INFINITY).unwrap(), 0.5);
        assert!(delta_p(3, 3.0).is_err());
        assert!(delta_p(1, 3.0).is_err());
    }

    #[test]
    fn distances() {
        let sq = PlanarDomain::Square { half_side: 1.0 };
        assert!((sq.distance([0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!((sq.distance([2.0, 0.0]) + 1.0).abs() < 1e-15);
        let an = PlanarDomain::Annulus { inner: 0.5, outer: 1.0 };
        assert!((an.distance([0.7, 0.0]) - 0.2).abs() < 1e-15);
        assert!((an.cube_distance([0.6, 0.0], 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn small_cover_is_consistent() {
        let lat = frequency_lattice(128, 1.0 / 32.0).unwrap();
        let disk = PlanarDomain::unit_disk();
        let cover = whitney_cover(&disk, &lat, 2.0).unwrap();
        assert!(cover.is_disjoint());
        assert!(cover.c_high / cover.c_low <= 8.0);
        let pou = partition_of_unity(&cover, &lat).unwrap();
        assert!(pou.sum_error < 1e-12);
        let sym = br_symbol(&disk, 1.0, &lat, None).unwrap();
        let dec = decompose_scales(&sym, &cover, &pou).unwrap();
        assert!(dec.exactness_error < 1e-12);
        assert!(whitney_cover(&disk, &lat, 1.0).is_err());
    }
}
