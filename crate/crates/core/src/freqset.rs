//! Finite frequency collections, distances to them, and iterated sumsets.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusDomain;

/// Two frequencies closer than this are considered equal.
pub const DEDUP_TOL: f64 = 1e-9;

/// Default cap on the number of sumset candidates.
pub const DEFAULT_SUMSET_CAP: usize = 10_000_000;

/// Distinct frequency vectors; sorted increasingly in one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    dim: usize,
    freqs: Vec<[f64; 2]>,
}

impl FrequencySet {
    /// Builds a set from vectors of length `dim`; rejects duplicates.
    pub fn new(dim: usize, freqs: Vec<Vec<f64>>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
        }
        if freqs.is_empty() {
            return Err(Error::InvalidParameter("frequency set must be nonempty".into()));
        }
        let mut v = Vec::with_capacity(freqs.len());
        for f in freqs {
            if f.len() != dim || f.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "frequency {f:?} is not a finite {dim}-vector"
                )));
            }
            v.push(if dim == 1 { [f[0], 0.0] } else { [f[0], f[1]] });
        }
        Self::from_arrays(dim, v)
    }

    /// One-dimensional set from scalars; sorted on construction.
    pub fn from_1d(freqs: &[f64]) -> Result<Self> {
        Self::new(1, freqs.iter().map(|&x| vec![x]).collect())
    }

    fn from_arrays(dim: usize, mut v: Vec<[f64; 2]>) -> Result<Self> {
        if dim == 1 {
            v.sort_by(|a, b| a[0].total_cmp(&b[0]));
            if let Some(w) = v.windows(2).find(|w| w[1][0] - w[0][0] <= DEDUP_TOL) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate frequency {}",
                    w[0][0]
                )));
            }
        } else {
            for i in 0..v.len() {
                for j in 0..i {
                    if dist(&v[i], &v[j], dim) <= DEDUP_TOL {
                        return Err(Error::InvalidParameter(format!(
                            "duplicate frequency {:?}",
                            v[i]
                        )));
                    }
                }
            }
        }
        Ok(Self { dim, freqs: v })
    }

    /// `{1, 2, ..., n}`.
    pub fn arithmetic(n: usize) -> Result<Self> {
        Self::from_1d(&(1..=n).map(|j| j as f64).collect::<Vec<_>>())
    }

    /// `n` reals uniform in `[-scale, scale]`, redrawn on collisions.
    pub fn random(n: usize, seed: u64, scale: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<f64> = Vec::with_capacity(n);
        let mut guard = 0;
        while out.len() < n {
            let x = rng.random_range(-scale..scale);
            if out.iter().all(|&y| (x - y).abs() > DEDUP_TOL) {
                out.push(x);
            }
            guard += 1;
            if guard > 100 * n + 100 {
                return Err(Error::InvalidParameter("cannot draw distinct frequencies".into()));
            }
        }
        Self::from_1d(&out)
    }

    /// `n` reals uniform in `[-scale, scale]` with pairwise gaps of at least `min_gap`.
    pub fn random_separated(n: usize, seed: u64, scale: f64, min_gap: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<f64> = Vec::with_capacity(n);
        let mut guard = 0;
        while out.len() < n {
            let x = rng.random_range(-scale..scale);
            if out.iter().all(|&y| (x - y).abs() >= min_gap.max(DEDUP_TOL)) {
                out.push(x);
            }
            guard += 1;
            if guard > 1000 * n + 1000 {
                return Err(Error::InvalidParameter(format!(
                    "cannot place {n} frequencies with gap {min_gap} in [-{scale}, {scale}]"
                )));
            }
        }
        Self::from_1d(&out)
    }

    /// `{0, eps, 2 eps, ..., (n-1) eps}`.
    pub fn cluster(n: usize, eps: f64) -> Result<Self> {
        Self::from_1d(&(0..n).map(|j| j as f64 * eps).collect::<Vec<_>>())
    }

    /// Parses `arith:N`, `random:N:seed[:scale]` (default scale N) or `cluster:N:eps`.
    pub fn parse_preset(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("preset '{spec}' is missing a field")))?
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number in preset '{spec}'")))
        };
        let count = |i: usize| -> Result<usize> {
            let v = num(i)?;
            if v < 1.0 || v.fract() != 0.0 {
                return Err(Error::Parse(format!("bad count in preset '{spec}'")));
            }
            Ok(v as usize)
        };
        match parts[0] {
            "arith" if parts.len() == 2 => Self::arithmetic(count(1)?),
            "random" if parts.len() == 3 || parts.len() == 4 => {
                let n = count(1)?;
                let scale = if parts.len() == 4 { num(3)? } else { n as f64 };
                Self::random(n, num(2)? as u64, scale)
            }
            "cluster" if parts.len() == 3 => Self::cluster(count(1)?, num(2)?),
            _ => Err(Error::Parse(format!(
                "unknown frequency preset '{spec}' (expected arith:N, random:N:seed, cluster:N:eps)"
            ))),
        }
    }

    /// Reads one comma-separated vector per line; `#` starts a comment.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for line in BufReader::new(r).lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad frequency row '{line}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        Self::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// The `j`-th frequency as a `dim`-slice.
    pub fn get(&self, j: usize) -> &[f64] {
        &self.freqs[j][..self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.freqs.iter().map(move |f| &f[..self.dim])
    }

    /// First coordinates (the frequencies themselves in one dimension).
    pub fn first_coords(&self) -> Vec<f64> {
        self.freqs.iter().map(|f| f[0]).collect()
    }

    /// Translates every frequency by `shift`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch("shift dimension".into()));
        }
        let v = self
            .freqs
            .iter()
            .map(|f| {
                let mut g = *f;
                for d in 0..self.dim {
                    g[d] += shift[d];
                }
                g
            })
            .collect();
        Self::from_arrays(self.dim, v)
    }

    /// Smallest distance between two members (infinite for a singleton).
    pub fn min_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                g = g.min(dist(&self.freqs[i], &self.freqs[j], self.dim));
            }
        }
        g
    }

    /// Largest distance between two members (zero for a singleton).
    pub fn diameter(&self) -> f64 {
        let mut g: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                g = g.max(dist(&self.freqs[i], &self.freqs[j], self.dim));
            }
        }
        g
    }

    /// Replaces every frequency by the nearest lattice frequency of `domain`.
    /// Returns the snapped set and the largest snap distance; warns when it
    /// exceeds `1e-9 * 2pi/L`.
    pub fn snap_to_lattice(&self, domain: &TorusDomain) -> Result<(Self, f64)> {
        if self.dim != domain.dim() {
            return Err(Error::DimensionMismatch("frequency set vs domain".into()));
        }
        let mut worst: f64 = 0.0;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.len());
        for f in self.iter() {
            let (idx, d) = domain.nearest_frequency_index(f);
            worst = worst.max(d);
            if !seen.insert(idx) {
                return Err(Error::InvalidParameter(format!(
                    "two frequencies snap to the same lattice point near {f:?}"
                )));
            }
            let g = domain.frequency(idx);
            out.push(g);
        }
        if worst > 1e-9 * domain.frequency_spacing() {
            log::warn!(
                "frequencies snapped to the lattice; largest snap distance {worst:.3e}"
            );
        }
        Ok((Self::from_arrays(self.dim, out)?, worst))
    }

    /// `n` distinct one-dimensional lattice frequencies `k * 2pi/L` with `|k| <= half_width`.
    pub fn random_lattice(domain: &TorusDomain, n: usize, half_width: usize, seed: u64) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::DimensionMismatch("random lattice sets are one-dimensional".into()));
        }
        if n == 0 || n > 2 * half_width + 1 || half_width >= domain.points_per_dim() / 2 {
            return Err(Error::InvalidParameter(format!(
                "cannot draw {n} lattice frequencies within +-{half_width}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = half_width as i64;
        let mut picked = HashSet::new();
        while picked.len() < n {
            picked.insert(rng.random_range(-w..=w));
        }
        let dx = domain.frequency_spacing();
        let mut ks: Vec<i64> = picked.into_iter().collect();
        ks.sort_unstable();
        Self::from_1d(&ks.iter().map(|&k| k as f64 * dx).collect::<Vec<_>>())
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2], dim: usize) -> f64 {
    (0..dim).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean distance from `xi` to the nearest member of `theta`.
pub fn dist_to_set(xi: &[f64], theta: &FrequencySet) -> Result<f64> {
    if xi.len() != theta.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dim {}, set has dim {}",
            xi.len(),
            theta.dim()
        )));
    }
    Ok(theta
        .iter()
        .map(|f| f.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min))
}

/// All `k`-fold sums with repetition, deduplicated at [`DEDUP_TOL`], with the default cap.
pub fn sumset(theta: &FrequencySet, k: usize) -> Result<FrequencySet> {
    sumset_with_cap(theta, k, DEFAULT_SUMSET_CAP)
}

/// [`sumset`] with an explicit cap on candidate counts.
pub fn sumset_with_cap(theta: &FrequencySet, k: usize, cap: usize) -> Result<FrequencySet> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let dim = theta.dim();
    let mut cur = theta.freqs.clone();
    for _ in 1..k {
        let count = cur.len().saturating_mul(theta.len());
        if count > cap {
            return Err(Error::CapExceeded { cap, count });
        }
        let mut next = Vec::with_capacity(count);
        for a in &cur {
            for b in &theta.freqs {
                next.push([a[0] + b[0], a[1] + b[1]]);
            }
        }
        cur = if dim == 1 { dedup_sorted(next) } else { dedup_hashed(next) };
    }
    Ok(FrequencySet { dim, freqs: cur })
}

fn dedup_sorted(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(last) if x[0] - last[0] <= DEDUP_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

fn dedup_hashed(v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut seen = HashSet::new();
    v.into_iter()
        .filter(|x| {
            let key = (
                (x[0] / DEDUP_TOL).round() as i64,
                (x[1] / DEDUP_TOL).round() as i64,
            );
            seen.insert(key)
        })
        .collect()
}

/// Rows `(k, #Theta^k)` for `k = 1..=k_max`.
pub fn sumset_growth_table(theta: &FrequencySet, k_max: usize) -> Result<Vec<(usize, usize)>> {
    (1..=k_max)
        .map(|k| sumset(theta, k).map(|s| (k, s.len())))
        .collect()
}
