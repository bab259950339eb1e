//! Multi-frequency Calderon-Zygmund decomposition on dyadic boxes, its audit,
//! and the weak-type (1,1) experiment.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expspan::{project_l2_boxes, SpanCache};
use crate::fit::log_log_fit;
use crate::freqset::FrequencySet;
use crate::grid::{lp_norm, GridFunction, IndexBox, TorusDomain};
use crate::mfop::{bump, GridOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One selected box `J` with `b_J` on its points (local order).
#[derive(Debug, Clone)]
pub struct BadPart {
    pub boxed: IndexBox,
    pub values: Vec<Complex64>,
    /// `Pi_J(f 1_J)` on the points of `J`.
    pub projection: Vec<Complex64>,
}

/// Per-box audit entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxAudit {
    pub start: [i64; 2],
    pub side: usize,
    pub f_l1: f64,
    pub b_l1: f64,
    /// `max_j |int b_J e^{-i xi_j y} dy|`.
    pub residual: f64,
    /// `residual / max(||b_J||_1, ||f 1_J||_1)`.
    pub cancellation: f64,
    /// `sup_J |Pi_J(f 1_J)| / (sqrt(N) avg_J |f|)`.
    pub good_sup_ratio: f64,
}

/// Measured constants of a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzAudit {
    pub n: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub f_l1: f64,
    /// `(sum |J|) lambda / (sqrt(N) ||f||_1)`.
    pub c1: f64,
    /// `||g||_2^2 / (||f||_1 sqrt(N) lambda)`.
    pub c2: f64,
    /// `max_J ||f||_{L^1(J)} sqrt(N) / (|J| lambda)`.
    pub c3: f64,
    /// `max_J ||f - b_J||_{L^2(J)} / (sqrt(|J|) lambda)`.
    pub c4: f64,
    pub max_cancellation: f64,
    pub good_sup_constant: f64,
    pub max_overlap: usize,
    pub reconstruction_error: f64,
    pub boxes: Vec<BoxAudit>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CzDecomposition {
    pub g: GridFunction,
    pub bad_parts: Vec<BadPart>,
    pub lambda: f64,
    pub theta: FrequencySet,
    pub audit: CzAudit,
}

impl CzDecomposition {
    /// `b_J` extended by zero to the whole grid.
    pub fn bad_part_grid(&self, i: usize) -> GridFunction {
        let d = *self.g.domain();
        let mut out = GridFunction::zeros(d);
        let bp = &self.bad_parts[i];
        for (k, idx) in bp.boxed.flat_indices(&d).into_iter().enumerate() {
            out.values_mut()[idx] = bp.values[k];
        }
        out
    }

    /// `g + sum_J b_J`.
    pub fn reconstruct(&self) -> GridFunction {
        let d = *self.g.domain();
        let mut out = self.g.clone();
        for bp in &self.bad_parts {
            for (k, idx) in bp.boxed.flat_indices(&d).into_iter().enumerate() {
                out.values_mut()[idx] += bp.values[k];
            }
        }
        out
    }

    pub fn audit_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.audit).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn dyadic_boxes(domain: &TorusDomain, side: usize) -> Vec<IndexBox> {
    let m = domain.points_per_dim();
    let k = m / side;
    if domain.dim() == 1 {
        (0..k).map(|a| IndexBox::square(1, [(a * side) as i64, 0], side)).collect()
    } else {
        (0..k)
            .flat_map(|a| (0..k).map(move |b| IndexBox::square(2, [(a * side) as i64, (b * side) as i64], side)))
            .collect()
    }
}

/// Decomposes `f = g + sum_J b_J` at height `lambda` with respect to `theta`.
///
/// Boxes are the maximal dyadic boxes (anchored at the origin) whose average of
/// `|f|` exceeds `lambda / sqrt(N)`; `b_J = (f - Pi_J(f 1_J)) 1_J` with `Pi_J`
/// the `L^2(J)` projection onto the span of the exponentials.
pub fn decompose(f: &GridFunction, lambda: f64, theta: &FrequencySet) -> Result<CzDecomposition> {
    let d = *f.domain();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if theta.is_empty() {
        return Err(Error::InvalidParameter("empty frequency set".into()));
    }
    if theta.dim() != d.dim() {
        return Err(Error::DimensionMismatch("frequency set vs function".into()));
    }
    let m = d.points_per_dim();
    if !m.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "dyadic stopping time needs a power-of-two grid, got M = {m}"
        )));
    }
    let n = theta.len();
    let sqrt_n = (n as f64).sqrt();
    let threshold = lambda / sqrt_n;
    let cell = d.cell_volume();
    let f_l1 = lp_norm(f, 1.0)?;
    let mut warnings = Vec::new();
    let empty_audit = |warnings: Vec<String>| CzAudit {
        n,
        lambda,
        threshold,
        f_l1,
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        max_cancellation: 0.0,
        good_sup_constant: 0.0,
        max_overlap: 0,
        reconstruction_error: 0.0,
        boxes: Vec::new(),
        warnings,
    };
    if f_l1 == 0.0 {
        return Ok(CzDecomposition {
            g: f.clone(),
            bad_parts: Vec::new(),
            lambda,
            theta: theta.clone(),
            audit: empty_audit(vec!["f vanishes; empty decomposition".into()]),
        });
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let global_avg = abs.iter().sum::<f64>() / abs.len() as f64;
    if threshold < global_avg {
        warnings.push(format!(
            "threshold lambda/sqrt(N) = {threshold:.3e} is below the torus average {global_avg:.3e}; \
             the whole torus is selected"
        ));
    }

    let mut covered = vec![false; d.len()];
    let mut selected: Vec<IndexBox> = Vec::new();
    let mut side = m;
    loop {
        for b in dyadic_boxes(&d, side) {
            let idx = b.flat_indices(&d);
            if covered[idx[0]] {
                continue;
            }
            let avg = idx.iter().map(|&i| abs[i]).sum::<f64>() / idx.len() as f64;
            if avg > threshold {
                for &i in &idx {
                    covered[i] = true;
                }
                selected.push(b);
            }
        }
        if side == 1 {
            break;
        }
        side /= 2;
    }

    let cache = SpanCache::new(theta, &d)?;
    let parts: Vec<(BadPart, BoxAudit, f64)> = selected
        .par_iter()
        .map(|b| {
            let pr = project_l2_boxes(f, &cache, b, b);
            let values: Vec<Complex64> = pr.data.iter().zip(&pr.values).map(|(a, p)| a - p).collect();
            let idx = b.flat_indices(&d);
            let f_l1_j: f64 = pr.data.iter().map(|v| v.norm()).sum::<f64>() * cell;
            let b_l1: f64 = values.iter().map(|v| v.norm()).sum::<f64>() * cell;
            let residual = theta
                .iter()
                .map(|xi| {
                    let s = idx.iter().zip(&values).fold(ZERO, |acc, (&i, v)| {
                        let x = d.point(i);
                        let ph: f64 = (0..d.dim()).map(|k| xi[k] * x[k]).sum();
                        acc + v * Complex64::from_polar(1.0, -ph)
                    });
                    s.norm() * cell
                })
                .fold(0.0, f64::max);
            let scale = b_l1.max(f_l1_j);
            let cancellation = if scale > 0.0 { residual / scale } else { 0.0 };
            let avg = f_l1_j / (b.size() as f64 * cell);
            let sup_phi = pr.values.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            let good_sup_ratio = sup_phi / (sqrt_n * avg);
            let phi_l2 = (pr.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt();
            let audit = BoxAudit {
                start: b.start,
                side: b.len[0],
                f_l1: f_l1_j,
                b_l1,
                residual,
                cancellation,
                good_sup_ratio,
            };
            (
                BadPart {
                    boxed: *b,
                    values,
                    projection: pr.values,
                },
                audit,
                phi_l2,
            )
        })
        .collect();

    let mut g = f.clone();
    let mut overlap = vec![0usize; d.len()];
    for (bp, _, _) in &parts {
        for (k, idx) in bp.boxed.flat_indices(&d).into_iter().enumerate() {
            g.values_mut()[idx] -= bp.values[k];
            overlap[idx] += 1;
        }
    }
    let measure_j = |b: &IndexBox| b.size() as f64 * cell;
    let sum_j: f64 = parts.iter().map(|(bp, _, _)| measure_j(&bp.boxed)).sum();
    let g_l2 = lp_norm(&g, 2.0)?;
    let c1 = sum_j * lambda / (sqrt_n * f_l1);
    let c2 = g_l2 * g_l2 / (f_l1 * sqrt_n * lambda);
    let c3 = parts
        .iter()
        .map(|(bp, a, _)| a.f_l1 * sqrt_n / (measure_j(&bp.boxed) * lambda))
        .fold(0.0, f64::max);
    let c4 = parts
        .iter()
        .map(|(bp, _, phi)| phi / (measure_j(&bp.boxed).sqrt() * lambda))
        .fold(0.0, f64::max);
    let max_cancellation = parts.iter().map(|(_, a, _)| a.cancellation).fold(0.0, f64::max);
    let good_sup_constant = parts.iter().map(|(_, a, _)| a.good_sup_ratio).fold(0.0, f64::max);
    let max_overlap = overlap.iter().copied().max().unwrap_or(0);

    let (bad_parts, boxes): (Vec<BadPart>, Vec<BoxAudit>) = parts.into_iter().map(|(b, a, _)| (b, a)).unzip();
    let mut out = CzDecomposition {
        g,
        bad_parts,
        lambda,
        theta: theta.clone(),
        audit: CzAudit {
            n,
            lambda,
            threshold,
            f_l1,
            c1,
            c2,
            c3,
            c4,
            max_cancellation,
            good_sup_constant,
            max_overlap,
            reconstruction_error: 0.0,
            boxes,
            warnings,
        },
    };
    let rec = out.reconstruct().sub(f)?.sup_norm();
    out.audit.reconstruction_error = rec / f.sup_norm();
    Ok(out)
}

/// `sup_lambda lambda |{|g| > lambda}| / l1` from the sorted moduli of `g`.
pub fn weak_type_ratio(g: &GridFunction, l1: f64) -> f64 {
    let mut v: Vec<f64> = g.values().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let cell = g.domain().cell_volume();
    v.iter()
        .enumerate()
        .map(|(k, x)| x * (k + 1) as f64 * cell)
        .fold(0.0, f64::max)
        / l1
}

/// `sup_lambda lambda |{|T f| > lambda}| / ||f||_1`.
pub fn weak_type_constant(op: &dyn GridOperator, f: &GridFunction) -> Result<f64> {
    let l1 = lp_norm(f, 1.0)?;
    if l1 == 0.0 {
        return Err(Error::InvalidParameter("zero test function".into()));
    }
    Ok(weak_type_ratio(&op.apply(f)?, l1))
}

/// Test functions: spikes, sparse random dust, and bump-windowed Dirichlet kernels.
pub fn adversarial_family(domain: &TorusDomain, theta: &FrequencySet, seed: u64) -> Vec<(String, GridFunction)> {
    let d = *domain;
    let l = d.side_length();
    let dim = d.dim();
    let mut out = Vec::new();
    let mut spike = GridFunction::zeros(d);
    spike.values_mut()[d.flat_index([d.points_per_dim() as i64 / 2; 2])] = Complex64::new(1.0, 0.0);
    out.push(("spike".to_string(), spike));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..2 {
        let mut dust = GridFunction::zeros(d);
        for _ in 0..8 {
            let i = rng.random_range(0..d.len());
            dust.values_mut()[i] += Complex64::new(rng.random_range(0.1..1.0), 0.0);
        }
        out.push((format!("dust-{k}"), dust));
    }
    if theta.dim() == dim {
        for w in [8.0, 32.0, 128.0] {
            let width = l / w;
            let g = GridFunction::from_fn(d, |x| {
                let b: f64 = (0..dim).map(|k| bump((x[k] - l / 2.0) / width)).product();
                let s = theta.iter().fold(ZERO, |acc, xi| {
                    let ph: f64 = (0..dim).map(|k| xi[k] * (x[k] - l / 2.0)).sum();
                    acc + Complex64::from_polar(1.0, ph)
                });
                s * b
            });
            out.push((format!("bump-dirichlet-{w}"), g));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Weak11Row {
    pub n: usize,
    pub ratio: f64,
    pub best_function: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Weak11Table {
    pub rows: Vec<Weak11Row>,
    pub slope: f64,
    pub r2: f64,
}

/// Weak-type ratio of `op(N)` maximized over the adversarial family for each `N`.
pub fn weak11_experiment<T: GridOperator>(
    ns: &[usize],
    mut build: impl FnMut(usize) -> Result<(T, FrequencySet)>,
    seed: u64,
) -> Result<Weak11Table> {
    let mut rows = Vec::new();
    for &n in ns {
        let (op, theta) = build(n)?;
        let fam = adversarial_family(op.domain(), &theta, seed);
        let vals: Vec<(String, f64)> = fam
            .par_iter()
            .map(|(name, f)| weak_type_constant(&op, f).map(|r| (name.clone(), r)))
            .collect::<Result<_>>()?;
        let (best_function, ratio) = vals
            .into_iter()
            .fold((String::new(), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        rows.push(Weak11Row { n, ratio, best_function });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let (slope, r2) = log_log_fit(&xs, &ys).map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r2));
    Ok(Weak11Table { rows, slope, r2 })
}

/// Groups the selected boxes of a decomposition by side length.
pub fn boxes_by_side(dec: &CzDecomposition) -> Vec<(usize, usize)> {
    let mut m: HashMap<usize, usize> = HashMap::new();
    for b in &dec.bad_parts {
        *m.entry(b.boxed.len[0]).or_default() += 1;
    }
    let mut v: Vec<_> = m.into_iter().collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> TorusDomain {
        TorusDomain::new(1, 64.0, 64).unwrap()
    }

    #[test]
    fn small_function_selects_nothing() {
        let f = GridFunction::constant(dom(), Complex64::new(0.1, 0.0));
        let theta = FrequencySet::arithmetic(4).unwrap();
        let dec = decompose(&f, 1.0, &theta).unwrap();
        assert!(dec.bad_parts.is_empty());
        assert_eq!(dec.g, f);
    }

    #[test]
    fn zero_function_is_empty() {
        let f = GridFunction::zeros(dom());
        let dec = decompose(&f, 1.0, &FrequencySet::arithmetic(2).unwrap()).unwrap();
        assert!(dec.bad_parts.is_empty());
    }

    #[test]
    fn spike_gives_one_box_with_cancellation() {
        let mut f = GridFunction::zeros(dom());
        f.values_mut()[20] = Complex64::new(50.0, 0.0);
        let theta = FrequencySet::from_1d(&[0.1, 0.3]).unwrap();
        let dec = decompose(&f, 1.0, &theta).unwrap();
        assert_eq!(dec.bad_parts.len(), 1);
        assert!(dec.audit.max_cancellation < 1e-8);
        assert!(dec.audit.reconstruction_error < 1e-12);
        assert_eq!(dec.audit.max_overlap, 1);
    }

    #[test]
    fn weak_ratio_of_constant() {
        let f = GridFunction::constant(dom(), Complex64::new(2.0, 0.0));
        assert!((weak_type_ratio(&f, 128.0) - 1.0).abs() < 1e-12);
    }
}
