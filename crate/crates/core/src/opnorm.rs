//! Operator norm estimates: exact multiplier norms on `L^2`, a nonlinear power
//! method giving lower bounds on `L^p(w)`, and growth regressions in `N`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::freqset::FrequencySet;
use crate::grid::{GridFunction, TorusDomain};
use crate::mfop::{bump, GridOperator};
use crate::weights::Weight;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Whether a norm value is exact or only a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEstimate {
    pub p: f64,
    pub weighted: bool,
    pub value: f64,
    pub kind: EstimateKind,
    pub iterations: usize,
    pub converged: bool,
    /// Objective never decreased by more than [`MONOTONE_SLACK`] relative.
    pub monotone: bool,
    /// Objective per iteration of the winning restart.
    pub history: Vec<f64>,
    /// Label of the winning initial iterate.
    pub start: String,
    #[serde(skip)]
    pub extremizer: Option<GridFunction>,
}

/// Relative slack for the monotonicity assertion (floating point noise).
pub const MONOTONE_SLACK: f64 = 1e-9;

/// `sup |m|` over the lattice for a Fourier multiplier.
pub fn norm_2_exact(op: &dyn GridOperator) -> Result<NormEstimate> {
    let sym = op.lattice_symbol().ok_or(Error::NotSpectral)?;
    let value = sym.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    Ok(NormEstimate {
        p: 2.0,
        weighted: false,
        value,
        kind: EstimateKind::Exact,
        iterations: 0,
        converged: true,
        monotone: true,
        history: vec![value],
        start: "symbol".into(),
        extremizer: None,
    })
}

/// Options of [`norm_p_power_method`].
#[derive(Debug, Clone)]
pub struct PowerOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the objective changes by less than this fraction.
    pub tol: f64,
    pub seed: u64,
    /// Frequencies for Dirichlet-type initial iterates.
    pub theta: Option<FrequencySet>,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iter: 500,
            tol: 1e-10,
            seed: 0,
            theta: None,
        }
    }
}

struct Norms {
    p: f64,
    cell: f64,
    w: Option<Vec<f64>>,
}

impl Norms {
    fn norm(&self, f: &[Complex64]) -> f64 {
        let s: f64 = match &self.w {
            Some(w) => f.iter().zip(w).map(|(v, w)| v.norm().powf(self.p) * w).sum(),
            None => f.iter().map(|v| v.norm().powf(self.p)).sum(),
        };
        (s * self.cell).powf(1.0 / self.p)
    }

    /// `|g|^{q-1} phase(g) / ||g||_q^{q-1}`.
    fn dual(&self, g: &[Complex64], q: f64) -> Vec<Complex64> {
        let other = Norms {
            p: q,
            cell: self.cell,
            w: self.w.clone(),
        };
        let n = other.norm(g);
        if n == 0.0 {
            return vec![ZERO; g.len()];
        }
        let c = n.powf(q - 1.0);
        g.iter()
            .map(|v| {
                let a = v.norm();
                if a == 0.0 {
                    ZERO
                } else {
                    v * (a.powf(q - 2.0) / c)
                }
            })
            .collect()
    }
}

/// `||T f||_{p,w} / ||f||_{p,w}`.
pub fn norm_ratio(op: &dyn GridOperator, f: &GridFunction, p: f64, weight: Option<&Weight>) -> Result<f64> {
    let norms = norms_for(op.domain(), p, weight)?;
    let tf = op.apply(f)?;
    let d = norms.norm(f.values());
    if d == 0.0 {
        return Err(Error::InvalidParameter("zero test function".into()));
    }
    Ok(norms.norm(tf.values()) / d)
}

fn norms_for(domain: &TorusDomain, p: f64, weight: Option<&Weight>) -> Result<Norms> {
    let w = match weight {
        Some(w) => {
            if w.domain() != domain {
                return Err(Error::DimensionMismatch("weight domain".into()));
            }
            if w.values().iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidParameter("weight must be strictly positive".into()));
            }
            Some(w.values().to_vec())
        }
        None => None,
    };
    Ok(Norms {
        p,
        cell: domain.cell_volume(),
        w,
    })
}

/// Labelled initial iterates, in a fixed order.
pub fn initial_iterates(domain: &TorusDomain, opts: &PowerOptions) -> Vec<(String, GridFunction)> {
    let d = *domain;
    let l = d.side_length();
    let dim = d.dim();
    let mut out = Vec::new();
    out.push(("constant".to_string(), GridFunction::constant(d, Complex64::new(1.0, 0.0))));
    let mut spike = GridFunction::zeros(d);
    spike.values_mut()[0] = Complex64::new(1.0, 0.0);
    out.push(("spike-origin".into(), spike));
    let mid = d.flat_index([d.points_per_dim() as i64 / 2; 2]);
    let mut spike = GridFunction::zeros(d);
    spike.values_mut()[mid] = Complex64::new(1.0, 0.0);
    out.push(("spike-center".into(), spike));
    if let Some(theta) = &opts.theta {
        if theta.dim() == dim {
            let dirichlet = |x: &[f64]| {
                theta.iter().fold(ZERO, |acc, xi| {
                    let ph: f64 = (0..dim).map(|k| xi[k] * x[k]).sum();
                    acc + Complex64::from_polar(1.0, ph)
                })
            };
            out.push(("dirichlet".into(), GridFunction::from_fn(d, dirichlet)));
            for (label, width) in [("bump-dirichlet-8", l / 8.0), ("bump-dirichlet-32", l / 32.0)] {
                let g = GridFunction::from_fn(d, |x| {
                    let b: f64 = (0..dim).map(|k| bump((x[k] - l / 2.0) / width)).product();
                    dirichlet(x) * b
                });
                out.push((label.into(), g));
            }
        }
    }
    let mut k = 0u64;
    while out.len() < opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k));
        let vals = (0..d.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        out.push((format!("random-{k}"), GridFunction::new(d, vals).expect("length matches")));
        k += 1;
    }
    out.truncate(opts.restarts.max(1));
    out
}

struct Run {
    value: f64,
    iterations: usize,
    converged: bool,
    monotone: bool,
    history: Vec<f64>,
    x: GridFunction,
}

fn power_run(op: &dyn GridOperator, norms: &Norms, x0: &GridFunction, opts: &PowerOptions) -> Result<Run> {
    let p = norms.p;
    let pp = p / (p - 1.0);
    let d = *op.domain();
    let n0 = norms.norm(x0.values());
    if n0 == 0.0 {
        return Err(Error::InvalidParameter("zero initial iterate".into()));
    }
    let mut x = x0.scale(Complex64::new(1.0 / n0, 0.0));
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, x.clone());
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let y = op.apply(&x)?;
        let v = norms.norm(y.values());
        if let Some(&prev) = history.last() {
            if v < prev * (1.0 - MONOTONE_SLACK) {
                monotone = false;
            }
        }
        history.push(v);
        if v > best.0 {
            best = (v, x.clone());
        }
        if v == 0.0 {
            converged = true;
            break;
        }
        if history.len() >= 2 {
            let prev = history[history.len() - 2];
            if (v - prev).abs() <= opts.tol * v {
                converged = true;
                break;
            }
        }
        let mut u = GridFunction::new(d, norms.dual(y.values(), p))?;
        if let Some(w) = &norms.w {
            u.values_mut().iter_mut().zip(w).for_each(|(a, b)| *a *= b);
        }
        let mut z = op.apply_adjoint(&u)?;
        if let Some(w) = &norms.w {
            z.values_mut().iter_mut().zip(w).for_each(|(a, b)| *a /= b);
        }
        let xn = norms.dual(z.values(), pp);
        let nn = norms.norm(&xn);
        if nn == 0.0 {
            converged = true;
            break;
        }
        x = GridFunction::new(d, xn.into_iter().map(|v| v / nn).collect())?;
    }
    let xb = best.1;
    let value = norms.norm(op.apply(&xb)?.values()) / norms.norm(xb.values());
    Ok(Run {
        value,
        iterations,
        converged,
        monotone,
        history,
        x: xb,
    })
}

/// Lower bound for `||T||_{L^p(w) -> L^p(w)}` by the duality power iteration,
/// best over deterministic restarts.
pub fn norm_p_power_method(
    op: &dyn GridOperator,
    p: f64,
    weight: Option<&Weight>,
    opts: &PowerOptions,
) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    let norms = norms_for(op.domain(), p, weight)?;
    let starts = initial_iterates(op.domain(), opts);
    let runs: Vec<Result<Run>> = starts
        .par_iter()
        .map(|(_, x0)| power_run(op, &norms, x0, opts))
        .collect();
    let mut best: Option<(usize, Run)> = None;
    for (i, r) in runs.into_iter().enumerate() {
        let r = r?;
        if best.as_ref().map(|(_, b)| r.value > b.value).unwrap_or(true) {
            best = Some((i, r));
        }
    }
    let (i, run) = best.ok_or_else(|| Error::InvalidParameter("no restarts".into()))?;
    if !run.converged {
        log::warn!(
            "power method hit max_iter={} (start {}); returning best iterate",
            opts.max_iter,
            starts[i].0
        );
    }
    Ok(NormEstimate {
        p,
        weighted: weight.is_some(),
        value: run.value,
        kind: EstimateKind::LowerBound,
        iterations: run.iterations,
        converged: run.converged,
        monotone: run.monotone,
        history: run.history,
        start: starts[i].0.clone(),
        extremizer: Some(run.x),
    })
}

/// Exact value for `p = 2` unweighted multipliers, power method otherwise.
pub fn norm_estimate(
    op: &dyn GridOperator,
    p: f64,
    weight: Option<&Weight>,
    opts: &PowerOptions,
) -> Result<NormEstimate> {
    if p == 2.0 && weight.is_none() && op.lattice_symbol().is_some() {
        norm_2_exact(op)
    } else {
        norm_p_power_method(op, p, weight, opts)
    }
}

/// Log-log fit of norm estimates against a sweep variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthFit {
    pub variable: String,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub constant: f64,
    pub r2: f64,
    pub envelope: f64,
    /// `max_i value_i / x_i^envelope`.
    pub envelope_constant: f64,
}

/// Fit `log value` vs `log x`; at least four points.
pub fn growth_regression(variable: &str, xs: &[f64], values: &[f64], envelope: f64) -> Result<GrowthFit> {
    if xs.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "growth regression needs at least 4 points, got {}",
            xs.len()
        )));
    }
    let fit = log_log_fit(xs, values)?;
    let envelope_constant = xs
        .iter()
        .zip(values)
        .map(|(x, v)| v / x.powf(envelope))
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        variable: variable.into(),
        xs: xs.to_vec(),
        values: values.to_vec(),
        exponent: fit.slope,
        constant: fit.intercept.exp(),
        r2: fit.r2,
        envelope,
        envelope_constant,
    })
}

/// Unweighted envelope exponent `|1/p - 1/2|`.
pub fn unweighted_exponent(p: f64) -> f64 {
    (1.0 / p - 0.5).abs()
}

/// Weighted exponent `tp/(s min(2,s)) + |1/2 - 1/s|`.
pub fn gamma(t: f64, p: f64, s: f64) -> f64 {
    t * p / (s * s.min(2.0)) + (0.5 - 1.0 / s).abs()
}

/// Exponent `tp/(2s) + (1/2 - 1/s)` obtained through the pointwise bound.
pub fn pointwise_route_exponent(t: f64, p: f64, s: f64) -> f64 {
    t * p / (2.0 * s) + (0.5 - 1.0 / s)
}

/// Weighted bounds are informative only when the exponent is below one.
pub fn gamma_is_informative(g: f64) -> bool {
    g < 1.0
}
