//! Multi-frequency maximal sharp function and the comparisons built on it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expspan::{project_ls_boxes, IrlsOptions, SpanCache};
use crate::freqset::FrequencySet;
use crate::grid::{lp_norm_weighted, maximal_function, BoxFamily, GridFunction, IndexBox};
use crate::mfop::GridOperator;
use crate::weights::Weight;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How the best approximation on `3Q` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Orthogonal projection in `L^2(3Q)` (exact).
    L2,
    /// IRLS minimizer of the `L^s(3Q)` error (approximate).
    Ls,
}

#[derive(Debug, Clone)]
pub struct SharpMaxConfig {
    pub s: f64,
    pub theta: FrequencySet,
    pub family: BoxFamily,
    pub mode: ProjectionMode,
    pub irls: IrlsOptions,
}

impl SharpMaxConfig {
    /// `s >= 1` in `L2` mode, `s > 1` in `Ls` mode.
    pub fn new(s: f64, theta: FrequencySet, family: BoxFamily, mode: ProjectionMode) -> Result<Self> {
        let ok = match mode {
            ProjectionMode::L2 => s >= 1.0 && s.is_finite(),
            ProjectionMode::Ls => s > 1.0 && s.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid s = {s} for {mode:?} mode")));
        }
        if theta.is_empty() {
            return Err(Error::InvalidParameter("empty frequency set".into()));
        }
        if family.boxes()[0].dim != theta.dim() {
            return Err(Error::DimensionMismatch("family vs frequency set".into()));
        }
        Ok(Self {
            s,
            theta,
            family,
            mode,
            irls: IrlsOptions::default(),
        })
    }

    /// `s = 2` with the exact projection.
    pub fn l2(theta: FrequencySet, family: BoxFamily) -> Result<Self> {
        Self::new(2.0, theta, family, ProjectionMode::L2)
    }
}

#[derive(Debug, Clone)]
pub struct SharpMaximal {
    pub values: GridFunction,
    /// True when an iterative `L^s` projection was used.
    pub approximate: bool,
}

fn oscillation(
    f: &GridFunction,
    cache: &SpanCache,
    q: &IndexBox,
    cfg: &SharpMaxConfig,
) -> Result<(Vec<usize>, f64)> {
    let d = f.domain();
    let target = q.triple(d);
    let mask = target.inner_mask(q, d)?;
    let tidx = target.flat_indices(d);
    let data: Vec<Complex64> = tidx
        .iter()
        .zip(&mask)
        .map(|(&i, &m)| if m { f.values()[i] } else { ZERO })
        .collect();
    let phi = match cfg.mode {
        ProjectionMode::L2 => cache.get(target.shape()).project(&data),
        ProjectionMode::Ls => project_ls_boxes(f, cache, q, &target, cfg.s, &cfg.irls)?.values,
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut qidx = Vec::with_capacity(q.size());
    for k in 0..tidx.len() {
        if mask[k] {
            sum += (data[k] - phi[k]).norm().powf(cfg.s);
            count += 1;
            qidx.push(tidx[k]);
        }
    }
    Ok((qidx, (sum / count as f64).powf(1.0 / cfg.s)))
}

/// `sup_{Q ni x} (avg_Q |f - pr_Q(f 1_Q)|^s)^{1/s}` over the family, with the best
/// approximation taken on `3Q`.
pub fn sharp_maximal(f: &GridFunction, cfg: &SharpMaxConfig) -> Result<SharpMaximal> {
    let d = *f.domain();
    if cfg.theta.dim() != d.dim() {
        return Err(Error::DimensionMismatch("frequency set vs function".into()));
    }
    let cache = SpanCache::new(&cfg.theta, &d)?;
    let osc: Vec<(Vec<usize>, f64)> = cfg
        .family
        .boxes()
        .par_iter()
        .map(|q| oscillation(f, &cache, q, cfg))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0f64; d.len()];
    for (idx, a) in osc {
        for i in idx {
            if a > out[i] {
                out[i] = a;
            }
        }
    }
    Ok(SharpMaximal {
        values: GridFunction::from_real(d, &out)?,
        approximate: cfg.mode == ProjectionMode::Ls,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsReport {
    pub n: usize,
    pub p: f64,
    pub s: f64,
    pub t: f64,
    pub norm_f: f64,
    pub norm_sharp: f64,
    pub ratio: f64,
    /// `N^{(tp/s) max(1/2, 1/s)}`.
    pub envelope: f64,
    pub normalized: f64,
    /// The sharp function vanishes while `f` does not.
    pub degenerate: bool,
}

/// `||f||_{L^p(w)} / ||M^# f||_{L^p(w)}` with its `N` envelope.
pub fn fefferman_stein_ratio(
    f: &GridFunction,
    cfg: &SharpMaxConfig,
    p: f64,
    weight: &Weight,
    t: f64,
) -> Result<FsReport> {
    if !(p > cfg.s) {
        return Err(Error::InvalidParameter(format!("need p > s, got p={p}, s={}", cfg.s)));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter(format!("need t >= 1, got {t}")));
    }
    let wg = weight.to_grid();
    let sharp = sharp_maximal(f, cfg)?;
    let norm_f = lp_norm_weighted(f, p, &wg)?;
    let norm_sharp = lp_norm_weighted(&sharp.values, p, &wg)?;
    let n = cfg.theta.len();
    let envelope = (n as f64).powf(t * p / cfg.s * (0.5f64).max(1.0 / cfg.s));
    let degenerate = norm_sharp <= 1e-12 * norm_f.max(f64::MIN_POSITIVE);
    let ratio = if degenerate { f64::NAN } else { norm_f / norm_sharp };
    Ok(FsReport {
        n,
        p,
        s: cfg.s,
        t,
        norm_f,
        norm_sharp,
        ratio,
        envelope,
        normalized: ratio / envelope,
        degenerate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub n: usize,
    pub s: f64,
    /// `sup_x M^#(Tf)(x) / M_s f(x)` where `M_s f > floor`.
    pub ratio: f64,
    pub argmax: usize,
    /// `N^{|1/s - 1/2|}`.
    pub envelope: f64,
    pub floor: f64,
}

/// Pointwise comparison of `M^#(T f)` with the `L^s` maximal function of `f`.
pub fn pointwise_domination(op: &dyn GridOperator, f: &GridFunction, cfg: &SharpMaxConfig) -> Result<PointwiseReport> {
    let tf = op.apply(f)?;
    let sharp = sharp_maximal(&tf, cfg)?;
    let m = maximal_function(f, &cfg.family, cfg.s)?;
    let floor = 1e-12 * f.sup_norm();
    let (argmax, ratio) = sharp
        .values
        .values()
        .iter()
        .zip(m.values())
        .enumerate()
        .filter(|(_, (_, b))| b.re > floor)
        .map(|(i, (a, b))| (i, a.re / b.re))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let n = cfg.theta.len();
    Ok(PointwiseReport {
        n,
        s: cfg.s,
        ratio,
        argmax,
        envelope: (n as f64).powf((1.0 / cfg.s - 0.5).abs()),
        floor,
    })
}

/// Classical comparator: `sup_{Q ni x} (avg_Q |f - avg_Q f|^s)^{1/s}` over the family.
pub fn classical_sharp(f: &GridFunction, family: &BoxFamily, s: f64) -> Result<GridFunction> {
    let d = *f.domain();
    let mut out = vec![0.0f64; d.len()];
    for q in family.boxes() {
        let idx = q.flat_indices(&d);
        let avg = idx.iter().map(|&i| f.values()[i]).sum::<Complex64>() / idx.len() as f64;
        let v = (idx.iter().map(|&i| (f.values()[i] - avg).norm().powf(s)).sum::<f64>() / idx.len() as f64)
            .powf(1.0 / s);
        for i in idx {
            out[i] = out[i].max(v);
        }
    }
    GridFunction::from_real(d, &out)
}
