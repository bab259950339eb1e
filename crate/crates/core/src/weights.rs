//! Muckenhoupt and reverse Holder characteristics over box families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::grid::{BoxFamily, GridFunction, TorusDomain};

/// Positive floor applied by the report-level routines.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// A nonnegative weight sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    domain: TorusDomain,
    values: Vec<f64>,
}

impl Weight {
    /// Rejects negative or non-finite samples.
    pub fn new(domain: TorusDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch("weight length".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self { domain, values })
    }

    /// Real parts of a grid function.
    pub fn from_grid(f: &GridFunction) -> Result<Self> {
        Self::new(*f.domain(), f.real_parts())
    }

    pub fn constant(domain: TorusDomain, c: f64) -> Result<Self> {
        Self::new(domain, vec![c; domain.len()])
    }

    /// `max(|x - c|, h)^a` with `c` the center of the torus (torus distance).
    pub fn power(domain: TorusDomain, a: f64) -> Result<Self> {
        let h = domain.spacing();
        let c = domain.side_length() / 2.0;
        let dim = domain.dim();
        let values = (0..domain.len())
            .map(|i| {
                let p = domain.point(i);
                let r = (0..dim)
                    .map(|d| domain.axis_distance(p[d], c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r.max(h).powf(a)
            })
            .collect();
        Self::new(domain, values)
    }

    /// 1 on the lower half `[0, L/2)` of the first axis and `k` on the upper half.
    pub fn two_valued(domain: TorusDomain, k: f64) -> Result<Self> {
        let half = domain.side_length() / 2.0;
        let values = (0..domain.len())
            .map(|i| if domain.point(i)[0] < half - 1e-12 { 1.0 } else { k })
            .collect();
        Self::new(domain, values)
    }

    /// `exp(amplitude * sum_k (a_k cos + b_k sin)(2 pi k x / L) / k)`, `k = 1..=4` per axis.
    pub fn random_log_lipschitz(domain: TorusDomain, seed: u64, amplitude: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = domain.dim();
        let coef: Vec<(f64, f64)> = (0..4 * dim)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let w = 2.0 * std::f64::consts::PI / domain.side_length();
        let values = (0..domain.len())
            .map(|i| {
                let p = domain.point(i);
                let mut s = 0.0;
                for d in 0..dim {
                    for k in 1..=4 {
                        let (a, b) = coef[d * 4 + k - 1];
                        let t = w * k as f64 * p[d];
                        s += (a * t.cos() + b * t.sin()) / k as f64;
                    }
                }
                (amplitude * s).exp()
            })
            .collect();
        Self::new(domain, values)
    }

    /// `eps` everywhere except 1 at one grid point.
    pub fn spike(domain: TorusDomain, position: usize, eps: f64) -> Result<Self> {
        let mut values = vec![eps; domain.len()];
        *values
            .get_mut(position)
            .ok_or_else(|| Error::InvalidParameter("spike position out of range".into()))? = 1.0;
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `omega^e` pointwise.
    pub fn power_of(&self, e: f64) -> Weight {
        Weight {
            domain: self.domain,
            values: self.values.iter().map(|v| v.powf(e)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.domain, self.values.iter().map(|v| v * c).collect())
    }

    /// Floors every value at [`WEIGHT_FLOOR`]; the flag tells whether the floor bound.
    pub fn floored(&self) -> (Weight, bool) {
        let mut hit = false;
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v < WEIGHT_FLOOR {
                    hit = true;
                    WEIGHT_FLOOR
                } else {
                    v
                }
            })
            .collect();
        (
            Weight {
                domain: self.domain,
                values,
            },
            hit,
        )
    }

    pub fn has_zeros(&self) -> bool {
        self.values.iter().any(|&v| v == 0.0)
    }

    pub fn to_grid(&self) -> GridFunction {
        GridFunction::from_real(self.domain, &self.values).expect("weight length matches domain")
    }
}

fn check_family(w: &Weight, family: &BoxFamily) -> Result<()> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty box family".into()));
    }
    if family.boxes()[0].dim != w.domain.dim() {
        return Err(Error::DimensionMismatch("family vs weight".into()));
    }
    Ok(())
}

fn sup_over_boxes(w: &Weight, family: &BoxFamily, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    family
        .boxes()
        .par_iter()
        .map(|b| {
            let vals: Vec<f64> = b.flat_indices(&w.domain).into_iter().map(|i| w.values[i]).collect();
            f(&vals)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_pow(v: &[f64], e: f64) -> f64 {
    v.iter().map(|x| x.powf(e)).sum::<f64>() / v.len() as f64
}

/// `sup_Q (avg_Q w)(avg_Q w^{1-p'})^{p-1}`; for `p = 1`, `sup_Q avg_Q w / min_Q w`.
pub fn ap_characteristic(w: &Weight, p: f64, family: &BoxFamily) -> Result<f64> {
    check_family(w, family)?;
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::InvalidParameter(format!("p must be finite and >= 1, got {p}")));
    }
    if w.has_zeros() {
        if p > 1.0 {
            return Err(Error::InvalidParameter(
                "weight vanishes somewhere; w^{1-p'} diverges (use the floored report)".into(),
            ));
        }
        return Ok(f64::INFINITY);
    }
    if p == 1.0 {
        return Ok(sup_over_boxes(w, family, |v| {
            mean(v) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        }));
    }
    let e = -1.0 / (p - 1.0);
    Ok(sup_over_boxes(w, family, |v| mean(v) * mean_pow(v, e).powf(p - 1.0)))
}

/// `sup_Q (avg_Q w^s)^{1/s} / avg_Q w`; `s = inf` uses `max_Q w`. Boxes where `w` vanishes
/// identically are skipped.
pub fn rh_characteristic(w: &Weight, s: f64, family: &BoxFamily) -> Result<f64> {
    check_family(w, family)?;
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("s must be > 1, got {s}")));
    }
    let v = sup_over_boxes(w, family, |v| {
        let m = mean(v);
        if m == 0.0 {
            return 1.0;
        }
        let top = if s.is_infinite() {
            v.iter().cloned().fold(0.0, f64::max)
        } else {
            mean_pow(v, s).powf(1.0 / s)
        };
        top / m
    });
    Ok(v)
}

/// `[w]_{A_p}` with the floor applied when `w` has zeros; returns the flag.
pub fn ap_characteristic_floored(w: &Weight, p: f64, family: &BoxFamily) -> Result<(f64, bool)> {
    let (wf, hit) = w.floored();
    Ok((ap_characteristic(&wf, p, family)?, hit))
}

/// Thresholds for deciding class membership on finite grids.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MembershipOptions {
    /// Characteristic at the finest depth must not exceed this.
    pub tau: f64,
    /// Largest admissible growth of `log2` characteristic per depth level.
    pub slope_threshold: f64,
    /// Deepest dyadic level used.
    pub depth: usize,
    pub shifted: bool,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self {
            tau: 1e6,
            slope_threshold: 0.1,
            depth: 8,
            shifted: true,
        }
    }
}

/// A characteristic evaluated on families of increasing depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthProfile {
    /// Characteristic using all boxes of depth `1..=d`, for `d = 1..=depth`.
    pub values: Vec<f64>,
    pub value: f64,
    /// Slope of `log2` characteristic over the last three depths.
    pub depth_slope: f64,
    pub member: bool,
    pub floored: bool,
}

fn depth_profile(
    w: &Weight,
    opts: &MembershipOptions,
    floored: bool,
    ch: impl Fn(&Weight, &BoxFamily) -> Result<f64>,
) -> Result<DepthProfile> {
    if opts.depth < 3 {
        return Err(Error::InvalidParameter("depth must be at least 3".into()));
    }
    let mut boxes = Vec::new();
    let mut values = Vec::with_capacity(opts.depth);
    for d in 1..=opts.depth {
        let level = BoxFamily::dyadic_depth(&w.domain, d, opts.shifted)?;
        let side = (w.domain.points_per_dim() >> d).max(1);
        boxes.extend(level.boxes().iter().filter(|b| b.len[0] == side).copied());
        let fam = BoxFamily::new(boxes.clone(), format!("depth {d}"))?;
        values.push(ch(w, &fam)?);
    }
    let value = *values.last().unwrap_or(&f64::INFINITY);
    let k = values.len();
    let xs: Vec<f64> = (k - 3..k).map(|d| d as f64).collect();
    let ys: Vec<f64> = values[k - 3..].iter().map(|v| v.log2()).collect();
    let depth_slope = if ys.iter().all(|v| v.is_finite()) {
        linear_fit(&xs, &ys)?.slope
    } else {
        f64::INFINITY
    };
    let member = value.is_finite() && value <= opts.tau && depth_slope <= opts.slope_threshold;
    Ok(DepthProfile {
        values,
        value,
        depth_slope,
        member,
        floored,
    })
}

/// `A_p` depth profile (floor applied when the weight vanishes).
pub fn ap_profile(w: &Weight, p: f64, opts: &MembershipOptions) -> Result<DepthProfile> {
    let (wf, hit) = w.floored();
    depth_profile(&wf, opts, hit, |w, f| ap_characteristic(w, p, f))
}

/// `RH_s` depth profile.
pub fn rh_profile(w: &Weight, s: f64, opts: &MembershipOptions) -> Result<DepthProfile> {
    depth_profile(w, opts, false, |w, f| rh_characteristic(w, s, f))
}

/// Both sides of `A_r and RH_s  <=>  w^s in A_{1 + s(r-1)}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JnReport {
    pub r: f64,
    pub s: f64,
    pub ap_r: DepthProfile,
    pub rh_s: DepthProfile,
    /// `[w^s]_{A_{1+s(r-1)}}`.
    pub ap_power: DepthProfile,
    pub lhs_member: bool,
    pub rhs_member: bool,
    pub agree: bool,
}

/// Evaluates the power identity for `A_r` and `RH_s` with depth-growth verdicts.
pub fn jn_identity_check(w: &Weight, r: f64, s: f64, opts: &MembershipOptions) -> Result<JnReport> {
    if !(r > 1.0 && s > 1.0) {
        return Err(Error::InvalidParameter(format!("need r, s > 1, got r={r}, s={s}")));
    }
    let ap_r = ap_profile(w, r, opts)?;
    let rh_s = rh_profile(w, s, opts)?;
    let ap_power = ap_profile(&w.power_of(s), 1.0 + s * (r - 1.0), opts)?;
    let lhs_member = ap_r.member && rh_s.member;
    let rhs_member = ap_power.member;
    Ok(JnReport {
        r,
        s,
        ap_r,
        rh_s,
        ap_power,
        lhs_member,
        rhs_member,
        agree: lhs_member == rhs_member,
    })
}

/// Membership in `A_{p/p0} and RH_{(q0/p)'}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub p: f64,
    pub p0: f64,
    pub q0: f64,
    pub a_index: f64,
    /// `(q0/p)'`, also the `t'` of the weighted operator bounds.
    pub t_prime: f64,
    pub ap: DepthProfile,
    pub rh: Option<DepthProfile>,
    pub member: bool,
}

/// Dual exponent `q' = q/(q-1)` (`inf` for `q = 1`, `1` for `q = inf`).
pub fn conjugate(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else if q == 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

/// Class `W^p(p0, q0)` verdict; `q0 = inf` imposes no reverse Holder condition.
pub fn class_membership(
    w: &Weight,
    p: f64,
    p0: f64,
    q0: f64,
    opts: &MembershipOptions,
) -> Result<ClassReport> {
    if !(p0 >= 1.0 && p0 < p && p < q0) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= p0 < p < q0, got p0={p0}, p={p}, q0={q0}"
        )));
    }
    let a_index = p / p0;
    let t_prime = conjugate(q0 / p);
    let ap = ap_profile(w, a_index, opts)?;
    let rh = if q0.is_infinite() {
        None
    } else {
        Some(rh_profile(w, t_prime, opts)?)
    };
    let member = ap.member && rh.as_ref().map(|r| r.member).unwrap_or(true);
    Ok(ClassReport {
        p,
        p0,
        q0,
        a_index,
        t_prime,
        ap,
        rh,
        member,
    })
}

/// Characteristics relevant for weighted bounds with parameters `(p, s, t)`:
/// `[w]_{A_{p/s}}`, `[w]_{A_1}` and `[w]_{RH_{t'}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightClassReport {
    pub p: f64,
    pub s: f64,
    pub t: f64,
    pub ap_char: f64,
    pub a1_char: f64,
    pub rh_char: f64,
    pub family: String,
    pub floored: bool,
}

pub fn weight_class_report(
    w: &Weight,
    p: f64,
    s: f64,
    t: f64,
    family: &BoxFamily,
) -> Result<WeightClassReport> {
    if !(t >= 1.0) || !(s >= 1.0) || !(p > s) {
        return Err(Error::InvalidParameter(format!(
            "need t >= 1, s >= 1, p > s; got p={p}, s={s}, t={t}"
        )));
    }
    let (wf, floored) = w.floored();
    let ap_char = ap_characteristic(&wf, p / s, family)?;
    let a1_char = ap_characteristic(&wf, 1.0, family)?;
    let tp = conjugate(t);
    let rh_char = rh_characteristic(w, tp, family)?;
    Ok(WeightClassReport {
        p,
        s,
        t,
        ap_char,
        a1_char,
        rh_char,
        family: family.description().to_string(),
        floored,
    })
}
