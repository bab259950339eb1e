//! The experiment catalog.

use std::f64::consts::PI;

use anyhow::{bail, ensure, Context, Result};
use mfcz_core::bochner::{
    br_symbol, decompose_scales, delta_p, frequency_lattice, kernel_norms, partition_of_unity, reconstruction_error,
    uj_norm_scan, whitney_cover, PlanarDomain,
};
use mfcz_core::czdecomp::{decompose, weak11_experiment};
use mfcz_core::expspan::{span_constant, SpanConstantOptions};
use mfcz_core::fit::log_log_fit;
use mfcz_core::freqset::{sumset, FrequencySet};
use mfcz_core::grid::{lp_norm, BoxFamily, Cube, TorusDomain};
use mfcz_core::mfop::mf_hilbert;
use mfcz_core::opnorm::{
    gamma, gamma_is_informative, growth_regression, norm_2_exact, norm_p_power_method, unweighted_exponent,
    PowerOptions,
};
use mfcz_core::sharpmax::{classical_sharp, fefferman_stein_ratio, pointwise_domination, sharp_maximal, SharpMaxConfig};
use mfcz_core::weights::{
    ap_characteristic, jn_identity_check, rh_characteristic, weight_class_report, MembershipOptions, Weight,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::inputs;
use crate::params::Params;
use crate::report::{num, Report, Table};

pub struct Preset {
    pub name: &'static str,
    pub anchor: &'static str,
    pub description: &'static str,
    pub defaults: &'static [(&'static str, &'static str)],
    pub validate: fn(&Params) -> Result<()>,
    pub run: fn(&Params, &mut Report) -> Result<()>,
}

pub const CATALOG: [Preset; 12] = [
    Preset {
        name: "lemma-sweep",
        anchor: "span lemma: sup over Q against L^p average over 3Q, envelope N^{1/p}",
        description: "span constants for orthogonal and separated random frequency sets",
        defaults: &[("n_max", "64"), ("runs", "20"), ("p", "2"), ("seed", "1")],
        validate: lemma_validate,
        run: lemma_run,
    },
    Preset {
        name: "sumset-table",
        anchor: "k-fold sumset of an arithmetic progression has k(N-1)+1 elements",
        description: "sumset cardinalities of 1..N for k = 1..k_max",
        defaults: &[("n_max", "64"), ("k_max", "6"), ("seed", "0")],
        validate: sumset_validate,
        run: sumset_run,
    },
    Preset {
        name: "czdecomp-audit",
        anchor: "multi-frequency Calderon-Zygmund decomposition: box sum, good part, box averages",
        description: "audit constants c1-c4, reconstruction and cancellation over an N and lambda sweep",
        defaults: &[
            ("grid", "256"),
            ("n", "1:64"),
            ("functions", "50"),
            ("lambdas", "0.5,1,2,4"),
            ("seed", "7000"),
        ],
        validate: cz_validate,
        run: cz_run,
    },
    Preset {
        name: "weak11-scan",
        anchor: "weak type (1,1) with constant sqrt(N) for multi-frequency operators",
        description: "weak-type ratio of the multi-frequency Hilbert transform on an adversarial family",
        defaults: &[
            ("grid", "4096"),
            ("n", "2:64:2"),
            ("theta", "lattice"),
            ("seed", "11"),
        ],
        validate: weak_validate,
        run: weak_run,
    },
    Preset {
        name: "normscan-unweighted",
        anchor: "L^p bound with envelope N^{|1/p - 1/2|}",
        description: "power-method lower bounds of the multi-frequency Hilbert transform and exact L^2 norms",
        defaults: &[("grid", "2048"), ("n", "2,4,8,16,32,64"), ("p", "4"), ("seed", "0")],
        validate: normscan_validate,
        run: normscan_run,
    },
    Preset {
        name: "normscan-weighted",
        anchor: "weighted L^p(w) bound with exponent tp/(s min(2,s)) + |1/2 - 1/s|",
        description: "weighted power-method lower bounds against N^gamma with the weight class report",
        defaults: &[
            ("grid", "512"),
            ("n", "2,4,8,16,32"),
            ("p", "3"),
            ("s", "2"),
            ("t", "1"),
            ("weight", "log-lipschitz:0.5:5"),
            ("seed", "0"),
        ],
        validate: weighted_validate,
        run: weighted_run,
    },
    Preset {
        name: "sharpmax-fs",
        anchor: "Fefferman-Stein inequality for the multi-frequency sharp maximal function",
        description: "||f||_{L^p(w)} / ||M^# f||_{L^p(w)} against its N envelope",
        defaults: &[
            ("grid", "256"),
            ("n", "1,2,4,8,16"),
            ("p", "3"),
            ("s", "2"),
            ("t", "1"),
            ("weight", "constant:1"),
            ("seed", "3"),
        ],
        validate: fs_validate,
        run: fs_run,
    },
    Preset {
        name: "pointwise-dom",
        anchor: "pointwise bound of M^#(Tf) by M_s f with exponent |1/s - 1/2|",
        description: "classical reduction at Theta = {0} and pointwise domination ratios over N",
        defaults: &[("grid", "256"), ("n", "1,2,4,8,16,32"), ("functions", "100"), ("seed", "900")],
        validate: pointwise_validate,
        run: pointwise_run,
    },
    Preset {
        name: "weights-jn",
        anchor: "A_r and RH_s together iff w^s in A_{1+s(r-1)}",
        description: "constant-weight characteristics, A_p duality and the power identity on preset weights",
        defaults: &[("grid", "256"), ("r", "2"), ("s", "2"), ("depth", "8"), ("seed", "5")],
        validate: jn_validate,
        run: jn_run,
    },
    Preset {
        name: "br-kernel-scaling",
        anchor: "Bochner-Riesz scale pieces: N_j ~ 2^{-j}, ||sigma_j||_2 ~ 2^{j/2}, ||K_j||_1 ~ 2^{-j/2}",
        description: "Whitney counts, symbol and kernel norms per scale with the reconstruction check",
        defaults: &[
            ("grid", "1024"),
            ("dxi_log2", "-9"),
            ("domain", "disk"),
            ("delta", "1"),
            ("j", "-8:-3"),
            ("decay", "2"),
            ("floor", "4pi"),
            ("seed", "12"),
        ],
        validate: brk_validate,
        run: brk_run,
    },
    Preset {
        name: "br-norm-scan",
        anchor: "single-scale Bochner-Riesz operators U_j on L^p(w) with envelope 2^{-j(n-1)/s}",
        description: "norm estimates of U_j across scales with both envelopes",
        defaults: &[
            ("grid", "256"),
            ("dxi_log2", "-6"),
            ("domain", "disk"),
            ("delta", "1"),
            ("j", "-5:-3"),
            ("p", "4"),
            ("s", "2"),
            ("t", "1"),
            ("seed", "0"),
        ],
        validate: brn_validate,
        run: brn_run,
    },
    Preset {
        name: "delta-p-table",
        anchor: "Bochner-Riesz critical exponent delta(p)",
        description: "delta(p) for n = 2 and n >= 3 outside the excluded window",
        defaults: &[("dims", "2,3"), ("ps", "1,4/3,2,4,inf"), ("seed", "0")],
        validate: delta_validate,
        run: delta_run,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    CATALOG.iter().find(|p| p.name == name)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    log_log_fit(xs, ys).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(0.0, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn grid_1d(p: &Params) -> Result<TorusDomain> {
    let m = p.usize("grid")?;
    Ok(TorusDomain::new(1, m as f64, m)?)
}

fn positive_list(p: &Params, key: &str) -> Result<Vec<usize>> {
    let v = p.usize_list(key)?;
    ensure!(!v.is_empty() && v.iter().all(|&n| n >= 1), "'{key}' needs positive entries");
    Ok(v)
}

fn ns_for_fit(p: &Params, key: &str, min: usize) -> Result<Vec<usize>> {
    let v = positive_list(p, key)?;
    let mut d = v.clone();
    d.dedup();
    ensure!(d.len() >= min, "'{key}' needs at least {min} distinct values");
    Ok(v)
}

fn fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once('/') {
                Some((a, b)) => Ok(crate::params::parse_f64(a)? / crate::params::parse_f64(b)?),
                None => crate::params::parse_f64(t),
            }
        })
        .collect()
}

fn lattice_theta(d: &TorusDomain, n: usize, seed: u64) -> mfcz_core::Result<FrequencySet> {
    FrequencySet::random_lattice(d, n, d.points_per_dim() / 8, seed)
}

fn check_lattice_room(d: &TorusDomain, ns: &[usize]) -> Result<()> {
    let w = d.points_per_dim() / 8;
    let max = ns.iter().copied().max().unwrap_or(0);
    ensure!(max <= 2 * w + 1, "N = {max} exceeds the {} lattice frequencies in +-M/8", 2 * w + 1);
    Ok(())
}

// lemma-sweep

fn lemma_validate(p: &Params) -> Result<()> {
    ensure!(p.usize("n_max")? >= 2, "n_max must be at least 2");
    ensure!(p.usize("runs")? >= 1, "runs must be positive");
    let e = p.f64("p")?;
    ensure!((1.0..=2.0).contains(&e), "p must lie in [1, 2]");
    p.u64("seed")?;
    Ok(())
}

fn lemma_run(p: &Params, r: &mut Report) -> Result<()> {
    let n_max = p.usize("n_max")?;
    let runs = p.usize("runs")? as u64;
    let e = p.f64("p")?;
    let seed = p.u64("seed")?;
    let opts = SpanConstantOptions {
        seed,
        ..SpanConstantOptions::default()
    };
    let mut t = Table::new("lemma", &["kind", "N", "run", "constant", "ratio"]);
    let env = |n: usize| (n as f64).powf(1.0 / e);
    let q = Cube::new(vec![0.0], PI / 3.0)?;
    let mut orth_err: f64 = 0.0;
    for n in 1..=n_max {
        let th = FrequencySet::from_1d(&(0..n).map(|j| j as f64).collect::<Vec<_>>())?;
        let c = span_constant(&th, &q, e, &opts).with_context(|| format!("expspan, orthogonal N={n}"))?;
        orth_err = orth_err.max((c.value / env(n) - 1.0).abs());
        t.push(vec!["orthogonal".into(), n.to_string(), "0".into(), num(c.value), num(c.value / env(n))]);
    }
    let q = Cube::new(vec![0.0], 1.0)?;
    let mut worst: f64 = 0.0;
    for n in (2..=n_max).step_by(2) {
        let width = 4.0 * n as f64 * 2.0 * PI / 6.0 / 2.0;
        for run in 0..runs {
            let th = FrequencySet::random_separated(n, seed * 1_000_000 + 1000 * n as u64 + run, width, PI / 6.0)?;
            let c = span_constant(&th, &q, e, &opts).with_context(|| format!("expspan, generic N={n}"))?;
            worst = worst.max(c.value / env(n));
            t.push(vec!["generic".into(), n.to_string(), run.to_string(), num(c.value), num(c.value / env(n))]);
        }
    }
    r.table(t);
    r.fit("generic_max_ratio", worst)?;
    if e == 2.0 {
        r.verdict("orthogonal attains sqrt(N)", orth_err <= 1e-9, format!("max |C/sqrt(N) - 1| = {orth_err:.2e}"));
    }
    r.verdict("generic bounded by 4 N^{1/p}", worst <= 4.0, format!("max C/N^(1/p) = {worst:.4}"));
    Ok(())
}

// sumset-table

fn sumset_validate(p: &Params) -> Result<()> {
    ensure!(p.usize("n_max")? >= 1, "n_max must be positive");
    ensure!(p.usize("k_max")? >= 1, "k_max must be positive");
    Ok(())
}

fn sumset_run(p: &Params, r: &mut Report) -> Result<()> {
    let mut t = Table::new("sumset", &["N", "k", "size", "expected"]);
    let mut bad = 0;
    for n in 1..=p.usize("n_max")? {
        let th = FrequencySet::arithmetic(n)?;
        for k in 1..=p.usize("k_max")? {
            let size = sumset(&th, k).with_context(|| format!("freqset, N={n} k={k}"))?.len();
            let expected = k * (n - 1) + 1;
            bad += usize::from(size != expected);
            t.push(vec![n.to_string(), k.to_string(), size.to_string(), expected.to_string()]);
        }
    }
    let rows = t.rows.len();
    r.table(t);
    r.verdict("sumset size k(N-1)+1", bad == 0, format!("{bad} mismatches in {rows} rows"));
    Ok(())
}

// czdecomp-audit

fn cz_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    ensure!(d.points_per_dim().is_power_of_two(), "czdecomp needs a power-of-two grid");
    let ns = positive_list(p, "n")?;
    check_lattice_room(&d, &ns)?;
    ensure!(p.usize("functions")? >= 1, "functions must be positive");
    let l = p.f64_list("lambdas")?;
    ensure!(!l.is_empty() && l.iter().all(|&a| a > 0.0), "lambdas must be positive");
    p.u64("seed")?;
    Ok(())
}

fn cz_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let m = d.points_per_dim();
    let seed = p.u64("seed")?;
    let lambdas = p.f64_list("lambdas")?;
    let mut t = Table::new("audit", &["N", "c1", "c2", "c3", "c4", "boxes", "max_residual_ratio", "reconstruction"]);
    let mut per_n: Vec<[f64; 4]> = Vec::new();
    let (mut rec, mut canc, mut canc_fail) = (0.0f64, 0.0f64, 0usize);
    for n in positive_list(p, "n")? {
        let theta = lattice_theta(&d, n, n as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + n as u64);
        let mut sup = [0.0f64; 4];
        let (mut boxes, mut n_rec, mut n_canc) = (0usize, 0.0f64, 0.0f64);
        for _ in 0..p.usize("functions")? {
            let f = inputs::random_real(d, &mut rng, 7 * m / 16..9 * m / 16)?;
            let avg = lp_norm(&f, 1.0)? / d.measure();
            for &a in &lambdas {
                let dec = decompose(&f, a * avg, &theta).with_context(|| format!("czdecomp, N={n}"))?;
                let au = &dec.audit;
                n_rec = n_rec.max(au.reconstruction_error);
                boxes += au.boxes.len();
                for b in &au.boxes {
                    canc_fail += usize::from(b.residual > 1e-8 * b.b_l1);
                    if b.b_l1 > 0.0 {
                        n_canc = n_canc.max(b.residual / b.b_l1);
                    }
                }
                for (s, c) in sup.iter_mut().zip([au.c1, au.c2, au.c3, au.c4]) {
                    *s = s.max(c);
                }
            }
        }
        rec = rec.max(n_rec);
        canc = canc.max(n_canc);
        t.push(vec![
            n.to_string(),
            num(sup[0]),
            num(sup[1]),
            num(sup[2]),
            num(sup[3]),
            boxes.to_string(),
            num(n_canc),
            num(n_rec),
        ]);
        per_n.push(sup);
    }
    r.table(t);
    r.verdict("reconstruction <= 1e-10", rec <= 1e-10, format!("max {rec:.2e}"));
    r.verdict(
        "cancellation <= 1e-8 ||b_J||_1",
        canc_fail == 0,
        format!("max ratio {canc:.2e}, {canc_fail} boxes above"),
    );
    for i in 0..4 {
        let col: Vec<f64> = per_n.iter().map(|s| s[i]).collect();
        let sp = spread(&col);
        r.fit(&format!("c{}_spread", i + 1), sp)?;
        r.verdict(&format!("c{} stable within factor 4", i + 1), sp <= 4.0, format!("max/min over N = {sp:.3}"));
    }
    Ok(())
}

// weak11-scan

fn weak_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = ns_for_fit(p, "n", 2)?;
    match p.str("theta")? {
        "lattice" => check_lattice_room(&d, &ns)?,
        "arith" => {
            let max = ns.iter().copied().max().unwrap_or(0);
            ensure!(8 * max < d.points_per_dim() / 2, "arith spacing 8 needs 16 N < M");
        }
        other => bail!("theta must be 'lattice' or 'arith', got '{other}'"),
    }
    p.u64("seed")?;
    Ok(())
}

fn weak_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = ns_for_fit(p, "n", 2)?;
    let arith = p.str("theta")? == "arith";
    let dx = d.frequency_spacing();
    let table = weak11_experiment(
        &ns,
        |n| {
            let theta = if arith {
                FrequencySet::from_1d(&(0..n).map(|j| 8.0 * j as f64 * dx).collect::<Vec<_>>())?
            } else {
                lattice_theta(&d, n, n as u64)?
            };
            Ok((mf_hilbert(&theta)?.on(&d)?, theta))
        },
        p.u64("seed")?,
    )
    .context("czdecomp weak-type scan")?;
    let mut t = Table::new("weak11", &["N", "ratio", "best_function"]);
    for row in &table.rows {
        t.push(vec![row.n.to_string(), num(row.ratio), row.best_function.clone()]);
    }
    t.footer.push(format!("slope {} r2 {}", num(table.slope), num(table.r2)));
    r.table(t);
    r.fit("slope", table.slope)?;
    r.fit("r2", table.r2)?;
    r.verdict(
        "slope in [0.3, 0.65]",
        (0.3..=0.65).contains(&table.slope),
        format!("slope {:.4}", table.slope),
    );
    Ok(())
}

// normscan-unweighted

fn normscan_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = ns_for_fit(p, "n", 4)?;
    check_lattice_room(&d, &ns)?;
    let e = p.f64("p")?;
    ensure!(e > 1.0 && e.is_finite(), "p must lie in (1, inf)");
    p.u64("seed")?;
    Ok(())
}

fn normscan_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let e = p.f64("p")?;
    let ns = ns_for_fit(p, "n", 4)?;
    let env = unweighted_exponent(e);
    let mut t = Table::new("normscan", &["N", "estimate", "envelope", "ratio", "l2_norm", "start"]);
    let (mut vals, mut l2_err) = (Vec::new(), 0.0f64);
    for &n in &ns {
        let theta = lattice_theta(&d, n, n as u64)?;
        let op = mf_hilbert(&theta)?.on(&d)?;
        let l2 = norm_2_exact(&op)?.value;
        l2_err = l2_err.max((l2 - 1.0).abs());
        let opts = PowerOptions {
            theta: Some(theta),
            seed: p.u64("seed")? + n as u64,
            ..PowerOptions::default()
        };
        let est = norm_p_power_method(&op, e, None, &opts).with_context(|| format!("opnorm, N={n}"))?;
        let envelope = (n as f64).powf(env);
        t.push(vec![
            n.to_string(),
            num(est.value),
            num(envelope),
            num(est.value / envelope),
            num(l2),
            est.start.clone(),
        ]);
        vals.push(est.value);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = growth_regression("N", &xs, &vals, env)?;
    t.footer.push(format!("exponent {} envelope {}", num(fit.exponent), num(env)));
    r.table(t);
    r.verdict("L2 norm equals 1", l2_err <= 1e-15, format!("max |norm - 1| = {l2_err:.1e}"));
    r.verdict(
        "fitted exponent <= |1/p - 1/2| + 0.1",
        fit.exponent <= env + 0.1,
        format!("exponent {:.4}, C = {:.4}", fit.exponent, fit.envelope_constant),
    );
    r.fit("growth", fit)?;
    Ok(())
}

// normscan-weighted

fn weighted_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = ns_for_fit(p, "n", 4)?;
    check_lattice_room(&d, &ns)?;
    let (e, s, t) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    ensure!(e > 1.0 && e.is_finite(), "p must lie in (1, inf)");
    ensure!(s >= 1.0 && e > s, "need 1 <= s < p");
    ensure!(t >= 1.0, "need t >= 1");
    let w = inputs::weight(p.str("weight")?, &d)?;
    ensure!(!w.has_zeros(), "the power method needs a strictly positive weight");
    Ok(())
}

fn weighted_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let (e, s, tt) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    let w = inputs::weight(p.str("weight")?, &d)?;
    let g = gamma(tt, e, s);
    let class = weight_class_report(&w, e, s, tt, &BoxFamily::default_for(&d)).context("weights")?;
    let ns = ns_for_fit(p, "n", 4)?;
    let mut t = Table::new("normscan_weighted", &["N", "estimate", "envelope", "ratio"]);
    let mut vals = Vec::new();
    for &n in &ns {
        let theta = lattice_theta(&d, n, n as u64)?;
        let op = mf_hilbert(&theta)?.on(&d)?;
        let opts = PowerOptions {
            theta: Some(theta),
            seed: p.u64("seed")? + n as u64,
            ..PowerOptions::default()
        };
        let est = norm_p_power_method(&op, e, Some(&w), &opts).with_context(|| format!("opnorm, N={n}"))?;
        let envelope = (n as f64).powf(g);
        t.push(vec![n.to_string(), num(est.value), num(envelope), num(est.value / envelope)]);
        vals.push(est.value);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = growth_regression("N", &xs, &vals, g)?;
    t.footer.push(format!("gamma {} informative {}", num(g), gamma_is_informative(g)));
    r.table(t);
    r.fit("gamma", g)?;
    r.fit("gamma_informative", gamma_is_informative(g))?;
    r.fit("weight_class", &class)?;
    r.verdict(
        "fitted exponent <= gamma + 0.1",
        fit.exponent <= g + 0.1,
        format!("exponent {:.4}, gamma {g:.4}", fit.exponent),
    );
    r.fit("growth", fit)?;
    Ok(())
}

// sharpmax-fs

fn fs_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = ns_for_fit(p, "n", 2)?;
    check_lattice_room(&d, &ns)?;
    let (e, s, t) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    ensure!(s >= 1.0 && e > s && e.is_finite(), "need 1 <= s < p < inf");
    ensure!(t >= 1.0, "need t >= 1");
    inputs::weight(p.str("weight")?, &d)?;
    Ok(())
}

fn fs_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let m = d.points_per_dim();
    let (e, s, tt) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    let w = inputs::weight(p.str("weight")?, &d)?;
    let fam = BoxFamily::default_for(&d);
    let ns = ns_for_fit(p, "n", 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.u64("seed")?);
    let f = inputs::random_real(d, &mut rng, 0..m)?;
    let mut t = Table::new("fs", &["N", "norm_f", "norm_sharp", "ratio", "envelope", "normalized"]);
    let (mut xs, mut ys, mut degenerate) = (Vec::new(), Vec::new(), 0);
    for &n in &ns {
        let theta = lattice_theta(&d, n, n as u64)?;
        let cfg = SharpMaxConfig::new(s, theta, fam.clone(), mfcz_core::sharpmax::ProjectionMode::L2)?;
        let rep = fefferman_stein_ratio(&f, &cfg, e, &w, tt).with_context(|| format!("sharpmax, N={n}"))?;
        degenerate += usize::from(rep.degenerate);
        t.push(vec![
            n.to_string(),
            num(rep.norm_f),
            num(rep.norm_sharp),
            num(rep.ratio),
            num(rep.envelope),
            num(rep.normalized),
        ]);
        xs.push(n as f64);
        ys.push(rep.ratio);
    }
    let env_exp = tt * e / s * 0.5f64.max(1.0 / s);
    let sl = slope(&xs, &ys);
    r.table(t);
    r.fit("ratio_slope", sl)?;
    r.fit("envelope_exponent", env_exp)?;
    r.verdict("no degenerate sharp function", degenerate == 0, format!("{degenerate} degenerate"));
    r.verdict(
        "ratio grows no faster than the envelope",
        sl <= env_exp + 0.1,
        format!("slope {sl:.4}, envelope exponent {env_exp:.4}"),
    );
    Ok(())
}

// pointwise-dom

fn pointwise_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    let ns = positive_list(p, "n")?;
    check_lattice_room(&d, &ns)?;
    ensure!(p.usize("functions")? >= 1, "functions must be positive");
    p.u64("seed")?;
    Ok(())
}

fn pointwise_run(p: &Params, r: &mut Report) -> Result<()> {
    let seed = p.u64("seed")?;
    let small = TorusDomain::new(1, 64.0, 64)?;
    let fam = BoxFamily::default_for(&small);
    let cfg = SharpMaxConfig::l2(FrequencySet::from_1d(&[0.0])?, fam.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..p.usize("functions")? {
        let f = inputs::random_real(small, &mut rng, 0..64)?;
        let ours = sharp_maximal(&f, &cfg)?.values.real_parts();
        let classical = classical_sharp(&f, &fam, 2.0)?.real_parts();
        for (a, b) in ours.iter().zip(&classical) {
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
    }
    r.verdict(
        "Theta = {0} within factor 2 of the classical sharp function",
        lo >= 0.5 && hi <= 2.0,
        format!("ratio range [{lo:.4}, {hi:.4}]"),
    );

    let d = grid_1d(p)?;
    let m = d.points_per_dim();
    let fam = BoxFamily::default_for(&d);
    let mut t = Table::new("pointwise", &["N", "ratio", "envelope", "argmax"]);
    let mut ratios = Vec::new();
    for n in positive_list(p, "n")? {
        let theta = lattice_theta(&d, n, n as u64)?;
        let op = mf_hilbert(&theta)?.on(&d)?;
        let cfg = SharpMaxConfig::l2(theta, fam.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + n as u64);
        let f = inputs::random_real(d, &mut rng, 0..m)?;
        let rep = pointwise_domination(&op, &f, &cfg).with_context(|| format!("sharpmax, N={n}"))?;
        t.push(vec![n.to_string(), num(rep.ratio), num(rep.envelope), rep.argmax.to_string()]);
        ratios.push(rep.ratio);
    }
    let sp = spread(&ratios);
    r.table(t);
    r.fit("classical_ratio_range", [lo, hi])?;
    r.fit("pointwise_spread", sp)?;
    r.verdict("pointwise ratio bounded over N", sp <= 4.0, format!("max/min = {sp:.4}"));
    Ok(())
}

// weights-jn

fn jn_validate(p: &Params) -> Result<()> {
    let d = grid_1d(p)?;
    ensure!(d.points_per_dim() >= 16, "grid must have at least 16 points");
    ensure!(p.f64("r")? > 1.0 && p.f64("s")? > 1.0, "need r, s > 1");
    let depth = p.usize("depth")?;
    ensure!(depth >= 3, "depth must be at least 3");
    ensure!(1usize << depth <= d.points_per_dim(), "depth exceeds log2(grid)");
    p.u64("seed")?;
    Ok(())
}

fn jn_run(p: &Params, r: &mut Report) -> Result<()> {
    let d = grid_1d(p)?;
    let m = d.points_per_dim();
    let fam = BoxFamily::default_for(&d);
    let seed = p.u64("seed")?;
    let mut t = Table::new("characteristics", &["weight", "kind", "index", "value"]);
    let mut const_err: f64 = 0.0;
    for c in [1.0, 0.37, 5.0] {
        let w = Weight::constant(d, c)?;
        for q in [1.0, 1.5, 2.0, 3.0] {
            let v = ap_characteristic(&w, q, &fam)?;
            const_err = const_err.max((v - 1.0).abs());
            t.push(vec![format!("constant:{c}"), "A".into(), num(q), num(v)]);
        }
        for s in [1.5, 2.0, f64::INFINITY] {
            let v = rh_characteristic(&w, s, &fam)?;
            const_err = const_err.max((v - 1.0).abs());
            t.push(vec![format!("constant:{c}"), "RH".into(), num(s), num(v)]);
        }
    }
    r.verdict("constant weights have characteristic 1", const_err <= 1e-14, format!("max |char - 1| = {const_err:.1e}"));

    let duals = [
        ("power:0.5", Weight::power(d, 0.5)?),
        ("power:-0.4", Weight::power(d, -0.4)?),
        ("two-valued:10", Weight::two_valued(d, 10.0)?),
        ("log-lipschitz:0.5", Weight::random_log_lipschitz(d, seed, 0.5)?),
    ];
    let mut dual_err: f64 = 0.0;
    for (name, w) in &duals {
        for q in [1.5, 2.0, 3.0] {
            let qq = q / (q - 1.0);
            let lhs = ap_characteristic(&w.power_of(1.0 - qq), qq, &fam)?;
            let rhs = ap_characteristic(w, q, &fam)?.powf(qq - 1.0);
            dual_err = dual_err.max((lhs / rhs - 1.0).abs());
            t.push(vec![name.to_string(), "A".into(), num(q), num(ap_characteristic(w, q, &fam)?)]);
        }
    }
    r.table(t);
    r.verdict("A_p duality", dual_err <= 1e-10, format!("max rel err {dual_err:.1e}"));

    let (rr, ss) = (p.f64("r")?, p.f64("s")?);
    let opts = MembershipOptions {
        depth: p.usize("depth")?,
        ..MembershipOptions::default()
    };
    let family = [
        ("constant:2", Weight::constant(d, 2.0)?),
        ("power:-0.5", Weight::power(d, -0.5)?),
        ("power:0.3", Weight::power(d, 0.3)?),
        ("power:1.5", Weight::power(d, 1.5)?),
        ("power:-0.95", Weight::power(d, -0.95)?),
        ("two-valued:10", Weight::two_valued(d, 10.0)?),
        ("log-lipschitz:0.5", Weight::random_log_lipschitz(d, seed, 0.5)?),
        ("spike", Weight::spike(d, m / 2, 1e-8)?),
    ];
    let mut jt = Table::new("jn", &["weight", "a_r", "rh_s", "a_power", "lhs_member", "rhs_member", "agree"]);
    let mut disagree = 0;
    for (name, w) in &family {
        let rep = jn_identity_check(w, rr, ss, &opts).with_context(|| format!("weights, {name}"))?;
        disagree += usize::from(!rep.agree);
        jt.push(vec![
            name.to_string(),
            num(rep.ap_r.value),
            num(rep.rh_s.value),
            num(rep.ap_power.value),
            rep.lhs_member.to_string(),
            rep.rhs_member.to_string(),
            rep.agree.to_string(),
        ]);
    }
    r.table(jt);
    r.verdict("power identity verdicts agree", disagree == 0, format!("{disagree} of {} disagree", family.len()));
    Ok(())
}

// br-kernel-scaling / br-norm-scan

fn br_common_validate(p: &Params) -> Result<(TorusDomain, PlanarDomain)> {
    let m = p.usize("grid")?;
    let lat = frequency_lattice(m, 2f64.powi(p.get::<i32>("dxi_log2")?))?;
    let dom = PlanarDomain::parse(p.str("domain")?)?;
    ensure!(p.f64("delta")? > 0.0, "delta must be positive");
    let half = m as f64 / 2.0 * lat.frequency_spacing();
    ensure!(dom.extent() <= half, "domain extent {} exceeds the lattice half width {half}", dom.extent());
    let js = p.i64_list("j")?;
    ensure!(!js.is_empty(), "need at least one scale");
    Ok((lat, dom))
}

fn brk_validate(p: &Params) -> Result<()> {
    let (lat, _) = br_common_validate(p)?;
    ensure!(p.i64_list("j")?.len() >= 2, "need at least two scales for slopes");
    let floor = p.f64("floor")?;
    ensure!(floor > 0.0, "floor must be positive");
    let jmin = *p.i64_list("j")?.iter().min().unwrap_or(&0);
    let v = lat.side_length() * 2f64.powi(jmin as i32);
    ensure!(v >= floor, "kernel wraparound: L 2^j = {v:.3} < floor {floor:.3} at j = {jmin}");
    p.get::<u32>("decay")?;
    Ok(())
}

fn br_setup(
    p: &Params,
) -> Result<(TorusDomain, mfcz_core::bochner::BRSymbol, mfcz_core::bochner::ScaleDecomposition)> {
    let (lat, dom) = br_common_validate(p)?;
    let cover = whitney_cover(&dom, &lat, 2.0).context("bochner cover")?;
    let pou = partition_of_unity(&cover, &lat).context("bochner partition")?;
    let disk = matches!(dom, PlanarDomain::Disk { .. });
    let sym = br_symbol(&dom, p.f64("delta")?, &lat, if disk { None } else { Some((&cover, &pou)) })?;
    let dec = decompose_scales(&sym, &cover, &pou)?;
    Ok((lat, sym, dec))
}

fn brk_run(p: &Params, r: &mut Report) -> Result<()> {
    let (lat, sym, dec) = br_setup(p)?;
    let floor = p.f64("floor")?;
    let decay = p.get::<u32>("decay")?;
    let mut t = Table::new("kernels", &["j", "count", "sigma_l2", "k_l1", "k_l2", "tail_fraction"]);
    let (mut xs, mut counts, mut sig, mut k1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in p.i64_list("j")? {
        let j = j as i32;
        let piece = dec.scale(j).with_context(|| format!("no Whitney cubes at scale {j}"))?;
        let kn = kernel_norms(piece, &lat, decay, floor)?;
        t.push(vec![
            j.to_string(),
            kn.count.to_string(),
            num(kn.sigma_l2),
            num(kn.k_l1),
            num(kn.k_l2),
            num(kn.tail_fraction),
        ]);
        xs.push(2f64.powi(j));
        counts.push(kn.count as f64);
        sig.push(kn.sigma_l2);
        k1.push(kn.k_l1);
    }
    let (sc, ss, sk) = (slope(&xs, &counts), slope(&xs, &sig), slope(&xs, &k1));
    t.footer.push(format!("slope count {} sigma_l2 {} k_l1 {}", num(sc), num(ss), num(sk)));
    r.table(t);
    let f = inputs::random_complex(lat, p.u64("seed")?)?;
    let rec = reconstruction_error(&sym, &dec, &f)?;
    r.fit("count_slope", sc)?;
    r.fit("sigma_l2_slope", ss)?;
    r.fit("k_l1_slope", sk)?;
    r.fit("collar_l2", dec.collar_l2)?;
    r.verdict("count slope -1 +- 0.2", (sc + 1.0).abs() <= 0.2, format!("{sc:.4}"));
    r.verdict("sigma_l2 slope 0.5 +- 0.15", (ss - 0.5).abs() <= 0.15, format!("{ss:.4}"));
    r.verdict("K_l1 slope -0.5 +- 0.2", (sk + 0.5).abs() <= 0.2, format!("{sk:.4}"));
    r.verdict("reconstruction <= 1e-10", rec <= 1e-10, format!("{rec:.2e}"));
    Ok(())
}

fn brn_validate(p: &Params) -> Result<()> {
    br_common_validate(p)?;
    ensure!(p.i64_list("j")?.len() >= 2, "need at least two scales");
    let (e, s, t) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    ensure!(e > 1.0 && e.is_finite(), "p must lie in (1, inf)");
    ensure!(s >= 1.0 && t >= 1.0, "need s, t >= 1");
    p.u64("seed")?;
    Ok(())
}

fn brn_run(p: &Params, r: &mut Report) -> Result<()> {
    let (lat, _, dec) = br_setup(p)?;
    let js: Vec<i32> = p.i64_list("j")?.into_iter().map(|j| j as i32).collect();
    let (e, s, tt) = (p.f64("p")?, p.f64("s")?, p.f64("t")?);
    let opts = PowerOptions {
        seed: p.u64("seed")?,
        ..PowerOptions::default()
    };
    let rows = uj_norm_scan(&dec, &lat, &js, e, s, tt, None, &opts).context("bochner norm scan")?;
    let exact = uj_norm_scan(&dec, &lat, &js, 2.0, s, tt, None, &opts)?;
    let mut t = Table::new(
        "uj",
        &["j", "count", "estimate", "kind", "envelope", "mf_envelope", "ratio", "l2_norm", "sup_sigma"],
    );
    let mut l2_err: f64 = 0.0;
    for (row, ex) in rows.iter().zip(&exact) {
        let sup = dec.scale(row.j).map(|sp| sp.sup()).unwrap_or(0.0);
        l2_err = l2_err.max((ex.estimate - sup).abs());
        t.push(vec![
            row.j.to_string(),
            row.count.to_string(),
            num(row.estimate),
            format!("{:?}", row.kind),
            num(row.envelope),
            num(row.mf_envelope),
            num(row.ratio),
            num(ex.estimate),
            num(sup),
        ]);
    }
    let filled: Vec<_> = rows.iter().filter(|x| x.count > 0).collect();
    let xs: Vec<f64> = filled.iter().map(|x| 2f64.powi(-x.j)).collect();
    let ys: Vec<f64> = filled.iter().map(|x| x.estimate).collect();
    let sl = slope(&xs, &ys);
    let env = (lat.dim() as f64 - 1.0) / s;
    r.table(t);
    r.fit("estimate_slope_vs_2^-j", sl)?;
    r.verdict("L2 norm equals sup |sigma_j|", l2_err <= 1e-15, format!("max err {l2_err:.1e}"));
    r.verdict(
        "growth in 2^{-j} within the envelope",
        sl <= env + 0.1,
        format!("slope {sl:.4}, envelope exponent {env:.4}"),
    );
    Ok(())
}

// delta-p-table

fn delta_validate(p: &Params) -> Result<()> {
    let dims = p.usize_list("dims")?;
    ensure!(!dims.is_empty() && dims.iter().all(|&n| n >= 2), "dims must be >= 2");
    let ps = fractions(p.str("ps")?)?;
    ensure!(ps.iter().all(|&q| q >= 1.0), "p values must be >= 1");
    Ok(())
}

fn delta_run(p: &Params, r: &mut Report) -> Result<()> {
    let mut t = Table::new("delta_p", &["n", "p", "delta"]);
    for n in p.usize_list("dims")? {
        for q in fractions(p.str("ps")?)? {
            let v = match delta_p(n, q) {
                Ok(v) => num(v),
                Err(mfcz_core::Error::Precondition(_)) => "excluded".into(),
                Err(e) => return Err(e.into()),
            };
            t.push(vec![n.to_string(), num(q), v]);
        }
    }
    r.table(t);
    let got = [delta_p(2, 2.0)?, delta_p(2, 4.0)?, delta_p(2, f64::INFINITY)?];
    r.verdict("n = 2 at p = 2, 4, inf gives 0, 0, 1/2", got == [0.0, 0.0, 0.5], format!("{got:?}"));
    Ok(())
}
