//! Acceptance suite: twelve criteria at their stated tolerances, one verdict line each.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use mfcz_core::bochner::{
    decompose_scales, delta_p, frequency_lattice, kernel_norms, partition_of_unity, reconstruction_error, br_symbol,
    whitney_cover, PlanarDomain,
};
use mfcz_core::czdecomp::{decompose, weak11_experiment};
use mfcz_core::expspan::{span_constant, SpanConstantOptions};
use mfcz_core::fit::log_log_fit;
use mfcz_core::freqset::{sumset, FrequencySet};
use mfcz_core::grid::{BoxFamily, Cube, GridFunction, TorusDomain};
use mfcz_core::mfop::{mf_hilbert, SpectralOperator};
use mfcz_core::opnorm::{growth_regression, norm_2_exact, norm_p_power_method, PowerOptions};
use mfcz_core::sharpmax::{pointwise_domination, sharp_maximal, SharpMaxConfig};
use mfcz_core::weights::{ap_characteristic, jn_identity_check, rh_characteristic, MembershipOptions, Weight};
use mfcz_core::{Complex64, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn slope_of(xs: &[f64], ys: &[f64]) -> f64 {
    log_log_fit(xs, ys).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn random_real(d: TorusDomain, rng: &mut ChaCha8Rng, support: std::ops::Range<usize>) -> GridFunction {
    let mut v = vec![0.0; d.len()];
    for x in &mut v[support] {
        *x = rng.random_range(-1.0..1.0);
    }
    GridFunction::from_real(d, &v).unwrap()
}

fn sumset_exactness() -> Result<Outcome> {
    let mut bad = Vec::new();
    for n in 2..=64usize {
        let t = FrequencySet::arithmetic(n)?;
        for k in 1..=6usize {
            let got = sumset(&t, k)?.len();
            if got != k * (n - 1) + 1 {
                bad.push((n, k, got));
            }
        }
    }
    outcome(bad.is_empty(), format!("378 (N,k) pairs, mismatches {bad:?}"))
}

fn span_orthogonal() -> Result<Outcome> {
    // 3Q has length 2pi, so integer frequencies are orthogonal on it.
    let q = Cube::new(vec![0.0], PI / 3.0)?;
    let mut worst: f64 = 0.0;
    for n in 1..=64usize {
        let t = FrequencySet::from_1d(&(0..n).map(|j| j as f64).collect::<Vec<_>>())?;
        let c = span_constant(&t, &q, 2.0, &SpanConstantOptions::default())?;
        worst = worst.max((c.value / (n as f64).sqrt() - 1.0).abs());
    }
    outcome(worst <= 1e-9, format!("max |C/sqrt(N) - 1| = {worst:.2e} (tol 1e-9)"))
}

fn span_generic() -> Result<Outcome> {
    let q = Cube::new(vec![0.0], 1.0)?;
    let triple = 6.0;
    let mut worst: f64 = 0.0;
    let mut at = 0;
    for n in (2..=64usize).step_by(2) {
        let width = 4.0 * n as f64 * 2.0 * PI / triple / 2.0;
        for run in 0..20u64 {
            let t = FrequencySet::random_separated(n, 1000 * n as u64 + run, width, PI / triple)?;
            let c = span_constant(&t, &q, 2.0, &SpanConstantOptions::default())?;
            let r = c.value / (n as f64).sqrt();
            if r > worst {
                worst = r;
                at = n;
            }
        }
    }
    outcome(worst <= 4.0, format!("C = max C/sqrt(N) = {worst:.4} at N = {at} (need <= 4)"))
}

fn cz_audit() -> Result<Outcome> {
    let m = 256usize;
    let d = TorusDomain::new(1, m as f64, m)?;
    let mut rec: f64 = 0.0;
    let mut canc: f64 = 0.0;
    let mut canc_fail = 0usize;
    let mut per_n: Vec<[f64; 4]> = Vec::new();
    let mut non_root_c3: f64 = 0.0;
    for n in 1..=64usize {
        let theta = FrequencySet::random_lattice(&d, n, m / 8, n as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + n as u64);
        let mut sup = [0.0f64; 4];
        for _ in 0..50 {
            let f = random_real(d, &mut rng, 7 * m / 16..9 * m / 16);
            let avg = mfcz_core::grid::lp_norm(&f, 1.0)? / d.measure();
            for a in [0.5, 1.0, 2.0, 4.0] {
                let dec = decompose(&f, a * avg, &theta)?;
                let au = &dec.audit;
                rec = rec.max(au.reconstruction_error);
                for b in &au.boxes {
                    if b.residual > 1e-8 * b.b_l1 {
                        canc_fail += 1;
                    }
                    if b.b_l1 > 0.0 {
                        canc = canc.max(b.residual / b.b_l1);
                    }
                }
                for (s, c) in sup.iter_mut().zip([au.c1, au.c2, au.c3, au.c4]) {
                    *s = s.max(c);
                }
                for b in au.boxes.iter().filter(|b| b.side < m) {
                    let c3 = b.f_l1 * (n as f64).sqrt() / (b.side as f64 * a * avg);
                    non_root_c3 = non_root_c3.max(c3);
                }
            }
        }
        per_n.push(sup);
    }
    let mut spreads = [0.0f64; 4];
    let mut text = Vec::new();
    for i in 0..4 {
        let hi = per_n.iter().map(|r| r[i]).fold(0.0, f64::max);
        let lo = per_n.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min);
        spreads[i] = hi / lo;
        text.push(format!("c{} in [{lo:.3}, {hi:.3}] spread {:.2}", i + 1, spreads[i]));
    }
    let stable = spreads.iter().all(|&s| s <= 4.0);
    outcome(
        rec <= 1e-10 && canc_fail == 0 && stable,
        format!(
            "reconstruction {rec:.1e}, max residual/||b_J||_1 {canc:.1e} ({canc_fail} boxes above 1e-8); per-N sup over (f, lambda): {} (need spread <= 4); \
             non-root c3 max {non_root_c3:.3}",
            text.join(", ")
        ),
    )
}

fn weak_type_growth() -> Result<Outcome> {
    let m = 4096usize;
    let d = TorusDomain::new(1, m as f64, m)?;
    let ns: Vec<usize> = (2..=64).step_by(2).collect();
    let table = weak11_experiment(
        &ns,
        |n| {
            let theta = FrequencySet::random_lattice(&d, n, m / 8, n as u64)?;
            Ok((mf_hilbert(&theta)?.on(&d)?, theta))
        },
        11,
    )?;
    let first = &table.rows[0];
    let last = table.rows.last().unwrap();
    outcome(
        (0.3..=0.65).contains(&table.slope),
        format!(
            "slope {:.3} (r2 {:.3}), ratio {:.2} at N=2 .. {:.2} at N=64 (band [0.3, 0.65])",
            table.slope, table.r2, first.ratio, last.ratio
        ),
    )
}

fn l2_exactness() -> Result<Outcome> {
    let d = TorusDomain::new(1, 512.0, 512)?;
    let dx = d.frequency_spacing();
    let mut sets = vec![
        FrequencySet::from_1d(&[0.0])?,
        FrequencySet::from_1d(&(1..=16).map(|k| 3.0 * k as f64 * dx).collect::<Vec<_>>())?,
        FrequencySet::from_1d(&(0..8).map(|k| k as f64 * dx).collect::<Vec<_>>())?,
    ];
    for n in [2, 7, 32, 64] {
        sets.push(FrequencySet::random_lattice(&d, n, 200, n as u64)?);
    }
    let mut worst: f64 = 0.0;
    for t in &sets {
        let v = norm_2_exact(&mf_hilbert(t)?.on(&d)?)?.value;
        worst = worst.max((v - 1.0).abs());
    }
    outcome(worst <= 1e-15, format!("{} sets, max |norm - 1| = {worst:.1e}", sets.len()))
}

fn l4_growth() -> Result<Outcome> {
    let m = 2048usize;
    let d = TorusDomain::new(1, m as f64, m)?;
    let ns = [2usize, 4, 8, 16, 32, 64];
    let mut vals = Vec::new();
    for &n in &ns {
        let theta = FrequencySet::random_lattice(&d, n, m / 8, n as u64)?;
        let op = mf_hilbert(&theta)?.on(&d)?;
        let opts = PowerOptions {
            theta: Some(theta),
            seed: n as u64,
            ..PowerOptions::default()
        };
        vals.push(norm_p_power_method(&op, 4.0, None, &opts)?.value);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = growth_regression("N", &xs, &vals, 0.25)?;
    outcome(
        fit.exponent <= 0.25 + 0.1,
        format!(
            "fitted exponent {:.3} (need <= 0.35), C = {:.3}, estimates {:?}",
            fit.exponent,
            fit.envelope_constant,
            vals.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn power_oracle() -> Result<Outcome> {
    let d = TorusDomain::new(1, 64.0, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kv: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let k = GridFunction::from_real(d, &kv)?;
    let l1: f64 = kv.iter().sum::<f64>() * d.cell_volume();
    let conv = SpectralOperator::convolution(&k);
    let opts = PowerOptions {
        tol: 1e-15,
        max_iter: 50_000,
        ..PowerOptions::default()
    };
    let mut conv_err: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let v = norm_p_power_method(&conv, p, None, &opts)?.value;
        conv_err = conv_err.max((v / l1 - 1.0).abs());
    }
    let mut sym_err: f64 = 0.0;
    for s in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + s);
        let m: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        let op = SpectralOperator::new(d, m)?;
        let exact = norm_2_exact(&op)?.value;
        let v = norm_p_power_method(&op, 2.0, None, &PowerOptions { seed: s, ..opts.clone() })?.value;
        sym_err = sym_err.max((v / exact - 1.0).abs());
    }
    outcome(
        conv_err <= 1e-6 && sym_err <= 1e-6,
        format!("convolution max rel err {conv_err:.1e}, 20 symbols max rel err {sym_err:.1e} (tol 1e-6)"),
    )
}

/// `sup_{Q ni x} (avg_Q |f - avg_Q f|^2)^{1/2}` written out box by box.
fn reference_sharp(f: &[f64], boxes: &[(usize, usize)]) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0f64; m];
    for &(start, len) in boxes {
        let pts: Vec<usize> = (start..start + len).map(|i| i % m).collect();
        let mean = pts.iter().map(|&i| f[i]).sum::<f64>() / len as f64;
        let var = pts.iter().map(|&i| (f[i] - mean).powi(2)).sum::<f64>() / len as f64;
        for &i in &pts {
            out[i] = out[i].max(var.sqrt());
        }
    }
    out
}

fn sharp_reduction() -> Result<Outcome> {
    let m = 64usize;
    let d = TorusDomain::new(1, m as f64, m)?;
    let fam = BoxFamily::default_for(&d);
    let boxes: Vec<(usize, usize)> = fam
        .boxes()
        .iter()
        .map(|b| (b.start[0].rem_euclid(m as i64) as usize, b.len[0]))
        .collect();
    let cfg = SharpMaxConfig::l2(FrequencySet::from_1d(&[0.0])?, fam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..100 {
        let f = random_real(d, &mut rng, 0..m);
        let ours = sharp_maximal(&f, &cfg)?.values.real_parts();
        let refv = reference_sharp(&f.real_parts(), &boxes);
        for (a, b) in ours.iter().zip(&refv) {
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
    }
    let reduction = lo >= 0.5 && hi <= 2.0;

    let m2 = 256usize;
    let d2 = TorusDomain::new(1, m2 as f64, m2)?;
    let fam2 = BoxFamily::default_for(&d2);
    let mut ratios = Vec::new();
    for n in [1usize, 2, 4, 8, 16, 32] {
        let theta = FrequencySet::random_lattice(&d2, n, m2 / 8, n as u64)?;
        let op = mf_hilbert(&theta)?.on(&d2)?;
        let cfg = SharpMaxConfig::l2(theta, fam2.clone())?;
        let mut r = ChaCha8Rng::seed_from_u64(900 + n as u64);
        let f = random_real(d2, &mut r, 0..m2);
        ratios.push(pointwise_domination(&op, &f, &cfg)?.ratio);
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        reduction && spread <= 4.0,
        format!(
            "ours/classical in [{lo:.3}, {hi:.3}] (need [0.5, 2]); pointwise ratios N=1..32 {:?} spread {spread:.2} (need <= 4)",
            ratios.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn weights() -> Result<Outcome> {
    let d = TorusDomain::new(1, 256.0, 256)?;
    let fam = BoxFamily::default_for(&d);
    let mut const_err: f64 = 0.0;
    for c in [1.0, 0.37, 5.0] {
        let w = Weight::constant(d, c)?;
        for p in [1.0, 1.5, 2.0, 3.0] {
            const_err = const_err.max((ap_characteristic(&w, p, &fam)? - 1.0).abs());
        }
        for s in [1.5, 2.0, f64::INFINITY] {
            const_err = const_err.max((rh_characteristic(&w, s, &fam)? - 1.0).abs());
        }
    }
    let presets = [
        Weight::power(d, 0.5)?,
        Weight::power(d, -0.4)?,
        Weight::two_valued(d, 10.0)?,
        Weight::random_log_lipschitz(d, 3, 0.5)?,
    ];
    let mut dual_err: f64 = 0.0;
    for w in &presets {
        for p in [1.5, 2.0, 3.0] {
            let q = p / (p - 1.0);
            let lhs = ap_characteristic(&w.power_of(1.0 - q), q, &fam)?;
            let rhs = ap_characteristic(w, p, &fam)?.powf(q - 1.0);
            dual_err = dual_err.max((lhs / rhs - 1.0).abs());
        }
    }
    let family = [
        ("constant", Weight::constant(d, 2.0)?),
        ("power:-0.5", Weight::power(d, -0.5)?),
        ("power:0.3", Weight::power(d, 0.3)?),
        ("power:1.5", Weight::power(d, 1.5)?),
        ("power:-0.95", Weight::power(d, -0.95)?),
        ("two-valued:10", Weight::two_valued(d, 10.0)?),
        ("log-lipschitz", Weight::random_log_lipschitz(d, 5, 0.5)?),
        ("spike", Weight::spike(d, 128, 1e-8)?),
    ];
    let opts = MembershipOptions::default();
    let mut disagree = Vec::new();
    for (name, w) in &family {
        let rep = jn_identity_check(w, 2.0, 2.0, &opts)?;
        if !rep.agree {
            disagree.push(*name);
        }
    }
    outcome(
        const_err <= 1e-14 && dual_err <= 1e-10 && disagree.is_empty(),
        format!(
            "constant weights max |char - 1| = {const_err:.1e}; duality max rel err {dual_err:.1e}; \
             JN disagreements {disagree:?} of {}",
            family.len()
        ),
    )
}

fn bochner_riesz() -> Result<Outcome> {
    let lattice = frequency_lattice(1024, 2f64.powi(-9))?;
    let dom = PlanarDomain::unit_disk();
    let cover = whitney_cover(&dom, &lattice, 2.0)?;
    let pou = partition_of_unity(&cover, &lattice)?;
    let sym = br_symbol(&dom, 1.0, &lattice, None)?;
    let dec = decompose_scales(&sym, &cover, &pou)?;
    let floor = 4.0 * PI;
    let js: Vec<i32> = (-8..=-3).collect();
    let mut counts = Vec::new();
    let mut sig = Vec::new();
    let mut k1 = Vec::new();
    for &j in &js {
        let piece = dec.scale(j).expect("scale present");
        let kn = kernel_norms(piece, &lattice, 2, floor)?;
        counts.push(kn.count as f64);
        sig.push(kn.sigma_l2);
        k1.push(kn.k_l1);
    }
    let xs: Vec<f64> = js.iter().map(|&j| 2f64.powi(j)).collect();
    let s_count = slope_of(&xs, &counts);
    let s_sig = slope_of(&xs, &sig);
    let s_k1 = slope_of(&xs, &k1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = GridFunction::new(
        lattice,
        (0..lattice.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )?;
    let rec = reconstruction_error(&sym, &dec, &f)?;
    let ok = (s_count + 1.0).abs() <= 0.2 && (s_sig - 0.5).abs() <= 0.15 && (s_k1 + 0.5).abs() <= 0.2 && rec <= 1e-10;
    outcome(
        ok,
        format!(
            "count slope {s_count:.3} (-1 +- 0.2), sigma_l2 slope {s_sig:.3} (0.5 +- 0.15), K_l1 slope {s_k1:.3} \
             (-0.5 +- 0.2), reconstruction {rec:.1e}, collar l2 {:.2e}, wraparound floor 4pi",
            dec.collar_l2
        ),
    )
}

fn delta_table() -> Result<Outcome> {
    let got = [delta_p(2, 2.0)?, delta_p(2, 4.0)?, delta_p(2, f64::INFINITY)?];
    outcome(got == [0.0, 0.0, 0.5], format!("delta(2), delta(4), delta(inf) = {got:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 12] = [
        ("sumset exactness", sumset_exactness),
        ("span constant, orthogonal", span_orthogonal),
        ("span constant, generic", span_generic),
        ("CZ decomposition audit", cz_audit),
        ("weak-type growth", weak_type_growth),
        ("L2 exactness", l2_exactness),
        ("L4 growth", l4_growth),
        ("power-method oracle", power_oracle),
        ("sharp maximal reduction", sharp_reduction),
        ("weights", weights),
        ("Bochner-Riesz scalings", bochner_riesz),
        ("delta_p table", delta_table),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && *f != (i + 1).to_string() {
                continue;
            }
        }
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{verdict} criterion {:>2} {name}: {detail} [{:.2} s]",
            i + 1,
            t0.elapsed().as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
