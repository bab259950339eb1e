use mfcz_core::freqset::FrequencySet;
use mfcz_core::grid::{maximal_function, BoxFamily, GridFunction, TorusDomain};
use mfcz_core::mfop::{mf_hilbert, SpectralOperator};
use mfcz_core::sharpmax::*;
use mfcz_core::weights::Weight;
use mfcz_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dom() -> TorusDomain {
    TorusDomain::new(1, 64.0, 64).unwrap()
}

fn rand_f(d: TorusDomain, seed: u64) -> GridFunction {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::new(
        d,
        (0..d.len())
            .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

fn cfg(d: &TorusDomain, n: usize, seed: u64) -> SharpMaxConfig {
    let theta = FrequencySet::random_lattice(d, n, 12, seed).unwrap();
    SharpMaxConfig::l2(theta, BoxFamily::default_for(d)).unwrap()
}

#[test]
fn config_validation() {
    let d = dom();
    let theta = FrequencySet::from_1d(&[0.0]).unwrap();
    let fam = BoxFamily::default_for(&d);
    assert!(SharpMaxConfig::new(0.5, theta.clone(), fam.clone(), ProjectionMode::L2).is_err());
    assert!(SharpMaxConfig::new(1.0, theta.clone(), fam.clone(), ProjectionMode::L2).is_ok());
    assert!(SharpMaxConfig::new(1.0, theta.clone(), fam.clone(), ProjectionMode::Ls).is_err());
    let two = FrequencySet::new(2, vec![vec![0.0, 0.0]]).unwrap();
    assert!(SharpMaxConfig::l2(two, fam).is_err());
}

#[test]
fn ls_mode_at_two_matches_exact_projection() {
    let d = dom();
    let f = rand_f(d, 4);
    let exact = cfg(&d, 3, 1);
    let mut ls = exact.clone();
    ls.mode = ProjectionMode::Ls;
    let a = sharp_maximal(&f, &exact).unwrap();
    let b = sharp_maximal(&f, &ls).unwrap();
    assert!(!a.approximate && b.approximate);
    let err = a.values.sub(&b.values).unwrap().sup_norm() / a.values.sup_norm();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn ls_mode_lies_between_exponents() {
    let d = dom();
    let f = rand_f(d, 5);
    let base = cfg(&d, 2, 2);
    let l2 = sharp_maximal(&f, &base).unwrap();
    let ls = SharpMaxConfig::new(4.0, base.theta.clone(), base.family.clone(), ProjectionMode::Ls).unwrap();
    let v = sharp_maximal(&f, &ls).unwrap();
    let m4 = maximal_function(&f, &base.family, 4.0).unwrap();
    for ((a, b), m) in v.values.values().iter().zip(l2.values.values()).zip(m4.values()) {
        assert!(a.re.is_finite() && a.re >= 0.0 && b.re >= 0.0);
        assert!(a.re <= m.re * (1.0 + 1e-8));
    }
}

#[test]
fn identity_is_pointwise_dominated() {
    let d = dom();
    let c = cfg(&d, 4, 3);
    let id = SpectralOperator::new(d, vec![Complex64::new(1.0, 0.0); d.len()]).unwrap();
    for seed in 0..5 {
        let r = pointwise_domination(&id, &rand_f(d, seed), &c).unwrap();
        assert!(r.ratio <= 1.0 + 1e-12, "{}", r.ratio);
        assert!((r.envelope - 1.0).abs() < 1e-15);
    }
}

#[test]
fn hilbert_domination_is_finite() {
    let d = TorusDomain::new(1, 128.0, 128).unwrap();
    let c = cfg(&d, 4, 9);
    let op = mf_hilbert(&c.theta).unwrap().on(&d).unwrap();
    let r = pointwise_domination(&op, &rand_f(d, 1), &c).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert!(r.argmax < d.len());
}

#[test]
fn fefferman_stein_report() {
    let d = dom();
    let c = cfg(&d, 4, 6);
    let w = Weight::random_log_lipschitz(d, 2, 0.5).unwrap();
    let f = rand_f(d, 7);
    let r = fefferman_stein_ratio(&f, &c, 3.0, &w, 1.5).unwrap();
    assert!(!r.degenerate && r.ratio.is_finite() && r.ratio > 0.0);
    assert!((r.envelope - 4f64.powf(1.5 * 3.0 / 2.0 * 0.5)).abs() < 1e-12);
    assert!((r.normalized - r.ratio / r.envelope).abs() < 1e-15);
    assert!(fefferman_stein_ratio(&f, &c, 2.0, &w, 1.0).is_err());
    assert!(fefferman_stein_ratio(&f, &c, 3.0, &w, 0.5).is_err());
    let zero = fefferman_stein_ratio(&GridFunction::zeros(d), &c, 3.0, &w, 1.0).unwrap();
    assert!(zero.norm_f == 0.0);
}

#[test]
fn classical_sharp_vanishes_on_constants() {
    let d = dom();
    let f = GridFunction::from_fn(d, |_| Complex64::new(2.5, -1.0));
    let g = classical_sharp(&f, &BoxFamily::default_for(&d), 2.0).unwrap();
    assert!(g.sup_norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn homogeneous(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let d = dom();
        let c = cfg(&d, 3, seed);
        let f = rand_f(d, seed);
        let a = Complex64::new(re, im);
        let m = sharp_maximal(&f, &c).unwrap().values;
        let ma = sharp_maximal(&f.scale(a), &c).unwrap().values;
        for (x, y) in m.values().iter().zip(ma.values()) {
            prop_assert!((x.re * a.norm() - y.re).abs() <= 1e-10 * (1.0 + y.re));
        }
    }

    #[test]
    fn below_local_maximal(seed in 0u64..1000, n in 1usize..6) {
        let d = dom();
        let c = cfg(&d, n, seed);
        let f = rand_f(d, seed + 1);
        let m = sharp_maximal(&f, &c).unwrap().values;
        let ms = maximal_function(&f, &c.family, 2.0).unwrap();
        for (x, y) in m.values().iter().zip(ms.values()) {
            prop_assert!(x.re <= y.re * (1.0 + 1e-12));
        }
    }

    #[test]
    fn subadditive(seed in 0u64..1000) {
        let d = dom();
        let c = cfg(&d, 3, seed);
        let f = rand_f(d, seed);
        let g = rand_f(d, seed + 7);
        let mf = sharp_maximal(&f, &c).unwrap().values;
        let mg = sharp_maximal(&g, &c).unwrap().values;
        let mfg = sharp_maximal(&f.add(&g).unwrap(), &c).unwrap().values;
        for ((a, b), s) in mf.values().iter().zip(mg.values()).zip(mfg.values()) {
            prop_assert!(s.re <= (a.re + b.re) * (1.0 + 1e-12) + 1e-14);
        }
    }
}
