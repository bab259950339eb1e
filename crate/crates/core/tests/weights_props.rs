use mfcz_core::grid::{BoxFamily, TorusDomain};
use mfcz_core::weights::*;
use proptest::prelude::*;

fn dom(m: usize) -> TorusDomain {
    TorusDomain::new(1, 1.0, m).unwrap()
}

fn two_valued_profile(k: f64, p: f64, a: f64) -> f64 {
    let e = -1.0 / (p - 1.0);
    ((1.0 - a) + a * k) * ((1.0 - a) + a * k.powf(e)).powf(p - 1.0)
}

#[test]
fn two_valued_matches_closed_form() {
    let d = dom(128);
    let fam = BoxFamily::default_for(&d);
    for k in [2.0, 10.0, 100.0] {
        let w = Weight::two_valued(d, k).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let got = ap_characteristic(&w, p, &fam).unwrap();
            let half = two_valued_profile(k, p, 0.5);
            let sup = (0..=10_000)
                .map(|i| two_valued_profile(k, p, i as f64 / 10_000.0))
                .fold(0.0, f64::max);
            assert!(got >= half * (1.0 - 1e-12), "k={k} p={p} got={got} half={half}");
            assert!(got <= sup * (1.0 + 1e-12), "k={k} p={p} got={got} sup={sup}");
        }
        let a1 = ap_characteristic(&w, 1.0, &fam).unwrap();
        assert!((a1 - (1.0 + k) / 2.0).abs() < 1e-9 * k || a1 > (1.0 + k) / 2.0);
    }
}

#[test]
fn ap_is_monotone_in_p() {
    let d = dom(128);
    let fam = BoxFamily::default_for(&d);
    for w in [
        Weight::power(d, -0.5).unwrap(),
        Weight::two_valued(d, 10.0).unwrap(),
        Weight::random_log_lipschitz(d, 3, 1.0).unwrap(),
    ] {
        let mut prev = 0.0;
        for p in [1.0, 1.25, 1.5, 2.0, 3.0, 5.0] {
            let v = ap_characteristic(&w, p, &fam).unwrap();
            assert!(v >= 1.0 - 1e-12);
            assert!(v <= prev * (1.0 + 1e-12) || prev == 0.0, "not decreasing: {prev} -> {v}");
            prev = v;
        }
    }
}

#[test]
fn characteristics_are_scale_invariant() {
    let d = dom(64);
    let fam = BoxFamily::default_for(&d);
    let w = Weight::random_log_lipschitz(d, 9, 1.5).unwrap();
    let w2 = w.scaled(17.0).unwrap();
    for p in [1.0, 2.0, 3.0] {
        let a = ap_characteristic(&w, p, &fam).unwrap();
        let b = ap_characteristic(&w2, p, &fam).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
    let a = rh_characteristic(&w, 2.0, &fam).unwrap();
    let b = rh_characteristic(&w2, 2.0, &fam).unwrap();
    assert!((a - b).abs() <= 1e-12 * a);
}

#[test]
fn power_weight_membership_follows_exponent_window() {
    let d = dom(1024);
    let opts = MembershipOptions::default();
    let inside = ap_profile(&Weight::power(d, -0.5).unwrap(), 2.0, &opts).unwrap();
    assert!(inside.member, "{inside:?}");
    let boundary = ap_profile(&Weight::power(d, -0.5).unwrap(), 1.0, &opts).unwrap();
    assert!(boundary.member, "{boundary:?}");
}

/// A point singularity only shows under refinement: `[|x|^a]_{A_2}` stays bounded for
/// `-1 < a < 1` and grows like `M^{|a| - 1}` outside.
#[test]
fn power_weight_characteristic_under_refinement() {
    let ch = |m: usize, a: f64| {
        let d = dom(m);
        ap_characteristic(&Weight::power(d, a).unwrap(), 2.0, &BoxFamily::default_for(&d)).unwrap()
    };
    for a in [-0.5, 0.5] {
        let (c1, c2) = (ch(256, a), ch(4096, a));
        assert!(c2 / c1 < 1.1, "a={a}: {c1} -> {c2}");
    }
    for a in [-1.5, 1.5] {
        let (c1, c2) = (ch(256, a), ch(4096, a));
        let rate = (c2 / c1).log2() / 4.0;
        assert!((rate - 0.5).abs() < 0.1, "a={a}: {c1} -> {c2}, rate {rate}");
    }
}

#[test]
fn class_membership_constant_and_power() {
    let d = dom(512);
    let opts = MembershipOptions {
        depth: 6,
        ..Default::default()
    };
    let c = class_membership(&Weight::constant(d, 2.0).unwrap(), 4.0, 2.0, 8.0, &opts).unwrap();
    assert!(c.member);
    assert!((c.a_index - 2.0).abs() < 1e-15 && (c.t_prime - 2.0).abs() < 1e-15);
    assert!(c.rh.is_some());
    let none = class_membership(&Weight::constant(d, 2.0).unwrap(), 4.0, 2.0, f64::INFINITY, &opts).unwrap();
    assert!(none.rh.is_none() && none.member);
    assert!(class_membership(&Weight::constant(d, 2.0).unwrap(), 2.0, 2.0, 8.0, &opts).is_err());
}

#[test]
fn weight_class_report_fields() {
    let d = dom(64);
    let fam = BoxFamily::default_for(&d);
    let w = Weight::two_valued(d, 4.0).unwrap();
    let r = weight_class_report(&w, 3.0, 1.5, 2.0, &fam).unwrap();
    assert!((r.ap_char - ap_characteristic(&w, 2.0, &fam).unwrap()).abs() < 1e-15);
    assert!((r.a1_char - ap_characteristic(&w, 1.0, &fam).unwrap()).abs() < 1e-15);
    assert!((r.rh_char - rh_characteristic(&w, 2.0, &fam).unwrap()).abs() < 1e-15);
    assert!(!r.floored);
    assert!(weight_class_report(&w, 1.0, 1.5, 2.0, &fam).is_err());
    assert!(weight_class_report(&w, 3.0, 1.5, 0.5, &fam).is_err());
}

#[test]
fn conjugate_exponents() {
    assert_eq!(conjugate(2.0), 2.0);
    assert_eq!(conjugate(1.0), f64::INFINITY);
    assert_eq!(conjugate(f64::INFINITY), 1.0);
    assert!((conjugate(3.0) - 1.5).abs() < 1e-15);
}

#[test]
fn spike_weight_is_floored_not_zero() {
    let d = dom(64);
    let w = Weight::spike(d, 10, 0.0).unwrap();
    assert!(w.has_zeros());
    let fam = BoxFamily::default_for(&d);
    assert_eq!(ap_characteristic(&w, 1.0, &fam).unwrap(), f64::INFINITY);
    let (v, hit) = ap_characteristic_floored(&w, 2.0, &fam).unwrap();
    assert!(hit && v.is_finite() && v > 1e100);
    assert!(Weight::spike(d, 64, 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ap_duality(vals in prop::collection::vec(0.05f64..20.0, 32), p in 1.2f64..4.0) {
        let d = dom(32);
        let fam = BoxFamily::default_for(&d);
        let w = Weight::new(d, vals).unwrap();
        let pp = conjugate(p);
        let sigma = w.power_of(1.0 - pp);
        let a = ap_characteristic(&w, p, &fam).unwrap();
        let b = ap_characteristic(&sigma, pp, &fam).unwrap().powf(p - 1.0);
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn rh_at_least_one(vals in prop::collection::vec(0.0f64..20.0, 32), s in 1.1f64..6.0) {
        let d = dom(32);
        let fam = BoxFamily::default_for(&d);
        let mut vals = vals;
        vals[0] += 0.5;
        let w = Weight::new(d, vals).unwrap();
        let r = rh_characteristic(&w, s, &fam).unwrap();
        let inf = rh_characteristic(&w, f64::INFINITY, &fam).unwrap();
        prop_assert!(r >= 1.0 - 1e-12);
        prop_assert!(r <= inf * (1.0 + 1e-12));
    }
}
