use mfcz_core::freqset::{dist_to_set, sumset, sumset_growth_table, sumset_with_cap, FrequencySet};
use proptest::prelude::*;

fn binomial(n: usize, k: usize) -> usize {
    (1..=k).fold(1usize, |acc, i| acc * (n + 1 - i) / i)
}

#[test]
fn distance_examples() {
    let t = FrequencySet::from_1d(&[0.0, 10.0]).unwrap();
    assert_eq!(dist_to_set(&[3.0], &t).unwrap(), 3.0);
    assert_eq!(dist_to_set(&[10.0], &t).unwrap(), 0.0);
    assert!(dist_to_set(&[1.0, 2.0], &t).is_err());
}

#[test]
fn arithmetic_sumset_and_identity() {
    let t = FrequencySet::arithmetic(5).unwrap();
    let s = sumset(&t, 2).unwrap();
    assert_eq!(s.first_coords(), (2..=10).map(|v| v as f64).collect::<Vec<_>>());
    assert_eq!(sumset(&t, 1).unwrap(), t);
    for (k, c) in sumset_growth_table(&t, 6).unwrap() {
        assert_eq!(c, k * 4 + 1);
    }
    let one = FrequencySet::from_1d(&[2.5]).unwrap();
    assert!(sumset_growth_table(&one, 5).unwrap().iter().all(|r| r.1 == 1));
}

#[test]
fn random_triples_match_enumeration() {
    let t = FrequencySet::random(6, 42, 10.0).unwrap();
    let v = t.first_coords();
    let mut all = Vec::new();
    for a in &v {
        for b in &v {
            for c in &v {
                all.push(a + b + c);
            }
        }
    }
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let s = sumset(&t, 3).unwrap().first_coords();
    assert_eq!(s.len(), all.len());
    for (x, y) in s.iter().zip(&all) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn generic_sets_reach_multiset_coefficient() {
    let t = FrequencySet::from_1d(&[0.0, 1.0, 2f64.sqrt(), 3f64.sqrt(), std::f64::consts::PI]).unwrap();
    for (k, c) in sumset_growth_table(&t, 4).unwrap() {
        assert_eq!(c, binomial(5 + k - 1, k));
    }
}

#[test]
fn cap_is_enforced() {
    let t = FrequencySet::random(30, 1, 100.0).unwrap();
    assert!(sumset_with_cap(&t, 4, 1000).is_err());
}

#[test]
fn two_dimensional_sumsets() {
    let t = FrequencySet::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(sumset(&t, 2).unwrap().len(), 6);
}

#[test]
fn presets_parse() {
    assert_eq!(FrequencySet::parse_preset("arith:7").unwrap().len(), 7);
    assert_eq!(FrequencySet::parse_preset("random:9:3").unwrap().len(), 9);
    assert_eq!(FrequencySet::parse_preset("cluster:4:0.001").unwrap().len(), 4);
    assert!(FrequencySet::parse_preset("bogus:3").is_err());
    let csv = "0.5\n# comment\n-1.25\n3\n";
    assert_eq!(FrequencySet::read_csv(csv.as_bytes()).unwrap().first_coords(), vec![-1.25, 0.5, 3.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_is_brute_force_min(seed in 0u64..10_000, xi in -50.0f64..50.0) {
        let t = FrequencySet::random(7, seed, 40.0).unwrap();
        let brute = t.first_coords().iter().map(|v| (v - xi).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!((dist_to_set(&[xi], &t).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn freiman_lower_bound(seed in 0u64..10_000, n in 2usize..9, k in 1usize..4) {
        let t = FrequencySet::random(n, seed, 20.0).unwrap();
        let c = sumset(&t, k).unwrap().len();
        prop_assert!(c >= k * (n - 1) + 1);
        prop_assert!(c <= binomial(n + k - 1, k));
        if k > 1 {
            prop_assert!(c <= n * sumset(&t, k - 1).unwrap().len());
        }
    }

    #[test]
    fn translation_shifts_sumsets(seed in 0u64..10_000, shift in -7i32..7) {
        let t = FrequencySet::from_1d(
            &FrequencySet::random(5, seed, 10.0).unwrap().first_coords().iter().map(|v| v.round()).collect::<Vec<_>>()
        );
        prop_assume!(t.is_ok());
        let t = t.unwrap();
        let s = shift as f64;
        let moved = t.translate(&[s]).unwrap();
        let a = sumset(&t, 3).unwrap().first_coords();
        let b = sumset(&moved, 3).unwrap().first_coords();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + 3.0 * s - y).abs() < 1e-9);
        }
    }
}
