use mfcz_core::grid::{
    box_average, lp_norm, lp_norm_weighted, maximal_function, BoxFamily, Cube, GridFunction, TorusDomain,
};
use mfcz_core::Complex64;
use proptest::prelude::*;

fn domain(dim: usize) -> TorusDomain {
    TorusDomain::new(dim, 10.0, 16).unwrap()
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), len)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

#[test]
fn constant_transforms_to_scaled_spike() {
    for dim in [1, 2] {
        let d = domain(dim);
        let g = GridFunction::constant(d, Complex64::new(1.0, 0.0)).dft();
        assert!((g.values()[0].re - (d.len() as f64).sqrt()).abs() < 1e-12);
        assert!(g.values()[1..].iter().all(|v| v.norm() < 1e-12));
    }
}

#[test]
fn lattice_plane_wave_is_a_single_spike() {
    let d = TorusDomain::new(1, 8.0, 32).unwrap();
    let xi = 5.0 * d.frequency_spacing();
    let g = GridFunction::plane_wave(d, &[xi]).dft();
    let (peak, _) = g
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    assert!((d.frequency(peak)[0] - xi).abs() < 1e-12);
    let rest: f64 = g.values().iter().enumerate().filter(|(i, _)| *i != peak).map(|(_, v)| v.norm()).sum();
    assert!(rest < 1e-10);
}

#[test]
fn norms_of_simple_functions() {
    let d = TorusDomain::new(2, 3.0, 16).unwrap();
    let one = GridFunction::constant(d, Complex64::new(1.0, 0.0));
    for p in [1.0, 2.0, 3.5] {
        assert!((lp_norm(&one, p).unwrap() - 9f64.powf(1.0 / p)).abs() < 1e-12);
    }
    let half = GridFunction::from_fn(d, |x| Complex64::new(if x[0] < 1.5 { 1.0 } else { 0.0 }, 0.0));
    assert!((lp_norm(&half, 1.0).unwrap() - 4.5).abs() < 1e-12);
    assert!(lp_norm(&one, 0.5).is_err());
    let w = GridFunction::constant(d, Complex64::new(1.0, 0.0));
    assert!((lp_norm_weighted(&one, 2.0, &w).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn indicator_average_over_triple() {
    let d = TorusDomain::new(1, 64.0, 256).unwrap();
    let q = Cube::new(vec![32.0], 4.0).unwrap();
    let f = GridFunction::from_fn(d, |x| Complex64::new(if (x[0] - 32.0).abs() <= 4.0 { 1.0 } else { 0.0 }, 0.0));
    let a = box_average(&f, &q.dilate(3.0), 1.0).unwrap();
    let pixel = 1.0 / q.dilate(3.0).resolve(&d).unwrap().size() as f64;
    assert!((a - 1.0 / 3.0).abs() <= pixel);
}

#[test]
fn box_without_grid_points_is_rejected() {
    let d = TorusDomain::new(1, 16.0, 16).unwrap();
    let q = Cube::new(vec![0.5], 0.1).unwrap();
    assert!(box_average(&GridFunction::zeros(d), &q, 1.0).is_err());
}

#[test]
fn spike_maximal_function_matches_brute_force() {
    let d = TorusDomain::new(1, 32.0, 32).unwrap();
    let mut f = GridFunction::zeros(d);
    f.values_mut()[10] = Complex64::new(3.0, 0.0);
    let fam = BoxFamily::default_for(&d);
    let m = maximal_function(&f, &fam, 1.0).unwrap();
    for x in 0..32usize {
        let mut best: f64 = 0.0;
        for b in fam.boxes() {
            let len = b.len[0] as i64;
            let inside = |i: usize| (i as i64 - b.start[0]).rem_euclid(32) < len;
            if inside(x) {
                let v = if inside(10) { 3.0 / len as f64 } else { 0.0 };
                best = best.max(v);
            }
        }
        assert!((m.values()[x].re - best).abs() < 1e-12);
    }
    assert_eq!(m.values()[10].re, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_and_round_trip(v in complex_vec(256)) {
        let f = GridFunction::new(domain(2), v).unwrap();
        let g = f.dft();
        prop_assert!((g.l2_sum() - f.l2_sum()).abs() <= 1e-12 * f.l2_sum().max(1e-300));
        let back = g.idft();
        prop_assert!(back.sub(&f).unwrap().l2_sum() <= 1e-12 * f.l2_sum().max(1e-300));
    }

    #[test]
    fn translation_is_a_phase(v in complex_vec(16), k in -20i64..20) {
        let d = domain(1);
        let f = GridFunction::new(d, v).unwrap();
        let g = f.translate([k, 0]);
        let (fh, gh) = (f.dft(), g.dft());
        for i in 0..d.len() {
            let phase = Complex64::from_polar(1.0, -d.frequency(i)[0] * k as f64 * d.spacing());
            prop_assert!((gh.values()[i] - fh.values()[i] * phase).norm() < 1e-9);
        }
        for p in [1.0, 2.0, 3.0] {
            prop_assert!((lp_norm(&f, p).unwrap() - lp_norm(&g, p).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn averages_increase_with_p(v in complex_vec(16), c in 0.5f64..9.5, r in 0.6f64..5.0) {
        let f = GridFunction::new(domain(1), v).unwrap();
        let q = Cube::new(vec![c], r).unwrap();
        let mut prev = 0.0;
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let a = box_average(&f, &q, p).unwrap();
            prop_assert!(a >= prev * (1.0 - 1e-12));
            prev = a;
        }
    }

    #[test]
    fn maximal_function_is_sublinear_and_dominates(a in complex_vec(16), b in complex_vec(16)) {
        let d = domain(1);
        let fam = BoxFamily::default_for(&d);
        let f = GridFunction::new(d, a).unwrap();
        let g = GridFunction::new(d, b).unwrap();
        let mf = maximal_function(&f, &fam, 1.0).unwrap();
        let mg = maximal_function(&g, &fam, 1.0).unwrap();
        let ms = maximal_function(&f.add(&g).unwrap(), &fam, 1.0).unwrap();
        for i in 0..d.len() {
            prop_assert!(ms.values()[i].re <= mf.values()[i].re + mg.values()[i].re + 1e-12);
            prop_assert!(mf.values()[i].re >= f.values()[i].norm() - 1e-12);
        }
    }
}

#[test]
fn csv_and_binary_round_trip() {
    let d = TorusDomain::new(2, 2.5, 8).unwrap();
    let f = GridFunction::from_fn(d, |x| Complex64::new(x[0].sin(), x[1] * 0.3));
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let g = GridFunction::read_csv(buf.as_slice()).unwrap();
    assert_eq!(f, g);
    let mut bin = Vec::new();
    f.write_binary(&mut bin).unwrap();
    assert_eq!(GridFunction::read_binary(bin.as_slice()).unwrap(), f);
}
