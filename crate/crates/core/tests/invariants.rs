use classa::certify::rational_approx;
use classa::cone_kit::{NormModel, PolyCone};
use classa::curves::{curve_lengths, PolygonalWorldline};
use classa::linalg::norm;
use classa::reach::{forward_reach, is_vicious, is_vicious_at, ViciousOptions, Window};
use classa::spacetime::{make_preset, MetricField, PresetName, PresetSpec};
use classa::stable::stable_norm;
use classa::timesep::time_separation;
use proptest::prelude::*;

fn preset(name: PresetName) -> MetricField {
    make_preset(&PresetSpec::new(name)).unwrap()
}

fn light_cone() -> PolyCone {
    PolyCone::hull(2, &[vec![1.0, 1.0], vec![1.0, -1.0]], NormModel::Euclidean).unwrap()
}

fn in_light_cone() -> impl Strategy<Value = Vec<f64>> {
    (0.01f64..5.0, -0.999f64..0.999).prop_map(|(t, k)| vec![t, k * t])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_distance_is_superadditive(u in in_light_cone(), w in in_light_cone()) {
        let c = light_cone();
        let e = NormModel::Euclidean;
        let sum: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
        let d = |v: &[f64]| c.boundary_distance(v, &e).value;
        prop_assert!(d(&sum) >= d(&u) + d(&w) - 1e-9);
    }

    #[test]
    fn epsilon_subcone_members_are_deep(v in in_light_cone(), eps in 0.0f64..0.6) {
        let c = light_cone();
        let e = NormModel::Euclidean;
        let sub = c.epsilon_subcone(eps, &e).unwrap();
        let depth = c.boundary_distance(&v, &e).value;
        if depth >= eps * norm(&v) + 1e-6 {
            prop_assert!(sub.contains(&v, 1e-9));
        }
        if sub.contains(&v, 0.0) {
            prop_assert!(depth >= eps * norm(&v) - 1e-6);
        }
    }

    #[test]
    fn null_rays_are_null_and_future(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        for name in [PresetName::Flat, PresetName::ConformalFlat, PresetName::ProductCircle] {
            let m = preset(name);
            let p = [x, y];
            for r in m.null_rays(&p, 8).unwrap() {
                let ch = m.causal_character(&p, &r);
                prop_assert!(ch.is_future_causal());
                prop_assert!(m.g(&p).quad(&r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn metric_is_lattice_periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, i in -3i64..3, j in -3i64..3) {
        for name in [PresetName::ConformalFlat, PresetName::ProductCircle] {
            let m = preset(name);
            let k = m.lattice_vector(&[i, j]);
            let a = m.g(&[x, y]);
            let b = m.g(&[x + k[0], y + k[1]]);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((a.get(r, c) - b.get(r, c)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn straight_timelike_length_is_minkowski(t in 0.5f64..4.0, k in -0.9f64..0.9) {
        let m = preset(PresetName::Flat);
        let c = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![t, k * t]]).unwrap();
        let l = curve_lengths(&m, &c, 4);
        prop_assert!((l.lorentzian - t * (1.0 - k * k).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rational_approx_recovers_fractions(p in -40i64..40, q in 1i64..20) {
        let (a, b) = rational_approx(p as f64 / q as f64, 20, 1e-12).unwrap();
        prop_assert_eq!(a * q, p * b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn time_separation_reverse_triangle(t1 in 0.5f64..2.0, k1 in -0.6f64..0.6, t2 in 0.5f64..2.0, k2 in -0.6f64..0.6) {
        let m = preset(PresetName::Flat);
        let p = vec![0.1, 0.2];
        let q = vec![p[0] + t1, p[1] + k1 * t1];
        let r = vec![q[0] + t2, q[1] + k2 * t2];
        let d = |a: &[f64], b: &[f64]| time_separation(&m, a, b, 6, 2, 7).unwrap().value;
        prop_assert!(d(&p, &r) >= d(&p, &q) + d(&q, &r) - 1e-6);
    }

    #[test]
    fn time_separation_is_translation_invariant(t in 0.5f64..2.0, k in -0.6f64..0.6, i in -2i64..2, j in -2i64..2) {
        let m = preset(PresetName::ConformalFlat);
        let p = vec![0.3, 0.1];
        let q = vec![p[0] + t, p[1] + k * t];
        let s = m.lattice_vector(&[i, j]);
        let a = time_separation(&m, &p, &q, 6, 4, 3).unwrap().value;
        let b = time_separation(&m, &[p[0] + s[0], p[1] + s[1]], &[q[0] + s[0], q[1] + s[1]], 6, 4, 3).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-3 * (1.0 + a));
    }

    #[test]
    fn flat_stable_norm_is_euclidean(a in -4i64..=4, b in -4i64..=4) {
        prop_assume!(a != 0 || b != 0);
        let m = preset(PresetName::Flat);
        let s = stable_norm(&m, &[a, b], 8, 4).unwrap();
        prop_assert!((s.norm - ((a * a + b * b) as f64).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn flat_reach_matches_the_light_cone() {
    let m = preset(PresetName::Flat);
    let g = forward_reach(&m, &[0.0, 0.0], &Window::cube(2, 3), 16).unwrap();
    let mut inside = 0;
    for c in g.reached_cells() {
        let p = g.point(&c);
        assert!(p[0] >= p[1].abs() - 1e-9, "reached {p:?} outside the cone");
        inside += 1;
    }
    // every grid point well inside the cone and the window is reached
    for i in 0..=32i64 {
        for j in -32..=32i64 {
            let p = [i as f64 / 16.0, j as f64 / 16.0];
            if p[0] >= p[1].abs() + 0.25 {
                assert!(g.is_reached(&g.cell_of(&p)), "{p:?} not reached");
            }
        }
    }
    assert!(inside > 100);
}

#[test]
fn e1_closed_curves_stay_in_their_x_class() {
    let m = preset(PresetName::E1Counterexample);
    let opts = ViciousOptions { window: 1, stop_at_first_failure: false, ..ViciousOptions::default() };
    let r = is_vicious_at(&m, 28, &opts, &[vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
    assert!(!r.vicious);
    assert_eq!(r.witnesses.len(), 1);
    assert_eq!(r.witnesses[0].point, vec![2.0, 0.0, 0.0]);
    assert_eq!(r.witnesses[0].class[0], 0);
    assert_eq!(r.failures, vec![vec![0.0, 0.0, 0.0]]);
}

#[test]
fn flat_torus_is_vicious() {
    let m = preset(PresetName::Flat);
    let opts = ViciousOptions { points_per_axis: Some(4), ..ViciousOptions::default() };
    let r = is_vicious(&m, 16, &opts).unwrap();
    assert!(r.vicious);
    for w in &r.witnesses {
        assert!(w.class[0] > 0, "time must advance along a closed timelike chain");
    }
}
