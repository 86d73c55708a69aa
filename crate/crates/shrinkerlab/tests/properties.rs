//! Randomized invariants across modules.

use approx::{abs_diff_eq, relative_eq};
use proptest::prelude::*;
use shrinkerlab::barriers::{resolvable_taus, verify_super_sub, Sign};
use shrinkerlab::functionals::{ilmanen_distance, ConformalDistanceQuery};
use shrinkerlab::graphflow::{smooth_field, BoundaryData, GraphFlow, RunOptions};
use shrinkerlab::persist::{read_grid, write_grid};
use shrinkerlab::shrinker::{make_model, Model, ModelParams, ShrinkerSurface};
use shrinkerlab::spectral::ground_state;
use shrinkerlab::surface::{weighted_inner, ProfileGeometry};

fn sphere(radius: f64, nodes: usize) -> ShrinkerSurface {
    make_model(Model::Sphere, ModelParams { radius: Some(radius), ..Default::default() }, nodes).unwrap()
}

fn scratch(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("shrinkerlab-prop-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weighted_inner_is_positive_definite(
        radius in 0.5f64..4.0,
        values in prop::collection::vec(-1.0f64..1.0, 64),
        zero_at in 0usize..64,
    ) {
        let s = sphere(radius, 64);
        let norm2 = weighted_inner(&values, &values, &s.geom).unwrap();
        prop_assert!(norm2 > 0.0);
        let mut single = vec![0.0; 64];
        single[zero_at] = 1.0;
        prop_assert!(weighted_inner(&single, &single, &s.geom).unwrap() > 0.0);
        prop_assert_eq!(weighted_inner(&[0.0; 64], &[0.0; 64], &s.geom).unwrap(), 0.0);
    }

    #[test]
    fn frames_are_orthonormal(radius in 0.5f64..4.0, half_length in 1.0f64..9.0, nodes in 64usize..300) {
        let cyl = make_model(Model::Cylinder, ModelParams { radius: Some(radius), half_length: Some(half_length), ..Default::default() }, nodes).unwrap();
        for s in [sphere(radius, nodes), cyl] {
            for (t, n) in s.geom.tangent.iter().zip(&s.geom.normal) {
                prop_assert!(abs_diff_eq!(t[0] * n[0] + t[1] * n[1], 0.0, epsilon = 1e-14));
                prop_assert!(abs_diff_eq!(n[0].hypot(n[1]), 1.0, epsilon = 1e-14));
            }
        }
    }

    #[test]
    fn recorded_residual_is_recomputable(radius in 1.0f64..3.0, nodes in 64usize..400, flip in any::<bool>()) {
        let s = sphere(radius, nodes);
        let s = if flip { s.flipped() } else { s };
        let max = s.residual().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert_eq!(max, s.residual_report.max_res);
        prop_assert_eq!(s.residual_report.certified, max <= s.residual_report.tolerance);
    }

    #[test]
    fn profile_json_round_trip_is_bit_exact(radius in 0.1f64..10.0, nodes in 64usize..200) {
        let p = sphere(radius, nodes).profile;
        let back = ProfileGeometry::from_json(&p.to_json()).unwrap();
        prop_assert!(p.nodes.iter().flatten().zip(back.nodes.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn grid_csv_round_trip_is_bit_exact(cells in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 12)) {
        let dir = scratch("grid");
        let path = dir.join(format!("{:016x}.csv", cells[0].to_bits()));
        let values: Vec<Vec<f64>> = cells.chunks(4).map(|c| c.to_vec()).collect();
        write_grid(&path, "row", "column", &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0, 3.0], &values).unwrap();
        let (_, _, back) = read_grid(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        prop_assert!(back.iter().flatten().zip(&cells).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn global_barrier_sign_profiles(m in 1.0f64..8.0, tau0 in -6.0f64..-2.0) {
        let s = sphere(2.0, 128);
        let pair = ground_state(&s).unwrap();
        prop_assume!(m * (-pair.eigenvalue * tau0).exp() <= 0.5);
        let taus = resolvable_taus(&pair, m, tau0);
        prop_assume!(!taus.is_empty());
        let plus = verify_super_sub(&s, &pair, m, &taus, Sign::Plus).unwrap();
        let minus = verify_super_sub(&s, &pair, m, &taus, Sign::Minus).unwrap();
        prop_assert!(plus.pass && minus.pass);
        prop_assert!(plus.min_residual >= 0.0 && minus.max_residual <= 0.0);
        prop_assert_eq!(plus.pass, plus.pass_recomputed());
        prop_assert_eq!(minus.pass, minus.pass_recomputed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn conformal_distance_is_symmetric(r1 in 0.8f64..1.6, gap in 0.6f64..1.5) {
        let (a, b) = (sphere(r1, 128).profile, sphere(r1 + gap, 128).profile);
        let q = |x: &ProfileGeometry, y: &ProfileGeometry| {
            let q = ConformalDistanceQuery { center_z: 0.0, t0: 0.0, radius: 6.0, t: 0.0, first: x, second: y, cells: 120 };
            ilmanen_distance(&q).unwrap().distance.unwrap()
        };
        let (ab, ba) = (q(&a, &b), q(&b, &a));
        prop_assert!(relative_eq!(ab, ba, max_relative = 1e-9), "{} vs {}", ab, ba);
    }

    #[test]
    fn flow_preserves_ordering(seed in any::<u64>(), gap in 0.001f64..0.01) {
        let s = make_model(Model::Torus, ModelParams::default(), 128).unwrap();
        let f = GraphFlow::new(&s, BoundaryData::default());
        let u = smooth_field(&f, seed, 3, 0.02);
        let w: Vec<f64> = u.iter().map(|v| v + gap).collect();
        let mut opts = RunOptions::new(0.05, 1.0, 10);
        opts.dt = Some(1e-3);
        let (a, b) = (f.run(0.0, &u, &opts).unwrap(), f.run(0.0, &w, &opts).unwrap());
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert!(x.u.iter().zip(&y.u).all(|(p, q)| p <= q));
        }
    }
}
