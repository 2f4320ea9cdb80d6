mod common;

use nehari_core::energy::{Fiber, FiberClass, DEAD_BAND};
use nehari_core::nehari::{
    classify, lambda_formula, project, project_with, scan_directions, Branch, FiberScan, ManifoldKind,
};
use nehari_core::vexp::{estimate_embedding_constants, random_direction, GridFunction};
use nehari_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{reference, reference_at};

#[test]
fn no_degenerate_roots_below_threshold() {
    let (data, report) = reference(64);
    let data = data.with_lambda(0.5 * report.scan_threshold).unwrap();
    let scan = FiberScan::default();
    for (k, u) in scan_directions(&data, 32, 7).unwrap().iter().enumerate() {
        let f = Fiber::new(u, &data);
        let roots = f.critical_points(scan.t_min, scan.t_max, scan.samples);
        assert_eq!(roots.len(), 2, "direction {k}");
        for r in &roots {
            assert_ne!(r.class, FiberClass::NZero, "direction {k}");
            let (_, m2) = f.magnitudes(r.t);
            assert!(r.ddphi.abs() > DEAD_BAND * m2);
        }
    }
}

#[test]
fn formulas_agree_with_scan_in_order_of_magnitude() {
    let (_, report) = reference(64);
    for v in [report.degeneracy_bound, report.positive_level_bound] {
        assert!(v > 0.0);
        assert!(v <= 10.0 * report.scan_threshold);
        assert!(v >= report.scan_threshold / 1e4);
    }
    assert!(report.lambda_zero <= report.scan_threshold);
}

#[test]
fn formula_scales_inversely_with_singular_constant() {
    let data = reference_at(32, 0.0);
    let c = estimate_embedding_constants(&data, 20, 1).unwrap();
    let mut c2 = c;
    c2.c_d_minus *= 2.0;
    let a = lambda_formula(&data, &c).unwrap();
    let b = lambda_formula(&data, &c2).unwrap();
    assert!((a.positive_level_bound - 2.0 * b.positive_level_bound).abs() < 1e-12 * a.positive_level_bound);
    assert!((a.degeneracy_bound - 2.0 * b.degeneracy_bound).abs() < 1e-12 * a.degeneracy_bound);
}

#[test]
fn unprojected_direction_is_off_manifold() {
    let data = reference_at(32, 0.01);
    let u = GridFunction::eigen_surrogate(data.mesh().clone()).scaled(0.37);
    assert_eq!(classify(&u, &data).unwrap().kind, ManifoldKind::OffManifold);
}

#[test]
fn zero_lambda_has_no_plus_projection() {
    let data = reference_at(32, 0.0);
    let u = GridFunction::eigen_surrogate(data.mesh().clone());
    assert!(matches!(project(&u, &data, Branch::Plus), Err(Error::NoProjection { branch: Branch::Plus })));
    assert!(project(&u, &data, Branch::Minus).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let data = reference_at(32, 0.005);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_direction(data.mesh(), &mut rng).scaled(scale);
        for branch in [Branch::Plus, Branch::Minus] {
            let once = project(&u, &data, branch).unwrap();
            let twice = project_with(&once, &data, branch, &FiberScan::default()).unwrap();
            prop_assert!((twice.t - 1.0).abs() < 1e-8);
            prop_assert!(once.sup_distance(&twice.point) <= 1e-8 * once.sup_norm());
            let want = if branch == Branch::Plus { ManifoldKind::NPlus } else { ManifoldKind::NMinus };
            prop_assert_eq!(classify(&once, &data).unwrap().kind, want);
        }
    }

    #[test]
    fn plus_root_lies_below_minus_root(seed in any::<u64>()) {
        let data = reference_at(32, 0.005);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_direction(data.mesh(), &mut rng);
        let p = project_with(&u, &data, Branch::Plus, &FiberScan::default()).unwrap();
        let m = project_with(&u, &data, Branch::Minus, &FiberScan::default()).unwrap();
        prop_assert!(p.t < m.t);
        let fp = Fiber::new(&p.point, &data);
        let fm = Fiber::new(&m.point, &data);
        prop_assert!(fp.ddphi(1.0) > 0.0 && fm.ddphi(1.0) < 0.0);
    }
}
