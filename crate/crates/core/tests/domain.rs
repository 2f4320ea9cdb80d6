use std::sync::Arc;

use nehari_core::domain::{validate_hypotheses, FieldSpec, Mesh, ProblemData};
use proptest::prelude::*;

fn affine_problem(res: usize, slope: f64) -> ProblemData {
    let mesh = Arc::new(Mesh::build(1, &[(0.0, 1.0)], res).unwrap());
    ProblemData::new(
        mesh,
        FieldSpec::Affine { offset: 1.5, slope: vec![slope] },
        FieldSpec::Affine { offset: 3.0, slope: vec![slope] },
        FieldSpec::Affine { offset: 0.2, slope: vec![0.5] },
        FieldSpec::constant(1.0),
        FieldSpec::constant(1.0),
        0.1,
    )
    .unwrap()
}

#[test]
fn supercritical_growth_is_rejected_in_two_dimensions() {
    let mesh = Arc::new(Mesh::build(2, &[(0.0, 1.0), (0.0, 1.0)], 8).unwrap());
    let data = ProblemData::new(
        mesh,
        FieldSpec::constant(1.5),
        FieldSpec::constant(7.0),
        FieldSpec::constant(0.5),
        FieldSpec::constant(1.0),
        FieldSpec::constant(1.0),
        0.1,
    )
    .unwrap();
    let report = validate_hypotheses(&data);
    assert!(!report.passed);
    let failed: Vec<_> = report.clauses.iter().filter(|c| !c.passed).map(|c| c.clause.as_str()).collect();
    assert!(failed.iter().any(|c| c.contains("p*")), "{failed:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn refinement_keeps_measure(dim in 1usize..=2, res in 2usize..24, lo in -3.0f64..3.0, len in 0.1f64..5.0) {
        let ext = vec![(lo, lo + len); dim];
        let coarse = Mesh::build(dim, &ext, res).unwrap();
        let fine = Mesh::build(dim, &ext, 2 * res).unwrap();
        prop_assert!((coarse.total_measure() - fine.total_measure()).abs() < 1e-12 * coarse.total_measure().max(1.0));
        prop_assert!((coarse.total_measure() - len.powi(dim as i32)).abs() < 1e-12 * len.powi(dim as i32).max(1.0));
    }

    #[test]
    fn extrema_approach_endpoint_values(slope in 0.05f64..0.9, res in 2usize..64) {
        let a = affine_problem(res, slope).extrema();
        let b = affine_problem(2 * res, slope).extrema();
        prop_assert!(b.p_minus <= a.p_minus && b.p_plus >= a.p_plus);
        prop_assert!(b.p_minus >= 1.5 && b.p_plus <= 1.5 + slope);
        prop_assert!(b.q_minus <= a.q_minus && b.delta_plus >= a.delta_plus);
    }

    #[test]
    fn validation_is_pure(slope in 0.0f64..3.0) {
        let d = affine_problem(16, slope);
        prop_assert_eq!(validate_hypotheses(&d), validate_hypotheses(&d));
    }
}
