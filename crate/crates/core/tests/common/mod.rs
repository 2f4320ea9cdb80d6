#![allow(dead_code)]

use std::sync::Arc;

use nehari_core::domain::{FieldSpec, Mesh, ProblemData};
use nehari_core::nehari::{lambda_report, LambdaReport, ScanSettings};

pub fn interval(res: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(1, &[(0.0, 1.0)], res).unwrap())
}

pub fn bump() -> FieldSpec {
    FieldSpec::Bump { amplitude: 1.0, lo: vec![0.25], hi: vec![0.75] }
}

/// p ≡ 2, q ≡ 4, δ ≡ 0.5, a = b = bump on [0.25, 0.75].
pub fn reference_at(res: usize, lambda: f64) -> ProblemData {
    ProblemData::new(
        interval(res),
        FieldSpec::constant(2.0),
        FieldSpec::constant(4.0),
        FieldSpec::constant(0.5),
        bump(),
        bump(),
        lambda,
    )
    .unwrap()
}

/// Reference problem with λ = 0.5·λ₀ and the report that fixed it.
pub fn reference(res: usize) -> (ProblemData, LambdaReport) {
    let data = reference_at(res, 0.0);
    let report = lambda_report(&data, &ScanSettings::default()).unwrap();
    (data.with_lambda(0.5 * report.lambda_zero).unwrap(), report)
}

/// Midpoint rule on (0, 1) for smooth integrands.
pub fn integrate(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    (0..n).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Root of an increasing function by bisection.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
