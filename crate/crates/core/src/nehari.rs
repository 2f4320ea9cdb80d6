//! Nehari manifold membership, projection onto the `N⁺`/`N⁻` branches by
//! fiber scaling, and the λ-threshold diagnostics.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::ProblemData;
use crate::energy::{CriticalPoint, Fiber, FiberClass};
use crate::error::{Error, Result};
use crate::vexp::{self, EmbeddingConstants, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Smallest fiber root, a local minimum of the fiber.
    Plus,
    /// Largest fiber root, a local maximum of the fiber.
    Minus,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "N+",
            Branch::Minus => "N-",
        })
    }
}

impl Branch {
    pub fn class(self) -> FiberClass {
        match self {
            Branch::Plus => FiberClass::NPlus,
            Branch::Minus => FiberClass::NMinus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ManifoldKind {
    NPlus,
    NMinus,
    NZero,
    OffManifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldClass {
    pub kind: ManifoldKind,
    /// `Φ'_u(1)`
    pub dphi: f64,
    /// `Φ''_u(1)`
    pub ddphi: f64,
}

/// Relative tolerance on `|Φ'_u(1)|` for manifold membership.
pub const MANIFOLD_TOL: f64 = 1e-8;

pub fn classify(u: &GridFunction, data: &ProblemData) -> Result<ManifoldClass> {
    check_direction(u)?;
    let fiber = Fiber::new(u, data);
    let (_, d1, d2) = fiber.eval(1.0);
    let (m1, _) = fiber.magnitudes(1.0);
    let kind = if d1.abs() > MANIFOLD_TOL * m1 {
        ManifoldKind::OffManifold
    } else {
        match fiber.classify_at(1.0) {
            FiberClass::NPlus => ManifoldKind::NPlus,
            FiberClass::NMinus => ManifoldKind::NMinus,
            FiberClass::NZero => ManifoldKind::NZero,
        }
    };
    Ok(ManifoldClass { kind, dphi: d1, ddphi: d2 })
}

fn check_direction(u: &GridFunction) -> Result<()> {
    if !u.is_nonnegative() || u.is_zero() {
        return Err(Error::InvalidProblem("direction must be nonnegative and nonzero".into()));
    }
    Ok(())
}

/// Log-uniform sampling window for locating fiber roots of a direction
/// normalized to unit sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberScan {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
}

impl Default for FiberScan {
    fn default() -> Self {
        FiberScan { t_min: 1e-6, t_max: 1e6, samples: 512 }
    }
}

/// The fiber root a branch targets: the smallest root for `N⁺`, the largest
/// for `N⁻`, provided it carries the matching classification.
pub fn branch_root(roots: &[CriticalPoint], branch: Branch) -> Option<CriticalPoint> {
    let root = match branch {
        Branch::Plus => roots.first(),
        Branch::Minus => roots.last(),
    }?;
    (root.class == branch.class()).then_some(*root)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: GridFunction,
    /// Scaling applied to the input direction.
    pub t: f64,
    pub roots: Vec<CriticalPoint>,
}

/// `t·u` with `t` the branch's fiber root.
pub fn project(u: &GridFunction, data: &ProblemData, branch: Branch) -> Result<GridFunction> {
    project_with(u, data, branch, &FiberScan::default()).map(|p| p.point)
}

pub fn project_with(u: &GridFunction, data: &ProblemData, branch: Branch, scan: &FiberScan) -> Result<Projection> {
    check_direction(u)?;
    let sup = u.sup_norm();
    let w = u.scaled(1.0 / sup);
    let fiber = Fiber::new(&w, data);
    let roots = fiber.critical_points(scan.t_min, scan.t_max, scan.samples);
    if roots.len() > 2 {
        log::debug!("direction has {} fiber roots; intermediate ones ignored", roots.len());
    }
    let root = branch_root(&roots, branch).ok_or(Error::NoProjection { branch })?;
    Ok(Projection { point: w.scaled(root.t), t: root.t / sup, roots })
}

/// Eigenfunction surrogate followed by `count` seeded random nonnegative
/// directions, all normalized to unit Sobolev norm.
pub fn scan_directions(data: &ProblemData, count: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let mesh = data.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = vec![GridFunction::eigen_surrogate(mesh.clone())];
    for _ in 0..count {
        dirs.push(vexp::random_direction(mesh, &mut rng));
    }
    dirs.into_iter()
        .map(|w| {
            let n = vexp::sobolev_norm_with(&w, &data.samples().p)?;
            Ok(w.scaled(1.0 / n))
        })
        .collect()
}

/// `Some(t₂/t₁)` when the fiber has exactly one `N⁺` root followed by one `N⁻` root.
pub fn two_root_gap(fiber: &Fiber, scan: &FiberScan) -> Option<f64> {
    let roots = fiber.critical_points(scan.t_min, scan.t_max, scan.samples);
    match roots.as_slice() {
        [a, b] if a.class == FiberClass::NPlus && b.class == FiberClass::NMinus => Some(b.t / a.t),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub pass: bool,
    /// First failing direction, or the passing direction with the closest roots.
    pub worst_direction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub threshold: f64,
    /// Whether a failing grid value was found above the threshold (and the
    /// gap refined); otherwise the threshold is the largest grid value.
    pub bracketed: bool,
    pub directions: usize,
    pub rows: Vec<ScanRow>,
}

impl LambdaScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,pass,worst_direction\n");
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{},{}\n", r.lambda, u8::from(r.pass), r.worst_direction));
        }
        out
    }
}

fn evaluate_lambda(fibers: &[Fiber], lambda: f64, scan: &FiberScan) -> ScanRow {
    let gaps: Vec<Option<f64>> = fibers.par_iter().map(|f| two_root_gap(&f.with_lambda(lambda), scan)).collect();
    match gaps.iter().position(Option::is_none) {
        Some(i) => ScanRow { lambda, pass: false, worst_direction: i },
        None => {
            let worst = gaps
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.unwrap().total_cmp(&b.1.unwrap()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            ScanRow { lambda, pass: true, worst_direction: worst }
        }
    }
}

/// Default λ grid: 4 points per decade over `[1e-8, 1e4]`.
pub fn default_lambda_grid() -> Vec<f64> {
    lambda_grid(1e-8, 1e4, 4)
}

/// Log-spaced grid from `min` to `max` with `per_decade` points per decade.
pub fn lambda_grid(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    if !(min > 0.0 && max >= min) || per_decade == 0 {
        return Vec::new();
    }
    let (a, b) = (min.log10(), max.log10());
    let steps = ((b - a) * per_decade as f64).round() as usize;
    (0..=steps).map(|k| 10f64.powf(a + k as f64 / per_decade as f64)).collect()
}

/// Largest λ for which every scan direction has exactly two strictly
/// classified fiber roots (`N⁺` below `N⁻`), refined by geometric bisection
/// between the last passing and first failing grid values.
pub fn lambda_scan(data: &ProblemData, directions: usize, lambda_grid: &[f64], seed: u64) -> Result<LambdaScan> {
    if lambda_grid.is_empty() || directions == 0 {
        return Err(Error::InvalidProblem("lambda scan needs a nonempty grid and at least one direction".into()));
    }
    if lambda_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidProblem("lambda grid values must be positive".into()));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let dirs = scan_directions(data, directions, seed)?;
    let fibers: Vec<Fiber> = dirs.iter().map(|w| Fiber::new(w, data)).collect();
    let scan = FiberScan::default();
    let mut rows = Vec::with_capacity(grid.len());
    let mut last_pass = None;
    let mut first_fail = None;
    for &lambda in &grid {
        let row = evaluate_lambda(&fibers, lambda, &scan);
        rows.push(row);
        if first_fail.is_none() {
            if row.pass {
                last_pass = Some(lambda);
            } else {
                first_fail = Some(lambda);
            }
        }
    }
    let Some(mut lo) = last_pass else {
        return Err(Error::AllFail);
    };
    let bracketed = first_fail.is_some();
    if let Some(mut hi) = first_fail {
        for _ in 0..80 {
            if hi / lo - 1.0 <= 1e-9 {
                break;
            }
            let mid = (lo * hi).sqrt();
            if evaluate_lambda(&fibers, mid, &scan).pass {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(LambdaScan { threshold: lo, bracketed, directions: dirs.len(), rows })
}

/// The two closed-form λ bounds, with a record of the sign conventions used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaFormula {
    /// Bound from the `N⁰`-emptiness argument:
    /// `(c_q/c_d) |(p⁻+δ⁺−1)/(1−δ⁺−q⁺)|^{(p⁻+δ⁺−1)/(q⁺−p⁻)} (q⁺+δ⁺−1)/(q⁺−p⁻)`.
    pub degeneracy_bound: f64,
    /// Bound keeping the `N⁻` energy level positive:
    /// `(1−δ⁺)(p⁻−q⁺) / (c_d p⁺ (1−δ⁺−q⁺))`.
    pub positive_level_bound: f64,
    /// The base `(p⁻+δ⁺−1)/(1−δ⁺−q⁺)` was negative and replaced by its absolute value.
    pub degeneracy_base_negative: bool,
    /// Signs of the numerator and denominator of the positive-level bound,
    /// evaluated as written.
    pub positive_level_numerator_negative: bool,
    pub positive_level_denominator_negative: bool,
}

pub fn lambda_formula(data: &ProblemData, consts: &EmbeddingConstants) -> Result<LambdaFormula> {
    let x = data.extrema();
    let (pm, pp, qp, dp) = (x.p_minus, x.p_plus, x.q_plus, x.delta_plus);
    if qp == pm {
        return Err(Error::DegenerateExponents("q+ = p-".into()));
    }
    if pm + dp == 1.0 {
        return Err(Error::DegenerateExponents("p- + delta+ = 1".into()));
    }
    let (c_q, c_d) = (consts.c_q_plus, consts.c_d_minus);
    if !(c_q > 0.0 && c_d > 0.0) {
        return Err(Error::DegenerateExponents("embedding constants must be positive".into()));
    }
    let base = (pm + dp - 1.0) / (1.0 - dp - qp);
    let expo = (pm + dp - 1.0) / (qp - pm);
    let degeneracy_bound = c_q / c_d * base.abs().powf(expo) * ((qp + dp - 1.0) / (qp - pm));
    let num = (1.0 - dp) * (pm - qp);
    let den = c_d * pp * (1.0 - dp - qp);
    Ok(LambdaFormula {
        degeneracy_bound,
        positive_level_bound: num / den,
        degeneracy_base_negative: base < 0.0,
        positive_level_numerator_negative: num < 0.0,
        positive_level_denominator_negative: den < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub directions: usize,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub embedding_samples: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { directions: 32, lambda_grid: default_lambda_grid(), seed: 7, embedding_samples: 100 }
    }
}

/// Fraction of the smallest bound used as the operative `λ₀`.
pub const LAMBDA_ZERO_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub scan_threshold: f64,
    pub degeneracy_bound: f64,
    pub positive_level_bound: f64,
    /// `0.9 × min(scan threshold, both formula bounds)`.
    pub lambda_zero: f64,
    pub formula: LambdaFormula,
    pub constants_used: EmbeddingConstants,
    pub scan: LambdaScan,
}

/// Runs the scan, estimates the embedding constants, and evaluates both
/// formulas. Independent of `data.lambda()`.
pub fn lambda_report(data: &ProblemData, settings: &ScanSettings) -> Result<LambdaReport> {
    let scan = lambda_scan(data, settings.directions, &settings.lambda_grid, settings.seed)?;
    let constants_used = vexp::estimate_embedding_constants(data, settings.embedding_samples, settings.seed)?;
    let formula = lambda_formula(data, &constants_used)?;
    let lambda_zero =
        LAMBDA_ZERO_FACTOR * scan.threshold.min(formula.degeneracy_bound).min(formula.positive_level_bound);
    Ok(LambdaReport {
        scan_threshold: scan.threshold,
        degeneracy_bound: formula.degeneracy_bound,
        positive_level_bound: formula.positive_level_bound,
        lambda_zero,
        formula,
        constants_used,
        scan,
    })
}
