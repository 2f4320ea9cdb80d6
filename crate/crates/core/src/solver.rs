//! Constrained minimization of the energy on `N⁺` and `N⁻`.
//!
//! Each step solves `K d = E'(u)` with `K` the stiffness matrix weighted by
//! `(p−1)|∇u|^{p−2}` plus a lumped diagonal from the singular term, moves to
//! `max(u − s·d, floor)` on interior vertices, and projects back onto the
//! branch along the ray. The step `s` is accepted under an Armijo test on
//! the projected energy, or, once energy differences drop to rounding
//! level, when it lowers the weak residual without raising the energy
//! beyond rounding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{validate_hypotheses, ProblemData};
use crate::energy::{energy, weak_gradient, Fiber};
use crate::error::{Error, Result};
use crate::nehari::{self, classify, project_with, Branch, FiberScan, LambdaReport, ManifoldClass, ManifoldKind, ScanSettings};
use crate::sparse::TripletBuilder;
use crate::vexp::{self, GridFunction};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Interior values are kept above `grad_floor ×` the mean positive value.
    pub grad_floor: f64,
    /// Relative energy change treated as stagnation.
    pub energy_tol: f64,
    /// Target for the relative weak residual.
    pub residual_tol: f64,
    pub seed: u64,
    pub fiber: FiberScan,
    pub scan: ScanSettings,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 5000,
            step0: 1.0,
            armijo_c: 1e-4,
            shrink: 0.5,
            grad_floor: 1e-8,
            energy_tol: 1e-15,
            residual_tol: 1e-7,
            seed: 0,
            fiber: FiberScan::default(),
            scan: ScanSettings::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.grad_floor > 0.0 && self.grad_floor < 1.0) {
            return bad("grad_floor must lie in (0, 1)");
        }
        if !(self.energy_tol >= 0.0) || !(self.residual_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.fiber.t_min > 0.0 && self.fiber.t_min < self.fiber.t_max) || self.fiber.samples < 16 {
            return bad("fiber scan needs 0 < t_min < t_max and at least 16 samples");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    /// `Φ''(1)` at the iterate.
    pub ddphi: f64,
    pub step: f64,
    pub residual: f64,
    /// Luxemburg norm of the gradient of the iterate.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimization {
    pub branch: Branch,
    pub solution: GridFunction,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    pub trace: Vec<TraceRow>,
}

/// Interior floor used while minimizing.
pub fn iterate_floor(u: &GridFunction, grad_floor: f64) -> f64 {
    grad_floor * u.mean_positive()
}

fn clamp_interior(values: &mut [f64], u: &GridFunction, floor: f64) {
    let mesh = u.mesh();
    for i in mesh.interior_vertices() {
        if values[i] < floor {
            values[i] = floor;
        }
    }
}

fn initial_direction(data: &ProblemData, seed: u64) -> GridFunction {
    let mesh = data.mesh();
    let base = GridFunction::eigen_surrogate(mesh.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = vexp::random_direction(mesh, &mut rng);
    let ns = noise.sup_norm();
    let vals: Vec<f64> = base
        .values()
        .iter()
        .zip(noise.values())
        .map(|(b, n)| b + if ns > 0.0 { 0.1 * n / ns } else { 0.0 })
        .collect();
    GridFunction::new(mesh.clone(), vals).expect("same mesh")
}

/// Solves `K d = g` on the interior vertices.
fn precondition(u: &GridFunction, data: &ProblemData, g: &[f64]) -> Result<Vec<f64>> {
    let mesh = u.mesh();
    let interior = mesh.interior_vertices();
    let mut row = vec![usize::MAX; mesh.num_vertices()];
    for (k, &i) in interior.iter().enumerate() {
        row[i] = k;
    }
    let s = data.samples();
    let lambda = data.lambda();
    let share = 1.0 / (mesh.dimension() + 1) as f64;
    let gmax = (0..mesh.num_elements()).fold(0.0f64, |m, e| m.max(u.gradient_norm(e)));
    let gclip = (1e-3 * gmax).max(f64::MIN_POSITIVE);
    let mut t = TripletBuilder::new(interior.len());
    for (e, el) in mesh.elements().iter().enumerate() {
        let vs = mesh.element_vertices(e);
        let gn = u.gradient_norm(e).max(gclip);
        let w = el.measure * (s.p[e] - 1.0) * gn.powf(s.p[e] - 2.0);
        let c = u.centroid_value(e);
        let sing = if lambda > 0.0 && s.b[e] > 0.0 && c > 0.0 {
            lambda * el.measure * s.b[e] * s.delta[e] * c.powf(-s.delta[e] - 1.0) * share
        } else {
            0.0
        };
        for (a, &va) in vs.iter().enumerate() {
            let ra = row[va];
            if ra == usize::MAX {
                continue;
            }
            t.add(ra, ra, sing.max(0.0));
            for (b, &vb) in vs.iter().enumerate() {
                let rb = row[vb];
                if rb == usize::MAX {
                    continue;
                }
                let ga = el.grads[a];
                let gb = el.grads[b];
                t.add(ra, rb, w * (ga[0] * gb[0] + ga[1] * gb[1]));
            }
        }
    }
    let rhs: Vec<f64> = interior.iter().map(|&i| g[i]).collect();
    let x = t.build().solve_cg(&rhs, 1e-10)?;
    let mut d = vec![0.0; mesh.num_vertices()];
    for (k, &i) in interior.iter().enumerate() {
        d[i] = x[k];
    }
    Ok(d)
}

/// Minimizes the energy over the chosen branch. Returns the lowest-energy
/// iterate; `MaxIters` carries it when the iteration budget runs out first.
pub fn minimize(data: &ProblemData, config: &SolveConfig, branch: Branch) -> Result<Minimization> {
    config.validate()?;
    let start = initial_direction(data, config.seed);
    let mut u = project_with(&start, data, branch, &config.fiber)?.point;
    let mut e = energy(&u, data).total;
    let mut step = config.step0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut rel = f64::INFINITY;
    let mut iterations = 0;
    let mut stalled = false;
    for iter in 0..config.max_iters {
        iterations = iter;
        let floor = iterate_floor(&u, config.grad_floor);
        let wg = weak_gradient(&u, data, floor)?;
        rel = wg.relative_residual();
        let ddphi = Fiber::new(&u, data).ddphi(1.0);
        let gradient_norm = vexp::luxemburg_norm_with(&u, &data.samples().p, true)?;
        trace.push(TraceRow { iter, energy: e, ddphi, step, residual: rel, gradient_norm });
        if rel <= config.residual_tol {
            converged = true;
            break;
        }
        if stalled {
            break;
        }
        let g = wg.covector();
        let d = precondition(&u, data, &g)?;
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            break;
        }
        let parts = energy(&u, data);
        let rounding = 1e-13 * (parts.gradient_term.abs() + parts.q_term.abs() + data.lambda() * parts.singular_term.abs());
        let mut s = (2.0 * step).min(config.step0);
        let mut accepted = None;
        for _ in 0..60 {
            let mut vals: Vec<f64> = u.values().iter().zip(&d).map(|(x, y)| x - s * y).collect();
            clamp_interior(&mut vals, &u, floor);
            let trial = GridFunction::new(u.mesh().clone(), vals)?;
            match project_with(&trial, data, branch, &config.fiber) {
                Ok(p) => {
                    let et = energy(&p.point, data).total;
                    if et <= e - config.armijo_c * s * slope {
                        accepted = Some((p.point, et));
                        break;
                    }
                    if et <= e + rounding && config.armijo_c * s * slope <= rounding {
                        let tf = iterate_floor(&p.point, config.grad_floor);
                        if weak_gradient(&p.point, data, tf).is_ok_and(|w| w.relative_residual() < rel) {
                            accepted = Some((p.point, et));
                            break;
                        }
                    }
                }
                Err(Error::NoProjection { .. }) => {}
                Err(other) => return Err(other),
            }
            s *= config.shrink;
        }
        let Some((next, en)) = accepted else {
            log::debug!("{branch}: line search failed at iteration {iter}");
            stalled = true;
            continue;
        };
        let movement = next.sup_distance(&u) / u.sup_norm();
        let change = (e - en).abs();
        step = s;
        u = next;
        e = en;
        if change <= config.energy_tol * e.abs().max(f64::MIN_POSITIVE) && movement < 1e-8 {
            stalled = true;
        }
        iterations = iter + 1;
    }
    if !converged && !stalled && iterations + 1 >= config.max_iters {
        return Err(Error::MaxIters { iterations: config.max_iters, best_energy: e, best: u.into_values() });
    }
    Ok(Minimization { branch, solution: u, energy: e, iterations, converged, relative_residual: rel, trace })
}

pub fn minimize_on_nplus(data: &ProblemData, config: &SolveConfig) -> Result<Minimization> {
    minimize(data, config, Branch::Plus)
}

pub fn minimize_on_nminus(data: &ProblemData, config: &SolveConfig) -> Result<Minimization> {
    minimize(data, config, Branch::Minus)
}

/// Sampled `sup ∫ b|u|^{1−δ(x)} / |∇u|^{1−δ⁻}` over directions with unit
/// gradient norm, times [`vexp::EMBEDDING_SAFETY`]. Scaling up never
/// increases the ratio, so unit scale is the only one probed.
pub fn gradient_singular_constant(data: &ProblemData, samples: usize, seed: u64) -> Result<f64> {
    let mesh = data.mesh();
    let exps = &data.samples().p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = 0.0f64;
    for k in 0..=samples {
        let w = if k == 0 { GridFunction::eigen_surrogate(mesh.clone()) } else { vexp::random_direction(mesh, &mut rng) };
        let n = vexp::luxemburg_norm_with(&w, exps, true)?;
        if n == 0.0 {
            continue;
        }
        let (_, d) = vexp::weighted_integrals(&w.scaled(1.0 / n), data);
        c = c.max(d);
    }
    Ok(c * vexp::EMBEDDING_SAFETY)
}

/// Smallest `s ≥ 1` beyond which the lower bound
/// `(1/p⁺ − 1/q⁻) s^{p⁻} − λ c (1/(1−δ⁺) − 1/q⁻) s^{1−δ⁻}`
/// for the energy on the Nehari manifold exceeds `level`. Here `s` is the
/// Luxemburg norm of the gradient and `c` bounds `∫ b|u|^{1−δ(x)}` by
/// `c s^{1−δ⁻}` for `s > 1` (see [`gradient_singular_constant`]).
pub fn coercivity_radius(data: &ProblemData, singular_constant: f64, level: f64) -> f64 {
    let x = data.extrema();
    let a = 1.0 / x.p_plus - 1.0 / x.q_minus;
    let b = data.lambda() * singular_constant * (1.0 / (1.0 - x.delta_plus) - 1.0 / x.q_minus);
    let bound = |s: f64| a * s.powf(x.p_minus) - b * s.powf(1.0 - x.delta_minus);
    if bound(1.0) > level {
        return 1.0;
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while bound(hi) <= level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) > level {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub floor: f64,
    pub min_interior: f64,
    pub positive: bool,
    pub weak_residual: Option<f64>,
    pub residual_scale: Option<f64>,
    pub relative_residual: Option<f64>,
    pub residual_tol: f64,
    pub residual_ok: bool,
    pub classification: Option<ManifoldClass>,
    pub on_manifold: bool,
    pub passed: bool,
}

/// Positivity above `floor`, relative weak residual within `residual_tol`,
/// and membership in `N⁺` or `N⁻`.
pub fn verify_solution(u: &GridFunction, data: &ProblemData, floor: f64, residual_tol: f64) -> Verification {
    let min_interior = u.min_interior();
    let positive = !u.is_zero() && min_interior > 0.0 && min_interior >= floor;
    let wg = if positive { weak_gradient(u, data, floor).ok() } else { None };
    let relative_residual = wg.as_ref().map(|w| w.relative_residual());
    let residual_ok = relative_residual.is_some_and(|r| r <= residual_tol);
    let classification = classify(u, data).ok();
    let on_manifold =
        classification.is_some_and(|c| matches!(c.kind, ManifoldKind::NPlus | ManifoldKind::NMinus));
    Verification {
        floor,
        min_interior,
        positive,
        weak_residual: wg.as_ref().map(|w| w.residual()),
        residual_scale: wg.as_ref().map(|w| w.scale()),
        relative_residual,
        residual_tol,
        residual_ok,
        classification,
        on_manifold,
        passed: positive && residual_ok && on_manifold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: Branch,
    pub ok: bool,
    pub error: Option<ErrorInfo>,
    pub energy: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub verification: Option<Verification>,
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub solution: Option<GridFunction>,
}

impl BranchReport {
    fn from_result(data: &ProblemData, config: &SolveConfig, branch: Branch, r: Result<Minimization>) -> Self {
        match r {
            Ok(m) => {
                let floor = iterate_floor(&m.solution, config.grad_floor);
                let v = verify_solution(&m.solution, data, floor, config.residual_tol);
                BranchReport {
                    branch,
                    ok: v.passed,
                    error: None,
                    energy: Some(m.energy),
                    iterations: m.iterations,
                    converged: m.converged,
                    verification: Some(v),
                    trace: m.trace,
                    solution: Some(m.solution),
                }
            }
            Err(err) => {
                let info = ErrorInfo::from(&err);
                let (energy, solution, iterations) = match err {
                    Error::MaxIters { iterations, best_energy, best } => (
                        Some(best_energy),
                        GridFunction::new(data.mesh().clone(), best).ok(),
                        iterations,
                    ),
                    _ => (None, None, 0),
                };
                let verification = solution.as_ref().map(|u| {
                    verify_solution(u, data, iterate_floor(u, config.grad_floor), config.residual_tol)
                });
                BranchReport {
                    branch,
                    ok: false,
                    error: Some(info),
                    energy,
                    iterations,
                    converged: false,
                    verification,
                    trace: Vec::new(),
                    solution,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distinctness {
    pub sup_distance: f64,
    pub sobolev_distance: f64,
    /// `1e-3 ×` the larger sup norm.
    pub threshold: f64,
    pub distinct: bool,
}

pub fn distinctness(u: &GridFunction, v: &GridFunction, data: &ProblemData) -> Result<Distinctness> {
    let sup_distance = u.sup_distance(v);
    let sobolev_distance = vexp::sobolev_norm_with(&u.sub(v), &data.samples().p)?;
    let threshold = 1e-3 * u.sup_norm().max(v.sup_norm());
    Ok(Distinctness { sup_distance, sobolev_distance, threshold, distinct: sup_distance > threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub lambda: f64,
    pub lambda_report: Option<LambdaReport>,
    pub lambda_report_error: Option<ErrorInfo>,
    /// Whether `λ` lies below the estimated threshold.
    pub below_lambda_zero: Option<bool>,
    pub plus: BranchReport,
    pub minus: BranchReport,
    pub distinctness: Option<Distinctness>,
    pub success: bool,
}

impl SolveReport {
    pub fn u_plus(&self) -> Option<&GridFunction> {
        self.plus.solution.as_ref()
    }

    pub fn u_minus(&self) -> Option<&GridFunction> {
        self.minus.solution.as_ref()
    }
}

/// Computes the threshold report, then both branch minimizers.
pub fn solve_both(data: &ProblemData, config: &SolveConfig) -> Result<SolveReport> {
    let report = nehari::lambda_report(data, &config.scan);
    solve_both_with(data, config, report)
}

/// As [`solve_both`] with a precomputed (or failed) threshold report.
pub fn solve_both_with(
    data: &ProblemData,
    config: &SolveConfig,
    lambda_report: Result<LambdaReport>,
) -> Result<SolveReport> {
    config.validate()?;
    validate_hypotheses(data).into_result()?;
    let (lambda_report, lambda_report_error) = match lambda_report {
        Ok(r) => (Some(r), None),
        Err(e) => {
            log::warn!("threshold estimate failed: {e}");
            (None, Some(ErrorInfo::from(&e)))
        }
    };
    let below = lambda_report.as_ref().map(|r| data.lambda() < r.lambda_zero);
    if below == Some(false) {
        log::warn!("lambda {} is not below the estimated threshold", data.lambda());
    }
    let plus = BranchReport::from_result(data, config, Branch::Plus, minimize_on_nplus(data, config));
    let minus = BranchReport::from_result(data, config, Branch::Minus, minimize_on_nminus(data, config));
    let distinctness = match (&plus.solution, &minus.solution) {
        (Some(u), Some(v)) => Some(distinctness(u, v, data)?),
        _ => None,
    };
    let success = plus.ok && minus.ok && distinctness.is_some_and(|d| d.distinct);
    Ok(SolveReport {
        schema_version: SCHEMA_VERSION,
        lambda: data.lambda(),
        lambda_report,
        lambda_report_error,
        below_lambda_zero: below,
        plus,
        minus,
        distinctness,
        success,
    })
}
