//! Variable-exponent Lebesgue and Sobolev numerics on piecewise-linear grid
//! functions: modulars, Luxemburg norms, the modular/norm relations, and
//! sampled embedding constants.
//!
//! All integrals use one-point centroid quadrature. Exponents are read at
//! element centroids, so the discrete modular is a finite sum of powers with
//! exponents inside `[p⁻, p⁺]` and the modular/norm relations hold exactly
//! for the discrete objects.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{FieldSpec, Mesh, ProblemData};
use crate::error::{Error, Result};

/// Nodal coefficients of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Function in `W₀^{1,p(x)}`: boundary values are set to zero.
    pub fn new(mesh: Arc<Mesh>, mut values: Vec<f64>) -> Result<GridFunction> {
        check_values(&mesh, &values)?;
        for (i, v) in values.iter_mut().enumerate() {
            if mesh.is_boundary(i) {
                *v = 0.0;
            }
        }
        Ok(GridFunction { mesh, values })
    }

    /// Function without the trace condition, for pure Lebesgue-space use.
    pub fn lebesgue(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<GridFunction> {
        check_values(&mesh, &values)?;
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> GridFunction {
        let n = mesh.num_vertices();
        GridFunction { mesh, values: vec![0.0; n] }
    }

    /// Interpolant of `f` with zero trace. Panics if `f` is not finite at a vertex.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = (0..mesh.num_vertices()).map(|i| f(mesh.vertex(i))).collect();
        GridFunction::new(mesh, values).expect("interpolated values must be finite")
    }

    /// Interpolated product of coordinate sines: the first Dirichlet
    /// eigenfunction of the box.
    pub fn eigen_surrogate(mesh: Arc<Mesh>) -> GridFunction {
        let values = (0..mesh.num_vertices())
            .map(|i| {
                let xi = mesh.reference_coordinates(i);
                (0..mesh.dimension()).map(|k| (std::f64::consts::PI * xi[k]).sin()).product::<f64>()
            })
            .collect();
        GridFunction::new(mesh, values).expect("sine values are finite")
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at the centroid of element `e` (mean of its vertex values).
    pub fn centroid_value(&self, e: usize) -> f64 {
        let vs = self.mesh.element_vertices(e);
        vs.iter().map(|&v| self.values[v]).sum::<f64>() / vs.len() as f64
    }

    pub fn gradient(&self, e: usize) -> [f64; 2] {
        let el = &self.mesh.elements()[e];
        let mut g = [0.0; 2];
        for (k, &v) in self.mesh.element_vertices(e).iter().enumerate() {
            g[0] += self.values[v] * el.grads[k][0];
            g[1] += self.values[v] * el.grads[k][1];
        }
        g
    }

    pub fn gradient_norm(&self, e: usize) -> f64 {
        let g = self.gradient(e);
        g[0].hypot(g[1])
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction { mesh: Arc::clone(&self.mesh), values: self.values.iter().map(|v| s * v).collect() }
    }

    pub fn positive_part(&self) -> GridFunction {
        GridFunction { mesh: Arc::clone(&self.mesh), values: self.values.iter().map(|v| v.max(0.0)).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Mean of the strictly positive nodal values (0 if there are none).
    pub fn mean_positive(&self) -> f64 {
        let (sum, count) = self
            .values
            .iter()
            .filter(|&&v| v > 0.0)
            .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn min_interior(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| !self.mesh.is_boundary(i))
            .map(|i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// `x[,y],value` table with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.mesh.dimension() == 1 { "x,value\n" } else { "x,y,value\n" });
        for (i, v) in self.values.iter().enumerate() {
            for c in self.mesh.vertex(i) {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{v:.17e}\n"));
        }
        out
    }

    /// Reads the [`GridFunction::to_csv`] layout back onto `mesh`; rows must
    /// list the vertices in mesh order. With `zero_trace` the boundary values
    /// are reset to zero.
    pub fn from_csv(mesh: Arc<Mesh>, text: &str, zero_trace: bool) -> Result<GridFunction> {
        let dim = mesh.dimension();
        let bad = |m: String| Error::InvalidProblem(format!("grid function csv: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let expected = if dim == 1 { "x,value" } else { "x,y,value" };
        if header.replace(' ', "") != expected {
            return Err(bad(format!("expected header {expected:?}, got {header:?}")));
        }
        let mut values = Vec::with_capacity(mesh.num_vertices());
        for (row, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("row {} is not numeric", row + 1)))?;
            if cols.len() != dim + 1 {
                return Err(bad(format!("row {} has {} columns", row + 1, cols.len())));
            }
            if row >= mesh.num_vertices() {
                return Err(bad(format!("more rows than the {} mesh vertices", mesh.num_vertices())));
            }
            let x = mesh.vertex(row);
            if (0..dim).any(|k| (x[k] - cols[k]).abs() > 1e-9 * (1.0 + x[k].abs())) {
                return Err(bad(format!("row {} does not match vertex coordinates {:?}", row + 1, &x[..dim])));
            }
            values.push(cols[dim]);
        }
        if zero_trace {
            GridFunction::new(mesh, values)
        } else {
            GridFunction::lebesgue(mesh, values)
        }
    }
}

fn check_values(mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_vertices() {
        return Err(Error::InvalidProblem(format!(
            "grid function has {} values, mesh has {} vertices",
            values.len(),
            mesh.num_vertices()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidProblem(format!("grid function value at vertex {i} is not finite")));
    }
    Ok(())
}

/// Field values at every element centroid.
pub fn centroid_samples(mesh: &Mesh, field: &FieldSpec) -> Vec<f64> {
    (0..mesh.num_elements()).map(|e| field.eval(mesh.centroid(e))).collect()
}

/// Per-element `|u(centroid)|` or `|∇u|`.
fn element_magnitudes(u: &GridFunction, use_gradient: bool) -> Vec<f64> {
    (0..u.mesh.num_elements())
        .map(|e| if use_gradient { u.gradient_norm(e) } else { u.centroid_value(e).abs() })
        .collect()
}

fn power_sum(measures: impl Iterator<Item = f64>, magnitudes: &[f64], exps: &[f64], scale: f64) -> f64 {
    measures
        .zip(magnitudes)
        .zip(exps)
        .map(|((m, &w), &p)| if w == 0.0 { 0.0 } else { m * (w / scale).powf(p) })
        .sum()
}

/// Modular `ρ(u) = ∫ |u|^{p(x)}` (or of `|∇u|` when `use_gradient` is set).
pub fn modular(u: &GridFunction, exponent: &FieldSpec, use_gradient: bool) -> f64 {
    let exps = centroid_samples(&u.mesh, exponent);
    modular_with(u, &exps, use_gradient)
}

/// [`modular`] with pre-sampled centroid exponents.
pub fn modular_with(u: &GridFunction, exps: &[f64], use_gradient: bool) -> f64 {
    let w = element_magnitudes(u, use_gradient);
    power_sum(u.mesh.elements().iter().map(|e| e.measure), &w, exps, 1.0)
}

/// Luxemburg norm `inf { s > 0 : ρ(u/s) ≤ 1 }`.
pub fn luxemburg_norm(u: &GridFunction, exponent: &FieldSpec, use_gradient: bool) -> Result<f64> {
    let exps = centroid_samples(&u.mesh, exponent);
    luxemburg_norm_with(u, &exps, use_gradient)
}

pub fn luxemburg_norm_with(u: &GridFunction, exps: &[f64], use_gradient: bool) -> Result<f64> {
    let measures: Vec<f64> = u.mesh.elements().iter().map(|e| e.measure).collect();
    let w = element_magnitudes(u, use_gradient);
    luxemburg_root(&measures, &w, exps)
}

const LUX_MAX_STEPS: usize = 200;
const LUX_RTOL: f64 = 1e-10;

/// Unique `s` with `Σ m (w/s)^p = 1`, by bracket expansion and bisection on
/// the geometric midpoint. The left side is strictly decreasing in `s`.
pub(crate) fn luxemburg_root(measures: &[f64], magnitudes: &[f64], exps: &[f64]) -> Result<f64> {
    let f = |s: f64| power_sum(measures.iter().copied(), magnitudes, exps, s) - 1.0;
    let rho = power_sum(measures.iter().copied(), magnitudes, exps, 1.0);
    if rho == 0.0 {
        return Ok(0.0);
    }
    let p_minus = magnitudes
        .iter()
        .zip(exps)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, &p)| p)
        .fold(f64::INFINITY, f64::min);
    let guess = rho.powf(1.0 / p_minus);
    let (mut lo, mut hi) = (1e-12 * guess, 1e12 * guess);
    let mut expansions = 0;
    while f(lo) <= 0.0 || f(hi) >= 0.0 {
        if f(lo) <= 0.0 {
            lo *= 1e-6;
        }
        if f(hi) >= 0.0 {
            hi *= 1e6;
        }
        expansions += 1;
        if expansions > 40 {
            return Err(Error::NonConvergence { what: "Luxemburg bracket", steps: expansions });
        }
    }
    for _ in 0..LUX_MAX_STEPS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 <= 1e-3 * LUX_RTOL {
            break;
        }
    }
    if hi / lo - 1.0 > LUX_RTOL {
        return Err(Error::NonConvergence { what: "Luxemburg bisection", steps: LUX_MAX_STEPS });
    }
    Ok((lo * hi).sqrt())
}

/// `|u|_{p(x)} + |∇u|_{p(x)}`.
pub fn sobolev_norm(u: &GridFunction, p: &FieldSpec) -> Result<f64> {
    let exps = centroid_samples(&u.mesh, p);
    sobolev_norm_with(u, &exps)
}

pub fn sobolev_norm_with(u: &GridFunction, exps: &[f64]) -> Result<f64> {
    Ok(luxemburg_norm_with(u, exps, false)? + luxemburg_norm_with(u, exps, true)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormRegime {
    /// `‖u‖ > 1`: `‖u‖^{p⁻} ≤ ρ(u) ≤ ‖u‖^{p⁺}`
    AboveOne,
    /// `‖u‖ < 1`: `‖u‖^{p⁺} ≤ ρ(u) ≤ ‖u‖^{p⁻}`
    BelowOne,
    /// `‖u‖ = 1` up to round-off; both chains are checked.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularRelations {
    pub norm: f64,
    pub modular: f64,
    pub regime: NormRegime,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks the two-sided modular/norm bounds for the `L^{p(x)}` norm of `u`.
pub fn check_modular_relations(u: &GridFunction, p: &FieldSpec) -> Result<ModularRelations> {
    let exps = centroid_samples(&u.mesh, p);
    let (p_minus, p_plus) = exps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let norm = luxemburg_norm_with(u, &exps, false)?;
    let rho = modular_with(u, &exps, false);
    // Slack covers the bisection tolerance on the norm.
    let slack = 1e-9;
    let (regime, lower, upper) = if (norm - 1.0).abs() <= 1e-12 {
        let a = norm.powf(p_minus);
        let b = norm.powf(p_plus);
        (NormRegime::Unit, a.min(b), a.max(b))
    } else if norm > 1.0 {
        (NormRegime::AboveOne, norm.powf(p_minus), norm.powf(p_plus))
    } else {
        (NormRegime::BelowOne, norm.powf(p_plus), norm.powf(p_minus))
    };
    let holds = lower <= rho * (1.0 + slack) && rho <= upper * (1.0 + slack);
    Ok(ModularRelations { norm, modular: rho, regime, lower, upper, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|∫uv| ≤ (1/p⁻ + 1/p'⁻) |u|_{p(x)} |v|_{p'(x)}` with `p'` the pointwise
/// conjugate exponent `p/(p-1)`. Requires `p > 1` on every centroid.
pub fn holder_check(u: &GridFunction, v: &GridFunction, p: &FieldSpec) -> Result<HolderCheck> {
    let exps = centroid_samples(&u.mesh, p);
    if exps.iter().any(|&e| e <= 1.0) {
        return Err(Error::InvalidField("Hölder check needs p(x) > 1".into()));
    }
    let conj: Vec<f64> = exps.iter().map(|&e| e / (e - 1.0)).collect();
    let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    let constant = 1.0 / min(&exps) + 1.0 / min(&conj);
    let lhs = u
        .mesh
        .elements()
        .iter()
        .enumerate()
        .map(|(e, el)| el.measure * u.centroid_value(e) * v.centroid_value(e))
        .sum::<f64>()
        .abs();
    let rhs = constant * luxemburg_norm_with(u, &exps, false)? * luxemburg_norm_with(v, &conj, false)?;
    Ok(HolderCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) })
}

/// `∫ a |u|^{q(x)}` and `∫ b |u|^{1-δ(x)}` by centroid quadrature.
pub fn weighted_integrals(u: &GridFunction, data: &ProblemData) -> (f64, f64) {
    let s = data.samples();
    let mut qa = 0.0;
    let mut db = 0.0;
    for (e, el) in u.mesh.elements().iter().enumerate() {
        let w = u.centroid_value(e).abs();
        if w == 0.0 {
            continue;
        }
        qa += el.measure * s.a[e] * w.powf(s.q[e]);
        db += el.measure * s.b[e] * w.powf(1.0 - s.delta[e]);
    }
    (qa, db)
}

/// Sampled constants for the weighted embedding inequalities
///
/// ```text
/// ∫ a|u|^{q(x)}   ≤ c_q_plus  ‖u‖^{q⁺}     (‖u‖ > 1)
/// ∫ a|u|^{q(x)}   ≤ c_q_minus ‖u‖^{q⁻}     (‖u‖ < 1)
/// ∫ b|u|^{1-δ(x)} ≤ c_d_minus ‖u‖^{1-δ⁻}   (‖u‖ > 1)
/// ∫ b|u|^{1-δ(x)} ≤ c_d_plus  ‖u‖^{1-δ⁺}   (‖u‖ < 1)
/// ```
///
/// with `‖·‖` the Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    pub c_q_plus: f64,
    pub c_q_minus: f64,
    pub c_d_plus: f64,
    pub c_d_minus: f64,
    pub sample_count: usize,
    pub safety_factor: f64,
}

pub const EMBEDDING_SAFETY: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAudit {
    pub norm: f64,
    pub q_integral: f64,
    pub q_bound: f64,
    pub d_integral: f64,
    pub d_bound: f64,
    pub holds: bool,
}

impl EmbeddingConstants {
    /// Evaluates the applicable pair of inequalities at `u`.
    pub fn audit(&self, u: &GridFunction, data: &ProblemData) -> Result<EmbeddingAudit> {
        let x = data.extrema();
        let norm = sobolev_norm_with(u, &data.samples().p)?;
        let (qi, di) = weighted_integrals(u, data);
        let (q_bound, d_bound) = if norm >= 1.0 {
            (self.c_q_plus * norm.powf(x.q_plus), self.c_d_minus * norm.powf(1.0 - x.delta_minus))
        } else {
            (self.c_q_minus * norm.powf(x.q_minus), self.c_d_plus * norm.powf(1.0 - x.delta_plus))
        };
        Ok(EmbeddingAudit {
            norm,
            q_integral: qi,
            q_bound,
            d_integral: di,
            d_bound,
            holds: qi <= q_bound && di <= d_bound,
        })
    }

    /// Right side of `∫ b|u|^{1-δ(x)} ≤ c (‖u‖^{1-δ⁻} + ‖u‖^{1-δ⁺})`.
    pub fn singular_bound(&self, norm: f64, data: &ProblemData) -> f64 {
        let x = data.extrema();
        self.c_d_plus.max(self.c_d_minus) * (norm.powf(1.0 - x.delta_minus) + norm.powf(1.0 - x.delta_plus))
    }
}

/// Seeded random nonnegative direction with zero trace: the absolute value
/// of a random combination of low sine modes, dominated by the first mode.
pub fn random_direction<R: Rng + ?Sized>(mesh: &Arc<Mesh>, rng: &mut R) -> GridFunction {
    let dim = mesh.dimension();
    let per_axis = if dim == 1 { 6 } else { 3 };
    let modes: Vec<[usize; 2]> = if dim == 1 {
        (1..=per_axis).map(|k| [k, 1]).collect()
    } else {
        (1..=per_axis).flat_map(|i| (1..=per_axis).map(move |j| [i, j])).collect()
    };
    let coeffs: Vec<f64> = modes
        .iter()
        .map(|m| {
            let order = (m[0] * m[0] + if dim == 2 { m[1] * m[1] } else { 0 }) as f64;
            if m[0] == 1 && (dim == 1 || m[1] == 1) {
                rng.gen_range(0.5..1.0)
            } else {
                rng.gen_range(-1.0..1.0) / order
            }
        })
        .collect();
    let values = (0..mesh.num_vertices())
        .map(|i| {
            let xi = mesh.reference_coordinates(i);
            let s: f64 = modes
                .iter()
                .zip(&coeffs)
                .map(|(m, c)| {
                    (0..dim).map(|k| (std::f64::consts::PI * m[k] as f64 * xi[k]).sin()).product::<f64>() * c
                })
                .sum();
            s.abs()
        })
        .collect();
    GridFunction::new(Arc::clone(mesh), values).expect("sine combinations are finite")
}

/// Empirical embedding constants: the largest observed ratios over `samples`
/// seeded directions, multiplied by [`EMBEDDING_SAFETY`].
///
/// Each direction is normalized to unit Sobolev norm and probed at scales on
/// both sides of 1. For the `‖u‖ > 1` clauses the ratio is nonincreasing in
/// the scale and for `‖u‖ < 1` nondecreasing, so the unit scale is always
/// included as the supremum over the clause.
pub fn estimate_embedding_constants(data: &ProblemData, samples: usize, seed: u64) -> Result<EmbeddingConstants> {
    if samples == 0 {
        return Err(Error::InvalidProblem("embedding estimate needs at least one sample".into()));
    }
    let mesh = data.mesh();
    let x = data.extrema();
    let exps = &data.samples().p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = [0.0f64; 4];
    for _ in 0..samples {
        let w = random_direction(mesh, &mut rng);
        let norm = sobolev_norm_with(&w, exps)?;
        if norm == 0.0 {
            continue;
        }
        let unit = w.scaled(1.0 / norm);
        let above = rng.gen_range(0.0f64..2.0).exp();
        let below = (-rng.gen_range(0.0f64..2.0)).exp();
        for s in [1.0, above] {
            let (qi, di) = weighted_integrals(&unit.scaled(s), data);
            c[0] = c[0].max(qi / s.powf(x.q_plus));
            c[3] = c[3].max(di / s.powf(1.0 - x.delta_minus));
        }
        for s in [1.0, below] {
            let (qi, di) = weighted_integrals(&unit.scaled(s), data);
            c[1] = c[1].max(qi / s.powf(x.q_minus));
            c[2] = c[2].max(di / s.powf(1.0 - x.delta_plus));
        }
    }
    Ok(EmbeddingConstants {
        c_q_plus: EMBEDDING_SAFETY * c[0],
        c_q_minus: EMBEDDING_SAFETY * c[1],
        c_d_plus: EMBEDDING_SAFETY * c[2],
        c_d_minus: EMBEDDING_SAFETY * c[3],
        sample_count: samples,
        safety_factor: EMBEDDING_SAFETY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::build(1, &[(0.0, 1.0)], n).unwrap())
    }

    fn constant_fn(mesh: &Arc<Mesh>, c: f64) -> GridFunction {
        GridFunction::lebesgue(Arc::clone(mesh), vec![c; mesh.num_vertices()]).unwrap()
    }

    #[test]
    fn trace_is_zeroed() {
        let m = line(4);
        let u = GridFunction::new(Arc::clone(&m), vec![1.0; 5]).unwrap();
        assert_eq!(u.values(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(GridFunction::new(m.clone(), vec![1.0; 4]).is_err());
        assert!(GridFunction::new(m, vec![f64::NAN; 5]).is_err());
    }

    #[test]
    fn modular_of_unit_constant() {
        let m = line(16);
        let u = constant_fn(&m, 1.0);
        assert!((modular(&u, &FieldSpec::constant(2.0), false) - 1.0).abs() < 1e-14);
        assert!((luxemburg_norm(&u, &FieldSpec::constant(2.0), false).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn luxemburg_of_constant_two_in_l2() {
        let m = line(16);
        let u = constant_fn(&m, 2.0);
        assert!((luxemburg_norm(&u, &FieldSpec::constant(2.0), false).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let m = line(8);
        let u = GridFunction::zeros(m);
        assert_eq!(luxemburg_norm(&u, &FieldSpec::constant(3.0), true).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&u, &FieldSpec::constant(3.0)).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_norm_is_homogeneous_for_constant_exponent() {
        let m = line(32);
        let u = GridFunction::eigen_surrogate(m);
        let p = FieldSpec::constant(2.0);
        let n1 = sobolev_norm(&u, &p).unwrap();
        let n2 = sobolev_norm(&u.scaled(2.0), &p).unwrap();
        assert!((n2 - 2.0 * n1).abs() < 1e-10 * n2);
    }

    #[test]
    fn unit_norm_boundary_case() {
        let m = line(8);
        let r = check_modular_relations(&constant_fn(&m, 1.0), &FieldSpec::constant(2.0)).unwrap();
        assert_eq!(r.regime, NormRegime::Unit);
        assert!(r.holds);
        assert!((r.modular - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_function_uses_below_one_clause() {
        let m = line(32);
        let p = FieldSpec::from_params("affine", &[2.0, 1.0], 1).unwrap();
        let r = check_modular_relations(&constant_fn(&m, 0.5), &p).unwrap();
        assert_eq!(r.regime, NormRegime::BelowOne);
        assert!(r.holds);
        assert!(r.lower <= r.modular && r.modular <= r.upper);
    }

    #[test]
    fn holder_holds_for_constant_exponent() {
        let m = line(32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = GridFunction::new(m.clone(), (0..33).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let v = GridFunction::new(m.clone(), (0..33).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let h = holder_check(&u, &v, &FieldSpec::constant(3.0)).unwrap();
            assert!(h.holds, "{h:?}");
        }
    }

    #[test]
    fn random_directions_are_nonnegative_with_zero_trace() {
        let m = Arc::new(Mesh::build(2, &[(0.0, 1.0), (0.0, 1.0)], 6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_direction(&m, &mut rng);
        assert!(w.is_nonnegative());
        assert!(!w.is_zero());
        for b in m.boundary_vertices() {
            assert_eq!(w.values()[b], 0.0);
        }
    }

    #[test]
    fn zero_weight_gives_zero_constants() {
        let m = line(16);
        let d = ProblemData::new(
            m,
            FieldSpec::constant(2.0),
            FieldSpec::constant(4.0),
            FieldSpec::constant(0.5),
            FieldSpec::constant(0.0),
            FieldSpec::constant(1.0),
            0.1,
        )
        .unwrap();
        let c = estimate_embedding_constants(&d, 10, 0).unwrap();
        assert_eq!(c.c_q_plus, 0.0);
        assert_eq!(c.c_q_minus, 0.0);
        assert!(c.c_d_plus > 0.0 && c.c_d_minus > 0.0);
    }
}
