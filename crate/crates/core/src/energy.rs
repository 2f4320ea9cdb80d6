//! Energy functional, Nehari residual, weak-form gradient, and fiber maps.
//!
//! The discrete energy is
//!
//! ```text
//! E(u) = Σ_e m_e [ |∇u_e|^{p_e}/p_e − a_e |u_e|^{q_e}/q_e − λ b_e (u_e⁺)^{1−δ_e}/(1−δ_e) ]
//! ```
//!
//! with `u_e` the centroid value and all fields sampled at centroids.
//! [`weak_gradient`] is its exact partial derivative with respect to the
//! interior nodal values.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::ProblemData;
use crate::error::{Error, Result};
use crate::vexp::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `∫ |∇u|^{p(x)} / p(x)`
    pub gradient_term: f64,
    /// `∫ a |u|^{q(x)} / q(x)`
    pub q_term: f64,
    /// `∫ b (u⁺)^{1−δ(x)} / (1−δ(x))`
    pub singular_term: f64,
    pub total: f64,
}

pub fn energy(u: &GridFunction, data: &ProblemData) -> EnergyBreakdown {
    let s = data.samples();
    let (mut g, mut q, mut d) = (0.0, 0.0, 0.0);
    for (e, el) in u.mesh().elements().iter().enumerate() {
        let grad = u.gradient_norm(e);
        if grad > 0.0 {
            g += el.measure * grad.powf(s.p[e]) / s.p[e];
        }
        let w = u.centroid_value(e);
        if w != 0.0 && s.a[e] != 0.0 {
            q += el.measure * s.a[e] * w.abs().powf(s.q[e]) / s.q[e];
        }
        if w > 0.0 && s.b[e] != 0.0 {
            let exp = 1.0 - s.delta[e];
            d += el.measure * s.b[e] * w.powf(exp) / exp;
        }
    }
    EnergyBreakdown { gradient_term: g, q_term: q, singular_term: d, total: g - q - data.lambda() * d }
}

/// `⟨E'(u), u⟩ = ∫|∇u|^{p(x)} − ∫a|u|^{q(x)} − λ∫b(u⁺)^{1−δ(x)}`; zero on
/// the Nehari manifold.
pub fn nehari_residual(u: &GridFunction, data: &ProblemData) -> f64 {
    let s = data.samples();
    let (mut g, mut q, mut d) = (0.0, 0.0, 0.0);
    for (e, el) in u.mesh().elements().iter().enumerate() {
        let grad = u.gradient_norm(e);
        if grad > 0.0 {
            g += el.measure * grad.powf(s.p[e]);
        }
        let w = u.centroid_value(e);
        if w != 0.0 {
            q += el.measure * s.a[e] * w.abs().powf(s.q[e]);
        }
        if w > 0.0 {
            d += el.measure * s.b[e] * w.powf(1.0 - s.delta[e]);
        }
    }
    g - q - data.lambda() * d
}

/// `1e-8 ×` the mean positive nodal value of `u`.
pub fn default_floor(u: &GridFunction) -> f64 {
    1e-8 * u.mean_positive()
}

/// Assembled weak-form residual against every interior hat function,
/// split into its three contributions. Boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakGradient {
    pub gradient_part: Vec<f64>,
    pub q_part: Vec<f64>,
    pub singular_part: Vec<f64>,
    interior: Vec<usize>,
}

impl WeakGradient {
    /// `∂E/∂u_i` for every vertex (zero on the boundary).
    pub fn covector(&self) -> Vec<f64> {
        self.gradient_part
            .iter()
            .zip(&self.q_part)
            .zip(&self.singular_part)
            .map(|((g, q), s)| g - q - s)
            .collect()
    }

    /// Largest absolute interior entry.
    pub fn residual(&self) -> f64 {
        let c = self.covector();
        self.interior.iter().fold(0.0, |m, &i| m.max(c[i].abs()))
    }

    /// Largest interior sum of the absolute values of the three parts; the
    /// natural size of an entry when the terms cancel.
    pub fn scale(&self) -> f64 {
        self.interior.iter().fold(0.0, |m, &i| {
            m.max(self.gradient_part[i].abs() + self.q_part[i].abs() + self.singular_part[i].abs())
        })
    }

    pub fn relative_residual(&self) -> f64 {
        let scale = self.scale();
        if scale == 0.0 {
            0.0
        } else {
            self.residual() / scale
        }
    }
}

/// Discrete weak residual
/// `∫|∇u|^{p−2}∇u·∇φ_i − ∫a|u|^{q−2}uφ_i − λ∫b u^{−δ}φ_i` for every interior
/// hat function `φ_i`. Requires `u ≥ floor` on interior vertices.
pub fn weak_gradient(u: &GridFunction, data: &ProblemData, floor: f64) -> Result<WeakGradient> {
    let mesh = u.mesh();
    for i in mesh.interior_vertices() {
        let v = u.values()[i];
        if v < floor || v.is_nan() {
            return Err(Error::BelowFloor { vertex: i, value: v, floor });
        }
    }
    let s = data.samples();
    let lambda = data.lambda();
    let n = mesh.num_vertices();
    let mut gp = vec![0.0; n];
    let mut qp = vec![0.0; n];
    let mut sp = vec![0.0; n];
    let dim = mesh.dimension();
    let share = 1.0 / (dim + 1) as f64;
    for (e, el) in mesh.elements().iter().enumerate() {
        let vs = mesh.element_vertices(e);
        if vs.iter().all(|&v| mesh.is_boundary(v)) {
            continue;
        }
        let g = u.gradient(e);
        let gn = g[0].hypot(g[1]);
        let flux = if gn > 0.0 { el.measure * gn.powf(s.p[e] - 2.0) } else { 0.0 };
        let w = u.centroid_value(e);
        let q_src = if w != 0.0 { el.measure * s.a[e] * w.abs().powf(s.q[e] - 2.0) * w * share } else { 0.0 };
        let s_src = if s.b[e] != 0.0 && lambda != 0.0 {
            lambda * el.measure * s.b[e] * w.powf(-s.delta[e]) * share
        } else {
            0.0
        };
        for (k, &v) in vs.iter().enumerate() {
            if mesh.is_boundary(v) {
                continue;
            }
            gp[v] += flux * (g[0] * el.grads[k][0] + g[1] * el.grads[k][1]);
            qp[v] += q_src;
            sp[v] += s_src;
        }
    }
    Ok(WeakGradient { gradient_part: gp, q_part: qp, singular_part: sp, interior: mesh.interior_vertices() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    exp: f64,
    coef: f64,
}

/// Fiber map `t ↦ E(tu)` reduced to sums of powers of `t`, with elements of
/// equal exponent merged into one term.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    /// `Σ m|∇u|^p` grouped by `p`.
    grad: Vec<Term>,
    /// `Σ m a|u|^q` grouped by `q`.
    q: Vec<Term>,
    /// `Σ m b(u⁺)^{1−δ}` grouped by `1−δ`.
    sing: Vec<Term>,
    lambda: f64,
}

fn push_term(terms: &mut Vec<Term>, index: &mut HashMap<u64, usize>, exp: f64, coef: f64) {
    if coef == 0.0 {
        return;
    }
    match index.get(&exp.to_bits()) {
        Some(&k) => terms[k].coef += coef,
        None => {
            index.insert(exp.to_bits(), terms.len());
            terms.push(Term { exp, coef });
        }
    }
}

impl Fiber {
    pub fn new(u: &GridFunction, data: &ProblemData) -> Fiber {
        let s = data.samples();
        let mut fiber = Fiber { grad: Vec::new(), q: Vec::new(), sing: Vec::new(), lambda: data.lambda() };
        let (mut ig, mut iq, mut is) = (HashMap::new(), HashMap::new(), HashMap::new());
        for (e, el) in u.mesh().elements().iter().enumerate() {
            let grad = u.gradient_norm(e);
            if grad > 0.0 {
                push_term(&mut fiber.grad, &mut ig, s.p[e], el.measure * grad.powf(s.p[e]));
            }
            let w = u.centroid_value(e);
            if w != 0.0 && s.a[e] != 0.0 {
                push_term(&mut fiber.q, &mut iq, s.q[e], el.measure * s.a[e] * w.abs().powf(s.q[e]));
            }
            if w > 0.0 && s.b[e] != 0.0 {
                let exp = 1.0 - s.delta[e];
                push_term(&mut fiber.sing, &mut is, exp, el.measure * s.b[e] * w.powf(exp));
            }
        }
        fiber
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Fiber {
        Fiber { lambda, ..self.clone() }
    }

    /// `Σ m b (u⁺)^{1−δ}`: zero when the singular term cannot act on `u`.
    pub fn singular_mass(&self) -> f64 {
        self.sing.iter().map(|t| t.coef).sum()
    }

    pub fn q_mass(&self) -> f64 {
        self.q.iter().map(|t| t.coef).sum()
    }

    /// `(Φ(t), Φ'(t), Φ''(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for term in &self.grad {
            let t2 = t.powf(term.exp - 2.0);
            f += term.coef * t2 * t * t / term.exp;
            d1 += term.coef * t2 * t;
            d2 += term.coef * (term.exp - 1.0) * t2;
        }
        for term in &self.q {
            let t2 = t.powf(term.exp - 2.0);
            f -= term.coef * t2 * t * t / term.exp;
            d1 -= term.coef * t2 * t;
            d2 -= term.coef * (term.exp - 1.0) * t2;
        }
        if self.lambda != 0.0 {
            for term in &self.sing {
                // exp = 1 − δ, so (exp − 1) t^{exp−2} = −δ t^{−δ−1}
                let t2 = t.powf(term.exp - 2.0);
                f -= self.lambda * term.coef * t2 * t * t / term.exp;
                d1 -= self.lambda * term.coef * t2 * t;
                d2 += self.lambda * term.coef * (1.0 - term.exp) * t2;
            }
        }
        (f, d1, d2)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn dphi(&self, t: f64) -> f64 {
        let mut d1 = 0.0;
        for term in &self.grad {
            d1 += term.coef * t.powf(term.exp - 1.0);
        }
        for term in &self.q {
            d1 -= term.coef * t.powf(term.exp - 1.0);
        }
        if self.lambda != 0.0 {
            for term in &self.sing {
                d1 -= self.lambda * term.coef * t.powf(term.exp - 1.0);
            }
        }
        d1
    }

    pub fn ddphi(&self, t: f64) -> f64 {
        self.eval(t).2
    }

    /// Sums of absolute term magnitudes in `Φ'(t)` and `Φ''(t)`.
    pub fn magnitudes(&self, t: f64) -> (f64, f64) {
        let (mut m1, mut m2) = (0.0, 0.0);
        let lam = self.lambda.abs();
        for (terms, w) in [(&self.grad, 1.0), (&self.q, 1.0), (&self.sing, lam)] {
            for term in terms.iter() {
                let t2 = t.powf(term.exp - 2.0);
                m1 += w * term.coef * t2 * t;
                m2 += w * term.coef * (term.exp - 1.0).abs() * t2;
            }
        }
        (m1, m2)
    }

    /// Classification of a critical point by the sign of `Φ''` with a
    /// relative dead-band around zero.
    pub fn classify_at(&self, t: f64) -> FiberClass {
        let dd = self.ddphi(t);
        let (_, m2) = self.magnitudes(t);
        if dd.abs() <= DEAD_BAND * m2 {
            FiberClass::NZero
        } else if dd > 0.0 {
            FiberClass::NPlus
        } else {
            FiberClass::NMinus
        }
    }

    /// Sign changes of `Φ'` on a log-uniform grid of `n` points in
    /// `[t_min, t_max]`, each refined by bisection.
    pub fn critical_points(&self, t_min: f64, t_max: f64, n: usize) -> Vec<CriticalPoint> {
        let ts = log_grid(t_min, t_max, n);
        let ds: Vec<f64> = ts.iter().map(|&t| self.dphi(t)).collect();
        self.roots_on_grid(&ts, &ds)
    }

    fn roots_on_grid(&self, ts: &[f64], ds: &[f64]) -> Vec<CriticalPoint> {
        let mut out = Vec::new();
        for i in 0..ts.len() {
            if ds[i] == 0.0 {
                out.push(self.critical_point(ts[i]));
                continue;
            }
            if i + 1 < ts.len() && ds[i + 1] != 0.0 && (ds[i] < 0.0) != (ds[i + 1] < 0.0) {
                let t = self.bisect(ts[i], ts[i + 1], ds[i]);
                out.push(self.critical_point(t));
            }
        }
        out
    }

    fn critical_point(&self, t: f64) -> CriticalPoint {
        let (_, d1, d2) = self.eval(t);
        CriticalPoint { t, dphi: d1, ddphi: d2, class: self.classify_at(t) }
    }

    /// Bisection of `Φ'` on a sign-changing bracket.
    pub fn bisect(&self, mut lo: f64, mut hi: f64, d_lo: f64) -> f64 {
        let lo_negative = d_lo < 0.0;
        for _ in 0..ROOT_MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = self.dphi(mid);
            if d == 0.0 {
                return mid;
            }
            if (d < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= ROOT_RTOL * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Relative dead-band on `Φ''` that defines `N⁰` numerically.
pub const DEAD_BAND: f64 = 1e-9;
const ROOT_MAX_STEPS: usize = 200;
const ROOT_RTOL: f64 = 1e-14;

pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                t_min
            } else if i + 1 == n {
                t_max
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberClass {
    /// `Φ'' > 0`: local minimum of the fiber.
    #[serde(rename = "N+")]
    NPlus,
    /// `Φ'' < 0`: local maximum of the fiber.
    #[serde(rename = "N-")]
    NMinus,
    #[serde(rename = "N0")]
    NZero,
}

impl std::fmt::Display for FiberClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FiberClass::NPlus => "N+",
            FiberClass::NMinus => "N-",
            FiberClass::NZero => "N0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t: f64,
    pub dphi: f64,
    pub ddphi: f64,
    pub class: FiberClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberProfile {
    #[serde(skip)]
    pub direction: Option<GridFunction>,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub ddphi: Vec<f64>,
    pub critical_points: Vec<CriticalPoint>,
    /// Largest sampled `|Φ'|`.
    pub scale: f64,
}

impl FiberProfile {
    /// `t,phi,dphi,ddphi` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,phi,dphi,ddphi\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.t[i], self.phi[i], self.dphi[i], self.ddphi[i]
            ));
        }
        out
    }

    /// `t,dphi,ddphi,class` table of the located critical points.
    pub fn critical_csv(&self) -> String {
        let mut out = String::from("t,dphi,ddphi,class\n");
        for c in &self.critical_points {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e},{}\n", c.t, c.dphi, c.ddphi, c.class));
        }
        out
    }
}

fn check_direction(u: &GridFunction) -> Result<()> {
    if !u.is_nonnegative() {
        return Err(Error::InvalidProblem("fiber direction must be nonnegative".into()));
    }
    if u.is_zero() {
        return Err(Error::InvalidProblem("fiber direction must be nonzero".into()));
    }
    Ok(())
}

/// Samples `Φ, Φ', Φ''` on a log-uniform grid and locates every critical
/// point. Never fails for lack of roots; see [`fiber_profile`].
pub fn sample_fiber(u: &GridFunction, data: &ProblemData, t_min: f64, t_max: f64, n: usize) -> Result<FiberProfile> {
    check_direction(u)?;
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(Error::InvalidProblem(format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]")));
    }
    if n < 16 {
        return Err(Error::InvalidProblem(format!("fiber needs at least 16 samples, got {n}")));
    }
    let fiber = Fiber::new(u, data);
    let t = log_grid(t_min, t_max, n);
    let (mut phi, mut dphi, mut ddphi) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &ti in &t {
        let (f, d1, d2) = fiber.eval(ti);
        phi.push(f);
        dphi.push(d1);
        ddphi.push(d2);
    }
    let scale = dphi.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let critical_points = fiber.roots_on_grid(&t, &dphi);
    Ok(FiberProfile { direction: Some(u.clone()), t, phi, dphi, ddphi, critical_points, scale })
}

/// [`sample_fiber`], reporting `NoBracket` when `Φ'` keeps one sign.
pub fn fiber_profile(u: &GridFunction, data: &ProblemData, t_min: f64, t_max: f64, n: usize) -> Result<FiberProfile> {
    let profile = sample_fiber(u, data, t_min, t_max, n)?;
    if profile.critical_points.is_empty() {
        return Err(Error::NoBracket { t_min, t_max });
    }
    Ok(profile)
}
