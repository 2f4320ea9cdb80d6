//! Computational domain: structured simplicial meshes on intervals and
//! rectangles, pointwise coefficient fields, and the problem data bundle
//! with its exponent/weight hypotheses.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simplex of a [`Mesh`]: a segment in 1D, a triangle in 2D.
///
/// Only the first `dimension + 1` entries of `vertices` and `grads` are used.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub vertices: [usize; 3],
    pub measure: f64,
    pub centroid: [f64; 2],
    /// Gradients of the local hat functions (constant on the element).
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dimension: usize,
    extent: Vec<(f64, f64)>,
    resolution: usize,
    vertices: Vec<[f64; 2]>,
    elements: Vec<Element>,
    boundary: Vec<bool>,
}

impl Mesh {
    /// Uniform mesh of the coordinate box `extent` (one `(lo, hi)` pair per
    /// axis). In 1D the interval is cut into `resolution` segments; in 2D the
    /// box is cut into `resolution²` squares, each split along its diagonal.
    pub fn build(dimension: usize, extent: &[(f64, f64)], resolution: usize) -> Result<Mesh> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidMesh(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if extent.len() != dimension {
            return Err(Error::InvalidMesh(format!(
                "expected {dimension} extent pairs, got {}",
                extent.len()
            )));
        }
        for &(lo, hi) in extent {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidMesh(format!("non-positive extent [{lo}, {hi}]")));
            }
        }
        if resolution < 2 {
            return Err(Error::InvalidMesh(format!("resolution must be >= 2, got {resolution}")));
        }
        let n = resolution;
        let mut mesh = Mesh {
            dimension,
            extent: extent.to_vec(),
            resolution,
            vertices: Vec::new(),
            elements: Vec::new(),
            boundary: Vec::new(),
        };
        match dimension {
            1 => {
                let (lo, hi) = extent[0];
                let h = (hi - lo) / n as f64;
                for i in 0..=n {
                    let x = if i == n { hi } else { lo + h * i as f64 };
                    mesh.vertices.push([x, 0.0]);
                    mesh.boundary.push(i == 0 || i == n);
                }
                for i in 0..n {
                    mesh.elements.push(segment(&mesh.vertices, i, i + 1)?);
                }
            }
            _ => {
                let (x0, x1) = extent[0];
                let (y0, y1) = extent[1];
                let hx = (x1 - x0) / n as f64;
                let hy = (y1 - y0) / n as f64;
                for j in 0..=n {
                    for i in 0..=n {
                        let x = if i == n { x1 } else { x0 + hx * i as f64 };
                        let y = if j == n { y1 } else { y0 + hy * j as f64 };
                        mesh.vertices.push([x, y]);
                        mesh.boundary.push(i == 0 || i == n || j == 0 || j == n);
                    }
                }
                let id = |i: usize, j: usize| j * (n + 1) + i;
                for j in 0..n {
                    for i in 0..n {
                        let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                        mesh.elements.push(triangle(&mesh.vertices, [v00, v10, v11])?);
                        mesh.elements.push(triangle(&mesh.vertices, [v00, v11, v01])?);
                    }
                }
            }
        }
        Ok(mesh)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> &[(f64, f64)] {
        &self.extent
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i][..self.dimension]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Vertex indices of element `e`.
    pub fn element_vertices(&self, e: usize) -> &[usize] {
        &self.elements[e].vertices[..self.dimension + 1]
    }

    pub fn centroid(&self, e: usize) -> &[f64] {
        &self.elements[e].centroid[..self.dimension]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| !self.boundary[i]).collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }

    /// Measure of the box the mesh was built on.
    pub fn domain_measure(&self) -> f64 {
        self.extent.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Vertex coordinates mapped to the unit box.
    pub fn reference_coordinates(&self, i: usize) -> [f64; 2] {
        let mut xi = [0.0; 2];
        for (k, &(lo, hi)) in self.extent.iter().enumerate() {
            xi[k] = (self.vertices[i][k] - lo) / (hi - lo);
        }
        xi
    }

    /// Vertex table as CSV: `index,x[,y],boundary`.
    pub fn vertices_csv(&self) -> String {
        let mut out = String::from(if self.dimension == 1 { "index,x,boundary\n" } else { "index,x,y,boundary\n" });
        for i in 0..self.vertices.len() {
            let coords: Vec<String> = self.vertex(i).iter().map(|c| format!("{c:.17e}")).collect();
            let _ = writeln!(out, "{},{},{}", i, coords.join(","), u8::from(self.boundary[i]));
        }
        out
    }

    /// Element table as CSV: `index,v0,v1[,v2],measure`.
    pub fn elements_csv(&self) -> String {
        let mut out = String::from(if self.dimension == 1 {
            "index,v0,v1,measure\n"
        } else {
            "index,v0,v1,v2,measure\n"
        });
        for (e, el) in self.elements.iter().enumerate() {
            let vs: Vec<String> = self.element_vertices(e).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{},{:.17e}", e, vs.join(","), el.measure);
        }
        out
    }
}

fn segment(vertices: &[[f64; 2]], a: usize, b: usize) -> Result<Element> {
    let h = vertices[b][0] - vertices[a][0];
    if h <= 0.0 {
        return Err(Error::InvalidMesh(format!("segment {a}-{b} has non-positive length")));
    }
    Ok(Element {
        vertices: [a, b, usize::MAX],
        measure: h,
        centroid: [0.5 * (vertices[a][0] + vertices[b][0]), 0.0],
        grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
    })
}

fn triangle(vertices: &[[f64; 2]], v: [usize; 3]) -> Result<Element> {
    let [p0, p1, p2] = [vertices[v[0]], vertices[v[1]], vertices[v[2]]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    if det <= 0.0 {
        return Err(Error::InvalidMesh(format!("triangle {v:?} has non-positive area")));
    }
    let grads = [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ];
    Ok(Element {
        vertices: v,
        measure: 0.5 * det,
        centroid: [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0],
        grads,
    })
}

/// A continuous coefficient field on the closed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `offset + slope · x`
    Affine { offset: f64, slope: Vec<f64> },
    /// `offset + amplitude · sin(wavenumber · x)`
    Sinusoidal { offset: f64, amplitude: f64, wavenumber: Vec<f64> },
    /// Smooth nonnegative bump of height `amplitude`, supported on the box
    /// `[lo, hi]` and zero outside it.
    Bump { amplitude: f64, lo: Vec<f64>, hi: Vec<f64> },
}

impl FieldSpec {
    pub fn constant(value: f64) -> FieldSpec {
        FieldSpec::Constant { value }
    }

    /// Builds a field from its kind name and flat parameter list, the form
    /// used by configuration files.
    ///
    /// | kind       | params                                  |
    /// |------------|-----------------------------------------|
    /// | constant   | `value`                                 |
    /// | affine     | `offset, slope_1[, slope_2]`            |
    /// | sinusoidal | `offset, amplitude, k_1[, k_2]`         |
    /// | bump       | `amplitude, lo_1, hi_1[, lo_2, hi_2]`   |
    pub fn from_params(kind: &str, params: &[f64], dimension: usize) -> Result<FieldSpec> {
        let bad = |expected: usize| {
            Error::InvalidField(format!(
                "{kind} field in {dimension}D takes {expected} parameters, got {}",
                params.len()
            ))
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidField(format!("{kind} field has non-finite parameters")));
        }
        let field = match kind {
            "constant" => {
                if params.len() != 1 {
                    return Err(bad(1));
                }
                FieldSpec::Constant { value: params[0] }
            }
            "affine" => {
                if params.len() != 1 + dimension {
                    return Err(bad(1 + dimension));
                }
                FieldSpec::Affine { offset: params[0], slope: params[1..].to_vec() }
            }
            "sinusoidal" => {
                if params.len() != 2 + dimension {
                    return Err(bad(2 + dimension));
                }
                FieldSpec::Sinusoidal {
                    offset: params[0],
                    amplitude: params[1],
                    wavenumber: params[2..].to_vec(),
                }
            }
            "bump" => {
                if params.len() != 1 + 2 * dimension {
                    return Err(bad(1 + 2 * dimension));
                }
                let lo: Vec<f64> = (0..dimension).map(|k| params[1 + 2 * k]).collect();
                let hi: Vec<f64> = (0..dimension).map(|k| params[2 + 2 * k]).collect();
                if params[0] < 0.0 || lo.iter().zip(&hi).any(|(l, h)| h <= l) {
                    return Err(Error::InvalidField(
                        "bump needs nonnegative amplitude and lo < hi on every axis".into(),
                    ));
                }
                FieldSpec::Bump { amplitude: params[0], lo, hi }
            }
            other => return Err(Error::InvalidField(format!("unknown field kind {other:?}"))),
        };
        Ok(field)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FieldSpec::Constant { .. } => "constant",
            FieldSpec::Affine { .. } => "affine",
            FieldSpec::Sinusoidal { .. } => "sinusoidal",
            FieldSpec::Bump { .. } => "bump",
        }
    }

    /// Inverse of [`FieldSpec::from_params`].
    pub fn params(&self) -> Vec<f64> {
        match self {
            FieldSpec::Constant { value } => vec![*value],
            FieldSpec::Affine { offset, slope } => std::iter::once(*offset).chain(slope.iter().copied()).collect(),
            FieldSpec::Sinusoidal { offset, amplitude, wavenumber } => {
                [*offset, *amplitude].into_iter().chain(wavenumber.iter().copied()).collect()
            }
            FieldSpec::Bump { amplitude, lo, hi } => {
                let mut p = vec![*amplitude];
                for (l, h) in lo.iter().zip(hi) {
                    p.push(*l);
                    p.push(*h);
                }
                p
            }
        }
    }

    /// Number of spatial axes the parameters were built for (`None` for constants).
    fn axes(&self) -> Option<usize> {
        match self {
            FieldSpec::Constant { .. } => None,
            FieldSpec::Affine { slope, .. } => Some(slope.len()),
            FieldSpec::Sinusoidal { wavenumber, .. } => Some(wavenumber.len()),
            FieldSpec::Bump { lo, .. } => Some(lo.len()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Affine { offset, slope } => offset + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>(),
            FieldSpec::Sinusoidal { offset, amplitude, wavenumber } => {
                let phase: f64 = wavenumber.iter().zip(x).map(|(k, xi)| k * xi).sum();
                offset + amplitude * phase.sin()
            }
            FieldSpec::Bump { amplitude, lo, hi } => {
                let mut value = *amplitude;
                for ((l, h), xi) in lo.iter().zip(hi).zip(x) {
                    let s = (2.0 * xi - l - h) / (h - l);
                    if s.abs() >= 1.0 {
                        return 0.0;
                    }
                    value *= (1.0 - 1.0 / (1.0 - s * s)).exp();
                }
                value
            }
        }
    }

    /// Whether the field is constant, so exponent-dependent sums can be grouped.
    pub fn is_constant(&self) -> bool {
        matches!(self, FieldSpec::Constant { .. })
    }
}

/// Sample extrema of the exponents over element centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentExtrema {
    pub p_minus: f64,
    pub p_plus: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
}

/// Field values sampled once per element centroid; every quadrature in the
/// crate reads from here.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSamples {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub delta: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct ProblemFields {
    mesh: Arc<Mesh>,
    p: FieldSpec,
    q: FieldSpec,
    delta: FieldSpec,
    a: FieldSpec,
    b: FieldSpec,
    samples: CentroidSamples,
    extrema: ExponentExtrema,
}

/// Mesh, exponent fields `p, q, δ`, weights `a, b`, and the parameter `λ`.
///
/// Cloning is cheap; [`ProblemData::with_lambda`] shares everything except `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    fields: Arc<ProblemFields>,
    lambda: f64,
}

impl ProblemData {
    /// `lambda = 0` is accepted as the degenerate problem without singular
    /// term; negative or non-finite values are rejected.
    pub fn new(
        mesh: Arc<Mesh>,
        p: FieldSpec,
        q: FieldSpec,
        delta: FieldSpec,
        a: FieldSpec,
        b: FieldSpec,
        lambda: f64,
    ) -> Result<ProblemData> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidProblem(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let dim = mesh.dimension();
        for (name, f) in [("p", &p), ("q", &q), ("delta", &delta), ("a", &a), ("b", &b)] {
            if let Some(axes) = f.axes() {
                if axes != dim {
                    return Err(Error::InvalidField(format!("field {name} has {axes} axes, mesh has {dim}")));
                }
            }
        }
        let sample = |f: &FieldSpec| (0..mesh.num_elements()).map(|e| f.eval(mesh.centroid(e))).collect::<Vec<_>>();
        let samples = CentroidSamples {
            p: sample(&p),
            q: sample(&q),
            delta: sample(&delta),
            a: sample(&a),
            b: sample(&b),
        };
        for (name, vals) in [
            ("p", &samples.p),
            ("q", &samples.q),
            ("delta", &samples.delta),
            ("a", &samples.a),
            ("b", &samples.b),
        ] {
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidField(format!("field {name} is not finite on the mesh")));
            }
        }
        let (p_minus, p_plus) = min_max(&samples.p);
        let (q_minus, q_plus) = min_max(&samples.q);
        let (delta_minus, delta_plus) = min_max(&samples.delta);
        let extrema = ExponentExtrema { p_minus, p_plus, q_minus, q_plus, delta_minus, delta_plus };
        Ok(ProblemData {
            fields: Arc::new(ProblemFields { mesh, p, q, delta, a, b, samples, extrema }),
            lambda,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<ProblemData> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidProblem(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(ProblemData { fields: Arc::clone(&self.fields), lambda })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.fields.mesh
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> &FieldSpec {
        &self.fields.p
    }

    pub fn q(&self) -> &FieldSpec {
        &self.fields.q
    }

    pub fn delta(&self) -> &FieldSpec {
        &self.fields.delta
    }

    pub fn a(&self) -> &FieldSpec {
        &self.fields.a
    }

    pub fn b(&self) -> &FieldSpec {
        &self.fields.b
    }

    pub fn samples(&self) -> &CentroidSamples {
        &self.fields.samples
    }

    pub fn extrema(&self) -> ExponentExtrema {
        self.fields.extrema
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Sobolev conjugate exponent `N p / (N - p)`, infinite once `p >= N`.
pub fn sobolev_conjugate(p: f64, dimension: usize) -> f64 {
    let n = dimension as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Element index for pointwise clauses; `None` for clauses on extrema.
    pub element: Option<usize>,
    pub location: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub hypothesis: String,
    pub clause: String,
    pub passed: bool,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub passed: bool,
    pub clauses: Vec<ClauseResult>,
}

impl HypothesisReport {
    pub fn into_result(self) -> Result<HypothesisReport> {
        match self.clauses.iter().find(|c| !c.passed) {
            None => Ok(self),
            Some(c) => {
                let v = c.first_violation.clone().unwrap_or(Violation {
                    element: None,
                    location: Vec::new(),
                    detail: String::new(),
                });
                Err(Error::HypothesisViolation {
                    clause: format!("({}) {}", c.hypothesis, c.clause),
                    location: v.location,
                    detail: v.detail,
                })
            }
        }
    }
}

/// Checks (A₀) at every element centroid, (A₁) on the sampled extrema, and
/// the sign conditions on the weights (at vertices and centroids).
pub fn validate_hypotheses(data: &ProblemData) -> HypothesisReport {
    let mesh = data.mesh();
    let s = data.samples();
    let dim = mesh.dimension();
    let mut clauses = Vec::new();

    let mut pointwise = |hypothesis: &str, clause: &str, check: &dyn Fn(usize) -> Option<String>| {
        let first = (0..mesh.num_elements()).find_map(|e| {
            check(e).map(|detail| Violation {
                element: Some(e),
                location: mesh.centroid(e).to_vec(),
                detail,
            })
        });
        clauses.push(ClauseResult {
            hypothesis: hypothesis.into(),
            clause: clause.into(),
            passed: first.is_none(),
            first_violation: first,
        });
    };

    pointwise("A0", "0 < 1-delta(x)", &|e| {
        let v = 1.0 - s.delta[e];
        (v <= 0.0).then(|| format!("1-delta = {v}"))
    });
    pointwise("A0", "1-delta(x) < p(x)", &|e| {
        (1.0 - s.delta[e] >= s.p[e]).then(|| format!("1-delta = {}, p = {}", 1.0 - s.delta[e], s.p[e]))
    });
    pointwise("A0", "p(x) < q(x)", &|e| (s.p[e] >= s.q[e]).then(|| format!("p = {}, q = {}", s.p[e], s.q[e])));
    pointwise("A0", "q(x) < p*(x)", &|e| {
        let ps = sobolev_conjugate(s.p[e], dim);
        (s.q[e] >= ps).then(|| format!("q = {}, p* = {}", s.q[e], ps))
    });

    let x = data.extrema();
    let mut extrema_clause = |clause: &str, ok: bool, detail: String| {
        clauses.push(ClauseResult {
            hypothesis: "A1".into(),
            clause: clause.into(),
            passed: ok,
            first_violation: (!ok).then(|| Violation { element: None, location: Vec::new(), detail }),
        });
    };
    extrema_clause(
        "0 < 1-delta^-",
        1.0 - x.delta_minus > 0.0,
        format!("1-delta^- = {}", 1.0 - x.delta_minus),
    );
    extrema_clause(
        "1-delta^+ < p^-",
        1.0 - x.delta_plus < x.p_minus,
        format!("1-delta^+ = {}, p^- = {}", 1.0 - x.delta_plus, x.p_minus),
    );
    extrema_clause("p^+ < q^-", x.p_plus < x.q_minus, format!("p^+ = {}, q^- = {}", x.p_plus, x.q_minus));

    for (name, field, samples) in [("a", data.a(), &s.a), ("b", data.b(), &s.b)] {
        let negative = (0..mesh.num_vertices())
            .map(|i| (mesh.vertex(i).to_vec(), field.eval(mesh.vertex(i))))
            .chain((0..mesh.num_elements()).map(|e| (mesh.centroid(e).to_vec(), samples[e])))
            .find(|(_, v)| *v < 0.0);
        clauses.push(ClauseResult {
            hypothesis: "weights".into(),
            clause: format!("{name}(x) >= 0"),
            passed: negative.is_none(),
            first_violation: negative.map(|(location, v)| Violation {
                element: None,
                location,
                detail: format!("{name} = {v}"),
            }),
        });
        let positive = samples.iter().any(|&v| v > 0.0);
        clauses.push(ClauseResult {
            hypothesis: "weights".into(),
            clause: format!("{name}(x) > 0 somewhere"),
            passed: positive,
            first_violation: (!positive).then(|| Violation {
                element: None,
                location: Vec::new(),
                detail: format!("{name} vanishes at every centroid"),
            }),
        });
    }

    HypothesisReport { passed: clauses.iter().all(|c| c.passed), clauses }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::build(1, &[(0.0, 1.0)], n).unwrap())
    }

    fn data(p: FieldSpec, q: FieldSpec, delta: f64) -> ProblemData {
        ProblemData::new(
            line(8),
            p,
            q,
            FieldSpec::constant(delta),
            FieldSpec::constant(1.0),
            FieldSpec::constant(1.0),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn interval_mesh_counts() {
        let m = Mesh::build(1, &[(0.0, 1.0)], 4).unwrap();
        assert_eq!(m.num_vertices(), 5);
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.boundary_vertices(), vec![0, 4]);
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_mesh_counts() {
        let m = Mesh::build(2, &[(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.boundary_vertices().len(), 8);
        assert_eq!(m.interior_vertices(), vec![4]);
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
        assert!(m.elements().iter().all(|e| e.measure > 0.0));
    }

    #[test]
    fn rejects_bad_mesh_input() {
        assert!(matches!(Mesh::build(1, &[(0.0, 1.0)], 1), Err(Error::InvalidMesh(_))));
        assert!(matches!(Mesh::build(1, &[(1.0, 1.0)], 4), Err(Error::InvalidMesh(_))));
        assert!(matches!(Mesh::build(3, &[(0.0, 1.0); 3], 4), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn refinement_preserves_measure() {
        for (dim, ext) in [(1, vec![(-1.0, 2.5)]), (2, vec![(0.0, 2.0), (-0.5, 0.25)])] {
            let mut n = 3;
            let coarse = Mesh::build(dim, &ext, n).unwrap().total_measure();
            for _ in 0..4 {
                n *= 2;
                let fine = Mesh::build(dim, &ext, n).unwrap().total_measure();
                assert!((fine - coarse).abs() <= 1e-12 * coarse);
            }
        }
    }

    #[test]
    fn hat_gradients_sum_to_zero_and_reproduce_linears() {
        let m = Mesh::build(2, &[(0.0, 1.0), (0.0, 2.0)], 3).unwrap();
        for (e, el) in m.elements().iter().enumerate() {
            let vs = m.element_vertices(e);
            let mut gx = [0.0; 2];
            let mut g1 = [0.0; 2];
            for (k, &v) in vs.iter().enumerate() {
                let x = m.vertex(v)[0];
                for d in 0..2 {
                    gx[d] += x * el.grads[k][d];
                    g1[d] += el.grads[k][d];
                }
            }
            assert!((gx[0] - 1.0).abs() < 1e-12 && gx[1].abs() < 1e-12);
            assert!(g1[0].abs() < 1e-12 && g1[1].abs() < 1e-12);
        }
    }

    #[test]
    fn field_evaluation() {
        assert_eq!(FieldSpec::constant(2.0).eval(&[0.3]), 2.0);
        let aff = FieldSpec::from_params("affine", &[2.0, 1.0], 1).unwrap();
        assert!((aff.eval(&[0.5]) - 2.5).abs() < 1e-15);
        let bump = FieldSpec::from_params("bump", &[1.0, 0.25, 0.75], 1).unwrap();
        assert_eq!(bump.eval(&[0.1]), 0.0);
        assert_eq!(bump.eval(&[0.75]), 0.0);
        assert!((bump.eval(&[0.5]) - 1.0).abs() < 1e-15);
        assert!(bump.eval(&[0.3]) > 0.0);
        let sin = FieldSpec::from_params("sinusoidal", &[1.0, 0.5, std::f64::consts::PI], 1).unwrap();
        assert!((sin.eval(&[0.5]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn field_params_round_trip() {
        for (kind, params, dim) in [
            ("constant", vec![3.0], 1),
            ("affine", vec![2.0, 0.5, -0.25], 2),
            ("sinusoidal", vec![1.0, 0.1, 3.0], 1),
            ("bump", vec![2.0, 0.1, 0.9, 0.2, 0.8], 2),
        ] {
            let f = FieldSpec::from_params(kind, &params, dim).unwrap();
            assert_eq!(f.kind(), kind);
            assert_eq!(f.params(), params);
        }
        assert!(FieldSpec::from_params("affine", &[1.0], 1).is_err());
        assert!(FieldSpec::from_params("spline", &[1.0], 1).is_err());
    }

    #[test]
    fn hypotheses_pass_for_reference_exponents() {
        let d = data(FieldSpec::constant(2.0), FieldSpec::constant(4.0), 0.5);
        let r = validate_hypotheses(&d);
        assert!(r.passed, "{r:?}");
        assert_eq!(sobolev_conjugate(2.0, 1), f64::INFINITY);
    }

    #[test]
    fn hypotheses_flag_p_above_q() {
        let d = data(FieldSpec::constant(4.0), FieldSpec::constant(3.0), 0.5);
        let r = validate_hypotheses(&d);
        assert!(!r.passed);
        let failed: Vec<_> = r.clauses.iter().filter(|c| !c.passed).map(|c| c.clause.as_str()).collect();
        assert!(failed.contains(&"p(x) < q(x)"));
        assert_eq!(r.clauses[2].first_violation.as_ref().unwrap().element, Some(0));
        match r.into_result() {
            Err(Error::HypothesisViolation { clause, .. }) => assert!(clause.contains("p(x) < q(x)")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hypotheses_flag_delta_above_one() {
        let d = data(FieldSpec::constant(2.0), FieldSpec::constant(4.0), 1.2);
        let r = validate_hypotheses(&d);
        let first_failed = r.clauses.iter().find(|c| !c.passed).unwrap();
        assert_eq!(first_failed.clause, "0 < 1-delta(x)");
    }

    #[test]
    fn hypotheses_flag_supercritical_q_in_2d() {
        let mesh = Arc::new(Mesh::build(2, &[(0.0, 1.0), (0.0, 1.0)], 4).unwrap());
        let d = ProblemData::new(
            mesh,
            FieldSpec::constant(1.5),
            FieldSpec::constant(7.0),
            FieldSpec::constant(0.5),
            FieldSpec::constant(1.0),
            FieldSpec::constant(1.0),
            0.1,
        )
        .unwrap();
        let r = validate_hypotheses(&d);
        assert!(r.clauses.iter().any(|c| c.clause == "q(x) < p*(x)" && !c.passed));
    }

    #[test]
    fn validation_is_pure() {
        let d = data(FieldSpec::from_params("affine", &[2.0, 1.0], 1).unwrap(), FieldSpec::constant(4.0), 0.5);
        assert_eq!(validate_hypotheses(&d), validate_hypotheses(&d.clone()));
    }

    #[test]
    fn extrema_move_toward_affine_endpoints() {
        let p = FieldSpec::from_params("affine", &[2.0, 1.0], 1).unwrap();
        let mut prev: Option<ExponentExtrema> = None;
        for n in [4, 8, 16, 32] {
            let d = ProblemData::new(
                line(n),
                p.clone(),
                FieldSpec::constant(4.0),
                FieldSpec::constant(0.5),
                FieldSpec::constant(1.0),
                FieldSpec::constant(1.0),
                0.1,
            )
            .unwrap();
            let x = d.extrema();
            assert!(x.p_minus > 2.0 && x.p_plus < 3.0);
            if let Some(prev) = prev {
                assert!(x.p_minus < prev.p_minus && x.p_plus > prev.p_plus);
            }
            prev = Some(x);
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        let d = data(FieldSpec::constant(2.0), FieldSpec::constant(4.0), 0.5);
        assert!(d.with_lambda(-1.0).is_err());
        assert_eq!(d.with_lambda(0.0).unwrap().lambda(), 0.0);
    }

    #[test]
    fn mesh_csv_has_headers() {
        let m = Mesh::build(1, &[(0.0, 1.0)], 2).unwrap();
        assert!(m.vertices_csv().starts_with("index,x,boundary\n0,"));
        assert_eq!(m.elements_csv().lines().count(), 3);
    }
}
