//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! # reference problem
//! problem.dimension = 1
//! problem.resolution = 64
//! problem.p.kind = constant
//! problem.p.params = 2
//! problem.a.kind = bump
//! problem.a.params = 1, 0.25, 0.75
//! problem.lambda = auto
//! solver.residual_tol = 1e-7
//! ```
//!
//! Unknown or repeated keys are rejected with their line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{FieldSpec, Mesh, ProblemData};
use crate::error::{Error, Result};
use crate::nehari::{lambda_grid, FiberScan, ScanSettings};
use crate::oracle::OracleSettings;
use crate::solver::SolveConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaChoice {
    /// `fraction × λ₀` from the threshold report.
    Auto { fraction: f64 },
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub extent: Vec<(f64, f64)>,
    pub resolution: usize,
    pub p: FieldSpec,
    pub q: FieldSpec,
    pub delta: FieldSpec,
    pub a: FieldSpec,
    pub b: FieldSpec,
    pub lambda: LambdaChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub directions: usize,
    pub seed: u64,
    pub embedding_samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub per_decade: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let s = ScanSettings::default();
        ScanConfig {
            directions: s.directions,
            seed: s.seed,
            embedding_samples: s.embedding_samples,
            lambda_min: 1e-8,
            lambda_max: 1e4,
            per_decade: 4,
        }
    }
}

impl ScanConfig {
    pub fn settings(&self) -> ScanSettings {
        ScanSettings {
            directions: self.directions,
            lambda_grid: lambda_grid(self.lambda_min, self.lambda_max, self.per_decade),
            seed: self.seed,
            embedding_samples: self.embedding_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub starts: usize,
    pub seed: u64,
    pub vertex_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let s = OracleSettings::default();
        OracleConfig { starts: s.starts, seed: s.seed, vertex_cap: 17 }
    }
}

impl OracleConfig {
    pub fn settings(&self) -> OracleSettings {
        OracleSettings { starts: self.starts, seed: self.seed, ..OracleSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub json: bool,
    pub csv: bool,
    pub verbosity: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), json: true, csv: true, verbosity: "warn".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Its `scan` field is replaced by [`RunConfig::scan`] in [`RunConfig::solve_config`].
    pub solver: SolveConfig,
    pub scan: ScanConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

const FIELDS: [&str; 5] = ["p", "q", "delta", "a", "b"];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Entries> {
        let mut map = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got {content:?}") })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config { line, message: "empty key".into() });
            }
            if let Some((first, _)) = map.get(&key) {
                return Err(Error::Config { line, message: format!("{key} repeats line {first}") });
            }
            map.insert(key, (line, value.trim().to_string()));
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::Config { line, message: format!("{key}: cannot parse {v:?}") }),
        }
    }

    fn numbers(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config { line, message: format!("{key}: cannot parse {s:?} as a number") })
            })
            .collect()
    }

    fn field(&mut self, name: &str, dimension: usize) -> Result<FieldSpec> {
        let kind_key = format!("problem.{name}.kind");
        let params_key = format!("problem.{name}.params");
        let (kline, kind) = self.take(&kind_key).ok_or(Error::Config {
            line: 0,
            message: format!("missing {kind_key}"),
        })?;
        let (pline, params) = self.take(&params_key).ok_or(Error::Config {
            line: kline,
            message: format!("missing {params_key}"),
        })?;
        let values = Self::numbers(pline, &params_key, &params)?;
        FieldSpec::from_params(&kind, &values, dimension)
            .map_err(|e| Error::Config { line: pline, message: format!("problem.{name}: {e}") })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut e = Entries::parse(text)?;
        let dimension: usize = e.get("problem.dimension", 1)?;
        if !(1..=2).contains(&dimension) {
            return Err(Error::Config { line: 0, message: format!("problem.dimension must be 1 or 2, got {dimension}") });
        }
        let mut extent = Vec::new();
        for axis in ["x", "y"].iter().take(dimension) {
            let key = format!("problem.extent.{axis}");
            extent.push(match e.take(&key) {
                None => (0.0, 1.0),
                Some((line, v)) => match Entries::numbers(line, &key, &v)?.as_slice() {
                    [lo, hi] => (*lo, *hi),
                    _ => return Err(Error::Config { line, message: format!("{key} needs two numbers") }),
                },
            });
        }
        let resolution = e.get("problem.resolution", 64)?;
        let mut fields = Vec::new();
        for name in FIELDS {
            fields.push(e.field(name, dimension)?);
        }
        let fraction = e.get("problem.lambda_fraction", 0.5)?;
        let lambda = match e.take("problem.lambda") {
            None => LambdaChoice::Auto { fraction },
            Some((_, v)) if v == "auto" => LambdaChoice::Auto { fraction },
            Some((line, v)) => LambdaChoice::Value(
                v.parse().map_err(|_| Error::Config { line, message: format!("problem.lambda: cannot parse {v:?}") })?,
            ),
        };
        let [p, q, delta, a, b]: [FieldSpec; 5] = fields.try_into().expect("five fields");
        let problem = ProblemConfig { dimension, extent, resolution, p, q, delta, a, b, lambda };

        let d = SolveConfig::default();
        let solver = SolveConfig {
            max_iters: e.get("solver.max_iters", d.max_iters)?,
            step0: e.get("solver.step0", d.step0)?,
            armijo_c: e.get("solver.armijo_c", d.armijo_c)?,
            shrink: e.get("solver.shrink", d.shrink)?,
            grad_floor: e.get("solver.grad_floor", d.grad_floor)?,
            energy_tol: e.get("solver.energy_tol", d.energy_tol)?,
            residual_tol: e.get("solver.residual_tol", d.residual_tol)?,
            seed: e.get("solver.seed", d.seed)?,
            fiber: FiberScan {
                t_min: e.get("solver.fiber_t_min", d.fiber.t_min)?,
                t_max: e.get("solver.fiber_t_max", d.fiber.t_max)?,
                samples: e.get("solver.fiber_samples", d.fiber.samples)?,
            },
            scan: d.scan,
        };
        let ds = ScanConfig::default();
        let scan = ScanConfig {
            directions: e.get("scan.directions", ds.directions)?,
            seed: e.get("scan.seed", ds.seed)?,
            embedding_samples: e.get("scan.embedding_samples", ds.embedding_samples)?,
            lambda_min: e.get("scan.lambda_min", ds.lambda_min)?,
            lambda_max: e.get("scan.lambda_max", ds.lambda_max)?,
            per_decade: e.get("scan.per_decade", ds.per_decade)?,
        };
        let dor = OracleConfig::default();
        let oracle = OracleConfig {
            starts: e.get("oracle.starts", dor.starts)?,
            seed: e.get("oracle.seed", dor.seed)?,
            vertex_cap: e.get("oracle.vertex_cap", dor.vertex_cap)?,
        };
        let dout = OutputConfig::default();
        let formats = e.take("output.formats");
        let (json, csv) = match &formats {
            None => (dout.json, dout.csv),
            Some((line, v)) => {
                let mut j = false;
                let mut c = false;
                for f in v.split(',').map(str::trim) {
                    match f {
                        "json" => j = true,
                        "csv" => c = true,
                        other => {
                            return Err(Error::Config { line: *line, message: format!("output.formats: unknown format {other:?}") })
                        }
                    }
                }
                (j, c)
            }
        };
        let output = OutputConfig {
            dir: e.take("output.dir").map_or(dout.dir, |(_, v)| PathBuf::from(v)),
            json,
            csv,
            verbosity: e.take("output.verbosity").map_or(dout.verbosity, |(_, v)| v),
        };
        if let Some((key, (line, _))) = e.map.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(Error::Config { line, message: format!("unknown key {key}") });
        }
        let cfg = RunConfig { problem, solver, scan, oracle, output };
        cfg.solve_config().validate().map_err(|err| Error::Config { line: 0, message: err.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Solver settings with the scan block applied.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig { scan: self.scan.settings(), ..self.solver.clone() }
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::build(self.problem.dimension, &self.problem.extent, self.problem.resolution)
    }

    /// Problem data with the given `λ`.
    pub fn problem_data(&self, lambda: f64) -> Result<ProblemData> {
        let p = &self.problem;
        ProblemData::new(
            Arc::new(self.mesh()?),
            p.p.clone(),
            p.q.clone(),
            p.delta.clone(),
            p.a.clone(),
            p.b.clone(),
            lambda,
        )
    }

    /// Serializes every key; [`RunConfig::parse`] inverts it exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let p = &self.problem;
        put("problem.dimension", p.dimension.to_string());
        for (axis, (lo, hi)) in ["x", "y"].iter().zip(&p.extent) {
            put(&format!("problem.extent.{axis}"), list(&[*lo, *hi]));
        }
        put("problem.resolution", p.resolution.to_string());
        for (name, f) in FIELDS.iter().zip([&p.p, &p.q, &p.delta, &p.a, &p.b]) {
            put(&format!("problem.{name}.kind"), f.kind().to_string());
            put(&format!("problem.{name}.params"), list(&f.params()));
        }
        match p.lambda {
            LambdaChoice::Auto { fraction } => {
                put("problem.lambda", "auto".into());
                put("problem.lambda_fraction", format!("{fraction:?}"));
            }
            LambdaChoice::Value(v) => put("problem.lambda", format!("{v:?}")),
        }
        let s = &self.solver;
        put("solver.max_iters", s.max_iters.to_string());
        put("solver.step0", format!("{:?}", s.step0));
        put("solver.armijo_c", format!("{:?}", s.armijo_c));
        put("solver.shrink", format!("{:?}", s.shrink));
        put("solver.grad_floor", format!("{:?}", s.grad_floor));
        put("solver.energy_tol", format!("{:?}", s.energy_tol));
        put("solver.residual_tol", format!("{:?}", s.residual_tol));
        put("solver.seed", s.seed.to_string());
        put("solver.fiber_t_min", format!("{:?}", s.fiber.t_min));
        put("solver.fiber_t_max", format!("{:?}", s.fiber.t_max));
        put("solver.fiber_samples", s.fiber.samples.to_string());
        let c = &self.scan;
        put("scan.directions", c.directions.to_string());
        put("scan.seed", c.seed.to_string());
        put("scan.embedding_samples", c.embedding_samples.to_string());
        put("scan.lambda_min", format!("{:?}", c.lambda_min));
        put("scan.lambda_max", format!("{:?}", c.lambda_max));
        put("scan.per_decade", c.per_decade.to_string());
        let o = &self.oracle;
        put("oracle.starts", o.starts.to_string());
        put("oracle.seed", o.seed.to_string());
        put("oracle.vertex_cap", o.vertex_cap.to_string());
        let w = &self.output;
        put("output.dir", w.dir.display().to_string());
        let formats: Vec<&str> = [(w.json, "json"), (w.csv, "csv")].iter().filter(|f| f.0).map(|f| f.1).collect();
        put("output.formats", formats.join(","));
        put("output.verbosity", w.verbosity.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: &str = "\
# reference problem
problem.dimension = 1
problem.resolution = 32
problem.p.kind = constant
problem.p.params = 2
problem.q.kind = constant
problem.q.params = 4
problem.delta.kind = constant
problem.delta.params = 0.5
problem.a.kind = bump
problem.a.params = 1, 0.25, 0.75
problem.b.kind = bump
problem.b.params = 1, 0.25, 0.75   # same as a
";

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::parse(REF).unwrap();
        assert_eq!(c.problem.resolution, 32);
        assert_eq!(c.problem.extent, vec![(0.0, 1.0)]);
        assert_eq!(c.problem.lambda, LambdaChoice::Auto { fraction: 0.5 });
        assert_eq!(c.problem.a, FieldSpec::Bump { amplitude: 1.0, lo: vec![0.25], hi: vec![0.75] });
        assert_eq!(c.solver, SolveConfig::default());
        assert_eq!(c.solve_config().scan, ScanSettings::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::parse(REF).unwrap();
        c.problem.lambda = LambdaChoice::Value(0.012345678901234567);
        c.solver.seed = 99;
        c.output.csv = false;
        let again = RunConfig::parse(&c.to_config_string()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!("{REF}solver.bogus = 1\n");
        match RunConfig::parse(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 14);
                assert!(message.contains("solver.bogus"));
            }
            other => panic!("{other:?}"),
        }
        let text = REF.replace("problem.resolution = 32", "problem.resolution = many");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config { line: 3, .. })));
        let text = REF.replace("problem.a.params = 1, 0.25, 0.75", "problem.a.params = 1, 0.25");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config { line: 11, .. })));
        let text = format!("{REF}problem.dimension = 2\n");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config { line: 14, .. })));
    }

    #[test]
    fn missing_field_is_reported() {
        let text = REF.replace("problem.q.kind = constant\n", "");
        match RunConfig::parse(&text) {
            Err(Error::Config { message, .. }) => assert!(message.contains("problem.q.kind")),
            other => panic!("{other:?}"),
        }
    }
}
