//! Command-line front end: subcommand dispatch, output files, exit codes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 hypothesis violation. Every error is also written to stderr as one
//! JSON object.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{LambdaChoice, RunConfig};
use crate::domain::{validate_hypotheses, ProblemData};
use crate::energy::sample_fiber;
use crate::error::{Error, Result};
use crate::nehari::{lambda_report, LambdaReport};
use crate::oracle::oracle_global_scan_with;
use crate::solver::{iterate_floor, solve_both_with, verify_solution, SCHEMA_VERSION};
use crate::vexp::{self, GridFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

/// Environment variable holding the log filter (overrides `output.verbosity`).
pub const LOG_ENV: &str = "NEHARI_LOG";

#[derive(Debug, Parser)]
#[command(name = "nehari", about = "Two positive solutions of a singular p(x)-Laplacian problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize on both branches and verify the two solutions.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the fiber map of a direction.
    Fiber {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        t_min: f64,
        #[arg(long, default_value_t = 1e3)]
        t_max: f64,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// Direction as a solution CSV; defaults to the sine product.
        #[arg(long)]
        direction: Option<PathBuf>,
    },
    /// Estimate the λ threshold by scanning and by the closed-form bounds.
    ScanLambda {
        #[command(flatten)]
        common: Common,
    },
    /// Modular and norms of a function.
    Norm {
        #[command(flatten)]
        common: Common,
        /// Function as a CSV (trace kept as given); defaults to the sine product.
        #[arg(long)]
        function: Option<PathBuf>,
    },
    /// Check positivity, weak residual and manifold membership of a solution.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: PathBuf,
        /// λ of the solution; otherwise taken from the configuration.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Brute-force branch infima on a small mesh.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidMesh(_) | Error::InvalidField(_) | Error::InvalidProblem(_) => {
            EXIT_CONFIG
        }
        Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
        Error::HypothesisViolation { .. } => EXIT_HYPOTHESIS,
        _ => EXIT_SOLVER,
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    let mut detail = json!({
        "kind": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::HypothesisViolation { clause, location, detail: d } => {
            detail["clause"] = json!(clause);
            detail["location"] = json!(location);
            detail["detail"] = json!(d);
        }
        Error::Config { line, .. } => detail["line"] = json!(line),
        _ => {}
    }
    json!({ "schema_version": SCHEMA_VERSION, "error": detail })
}

fn report_error(e: &Error) -> i32 {
    eprintln!("{}", error_json(e));
    exit_code(e)
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            eprintln!(
                "{}",
                json!({ "schema_version": SCHEMA_VERSION,
                        "error": { "kind": "Usage", "message": msg.trim(), "exit_code": EXIT_CONFIG } })
            );
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

struct Context {
    config: RunConfig,
    out: PathBuf,
}

fn load(common: &Common) -> Result<Context> {
    let mut config = RunConfig::load(&common.config).map_err(|e| match e {
        Error::Io(io) => Error::Config { line: 0, message: format!("{}: {io}", common.config.display()) },
        other => other,
    })?;
    if let Some(seed) = common.seed {
        config.solver.seed = seed;
        config.scan.seed = seed;
        config.oracle.seed = seed;
    }
    if let Some(r) = common.resolution {
        config.problem.resolution = r;
    }
    let filter = std::env::var(LOG_ENV).unwrap_or_else(|_| config.output.verbosity.clone());
    let _ = env_logger::Builder::new().parse_filters(&filter).target(env_logger::Target::Stderr).try_init();
    let out = common.out.clone().unwrap_or_else(|| config.output.dir.clone());
    std::fs::create_dir_all(&out)?;
    Ok(Context { config, out })
}

impl Context {
    /// Problem data at a provisional `λ`, checked against the hypotheses.
    fn problem(&self, lambda: f64) -> Result<ProblemData> {
        let data = self.config.problem_data(lambda)?;
        validate_hypotheses(&data).into_result()?;
        Ok(data)
    }

    /// Resolves `λ`, computing the threshold report when it is needed or wanted.
    fn resolve_lambda(&self, want_report: bool) -> Result<(ProblemData, Option<Result<LambdaReport>>)> {
        match self.config.problem.lambda {
            LambdaChoice::Value(v) => {
                let data = self.problem(v)?;
                let report = want_report.then(|| lambda_report(&data, &self.config.scan.settings()));
                Ok((data, report))
            }
            LambdaChoice::Auto { fraction } => {
                let data = self.problem(0.0)?;
                let report = lambda_report(&data, &self.config.scan.settings())?;
                let data = data.with_lambda(fraction * report.lambda_zero)?;
                Ok((data, Some(Ok(report))))
            }
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.config.output.json {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            self.write(name, &text)?;
        }
        Ok(())
    }

    fn write_csv(&self, name: &str, text: &str) -> Result<()> {
        if self.config.output.csv {
            self.write(name, text)?;
        }
        Ok(())
    }

    fn read_function(&self, data: &ProblemData, path: &Path, zero_trace: bool) -> Result<GridFunction> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { line: 0, message: format!("{}: {e}", path.display()) })?;
        GridFunction::from_csv(data.mesh().clone(), &text, zero_trace)
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Solve { common } => solve(&load(&common)?),
        Command::Fiber { common, t_min, t_max, samples, direction } => {
            fiber(&load(&common)?, t_min, t_max, samples, direction.as_deref())
        }
        Command::ScanLambda { common } => scan(&load(&common)?),
        Command::Norm { common, function } => norm(&load(&common)?, function.as_deref()),
        Command::Verify { common, solution, lambda } => verify(&load(&common)?, &solution, lambda),
        Command::Oracle { common } => oracle(&load(&common)?),
    }
}

fn solve(ctx: &Context) -> Result<i32> {
    let (data, report) = ctx.resolve_lambda(true)?;
    let report = report.expect("requested");
    let cfg = ctx.config.solve_config();
    let result = solve_both_with(&data, &cfg, report)?;
    ctx.write("run.cfg", &ctx.config.to_config_string())?;
    ctx.write_json("report.json", &result)?;
    if let Some(u) = result.u_plus() {
        ctx.write_csv("u_plus.csv", &u.to_csv())?;
    }
    if let Some(u) = result.u_minus() {
        ctx.write_csv("u_minus.csv", &u.to_csv())?;
    }
    ctx.write_csv("vertices.csv", &data.mesh().vertices_csv())?;
    ctx.write_csv("elements.csv", &data.mesh().elements_csv())?;
    let mut trace = String::from("branch,iter,energy,ddphi,step,residual,gradient_norm\n");
    for b in [&result.plus, &result.minus] {
        for r in &b.trace {
            trace.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                b.branch, r.iter, r.energy, r.ddphi, r.step, r.residual, r.gradient_norm
            ));
        }
    }
    ctx.write_csv("trace.csv", &trace)?;
    println!(
        "{}",
        json!({
            "lambda": result.lambda,
            "energy_plus": result.plus.energy,
            "energy_minus": result.minus.energy,
            "success": result.success,
        })
    );
    if result.success {
        Ok(EXIT_OK)
    } else {
        let failed: Vec<_> = [&result.plus, &result.minus]
            .into_iter()
            .filter(|b| !b.ok)
            .map(|b| {
                json!({ "branch": b.branch, "error": b.error,
                        "verification_passed": b.verification.as_ref().map(|v| v.passed) })
            })
            .collect();
        eprintln!(
            "{}",
            json!({ "schema_version": SCHEMA_VERSION,
                    "error": { "kind": "SolveFailed", "message": "at least one branch failed or the solutions coincide",
                               "exit_code": EXIT_SOLVER, "branches": failed,
                               "distinctness": result.distinctness } })
        );
        Ok(EXIT_SOLVER)
    }
}

fn fiber(ctx: &Context, t_min: f64, t_max: f64, samples: usize, direction: Option<&Path>) -> Result<i32> {
    let (data, _) = ctx.resolve_lambda(false)?;
    let u = match direction {
        Some(p) => ctx.read_function(&data, p, true)?,
        None => GridFunction::eigen_surrogate(data.mesh().clone()),
    };
    let profile = sample_fiber(&u, &data, t_min, t_max, samples)?;
    ctx.write_csv("fiber.csv", &profile.to_csv())?;
    ctx.write_csv("critical_points.csv", &profile.critical_csv())?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "lambda": data.lambda(),
        "t_min": t_min,
        "t_max": t_max,
        "samples": samples,
        "critical_points": profile.critical_points,
    });
    ctx.write_json("critical_points.json", &doc)?;
    println!("{}", json!({ "critical_points": profile.critical_points.len() }));
    Ok(EXIT_OK)
}

fn scan(ctx: &Context) -> Result<i32> {
    let data = ctx.problem(0.0)?;
    let report = lambda_report(&data, &ctx.config.scan.settings())?;
    let doc = json!({ "schema_version": SCHEMA_VERSION, "report": report });
    ctx.write_json("lambda_report.json", &doc)?;
    ctx.write_csv("lambda_scan.csv", &report.scan.to_csv())?;
    println!(
        "{}",
        json!({ "scan_threshold": report.scan_threshold, "lambda_zero": report.lambda_zero })
    );
    Ok(EXIT_OK)
}

fn norm(ctx: &Context, function: Option<&Path>) -> Result<i32> {
    let data = ctx.config.problem_data(0.0)?;
    let u = match function {
        Some(p) => ctx.read_function(&data, p, false)?,
        None => GridFunction::eigen_surrogate(data.mesh().clone()),
    };
    let p = &data.samples().p;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "modular": vexp::modular_with(&u, p, false),
        "gradient_modular": vexp::modular_with(&u, p, true),
        "luxemburg_norm": vexp::luxemburg_norm_with(&u, p, false)?,
        "gradient_luxemburg_norm": vexp::luxemburg_norm_with(&u, p, true)?,
        "sobolev_norm": vexp::sobolev_norm_with(&u, p)?,
        "modular_relations": if u.is_zero() { None } else { Some(vexp::check_modular_relations(&u, data.p())?) },
    });
    ctx.write_json("norms.json", &doc)?;
    println!("{doc}");
    Ok(EXIT_OK)
}

fn verify(ctx: &Context, solution: &Path, lambda: Option<f64>) -> Result<i32> {
    let data = match lambda {
        Some(l) => ctx.problem(l)?,
        None => ctx.resolve_lambda(false)?.0,
    };
    let u = ctx.read_function(&data, solution, true)?;
    if !u.is_nonnegative() {
        return Err(Error::InvalidProblem("solution has negative values".into()));
    }
    let cfg = ctx.config.solve_config();
    let v = verify_solution(&u, &data, iterate_floor(&u, cfg.grad_floor), cfg.residual_tol);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "lambda": data.lambda(),
        "energy": crate::energy::energy(&u, &data),
        "verification": v,
    });
    ctx.write_json("verification.json", &doc)?;
    println!("{}", json!({ "passed": v.passed }));
    if v.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "{}",
            json!({ "schema_version": SCHEMA_VERSION,
                    "error": { "kind": "VerificationFailed", "message": "solution failed verification",
                               "exit_code": EXIT_SOLVER, "verification": v } })
        );
        Ok(EXIT_SOLVER)
    }
}

fn oracle(ctx: &Context) -> Result<i32> {
    let (data, _) = ctx.resolve_lambda(false)?;
    let report = oracle_global_scan_with(&data, ctx.config.oracle.vertex_cap, &ctx.config.oracle.settings())?;
    let doc = json!({ "schema_version": SCHEMA_VERSION, "lambda": data.lambda(), "report": report });
    ctx.write_json("oracle.json", &doc)?;
    let (ep, em) = report.energies();
    println!("{}", json!({ "energy_plus": ep, "energy_minus": em }));
    Ok(EXIT_OK)
}
