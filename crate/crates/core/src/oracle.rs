//! Brute-force multi-start search for the branch infima on small meshes,
//! used to cross-check the main solver.
//!
//! Every candidate is a nonnegative vector of interior nodal values `w`; its
//! branch energy is `E(t w)` at the branch's fiber root `t`. Starts are
//! improved by coordinate descent with three-point parabolic steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::ProblemData;
use crate::energy::Fiber;
use crate::error::{Error, Result};
use crate::nehari::{branch_root, Branch, FiberScan};
use crate::solver::SCHEMA_VERSION;
use crate::vexp::{self, GridFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub starts: usize,
    pub seed: u64,
    /// Sweeps spent on every start before ranking.
    pub coarse_sweeps: usize,
    /// Number of best starts refined to convergence.
    pub polish: usize,
    pub max_polish_sweeps: usize,
    pub fiber: FiberScan,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            starts: 200,
            seed: 11,
            coarse_sweeps: 30,
            polish: 4,
            max_polish_sweeps: 4000,
            fiber: FiberScan { t_min: 1e-6, t_max: 1e6, samples: 160 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBranch {
    pub energy: f64,
    /// Nodal values of the best point (on the branch).
    pub values: Vec<f64>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub starts: usize,
    pub unknowns: usize,
    pub plus: Option<OracleBranch>,
    pub minus: Option<OracleBranch>,
}

impl OracleReport {
    pub fn energies(&self) -> (Option<f64>, Option<f64>) {
        (self.plus.as_ref().map(|b| b.energy), self.minus.as_ref().map(|b| b.energy))
    }
}

struct Objective<'a> {
    data: &'a ProblemData,
    interior: Vec<usize>,
    branch: Branch,
    scan: FiberScan,
}

impl Objective<'_> {
    fn direction(&self, w: &[f64]) -> GridFunction {
        let mut values = vec![0.0; self.data.mesh().num_vertices()];
        for (k, &i) in self.interior.iter().enumerate() {
            values[i] = w[k];
        }
        GridFunction::new(self.data.mesh().clone(), values).expect("interior values are finite")
    }

    /// Branch energy of the ray through `w`, with the root scaling; `+∞` if
    /// the ray misses the branch.
    fn eval(&self, w: &[f64]) -> (f64, f64) {
        if w.iter().all(|&v| v == 0.0) {
            return (f64::INFINITY, 0.0);
        }
        let fiber = Fiber::new(&self.direction(w), self.data);
        let roots = fiber.critical_points(self.scan.t_min, self.scan.t_max, self.scan.samples);
        match branch_root(&roots, self.branch) {
            Some(r) => (fiber.phi(r.t), r.t),
            None => (f64::INFINITY, 0.0),
        }
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.eval(w).0
    }
}

fn normalize(w: &mut [f64]) {
    let m = w.iter().fold(0.0f64, |a, &b| a.max(b));
    if m > 0.0 {
        w.iter_mut().for_each(|v| *v /= m);
    }
}

/// Vertex of the parabola through three points, if it opens upward.
fn parabola_min(x: [f64; 3], f: [f64; 3]) -> Option<f64> {
    let d1 = (f[1] - f[0]) / (x[1] - x[0]);
    let d2 = (f[2] - f[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if !(curv > 0.0) {
        return None;
    }
    Some(0.5 * (x[0] + x[1]) - d1 / (2.0 * curv))
}

const MIN_RADIUS: f64 = 1e-7;

/// One sweep over all coordinates. Returns the new objective value.
fn sweep(obj: &Objective, w: &mut [f64], radius: &mut [f64], mut f: f64) -> f64 {
    for i in 0..w.len() {
        let x = w[i];
        let r = radius[i];
        let mut best = (f, x);
        let lo = (x - r).max(0.0);
        let hi = x + r;
        let probe = |v: f64, w: &mut [f64]| {
            w[i] = v;
            let fv = obj.value(w);
            w[i] = x;
            fv
        };
        let f_lo = if lo < x { probe(lo, w) } else { f };
        let f_hi = probe(hi, w);
        for (v, fv) in [(lo, f_lo), (hi, f_hi)] {
            if fv < best.0 {
                best = (fv, v);
            }
        }
        if lo < x && f.is_finite() && f_lo.is_finite() && f_hi.is_finite() {
            if let Some(v) = parabola_min([lo, x, hi], [f_lo, f, f_hi]) {
                let v = v.clamp((x - 4.0 * r).max(0.0), x + 4.0 * r);
                if v != x && v != lo && v != hi {
                    let fv = probe(v, w);
                    if fv < best.0 {
                        best = (fv, v);
                    }
                }
            }
        }
        let moved = (best.1 - x).abs();
        w[i] = best.1;
        f = best.0;
        radius[i] = if moved > 0.0 { moved.max(0.25 * r) } else { 0.25 * r }.clamp(MIN_RADIUS, 1.0);
    }
    f
}

/// Runs sweeps until the decrease stalls or `max_sweeps` is reached.
fn descend(obj: &Objective, w: &mut [f64], radius: &mut [f64], max_sweeps: usize) -> (f64, usize) {
    let mut f = obj.value(w);
    let mut quiet = 0;
    for k in 0..max_sweeps {
        let before = f;
        f = sweep(obj, w, radius, f);
        let m = w.iter().fold(0.0f64, |a, &b| a.max(b));
        if m > 0.0 {
            normalize(w);
            radius.iter_mut().for_each(|r| *r = (*r / m).clamp(MIN_RADIUS, 1.0));
            f = obj.value(w);
        }
        let settled = radius.iter().all(|&r| r <= 4.0 * MIN_RADIUS);
        if (before - f).abs() <= 1e-15 * f.abs().max(1e-300) && settled {
            quiet += 1;
            if quiet >= 2 {
                return (f, k + 1);
            }
        } else {
            quiet = 0;
        }
    }
    (f, max_sweeps)
}

fn random_start(obj: &Objective, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mesh = obj.data.mesh();
    let mut w: Vec<f64> = if k.is_multiple_of(2) {
        let d = vexp::random_direction(mesh, rng);
        obj.interior.iter().map(|&i| d.values()[i]).collect()
    } else {
        obj.interior.iter().map(|_| rng.gen_range(0.0..1.0)).collect()
    };
    normalize(&mut w);
    w
}

fn search_branch(data: &ProblemData, settings: &OracleSettings, branch: Branch) -> Option<OracleBranch> {
    let obj = Objective { data, interior: data.mesh().interior_vertices(), branch, scan: settings.fiber };
    let n = obj.interior.len();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let starts: Vec<Vec<f64>> = (0..settings.starts).map(|k| random_start(&obj, k, &mut rng)).collect();
    let mut coarse: Vec<(f64, usize, Vec<f64>, Vec<f64>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, mut w)| {
            let mut radius = vec![0.25; n];
            let (f, _) = descend(&obj, &mut w, &mut radius, settings.coarse_sweeps);
            (f, k, w, radius)
        })
        .collect();
    coarse.retain(|c| c.0.is_finite());
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    coarse.truncate(settings.polish.max(1));
    let polished: Vec<(f64, usize, Vec<f64>, usize)> = coarse
        .into_par_iter()
        .map(|(_, k, mut w, mut radius)| {
            let (f, sweeps) = descend(&obj, &mut w, &mut radius, settings.max_polish_sweeps);
            (f, k, w, sweeps)
        })
        .collect();
    let (f, _, w, sweeps) = polished
        .into_iter()
        .filter(|p| p.0.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
    let (_, t) = obj.eval(&w);
    let point = obj.direction(&w).scaled(t);
    Some(OracleBranch { energy: f, values: point.into_values(), sweeps })
}

/// Best energies found on `N⁺` and `N⁻` with default settings.
pub fn oracle_global_scan(data: &ProblemData, resolution_cap: usize) -> Result<OracleReport> {
    oracle_global_scan_with(data, resolution_cap, &OracleSettings::default())
}

pub fn oracle_global_scan_with(data: &ProblemData, resolution_cap: usize, settings: &OracleSettings) -> Result<OracleReport> {
    let vertices = data.mesh().num_vertices();
    if vertices > resolution_cap {
        return Err(Error::InvalidProblem(format!(
            "oracle mesh has {vertices} vertices, above the cap of {resolution_cap}"
        )));
    }
    if settings.starts == 0 {
        return Err(Error::InvalidProblem("oracle needs at least one start".into()));
    }
    Ok(OracleReport {
        schema_version: SCHEMA_VERSION,
        starts: settings.starts,
        unknowns: data.mesh().interior_vertices().len(),
        plus: search_branch(data, settings, Branch::Plus),
        minus: search_branch(data, settings, Branch::Minus),
    })
}
