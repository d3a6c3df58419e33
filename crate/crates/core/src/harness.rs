//! Experiment pipeline: a JSON [`ExperimentConfig`] names a problem, a
//! basis method and a sampling plan; [`run_offline`] builds and stores the
//! basis with its build reports and [`run_online_eval`] compares reduced
//! solutions against direct solves, writing `errors.csv`.
//!
//! All CSV output is a function of the config alone: floats are written in
//! shortest round-trip form and timings only go to the log.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{gen_checkerboard_problem, gen_hole_problem, sigma_of_l};
use crate::io;
use crate::krylov;
use crate::linalg;
use crate::offline::{self, CutoffSchedule, Method, ReducedBasis};
use crate::online::{self, ReducedSystem};
use crate::paramsys::{ParameterBox, ParameterVector, ParametricMatrix};

/// Default half-width of the hole translation sweep.
pub const DEFAULT_L_MAX: f64 = 0.3;
/// Default number of sweep points (spacing 0.05 on `[−0.3, 0.3]`).
pub const DEFAULT_L_STEPS: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `N × M` subdomains, box `[1, a]^{NM}`.
    Checkerboard {
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "M")]
        m: usize,
        divisions: usize,
        a: f64,
    },
    /// Translated hole with `|l| < a`; online evaluation sweeps `l` over
    /// `l_steps` equispaced points of `[−l_max, l_max]`.
    Hole {
        divisions: usize,
        a: f64,
        #[serde(default)]
        l_max: Option<f64>,
        #[serde(default)]
        l_steps: Option<usize>,
    },
    /// A matrix-family directory with `b.mtx` and box bounds in `meta.json`.
    External { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    /// Basis order `j`.
    pub order: usize,
    /// Constant cut-off; ignored by the exact method.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Per-step cut-offs `δ₁ … δ_{j−1}`, overriding `delta`.
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    pub sample_count: usize,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    /// Batch CSV of parameter vectors used instead of random samples.
    #[serde(default)]
    pub sigma_file: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&io::read_text(path)?)?;
        // relative paths in a config file are relative to that file
        if let Some(parent) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = parent.join(&*p);
                }
            };
            rebase(&mut cfg.output_dir);
            if let Some(f) = cfg.sigma_file.as_mut() {
                rebase(f);
            }
            if let ProblemSpec::External { dir } = &mut cfg.problem {
                rebase(dir);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!("delta {d} must be positive")));
            }
        }
        if self.method != Method::Exact && self.order > 1 && self.delta.is_none() && self.schedule.is_none() {
            return Err(Error::InvalidArgument(format!("method {} needs `delta` or `schedule`", self.method)));
        }
        if self.method != Method::Exact {
            self.cutoff_schedule()?;
        }
        if let ProblemSpec::Hole { a, l_max, l_steps, .. } = &self.problem {
            let l = l_max.unwrap_or(DEFAULT_L_MAX);
            if !(l >= 0.0 && l < *a) {
                return Err(Error::InvalidArgument(format!("l_max {l} must lie in [0, a={a})")));
            }
            if *l_steps == Some(0) {
                return Err(Error::InvalidArgument("l_steps must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn cutoff_schedule(&self) -> Result<CutoffSchedule> {
        match (&self.schedule, self.delta) {
            (Some(s), _) => {
                let s = CutoffSchedule::new(s.clone())?;
                if s.order() != self.order {
                    return Err(Error::DimensionMismatch {
                        what: "schedule length (order − 1)",
                        expected: self.order - 1,
                        got: s.deltas().len(),
                    });
                }
                Ok(s)
            }
            (None, Some(d)) => CutoffSchedule::constant(d, self.order),
            // exact builds and order 1 need no cut-offs
            (None, None) => CutoffSchedule::constant(1.0, self.order),
        }
    }

    pub fn basis_dir(&self) -> PathBuf {
        self.output_dir.join("basis")
    }
}

/// A problem instantiated from a [`ProblemSpec`].
#[derive(Debug, Clone)]
pub struct Problem {
    pub family: ParametricMatrix,
    /// One right-hand side, or `b₀, b₁` for the hole problem.
    pub rhs: Vec<DVector<f64>>,
    pub parameter_box: ParameterBox,
    /// Analytic spectral bounds `(α, β)` when known.
    pub spectral_bounds: Option<(f64, f64)>,
    pub sweep: Option<HoleSweep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleSweep {
    pub a: f64,
    pub l_max: f64,
    pub l_steps: usize,
}

impl HoleSweep {
    pub fn values(&self) -> Vec<f64> {
        if self.l_steps == 1 {
            return vec![0.0];
        }
        let h = 2.0 * self.l_max / (self.l_steps - 1) as f64;
        (0..self.l_steps).map(|i| -self.l_max + i as f64 * h).collect()
    }
}

impl Problem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        match spec {
            &ProblemSpec::Checkerboard { n, m, divisions, a } => {
                let fem = gen_checkerboard_problem(n, m, divisions, a)?;
                Ok(Self {
                    rhs: vec![fem.rhs().clone()],
                    family: fem.split.family,
                    parameter_box: fem.parameter_box,
                    spectral_bounds: Some((fem.alpha, fem.beta)),
                    sweep: None,
                })
            }
            &ProblemSpec::Hole {
                divisions,
                a,
                l_max,
                l_steps,
            } => {
                let fem = gen_hole_problem(divisions, a)?;
                Ok(Self {
                    rhs: fem.split.loads,
                    family: fem.split.family,
                    parameter_box: fem.parameter_box,
                    spectral_bounds: Some((fem.alpha, fem.beta)),
                    sweep: Some(HoleSweep {
                        a,
                        l_max: l_max.unwrap_or(DEFAULT_L_MAX),
                        l_steps: l_steps.unwrap_or(DEFAULT_L_STEPS),
                    }),
                })
            }
            ProblemSpec::External { dir } => {
                let stored = io::load_family(dir)?;
                let rhs = stored
                    .rhs
                    .ok_or_else(|| Error::InvalidArgument(format!("{} has no b.mtx", dir.display())))?;
                let parameter_box = stored.parameter_box.ok_or_else(|| {
                    Error::InvalidArgument(format!("{}/meta.json has no `lower`/`upper` bounds", dir.display()))
                })?;
                Ok(Self {
                    family: stored.family,
                    rhs: vec![rhs],
                    parameter_box,
                    spectral_bounds: None,
                    sweep: None,
                })
            }
        }
    }

    /// Builds one basis per right-hand side and merges them.
    pub fn build_basis(&self, method: Method, order: usize, schedule: &CutoffSchedule) -> Result<ReducedBasis> {
        let mut merged: Option<ReducedBasis> = None;
        for b in &self.rhs {
            let basis = offline::build(method, &self.family, b, order, schedule)?;
            merged = Some(match merged {
                None => basis,
                Some(m) => m.merge(&basis)?,
            });
        }
        Ok(merged.expect("problems carry at least one right-hand side"))
    }

    /// The evaluation points: the `l` sweep for the hole problem, otherwise
    /// the batch file or `count` uniform samples.
    pub fn evaluation_points(&self, cfg: &ExperimentConfig) -> Result<Vec<EvalPoint>> {
        if let Some(sweep) = &self.sweep {
            return sweep
                .values()
                .into_iter()
                .map(|l| {
                    Ok(EvalPoint {
                        l: Some(l),
                        sigma: sigma_of_l(l, sweep.a)?,
                    })
                })
                .collect();
        }
        let sigmas = match &cfg.sigma_file {
            Some(path) => io::read_sigma_csv(path)?,
            None => sample_sigmas(&self.parameter_box, cfg.sample_count, cfg.rng_seed)?,
        };
        Ok(sigmas.into_iter().map(|sigma| EvalPoint { l: None, sigma }).collect())
    }

    /// Right-hand side at an evaluation point (`b₀ + l·b₁` on the sweep).
    pub fn rhs_at(&self, point: &EvalPoint) -> DVector<f64> {
        match (point.l, self.rhs.get(1)) {
            (Some(l), Some(b1)) => &self.rhs[0] + b1 * l,
            _ => self.rhs[0].clone(),
        }
    }
}

/// Writes the (preconditioned) family of a problem in the matrix-family
/// directory layout, with its first right-hand side as `b.mtx` and any
/// further ones as `b_2.mtx, …`.
pub fn export_problem(problem: &Problem, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    io::save_family(dir, &problem.family, problem.rhs.first(), Some(&problem.parameter_box))?;
    for (i, b) in problem.rhs.iter().enumerate().skip(1) {
        let m = nalgebra::DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        io::write_mtx_array(dir.join(format!("b_{}.mtx", i + 1)), &m)?;
    }
    Ok(())
}

/// Componentwise uniform samples `lo + u·(hi − lo)`, `u ∈ [0, 1)`, from a
/// ChaCha8 stream seeded with `seed`.
pub fn sample_sigmas(bx: &ParameterBox, count: usize, seed: u64) -> Result<Vec<ParameterVector>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            bx.lower()
                .iter()
                .zip(bx.upper())
                .map(|(lo, hi)| rng.gen::<f64>() * (hi - lo) + lo)
                .collect::<Vec<_>>()
                .into()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    /// Hole translation, on the sweep.
    pub l: Option<f64>,
    pub sigma: ParameterVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorValues {
    pub anorm_error: f64,
    pub rel_error: f64,
    /// A-norm error of CG iterate `j` (same order as the basis).
    pub cg_error: f64,
    pub cheb_bound: f64,
}

#[derive(Debug, Clone)]
pub struct ErrorRow {
    pub point: EvalPoint,
    pub reduced_dim: usize,
    /// The error measures, or why this point failed.
    pub outcome: std::result::Result<ErrorValues, String>,
}

#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub order: usize,
    pub rows: Vec<ErrorRow>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl ErrorReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Largest relative A-norm error over the successful rows.
    pub fn max_rel_error(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|v| v.rel_error)
            .reduce(f64::max)
    }

    pub fn max_abs_error(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|v| v.anorm_error)
            .reduce(f64::max)
    }

    /// `[l,]sigma_1..sigma_s,anorm_error,rel_error,cg_error_j,reduced_dim,cheb_bound`;
    /// failed rows carry `failed` in every error column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let s = self.rows.first().map_or(0, |r| r.point.sigma.len());
        let sweep = self.rows.first().is_some_and(|r| r.point.l.is_some());
        let mut header: Vec<String> = Vec::new();
        if sweep {
            header.push("l".into());
        }
        header.extend((1..=s).map(|i| format!("sigma_{i}")));
        header.extend(
            ["anorm_error", "rel_error", "cg_error_j", "reduced_dim", "cheb_bound"]
                .iter()
                .map(|h| h.to_string()),
        );
        let _ = writeln!(out, "{}", header.join(","));
        for r in &self.rows {
            let mut fields: Vec<String> = Vec::new();
            if let Some(l) = r.point.l {
                fields.push(fmt_f64(l));
            }
            fields.extend(r.point.sigma.iter().map(|&v| fmt_f64(v)));
            match &r.outcome {
                Ok(v) => {
                    fields.extend([v.anorm_error, v.rel_error, v.cg_error].map(fmt_f64));
                    fields.push(r.reduced_dim.to_string());
                    fields.push(fmt_f64(v.cheb_bound));
                }
                Err(_) => {
                    fields.extend(["failed"; 3].map(String::from));
                    fields.push(r.reduced_dim.to_string());
                    fields.push("failed".into());
                }
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Errors of the reduced solution at every point, against a dense direct
/// solve, with the CG iterate of the basis order for comparison.
pub fn evaluate_errors(problem: &Problem, rs: &ReducedSystem, points: &[EvalPoint]) -> ErrorReport {
    let order = rs.basis().order();
    let rows = points
        .iter()
        .map(|point| {
            let outcome = evaluate_point(problem, rs, point, order).map_err(|e| {
                log::warn!("evaluation failed at σ = {:?}: {e}", point.sigma.0);
                e.to_string()
            });
            ErrorRow {
                point: point.clone(),
                reduced_dim: rs.dim(),
                outcome,
            }
        })
        .collect();
    ErrorReport { order, rows }
}

fn evaluate_point(problem: &Problem, rs: &ReducedSystem, point: &EvalPoint, order: usize) -> Result<ErrorValues> {
    let sigma = &point.sigma[..];
    let b = problem.rhs_at(point);
    let z_rhs = rs.project_rhs(&b)?;
    let reduced = rs.solve_with_rhs(sigma, &z_rhs)?;
    let a = problem.family.evaluate(sigma)?;
    let x = krylov::dense_spd_solve(&a, &b)?;
    let a_norm = |v: &DVector<f64>| -> Result<f64> {
        let q = v.dot(&(&a * v));
        if q < -1e-12 * v.norm_squared() * a.norm() {
            return Err(Error::NotPositiveDefinite(format!("A(σ) at σ = {sigma:?}")));
        }
        Ok(q.max(0.0).sqrt())
    };
    let x_norm = a_norm(&x)?;
    let anorm_error = a_norm(&(&x - &reduced.x))?;
    let trace = krylov::cg_solve_dense(&a, &b, order, Some(&x), false)?;
    let cg_error = trace
        .iterate(order)
        .and_then(|it| it.a_norm_error)
        .unwrap_or(x_norm);
    let kappa = match problem.spectral_bounds {
        Some((alpha, beta)) => beta / alpha,
        None => {
            let (lo, hi) = linalg::extreme_eigenvalues(&a);
            if !(lo > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("A(σ) at σ = {sigma:?}")));
            }
            hi / lo
        }
    };
    Ok(ErrorValues {
        anorm_error,
        rel_error: if x_norm > 0.0 { anorm_error / x_norm } else { anorm_error },
        cg_error,
        cheb_bound: krylov::cheb_bound(kappa, order)?,
    })
}

/// `step,k_rank,sv_max,sv_min_retained,sv_first_discarded`, one row per
/// growth step (per right-hand side for merged bases). Empty cells mark a
/// missing value.
pub fn build_report_csv(basis: &ReducedBasis) -> String {
    let mut out = String::from("step,k_rank,sv_max,sv_min_retained,sv_first_discarded\n");
    let opt = |v: Option<&f64>| v.map_or(String::new(), |&v| fmt_f64(v));
    for sp in basis.spectra() {
        let min_retained = sp.retained.checked_sub(1).and_then(|i| sp.values.get(i));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sp.step,
            sp.retained,
            opt(sp.values.first()),
            opt(min_retained),
            opt(sp.values.get(sp.retained))
        );
    }
    out
}

/// `rhs,step,position,value,retained`: every singular value seen by the
/// build, nonincreasing within a step.
pub fn dump_singular_values(basis: &ReducedBasis) -> String {
    let mut out = String::from("rhs,step,position,value,retained\n");
    for sp in basis.spectra() {
        for (i, &v) in sp.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", sp.rhs, sp.step, i + 1, fmt_f64(v), u8::from(i < sp.retained));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct OfflineReport {
    pub basis: ReducedBasis,
    pub basis_dir: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Builds the basis, then writes `basis/` (`basis.meta.json`, `Q.mtx`),
/// `build_report.csv` and `singular_values.csv` under the output directory.
pub fn run_offline(cfg: &ExperimentConfig) -> Result<OfflineReport> {
    cfg.validate()?;
    let problem = Problem::from_spec(&cfg.problem)?;
    run_offline_with(cfg, &problem)
}

/// [`run_offline`] for an already instantiated problem.
pub fn run_offline_with(cfg: &ExperimentConfig, problem: &Problem) -> Result<OfflineReport> {
    let schedule = cfg.cutoff_schedule()?;
    let started = Instant::now();
    let basis = problem.build_basis(cfg.method, cfg.order, &schedule)?;
    log::info!(
        "{} basis of order {}: dimension {} (n = {}) in {:.2?}",
        cfg.method,
        cfg.order,
        basis.dim(),
        basis.n(),
        started.elapsed()
    );
    ensure_dir(&cfg.output_dir)?;
    let basis_dir = cfg.basis_dir();
    io::save_basis(&basis_dir, &basis)?;
    io::write_text(&cfg.output_dir.join("build_report.csv"), &build_report_csv(&basis))?;
    io::write_text(&cfg.output_dir.join("singular_values.csv"), &dump_singular_values(&basis))?;
    Ok(OfflineReport { basis, basis_dir })
}

/// Compresses the problem onto `basis`, evaluates every point and writes
/// `errors.csv`.
pub fn run_online_eval(cfg: &ExperimentConfig, basis: &ReducedBasis) -> Result<ErrorReport> {
    cfg.validate()?;
    let problem = Problem::from_spec(&cfg.problem)?;
    run_online_eval_with(cfg, &problem, basis)
}

/// [`run_online_eval`] for an already instantiated problem.
pub fn run_online_eval_with(cfg: &ExperimentConfig, problem: &Problem, basis: &ReducedBasis) -> Result<ErrorReport> {
    if basis.n() != problem.family.n() {
        return Err(Error::DimensionMismatch {
            what: "basis rows vs problem size",
            expected: problem.family.n(),
            got: basis.n(),
        });
    }
    let points = problem.evaluation_points(cfg)?;
    if let Some(p) = points.iter().find(|p| p.sigma.len() != problem.family.s()) {
        return Err(Error::DimensionMismatch {
            what: "parameter vector length",
            expected: problem.family.s(),
            got: p.sigma.len(),
        });
    }
    let started = Instant::now();
    let rs = online::compress(&problem.family, &problem.rhs[0], basis)?;
    let report = evaluate_errors(problem, &rs, &points);
    log::info!(
        "evaluated {} points in {:.2?}: max relative error {:?}, {} failed",
        points.len(),
        started.elapsed(),
        report.max_rel_error(),
        report.failures()
    );
    ensure_dir(&cfg.output_dir)?;
    io::write_text(&cfg.output_dir.join("errors.csv"), &report.to_csv())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_box_and_repeat() {
        let bx = ParameterBox::new(vec![1.0, -2.0, 3.0], vec![20.0, -1.0, 3.0]).unwrap();
        let a = sample_sigmas(&bx, 10_000, 7).unwrap();
        assert!(a.iter().all(|s| bx.contains(s)));
        assert!(a.iter().all(|s| s[2] == 3.0));
        assert_eq!(a, sample_sigmas(&bx, 10_000, 7).unwrap());
        assert_ne!(a, sample_sigmas(&bx, 10_000, 8).unwrap());
        assert!(sample_sigmas(&bx, 0, 7).is_err());
    }

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"{
            "problem": {"kind": "checkerboard", "N": 2, "M": 2, "divisions": 8, "a": 20},
            "method": "ck1", "order": 3, "delta": 1e-7,
            "sample_count": 5, "rng_seed": 1, "output_dir": "out"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.cutoff_schedule().unwrap().deltas(), &[1e-7, 1e-7]);
        assert!(ExperimentConfig::from_json(&text.replace("\"sample_count\": 5", "\"sample_count\": 0")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("1e-7", "-1")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("\"delta\": 1e-7,", "")).is_err());
        assert!(ExperimentConfig::from_json(&text.replace("ck1", "ck3")).is_err());
    }

    #[test]
    fn sweep_points_are_symmetric() {
        let s = HoleSweep {
            a: 0.32,
            l_max: 0.3,
            l_steps: 13,
        };
        let v = s.values();
        assert_eq!(v.len(), 13);
        assert!((v[0] + 0.3).abs() < 1e-15 && (v[12] - 0.3).abs() < 1e-15 && v[6].abs() < 1e-15);
    }

    #[test]
    fn build_report_lists_every_step() {
        let p = gen_checkerboard_problem(1, 2, 4, 5.0).unwrap();
        let basis = offline::build_ck1(p.preconditioned(), p.rhs(), 3, &CutoffSchedule::constant(1e-10, 3).unwrap()).unwrap();
        let csv = build_report_csv(&basis);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        let k1: usize = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(k1, basis.spectra()[0].retained);
        let sv = dump_singular_values(&basis);
        assert_eq!(sv.lines().count(), 1 + basis.spectra().iter().map(|s| s.values.len()).sum::<usize>());
    }
}
