//! `ck`: offline basis builds, online evaluation and mesh utilities.
//!
//! Exit status is 0 on success, 2 when some evaluation points failed and 1
//! on any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ck_core::fem::{checkerboard_mesh, hole_mesh, Mesh};
use ck_core::harness::{self, ErrorReport, ExperimentConfig, Problem};
use ck_core::io;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ck", version, about = "Compound Krylov reduced-basis solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a basis and write it with its build reports.
    Offline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a stored basis against direct solves and write errors.csv.
    Online {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding basis.meta.json and Q.mtx.
        #[arg(long)]
        basis: PathBuf,
        /// Batch CSV (`sigma_1,…,sigma_s`) replacing the random samples.
        #[arg(long)]
        sigmas: Option<PathBuf>,
    },
    /// Offline build followed by online evaluation.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sigmas: Option<PathBuf>,
    },
    /// Write the problem of a config as a matrix-family directory.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate or check mesh files
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    Checkerboard,
    Hole,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a benchmark mesh in the text format.
    Gen {
        #[arg(long, value_enum)]
        kind: MeshKind,
        #[arg(long)]
        divisions: usize,
        /// Subdomain rows (checkerboard).
        #[arg(long, default_value_t = 1)]
        rows: usize,
        /// Subdomain columns (checkerboard).
        #[arg(long, default_value_t = 1)]
        cols: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check orientation, indices, tags and boundary flags of a mesh file.
    Validate {
        path: PathBuf,
        /// Largest admissible subdomain tag.
        #[arg(long)]
        max_tag: Option<usize>,
    },
}

fn load_config(path: &PathBuf, sigmas: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    if sigmas.is_some() {
        cfg.sigma_file = sigmas;
    }
    Ok(cfg)
}

fn summarize(report: &ErrorReport) -> ExitCode {
    let max = report.max_rel_error().map_or("n/a".to_string(), |e| format!("{e:.3e}"));
    println!(
        "{} points, max relative A-norm error {max}, {} failed",
        report.rows.len(),
        report.failures()
    );
    if report.failures() > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Offline { config } => {
            let cfg = load_config(&config, None)?;
            let off = harness::run_offline(&cfg)?;
            println!(
                "{} basis of order {}: dimension {} (n = {}), written to {}",
                off.basis.method(),
                off.basis.order(),
                off.basis.dim(),
                off.basis.n(),
                off.basis_dir.display()
            );
        }
        Command::Online { config, basis, sigmas } => {
            let cfg = load_config(&config, sigmas)?;
            let basis = io::load_basis(&basis).with_context(|| format!("loading basis from {}", basis.display()))?;
            let report = harness::run_online_eval(&cfg, &basis)?;
            return Ok(summarize(&report));
        }
        Command::Eval { config, sigmas } => {
            let cfg = load_config(&config, sigmas)?;
            cfg.validate()?;
            let problem = Problem::from_spec(&cfg.problem)?;
            let off = harness::run_offline_with(&cfg, &problem)?;
            println!("basis dimension {}", off.basis.dim());
            let report = harness::run_online_eval_with(&cfg, &problem, &off.basis)?;
            return Ok(summarize(&report));
        }
        Command::Export { config, out } => {
            let cfg = load_config(&config, None)?;
            let problem = Problem::from_spec(&cfg.problem)?;
            harness::export_problem(&problem, &out)?;
            println!("n = {}, s = {} written to {}", problem.family.n(), problem.family.s(), out.display());
        }
        Command::Mesh(MeshCommand::Gen {
            kind,
            divisions,
            rows,
            cols,
            out,
        }) => {
            let mesh = match kind {
                MeshKind::Checkerboard => checkerboard_mesh(rows, cols, divisions)?,
                MeshKind::Hole => hole_mesh(divisions)?,
            };
            mesh.save(&out)?;
            println!(
                "{} nodes ({} free), {} triangles written to {}",
                mesh.node_count(),
                mesh.free_nodes().len(),
                mesh.triangles.len(),
                out.display()
            );
        }
        Command::Mesh(MeshCommand::Validate { path, max_tag }) => {
            let mesh = Mesh::load(&path)?;
            if mesh.triangles.is_empty() {
                bail!("{} has no triangles", path.display());
            }
            mesh.validate(max_tag)?;
            println!("{}: valid ({} nodes, {} triangles)", path.display(), mesh.node_count(), mesh.triangles.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
