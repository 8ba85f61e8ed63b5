//! Command-line driver: `simulate`, `optimize`, `check <which>`, `report`.
//!
//! Exit codes: 0 success, 1 a check failed its threshold, 2 bad
//! configuration or input files, 3 solver failure.

pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::control::{optimize, projection_gap, StopReason};
use crate::error::{Error, Result};
use crate::io;
use crate::state::solve_state;
use crate::verify::{self, CheckOutcome, CheckSetup};
pub use config::{RawConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Largest problem `check` accepts.
const CHECK_MAX_NODES: usize = 64 * 64;
const CHECK_MAX_STEPS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "chks",
    version,
    about = "Tumor growth solver with adjoint-based optimal control"
)]
pub struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Save every k-th time step; overrides `output.stride`.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// RNG seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Treat negative nutrient values as fatal.
    #[arg(long, global = true)]
    pub strict_positivity: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the forward solver and write the trajectory.
    Simulate,
    /// Minimize the tracking cost by projected gradient.
    Optimize,
    /// Run a numerical self-check and print a pass/fail table.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
    },
    /// Summarize a stored trajectory into report.csv.
    Report {
        /// Trajectory directory containing meta.txt.
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Gradient,
    Duality,
    Transpose,
    Mass,
    Convergence,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

fn load_config(cli: &Cli, default_preset: &str) -> Result<RunConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::preset(default_preset)?,
    };
    if let Some(out) = &cli.out {
        raw.set("output.dir", &out.to_string_lossy())?;
    }
    if let Some(s) = cli.stride {
        raw.set("output.stride", &s.to_string())?;
    }
    if let Some(s) = cli.seed {
        raw.set("seed", &s.to_string())?;
    }
    if cli.strict_positivity {
        raw.set("solver.strict_positivity", "true")?;
    }
    raw.build()
}

pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate => load_config(cli, "default").and_then(|c| simulate(&c)),
        Command::Optimize => load_config(cli, "default").and_then(|c| run_optimize(&c)),
        Command::Check { which } => load_config(cli, "small").and_then(|c| check(&c, *which)),
        Command::Report { dir } => report(dir, cli.out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let init = cfg.initial_data()?;
    let u = cfg.initial_control()?;
    let traj = solve_state(&init, &u, &cfg.model, cfg.options)?;
    let dir = cfg.out_dir.join("traj").join(&cfg.name);
    io::write_trajectory(&dir, &traj, cfg.stride)?;
    let last = traj.last();
    println!("wrote {}", dir.display());
    println!("steps                {}", traj.nt());
    println!("separation margin    {:.6e}", traj.separation_margin());
    println!("min sigma            {:.6e}", traj.min_sigma());
    println!("mean sigma at T      {:.12}", last.sigma.mean());
    println!("mean phi at T        {:.12}", last.phi.mean());
    println!("Newton iterations    {}", traj.total_newton_iters());
    Ok(EXIT_OK)
}

fn run_optimize(cfg: &RunConfig) -> Result<i32> {
    let init = cfg.initial_data()?;
    let prob = cfg.problem(&init)?;
    let u0 = cfg.initial_control()?;
    let rep = optimize(&prob, &init, &u0, &cfg.model, cfg.options, &cfg.optimizer)?;
    let opt_dir = cfg.out_dir.join("opt").join(&cfg.name);
    io::write_csv(
        &opt_dir.join("optimization.csv"),
        &io::optimization_log_csv(&rep.records),
    )?;
    io::write_control(&cfg.out_dir.join("ctrl").join(&cfg.name), &rep.control)?;
    io::write_trajectory(&cfg.out_dir.join("traj").join(&cfg.name), &rep.trajectory, cfg.stride)?;
    if cfg.dump_adjoint {
        io::write_adjoint(&cfg.out_dir.join("adj").join(&cfg.name), &rep.adjoint, cfg.stride)?;
    }
    let (j0, j1) = (rep.initial_cost(), rep.final_cost());
    println!("wrote {}", opt_dir.display());
    println!("iterations           {}", rep.records.len() - 1);
    println!("stop                 {:?}", rep.stop);
    println!("J initial            {j0:.6e}");
    println!("J final              {j1:.6e}");
    println!("J final / J initial  {:.6e}", if j0 > 0.0 { j1 / j0 } else { 0.0 });
    println!("stationarity         {:.6e}", rep.final_stationarity());
    if prob.alphas()[4] > 0.0 {
        let gap = projection_gap(&rep.control, &rep.adjoint, &prob, cfg.model.params.dt())?;
        println!("projection gap       {gap:.6e}");
    }
    if rep.stop == StopReason::SolverFailure {
        eprintln!("error: {}", rep.failure.as_deref().unwrap_or("solver failure"));
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

fn print_table(rows: &[CheckOutcome]) -> i32 {
    println!("{:<40} {:>12}    {:>10}  result", "check", "measured", "threshold");
    for r in rows {
        println!("{r}");
    }
    if rows.iter().all(CheckOutcome::pass) {
        EXIT_OK
    } else {
        EXIT_THRESHOLD
    }
}

fn check(cfg: &RunConfig, which: CheckKind) -> Result<i32> {
    if cfg.grid.len() > CHECK_MAX_NODES || cfg.model.params.nt > CHECK_MAX_STEPS {
        return Err(Error::Config(format!(
            "check runs on small problems only (at most {CHECK_MAX_NODES} nodes and {CHECK_MAX_STEPS} steps)"
        )));
    }
    let rows = if which == CheckKind::Convergence {
        verify::check_convergence()?
    } else {
        let init = cfg.initial_data()?;
        let setup = CheckSetup {
            model: cfg.model,
            problem: cfg.problem(&init)?,
            control: cfg.initial_control()?,
            init,
            options: cfg.options,
        };
        match which {
            CheckKind::Gradient => vec![verify::check_gradient(&setup, &[1e-3, 1e-4, 1e-5], cfg.seed)?],
            CheckKind::Duality => vec![verify::check_duality(&setup, 5, cfg.seed)?],
            CheckKind::Transpose => vec![verify::check_transpose(&setup, cfg.seed)?],
            CheckKind::Mass => vec![verify::check_mass(&setup)?],
            CheckKind::Convergence => unreachable!("handled above"),
        }
    };
    Ok(print_table(&rows))
}

fn report(dir: &Path, out: Option<&Path>) -> Result<i32> {
    let stored = io::read_trajectory(dir)?;
    let rep = io::trajectory_report(&stored);
    let path = out.unwrap_or(dir).join("report.csv");
    io::write_csv(&path, &rep.csv)?;
    println!("wrote {}", path.display());
    println!("saved steps          {}", stored.snapshots.len());
    println!("separation margin    {:.6e}", rep.separation_margin);
    println!("min sigma            {:.6e}", rep.min_sigma);
    println!("final energy         {:.6e}", rep.final_energy);
    Ok(EXIT_OK)
}
