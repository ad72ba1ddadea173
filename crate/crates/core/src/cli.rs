//! Command-line front end: argument parsing, run configuration and outputs.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{
    convergence_study, errors_on_mesh, format_csv, superlevel_area, write_fields, ConvergenceRecord, TauRule,
};
use crate::error::FemError;
use crate::mesh::{load_mesh, Triangulation};
use crate::problems::{example1_spec, example2_spec, example3_spec, fhn_spec, Domain, ProblemSpec};
use crate::timestep::{fhn_simulate, RunOptions, TimeGrid};
use crate::validate::run_suite;

/// Threshold defining the excited region of the FitzHugh-Nagumo field.
pub const EXCITED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// Process exit code: 2 for usage errors, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Fem(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracfem", version, about = "Finite elements for Riesz space-fractional reaction-diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and report errors against the exact solution.
    Solve(RunArgs),
    /// Run a mesh-refinement study and write the convergence table as CSV.
    Converge(RunArgs),
    /// Simulate the FitzHugh-Nagumo model and write u/w snapshots.
    Fhn(RunArgs),
    /// Run the oracle self-checks.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemName {
    Example1,
    Example2,
    Example3,
    Fhn,
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemName::Example1 => "example1",
            ProblemName::Example2 => "example2",
            ProblemName::Example3 => "example3",
            ProblemName::Fhn => "fhn",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemName>,
    /// Fractional order in x, 1/2 < alpha <= 1.
    #[arg(long, value_parser = parse_order)]
    pub alpha: Option<f64>,
    /// Fractional order in y, 1/2 < beta <= 1.
    #[arg(long, value_parser = parse_order)]
    pub beta: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub kx: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub ky: Option<f64>,
    /// Target mesh size.
    #[arg(long, value_parser = parse_positive, conflicts_with = "mesh")]
    pub h: Option<f64>,
    /// Mesh file to use instead of a generated mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Time step: `h2` (tau = h^2), `h` (tau = h) or a number.
    #[arg(long)]
    pub tau: Option<TauRule>,
    /// Final time.
    #[arg(long = "T", value_parser = parse_positive)]
    pub final_time: Option<f64>,
    /// Mesh sizes; entries above 1 are read as subdivision counts (h = 1/N).
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub ladder: Option<Vec<f64>>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write a snapshot every n time steps.
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Worker threads; defaults to all available cores.
    #[arg(long, env = "FRACFEM_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_order(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.5 && v <= 1.0 => Ok(v),
        _ => Err(format!("expected an order in (0.5, 1], got {s:?}")),
    }
}

/// Fully resolved configuration of one run, echoed to `run.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub problem: ProblemName,
    pub alpha: f64,
    pub beta: f64,
    pub kx: f64,
    pub ky: f64,
    pub h: f64,
    pub mesh: Option<PathBuf>,
    pub tau: TauRule,
    pub final_time: f64,
    pub ladder: Vec<f64>,
    pub out: PathBuf,
    pub snapshots: Option<usize>,
    pub threads: usize,
    pub seed: u64,
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ladder: Vec<String> = self.ladder.iter().map(|h| h.to_string()).collect();
        writeln!(f, "command = {}", self.command)?;
        writeln!(f, "problem = {}", self.problem)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "beta = {}", self.beta)?;
        writeln!(f, "kx = {}", self.kx)?;
        writeln!(f, "ky = {}", self.ky)?;
        writeln!(f, "h = {}", self.h)?;
        match &self.mesh {
            Some(p) => writeln!(f, "mesh = {}", p.display())?,
            None => writeln!(f, "mesh = generated")?,
        }
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "T = {}", self.final_time)?;
        writeln!(f, "ladder = {}", ladder.join(","))?;
        writeln!(f, "out = {}", self.out.display())?;
        match self.snapshots {
            Some(n) => writeln!(f, "snapshots = {n}")?,
            None => writeln!(f, "snapshots = none")?,
        }
        writeln!(f, "threads = {}", self.threads)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

struct Defaults {
    alpha: f64,
    beta: f64,
    kx: f64,
    ky: f64,
    h: f64,
    tau: TauRule,
    final_time: f64,
}

fn defaults(problem: ProblemName) -> Defaults {
    match problem {
        ProblemName::Example1 => Defaults {
            alpha: 0.8,
            beta: 0.8,
            kx: 1.0,
            ky: 1.0,
            h: 0.1,
            tau: TauRule::HSquared,
            final_time: 1.0,
        },
        ProblemName::Example2 => Defaults {
            alpha: 0.8,
            beta: 0.8,
            kx: 1.0,
            ky: 2.0,
            h: 0.05,
            tau: TauRule::HSquared,
            final_time: 1.0,
        },
        ProblemName::Example3 => Defaults {
            alpha: 0.85,
            beta: 0.85,
            kx: 2.0,
            ky: 2.0,
            h: 0.1,
            tau: TauRule::HSquared,
            final_time: 1.0,
        },
        ProblemName::Fhn => Defaults {
            alpha: 0.75,
            beta: 0.75,
            kx: 1e-4,
            ky: 1e-4,
            h: 0.125,
            tau: TauRule::Fixed(1.0),
            final_time: 200.0,
        },
    }
}

/// Resolves flags against per-problem defaults.
pub fn resolve(command: &'static str, args: &RunArgs) -> Result<RunConfig, CliError> {
    let problem = match (command, args.problem) {
        ("fhn", None | Some(ProblemName::Fhn)) => ProblemName::Fhn,
        ("fhn", Some(p)) => return Err(CliError::Usage(format!("the fhn command does not accept --problem {p}"))),
        ("solve" | "converge", Some(ProblemName::Fhn)) => {
            return Err(CliError::Usage("use the fhn command for --problem fhn".into()))
        }
        (_, p) => p.unwrap_or(ProblemName::Example1),
    };
    let d = defaults(problem);
    let ladder = args
        .ladder
        .clone()
        .unwrap_or_else(|| vec![5.0, 10.0, 20.0, 40.0])
        .into_iter()
        .map(|v| if v > 1.0 { 1.0 / v } else { v })
        .collect();
    let threads = match args.threads {
        Some(n) => n as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(RunConfig {
        command,
        problem,
        alpha: args.alpha.unwrap_or(d.alpha),
        beta: args.beta.unwrap_or(d.beta),
        kx: args.kx.unwrap_or(d.kx),
        ky: args.ky.unwrap_or(d.ky),
        h: args.h.unwrap_or(d.h),
        mesh: args.mesh.clone(),
        tau: args.tau.unwrap_or(d.tau),
        final_time: args.final_time.unwrap_or(d.final_time),
        ladder,
        out: args.out.clone(),
        snapshots: args.snapshots,
        threads,
        seed: args.seed,
    })
}

fn problem_spec(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    let (a, b, kx, ky) = (cfg.alpha, cfg.beta, cfg.kx, cfg.ky);
    Ok(match cfg.problem {
        ProblemName::Example1 => example1_spec(a, b, kx, ky)?,
        ProblemName::Example2 => example2_spec(a, b, kx, ky)?,
        ProblemName::Example3 => example3_spec(a, b, kx, ky, 0.5, 0.75)?,
        ProblemName::Fhn => fhn_spec(a, b, kx, ky)?.problem,
    })
}

fn build_mesh(cfg: &RunConfig, domain: Domain) -> Result<Triangulation, CliError> {
    Ok(match &cfg.mesh {
        Some(p) => load_mesh(p)?,
        None => domain.mesh(cfg.h)?,
    })
}

fn prepare_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("run.txt"), cfg.to_string())?;
    Ok(())
}

/// Parses `argv` and runs the selected command.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Converge(a) => ("converge", a),
        Command::Fhn(a) => ("fhn", a),
        Command::Validate(a) => ("validate", a),
    };
    let cfg = resolve(name, args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Fem(FemError::InvalidParameter(e.to_string())))?;
    prepare_out(&cfg)?;
    log::info!("running {name} with {} thread(s), output in {}", cfg.threads, cfg.out.display());
    pool.install(|| match name {
        "solve" => cmd_solve(&cfg),
        "converge" => cmd_converge(&cfg),
        "fhn" => cmd_fhn(&cfg),
        _ => cmd_validate(&cfg),
    })
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = problem_spec(cfg)?;
    let mesh = build_mesh(cfg, problem.domain)?;
    let h = if cfg.mesh.is_some() { mesh.h() } else { cfg.h };
    let grid = TimeGrid::with_step(cfg.final_time, cfg.tau.tau(h))?;
    let start = Instant::now();
    let (u, errs) = errors_on_mesh(&mesh, &problem, &grid, &RunOptions::default())?;
    let t = grid.final_time();
    let mut report = format!(
        "problem = {}\nnodes = {}\ncells = {}\nh = {:.6e}\ntau = {:.6e}\nsteps = {}\nwall_time_s = {:.3}\n",
        problem.name,
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.h(),
        grid.tau(),
        grid.steps(),
        start.elapsed().as_secs_f64()
    );
    match (&problem.exact, errs) {
        (Some(exact), Some((l2, linf, energy))) => {
            report.push_str(&format!("error_l2 = {l2:.6e}\nerror_linf = {linf:.6e}\nerror_energy = {energy:.6e}\n"));
            let ue: Vec<f64> = mesh.vertices().iter().map(|p| exact(p.x, p.y, t)).collect();
            let err: Vec<f64> = u.iter().zip(&ue).map(|(a, b)| a - b).collect();
            write_fields(&mesh, &[("u", &u), ("u_exact", &ue), ("error", &err)], &cfg.out.join("solution.vtk"))?;
        }
        _ => write_fields(&mesh, &[("u", &u)], &cfg.out.join("solution.vtk"))?,
    }
    fs::write(cfg.out.join("errors.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_converge(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = problem_spec(cfg)?;
    let records: Vec<ConvergenceRecord> =
        convergence_study(&problem, &cfg.ladder, cfg.tau, cfg.final_time, &RunOptions::default())?;
    let csv = format_csv(&records);
    fs::write(cfg.out.join("convergence.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_fhn(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = fhn_spec(cfg.alpha, cfg.beta, cfg.kx, cfg.ky)?;
    let mesh = build_mesh(cfg, spec.problem.domain)?;
    let h = if cfg.mesh.is_some() { mesh.h() } else { cfg.h };
    let grid = TimeGrid::with_step(cfg.final_time, cfg.tau.tau(h))?;
    let opts = RunOptions {
        snapshot_every: Some(cfg.snapshots.unwrap_or(grid.steps())),
        ..RunOptions::default()
    };
    let traj = fhn_simulate(&mesh, &spec, &grid, &opts)?;
    let mut summary = String::from("t,area_excited,u_min,u_max\n");
    for (t, state) in &traj.snapshots {
        let w = state.w.as_deref().unwrap_or(&[]);
        write_fields(&mesh, &[("u", &state.u), ("w", w)], &snapshot_path(&cfg.out, state.step))?;
        let area = superlevel_area(&mesh, &state.u, EXCITED_THRESHOLD)?;
        let (lo, hi) = min_max(&state.u);
        summary.push_str(&format!("{t},{area:.6e},{lo:.6e},{hi:.6e}\n"));
    }
    fs::write(cfg.out.join("fhn_summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn snapshot_path(out: &Path, step: usize) -> PathBuf {
    out.join(format!("fhn_{step:06}.vtk"))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn cmd_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let checks = run_suite(cfg.seed);
    let mut log = fs::File::create(cfg.out.join("validate.txt"))?;
    let mut failed = 0;
    for c in &checks {
        println!("{c}");
        writeln!(log, "{c}")?;
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("fracfem").chain(argv.iter().copied()))
    }

    #[test]
    fn rejects_bad_flags() {
        assert!(parse(&["solve", "--h", "0"]).is_err());
        assert!(parse(&["solve", "--alpha", "0.4"]).is_err());
        assert!(parse(&["solve", "--tau", "fast"]).is_err());
        assert!(parse(&["converge", "--ladder", "5,x"]).is_err());
        assert!(parse(&["solve", "--h", "0.1", "--mesh", "m.txt"]).is_err());
        assert!(parse(&["frobnicate"]).is_err());
    }

    #[test]
    fn resolves_defaults_and_ladder() {
        let cli = parse(&["converge", "--ladder", "5,10,0.025", "--tau", "h"]).unwrap();
        let Command::Converge(a) = &cli.command else { panic!() };
        let cfg = resolve("converge", a).unwrap();
        assert_eq!(cfg.problem, ProblemName::Example1);
        assert_eq!(cfg.ladder, vec![0.2, 0.1, 0.025]);
        assert_eq!(cfg.tau, TauRule::H);
        assert_eq!((cfg.alpha, cfg.kx), (0.8, 1.0));
    }

    #[test]
    fn fhn_problem_routing() {
        let cli = parse(&["fhn"]).unwrap();
        let Command::Fhn(a) = &cli.command else { panic!() };
        let cfg = resolve("fhn", a).unwrap();
        assert_eq!((cfg.problem, cfg.kx, cfg.final_time), (ProblemName::Fhn, 1e-4, 200.0));
        let cli = parse(&["solve", "--problem", "fhn"]).unwrap();
        let Command::Solve(a) = &cli.command else { panic!() };
        assert_eq!(resolve("solve", a).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn run_txt_lists_every_field() {
        let cli = parse(&["solve", "--problem", "example3", "--seed", "7"]).unwrap();
        let Command::Solve(a) = &cli.command else { panic!() };
        let text = resolve("solve", a).unwrap().to_string();
        for key in ["command", "problem", "alpha", "beta", "kx", "ky", "h", "mesh", "tau", "T", "ladder", "out", "snapshots", "threads", "seed"] {
            assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
        }
        assert!(text.contains("problem = example3"));
    }
}
