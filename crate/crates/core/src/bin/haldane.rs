//! Command-line front end. Exit status: 0 ok, 2 config error, 3 invariant
//! breach, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use haldane_kinetic::runner::{self, RunConfig};
use haldane_kinetic::Error;

#[derive(Parser)]
#[command(name = "haldane", version, about = "Kinetic solver with Haldane exclusion statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for perturbation scenarios.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Diagnostics cadence in steps.
    #[arg(long, global = true)]
    cadence: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: diagnostics.csv, summary.json, checkpoints.
    Run {
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Cauchy study over `[study] j_levels`.
    Converge,
    /// Initial-data stability study over `[study] epsilons`.
    Stability,
    /// Check the kernel hypotheses; exits 2 when they fail.
    ValidateKernel,
    /// Tabulate the equilibrium occupation on the velocity grid.
    Equilibrium,
}

enum Failure {
    Lib(Error),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(c) = cli.cadence {
        cfg.output.cadence = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(&cfg.output.dir).map_err(Error::from)?;
    let path = cfg.output.dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).map_err(Error::from)?).map_err(Error::from)?;
    Ok(path)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    let out = cfg.output.dir.clone();
    match &cli.command {
        Command::Run { resume } => {
            let s = runner::with_workers(cfg.run.workers, || runner::run_single(&cfg, &out, resume.as_deref()))??;
            println!(
                "{}: {} steps to t = {}, mass drift {:.3e}, energy drift {:.3e}",
                s.scenario, s.steps, s.t_end, s.max_mass_drift, s.max_energy_drift
            );
            println!("wrote {}", out.display());
        }
        Command::Converge => {
            let r = runner::with_workers(cfg.run.workers, || {
                runner::run_convergence_study(&cfg, &cfg.study.j_levels)
            })??;
            for (t, row) in r.times.iter().zip(&r.distances) {
                println!("t = {t}: distances {row:?}");
            }
            println!("study {}", r.status);
            println!("wrote {}", write_json(&cfg, "convergence.json", &r)?.display());
        }
        Command::Stability => {
            let r = runner::with_workers(cfg.run.workers, || runner::run_stability_study(&cfg, &cfg.study.epsilons))??;
            for e in &r.entries {
                println!("eps = {:e}: sup distance {:.6e}, ratio {:.6}", e.epsilon, e.sup_distance, e.ratio);
            }
            println!("ratio spread {:.4}", r.spread);
            println!("wrote {}", write_json(&cfg, "stability.json", &r)?.display());
        }
        Command::ValidateKernel => {
            let c = runner::validate_configured_kernel(&cfg)?;
            print!("{}", c.report());
            if !c.passes() {
                return Err(Failure::Config("kernel hypotheses not satisfied".into()));
            }
        }
        Command::Equilibrium => {
            let (path, m) = runner::write_equilibrium(&cfg, &out)?;
            println!("mass {:.17e}, energy {:.17e}", m.mass, m.energy);
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter { .. } => 2,
                Error::InvariantBreach { .. } => 3,
                _ => 1,
            })
        }
    }
}
