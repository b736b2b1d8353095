mod commands;
mod instance;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_peakload::geometry::GeometryError;
use robust_peakload::numsolve::Tolerances;

use commands::{Generator, Settings, SolveMode};

const SEED_ENV: &str = "ROBUST_PEAKLOAD_SEED";

/// Robust peak-load market equilibria, planner optima, price of anarchy and
/// subsidies.
///
/// Exit codes: 0 success, 1 input or usage error, 2 infeasible or unbounded
/// problem, 3 subsidies that do not support an equilibrium.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Random seed for sampling; the ROBUST_PEAKLOAD_SEED variable wins over it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(flatten)]
    tolerances: TolFlags,
}

#[derive(Args)]
struct TolFlags {
    #[arg(long, global = true)]
    feas_tol: Option<f64>,
    #[arg(long, global = true)]
    cert_tol: Option<f64>,
    #[arg(long, global = true)]
    pivot_tol: Option<f64>,
}

impl TolFlags {
    fn resolve(&self) -> Option<Tolerances> {
        if self.feas_tol.is_none() && self.cert_tol.is_none() && self.pivot_tol.is_none() {
            return None;
        }
        let d = Tolerances::default();
        Some(Tolerances {
            feas_tol: self.feas_tol.unwrap_or(d.feas_tol),
            cert_tol: self.cert_tol.unwrap_or(d.cert_tol),
            pivot_tol: self.pivot_tol.unwrap_or(d.pivot_tol),
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Nominal, expected-value, robust market or robust planner solve.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMode::Nominal)]
        mode: SolveMode,
        /// Mean scenario for --mode expected: one value per producer, or one
        /// per producer and period.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mean: Option<Vec<f64>>,
        /// Sampled scenarios in the saddle certificate of --mode robust-cp.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Price of anarchy of an instance or of a generated extremal family.
    Poa {
        #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
        instance: Option<PathBuf>,
        #[arg(long, value_enum)]
        generate: Option<Generator>,
        #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = poa_epsilon())]
        epsilon: f64,
        /// Simplex dimension for the fixed-demand generators.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Write the generated instance to this path.
        #[arg(long, requires = "generate")]
        emit_instance: Option<PathBuf>,
    },
    /// Subsidies that make the robust planner's capacities an equilibrium.
    Subsidy {
        #[arg(long)]
        instance: PathBuf,
        /// Capacity grid size for the deviation check.
        #[arg(long)]
        grid: Option<usize>,
        /// Random scenarios in the subsidy audit.
        #[arg(long)]
        samples: Option<usize>,
        /// Check these subsidies instead of the computed ones.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eta: Option<Vec<f64>>,
    },
    /// tau of the uncertainty set with its witness and validation flags.
    Tau {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Same report as `tau`, for checking a set before use.
    ValidateSet {
        #[arg(long)]
        instance: PathBuf,
    },
}

fn poa_epsilon() -> f64 {
    robust_peakload::poa::DEFAULT_EPSILON
}

fn resolve_seed(flag: Option<u64>) -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(
            v.trim()
                .parse()
                .map_err(|e| anyhow::anyhow!("{SEED_ENV}={v:?} is not a seed: {e}"))?,
        )),
        Err(_) => Ok(flag),
    }
}

/// 2 for infeasible or unbounded problems, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use robust_peakload::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            match e {
                Error::Infeasible(_) | Error::Unbounded(_) => return 2,
                Error::Geometry(GeometryError::EmptySet | GeometryError::Unbounded) => return 2,
                _ => {}
            }
        }
        if let Some(GeometryError::EmptySet | GeometryError::Unbounded) = cause.downcast_ref::<GeometryError>() {
            return 2;
        }
    }
    1
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let settings = Settings {
        seed: resolve_seed(cli.seed)?,
        tolerances: cli.tolerances.resolve(),
    };
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Solve {
            instance,
            mode,
            mean,
            samples,
        } => commands::solve(
            &commands::SolveArgs {
                instance: instance.clone(),
                mode: *mode,
                mean: mean.clone(),
                samples: *samples,
            },
            &settings,
        )?,
        Command::Poa {
            instance,
            generate,
            delta,
            rho,
            alpha,
            epsilon,
            dim,
            emit_instance,
        } => commands::poa(
            &commands::PoaArgs {
                instance: instance.clone(),
                generate: *generate,
                delta: *delta,
                rho: *rho,
                alpha: *alpha,
                epsilon: *epsilon,
                dim: *dim,
                emit_instance: emit_instance.clone(),
            },
            &settings,
        )?,
        Command::Subsidy {
            instance,
            grid,
            samples,
            eta,
        } => commands::subsidy(
            &commands::SubsidyArgs {
                instance: instance.clone(),
                grid: *grid,
                samples: *samples,
                eta: eta.clone(),
            },
            &settings,
        )?,
        Command::Tau { instance } => commands::tau("tau", instance, &settings)?,
        Command::ValidateSet { instance } => commands::tau("validate-set", instance, &settings)?,
    };
    let value = outcome.report.to_value(start.elapsed().as_secs_f64() * 1e3);
    let text = match cli.format {
        Format::Json => report::to_json(&value),
        Format::Text => report::to_text(&value),
    };
    print!("{text}");
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
