use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ttgreeks::Execution;
use ttgreeks_cli::commands::{self, Axis, McMethod, MethodArg, Target};
use ttgreeks_cli::CliError;

#[derive(Parser)]
#[command(name = "ttgreeks", version, about = "Tensor-train Fourier pricing and Greeks for min-call options")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the price tensor (and optionally analytic Greek tensors) and
    /// write them to an artifact directory.
    Build {
        config: PathBuf,
        /// Artifact directory; defaults to `outputs.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also build analytic Greek tensors.
        #[arg(long, conflicts_with = "no_an")]
        an: bool,
        /// Skip analytic Greek tensors even if the config asks for them.
        #[arg(long)]
        no_an: bool,
    },
    /// Evaluate price and Greeks at grid nodes; one CSV row per point and quantity.
    Eval {
        artifact: PathBuf,
        /// CSV with columns k_m,l_m (node indices) or sigma_m,s0_m (node values).
        #[arg(long, conflicts_with = "random")]
        points: Option<PathBuf>,
        /// Evaluate at this many random nodes instead.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Quantities to emit (repeatable); default: price and all Greeks.
        #[arg(long = "greek", alias = "quantity", value_enum)]
        greeks: Vec<Target>,
        /// Asset of the Greeks, 1-based; default: every asset.
        #[arg(long)]
        kappa: Option<usize>,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// RMSE of the tensor values against a Malliavin reference on random
    /// nodes, next to Monte Carlo errors, operation counts and timings.
    Compare {
        artifact: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Benchmark Monte Carlo paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Reference Malliavin paths.
        #[arg(long)]
        reference_paths: Option<usize>,
        /// Asset of the Greeks, 1-based.
        #[arg(long, default_value_t = 1)]
        kappa: usize,
        /// Write the report rows as CSV instead of printing the table.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sweep one σ or S⁰ axis over its nodes with the others fixed.
    Slice {
        artifact: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Asset whose axis is swept, 1-based.
        #[arg(long, default_value_t = 1)]
        kappa: usize,
        #[arg(long = "greek", alias = "quantity", value_enum, default_value_t = Target::Price)]
        target: Target,
        /// Node indices k_1,l_1,k_2,l_2,... of the fixed point; default: middle nodes.
        #[arg(long, value_delimiter = ',')]
        at: Option<Vec<usize>>,
        /// Monte Carlo paths for the comparison column; 0 disables it.
        #[arg(long, default_value_t = 0)]
        paths: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo price and Greeks at one parameter point.
    BenchMc {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        s0: Vec<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "greek", alias = "quantity", value_enum)]
        greeks: Vec<Target>,
        #[arg(long)]
        kappa: Option<usize>,
        #[arg(long, value_enum, default_value_t = McMethod::Mix)]
        method: McMethod,
        #[arg(long, value_enum)]
        execution: Option<ExecArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { config, out, an, no_an } => {
            let analytic = if an { Some(true) } else if no_an { Some(false) } else { None };
            commands::build(&commands::BuildArgs { config, out, analytic })
        }
        Command::Eval { artifact, points, random, seed, greeks, kappa, method, out } => {
            commands::eval(&commands::EvalArgs { artifact, points, random, seed, targets: greeks, kappa, method, out })
        }
        Command::Compare { artifact, samples, seed, paths, reference_paths, kappa, out, json } => {
            commands::compare(&commands::CompareArgs {
                artifact,
                samples,
                seed,
                paths,
                reference_paths,
                kappa,
                out,
                json,
            })
            .map(|_| ())
        }
        Command::Slice { artifact, axis, kappa, target, at, paths, out } => {
            commands::slice(&commands::SliceArgs { artifact, axis, kappa, target, at, paths, out })
        }
        Command::BenchMc { config, sigma, s0, paths, seed, greeks, kappa, method, execution, out } => {
            commands::bench_mc(&commands::BenchMcArgs {
                config,
                sigma,
                s0,
                paths,
                seed,
                targets: greeks,
                kappa,
                method,
                execution: execution.map(|e| match e {
                    ExecArg::Sequential => Execution::Sequential,
                    ExecArg::Parallel => Execution::Parallel,
                }),
                out,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
