//! Command line front end. Parsing lives here; the work happens in
//! `commands`. Exit codes: 0 success, 2 bad input or config, 3 calibration
//! failed to converge, 4 numerical or runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spprt_cli::commands;
use spprt_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "spprt",
    version,
    about = "Design and evaluation of cost-optimal group-sequential binomial tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Dynamic program over reachable outcome states.
    Exact,
    /// Backward recursion on the design grid with interpolation.
    Grid,
    /// Monte Carlo simulation; requires --seed.
    Mc,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Exact => "exact",
            MethodArg::Grid => "grid",
            MethodArg::Mc => "mc",
        }
    }
}

#[derive(Args)]
struct OutDirArg {
    /// Directory for output artifacts (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CostOverrideArgs {
    /// Override the plan's cost model: fixed cost per group.
    #[arg(long)]
    cost_c0: Option<f64>,

    /// Override the plan's cost model: cost per observation.
    #[arg(long)]
    cost_cu: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an optimal sampling plan from a design config.
    Design {
        /// Design config (JSON).
        #[arg(long)]
        config: PathBuf,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Evaluate a plan's operating characteristics.
    Evaluate {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        /// Extra success probabilities for the OC curve (repeatable).
        #[arg(long = "theta")]
        thetas: Vec<f64>,

        /// Evaluation method.
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,

        /// RNG seed (required for --method mc).
        #[arg(long)]
        seed: Option<u64>,

        /// Monte Carlo trials (default 100000).
        #[arg(long)]
        trials: Option<u64>,

        #[command(flatten)]
        cost: CostOverrideArgs,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Search multipliers to hit target error rates, then design.
    Calibrate {
        /// Calibration spec (JSON).
        #[arg(long)]
        spec: PathBuf,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Tabulate the probability of accepting H0 across theta.
    Oc {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        /// Explicit evaluation points (repeatable).
        #[arg(long = "theta")]
        thetas: Vec<f64>,

        /// Start of an evenly spaced theta range.
        #[arg(long, requires = "theta_max")]
        theta_min: Option<f64>,

        /// End of an evenly spaced theta range.
        #[arg(long, requires = "theta_min")]
        theta_max: Option<f64>,

        /// Number of points in the range (default 21).
        #[arg(long, default_value_t = 21)]
        theta_count: u32,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Monte Carlo estimate of a plan's characteristics at one theta.
    Simulate {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        /// True success probability.
        #[arg(long)]
        theta: f64,

        /// Number of simulated tests.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,

        /// RNG seed.
        #[arg(long)]
        seed: u64,

        #[command(flatten)]
        cost: CostOverrideArgs,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Compare a plan against the smallest fixed-sample-size test.
    CompareFss {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        /// Target type I error (default: the plan's achieved alpha).
        #[arg(long)]
        alpha: Option<f64>,

        /// Target type II error (default: the plan's achieved beta).
        #[arg(long)]
        beta: Option<f64>,

        /// Largest sample size to consider.
        #[arg(long, default_value_t = 100_000)]
        n_cap: u64,

        /// Sweep mode: smallest multiplier on each axis.
        #[arg(long, requires = "sweep_max")]
        sweep_min: Option<f64>,

        /// Sweep mode: largest multiplier on each axis.
        #[arg(long, requires = "sweep_min")]
        sweep_max: Option<f64>,

        /// Points per sweep axis (default 9).
        #[arg(long, default_value_t = 9)]
        sweep_points: u32,

        #[command(flatten)]
        cost: CostOverrideArgs,

        #[command(flatten)]
        out: OutDirArg,
    },

    /// Advise the next group size (or the decision) mid-experiment.
    Next {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        /// Observed groups so far as SIZE:SUCCESSES pairs, comma separated.
        #[arg(long, default_value = "")]
        history: String,
    },

    /// Re-emit a saved plan's summary tables without redesigning.
    ExportPlan {
        /// Plan file produced by design or calibrate.
        #[arg(long)]
        plan: PathBuf,

        #[command(flatten)]
        out: OutDirArg,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design { config, out } => commands::design(&config, &out.out_dir),
        Command::Evaluate {
            plan,
            thetas,
            method,
            seed,
            trials,
            cost,
            out,
        } => commands::evaluate(
            &plan,
            &thetas,
            method.name(),
            seed,
            trials,
            cost.cost_c0,
            cost.cost_cu,
            &out.out_dir,
        ),
        Command::Calibrate { spec, out } => commands::run_calibrate(&spec, &out.out_dir),
        Command::Oc {
            plan,
            thetas,
            theta_min,
            theta_max,
            theta_count,
            out,
        } => {
            let range = match (theta_min, theta_max) {
                (Some(lo), Some(hi)) => Some((lo, hi, theta_count)),
                _ => None,
            };
            commands::oc(&plan, &thetas, range, &out.out_dir)
        }
        Command::Simulate {
            plan,
            theta,
            trials,
            seed,
            cost,
            out,
        } => commands::run_simulate(
            &plan,
            theta,
            trials,
            seed,
            cost.cost_c0,
            cost.cost_cu,
            &out.out_dir,
        ),
        Command::CompareFss {
            plan,
            alpha,
            beta,
            n_cap,
            sweep_min,
            sweep_max,
            sweep_points,
            cost,
            out,
        } => {
            let sweep = match (sweep_min, sweep_max) {
                (Some(lo), Some(hi)) => Some((lo, hi, sweep_points)),
                _ => None,
            };
            commands::compare_fss(
                &plan,
                alpha,
                beta,
                n_cap,
                sweep,
                cost.cost_c0,
                cost.cost_cu,
                &out.out_dir,
            )
        }
        Command::Next { plan, history } => commands::next(&plan, &history),
        Command::ExportPlan { plan, out } => commands::export_plan(&plan, &out.out_dir),
    }
}

fn main() -> ExitCode {
    // die quietly when stdout closes mid-pipe (e.g. `spprt design | head`)
    // instead of panicking on the failed write
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
