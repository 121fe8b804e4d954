//! Command-line front end for the accept-reject hypothesis tests.
//!
//! Exit codes: 0 success (whether or not the null is rejected), 2 usage
//! or input problems, 3 numeric failures such as degenerate data.

use clap::{Args, Parser, Subcommand};

mod commands;
mod data;
mod spec_arg;

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self { message, code: 2 }
    }

    pub fn numeric(message: String) -> Self {
        Self { message, code: 3 }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Significance level for the rejection threshold and interval level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Monte Carlo replicates M for the null distribution.
    #[arg(long = "mc-reps", default_value_t = 999)]
    pub mc_reps: usize,

    /// Master seed; fixed seed gives byte-identical output.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Write the JSON report to this file as well as stdout.
    #[arg(long)]
    pub out: Option<String>,
}

impl CommonArgs {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::input(format!(
                "--alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.mc_reps < 100 {
            return Err(CliError::input(format!(
                "--mc-reps must be >= 100, got {}",
                self.mc_reps
            )));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct GofArgs {
    /// Wide-format CSV with a header row; all columns are coordinates.
    #[arg(long)]
    pub data: String,

    /// Null density, FAMILY:PARAMS (see long --help).
    #[arg(long, long_help = spec_arg::NULL_SPEC_HELP)]
    pub null: String,

    /// Override the kernel bandwidth in every dimension.
    #[arg(long)]
    pub bandwidth: Option<f64>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct MeanEqArgs {
    /// Wide-format CSV, one column per group/variable.
    #[arg(long)]
    pub data: String,

    /// Treat columns as independent groups: diagonal covariance, and NA
    /// cells drop per column (groups may have unequal sizes).
    #[arg(long)]
    pub independent: bool,

    /// Also print pairwise comparisons with Bonferroni-adjusted p-values.
    #[arg(long)]
    pub pairwise: bool,

    /// Binomial n for the credible interval (default: largest group size).
    #[arg(long = "ci-n")]
    pub ci_n: Option<usize>,

    /// Add eps to the covariance diagonal (explicit escape hatch for
    /// near-singular covariance; changes the test, use deliberately).
    #[arg(long)]
    pub ridge: Option<f64>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct MeanVecArgs {
    /// Wide-format CSV with a header row.
    #[arg(long)]
    pub data: String,

    /// Hypothesized mean vector, comma-separated, one entry per column.
    #[arg(long)]
    pub mu0: String,

    /// Known population covariance as a p x p headered CSV.
    #[arg(long = "sigma-file")]
    pub sigma_file: Option<String>,

    /// Print the likelihood-ratio baseline next to the test.
    #[arg(long = "with-lr")]
    pub with_lr: bool,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Builtin scenario family to run (see --list).
    #[arg(long)]
    pub scenario: Option<String>,

    /// Restrict to scenarios with this sample size.
    #[arg(long)]
    pub n: Option<usize>,

    /// Replications per scenario (default 1000; the studies' source
    /// tables use up to 10000).
    #[arg(long)]
    pub reps: Option<usize>,

    /// Null-calibration replicates M per scenario (default 999).
    #[arg(long = "mc-reps")]
    pub mc_reps: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory for CSV/JSON artifacts (default power-results).
    #[arg(long)]
    pub out: Option<String>,

    /// List builtin scenario families and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Goodness-of-fit test of the data against a specified null density.
    Gof(GofArgs),
    /// Test equality of column means via the grand-mean null.
    MeanEq(MeanEqArgs),
    /// Test the mean vector against a fixed hypothesized vector.
    MeanVec(MeanVecArgs),
    /// Run builtin size/power scenarios and export the results.
    Power(PowerArgs),
    /// Show how to obtain the application datasets (not bundled).
    FetchDocs,
}

/// Accept-reject hypothesis tests on CSV data.
#[derive(Parser, Debug)]
#[command(name = "artest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gof(args) => {
            args.common.validate()?;
            commands::cmd_gof(args)
        }
        Command::MeanEq(args) => {
            args.common.validate()?;
            commands::cmd_mean_eq(args)
        }
        Command::MeanVec(args) => {
            args.common.validate()?;
            commands::cmd_mean_vec(args)
        }
        Command::Power(args) => commands::cmd_power(args),
        Command::FetchDocs => {
            commands::cmd_fetch_docs();
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code);
    }
}
