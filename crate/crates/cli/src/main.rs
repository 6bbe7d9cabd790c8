mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use episir::ModelKind;

use commands::{Context, PreprocessArgs, SimulateArgs};
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "episir", version, about = "Fit standard and extended SIR models to daily case data")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the multistart draws; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Print the full default configuration and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Standard,
    Extended,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Standard => ModelKind::Standard,
            ModelArg::Extended => ModelKind::Extended,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive S, I, R series and descriptive statistics from a raw case table.
    Preprocess {
        /// Raw case CSV (defaults to data.raw).
        raw: Option<PathBuf>,
        /// Output S/I/R CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output statistics CSV.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        incubation_days: Option<usize>,
        #[arg(long)]
        turnaround_days: Option<usize>,
        #[arg(long)]
        infectious_days: Option<usize>,
        #[arg(long)]
        recovery_fraction: Option<f64>,
        /// Count a case on the cutoff day itself as susceptible.
        #[arg(long)]
        inclusive_cutoff: bool,
    },
    /// Two-step fit of both models; writes reports, parameters and trajectories.
    Fit {
        /// S/I/R series CSV (defaults to data.series).
        series: Option<PathBuf>,
    },
    /// Integrate a model and write t,S,I,R.
    Simulate {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Parameter file (TOML, or JSON by extension).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        r0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the three standard-model panels of figure 1 instead.
        #[arg(long)]
        fig1: bool,
    },
    /// Compare two fit reports on AIC, AICc, SSE and R².
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_default_config {
        print!("{}", RunConfig::default_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no command given; see --help".into()));
    };
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| config.out_dir.clone());
    let ctx = Context {
        config,
        out_dir,
        verbose: cli.verbose,
    };
    match command {
        Command::Preprocess {
            raw,
            out,
            stats,
            incubation_days,
            turnaround_days,
            infectious_days,
            recovery_fraction,
            inclusive_cutoff,
        } => commands::preprocess(
            &ctx,
            PreprocessArgs {
                raw,
                out,
                stats,
                incubation_days,
                turnaround_days,
                infectious_days,
                recovery_fraction,
                inclusive_cutoff,
            },
        ),
        Command::Fit { series } => commands::fit(&ctx, series),
        Command::Simulate {
            model,
            params,
            days,
            s0,
            i0,
            r0,
            out,
            fig1,
        } => commands::simulate_cmd(
            &ctx,
            SimulateArgs {
                model: model.map(Into::into),
                params,
                days,
                s0,
                i0,
                r0,
                out,
                fig1,
            },
        ),
        Command::Compare { report_a, report_b, out } => {
            commands::compare_cmd(&ctx, &report_a, &report_b, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let _ = e.print();
            eprintln!("error[UsageError]: {msg}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
