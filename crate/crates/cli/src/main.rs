use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qflrl_cli::{config, output, take_threads, CliError, Experiment, THREADS_ENV};

#[derive(Parser)]
#[command(name = "qflrl", version, about = "Run qflrl experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics.csv, summary.json and checkpoint.json.
    Run {
        /// Config file, or an experiment name to run with defaults.
        source: String,
        /// Overrides such as --seed 3, --threads=4 or --sme.kappa_meas=0.25.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Check a config without running it and echo every applied default.
    Validate {
        /// Config file or experiment name; omit for the defaults of every experiment.
        source: Option<String>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// List the experiment tags.
    ListExperiments,
}

fn print_error(err: &CliError) {
    eprintln!("{}", output::error_record(err));
}

fn run(source: &str, args: &[String]) -> Result<(), CliError> {
    let mut overrides = config::parse_overrides(args)?;
    let env = std::env::var(THREADS_ENV).ok();
    let threads = take_threads(&mut overrides, env.as_deref())?;
    let cfg = config::load(Some(source), &overrides)?.into_run()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    pool.build_global().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    match qflrl_cli::run(&cfg) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary["metrics"]).unwrap_or_default());
            Ok(())
        }
        Err(err) => {
            if let Err(io) = output::write_error(&cfg.out_dir, &err) {
                log::error!("could not write error.json: {io}");
            }
            Err(err)
        }
    }
}

fn validate(source: Option<&str>, args: &[String]) -> Result<bool, CliError> {
    let mut overrides = config::parse_overrides(args)?;
    take_threads(&mut overrides, None)?;
    let raw = config::load(source, &overrides)?;
    let report = qflrl_cli::validate(&raw);
    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    Ok(report["valid"] == serde_json::Value::Bool(true))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, overrides } => run(&source, &overrides).map(|()| true),
        Command::Validate { source, overrides } => validate(source.as_deref(), &overrides),
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<14} {}", e.name(), e.description());
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            print_error(&err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
