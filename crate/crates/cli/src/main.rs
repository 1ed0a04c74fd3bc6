use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracarb_core::experiment::{
    load_config, presets, run_calculus_suite, run_experiment, write_report, ExperimentConfig,
    RunReport, CONFIG_ERROR_EXIT_CODE,
};
use fracarb_core::Error;

#[derive(Parser)]
#[command(
    name = "fracarb",
    about = "Seeded arbitrage and pathwise-calculus experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate markets and certify the arbitrage portfolio on every seed and level.
    Simulate(RunArgs),
    /// Run the pathwise calculus convergence tables.
    Calculus(RunArgs),
    /// Parse and validate a configuration, listing every violation.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the shipped preset configurations as JSON files.
    Presets {
        #[arg(long, default_value = "presets")]
        out: PathBuf,
    },
    /// Print the library version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(CONFIG_ERROR_EXIT_CODE as u8)
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Configuration(_) | Error::ParameterDomain { .. } => CONFIG_ERROR_EXIT_CODE as u8,
        e if e.is_consistency() => 3,
        _ => 2,
    }
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), ExitCode> {
    let mut config = load_config(&args.config).map_err(config_error)?;
    if let Some(n) = args.seeds {
        config.num_seeds = n;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.to_string_lossy().into_owned();
    }
    config.validate().map_err(config_error)?;
    let out = PathBuf::from(&config.output_dir);
    Ok((config, out))
}

fn print_summary(report: &RunReport, out: &Path) {
    for v in &report.verdicts {
        let mark = match (v.applicable, v.passed) {
            (false, _) => "n/a ",
            (true, true) => "pass",
            (true, false) => "FAIL",
        };
        println!("{mark}  {:<24} {}", v.name, v.detail);
    }
    if !report.failures.is_empty() {
        println!("{} per-seed failures recorded", report.failures.len());
    }
    println!(
        "{:?} in {:.2}s; report written to {}",
        report.outcome(),
        report.wall_time_seconds,
        out.display()
    );
}

fn run(args: &RunArgs, f: fn(&ExperimentConfig) -> fracarb_core::Result<RunReport>) -> ExitCode {
    let (config, out) = match prepare(args) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    let report = match pool.install(|| f(&config)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_code(&e));
        }
    };
    if let Err(e) = write_report(&report, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR_EXIT_CODE as u8);
    }
    print_summary(&report, &out);
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => run(&args, run_experiment),
        Command::Calculus(args) => run(&args, run_calculus_suite),
        Command::ValidateConfig { config } => match load_config(&config) {
            Ok(c) => {
                println!("{}", c.to_json());
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
        Command::Presets { out } => {
            if let Err(e) = std::fs::create_dir_all(&out) {
                return config_error(e);
            }
            for (name, config) in presets() {
                let path = out.join(format!("{name}.json"));
                if let Err(e) = std::fs::write(&path, config.to_json() + "\n") {
                    return config_error(format!("{}: {e}", path.display()));
                }
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("fracarb {}", fracarb_core::VERSION);
            ExitCode::SUCCESS
        }
    }
}
