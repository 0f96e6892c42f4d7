mod commands;
mod config;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};

/// Numerical experiments for half-Laplacian phase transitions.
#[derive(Debug, Parser)]
#[command(name = "halflap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for randomized data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads, 0 for automatic.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Residuals, trace and field of the explicit sine layer.
    Layer,
    /// Energy minimiser on a cylinder with layer data on the lateral and top boundary.
    Minimize,
    /// Saddle solution on the wedge and its odd reflection.
    Saddle,
    /// Energies of the explicit layer over nested cylinders with a scaling fit.
    EnergyScan,
    /// H^1/2 norms of ramp profiles against |log ε|.
    Hhalf,
    /// Liouville quotients and one-dimensionality diagnostics.
    Symmetry,
    /// Poisson or mollifier extension of layer or random data.
    Extend,
    /// Closed-form checks across all modules.
    Selftest,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => config::load(path).map_err(Failure::Validation)?,
        None => config::Config::default(),
    };
    cfg.validate().map_err(Failure::Validation)?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Io(format!("{}: {e}", cli.out.display())))?;
    let ctx = Context {
        cfg: &cfg,
        out: &cli.out,
        seed: cli.seed,
    };
    match cli.command {
        Command::Layer => commands::layer(&ctx),
        Command::Minimize => commands::minimize(&ctx),
        Command::Saddle => commands::saddle(&ctx),
        Command::EnergyScan => commands::energy_scan_cmd(&ctx),
        Command::Hhalf => commands::hhalf(&ctx),
        Command::Symmetry => commands::symmetry(&ctx),
        Command::Extend => commands::extend(&ctx),
        Command::Selftest => {
            let (csv, failed) = selftest::run();
            std::fs::write(cli.out.join("selftest.csv"), csv)
                .map_err(|e| Failure::Io(format!("selftest.csv: {e}")))?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Property(format!(
                    "selftest failures: {}",
                    failed.join(" ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "error kind={} code={} reason={}",
                f.kind(),
                f.code(),
                f.reason().replace('\n', " ")
            );
            ExitCode::from(f.code() as u8)
        }
    }
}
