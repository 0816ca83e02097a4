use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fastmusic_bench::config::{ExperimentConfig, ExperimentKind};
use fastmusic_bench::output::Format;
use fastmusic_bench::{exit_code, run_and_write, BenchError};

#[derive(Parser)]
#[command(name = "fastmusic", version, about = "Run fast-MUSIC experiments and write CSV/JSON results")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; missing keys fall back to the published study settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// First seed; the run uses as many consecutive seeds as configured.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Grid points over [0, 180] degrees; must be odd.
    #[arg(long, global = true)]
    grid_size: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for the seed pool (runtime scaling always uses one).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Subspace-extraction time against the number of antennas.
    RuntimeScaling,
    /// Empirical spectrum ratios against the three bounds.
    BoundScatter,
    /// Peak retention when the target count is over- or under-estimated.
    RobustK,
    /// Both tuning sweeps (sketch width and power iterations).
    Tune,
    /// Sketch-width sweep of the column-sampling estimator.
    TuneP,
    /// Power-iteration sweep of the Gaussian-sketch estimator.
    TuneT,
    /// Normalized spectra of every method on one scene family.
    SpectraCompare,
    /// AoA mean squared error against SNR.
    MseVsSnr,
    /// Monte-Carlo checks of the sketching lemmas.
    LemmaSuite,
}

impl Command {
    fn kinds(self) -> Vec<ExperimentKind> {
        use ExperimentKind::*;
        match self {
            Command::RuntimeScaling => vec![RuntimeScaling],
            Command::BoundScatter => vec![BoundScatter],
            Command::RobustK => vec![RobustK],
            Command::Tune => vec![TuneP, TuneT],
            Command::TuneP => vec![TuneP],
            Command::TuneT => vec![TuneT],
            Command::SpectraCompare => vec![SpectraCompare],
            Command::MseVsSnr => vec![MseVsSnr],
            Command::LemmaSuite => vec![LemmaSuite],
        }
    }
}

fn resolve(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig::load(kind, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.rebase_seeds(seed);
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(l) = cli.grid_size {
        cfg.grid_size = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = BenchError::Config(e.kind().to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(exit_code::USAGE as u8);
        }
    };

    // Resolve every config before any work so a bad one writes nothing.
    let configs: Result<Vec<_>, _> = cli.command.kinds().into_iter().map(|k| resolve(&cli, k)).collect();
    let configs = match configs {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e.record());
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    // Querying rayon initializes its default pool, so build first when asked.
    if let Some(n) = cli.threads {
        let built = match n {
            0 => Err("need at least one thread".to_string()),
            n => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string()),
        };
        if let Err(e) = built {
            let err = BenchError::Config(format!("cannot build a {n}-thread pool: {e}"));
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code() as u8);
        }
    }
    let threads = rayon::current_num_threads();

    let mut failures = 0;
    for cfg in &configs {
        match run_and_write(cfg, cli.format, threads) {
            Ok((out, manifest)) => {
                failures += out.failures.len();
                println!(
                    "{}: {} rows, {} failures, manifest {}",
                    cfg.kind,
                    out.rows.len(),
                    out.failures.len(),
                    manifest.display()
                );
            }
            Err(e) => {
                eprintln!("{}", e.record());
                return ExitCode::from(e.exit_code() as u8);
            }
        }
    }
    if failures > 0 {
        ExitCode::from(exit_code::COMPLETED_WITH_FAILURES as u8)
    } else {
        ExitCode::SUCCESS
    }
}
