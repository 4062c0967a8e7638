use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use augeval::corpus::{generate_synthetic, write_csv};
use augeval::runner::{
    emit_report, read_run, run_experiment, write_run, ExperimentConfig, ReportFormat,
    SyntheticSource, REPORT_STEM,
};

#[derive(Parser)]
#[command(name = "augeval", version, about = "Oversampling experiments for imbalanced text classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results, report and ROC ensembles to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sizes 200/50/400, 2 repetitions, 8 replicates, 500 bootstrap draws.
        #[arg(long)]
        desk_scale: bool,
        /// Master seed; takes precedence over AUGEVAL_SEED.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-emit the report of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file; defaults to report.<format> inside the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    Config {
        #[arg(long)]
        desk_scale: bool,
    },
    /// Write a synthetic corpus as a text,label CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        n_docs: usize,
        #[arg(long, default_value_t = 0.1)]
        minority_ratio: f64,
        #[arg(long, default_value_t = 500)]
        vocab_size: usize,
        #[arg(long, default_value_t = 20.0)]
        length_mean: f64,
        #[arg(long, default_value_t = 0.5)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            desk_scale,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?
                .apply_env()?;
            if desk_scale {
                cfg = cfg.desk_scale();
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            log::info!(
                "running {} method(s) over train sizes {:?} with seed {}",
                cfg.methods.len(),
                cfg.train_sizes,
                cfg.master_seed
            );
            let output = run_experiment(&cfg)?;
            write_run(&output, &out).with_context(|| format!("writing {}", out.display()))?;
            let failed = output.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                log::warn!("{failed} of {} cells failed; see the error column", output.cells.len());
            }
            log::info!("wrote {} cells to {}", output.cells.len(), out.display());
        }
        Command::Report { input, format, out } => {
            let run = read_run(&input).with_context(|| format!("reading {}", input.display()))?;
            if run.cells.is_empty() {
                bail!("{} holds no results", input.display());
            }
            let format = ReportFormat::from(format);
            let path = out.unwrap_or_else(|| input.join(format!("{REPORT_STEM}.{}", format.extension())));
            emit_report(&run.cells, &path, format)?;
            println!("{}", path.display());
        }
        Command::Config { desk_scale } => {
            let mut cfg = ExperimentConfig::default();
            if desk_scale {
                cfg = cfg.desk_scale();
            }
            print!("{}", cfg.to_toml()?);
        }
        Command::Synth {
            out,
            n_docs,
            minority_ratio,
            vocab_size,
            length_mean,
            signal,
            seed,
        } => {
            let source = SyntheticSource {
                n_docs,
                minority_ratio,
                vocab_size,
                length_mean,
                signal,
                seed,
            };
            let (corpus, _) = generate_synthetic(&source.spec())?;
            write_csv(&corpus, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}
