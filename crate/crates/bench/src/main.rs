use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpsynth::datagen::{generate, save_csv, GaussFamily, GaussSpec};
use dpsynth_bench::{emit_csv, run_experiment_with_jobs, ExperimentConfig, SchemaConfig};

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Benchmark sweeps for differentially private synthesizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report path; defaults to the config's `output`, then `<output-dir>/<config name>.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, env = "DPSYNTH_OUTPUT_DIR", default_value = "results")]
        output_dir: PathBuf,
        /// Points evaluated in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's `time_limit_minutes`.
        #[arg(long = "time-limit")]
        time_limit: Option<f64>,
    },
    /// Write a synthetic Gaussian dataset as CSV.
    Gen {
        #[arg(long, value_parser = parse_family)]
        family: GaussFamily,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the column schema as TOML, ready for a CSV dataset config.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

fn parse_family(s: &str) -> Result<GaussFamily, String> {
    match s {
        "eye" => Ok(GaussFamily::Eye),
        "corr" => Ok(GaussFamily::Corr),
        "mix_unsup" | "mix-unsup" => Ok(GaussFamily::MixUnsup),
        "mix_sup" | "mix-sup" => Ok(GaussFamily::MixSup),
        other => Err(format!(
            "unknown family `{other}` (eye, corr, mix_unsup, mix_sup)"
        )),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output,
            output_dir,
            jobs,
            time_limit,
        } => {
            let mut experiment = ExperimentConfig::load(&config)?;
            if let Some(limit) = time_limit {
                experiment.time_limit_minutes = limit;
            }
            let path = output
                .or_else(|| experiment.output.clone())
                .unwrap_or_else(|| {
                    let stem = config
                        .file_stem()
                        .map_or_else(|| "report".into(), |s| s.to_os_string());
                    output_dir.join(stem).with_extension("csv")
                });
            let rows = run_experiment_with_jobs(&experiment, jobs)?;
            emit_csv(&rows, &path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Gen {
            family,
            n,
            d,
            seed,
            out,
            schema,
        } => {
            let table = generate(&GaussSpec::new(family, n, d, seed)?)?;
            save_csv(&table, &out)?;
            if let Some(path) = schema {
                let text = toml::to_string(&SchemaConfig::from_schema(table.schema()))?;
                std::fs::write(&path, text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
