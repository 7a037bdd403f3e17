use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use spinbath::experiment::acceptance;
use spinbath::experiment::plot::{plot_export, DATA_FILE};
use spinbath::experiment::runner::{run_with_workers, workers_from_env, WORKERS_ENV};
use spinbath::experiment::{ExperimentConfig, ResultTable};

#[derive(Parser)]
#[command(name = "spinbath", version, about = "Decoherence and thermalization of spin systems in spin baths")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write its result table.
    Run {
        config: PathBuf,
        /// Output CSV; overrides the config's `output` key. `-` writes to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a gnuplot data file and script for a result table.
    Plot {
        table: PathBuf,
        /// Directory for the data file and `plot.gp`.
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the built-in acceptance suite.
    Check {
        /// Criteria to run, by number; all when omitted.
        criteria: Vec<usize>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let workers = cli.workers.filter(|w| *w > 0).unwrap_or_else(workers_from_env);
    match cli.command {
        Command::Run { config, output } => {
            let cfg = ExperimentConfig::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
            let table = run_with_workers(&cfg, workers)?;
            match output.or_else(|| cfg.output.clone()) {
                Some(p) if p.as_os_str() != "-" => {
                    table.write(&p).with_context(|| format!("writing {}", p.display()))?;
                }
                _ => std::io::stdout().write_all(table.to_csv().as_bytes())?,
            }
            let failures = table.failures().count();
            if failures > 0 {
                for r in table.failures() {
                    eprintln!("point {}: {}", r.point.index, r.status);
                }
                eprintln!("{failures} failed rows");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { table, out_dir } => {
            let t = ResultTable::read(&table).with_context(|| format!("reading {}", table.display()))?;
            let export = plot_export(&t);
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join(DATA_FILE), export.data)?;
            std::fs::write(out_dir.join("plot.gp"), export.script)?;
            println!("wrote {} and plot.gp in {}", DATA_FILE, out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { criteria } => {
            let ids: Vec<usize> = if criteria.is_empty() { (1..=9).collect() } else { criteria };
            if let Some(bad) = ids.iter().find(|i| !(1..=9).contains(*i)) {
                anyhow::bail!("no criterion {bad}; criteria are numbered 1 to 9");
            }
            let mut all = true;
            for id in ids {
                let outcome = acceptance::run_criterion(id, workers);
                println!("{outcome}");
                all &= outcome.passed;
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
