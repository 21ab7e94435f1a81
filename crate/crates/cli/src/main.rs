use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dbal_core::data::{
    generate_multilabel, generate_phases, save_dataset, MultiLabelTaskSpec, PhaseTaskSpec, TaskKind,
};
use dbal_core::harness::{compare_to_random, render_tables, run_active_learning, ExperimentConfig, RunResult};

#[derive(Parser)]
#[command(name = "dbal", version, about = "Monte-Carlo-dropout active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Generate {
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the default feature noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run one active-learning experiment.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the configured method against repeated random baselines.
    Compare {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write each baseline run to this directory.
        #[arg(long)]
        baselines_dir: Option<PathBuf>,
    },
    /// Render result files as tables.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Write the CSV form here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: dbal_core::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { task, seed, noise, out } => {
            let dataset = match task {
                TaskKind::MultiLabel => {
                    let mut spec = MultiLabelTaskSpec::desk_scale();
                    if let Some(n) = noise {
                        spec.noise = n;
                    }
                    generate_multilabel(&spec, seed)?
                }
                TaskKind::Phase => {
                    let mut spec = PhaseTaskSpec::desk_scale();
                    if let Some(n) = noise {
                        spec.noise = n;
                    }
                    generate_phases(&spec, seed)?
                }
            };
            save_dataset(&dataset, &out)?;
            eprintln!(
                "wrote {} videos, {} frames to {}",
                dataset.videos.len(),
                dataset.frame_count(),
                out.display()
            );
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let result = run_active_learning(&cfg)?;
            result.save(&out)?;
            print!("{}", render_tables(std::slice::from_ref(&result)).text);
        }
        Command::Compare {
            config,
            out,
            baselines_dir,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let cmp = compare_to_random(&cfg)?;
            cmp.method.save(&out)?;
            if let Some(dir) = baselines_dir {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for (r, b) in cmp.baselines.iter().enumerate() {
                    b.save(dir.join(format!("random_{r}.json")))?;
                }
            }
            print!("{}", render_tables(std::slice::from_ref(&cmp.method)).text);
        }
        Command::Report { results, csv } => {
            let runs = results.iter().map(RunResult::load).collect::<Result<Vec<_>, _>>()?;
            let tables = render_tables(&runs);
            print!("{}", tables.text);
            if let Some(path) = csv {
                std::fs::write(&path, tables.csv).map_err(|e| dbal_core::Error::io(path, e))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<dbal_core::Error>()
                .map_or(3, dbal_core::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
