//! Command-line front end: run searches, baselines, plots and exports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qarch::agent::Phase;
use qarch::experiment::{append_report, emit_plots, run_baseline, run_experiment_in, ExperimentConfig, RunSummary};
use qarch::vqc::{circuit_to_text, read_circuit};

#[derive(Parser)]
#[command(name = "qarch", version, about = "Reinforcement-learning search for quantum classifier circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search from a config file or preset name.
    Run {
        config: String,
        /// Single agent seed (overrides the config's seed list).
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Comma-separated agent seeds, run one after another.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output root (defaults to $QARCH_OUT, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-test-episode progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-render the SVG charts of a finished run.
    Plot { run_dir: PathBuf },
    /// Print the best circuit of a run and its test accuracy.
    ExportCircuit { run_dir: PathBuf },
    /// Logistic-regression baseline on a config's dataset.
    Baseline {
        config: String,
        /// Comma-separated data seeds (default: the config's data_seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &str, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::resolve(config)?;
    if let Some(out) = out {
        c.output_dir = out.to_string_lossy().into_owned();
    }
    Ok(c)
}

fn run(config: &str, seed: Option<u64>, seeds: Option<Vec<u64>>, out: Option<PathBuf>, quiet: bool) -> Result<()> {
    let c = load(config, out)?;
    let seeds = match (seed, seeds) {
        (Some(s), _) => vec![s],
        (None, Some(list)) => list,
        (None, None) => c.seeds.clone(),
    };
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    for seed in seeds {
        let dir = c.run_dir(seed);
        let start = Instant::now();
        let mut progress = |r: &qarch::experiment::EpisodeRecord| {
            if !quiet && r.phase == Phase::Test {
                println!(
                    "[{} seed {seed}] episode {:>5}  test acc {:.3}  gates {:>2}  y_target {:.2}",
                    c.name, r.episode, r.accuracy, r.gates, r.y_target
                );
            }
        };
        let output =
            run_experiment_in(&c, seed, &dir, &mut progress).with_context(|| format!("run {} seed {seed}", c.name))?;
        report(&output.summary, &output.run_dir, start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn report(s: &RunSummary, dir: &Path, secs: f64) {
    println!("run {} seed {} finished in {secs:.1}s -> {}", s.name, s.seed, dir.display());
    println!("  final y_target {:.2}, final epsilon {:.4}", s.final_y_target, s.final_epsilon);
    if let Some(b) = &s.best {
        println!(
            "  best circuit: {} episode {}, accuracy {:.4}, {} gates",
            b.phase.as_str(),
            b.episode,
            b.exported_accuracy,
            b.gates
        );
    }
}

fn export_circuit(run_dir: &Path) -> Result<()> {
    let path = run_dir.join("best_circuit.txt");
    let circuit = read_circuit(&path).with_context(|| format!("reading {}", path.display()))?;
    print!("{}", circuit_to_text(&circuit));
    let config = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let (_, test) = qarch::experiment::build_datasets(&config)?;
    println!("# test_accuracy={}", qarch::vqc::evaluate_accuracy(&circuit, &test)?);
    Ok(())
}

fn baseline(config: &str, seeds: Option<Vec<u64>>, out: Option<PathBuf>) -> Result<()> {
    let c = load(config, out)?;
    let seeds = seeds.unwrap_or_else(|| vec![c.data_seed]);
    let results = run_baseline(&c, &seeds)?;
    for r in &results {
        println!(
            "logreg {} data_seed {}: test accuracy {:.4} ({} parameters)",
            c.name, r.seed, r.test_accuracy, r.n_params
        );
        append_report(&c.output_root(), &format!("logreg,{},{},{},{},", c.name, r.seed, r.test_accuracy, r.n_params))?;
    }
    let mean = results.iter().map(|r| r.test_accuracy).sum::<f64>() / results.len() as f64;
    println!("mean test accuracy {mean:.4} over {} seeds", results.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, seeds, out, quiet } => run(&config, seed, seeds, out, quiet),
        Command::Plot { run_dir } => emit_plots(&run_dir)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
            .map_err(Into::into),
        Command::ExportCircuit { run_dir } => export_circuit(&run_dir),
        Command::Baseline { config, seeds, out } => baseline(&config, seeds, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
