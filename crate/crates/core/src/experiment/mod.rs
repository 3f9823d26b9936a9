//! Experiment runner: builds the data, environment and agent from a config,
//! runs the train/test episode loop and writes every run artifact.
//!
//! A run directory holds `config.toml`, `episodes.csv`, `trace.csv`,
//! `best_circuit.txt`, `summary.json`, `agent.json`, `policy.mlp` and
//! `plots/*.svg`.

mod config;
mod plot;
mod records;

pub use config::{DatasetKind, ExperimentConfig, DEFAULT_OUT, OUT_ENV, PRESETS};
pub use plot::{emit_plots, emit_plots_with, render_charts, Chart, PlotOptions, Series, PLOT_FILES};
pub use records::{moving_average, read_episodes, EpisodeRecord, EpisodeWriter, EPISODES_HEADER};

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, EpisodeOutcome, Phase, Transition};
use crate::baselines::{logreg_accuracy, logreg_train, LogRegConfig};
use crate::datasets::{make_classification, make_moons, train_test_split, Dataset};
use crate::env::{EnvConfig, QasEnv, TraceWriter};
use crate::error::{QasError, Result};
use crate::rng::derive_seed;
use crate::vqc::{evaluate_accuracy, read_circuit, write_circuit, CircuitSpec};

pub const REPORT_HEADER: &str = "method,name,seed,test_accuracy,n_params,gates";

/// The train/test split a config describes; independent of the agent seed.
pub fn build_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = match config.dataset {
        DatasetKind::Classification => make_classification(
            config.n_samples,
            config.n_qubits,
            config.n_informative,
            config.class_sep,
            config.data_seed,
        )?,
        DatasetKind::Moons => make_moons(config.n_samples, config.noise_std, config.data_seed)?,
    };
    train_test_split(&data, config.test_fraction, derive_seed(config.data_seed, 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCircuit {
    pub episode: usize,
    pub phase: Phase,
    pub accuracy: f64,
    pub gates: usize,
    /// Test accuracy of the exported (rounded-angle) circuit.
    pub exported_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub episodes: usize,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub final_y_target: f64,
    pub final_epsilon: f64,
    pub env_steps: u64,
    pub learn_steps: u64,
    pub best: Option<BestCircuit>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub records: Vec<EpisodeRecord>,
    pub summary: RunSummary,
}

struct Episode {
    accuracy: f64,
    gates: usize,
    reward: f64,
    success: bool,
    epsilon: f64,
}

struct Runner<'a> {
    env: QasEnv,
    agent: Agent,
    trace: TraceWriter<BufWriter<File>>,
    trace_episode: usize,
    best: Option<(BestCircuit, CircuitSpec)>,
    adaptive: bool,
    on_record: &'a mut dyn FnMut(&EpisodeRecord),
}

impl Runner<'_> {
    fn episode(&mut self, phase: Phase, episode: usize) -> Result<Episode> {
        let mut obs = self.env.reset();
        let mut total = 0.0;
        let mut step = 0;
        loop {
            let epsilon = if phase == Phase::Train { self.agent.epsilon() } else { 0.0 };
            let action = self.agent.act(&obs, epsilon)?;
            let result = self.env.step(action)?;
            self.trace.record(self.trace_episode, step, action, &result).map_err(|e| QasError::io("trace.csv", e))?;
            total += result.reward;
            step += 1;
            if phase == Phase::Train {
                self.agent.observe(Transition {
                    state: std::mem::take(&mut obs),
                    action,
                    reward: result.reward,
                    next_state: result.observation.clone(),
                    done: result.done,
                    episode: episode as u64,
                });
                self.agent.learn()?;
            }
            obs = result.observation;
            if result.done {
                self.trace_episode += 1;
                let info = result.info;
                self.consider_best(phase, episode, info.accuracy, info.gate_count);
                return Ok(Episode {
                    accuracy: info.accuracy,
                    gates: info.gate_count,
                    reward: total,
                    success: info.accuracy >= info.y_target,
                    epsilon,
                });
            }
        }
    }

    fn consider_best(&mut self, phase: Phase, episode: usize, accuracy: f64, gates: usize) {
        let better = match &self.best {
            None => true,
            Some((b, _)) => accuracy > b.accuracy || (accuracy == b.accuracy && gates < b.gates),
        };
        if better {
            let info = BestCircuit { episode, phase, accuracy, gates, exported_accuracy: f64::NAN };
            self.best = Some((info, self.env.circuit().clone()));
        }
    }

    fn finish(&mut self, phase: Phase, episode: usize, ep: &Episode) -> EpisodeRecord {
        if self.adaptive {
            let raised =
                self.agent.adaptive.update(phase, EpisodeOutcome { accuracy: ep.accuracy, success: ep.success });
            if raised {
                self.env.set_y_target(self.agent.adaptive.y_target);
            }
        }
        let record = EpisodeRecord {
            episode,
            phase,
            accuracy: ep.accuracy,
            gates: ep.gates,
            reward: ep.reward,
            y_target: self.env.y_target(),
            epsilon: ep.epsilon,
        };
        (self.on_record)(&record);
        record
    }
}

/// Runs one seed with output under `config.run_dir(seed)`.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    run_experiment_in(config, seed, &config.run_dir(seed), &mut |_| {})
}

/// Runs one seed into `run_dir`, calling `on_record` after every episode.
pub fn run_experiment_in(
    config: &ExperimentConfig,
    seed: u64,
    run_dir: &Path,
    on_record: &mut dyn FnMut(&EpisodeRecord),
) -> Result<RunOutput> {
    config.validate()?;
    std::fs::create_dir_all(run_dir).map_err(|e| QasError::io(run_dir, e))?;
    config.save(&run_dir.join("config.toml"))?;

    let (train, test) = build_datasets(config)?;
    let env = QasEnv::new(
        EnvConfig {
            n_qubits: config.n_qubits,
            max_gates: config.max_gates,
            y_target: config.y_target,
            trainer: config.trainer(),
        },
        &train,
        &test,
    )?;
    let agent = Agent::new(
        config.agent_config(),
        env.observation_len(),
        env.action_table().len(),
        config.y_target,
        derive_seed(seed, 2),
    )?;

    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = run_dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| QasError::io(&path, e))
    };
    let episodes_path = run_dir.join("episodes.csv");
    let mut episodes_csv = EpisodeWriter::new(create("episodes.csv")?).map_err(|e| QasError::io(&episodes_path, e))?;
    let trace = TraceWriter::new(create("trace.csv")?).map_err(|e| QasError::io(run_dir.join("trace.csv"), e))?;

    let mut runner = Runner { env, agent, trace, trace_episode: 0, best: None, adaptive: config.adaptive, on_record };
    let mut records = Vec::with_capacity(config.episodes + config.episodes / config.test_interval);
    for episode in 0..config.episodes {
        let ep = runner.episode(Phase::Train, episode)?;
        let rec = runner.finish(Phase::Train, episode, &ep);
        episodes_csv.record(&rec).map_err(|e| QasError::io(&episodes_path, e))?;
        records.push(rec);
        if (episode + 1) % config.test_interval == 0 {
            let ep = runner.episode(Phase::Test, episode)?;
            let rec = runner.finish(Phase::Test, episode, &ep);
            episodes_csv.record(&rec).map_err(|e| QasError::io(&episodes_path, e))?;
            records.push(rec);
        }
    }
    drop(episodes_csv);
    runner.trace.into_inner().flush().map_err(|e| QasError::io(run_dir.join("trace.csv"), e))?;

    let best = match runner.best.take() {
        Some((mut info, circuit)) => {
            let path = run_dir.join("best_circuit.txt");
            write_circuit(&circuit, &path)?;
            info.exported_accuracy = evaluate_accuracy(&read_circuit(&path)?, &test)?;
            Some(info)
        }
        None => None,
    };
    runner.agent.save_checkpoint(&run_dir.join("agent.json"))?;
    runner.agent.policy().save(&run_dir.join("policy.mlp"))?;

    let summary = RunSummary {
        name: config.name.clone(),
        seed,
        episodes: config.episodes,
        train_episodes: records.iter().filter(|r| r.phase == Phase::Train).count(),
        test_episodes: records.iter().filter(|r| r.phase == Phase::Test).count(),
        final_y_target: runner.env.y_target(),
        final_epsilon: runner.agent.epsilon(),
        env_steps: runner.agent.env_steps(),
        learn_steps: runner.agent.learn_steps(),
        best,
    };
    let summary_path = run_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| QasError::parse(&summary_path, e.to_string()))?;
    std::fs::write(&summary_path, json + "\n").map_err(|e| QasError::io(&summary_path, e))?;

    emit_plots_with(
        run_dir,
        &PlotOptions {
            train_window: config.train_smoothing,
            test_window: config.test_smoothing,
            show_target: config.adaptive,
        },
    )?;
    if let Some(b) = &summary.best {
        append_report(
            &config.output_root(),
            &format!("qas,{},{seed},{},{},{}", config.name, b.exported_accuracy, b.gates, b.gates),
        )?;
    }
    Ok(RunOutput { run_dir: run_dir.to_path_buf(), records, summary })
}

/// Appends one line to `<root>/report.csv`, writing the header first if new.
pub fn append_report(root: &Path, line: &str) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| QasError::io(root, e))?;
    let path = root.join("report.csv");
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| QasError::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(REPORT_HEADER);
        text.push('\n');
    }
    text.push_str(line);
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| QasError::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub seed: u64,
    pub test_accuracy: f64,
    pub n_params: usize,
}

/// Logistic regression on the config's data, once per `data_seed` in
/// `seeds`; the agent settings are ignored.
pub fn run_baseline(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<BaselineResult>> {
    seeds
        .iter()
        .map(|&s| {
            let c = ExperimentConfig { data_seed: s, ..config.clone() };
            let (train, test) = build_datasets(&c)?;
            let lr = LogRegConfig::default();
            let model = logreg_train(&train, lr.l2, lr.max_iter)?;
            Ok(BaselineResult { seed: s, test_accuracy: logreg_accuracy(&model, &test)?, n_params: model.n_params() })
        })
        .collect()
}
