//! Flat TOML experiment configuration and the named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{gamma_for_budget, AgentConfig, EpsilonSchedule};
use crate::error::{QasError, Result};
use crate::optim::AdamConfig;
use crate::vqc::ClassifierTrainer;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "QARCH_OUT";
pub const DEFAULT_OUT: &str = "runs";

pub const PRESETS: [&str; 8] = [
    "classification-fixed-085",
    "classification-fixed-090",
    "classification-adaptive-080",
    "classification-adaptive-085",
    "moons-fixed-085",
    "moons-fixed-090",
    "moons-adaptive-080",
    "moons-adaptive-085",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Classification,
    Moons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,

    pub dataset: DatasetKind,
    pub n_samples: usize,
    pub n_informative: usize,
    pub class_sep: f64,
    pub noise_std: f64,
    pub test_fraction: f64,
    pub data_seed: u64,

    pub n_qubits: usize,
    pub max_gates: usize,
    pub y_target: f64,
    pub adaptive: bool,
    pub max_epochs_per_step: usize,
    pub classifier_lr: f64,

    pub episodes: usize,
    pub test_interval: usize,
    pub seeds: Vec<u64>,

    pub n_step: usize,
    /// Discount; omitted means `0.005^(1/max_gates)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub batch_size: usize,
    pub learn_start: usize,
    pub target_sync: u64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub negative_slope: f64,
    pub dropout: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,

    pub train_smoothing: usize,
    pub test_smoothing: usize,
    /// Empty means `$QARCH_OUT`, falling back to `runs`.
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "classification-fixed-085".into(),
            dataset: DatasetKind::Classification,
            n_samples: 400,
            n_informative: 2,
            class_sep: 1.0,
            noise_std: 0.15,
            test_fraction: 0.25,
            data_seed: 0,
            n_qubits: 4,
            max_gates: 20,
            y_target: 0.85,
            adaptive: false,
            max_epochs_per_step: 15,
            classifier_lr: 0.05,
            episodes: 800,
            test_interval: 10,
            seeds: vec![0],
            n_step: 3,
            gamma: None,
            batch_size: 64,
            learn_start: 1000,
            target_sync: 512,
            replay_capacity: 16384,
            hidden: vec![128, 128],
            negative_slope: 0.01,
            dropout: 0.1,
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_steps: 10_000,
            train_smoothing: 40,
            test_smoothing: 4,
            output_dir: String::new(),
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> QasError {
    QasError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (dataset, rest) =
            name.split_once('-').ok_or_else(|| QasError::Config(format!("unknown preset {name:?}")))?;
        let (mode, target) =
            rest.split_once('-').ok_or_else(|| QasError::Config(format!("unknown preset {name:?}")))?;
        if !PRESETS.contains(&name) {
            return Err(QasError::Config(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))));
        }
        let mut c = ExperimentConfig { name: name.to_string(), ..Self::default() };
        if dataset == "moons" {
            c.dataset = DatasetKind::Moons;
            c.n_qubits = 2;
            c.max_gates = 25;
            c.max_epochs_per_step = 25;
        }
        c.adaptive = mode == "adaptive";
        c.episodes = if c.adaptive { 1200 } else { 800 };
        c.y_target = target.parse::<f64>().expect("preset suffix") / 100.0;
        Ok(c)
    }

    /// A preset name or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.exists() {
            Self::load(path)
        } else if PRESETS.contains(&name_or_path) {
            Self::preset(name_or_path)
        } else {
            Err(QasError::Config(format!("{name_or_path:?} is neither a config file nor a preset")))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| QasError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QasError::io(path, e))?;
        let c: ExperimentConfig = toml::from_str(&text).map_err(|e| QasError::parse(path, e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| QasError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(field_err("name", "must be a non-empty plain name"));
        }
        if self.n_samples < 4 || !self.n_samples.is_multiple_of(2) {
            return Err(field_err("n_samples", "must be even and >= 4"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(field_err("test_fraction", "must be in (0, 1)"));
        }
        match self.dataset {
            DatasetKind::Moons if self.n_qubits != 2 => {
                return Err(field_err("n_qubits", "moons data has 2 features, so n_qubits must be 2"))
            }
            DatasetKind::Classification if self.n_informative == 0 || self.n_informative > self.n_qubits => {
                return Err(field_err("n_informative", "must be in 1..=n_qubits"))
            }
            _ => {}
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err(field_err("noise_std", "must be >= 0"));
        }
        if !(2..=crate::qsim::MAX_QUBITS).contains(&self.n_qubits) {
            return Err(field_err("n_qubits", format!("must be in 2..={}", crate::qsim::MAX_QUBITS)));
        }
        if self.max_gates == 0 {
            return Err(field_err("max_gates", "must be >= 1"));
        }
        if !(self.y_target > 0.0 && self.y_target < 1.0) {
            return Err(field_err("y_target", "must be in (0, 1)"));
        }
        if self.max_epochs_per_step == 0 {
            return Err(field_err("max_epochs_per_step", "must be >= 1"));
        }
        for (field, v) in [("classifier_lr", self.classifier_lr), ("lr", self.lr), ("adam_eps", self.adam_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_err(field, "must be positive"));
            }
        }
        for (field, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(field_err(field, "must be in [0, 1)"));
            }
        }
        if self.episodes == 0 {
            return Err(field_err("episodes", "must be >= 1"));
        }
        if self.test_interval == 0 {
            return Err(field_err("test_interval", "must be >= 1"));
        }
        if self.n_step == 0 {
            return Err(field_err("n_step", "must be >= 1"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(field_err("gamma", "must be in (0, 1]"));
            }
        }
        if self.batch_size == 0 {
            return Err(field_err("batch_size", "must be >= 1"));
        }
        if self.target_sync == 0 {
            return Err(field_err("target_sync", "must be >= 1"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(field_err("replay_capacity", "must be >= batch_size"));
        }
        if self.hidden.contains(&0) {
            return Err(field_err("hidden", "layer widths must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(field_err("dropout", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
            || self.epsilon_end > self.epsilon_start
        {
            return Err(field_err("epsilon_start", "need 0 <= epsilon_end <= epsilon_start <= 1"));
        }
        if self.train_smoothing == 0 || self.test_smoothing == 0 {
            return Err(field_err("train_smoothing", "smoothing windows must be >= 1"));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| gamma_for_budget(self.max_gates))
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            n_step: self.n_step,
            gamma: self.gamma(),
            batch_size: self.batch_size,
            learn_start: self.learn_start,
            target_sync: self.target_sync,
            replay_capacity: self.replay_capacity,
            hidden: self.hidden.clone(),
            negative_slope: self.negative_slope,
            dropout: self.dropout,
            adam: AdamConfig { lr: self.lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps },
            epsilon: EpsilonSchedule {
                start: self.epsilon_start,
                end: self.epsilon_end,
                decay_steps: self.epsilon_decay_steps,
            },
        }
    }

    pub fn trainer(&self) -> ClassifierTrainer {
        let mut t = ClassifierTrainer::new(self.max_epochs_per_step);
        t.adam.lr = self.classifier_lr;
        t
    }

    pub fn output_root(&self) -> PathBuf {
        if !self.output_dir.is_empty() {
            return PathBuf::from(&self.output_dir);
        }
        match std::env::var(OUT_ENV) {
            Ok(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUT),
        }
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_root().join(&self.name).join(format!("seed-{seed}"))
    }
}
