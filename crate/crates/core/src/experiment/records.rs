//! Per-episode metrics and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::agent::Phase;
use crate::error::{QasError, Result};

pub const EPISODES_HEADER: [&str; 7] = ["episode", "phase", "accuracy", "gates", "reward", "y_target", "epsilon"];

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Training-episode index; a test episode carries the index of the
    /// training episode it follows.
    pub episode: usize,
    pub phase: Phase,
    pub accuracy: f64,
    pub gates: usize,
    pub reward: f64,
    pub y_target: f64,
    pub epsilon: f64,
}

impl EpisodeRecord {
    fn fields(&self) -> [String; 7] {
        [
            self.episode.to_string(),
            self.phase.as_str().to_string(),
            self.accuracy.to_string(),
            self.gates.to_string(),
            self.reward.to_string(),
            self.y_target.to_string(),
            self.epsilon.to_string(),
        ]
    }
}

/// Streaming writer for `episodes.csv`.
pub struct EpisodeWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EpisodeWriter<W> {
    pub fn new(out: W) -> std::io::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(EPISODES_HEADER)?;
        Ok(EpisodeWriter { inner })
    }

    pub fn record(&mut self, r: &EpisodeRecord) -> std::io::Result<()> {
        self.inner.write_record(r.fields())?;
        self.inner.flush()
    }
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = std::fs::File::open(path).map_err(|e| QasError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| QasError::parse(path, e.to_string()))?;
    if header.iter().ne(EPISODES_HEADER) {
        return Err(QasError::parse(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| QasError::parse(path, e.to_string()))?;
        let bad = |field: &str| QasError::parse(path, format!("row {}: bad {field}", i + 1));
        if row.len() != EPISODES_HEADER.len() {
            return Err(bad("field count"));
        }
        let phase = match &row[1] {
            "train" => Phase::Train,
            "test" => Phase::Test,
            _ => return Err(bad("phase")),
        };
        let num = |k: usize| row[k].parse::<f64>().map_err(|_| bad(EPISODES_HEADER[k]));
        out.push(EpisodeRecord {
            episode: row[0].parse().map_err(|_| bad("episode"))?,
            phase,
            accuracy: num(2)?,
            gates: row[3].parse().map_err(|_| bad("gates"))?,
            reward: num(4)?,
            y_target: num(5)?,
            epsilon: num(6)?,
        });
    }
    if out.is_empty() {
        return Err(QasError::parse(path, "no episode rows"));
    }
    Ok(out)
}

/// Trailing mean over the last `min(window, available)` points.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(QasError::Input("moving-average window must be >= 1".into()));
    }
    let out = (0..series.len())
        .map(|i| {
            let window = &series[(i + 1).saturating_sub(window)..=i];
            // Offset by the first point so constant windows come back exact.
            let base = window[0];
            base + window.iter().map(|v| v - base).sum::<f64>() / window.len() as f64
        })
        .collect();
    Ok(out)
}
