//! Seeded synthetic binary-classification datasets.
//!
//! Clean-room generators in the spirit of the usual hypercube-cluster and
//! two-moons constructions. They are deterministic in `(args, seed)` but make
//! no attempt at stream compatibility with any other library.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QasError, Result};
use crate::rng::{seeded, shuffle, standard_normal, uniform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_features: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(n_features: usize, features: Vec<Vec<f64>>, labels: Vec<u8>, seed: u64) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(QasError::Shape(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        if let Some(row) = features.iter().find(|r| r.len() != n_features) {
            return Err(QasError::Shape(format!("row of length {} in a {n_features}-feature dataset", row.len())));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(QasError::Input(format!("label {l} is not binary")));
        }
        Ok(Dataset { n_features, features, labels, seed })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of samples in each class, `[class0, class1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            n_features: self.n_features,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            seed: self.seed,
        }
    }

    fn shuffled(self, rng: &mut crate::rng::SeededRng) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        shuffle(rng, &mut idx);
        self.subset(&idx)
    }

    /// Write as CSV with header `f0,...,f{n-1},label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let header: Vec<String> = (0..self.n_features).map(|i| format!("f{i}")).collect();
        let _ = writeln!(out, "{},label", header.join(","));
        for (row, label) in self.features.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&format_sig9(*v));
                out.push(',');
            }
            let _ = writeln!(out, "{label}");
        }
        std::fs::write(path, out).map_err(|e| QasError::io(path, e))
    }

    pub fn read_csv(path: &Path, seed: u64) -> Result<Dataset> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| QasError::parse(path, e.to_string()))?;
        let headers = reader.headers().map_err(|e| QasError::parse(path, e.to_string()))?.clone();
        let n_features = headers.len().saturating_sub(1);
        let expected: Vec<String> =
            (0..n_features).map(|i| format!("f{i}")).chain(std::iter::once("label".to_string())).collect();
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(QasError::parse(path, format!("unexpected header {headers:?}")));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| QasError::parse(path, e.to_string()))?;
            let bad = |what: &str| QasError::parse(path, format!("row {}: bad {what}", line + 1));
            let row = record
                .iter()
                .take(n_features)
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("feature")))
                .collect::<Result<Vec<_>>>()?;
            let label = record[n_features].trim().parse::<u8>().map_err(|_| bad("label"))?;
            features.push(row);
            labels.push(label);
        }
        Dataset::new(n_features, features, labels, seed)
    }
}

/// Nine significant digits, `%.9g` style.
pub(crate) fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{m}e{exp}")
    }
}

/// Two Gaussian clusters on antipodal vertices of a hypercube, plus redundant
/// features that are random linear combinations of the informative ones.
///
/// Draw order: one sign per informative dimension for the class-0 vertex
/// (class 1 sits on the opposite vertex), then the `n_samples / 2` class-0
/// points, then class-1 points (informative coordinates only), then the
/// redundant-mixing coefficients `U(-1, 1)` row by row, then the row shuffle.
pub fn make_classification(
    n_samples: usize,
    n_features: usize,
    n_informative: usize,
    class_sep: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_informative == 0 || n_informative > n_features {
        return Err(QasError::Config(format!("n_informative must be in 1..={n_features}, got {n_informative}")));
    }
    if n_samples == 0 || !n_samples.is_multiple_of(2) {
        return Err(QasError::Config(format!("n_samples must be even and positive, got {n_samples}")));
    }
    if !class_sep.is_finite() || class_sep < 0.0 {
        return Err(QasError::Config(format!("class_sep must be finite and >= 0, got {class_sep}")));
    }
    let mut rng = seeded(seed);
    let vertex: Vec<f64> =
        (0..n_informative).map(|_| if uniform(&mut rng) < 0.5 { -class_sep } else { class_sep }).collect();

    let per_class = n_samples / 2;
    let mut informative = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for (label, sign) in [(0u8, 1.0), (1u8, -1.0)] {
        for _ in 0..per_class {
            let point: Vec<f64> = vertex.iter().map(|v| sign * v + standard_normal(&mut rng)).collect();
            informative.push(point);
            labels.push(label);
        }
    }

    let n_redundant = n_features - n_informative;
    let mixing: Vec<Vec<f64>> =
        (0..n_redundant).map(|_| (0..n_informative).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect()).collect();
    let features = informative
        .into_iter()
        .map(|mut row| {
            let extra: Vec<f64> = mixing.iter().map(|coef| coef.iter().zip(&row).map(|(c, x)| c * x).sum()).collect();
            row.extend(extra);
            row
        })
        .collect();

    Ok(Dataset::new(n_features, features, labels, seed)?.shuffled(&mut rng))
}

/// Two interleaving half circles: class 0 on `(cos t, sin t)`, class 1 on
/// `(1 - cos t, 0.5 - sin t)`, `t` evenly spaced over `[0, pi]`, with
/// per-coordinate Gaussian noise of standard deviation `noise_std`.
pub fn make_moons(n_samples: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n_samples == 0 || !n_samples.is_multiple_of(2) {
        return Err(QasError::Config(format!("n_samples must be even and positive, got {n_samples}")));
    }
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(QasError::Config(format!("noise_std must be finite and >= 0, got {noise_std}")));
    }
    let mut rng = seeded(seed);
    let per_class = n_samples / 2;
    let step = if per_class > 1 { std::f64::consts::PI / (per_class - 1) as f64 } else { 0.0 };
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for label in [0u8, 1u8] {
        for i in 0..per_class {
            let (s, c) = (i as f64 * step).sin_cos();
            let (x, y) = if label == 0 { (c, s) } else { (1.0 - c, 0.5 - s) };
            features.push(vec![x, y]);
            labels.push(label);
        }
    }
    if noise_std > 0.0 {
        for row in &mut features {
            for v in row.iter_mut() {
                *v += noise_std * standard_normal(&mut rng);
            }
        }
    }
    Ok(Dataset::new(2, features, labels, seed)?.shuffled(&mut rng))
}

/// Stratified split. The test set gets `round(n * test_fraction)` samples,
/// apportioned over classes by largest remainder (ties to class 0).
pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(QasError::Config(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = seeded(seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in data.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    for idx in by_class.iter_mut() {
        shuffle(&mut rng, idx);
    }

    let n_test = (data.len() as f64 * test_fraction).round() as usize;
    let quotas: Vec<f64> = by_class.iter().map(|c| c.len() as f64 * n_test as f64 / data.len().max(1) as f64).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n_test - take.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(2) {
        if left == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            left -= 1;
        }
    }

    let mut test_idx = Vec::with_capacity(n_test);
    let mut train_idx = Vec::with_capacity(data.len() - n_test);
    for (c, idx) in by_class.iter().enumerate() {
        test_idx.extend_from_slice(&idx[..take[c]]);
        train_idx.extend_from_slice(&idx[take[c]..]);
    }
    shuffle(&mut rng, &mut train_idx);
    shuffle(&mut rng, &mut test_idx);
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}
