//! Logistic-regression baseline fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{QasError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { l2: 1e-4, lr: 0.1, max_iter: 5000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

impl LogRegModel {
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy plus `l2/2 * |w|^2` (intercept unpenalised).
pub fn logreg_loss(model: &LogRegModel, data: &Dataset, l2: f64) -> f64 {
    let n = data.len() as f64;
    let ce: f64 = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| {
            let z = model.decision(x);
            // log(1 + e^z) - y z, computed stably.
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - f64::from(y) * z
        })
        .sum();
    ce / n + 0.5 * l2 * model.coefficients.iter().map(|w| w * w).sum::<f64>()
}

fn gradient(model: &LogRegModel, data: &Dataset, l2: f64) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut gw = vec![0.0; model.coefficients.len()];
    let mut gb = 0.0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let r = model.probability(x) - f64::from(y);
        gb += r;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
    }
    for (g, w) in gw.iter_mut().zip(&model.coefficients) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

pub fn logreg_fit(train: &Dataset, config: &LogRegConfig) -> Result<LogRegModel> {
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(QasError::Input("logistic regression needs both classes in the training set".into()));
    }
    let mut model = LogRegModel { coefficients: vec![0.0; train.n_features], intercept: 0.0, iterations: 0 };
    for it in 0..config.max_iter {
        let (gw, gb) = gradient(&model, train, config.l2);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm < config.tol {
            break;
        }
        for (w, g) in model.coefficients.iter_mut().zip(&gw) {
            *w -= config.lr * g;
        }
        model.intercept -= config.lr * gb;
        model.iterations = it + 1;
    }
    Ok(model)
}

/// Gradient descent with lr 0.1 until the gradient norm drops below 1e-6
/// or `max_iter` iterations.
pub fn logreg_train(train: &Dataset, l2: f64, max_iter: usize) -> Result<LogRegModel> {
    logreg_fit(train, &LogRegConfig { l2, max_iter, ..LogRegConfig::default() })
}

pub fn logreg_accuracy(model: &LogRegModel, data: &Dataset) -> Result<f64> {
    if data.n_features != model.coefficients.len() {
        return Err(QasError::Shape(format!(
            "model has {} coefficients, data has {} features",
            model.coefficients.len(),
            data.n_features
        )));
    }
    if data.is_empty() {
        return Err(QasError::Input("accuracy of an empty dataset".into()));
    }
    let correct =
        data.features.iter().zip(&data.labels).filter(|(x, &y)| u8::from(model.probability(x) >= 0.5) == y).count();
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, u8)]) -> Dataset {
        Dataset::new(1, points.iter().map(|p| vec![p.0]).collect(), points.iter().map(|p| p.1).collect(), 0).unwrap()
    }

    #[test]
    fn separable_line() {
        let d = line(&[(-2.0, 0), (-1.0, 0), (-0.5, 0), (0.5, 1), (1.0, 1), (2.0, 1)]);
        let m = logreg_train(&d, 1e-4, 5000).unwrap();
        assert_eq!(m.n_params(), 2);
        assert_eq!(logreg_accuracy(&m, &d).unwrap(), 1.0);
        assert!(m.coefficients[0] > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let d = line(&[(0.0, 1), (1.0, 1)]);
        assert!(matches!(logreg_train(&d, 1e-4, 10), Err(QasError::Input(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let d = line(&[(0.0, 0), (1.0, 1)]);
        let m = LogRegModel { coefficients: vec![0.0; 3], intercept: 0.0, iterations: 0 };
        assert!(logreg_accuracy(&m, &d).is_err());
    }

    #[test]
    fn loss_never_increases() {
        let d = line(&[(-1.0, 0), (0.3, 0), (-0.2, 1), (1.0, 1)]);
        let mut prev = f64::INFINITY;
        for iters in 0..50 {
            let m = logreg_train(&d, 1e-4, iters).unwrap();
            let loss = logreg_loss(&m, &d, 1e-4);
            assert!(loss <= prev + 1e-15);
            prev = loss;
        }
    }
}
