//! Dense multilayer perceptron with LeakyReLU, inverted dropout and manual
//! backpropagation of a Smooth-L1 loss on selected outputs.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis as NdAxis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QasError, Result};
use crate::optim::{Adam, AdamConfig};
use crate::rng::uniform;

const CHECKPOINT_MAGIC: &str = "qarch-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Training,
    Inference,
}

/// `y = W x + b` with `W` stored as `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Gradients for one layer, same shapes as [`Dense`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    negative_slope: f64,
    dropout: f64,
    mode: Mode,
}

struct ForwardCache {
    /// Input to each layer, after dropout for hidden activations.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    hidden_pre: Vec<Array2<f64>>,
    /// Dropout scale (0 or 1/(1-p)) per hidden layer, if dropout ran.
    masks: Vec<Option<Array2<f64>>>,
    output: Array2<f64>,
}

impl Mlp {
    /// Layer widths `sizes[0] -> ... -> sizes[last]`; weights uniform in
    /// `±1/sqrt(fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], negative_slope: f64, dropout: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(QasError::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || bound * (2.0 * uniform(rng) - 1.0));
                Dense { weight, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Self::from_layers(layers, negative_slope, dropout)
    }

    pub fn from_layers(layers: Vec<Dense>, negative_slope: f64, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(QasError::Config("an MLP needs at least one layer".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(QasError::Config(format!("dropout must be in [0, 1), got {dropout}")));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(QasError::Shape(format!("layer {i}: bias length {} != {}", l.bias.len(), l.output_dim())));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(QasError::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Mlp { layers, negative_slope, dropout, mode: Mode::Training })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Number of parameter tensors (a weight and a bias per layer).
    pub fn tensor_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect()
    }

    /// Adam state shaped for this network.
    pub fn adam(&self, config: AdamConfig) -> Adam {
        Adam::new(config, &self.tensor_sizes())
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(QasError::Shape(format!("input width {cols}, network expects {}", self.input_dim())));
        }
        Ok(())
    }

    /// One input through the network, honouring the current mode.
    pub fn forward<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        let use_dropout = self.mode == Mode::Training;
        Ok(self.forward_cached(x, use_dropout.then_some(rng)).output.into_raw_vec_and_offset().0)
    }

    /// Deterministic forward pass (no dropout) regardless of mode.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        Ok(self.predict_batch(&x)?.into_raw_vec_and_offset().0)
    }

    /// Deterministic forward pass over a `(batch, input)` matrix.
    pub fn predict_batch(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs.ncols())?;
        Ok(self.forward_cached::<rand_xoshiro::Xoshiro256PlusPlus>(inputs.clone(), None).output)
    }

    fn forward_cached<R: Rng + ?Sized>(&self, x: Array2<f64>, mut rng: Option<&mut R>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let keep = 1.0 - self.dropout;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut a = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&a);
            inputs.push(a);
            if i == last {
                return ForwardCache { inputs, hidden_pre, masks, output: z };
            }
            let mut h = z.mapv(|v| self.leaky(v));
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 => {
                    let m =
                        Array2::from_shape_simple_fn(h.raw_dim(), || if uniform(r) < keep { 1.0 / keep } else { 0.0 });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            hidden_pre.push(z);
            masks.push(mask);
            a = h;
        }
        unreachable!("loop returns at the output layer")
    }

    /// Smooth-L1 loss over the selected output of each row, and its gradient
    /// with respect to every parameter. Dropout follows the current mode.
    pub fn gradients<R: Rng + ?Sized>(
        &self,
        inputs: &Array2<f64>,
        actions: &[usize],
        targets: &[f64],
        rng: &mut R,
    ) -> Result<(f64, Vec<DenseGrad>)> {
        self.check_input(inputs.ncols())?;
        let batch = inputs.nrows();
        if batch == 0 || actions.len() != batch || targets.len() != batch {
            return Err(QasError::Shape(format!(
                "batch of {batch} rows with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(QasError::Index(format!("action {a} >= {} outputs", self.output_dim())));
        }
        let use_dropout = self.mode == Mode::Training;
        let cache = self.forward_cached(inputs.clone(), use_dropout.then_some(rng));

        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros(cache.output.raw_dim());
        for (row, (&a, &t)) in actions.iter().zip(targets).enumerate() {
            let d = cache.output[[row, a]] - t;
            loss += smooth_l1_term(d);
            delta[[row, a]] = d.clamp(-1.0, 1.0) / batch as f64;
        }
        loss /= batch as f64;

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let weight = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(NdAxis(0));
            grads.push(DenseGrad { weight, bias });
            if i > 0 {
                let mut upstream = delta.dot(&layer.weight);
                if let Some(mask) = &cache.masks[i - 1] {
                    upstream *= mask;
                }
                let slope = self.negative_slope;
                upstream.zip_mut_with(&cache.hidden_pre[i - 1], |g, &z| {
                    if z <= 0.0 {
                        *g *= slope;
                    }
                });
                delta = upstream;
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// One Adam step on the Smooth-L1 loss of the selected outputs. Returns
    /// the loss before the update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        adam: &mut Adam,
        inputs: &Array2<f64>,
        actions: &[usize],
        targets: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        let (loss, grads) = self.gradients(inputs, actions, targets, rng)?;
        let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            params.push(layer.weight.as_slice_mut().expect("standard layout"));
            params.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        let grad_slices: Vec<&[f64]> = grads
            .iter()
            .flat_map(|g| [g.weight.as_slice().expect("standard layout"), g.bias.as_slice().expect("standard layout")])
            .collect();
        adam.step(&mut params, &grad_slices);
        Ok(loss)
    }

    /// Overwrite this network's parameters with `src`'s.
    pub fn copy_params_from(&mut self, src: &Mlp) -> Result<()> {
        if self.layers.len() != src.layers.len()
            || self.layers.iter().zip(&src.layers).any(|(a, b)| a.weight.dim() != b.weight.dim())
        {
            return Err(QasError::Shape("architecture mismatch in parameter copy".into()));
        }
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.weight.assign(&s.weight);
            dst.bias.assign(&s.bias);
        }
        Ok(())
    }

    /// Versioned text dump of shapes and parameters; floats use shortest
    /// round-trip formatting so reloading is exact.
    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        let _ = writeln!(out, "negative_slope {:?}", self.negative_slope);
        let _ = writeln!(out, "dropout {:?}", self.dropout);
        let _ = writeln!(out, "layers {}", self.layers.len());
        for layer in &self.layers {
            let _ = writeln!(out, "layer {} {}", layer.output_dim(), layer.input_dim());
            for row in layer.weight.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
            let line: Vec<String> = layer.bias.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| QasError::Input(format!("mlp checkpoint: {msg}"));
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("truncated before {what}")));
        let header = next("header")?;
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(format!("unsupported header {header:?}")));
        }
        let field = |line: &str, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(format!("expected {key}, got {line:?}")))
        };
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let negative_slope = parse_f(&field(next("slope")?, "negative_slope")?)?;
        let dropout = parse_f(&field(next("dropout")?, "dropout")?)?;
        let n_layers: usize = field(next("layers")?, "layers")?.parse().map_err(|_| bad("bad layer count".into()))?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let dims = field(next("layer")?, "layer")?;
            let dims: Vec<usize> = dims
                .split_whitespace()
                .map(|d| d.parse().map_err(|_| bad(format!("bad dimension {d:?}"))))
                .collect::<Result<_>>()?;
            let [out, inp] = dims[..] else {
                return Err(bad(format!("bad layer shape {dims:?}")));
            };
            let mut values = Vec::with_capacity(out * inp);
            for _ in 0..out {
                let row = next("weights")?.split_whitespace().map(parse_f).collect::<Result<Vec<_>>>()?;
                if row.len() != inp {
                    return Err(bad(format!("weight row of {} values, expected {inp}", row.len())));
                }
                values.extend(row);
            }
            let bias = next("bias")?.split_whitespace().map(parse_f).collect::<Result<Vec<_>>>()?;
            let weight = Array2::from_shape_vec((out, inp), values).map_err(|e| bad(e.to_string()))?;
            layers.push(Dense { weight, bias: Array1::from(bias) });
        }
        Mlp::from_layers(layers, negative_slope, dropout)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| QasError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QasError::io(path, e))?;
        Self::from_text(&text)
    }
}

fn smooth_l1_term(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

/// Mean Smooth-L1 (Huber with threshold 1) between two vectors.
pub fn smooth_l1(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(QasError::Shape(format!("smooth_l1 over {} and {} values", pred.len(), target.len())));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| smooth_l1_term(p - t)).sum::<f64>() / pred.len() as f64)
}

/// Standalone copy helper matching `dst <- src`.
pub fn copy_params(src: &Mlp, dst: &mut Mlp) -> Result<()> {
    dst.copy_params_from(src)
}
