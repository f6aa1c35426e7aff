//! Feed-forward Q-function approximator with analytic gradients.
//!
//! Rectifier activations on hidden layers, identity on the output layer,
//! double precision throughout. The networks here are small (a few hundred
//! units), so plain nested loops over `Vec<f64>` weight matrices are fast
//! enough and keep the gradient code auditable.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the agent prefers larger or smaller Q-values. Reward-style
/// environments maximize; cost-style environments (e.g. transmission power)
/// minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Maximize,
    Minimize,
}

impl Objective {
    /// Best Q-value over unmasked entries; `None` if every entry is masked.
    /// Ties resolve to the lowest index.
    pub fn best_masked(&self, values: &[f64], mask: &[bool]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&v, &ok)) in values.iter().zip(mask).enumerate() {
            if !ok {
                continue;
            }
            let better = match (self, best) {
                (_, None) => true,
                (Objective::Maximize, Some((_, b))) => v > b,
                (Objective::Minimize, Some((_, b))) => v < b,
            };
            if better {
                best = Some((i, v));
            }
        }
        best
    }
}

/// Layer widths of the approximator. Output width is the flattened
/// descriptive action count |A|.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl NetworkArchitecture {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Result<Self> {
        if input == 0 || output == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig("network widths must be >= 1".into()));
        }
        Ok(NetworkArchitecture {
            input,
            hidden,
            output,
        })
    }

    /// (fan_in, fan_out) of each affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input];
        widths.extend(&self.hidden);
        widths.push(self.output);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }
}

/// Per-layer weight matrices (row-major, out x in) and bias vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkParams {
    pub arch: NetworkArchitecture,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl QNetworkParams {
    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases start at 0.
    pub fn init<R: Rng>(arch: NetworkArchitecture, rng: &mut R) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (fan_in, fan_out) in arch.layer_dims() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        QNetworkParams {
            arch,
            weights,
            biases,
        }
    }

    pub fn zeros(arch: NetworkArchitecture) -> Self {
        let weights = arch
            .layer_dims()
            .iter()
            .map(|&(i, o)| vec![0.0; i * o])
            .collect();
        let biases = arch
            .layer_dims()
            .iter()
            .map(|&(_, o)| vec![0.0; o])
            .collect();
        QNetworkParams {
            arch,
            weights,
            biases,
        }
    }

    /// Q-values for one input, one per flattened action.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .forward_trace(input)?
            .pop()
            .expect("at least one layer"))
    }

    /// Activations of every layer (input excluded); the last entry is the
    /// output. Hidden activations are post-rectifier.
    fn forward_trace(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.arch.input {
            return Err(Error::ShapeMismatch(format!(
                "input length {} does not match architecture input {}",
                input.len(),
                self.arch.input
            )));
        }
        let dims = self.arch.layer_dims();
        let last = dims.len() - 1;
        let mut trace: Vec<Vec<f64>> = Vec::with_capacity(dims.len());
        let mut current = input;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = &self.weights[l];
            let b = &self.biases[l];
            let mut out = vec![0.0; fan_out];
            for (j, out_j) in out.iter_mut().enumerate() {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let mut acc = b[j];
                for (wi, xi) in row.iter().zip(current) {
                    acc += wi * xi;
                }
                *out_j = if l < last { acc.max(0.0) } else { acc };
            }
            trace.push(out);
            current = trace.last().unwrap();
        }
        Ok(trace)
    }

    fn check_same_arch(&self, other: &NetworkArchitecture) -> Result<()> {
        if self.arch != *other {
            return Err(Error::ShapeMismatch(
                "network architectures do not match".into(),
            ));
        }
        Ok(())
    }

    /// Portable parameter dump (architecture header + exact f64 values).
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = BufReader::new(File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Parameter-shaped gradient.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    fn zeros_like(params: &QNetworkParams) -> Self {
        Gradient {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// One replayed transition, already in network coordinates.
#[derive(Debug, Clone)]
pub struct TdSample {
    pub input: Vec<f64>,
    pub action: usize,
    pub utility: f64,
    pub next_input: Vec<f64>,
    pub next_mask: Vec<bool>,
}

/// Mean squared TD error over the batch and its gradient in `params`.
///
/// The bootstrap term is evaluated with `target_params` over feasible
/// next-state actions only and treated as a constant in the gradient.
pub fn td_loss_and_gradient(
    params: &QNetworkParams,
    target_params: &QNetworkParams,
    batch: &[TdSample],
    gamma: f64,
    objective: Objective,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::InvariantViolation("empty training batch".into()));
    }
    params.check_same_arch(&target_params.arch)?;
    let dims = params.arch.layer_dims();
    let last = dims.len() - 1;
    let mut grad = Gradient::zeros_like(params);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for sample in batch {
        let next_q = target_params.forward(&sample.next_input)?;
        let (_, boot) = objective
            .best_masked(&next_q, &sample.next_mask)
            .ok_or_else(|| Error::InvariantViolation("next state has no feasible action".into()))?;
        let target = sample.utility + gamma * boot;

        let trace = params.forward_trace(&sample.input)?;
        let q = trace[last][sample.action];
        let err = q - target;
        loss += scale * err * err;

        // Backpropagate d(loss)/d(q[action]) = 2 * err / B.
        let mut delta = vec![0.0; dims[last].1];
        delta[sample.action] = 2.0 * scale * err;
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let prev: &[f64] = if l == 0 { &sample.input } else { &trace[l - 1] };
            for (j, &d) in delta.iter().enumerate().take(fan_out) {
                if d == 0.0 {
                    continue;
                }
                grad.biases[l][j] += d;
                let row = &mut grad.weights[l][j * fan_in..(j + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(prev) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let mut next_delta = vec![0.0; fan_in];
                let w = &params.weights[l];
                for (j, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[j * fan_in..(j + 1) * fan_in];
                    for (nd, wi) in next_delta.iter_mut().zip(row) {
                        *nd += d * wi;
                    }
                }
                // rectifier derivative: active exactly where the hidden
                // activation is positive
                for (nd, &a) in next_delta.iter_mut().zip(&trace[l - 1]) {
                    if a <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
    }
    Ok((loss, grad))
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &QNetworkParams, learning_rate: f64) -> Self {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// One bias-corrected adaptive-moment update, in place.
pub fn adam_step(
    params: &mut QNetworkParams,
    grad: &Gradient,
    opt: &mut OptimizerState,
) -> Result<()> {
    for layer in grad.weights.iter().chain(grad.biases.iter()) {
        if layer.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient entry".into()));
        }
    }
    opt.step += 1;
    let t = opt.step as i32;
    let bc1 = 1.0 - opt.beta1.powi(t);
    let bc2 = 1.0 - opt.beta2.powi(t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
        }
    };
    for l in 0..params.weights.len() {
        update(
            &mut params.weights[l],
            &grad.weights[l],
            &mut opt.m_weights[l],
            &mut opt.v_weights[l],
        );
        update(
            &mut params.biases[l],
            &grad.biases[l],
            &mut opt.m_biases[l],
            &mut opt.v_biases[l],
        );
    }
    Ok(())
}

/// Elementwise arithmetic mean of parameter sets sharing one architecture.
pub fn average_params(params: &[QNetworkParams]) -> Result<QNetworkParams> {
    let first = params
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty parameter list".into()))?;
    for p in &params[1..] {
        p.check_same_arch(&first.arch)?;
    }
    let mut out = QNetworkParams::zeros(first.arch.clone());
    for p in params {
        for l in 0..out.weights.len() {
            for (o, w) in out.weights[l].iter_mut().zip(&p.weights[l]) {
                *o += w;
            }
            for (o, b) in out.biases[l].iter_mut().zip(&p.biases[l]) {
                *o += b;
            }
        }
    }
    // sum first, divide once: bit-identical to the plain elementwise mean
    let n = params.len() as f64;
    for layer in out.weights.iter_mut().chain(out.biases.iter_mut()) {
        for v in layer {
            *v /= n;
        }
    }
    Ok(out)
}
