//! Fully connected network with ReLU hidden layers and a single linear
//! output, trained by minibatch SGD with momentum at a fixed learning rate.
//!
//! Regression minimises half mean squared error on an internally
//! standardised target; classification minimises mean binary cross-entropy
//! on the logit. Training stops when the validation loss has not improved
//! for `patience` epochs and the best weights are restored.

use crate::matrix::Matrix;
use crate::rng::{self, Rng};
use crate::Task;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64, 64],
            learning_rate: 0.01,
            momentum: 0.9,
            l2: 1e-4,
            epochs: 200,
            batch_size: 32,
            patience: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub task: Task,
    pub layers: Vec<Layer>,
    /// Regression targets are modelled as `(y - shift) / scale`.
    pub target_shift: f64,
    pub target_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochTrace {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

impl Network {
    /// He-initialised network for `inputs` features.
    pub fn new(task: Task, inputs: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (2.0 / fan_in.max(1) as f64).sqrt();
                Layer {
                    weights: (0..fan_in * fan_out).map(|_| std * rng::standard_normal(rng)).collect(),
                    bias: vec![0.0; fan_out],
                    inputs: fan_in,
                    outputs: fan_out,
                }
            })
            .collect();
        Network {
            task,
            layers,
            target_shift: 0.0,
            target_scale: 1.0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
    }

    /// Pre-activations of every layer for one input row.
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act: Vec<f64> = input.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let z: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    let w = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    l.bias[o] + w.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            act = if li + 1 < self.layers.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
        }
        pre
    }

    fn output(&self, input: &[f64]) -> f64 {
        self.forward(input).last().unwrap()[0]
    }

    fn model_target(&self, y: f64) -> f64 {
        match self.task {
            Task::Regression => (y - self.target_shift) / self.target_scale,
            Task::BinaryClassification => y,
        }
    }

    /// Mean loss over `rows` and its gradient with respect to
    /// [`Network::parameters`], excluding the L2 penalty.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut total = 0.0;
        let mut input = Vec::new();
        for &r in rows {
            x.row_into(r, &mut input);
            let pre = self.forward(&input);
            let out = pre.last().unwrap()[0];
            let t = self.model_target(y[r]);
            let (loss, mut delta) = match self.task {
                Task::Regression => (0.5 * (out - t).powi(2), vec![out - t]),
                Task::BinaryClassification => {
                    let softplus = if out > 0.0 { out + (-out).exp().ln_1p() } else { out.exp().ln_1p() };
                    let p = 1.0 / (1.0 + (-out).exp());
                    (softplus - t * out, vec![p - t])
                }
            };
            total += loss;
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let prev: Vec<f64> = if li == 0 {
                    input.clone()
                } else {
                    pre[li - 1].iter().map(|v| v.max(0.0)).collect()
                };
                let (gw, gb) = &mut grads[li];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    for i in 0..l.inputs {
                        gw[o * l.inputs + i] += delta[o] * prev[i];
                    }
                }
                if li > 0 {
                    let below = &pre[li - 1];
                    delta = (0..l.inputs)
                        .map(|i| {
                            if below[i] <= 0.0 {
                                return 0.0;
                            }
                            (0..l.outputs).map(|o| delta[o] * l.weights[o * l.inputs + i]).sum()
                        })
                        .collect();
                }
            }
        }
        let n = rows.len().max(1) as f64;
        let flat = grads
            .into_iter()
            .flat_map(|(w, b)| w.into_iter().chain(b))
            .map(|g| g / n)
            .collect();
        (total / n, flat)
    }

    pub fn mean_loss(&self, x: &Matrix, y: &[f64]) -> f64 {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut input = Vec::new();
        let total: f64 = rows
            .iter()
            .map(|&r| {
                x.row_into(r, &mut input);
                let out = self.output(&input);
                let t = self.model_target(y[r]);
                match self.task {
                    Task::Regression => 0.5 * (out - t).powi(2),
                    Task::BinaryClassification => {
                        let softplus = if out > 0.0 { out + (-out).exp().ln_1p() } else { out.exp().ln_1p() };
                        softplus - t * out
                    }
                }
            })
            .sum();
        total / rows.len().max(1) as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut input = Vec::new();
        (0..x.rows())
            .map(|r| {
                x.row_into(r, &mut input);
                let out = self.output(&input);
                match self.task {
                    Task::Regression => out * self.target_scale + self.target_shift,
                    Task::BinaryClassification => 1.0 / (1.0 + (-out).exp()),
                }
            })
            .collect()
    }

    pub fn fit(
        task: Task,
        x: &Matrix,
        y: &[f64],
        validation: Option<(&Matrix, &[f64])>,
        params: &MlpParams,
        seed: u64,
    ) -> (Network, EpochTrace) {
        let mut rng = rng::rng(rng::derive_seed(seed, "mlp-init", 0));
        let mut net = Network::new(task, x.cols(), &params.hidden, &mut rng);
        if task == Task::Regression {
            let n = y.len().max(1) as f64;
            let mean = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            net.target_shift = mean;
            net.target_scale = if sd > 0.0 { sd } else { 1.0 };
        }
        let validation = validation.filter(|(vx, _)| vx.rows() > 0);
        let mut params_now = net.parameters();
        let mut velocity = vec![0.0; params_now.len()];
        let mut best = params_now.clone();
        let mut best_loss = validation.map_or(f64::INFINITY, |(vx, vy)| net.mean_loss(vx, vy));
        let mut trace = EpochTrace::default();
        let mut since_best = 0;
        let mut order: Vec<usize> = (0..y.len()).collect();
        let batch = params.batch_size.max(1);

        for epoch in 0..params.epochs {
            let mut shuffle_rng = rng::rng(rng::derive_seed(seed, "mlp-epoch", epoch as u64));
            rng::shuffle(&mut order, &mut shuffle_rng);
            for chunk in order.chunks(batch) {
                let (_, grad) = net.loss_and_gradient(x, y, chunk);
                for ((p, v), g) in params_now.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                    *v = params.momentum * *v - params.learning_rate * (g + params.l2 * *p);
                    *p += *v;
                }
                net.set_parameters(&params_now);
            }
            let train_loss = net.mean_loss(x, y);
            trace.train_loss.push(train_loss);
            trace.epochs_run = epoch + 1;
            if !train_loss.is_finite() {
                break;
            }
            match validation {
                Some((vx, vy)) => {
                    let l = net.mean_loss(vx, vy);
                    trace.validation_loss.push(l);
                    if l < best_loss {
                        best_loss = l;
                        best.clone_from(&params_now);
                        trace.best_epoch = epoch + 1;
                        since_best = 0;
                    } else {
                        since_best += 1;
                        if since_best >= params.patience.max(1) {
                            break;
                        }
                    }
                }
                None => {
                    best.clone_from(&params_now);
                    trace.best_epoch = epoch + 1;
                }
            }
        }
        net.set_parameters(&best);
        (net, trace)
    }
}
