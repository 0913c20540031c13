//! A plain dense-network regressor used as the comparison baseline.
//!
//! Fixed-shape activations on the nodes and learned scalar weights on the
//! connections, the mirror image of the spline-edge design, which is what
//! makes it the interesting thing to compare against.

use crate::error::{Error, Result};
use crate::network::silu;
use crate::optimizer::{Adam, AdamConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct Mlp {
    shape: Vec<usize>,
    /// Per layer, `n_out x n_in` row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Seeded He-style initialization; biases start at zero. The final
    /// width must be 1: this baseline is a scalar regressor.
    pub fn init(shape: &[usize], seed: u64) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::InvalidShape(
                "need at least an input and an output layer".into(),
            ));
        }
        if shape.iter().any(|&w| w == 0) {
            return Err(Error::InvalidShape("zero-width layer".into()));
        }
        if *shape.last().unwrap() != 1 {
            return Err(Error::InvalidShape("output width must be 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..shape.len() - 1 {
            let (n_in, n_out) = (shape[l], shape[l + 1]);
            let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt())
                .expect("finite std");
            weights.push((0..n_in * n_out).map(|_| normal.sample(&mut rng)).collect());
            biases.push(vec![0.0; n_out]);
        }
        Ok(Self {
            shape: shape.to_vec(),
            weights,
            biases,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    fn set_params(&mut self, params: &[f64]) {
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let nw = w.len();
            w.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = b.len();
            b.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        debug_assert_eq!(at, params.len());
    }

    /// Forward pass storing pre-activations and activations per layer.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let depth = self.weights.len();
        let mut acts = Vec::with_capacity(depth + 1);
        let mut pres = Vec::with_capacity(depth);
        acts.push(x.to_vec());
        for l in 0..depth {
            let n_in = self.shape[l];
            let n_out = self.shape[l + 1];
            let mut z = self.biases[l].clone();
            for j in 0..n_out {
                let row = &self.weights[l][j * n_in..(j + 1) * n_in];
                z[j] += row.iter().zip(&acts[l]).map(|(w, a)| w * a).sum::<f64>();
            }
            let a = if l == depth - 1 {
                z.clone()
            } else {
                z.iter().map(|&v| silu(v)).collect()
            };
            pres.push(z);
            acts.push(a);
        }
        (acts, pres)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.shape[0] {
            return Err(Error::DimensionMismatch {
                path: "input".into(),
                message: format!("expected {} features, got {}", self.shape[0], x.len()),
            });
        }
        let (acts, _) = self.trace(x);
        Ok(acts.last().unwrap()[0])
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Forward-only mean squared error over a batch.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut acc = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let r = self.predict(x)? - y;
            acc += r * r;
        }
        Ok(acc / xs.len() as f64)
    }

    /// Mean squared error and its gradient in the flat parameter layout.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64]) -> Result<(f64, Vec<f64>)> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let depth = self.weights.len();
        let n = xs.len() as f64;
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut loss = 0.0;

        for (x, &y) in xs.iter().zip(ys) {
            if x.len() != self.shape[0] {
                return Err(Error::DimensionMismatch {
                    path: "input".into(),
                    message: format!("expected {} features, got {}", self.shape[0], x.len()),
                });
            }
            let (acts, pres) = self.trace(x);
            let err = acts[depth][0] - y;
            loss += err * err / n;
            let mut delta = vec![2.0 * err / n];
            for l in (0..depth).rev() {
                let n_in = self.shape[l];
                let n_out = self.shape[l + 1];
                for j in 0..n_out {
                    for i in 0..n_in {
                        grad_w[l][j * n_in + i] += delta[j] * acts[l][i];
                    }
                    grad_b[l][j] += delta[j];
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    let mut back = 0.0;
                    for j in 0..n_out {
                        back += self.weights[l][j * n_in + i] * delta[j];
                    }
                    *p = back * silu_derivative(pres[l - 1][i]);
                }
                delta = prev;
            }
        }

        let mut grad = Vec::with_capacity(self.param_count());
        for (w, b) in grad_w.iter().zip(&grad_b) {
            grad.extend_from_slice(w);
            grad.extend_from_slice(b);
        }
        Ok((loss, grad))
    }
}

fn silu_derivative(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone)]
pub struct MlpTrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_steps: 2000,
            batch_size: None,
            seed: 0,
        }
    }
}

// mini-batch runs re-evaluate the full-data loss this often
const MINIBATCH_EVAL_EVERY: usize = 25;

/// Train with Adam on mean squared error. The returned trace holds the
/// full-data loss after every step for full-batch training and after
/// every 25th step (plus the last) under mini-batching.
pub fn train_mlp(
    mlp: &mut Mlp,
    xs: &[Vec<f64>],
    ys: &[f64],
    config: &MlpTrainConfig,
) -> Result<Vec<f64>> {
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let full_batch = config.batch_size.is_none();
    let mut params = mlp.params();
    let mut adam = Adam::new(
        params.len(),
        AdamConfig::default().with_learning_rate(config.learning_rate),
    );
    let mut trace = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut cursor = order.len();

    for step in 0..config.max_steps {
        let (bxs, bys): (Vec<Vec<f64>>, Vec<f64>) = match config.batch_size {
            None => (xs.to_vec(), ys.to_vec()),
            Some(b) => {
                let b = b.max(1).min(xs.len());
                if cursor + b > order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let picked = &order[cursor..cursor + b];
                cursor += b;
                (
                    picked.iter().map(|&i| xs[i].clone()).collect(),
                    picked.iter().map(|&i| ys[i]).collect(),
                )
            }
        };
        let (batch_loss, grad) = mlp.loss_and_grad(&bxs, &bys)?;
        if !batch_loss.is_finite() {
            return Err(Error::Diverged {
                step,
                last_loss: batch_loss,
            });
        }
        adam.step(&mut params, &grad);
        mlp.set_params(&params);
        if full_batch || step % MINIBATCH_EVAL_EVERY == 0 || step + 1 == config.max_steps {
            let full = mlp.loss(xs, ys)?;
            if !full.is_finite() {
                return Err(Error::Diverged {
                    step,
                    last_loss: full,
                });
            }
            trace.push(full);
        }
    }
    Ok(trace)
}
