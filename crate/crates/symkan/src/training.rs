//! The sparsified training loop and the node-pruning pass that follows it.

use crate::error::{Error, Result};
use crate::network::{ActivationStats, EdgeActivation, KanLayer, KanNetwork, LossParts, RegWeights};
use crate::optimizer::{Adam, AdamConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Everything the training loop needs to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Overall sparsity pressure; 0 disables both penalties.
    pub lambda: f64,
    /// Weight of the L1 magnitude penalty inside the sparsity term.
    pub mu1: f64,
    /// Weight of the entropy penalty inside the sparsity term.
    pub mu2: f64,
    pub learning_rate: f64,
    pub max_steps: usize,
    /// `None` trains on the full batch every step.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Training stops once 50 steps pass without the full-data loss
    /// improving by at least this much. Negative disables early stopping.
    pub convergence_tol: f64,
    /// Node importance cutoff used by `prune`.
    pub prune_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.01,
            mu1: 1.0,
            mu2: 1.0,
            learning_rate: 1e-2,
            max_steps: 2000,
            batch_size: None,
            seed: 0,
            convergence_tol: 1e-10,
            prune_threshold: 1e-2,
        }
    }
}

impl TrainConfig {
    pub fn reg(&self) -> Option<RegWeights> {
        if self.lambda == 0.0 {
            None
        } else {
            Some(RegWeights {
                lambda: self.lambda,
                mu1: self.mu1,
                mu2: self.mu2,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda {} must be non-negative",
                self.lambda
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.prune_threshold.is_finite() && self.prune_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "prune threshold {} must be non-negative",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

/// One sampled point of the loss trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub total: f64,
    pub prediction: f64,
    pub l1: f64,
    pub entropy: f64,
}

/// What a training run produced, besides the updated network.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub steps_run: usize,
    pub converged_at: Option<usize>,
    /// Full-data loss sampled along the run (every step for full-batch
    /// training, periodically for mini-batch training).
    pub trace: Vec<TraceRow>,
    pub final_loss: LossParts,
    pub final_stats: ActivationStats,
}

// mini-batch runs re-evaluate the full-data loss this often
const MINIBATCH_EVAL_EVERY: usize = 25;
// steps without improvement before the run counts as converged
const CONVERGENCE_WINDOW: usize = 50;
// a full-data loss above this aborts the run as diverged
const DIVERGENCE_CEILING: f64 = 1e12;

/// Run Adam on the network in place over a normalized dataset.
pub fn train(
    net: &mut KanNetwork,
    xs: &[Vec<f64>],
    ys: &[f64],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let reg = config.reg();
    let reg_ref = reg.as_ref();
    let full_batch = match config.batch_size {
        None => true,
        Some(b) => b >= xs.len(),
    };
    let mut opt = Adam::new(
        net.param_count(),
        AdamConfig::default().with_learning_rate(config.learning_rate),
    );
    let mut params = net.params();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut cursor = xs.len(); // forces a shuffle before the first batch

    let mut trace = Vec::new();
    let mut best_total = f64::INFINITY;
    let mut best_step = 0usize;
    let mut converged_at = None;
    let mut steps_run = 0usize;

    let mut batch_xs: Vec<Vec<f64>> = Vec::new();
    let mut batch_ys: Vec<f64> = Vec::new();

    for step in 0..config.max_steps {
        steps_run = step + 1;
        // assemble this step's batch
        let (loss, grad) = if full_batch {
            step_loss(net, xs, ys, reg_ref, step)?
        } else {
            let b = config.batch_size.unwrap();
            batch_xs.clear();
            batch_ys.clear();
            while batch_xs.len() < b {
                if cursor >= order.len() {
                    for i in (1..order.len()).rev() {
                        let j = rng.gen_range(0..=i);
                        order.swap(i, j);
                    }
                    cursor = 0;
                }
                let idx = order[cursor];
                batch_xs.push(xs[idx].clone());
                batch_ys.push(ys[idx]);
                cursor += 1;
            }
            step_loss(net, &batch_xs, &batch_ys, reg_ref, step)?
        };

        // convergence and divergence checks run on full-data loss
        let monitored = if full_batch {
            trace.push(TraceRow {
                step,
                total: loss.total,
                prediction: loss.prediction,
                l1: loss.l1,
                entropy: loss.entropy,
            });
            Some(loss.total)
        } else if step % MINIBATCH_EVAL_EVERY == 0 {
            let full = net
                .loss_parts(xs, ys, reg_ref)
                .map_err(|e| into_diverged(e, step, loss.total))?;
            trace.push(TraceRow {
                step,
                total: full.total,
                prediction: full.prediction,
                l1: full.l1,
                entropy: full.entropy,
            });
            Some(full.total)
        } else {
            None
        };
        if let Some(total) = monitored {
            if !total.is_finite() || total > DIVERGENCE_CEILING {
                return Err(Error::Diverged {
                    step,
                    last_loss: total,
                });
            }
            if best_total - total >= config.convergence_tol.max(0.0) {
                best_total = total;
                best_step = step;
            } else if config.convergence_tol >= 0.0 && step - best_step >= CONVERGENCE_WINDOW {
                converged_at = Some(step);
                break;
            }
        }

        opt.step(&mut params, &grad);
        net.set_params(&params)?;
    }

    let final_loss = net
        .loss_parts(xs, ys, reg_ref)
        .map_err(|e| into_diverged(e, steps_run, best_total))?;
    let final_stats = net.activation_stats(xs)?;
    Ok(TrainReport {
        steps_run,
        converged_at,
        trace,
        final_loss,
        final_stats,
    })
}

fn step_loss(
    net: &KanNetwork,
    xs: &[Vec<f64>],
    ys: &[f64],
    reg: Option<&RegWeights>,
    step: usize,
) -> Result<(LossParts, Vec<f64>)> {
    net.loss_and_grad(xs, ys, reg)
        .map_err(|e| into_diverged(e, step, f64::NAN))
}

fn into_diverged(err: Error, step: usize, last_loss: f64) -> Error {
    match err {
        Error::NonFinite { .. } => Error::Diverged { step, last_loss },
        other => other,
    }
}

/// How a pruning pass reshaped the network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneReport {
    pub threshold: f64,
    pub shape_before: Vec<usize>,
    pub shape_after: Vec<usize>,
    /// Importance of every hidden node, by hidden layer, original indexing.
    pub importance: Vec<Vec<f64>>,
    /// Surviving node indices per hidden layer, original indexing.
    pub kept: Vec<Vec<usize>>,
    /// Hidden layers (0-based among hidden layers) where every node fell
    /// below the threshold and the strongest one was retained anyway.
    pub forced_keep: Vec<usize>,
}

/// Drop hidden nodes whose strongest incoming or outgoing edge is weak.
///
/// A node's importance is `min(max incoming edge L1, max outgoing edge L1)`
/// measured on the given normalized batch; nodes below `threshold` are
/// removed together with their edges. Input and output nodes always stay.
/// A hidden layer that would lose every node keeps its single most
/// important one so the network stays connected.
pub fn prune(
    net: &KanNetwork,
    xs: &[Vec<f64>],
    threshold: f64,
) -> Result<(KanNetwork, PruneReport)> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "prune threshold {threshold} must be non-negative"
        )));
    }
    let stats = net.activation_stats(xs)?;
    let layers = net.layers();
    let depth = layers.len();
    let shape_before = net.shape();

    let mut importance: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    let mut forced_keep = Vec::new();
    // hidden node layer h sits between edge layers h and h+1
    for h in 0..depth.saturating_sub(1) {
        let below = &layers[h];
        let above = &layers[h + 1];
        let width = below.n_out();
        let mut scores = Vec::with_capacity(width);
        for node in 0..width {
            let max_in = (0..below.n_in())
                .map(|i| stats.edge_l1[h][node * below.n_in() + i])
                .fold(0.0, f64::max);
            let max_out = (0..above.n_out())
                .map(|j| stats.edge_l1[h + 1][j * above.n_in() + node])
                .fold(0.0, f64::max);
            scores.push(max_in.min(max_out));
        }
        let mut keep: Vec<usize> = (0..width).filter(|&n| scores[n] >= threshold).collect();
        if keep.is_empty() {
            let top = (0..width)
                .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                .unwrap();
            keep.push(top);
            forced_keep.push(h);
        }
        importance.push(scores);
        kept.push(keep);
    }

    // rebuild layers over the surviving nodes
    let all_in: Vec<usize> = (0..shape_before[0]).collect();
    let all_out: Vec<usize> = (0..*shape_before.last().unwrap()).collect();
    let mut new_layers = Vec::with_capacity(depth);
    for (l, layer) in layers.iter().enumerate() {
        let in_nodes: &[usize] = if l == 0 { &all_in } else { &kept[l - 1] };
        let out_nodes: &[usize] = if l == depth - 1 { &all_out } else { &kept[l] };
        let rebuilt = KanLayer::from_fn(in_nodes.len(), out_nodes.len(), |j, i| {
            layer.edge(out_nodes[j], in_nodes[i]).clone()
        })?;
        new_layers.push(rebuilt);
    }
    let pruned = KanNetwork::new(
        new_layers,
        net.input_normalizer().clone(),
        *net.output_denormalizer(),
        net.feature_names().to_vec(),
        net.target_name().to_string(),
    )?;
    let report = PruneReport {
        threshold,
        shape_before,
        shape_after: pruned.shape(),
        importance,
        kept,
        forced_keep,
    };
    Ok((pruned, report))
}

/// Zero out individual edges whose mean |output| falls below a cutoff.
/// This is a finer-grained companion to node pruning, useful after the
/// network is already narrow.
pub fn prune_edges(
    net: &mut KanNetwork,
    xs: &[Vec<f64>],
    threshold: f64,
) -> Result<Vec<(usize, usize, usize)>> {
    let stats = net.activation_stats(xs)?;
    let mut removed = Vec::new();
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let n_in = layer.n_in();
        for j in 0..layer.n_out() {
            for i in 0..n_in {
                if stats.edge_l1[l][j * n_in + i] < threshold
                    && !layer.edge(j, i).is_zero()
                {
                    *layer.edge_mut(j, i) = EdgeActivation::Zero;
                    removed.push((l, j, i));
                }
            }
        }
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Denormalizer, Normalizer};
    use crate::spline::SplineGrid;

    fn sine_data(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64])
            .collect();
        let ys = xs.iter().map(|x| (2.5 * x[0]).sin() * 0.8).collect();
        (xs, ys)
    }

    #[test]
    fn fits_a_sine_with_one_edge() {
        let grid = SplineGrid::new(-1.0, 1.0, 8, 3).unwrap();
        let mut net = KanNetwork::init(&[1, 1], &grid, 1).unwrap();
        let (xs, ys) = sine_data(64);
        let config = TrainConfig {
            lambda: 0.0,
            learning_rate: 0.05,
            max_steps: 500,
            convergence_tol: -1.0,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &xs, &ys, &config).unwrap();
        let first = report.trace.first().unwrap().prediction;
        let last = report.final_loss.prediction;
        assert!(
            last < 1e-4,
            "single spline edge should nail a sine: {first} -> {last}"
        );
        assert!(last < first / 100.0);
    }

    #[test]
    fn early_stopping_fires_on_a_flat_loss() {
        let grid = SplineGrid::new(-1.0, 1.0, 5, 3).unwrap();
        let mut net = KanNetwork::init(&[1, 1], &grid, 2).unwrap();
        // target identical to the fresh network output: nothing to learn
        let xs: Vec<Vec<f64>> = (0..32).map(|i| vec![-1.0 + i as f64 / 16.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| net.forward_normalized(x)[0]).collect();
        let config = TrainConfig {
            lambda: 0.0,
            learning_rate: 1e-6,
            max_steps: 4000,
            convergence_tol: 1e-9,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &xs, &ys, &config).unwrap();
        assert!(report.converged_at.is_some());
        assert!(report.steps_run < 4000);
    }

    #[test]
    fn divergence_aborts_with_step() {
        let grid = SplineGrid::new(-1.0, 1.0, 5, 3).unwrap();
        let mut net = KanNetwork::init(&[1, 2, 1], &grid, 3).unwrap();
        let (xs, ys) = sine_data(32);
        let config = TrainConfig {
            lambda: 0.0,
            learning_rate: 1e9,
            max_steps: 400,
            convergence_tol: -1.0,
            ..TrainConfig::default()
        };
        match train(&mut net, &xs, &ys, &config) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn minibatch_training_is_deterministic_and_learns() {
        let grid = SplineGrid::new(-1.0, 1.0, 5, 3).unwrap();
        let (xs, ys) = sine_data(256);
        let config = TrainConfig {
            lambda: 0.001,
            learning_rate: 0.02,
            max_steps: 300,
            batch_size: Some(32),
            seed: 7,
            convergence_tol: -1.0,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = KanNetwork::init(&[1, 1], &grid, 4).unwrap();
            let report = train(&mut net, &xs, &ys, &config).unwrap();
            (net.params(), report.final_loss.prediction)
        };
        let (pa, la) = run();
        let (pb, lb) = run();
        assert_eq!(pa, pb, "same seed must reproduce bit-identical weights");
        assert_eq!(la, lb);
        assert!(la < 0.01, "mini-batch run should still learn: {la}");
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: Some(0),
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lambda: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    /// Build a [1, 3, 1] network where only hidden node 1 carries signal.
    fn lopsided_network() -> KanNetwork {
        let grid = SplineGrid::default_edge_grid();
        let strong = |scale: f64| {
            let mut coeffs = vec![0.0; grid.basis_count()];
            for (m, c) in coeffs.iter_mut().enumerate() {
                *c = scale * (m as f64 - 3.0) / 3.0;
            }
            EdgeActivation::Spline {
                w_b: 0.0,
                w_s: 1.0,
                coeffs,
                grid: grid.clone(),
            }
        };
        let first = KanLayer::new(
            1,
            3,
            vec![strong(1e-4), strong(2.0), strong(1e-4)],
        )
        .unwrap();
        let second = KanLayer::new(3, 1, vec![strong(1e-4), strong(1.5), strong(1e-4)]).unwrap();
        KanNetwork::new(
            vec![first, second],
            Normalizer::identity(1),
            Denormalizer::identity(),
            vec!["x".into()],
            "y".into(),
        )
        .unwrap()
    }

    #[test]
    fn prune_drops_weak_nodes() {
        let net = lopsided_network();
        let xs: Vec<Vec<f64>> = (0..64).map(|i| vec![-1.0 + i as f64 / 32.0]).collect();
        let (pruned, report) = prune(&net, &xs, 1e-2).unwrap();
        assert_eq!(report.shape_before, vec![1, 3, 1]);
        assert_eq!(report.shape_after, vec![1, 1, 1]);
        assert_eq!(report.kept, vec![vec![1]]);
        assert!(report.forced_keep.is_empty());
        assert_eq!(report.importance[0].len(), 3);
        assert!(report.importance[0][1] > report.importance[0][0]);

        // surviving path must be untouched: same edge, same outputs where
        // the dropped nodes contributed almost nothing
        for x in &xs {
            let before = net.forward_normalized(x)[0];
            let after = pruned.forward_normalized(x)[0];
            assert!((before - after).abs() < 1e-3, "x={}", x[0]);
        }
    }

    #[test]
    fn prune_never_empties_a_layer() {
        let net = lopsided_network();
        let xs: Vec<Vec<f64>> = (0..64).map(|i| vec![-1.0 + i as f64 / 32.0]).collect();
        let (pruned, report) = prune(&net, &xs, 1e9).unwrap();
        assert_eq!(pruned.shape(), vec![1, 1, 1]);
        assert_eq!(report.forced_keep, vec![0]);
        assert_eq!(report.kept, vec![vec![1]]);
    }

    #[test]
    fn prune_edges_zeroes_quiet_edges() {
        let mut net = lopsided_network();
        let xs: Vec<Vec<f64>> = (0..64).map(|i| vec![-1.0 + i as f64 / 32.0]).collect();
        let removed = prune_edges(&mut net, &xs, 1e-2).unwrap();
        assert_eq!(removed.len(), 4);
        assert!(net.layers()[0].edge(0, 0).is_zero());
        assert!(!net.layers()[0].edge(1, 0).is_zero());
    }
}
