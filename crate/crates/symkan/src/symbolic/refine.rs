//! Post-snap parameter polish.
//!
//! Snapping fits each edge against the spline it replaces; small per-edge
//! errors compound through the stack. Refinement re-optimizes the affine
//! parameters of the whole network against the prediction loss alone, and
//! keeps the best parameters seen so it can never make things worse.

use crate::error::{Error, Result};
use crate::network::KanNetwork;
use crate::optimizer::{Adam, AdamConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Stop once this many consecutive steps bring less improvement than
    /// `improvement_tol` in total.
    pub window: usize,
    pub improvement_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            learning_rate: 1e-3,
            max_steps: 2000,
            window: 100,
            improvement_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineReport {
    pub steps_run: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Full-batch gradient polish of the network on prediction loss only.
/// The network ends at the best parameters observed, so
/// `final_loss <= initial_loss` always holds.
pub fn refine(
    net: &mut KanNetwork,
    xs: &[Vec<f64>],
    ys: &[f64],
    config: &RefineConfig,
) -> Result<RefineReport> {
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "refine learning rate {} must be positive",
            config.learning_rate
        )));
    }
    if config.window == 0 {
        return Err(Error::InvalidConfig("refine window must be at least 1".into()));
    }
    let (initial, _) = net.loss_and_grad(xs, ys, None)?;
    let mut best_loss = initial.prediction;
    let mut best_params = net.params();
    let mut best_step = 0usize;

    let mut opt = Adam::new(
        net.param_count(),
        AdamConfig::default().with_learning_rate(config.learning_rate),
    );
    let mut params = best_params.clone();
    let mut steps_run = 0usize;
    for step in 0..config.max_steps {
        steps_run = step + 1;
        let (loss, grad) = match net.loss_and_grad(xs, ys, None) {
            Ok(ok) => ok,
            // a wild step can push a guarded basis into absurd territory;
            // the best snapshot below still stands, so stop rather than fail
            Err(Error::NonFinite { .. }) => break,
            Err(other) => return Err(other),
        };
        if best_loss - loss.prediction >= config.improvement_tol {
            best_loss = loss.prediction;
            best_params = params.clone();
            best_step = step;
        } else if step - best_step >= config.window {
            break;
        }
        opt.step(&mut params, &grad);
        net.set_params(&params)?;
    }
    net.set_params(&best_params)?;
    Ok(RefineReport {
        steps_run,
        initial_loss: initial.prediction,
        final_loss: best_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Denormalizer, Normalizer};
    use crate::network::{EdgeActivation, KanLayer};
    use crate::symbolic::BasisId;

    fn sine_net(c: f64, a: f64, b: f64, d: f64) -> KanNetwork {
        let edge = EdgeActivation::Symbolic {
            basis: BasisId::Sin,
            a,
            b,
            c,
            d,
        };
        KanNetwork::new(
            vec![KanLayer::new(1, 1, vec![edge]).unwrap()],
            Normalizer::identity(1),
            Denormalizer::identity(),
            vec!["x".into()],
            "y".into(),
        )
        .unwrap()
    }

    fn sine_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..128).map(|i| vec![-1.0 + i as f64 / 63.5]).collect();
        let ys = xs.iter().map(|x| 3.0 * (x[0] + 2.0).sin() - 0.5).collect();
        (xs, ys)
    }

    #[test]
    fn polishes_perturbed_parameters() {
        let (xs, ys) = sine_data();
        // start near, but not at, the generating parameters
        let mut net = sine_net(2.8, 1.07, 1.9, -0.42);
        let report = refine(&mut net, &xs, &ys, &RefineConfig::default()).unwrap();
        assert!(report.final_loss < report.initial_loss / 50.0);
        assert!(report.final_loss < 1e-4, "loss = {}", report.final_loss);
    }

    #[test]
    fn never_finishes_worse_than_it_started() {
        let (xs, ys) = sine_data();
        let mut net = sine_net(3.0, 1.0, 2.0, -0.5); // already optimal
        let config = RefineConfig {
            learning_rate: 5.0, // absurd on purpose
            max_steps: 200,
            ..RefineConfig::default()
        };
        let report = refine(&mut net, &xs, &ys, &config).unwrap();
        assert!(report.final_loss <= report.initial_loss + 1e-15);
        let (after, _) = net.loss_and_grad(&xs, &ys, None).unwrap();
        assert!((after.prediction - report.final_loss).abs() < 1e-12);
    }

    #[test]
    fn stops_when_nothing_improves() {
        let (xs, ys) = sine_data();
        let mut net = sine_net(3.0, 1.0, 2.0, -0.5);
        let config = RefineConfig {
            learning_rate: 1e-9,
            max_steps: 5000,
            ..RefineConfig::default()
        };
        let report = refine(&mut net, &xs, &ys, &config).unwrap();
        assert!(report.steps_run <= 200, "ran {} steps", report.steps_run);
    }
}
