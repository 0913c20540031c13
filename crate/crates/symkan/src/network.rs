//! Network structure and differentiation.
//!
//! A network is a stack of layers; a layer is a dense grid of learnable
//! scalar activations, one per (output node, input node) pair. Node values
//! are plain sums of incoming edge outputs, with no weights or biases
//! anywhere else, so every parameter lives on an edge.

use crate::data::{Denormalizer, Normalizer};
use crate::error::{Error, Result};
use crate::spline::SplineGrid;
use crate::symbolic::{BasisId, BasisLibrary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_deriv(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One learnable scalar function on an edge.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeActivation {
    /// Residual-plus-spline form: `w_b * silu(x) + w_s * sum(c_m * B_m(x))`.
    /// The spline term sees `x` clamped to the grid domain; the silu term
    /// sees the raw input so gradient flow survives outside the grid.
    Spline {
        w_b: f64,
        w_s: f64,
        coeffs: Vec<f64>,
        grid: SplineGrid,
    },
    /// Snapped closed form: `c * g(a * x + b) + d`.
    Symbolic {
        basis: BasisId,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    /// A pruned edge; contributes nothing and has no parameters.
    Zero,
}

impl EdgeActivation {
    /// Fresh spline edge with unit mixing weights and zero coefficients.
    pub fn spline(grid: SplineGrid) -> Self {
        let coeffs = vec![0.0; grid.basis_count()];
        EdgeActivation::Spline {
            w_b: 1.0,
            w_s: 1.0,
            coeffs,
            grid,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, EdgeActivation::Zero)
    }

    pub fn param_count(&self) -> usize {
        match self {
            EdgeActivation::Spline { coeffs, .. } => 2 + coeffs.len(),
            EdgeActivation::Symbolic { .. } => 4,
            EdgeActivation::Zero => 0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            EdgeActivation::Zero => 0.0,
            EdgeActivation::Symbolic { basis, a, b, c, d } => {
                c * basis.eval_guarded(a * x + b) + d
            }
            EdgeActivation::Spline {
                w_b,
                w_s,
                coeffs,
                grid,
            } => {
                let basis = grid.basis_values(x);
                let spline: f64 = coeffs.iter().zip(&basis).map(|(c, b)| c * b).sum();
                w_b * silu(x) + w_s * spline
            }
        }
    }

    /// Value and derivative with respect to the input.
    pub fn eval_with_dx(&self, x: f64) -> (f64, f64) {
        match self {
            EdgeActivation::Zero => (0.0, 0.0),
            EdgeActivation::Symbolic { basis, a, b, c, d } => {
                let z = a * x + b;
                (
                    c * basis.eval_guarded(z) + d,
                    c * basis.deriv_guarded(z) * a,
                )
            }
            EdgeActivation::Spline {
                w_b,
                w_s,
                coeffs,
                grid,
            } => {
                let basis = grid.basis_values(x);
                let derivs = grid.basis_derivatives(x);
                let spline: f64 = coeffs.iter().zip(&basis).map(|(c, b)| c * b).sum();
                let dspline: f64 = coeffs.iter().zip(&derivs).map(|(c, b)| c * b).sum();
                (
                    w_b * silu(x) + w_s * spline,
                    w_b * silu_deriv(x) + w_s * dspline,
                )
            }
        }
    }

    fn eval_into(&self, x: f64, buf: &mut Vec<f64>) -> f64 {
        match self {
            EdgeActivation::Spline {
                w_b,
                w_s,
                coeffs,
                grid,
            } => {
                buf.resize(grid.basis_count(), 0.0);
                grid.basis_values_into(x, buf);
                let spline: f64 = coeffs.iter().zip(buf.iter()).map(|(c, b)| c * b).sum();
                w_b * silu(x) + w_s * spline
            }
            _ => self.eval(x),
        }
    }
}

/// A dense grid of `n_out * n_in` edge activations, stored row-major:
/// the edge feeding output `j` from input `i` sits at `j * n_in + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    n_in: usize,
    n_out: usize,
    edges: Vec<EdgeActivation>,
}

impl KanLayer {
    pub fn new(n_in: usize, n_out: usize, edges: Vec<EdgeActivation>) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidShape(
                "layer widths must be at least 1".into(),
            ));
        }
        if edges.len() != n_in * n_out {
            return Err(Error::InvalidShape(format!(
                "layer {n_out}x{n_in} needs {} edges, got {}",
                n_in * n_out,
                edges.len()
            )));
        }
        Ok(KanLayer { n_in, n_out, edges })
    }

    pub fn from_fn(
        n_in: usize,
        n_out: usize,
        mut f: impl FnMut(usize, usize) -> EdgeActivation,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(n_in * n_out);
        for j in 0..n_out {
            for i in 0..n_in {
                edges.push(f(j, i));
            }
        }
        KanLayer::new(n_in, n_out, edges)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn edges(&self) -> &[EdgeActivation] {
        &self.edges
    }

    pub fn edge(&self, j: usize, i: usize) -> &EdgeActivation {
        &self.edges[j * self.n_in + i]
    }

    pub fn edge_mut(&mut self, j: usize, i: usize) -> &mut EdgeActivation {
        &mut self.edges[j * self.n_in + i]
    }
}

/// Regularizer weights: the loss is
/// `prediction + lambda * (mu1 * sum of layer L1 + mu2 * sum of layer entropy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegWeights {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl RegWeights {
    pub fn new(lambda: f64) -> Self {
        RegWeights {
            lambda,
            mu1: 1.0,
            mu2: 1.0,
        }
    }
}

/// Loss decomposition for one batch. `l1` and `entropy` are the raw
/// penalty sums before any weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub total: f64,
    pub prediction: f64,
    pub l1: f64,
    pub entropy: f64,
}

/// Mean-absolute-output statistics of every edge on some batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationStats {
    /// `edge_l1[l][j * n_in + i]`: mean |output| of that edge.
    pub edge_l1: Vec<Vec<f64>>,
    /// Per-layer sums of `edge_l1`.
    pub layer_l1: Vec<f64>,
    /// Per-layer activation entropy in nats.
    pub layer_entropy: Vec<f64>,
    /// Layers whose total L1 was zero; their entropy is reported as 0.
    pub degenerate_layers: Vec<usize>,
}

/// Entropy of the edge-magnitude distribution of one layer, in nats.
/// Zero-magnitude edges contribute nothing; a dead layer has entropy 0.
fn magnitude_entropy(edge_l1: &[f64], layer_l1: f64) -> f64 {
    if layer_l1 <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for &e in edge_l1 {
        let p = e / layer_l1;
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    s
}

/// A spline-edge network plus the scaling context it was trained in.
///
/// Training and inference run in normalized coordinates; the stored
/// normalizer and denormalizer translate raw feature/target units at the
/// boundary, and are folded into any emitted formula.
#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    layers: Vec<KanLayer>,
    input_normalizer: Normalizer,
    output_denormalizer: Denormalizer,
    feature_names: Vec<String>,
    target_name: String,
}

impl KanNetwork {
    pub fn new(
        layers: Vec<KanLayer>,
        input_normalizer: Normalizer,
        output_denormalizer: Denormalizer,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidShape("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(Error::InvalidShape(format!(
                    "layer output width {} does not feed layer input width {}",
                    w[0].n_out, w[1].n_in
                )));
            }
        }
        if input_normalizer.width() != layers[0].n_in {
            return Err(Error::InvalidShape(format!(
                "normalizer covers {} features but the first layer takes {}",
                input_normalizer.width(),
                layers[0].n_in
            )));
        }
        if feature_names.len() != layers[0].n_in {
            return Err(Error::InvalidShape(format!(
                "{} feature names for {} inputs",
                feature_names.len(),
                layers[0].n_in
            )));
        }
        Ok(KanNetwork {
            layers,
            input_normalizer,
            output_denormalizer,
            feature_names,
            target_name,
        })
    }

    /// Seeded random initialization: every edge is a spline with unit
    /// mixing weights and coefficients drawn from N(0, coeff_std^2),
    /// layer by layer in row-major edge order.
    pub fn init_scaled(
        shape: &[usize],
        grid: &SplineGrid,
        seed: u64,
        coeff_std: f64,
    ) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::InvalidShape(
                "shape needs an input and an output width".into(),
            ));
        }
        if !(coeff_std.is_finite() && coeff_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "coefficient std {coeff_std} must be non-negative"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, coeff_std)
            .map_err(|e| Error::InvalidConfig(format!("bad init distribution: {e}")))?;
        let mut layers = Vec::with_capacity(shape.len() - 1);
        for w in shape.windows(2) {
            let layer = KanLayer::from_fn(w[0], w[1], |_, _| {
                let coeffs = (0..grid.basis_count())
                    .map(|_| normal.sample(&mut rng))
                    .collect();
                EdgeActivation::Spline {
                    w_b: 1.0,
                    w_s: 1.0,
                    coeffs,
                    grid: grid.clone(),
                }
            })?;
            layers.push(layer);
        }
        let names = (1..=shape[0]).map(|i| format!("x{i}")).collect();
        KanNetwork::new(
            layers,
            Normalizer::identity(shape[0]),
            Denormalizer::identity(),
            names,
            "y".into(),
        )
    }

    /// `init_scaled` with the standard coefficient scale of 0.1.
    pub fn init(shape: &[usize], grid: &SplineGrid, seed: u64) -> Result<Self> {
        KanNetwork::init_scaled(shape, grid, seed, 0.1)
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut shape = vec![self.layers[0].n_in];
        shape.extend(self.layers.iter().map(|l| l.n_out));
        shape
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn input_normalizer(&self) -> &Normalizer {
        &self.input_normalizer
    }

    pub fn output_denormalizer(&self) -> &Denormalizer {
        &self.output_denormalizer
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn set_scaling(
        &mut self,
        input_normalizer: Normalizer,
        output_denormalizer: Denormalizer,
    ) -> Result<()> {
        if input_normalizer.width() != self.n_inputs() {
            return Err(Error::InvalidShape(format!(
                "normalizer covers {} features but the network takes {}",
                input_normalizer.width(),
                self.n_inputs()
            )));
        }
        self.input_normalizer = input_normalizer;
        self.output_denormalizer = output_denormalizer;
        Ok(())
    }

    pub fn set_names(&mut self, feature_names: Vec<String>, target_name: String) -> Result<()> {
        if feature_names.len() != self.n_inputs() {
            return Err(Error::InvalidShape(format!(
                "{} feature names for {} inputs",
                feature_names.len(),
                self.n_inputs()
            )));
        }
        self.feature_names = feature_names;
        self.target_name = target_name;
        Ok(())
    }

    /// Run the stack on an already-normalized input vector.
    pub fn forward_normalized(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_inputs(), "input width mismatch");
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.n_out];
            for j in 0..layer.n_out {
                let mut acc = 0.0;
                for (i, &xi) in current.iter().enumerate() {
                    acc += layer.edges[j * layer.n_in + i].eval(xi);
                }
                next[j] = acc;
            }
            current = next;
        }
        current
    }

    /// Predict the raw-unit target for one raw-unit feature vector.
    pub fn predict(&self, x_raw: &[f64]) -> Result<f64> {
        if x_raw.len() != self.n_inputs() {
            return Err(Error::LengthMismatch {
                left: x_raw.len(),
                right: self.n_inputs(),
            });
        }
        if self.n_outputs() != 1 {
            return Err(Error::InvalidShape(
                "predict requires a single output node".into(),
            ));
        }
        let z = self.input_normalizer.apply(x_raw);
        let y = self.forward_normalized(&z)[0];
        Ok(self.output_denormalizer.denormalize(y))
    }

    pub fn predict_batch(&self, xs_raw: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs_raw.iter().map(|x| self.predict(x)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.edges.iter())
            .map(|e| e.param_count())
            .sum()
    }

    /// Flatten all parameters, layer by layer, row-major edges, each edge
    /// in its fixed field order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for edge in &layer.edges {
                match edge {
                    EdgeActivation::Spline {
                        w_b, w_s, coeffs, ..
                    } => {
                        out.push(*w_b);
                        out.push(*w_s);
                        out.extend_from_slice(coeffs);
                    }
                    EdgeActivation::Symbolic { a, b, c, d, .. } => {
                        out.extend_from_slice(&[*a, *b, *c, *d]);
                    }
                    EdgeActivation::Zero => {}
                }
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: self.param_count(),
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            for edge in &mut layer.edges {
                match edge {
                    EdgeActivation::Spline {
                        w_b, w_s, coeffs, ..
                    } => {
                        *w_b = params[at];
                        *w_s = params[at + 1];
                        let nc = coeffs.len();
                        coeffs.copy_from_slice(&params[at + 2..at + 2 + nc]);
                        at += 2 + nc;
                    }
                    EdgeActivation::Symbolic { a, b, c, d, .. } => {
                        *a = params[at];
                        *b = params[at + 1];
                        *c = params[at + 2];
                        *d = params[at + 3];
                        at += 4;
                    }
                    EdgeActivation::Zero => {}
                }
            }
        }
        Ok(())
    }

    /// Starting offset of each edge's parameter block, per layer.
    fn param_offsets(&self) -> Vec<Vec<usize>> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            let mut row = Vec::with_capacity(layer.edges.len());
            for edge in &layer.edges {
                row.push(at);
                at += edge.param_count();
            }
            offsets.push(row);
        }
        offsets
    }

    /// Mean-|output| statistics for every edge over a normalized batch.
    pub fn activation_stats(&self, xs: &[Vec<f64>]) -> Result<ActivationStats> {
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = xs.len() as f64;
        let mut edge_l1: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.edges.len()])
            .collect();
        let mut buf = Vec::new();
        for x in xs {
            assert_eq!(x.len(), self.n_inputs(), "input width mismatch");
            let mut current = x.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let mut next = vec![0.0; layer.n_out];
                for j in 0..layer.n_out {
                    for (i, &xi) in current.iter().enumerate() {
                        let o = layer.edges[j * layer.n_in + i].eval_into(xi, &mut buf);
                        edge_l1[l][j * layer.n_in + i] += o.abs();
                        next[j] += o;
                    }
                }
                current = next;
            }
        }
        for row in &mut edge_l1 {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        let layer_l1: Vec<f64> = edge_l1.iter().map(|row| row.iter().sum()).collect();
        let layer_entropy: Vec<f64> = edge_l1
            .iter()
            .zip(&layer_l1)
            .map(|(row, &t)| magnitude_entropy(row, t))
            .collect();
        let degenerate_layers = layer_l1
            .iter()
            .enumerate()
            .filter(|(_, &t)| t <= 0.0)
            .map(|(l, _)| l)
            .collect();
        Ok(ActivationStats {
            edge_l1,
            layer_l1,
            layer_entropy,
            degenerate_layers,
        })
    }

    /// Forward-only loss evaluation over a normalized batch.
    pub fn loss_parts(
        &self,
        xs: &[Vec<f64>],
        ys: &[f64],
        reg: Option<&RegWeights>,
    ) -> Result<LossParts> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if ys.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: ys.len(),
            });
        }
        if self.n_outputs() != 1 {
            return Err(Error::InvalidShape(
                "loss requires a single output node".into(),
            ));
        }
        let stats = self.activation_stats(xs)?;
        let mut prediction = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let out = self.forward_normalized(x)[0];
            if !out.is_finite() {
                return Err(Error::NonFinite {
                    layer: self.layers.len(),
                    row: 0,
                    col: 0,
                });
            }
            let r = out - y;
            prediction += r * r;
        }
        prediction /= n as f64;
        let l1: f64 = stats.layer_l1.iter().sum();
        let entropy: f64 = stats.layer_entropy.iter().sum();
        let total = prediction
            + reg.map_or(0.0, |r| r.lambda * (r.mu1 * l1 + r.mu2 * entropy));
        Ok(LossParts {
            total,
            prediction,
            l1,
            entropy,
        })
    }

    /// Batch loss and its gradient with respect to every parameter.
    ///
    /// Inputs and targets must already be normalized. With `reg` present the
    /// sparsity penalties are included and their gradients are propagated
    /// through every layer below the edge they touch.
    pub fn loss_and_grad(
        &self,
        xs: &[Vec<f64>],
        ys: &[f64],
        reg: Option<&RegWeights>,
    ) -> Result<(LossParts, Vec<f64>)> {
        let n = xs.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if ys.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: ys.len(),
            });
        }
        if self.n_outputs() != 1 {
            return Err(Error::InvalidShape(
                "training requires a single output node".into(),
            ));
        }
        if xs[0].len() != self.n_inputs() {
            return Err(Error::LengthMismatch {
                left: xs[0].len(),
                right: self.n_inputs(),
            });
        }
        let n_f = n as f64;
        let depth = self.layers.len();

        // forward, keeping every node value (flattened sample-major)
        let mut node_vals: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let mut first = Vec::with_capacity(n * self.n_inputs());
        for x in xs {
            first.extend_from_slice(x);
        }
        node_vals.push(first);
        let mut edge_abs: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.edges.len()])
            .collect();
        let mut buf = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let prev = &node_vals[l];
            let mut next = vec![0.0; n * layer.n_out];
            for s in 0..n {
                let row = &prev[s * layer.n_in..(s + 1) * layer.n_in];
                for j in 0..layer.n_out {
                    let mut acc = 0.0;
                    for (i, &xi) in row.iter().enumerate() {
                        let o = layer.edges[j * layer.n_in + i].eval_into(xi, &mut buf);
                        edge_abs[l][j * layer.n_in + i] += o.abs();
                        acc += o;
                    }
                    next[s * layer.n_out + j] = acc;
                }
            }
            if let Some(pos) = next.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: l + 1,
                    row: pos / layer.n_out,
                    col: pos % layer.n_out,
                });
            }
            node_vals.push(next);
        }

        let preds = &node_vals[depth];
        let mut prediction = 0.0;
        for s in 0..n {
            let r = preds[s] - ys[s];
            prediction += r * r;
        }
        prediction /= n_f;

        // per-layer penalty terms from mean edge magnitudes
        let edge_l1: Vec<Vec<f64>> = edge_abs
            .iter()
            .map(|row| row.iter().map(|a| a / n_f).collect())
            .collect();
        let layer_l1: Vec<f64> = edge_l1.iter().map(|row| row.iter().sum()).collect();
        let layer_entropy: Vec<f64> = edge_l1
            .iter()
            .zip(&layer_l1)
            .map(|(row, &t)| magnitude_entropy(row, t))
            .collect();
        let l1: f64 = layer_l1.iter().sum();
        let entropy: f64 = layer_entropy.iter().sum();
        let total = prediction
            + reg.map_or(0.0, |r| r.lambda * (r.mu1 * l1 + r.mu2 * entropy));

        // d(penalty)/d(edge mean |output|) for every edge
        let reg_coeff: Vec<Vec<f64>> = match reg {
            None => edge_l1.iter().map(|row| vec![0.0; row.len()]).collect(),
            Some(r) => edge_l1
                .iter()
                .zip(&layer_l1)
                .zip(&layer_entropy)
                .map(|((row, &total_l1), &s_l)| {
                    row.iter()
                        .map(|&e| {
                            let ds = if e > 0.0 && total_l1 > 0.0 {
                                -((e / total_l1).ln() + s_l) / total_l1
                            } else {
                                0.0
                            };
                            r.lambda * (r.mu1 + r.mu2 * ds)
                        })
                        .collect()
                })
                .collect(),
        };

        // backward
        let offsets = self.param_offsets();
        let mut grad = vec![0.0; self.param_count()];
        let mut delta: Vec<f64> = (0..n).map(|s| 2.0 * (preds[s] - ys[s]) / n_f).collect();
        let mut bvals = Vec::new();
        let mut bders = Vec::new();
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            let prev = &node_vals[l];
            let mut delta_prev = vec![0.0; n * layer.n_in];
            for s in 0..n {
                for j in 0..layer.n_out {
                    let dj = delta[s * layer.n_out + j];
                    for i in 0..layer.n_in {
                        let e = j * layer.n_in + i;
                        let x = prev[s * layer.n_in + i];
                        let base = offsets[l][e];
                        let rc = reg_coeff[l][e];
                        match &layer.edges[e] {
                            EdgeActivation::Zero => {}
                            EdgeActivation::Symbolic { basis, a, b, c, d } => {
                                let z = a * x + b;
                                let gv = basis.eval_guarded(z);
                                let gd = basis.deriv_guarded(z);
                                let o = c * gv + d;
                                let g = dj + rc * sign0(o) / n_f;
                                grad[base] += g * c * gd * x;
                                grad[base + 1] += g * c * gd;
                                grad[base + 2] += g * gv;
                                grad[base + 3] += g;
                                delta_prev[s * layer.n_in + i] += g * c * gd * a;
                            }
                            EdgeActivation::Spline {
                                w_b,
                                w_s,
                                coeffs,
                                grid,
                            } => {
                                let bc = grid.basis_count();
                                bvals.resize(bc, 0.0);
                                bders.resize(bc, 0.0);
                                grid.basis_values_into(x, &mut bvals);
                                grid.basis_derivatives_into(x, &mut bders);
                                let sv = silu(x);
                                let mut spline = 0.0;
                                let mut dspline = 0.0;
                                for m in 0..bc {
                                    spline += coeffs[m] * bvals[m];
                                    dspline += coeffs[m] * bders[m];
                                }
                                let o = w_b * sv + w_s * spline;
                                let g = dj + rc * sign0(o) / n_f;
                                grad[base] += g * sv;
                                grad[base + 1] += g * spline;
                                for m in 0..bc {
                                    grad[base + 2 + m] += g * w_s * bvals[m];
                                }
                                delta_prev[s * layer.n_in + i] +=
                                    g * (w_b * silu_deriv(x) + w_s * dspline);
                            }
                        }
                    }
                }
            }
            delta = delta_prev;
        }

        Ok((
            LossParts {
                total,
                prediction,
                l1,
                entropy,
            },
            grad,
        ))
    }

    /// Serialize the model to pretty JSON at `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = self.to_doc();
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Load and validate a model saved by `save`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: ModelDoc = serde_json::from_str(&text)?;
        KanNetwork::from_doc(doc)
    }

    fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            version: MODEL_VERSION,
            basis_library_version: BasisLibrary::VERSION,
            shape: self.shape(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            input_normalizer: self.input_normalizer.clone(),
            output_denormalizer: self.output_denormalizer,
            layers: self
                .layers
                .iter()
                .map(|layer| LayerDoc {
                    n_in: layer.n_in,
                    n_out: layer.n_out,
                    edges: layer
                        .edges
                        .iter()
                        .map(|e| match e {
                            EdgeActivation::Spline {
                                w_b,
                                w_s,
                                coeffs,
                                grid,
                            } => EdgeDoc::Spline {
                                w_b: *w_b,
                                w_s: *w_s,
                                coeffs: coeffs.clone(),
                                grid: grid.clone(),
                            },
                            EdgeActivation::Symbolic { basis, a, b, c, d } => EdgeDoc::Symbolic {
                                basis: basis.name().to_string(),
                                a: *a,
                                b: *b,
                                c: *c,
                                d: *d,
                            },
                            EdgeActivation::Zero => EdgeDoc::Zero,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn from_doc(doc: ModelDoc) -> Result<Self> {
        if doc.version != MODEL_VERSION {
            return Err(Error::SchemaViolation {
                path: "version".into(),
                message: format!("unsupported model version {}", doc.version),
            });
        }
        if doc.basis_library_version != BasisLibrary::VERSION {
            return Err(Error::SchemaViolation {
                path: "basis_library_version".into(),
                message: format!(
                    "model uses basis library v{}, this build has v{}",
                    doc.basis_library_version,
                    BasisLibrary::VERSION
                ),
            });
        }
        if doc.shape.len() != doc.layers.len() + 1 {
            return Err(Error::SchemaViolation {
                path: "shape".into(),
                message: format!(
                    "shape lists {} widths for {} layers",
                    doc.shape.len(),
                    doc.layers.len()
                ),
            });
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (l, ld) in doc.layers.into_iter().enumerate() {
            let path = format!("layers[{l}]");
            if ld.n_in != doc.shape[l] || ld.n_out != doc.shape[l + 1] {
                return Err(Error::DimensionMismatch {
                    path,
                    message: format!(
                        "layer is {}x{} but shape says {}x{}",
                        ld.n_out,
                        ld.n_in,
                        doc.shape[l + 1],
                        doc.shape[l]
                    ),
                });
            }
            if ld.edges.len() != ld.n_in * ld.n_out {
                return Err(Error::DimensionMismatch {
                    path: format!("{path}.edges"),
                    message: format!(
                        "expected {} edges, found {}",
                        ld.n_in * ld.n_out,
                        ld.edges.len()
                    ),
                });
            }
            let mut edges = Vec::with_capacity(ld.edges.len());
            for (e, ed) in ld.edges.into_iter().enumerate() {
                let epath = format!("{path}.edges[{e}]");
                let edge = match ed {
                    EdgeDoc::Zero => EdgeActivation::Zero,
                    EdgeDoc::Symbolic { basis, a, b, c, d } => {
                        let id = BasisId::from_name(&basis).ok_or(Error::UnknownBasis {
                            id: basis,
                            path: format!("{epath}.basis"),
                        })?;
                        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
                            if !v.is_finite() {
                                return Err(Error::SchemaViolation {
                                    path: format!("{epath}.{name}"),
                                    message: format!("non-finite value {v}"),
                                });
                            }
                        }
                        EdgeActivation::Symbolic {
                            basis: id,
                            a,
                            b,
                            c,
                            d,
                        }
                    }
                    EdgeDoc::Spline {
                        w_b,
                        w_s,
                        coeffs,
                        grid,
                    } => {
                        if coeffs.len() != grid.basis_count() {
                            return Err(Error::DimensionMismatch {
                                path: format!("{epath}.coeffs"),
                                message: format!(
                                    "grid has {} bases, found {} coefficients",
                                    grid.basis_count(),
                                    coeffs.len()
                                ),
                            });
                        }
                        if !(w_b.is_finite()
                            && w_s.is_finite()
                            && coeffs.iter().all(|v| v.is_finite()))
                        {
                            return Err(Error::SchemaViolation {
                                path: epath,
                                message: "non-finite spline parameter".into(),
                            });
                        }
                        EdgeActivation::Spline {
                            w_b,
                            w_s,
                            coeffs,
                            grid,
                        }
                    }
                };
                edges.push(edge);
            }
            layers.push(KanLayer::new(ld.n_in, ld.n_out, edges)?);
        }
        if doc.input_normalizer.width() != doc.shape[0]
            || doc.input_normalizer.maxs.len() != doc.shape[0]
        {
            return Err(Error::DimensionMismatch {
                path: "input_normalizer".into(),
                message: format!(
                    "covers {} features, network takes {}",
                    doc.input_normalizer.width(),
                    doc.shape[0]
                ),
            });
        }
        if !(doc.output_denormalizer.scale.is_finite()
            && doc.output_denormalizer.scale != 0.0
            && doc.output_denormalizer.offset.is_finite())
        {
            return Err(Error::SchemaViolation {
                path: "output_denormalizer".into(),
                message: "scale must be finite and nonzero".into(),
            });
        }
        if doc.feature_names.len() != doc.shape[0] {
            return Err(Error::DimensionMismatch {
                path: "feature_names".into(),
                message: format!(
                    "{} names for {} inputs",
                    doc.feature_names.len(),
                    doc.shape[0]
                ),
            });
        }
        KanNetwork::new(
            layers,
            doc.input_normalizer,
            doc.output_denormalizer,
            doc.feature_names,
            doc.target_name,
        )
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    basis_library_version: u32,
    shape: Vec<usize>,
    feature_names: Vec<String>,
    target_name: String,
    input_normalizer: Normalizer,
    output_denormalizer: Denormalizer,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    n_in: usize,
    n_out: usize,
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum EdgeDoc {
    Spline {
        w_b: f64,
        w_s: f64,
        coeffs: Vec<f64>,
        grid: SplineGrid,
    },
    Symbolic {
        basis: String,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    Zero,
}
