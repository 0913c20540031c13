//! Unsupervised dependency detection through contrastive training.
//!
//! Real rows are labeled 1 and column-shuffled rows 0. Shuffling each
//! column independently preserves every marginal distribution but destroys
//! the joint structure, so the only way to tell the classes apart is to
//! key on relations between features. A network trained on this task
//! routes signal through exactly the features that participate in such
//! relations, and first-layer edge magnitudes rank them.

use crate::data::{Denormalizer, Normalizer};
use crate::error::{Error, Result};
use crate::network::{EdgeActivation, KanNetwork};
use crate::spline::SplineGrid;
use crate::symbolic::library::BasisId;
use crate::training::{train, TrainConfig, TrainReport};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct UnsupervisedConfig {
    /// Width of the summing layer between the inputs and the gaussian head.
    pub mid_width: usize,
    pub grid: SplineGrid,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for UnsupervisedConfig {
    fn default() -> Self {
        Self {
            mid_width: 1,
            grid: SplineGrid::default_edge_grid(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Per-feature relevance extracted from a trained contrastive network.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    /// Summed first-layer edge magnitude per feature, on real rows.
    pub scores: Vec<f64>,
    /// Feature indices sorted by descending score.
    pub ranking: Vec<usize>,
}

/// Build the contrastive dataset: the original rows labeled 1 followed by
/// an equal number of column-wise shuffled rows labeled 0.
pub fn build_contrastive(xs: &[Vec<f64>], seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = xs.len();
    let d = xs.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut negatives = vec![vec![0.0; d]; n];
    for col in 0..d {
        let mut values: Vec<f64> = xs.iter().map(|row| row[col]).collect();
        values.shuffle(&mut rng);
        for (row, v) in negatives.iter_mut().zip(values) {
            row[col] = v;
        }
    }
    let mut all = xs.to_vec();
    all.extend(negatives);
    let mut labels = vec![1.0; n];
    labels.extend(vec![0.0; n]);
    (all, labels)
}

/// Score features by their summed first-layer edge magnitude, measured
/// over raw-unit rows.
pub fn feature_importance(net: &KanNetwork, xs: &[Vec<f64>]) -> Result<ImportanceReport> {
    let zs = net.input_normalizer().apply_all(xs);
    let stats = net.activation_stats(&zs)?;
    let first = &stats.edge_l1[0];
    let n_in = net.n_inputs();
    let per_out = first.len() / n_in;
    let mut scores = vec![0.0; n_in];
    for j in 0..per_out {
        for i in 0..n_in {
            scores[i] += first[j * n_in + i];
        }
    }
    let mut ranking: Vec<usize> = (0..n_in).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(ImportanceReport {
        feature_names: net.feature_names().to_vec(),
        scores,
        ranking,
    })
}

/// Train a contrastive network over unlabeled rows and rank the features.
///
/// The head edge is pinned to a gaussian at initialization, so the network
/// scores rows by how close the learned feature combination lands to the
/// bump's center; training is free to move and reshape the bump.
pub fn train_unsupervised(
    xs: &[Vec<f64>],
    feature_names: &[String],
    config: &UnsupervisedConfig,
) -> Result<(KanNetwork, TrainReport, ImportanceReport)> {
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_in = xs[0].len();
    if feature_names.len() != n_in {
        return Err(Error::LengthMismatch {
            left: feature_names.len(),
            right: n_in,
        });
    }
    if config.mid_width == 0 {
        return Err(Error::InvalidConfig("mid_width must be positive".into()));
    }

    let (all, labels) = build_contrastive(xs, config.seed ^ 0x5eed);
    let shape = [n_in, config.mid_width, 1];
    let mut net = KanNetwork::init(&shape, &config.grid, config.seed)?;
    for i in 0..config.mid_width {
        *net.layers_mut()[1].edge_mut(0, i) = EdgeActivation::Symbolic {
            basis: BasisId::Gaussian,
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 0.0,
        };
    }

    let (normalizer, _constant) = Normalizer::fit(&all, feature_names)?;
    // labels are 0/1; map them onto the network's [-1, 1] output range
    let denorm = Denormalizer {
        scale: 0.5,
        offset: 0.5,
    };
    net.set_scaling(normalizer, denorm)?;
    net.set_names(feature_names.to_vec(), "is_real".into())?;

    let zs = net.input_normalizer().apply_all(&all);
    let yn: Vec<f64> = labels
        .iter()
        .map(|&y| net.output_denormalizer().normalize(y))
        .collect();
    let report = train(&mut net, &zs, &yn, &config.train)?;
    let importance = feature_importance(&net, xs)?;
    Ok((net, report, importance))
}
