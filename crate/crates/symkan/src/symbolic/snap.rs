//! Replacing trained spline edges with library functions.
//!
//! Edge inputs are collected from a forward pass of the *unmodified*
//! network, so every fit targets the shape the edge actually learned, not
//! the drift introduced by snapping earlier layers.

use crate::error::{Error, Result};
use crate::network::{EdgeActivation, KanNetwork};
use crate::symbolic::fit::{all_fits, select_fit, AffineFit};
use crate::symbolic::library::{BasisId, BasisLibrary};
use serde::Serialize;

/// Pin one edge to a specific basis regardless of the search outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapOverride {
    pub layer: usize,
    pub out: usize,
    pub inp: usize,
    pub basis: BasisId,
}

#[derive(Debug, Clone)]
pub struct SnapConfig {
    /// Fits below this R^2 leave the edge as a spline.
    pub r2_floor: f64,
    /// Edge samples are strided down to at most this many per fit.
    pub max_samples: usize,
    pub library: BasisLibrary,
    pub overrides: Vec<SnapOverride>,
}

impl Default for SnapConfig {
    fn default() -> Self {
        SnapConfig {
            r2_floor: 0.8,
            max_samples: 4096,
            library: BasisLibrary::full(),
            overrides: Vec::new(),
        }
    }
}

/// What happened to one spline edge during snapping.
#[derive(Debug, Clone, Serialize)]
pub struct SnapDecision {
    pub layer: usize,
    pub out: usize,
    pub inp: usize,
    /// `None` means the edge stayed a spline (below the floor or unfittable).
    pub chosen: Option<AffineFit>,
    /// Every candidate fit, best first.
    pub candidates: Vec<AffineFit>,
    /// The winning fit excluded some out-of-domain samples.
    pub coverage_warning: bool,
    /// The choice came from an override, not the search.
    pub forced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapReport {
    pub r2_floor: f64,
    pub decisions: Vec<SnapDecision>,
}

impl SnapReport {
    /// Edges that stayed splines.
    pub fn unsnapped(&self) -> Vec<(usize, usize, usize)> {
        self.decisions
            .iter()
            .filter(|d| d.chosen.is_none())
            .map(|d| (d.layer, d.out, d.inp))
            .collect()
    }

    pub fn fully_snapped(&self) -> bool {
        self.decisions.iter().all(|d| d.chosen.is_some())
    }
}

/// Snap every spline edge of the network in place.
pub fn snap_network(
    net: &mut KanNetwork,
    xs: &[Vec<f64>],
    config: &SnapConfig,
) -> Result<SnapReport> {
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..=1.0).contains(&config.r2_floor) {
        return Err(Error::InvalidConfig(format!(
            "r2 floor {} outside [0, 1]",
            config.r2_floor
        )));
    }
    if config.max_samples < 4 {
        return Err(Error::InvalidConfig(
            "snapping needs at least 4 samples per edge".into(),
        ));
    }
    for ov in &config.overrides {
        let layers = net.layers();
        let valid = ov.layer < layers.len()
            && ov.out < layers[ov.layer].n_out()
            && ov.inp < layers[ov.layer].n_in();
        if !valid {
            return Err(Error::InvalidConfig(format!(
                "override targets edge l={} j={} i={} outside the network",
                ov.layer, ov.out, ov.inp
            )));
        }
    }

    // stride-subsample the batch, then record node inputs per layer
    let stride = xs.len().div_ceil(config.max_samples);
    let sample: Vec<&Vec<f64>> = xs.iter().step_by(stride).collect();
    let mut layer_inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(net.layers().len());
    {
        let mut current: Vec<Vec<f64>> = sample.iter().map(|x| (*x).clone()).collect();
        for layer in net.layers() {
            layer_inputs.push(current.clone());
            current = current
                .iter()
                .map(|row| {
                    (0..layer.n_out())
                        .map(|j| {
                            (0..layer.n_in())
                                .map(|i| layer.edge(j, i).eval(row[i]))
                                .sum()
                        })
                        .collect()
                })
                .collect();
        }
    }

    let mut decisions = Vec::new();
    let mut replacements: Vec<(usize, usize, usize, EdgeActivation)> = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out() {
            for i in 0..layer.n_in() {
                let edge = layer.edge(j, i);
                if !matches!(edge, EdgeActivation::Spline { .. }) {
                    continue;
                }
                let ex: Vec<f64> = layer_inputs[l].iter().map(|row| row[i]).collect();
                let ey: Vec<f64> = ex.iter().map(|&x| edge.eval(x)).collect();
                let forced = config
                    .overrides
                    .iter()
                    .find(|ov| ov.layer == l && ov.out == j && ov.inp == i);
                let candidates = match forced {
                    Some(ov) => all_fits(&BasisLibrary::subset(&[ov.basis]), &ex, &ey)?,
                    None => all_fits(&config.library, &ex, &ey)?,
                };
                let chosen = match forced {
                    // an override is honored even below the floor
                    Some(_) => candidates.first().copied(),
                    None => pick_best(&candidates)
                        .filter(|fit| fit.r2 >= config.r2_floor),
                };
                if let Some(fit) = chosen {
                    replacements.push((
                        l,
                        j,
                        i,
                        EdgeActivation::Symbolic {
                            basis: fit.basis,
                            a: fit.a,
                            b: fit.b,
                            c: fit.c,
                            d: fit.d,
                        },
                    ));
                }
                decisions.push(SnapDecision {
                    layer: l,
                    out: j,
                    inp: i,
                    coverage_warning: chosen.map_or(false, |f| f.excluded > 0),
                    chosen,
                    candidates,
                    forced: forced.is_some(),
                });
            }
        }
    }
    for (l, j, i, edge) in replacements {
        *net.layers_mut()[l].edge_mut(j, i) = edge;
    }
    Ok(SnapReport {
        r2_floor: config.r2_floor,
        decisions,
    })
}

/// Top scorer from an already-computed table; near-ties resolve toward
/// the simpler basis, mirroring `best_fit`.
fn pick_best(candidates: &[AffineFit]) -> Option<AffineFit> {
    select_fit(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Denormalizer, Normalizer};
    use crate::network::KanLayer;
    use crate::spline::SplineGrid;
    use crate::training::{train, TrainConfig};

    /// Train a two-edge stack on a known composition so the snap search has
    /// honest spline shapes to work against.
    fn trained_composition() -> (KanNetwork, Vec<Vec<f64>>) {
        let grid = SplineGrid::new(-1.0, 1.0, 8, 3).unwrap();
        let mut net = KanNetwork::init(&[1, 1], &grid, 11).unwrap();
        let xs: Vec<Vec<f64>> = (0..256).map(|i| vec![-1.0 + i as f64 / 127.5]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (x[0] + 2.0).sin() - 0.5).collect();
        let config = TrainConfig {
            lambda: 0.0,
            learning_rate: 0.05,
            max_steps: 800,
            convergence_tol: -1.0,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &xs, &ys, &config).unwrap();
        assert!(
            report.final_loss.prediction < 1e-4,
            "training must land first: {}",
            report.final_loss.prediction
        );
        (net, xs)
    }

    #[test]
    fn snaps_a_trained_sine_edge() {
        let (mut net, xs) = trained_composition();
        let report = snap_network(&mut net, &xs, &SnapConfig::default()).unwrap();
        assert_eq!(report.decisions.len(), 1);
        assert!(report.fully_snapped());
        let fit = report.decisions[0].chosen.unwrap();
        assert!(
            matches!(fit.basis, BasisId::Sin | BasisId::Cos),
            "expected a sinusoid, got {}",
            fit.basis
        );
        assert!(fit.r2 > 0.999, "r2 = {}", fit.r2);
        // snapped network still reproduces the target curve
        for x in xs.iter().step_by(16) {
            let want = 3.0 * (x[0] + 2.0).sin() - 0.5;
            let got = net.forward_normalized(x)[0];
            assert!((want - got).abs() < 0.05, "x={}: {want} vs {got}", x[0]);
        }
        match net.layers()[0].edge(0, 0) {
            EdgeActivation::Symbolic { .. } => {}
            other => panic!("edge should be symbolic, got {other:?}"),
        }
    }

    #[test]
    fn wiggly_edges_stay_unsnapped() {
        let grid = SplineGrid::new(-1.0, 1.0, 10, 3).unwrap();
        // deliberately non-library shape: an irregular jagged profile
        let coeffs = vec![
            0.9, -1.3, 0.2, 1.1, -0.8, 1.4, -0.1, -1.2, 0.7, 0.05, -0.95, 1.25, -0.4,
        ];
        let edge = EdgeActivation::Spline {
            w_b: 0.0,
            w_s: 1.0,
            coeffs,
            grid,
        };
        let mut net = KanNetwork::new(
            vec![KanLayer::new(1, 1, vec![edge]).unwrap()],
            Normalizer::identity(1),
            Denormalizer::identity(),
            vec!["x".into()],
            "y".into(),
        )
        .unwrap();
        let xs: Vec<Vec<f64>> = (0..512).map(|i| vec![-1.0 + i as f64 / 255.5]).collect();
        let report = snap_network(&mut net, &xs, &SnapConfig::default()).unwrap();
        assert!(!report.fully_snapped());
        assert_eq!(report.unsnapped(), vec![(0, 0, 0)]);
        let best = report.decisions[0].candidates.first().unwrap();
        assert!(best.r2 < 0.8, "should sit under the floor: {}", best.r2);
        assert!(matches!(
            net.layers()[0].edge(0, 0),
            EdgeActivation::Spline { .. }
        ));
    }

    #[test]
    fn override_forces_the_named_basis() {
        let (mut net, xs) = trained_composition();
        let config = SnapConfig {
            overrides: vec![SnapOverride {
                layer: 0,
                out: 0,
                inp: 0,
                basis: BasisId::Gaussian,
            }],
            ..SnapConfig::default()
        };
        let report = snap_network(&mut net, &xs, &config).unwrap();
        let decision = &report.decisions[0];
        assert!(decision.forced);
        let fit = decision.chosen.unwrap();
        assert_eq!(fit.basis, BasisId::Gaussian);
        // honored even though a sinusoid would have fit better
        match net.layers()[0].edge(0, 0) {
            EdgeActivation::Symbolic { basis, .. } => assert_eq!(*basis, BasisId::Gaussian),
            other => panic!("edge should be symbolic, got {other:?}"),
        }
    }

    #[test]
    fn override_outside_network_is_rejected() {
        let (mut net, xs) = trained_composition();
        let config = SnapConfig {
            overrides: vec![SnapOverride {
                layer: 3,
                out: 0,
                inp: 0,
                basis: BasisId::Sin,
            }],
            ..SnapConfig::default()
        };
        assert!(matches!(
            snap_network(&mut net, &xs, &config),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_and_symbolic_edges_are_skipped() {
        let layer = KanLayer::new(
            2,
            1,
            vec![
                EdgeActivation::Zero,
                EdgeActivation::Symbolic {
                    basis: BasisId::Identity,
                    a: 1.0,
                    b: 0.0,
                    c: 2.0,
                    d: 0.0,
                },
            ],
        )
        .unwrap();
        let mut net = KanNetwork::new(
            vec![layer],
            Normalizer::identity(2),
            Denormalizer::identity(),
            vec!["a".into(), "b".into()],
            "y".into(),
        )
        .unwrap();
        let xs: Vec<Vec<f64>> = (0..32)
            .map(|i| vec![-1.0 + i as f64 / 16.0, 1.0 - i as f64 / 16.0])
            .collect();
        let report = snap_network(&mut net, &xs, &SnapConfig::default()).unwrap();
        assert!(report.decisions.is_empty());
    }
}
