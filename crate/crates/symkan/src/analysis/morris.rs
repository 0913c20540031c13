//! Morris elementary-effects screening.
//!
//! Each trajectory starts at a random corner of the lower half of the
//! unit cell grid and perturbs one coordinate at a time by a fixed step,
//! in random order. The per-coordinate effect distribution gives a mean
//! magnitude (overall influence) and a spread (interaction or curvature).

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Four-level design: starting coordinates from {0, 1/3} and a step of
/// 2/3, the standard choice that keeps every probe inside the unit box.
const LEVEL: f64 = 1.0 / 3.0;
const DELTA: f64 = 2.0 / 3.0;

#[derive(Debug, Clone)]
pub struct MorrisConfig {
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for MorrisConfig {
    fn default() -> Self {
        Self {
            trajectories: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MorrisResult {
    /// Mean absolute elementary effect per input, in output units per
    /// full sweep of that input's range.
    pub mu_star: Vec<f64>,
    /// Standard deviation of the effects; large values flag nonlinearity
    /// or interactions.
    pub sigma: Vec<f64>,
}

/// Screen `f` over the box given by `bounds`. Effects are measured in
/// normalized coordinates, so inputs with different physical scales are
/// directly comparable.
pub fn morris<F>(mut f: F, bounds: &[(f64, f64)], config: &MorrisConfig) -> Result<MorrisResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = bounds.len();
    if d == 0 {
        return Err(Error::InvalidConfig("no inputs to screen".into()));
    }
    if config.trajectories == 0 {
        return Err(Error::InvalidConfig(
            "need at least one trajectory".into(),
        ));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidRange(format!(
                "screening bounds ({lo}, {hi}) are not an increasing finite pair"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut effects: Vec<Vec<f64>> = vec![Vec::with_capacity(config.trajectories); d];
    let mut unit = vec![0.0; d];
    let mut point = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();

    for _ in 0..config.trajectories {
        for u in unit.iter_mut() {
            *u = if rng.gen_range(0..2) == 0 { 0.0 } else { LEVEL };
        }
        order.shuffle(&mut rng);
        let mut previous = {
            map_point(&unit, bounds, &mut point);
            f(&point)?
        };
        for &dim in &order {
            unit[dim] += DELTA;
            map_point(&unit, bounds, &mut point);
            let current = f(&point)?;
            effects[dim].push((current - previous) / DELTA);
            previous = current;
        }
    }

    let mut mu_star = Vec::with_capacity(d);
    let mut sigma = Vec::with_capacity(d);
    for dim_effects in &effects {
        let n = dim_effects.len() as f64;
        mu_star.push(dim_effects.iter().map(|e| e.abs()).sum::<f64>() / n);
        let mean = dim_effects.iter().sum::<f64>() / n;
        let var = if dim_effects.len() > 1 {
            dim_effects.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        sigma.push(var.sqrt());
    }
    Ok(MorrisResult { mu_star, sigma })
}

fn map_point(unit: &[f64], bounds: &[(f64, f64)], out: &mut [f64]) {
    for ((u, &(lo, hi)), o) in unit.iter().zip(bounds).zip(out.iter_mut()) {
        *o = lo + u * (hi - lo);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_functions_are_recovered_exactly() {
        let f = |x: &[f64]| Ok(3.0 * x[0] - 0.5 * x[1] + 7.0);
        let bounds = [(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)];
        let result = morris(f, &bounds, &MorrisConfig::default()).unwrap();
        assert!((result.mu_star[0] - 3.0).abs() < 1e-12);
        assert!((result.mu_star[1] - 0.5).abs() < 1e-12);
        assert!(result.mu_star[2].abs() < 1e-12);
        for s in &result.sigma {
            assert!(s.abs() < 1e-12, "linear effects should not vary: {s}");
        }
    }

    #[test]
    fn effects_scale_with_the_input_range() {
        let f = |x: &[f64]| Ok(2.0 * x[0]);
        let narrow = morris(f, &[(0.0, 1.0)], &MorrisConfig::default()).unwrap();
        let wide = morris(f, &[(10.0, 20.0)], &MorrisConfig::default()).unwrap();
        assert!((narrow.mu_star[0] - 2.0).abs() < 1e-12);
        assert!((wide.mu_star[0] - 20.0).abs() < 1e-11);
    }

    #[test]
    fn interactions_show_up_in_sigma() {
        let f = |x: &[f64]| Ok(x[0] * x[1]);
        let config = MorrisConfig {
            trajectories: 64,
            seed: 3,
        };
        let result = morris(f, &[(0.0, 1.0), (0.0, 1.0)], &config).unwrap();
        assert!(result.sigma[0] > 0.05, "sigma: {:?}", result.sigma);
        assert!(result.sigma[1] > 0.05, "sigma: {:?}", result.sigma);
    }

    #[test]
    fn screening_is_seeded() {
        let f = |x: &[f64]| Ok((x[0] * 3.1).sin() * x[1]);
        let bounds = [(-1.0, 1.0), (0.0, 2.0)];
        let config = MorrisConfig {
            trajectories: 8,
            seed: 11,
        };
        let a = morris(f, &bounds, &config).unwrap();
        let b = morris(f, &bounds, &config).unwrap();
        assert_eq!(a.mu_star, b.mu_star);
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn config_validation() {
        let f = |_: &[f64]| Ok(0.0);
        assert!(morris(f, &[], &MorrisConfig::default()).is_err());
        let f = |_: &[f64]| Ok(0.0);
        assert!(morris(
            f,
            &[(1.0, 0.0)],
            &MorrisConfig::default()
        )
        .is_err());
        let f = |_: &[f64]| Ok(0.0);
        let config = MorrisConfig {
            trajectories: 0,
            seed: 0,
        };
        assert!(morris(f, &[(0.0, 1.0)], &config).is_err());
    }
}
