//! Multiplicative measurement noise for robustness experiments.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Perturb each value to `v * (1 + u)` with `u` drawn uniformly from
/// `[-level, level)`. A level of 0.05 models a sensor with five percent
/// relative error.
pub fn add_noise(values: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    if !level.is_finite() || level < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise level must be a nonnegative finite number, got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values
        .iter()
        .map(|v| v * (1.0 + rng.gen_range(-level..level)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_level_is_identity() {
        let v = [1.0, -2.0, 3.5];
        assert_eq!(add_noise(&v, 0.0, 9).unwrap(), v.to_vec());
    }

    #[test]
    fn perturbations_stay_within_the_level() {
        let v = vec![10.0; 1000];
        let noisy = add_noise(&v, 0.05, 4).unwrap();
        let mut moved = 0;
        for x in &noisy {
            assert!(*x >= 10.0 * 0.95 && *x < 10.0 * 1.05, "out of band: {x}");
            if (*x - 10.0).abs() > 1e-9 {
                moved += 1;
            }
        }
        assert!(moved > 990, "noise barely applied: {moved}/1000");
    }

    #[test]
    fn noise_is_relative_to_magnitude() {
        let noisy = add_noise(&[0.0, 100.0], 0.5, 2).unwrap();
        assert_eq!(noisy[0], 0.0);
        assert!((noisy[1] - 100.0).abs() <= 50.0);
    }

    #[test]
    fn seeded_and_validated() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(
            add_noise(&v, 0.1, 7).unwrap(),
            add_noise(&v, 0.1, 7).unwrap()
        );
        assert_ne!(
            add_noise(&v, 0.1, 7).unwrap(),
            add_noise(&v, 0.1, 8).unwrap()
        );
        assert!(add_noise(&v, -0.1, 0).is_err());
        assert!(add_noise(&v, f64::NAN, 0).is_err());
    }
}
