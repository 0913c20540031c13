//! Pipeline configuration: an optional JSON file merged with command-line
//! flags, flags winning. Every field is optional in the file; defaults are
//! applied after the merge.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use symkan::symbolic::{BasisId, SnapOverride};
use symkan::training::TrainConfig;
use symkan::{Error, Result, SplineGrid};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub intervals: usize,
    pub order: usize,
}

/// Everything a pipeline stage can be told, all optional. Unknown keys in
/// the file are rejected outright.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub shape: Option<Vec<usize>>,
    pub grid: Option<GridSettings>,
    pub lambda: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub learning_rate: Option<f64>,
    pub max_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub prune_threshold: Option<f64>,
    pub r2_floor: Option<f64>,
    /// Forced snap choices, `"layer/out/in:basis"` each.
    pub overrides: Option<Vec<String>>,
    pub refine_learning_rate: Option<f64>,
    pub refine_max_steps: Option<usize>,
    pub noise: Option<f64>,
    pub train_fraction: Option<f64>,
    pub features: Option<Vec<String>>,
    pub target: Option<String>,
    pub mid_width: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!(
                "config file {}: {e}",
                path.display()
            )))?;
        config.validate()?;
        Ok(config)
    }

    /// Cheap range checks so bad values fail before any work starts.
    pub fn validate(&self) -> Result<()> {
        if let Some(shape) = &self.shape {
            if shape.len() < 2 || shape.iter().any(|&w| w == 0) {
                return Err(Error::InvalidConfig(
                    "shape needs at least two positive widths".into(),
                ));
            }
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "train_fraction {f} must lie strictly between 0 and 1"
                )));
            }
        }
        if let Some(n) = self.noise {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "noise level {n} must be nonnegative"
                )));
            }
        }
        if let Some(r) = self.r2_floor {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!(
                    "r2_floor {r} must lie in [0, 1]"
                )));
            }
        }
        if let Some(list) = &self.overrides {
            for spec in list {
                parse_override(spec)?;
            }
        }
        Ok(())
    }
}

/// Merge order: flag, then config file, then default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn pick_opt<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Parse `"layer/out/in:basis"` into a snap override.
pub fn parse_override(spec: &str) -> Result<SnapOverride> {
    let bad = || {
        Error::InvalidConfig(format!(
            "override '{spec}' must look like layer/out/in:basis"
        ))
    };
    let (coords, basis_name) = spec.split_once(':').ok_or_else(bad)?;
    let parts: Vec<&str> = coords.split('/').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut nums = [0usize; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    let basis = BasisId::from_name(basis_name.trim()).ok_or_else(|| {
        Error::InvalidConfig(format!("override '{spec}': unknown basis '{basis_name}'"))
    })?;
    Ok(SnapOverride {
        layer: nums[0],
        out: nums[1],
        inp: nums[2],
        basis,
    })
}

/// Parse a `lo,hi` pair flag.
pub fn parse_range(spec: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidConfig(format!("range '{spec}' must look like lo,hi"));
    let (lo, hi) = spec.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

/// Parse a comma-separated list of layer widths.
pub fn parse_shape(spec: &str) -> Result<Vec<usize>> {
    let shape: std::result::Result<Vec<usize>, _> =
        spec.split(',').map(|p| p.trim().parse()).collect();
    let shape = shape.map_err(|_| {
        Error::InvalidConfig(format!("shape '{spec}' must be comma-separated widths"))
    })?;
    if shape.len() < 2 || shape.iter().any(|&w| w == 0) {
        return Err(Error::InvalidConfig(
            "shape needs at least two positive widths".into(),
        ));
    }
    Ok(shape)
}

/// Assemble the grid from settings, falling back to the standard edge grid.
pub fn build_grid(settings: Option<GridSettings>) -> Result<SplineGrid> {
    match settings {
        None => Ok(SplineGrid::default_edge_grid()),
        Some(g) => SplineGrid::new(-1.0, 1.0, g.intervals, g.order),
    }
}

/// Assemble the training config from merged values.
#[allow(clippy::too_many_arguments)]
pub fn build_train_config(
    file: &PipelineConfig,
    lambda: Option<f64>,
    learning_rate: Option<f64>,
    max_steps: Option<usize>,
    batch_size: Option<usize>,
    seed: u64,
) -> TrainConfig {
    let defaults = TrainConfig::default();
    TrainConfig {
        lambda: pick(lambda, file.lambda, defaults.lambda),
        mu1: file.mu1.unwrap_or(defaults.mu1),
        mu2: file.mu2.unwrap_or(defaults.mu2),
        learning_rate: pick(learning_rate, file.learning_rate, defaults.learning_rate),
        max_steps: pick(max_steps, file.max_steps, defaults.max_steps),
        batch_size: pick_opt(batch_size, file.batch_size),
        seed,
        convergence_tol: file.convergence_tol.unwrap_or(defaults.convergence_tol),
        prune_threshold: file.prune_threshold.unwrap_or(defaults.prune_threshold),
    }
}
