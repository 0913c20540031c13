//! Tabular datasets, min-max scaling, and the dual-active-bridge sampler.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A column-named regression dataset with one target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        target_name: String,
        xs: Vec<Vec<f64>>,
        ys: Vec<f64>,
    ) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        let width = feature_names.len();
        if let Some(row) = xs.iter().find(|r| r.len() != width) {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: width,
            });
        }
        Ok(Dataset {
            feature_names,
            target_name,
            xs,
            ys,
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Deterministic shuffled split; the train side gets
    /// `floor(len * train_fraction)` rows.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {train_fraction} outside [0, 1]"
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Fisher-Yates, fixed draw order so splits reproduce exactly
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_train = (self.len() as f64 * train_fraction).floor() as usize;
        let take = |idx: &[usize]| Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            xs: idx.iter().map(|&i| self.xs[i].clone()).collect(),
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
        };
        Ok((take(&order[..n_train]), take(&order[n_train..])))
    }

    /// Write the dataset as a headed CSV file.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        writer.write_record(&header)?;
        for (row, y) in self.xs.iter().zip(&self.ys) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            record.push(format!("{y}"));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Row bookkeeping from a CSV load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Load a headed CSV into a dataset.
///
/// `features: None` takes every non-target column as a feature. Rows with
/// missing or non-numeric values in any used column are dropped and counted.
pub fn load_csv(
    path: &Path,
    features: Option<&[String]>,
    target: &str,
) -> Result<(Dataset, LoadStats)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() {
        return Err(Error::EmptyFile);
    }
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingColumn(target.to_string()))?;
    let feature_names: Vec<String> = match features {
        Some(names) => names.to_vec(),
        None => header
            .iter()
            .filter(|h| h.as_str() != target)
            .cloned()
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(Error::InvalidConfig("no feature columns selected".into()));
    }
    let mut feature_idx = Vec::with_capacity(feature_names.len());
    for name in &feature_names {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        feature_idx.push(idx);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let parse = |idx: usize| -> Option<f64> {
            record
                .get(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
        };
        let row: Option<Vec<f64>> = feature_idx.iter().map(|&i| parse(i)).collect();
        match (row, parse(target_idx)) {
            (Some(row), Some(y)) => {
                xs.push(row);
                ys.push(y);
            }
            _ => rows_dropped += 1,
        }
    }
    if rows_read == 0 {
        return Err(Error::EmptyFile);
    }
    if xs.is_empty() {
        return Err(Error::NoUsableRows);
    }
    let dataset = Dataset::new(feature_names, target.to_string(), xs, ys)?;
    Ok((
        dataset,
        LoadStats {
            rows_read,
            rows_dropped,
        },
    ))
}

/// Load a headed CSV as a bare feature matrix, no target column.
///
/// `features: None` takes every column. Rows with missing or non-numeric
/// values in any used column are dropped and counted, like in `load_csv`.
pub fn load_csv_matrix(
    path: &Path,
    features: Option<&[String]>,
) -> Result<(Vec<String>, Vec<Vec<f64>>, LoadStats)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() {
        return Err(Error::EmptyFile);
    }
    let names: Vec<String> = match features {
        Some(list) => list.to_vec(),
        None => header.clone(),
    };
    if names.is_empty() {
        return Err(Error::InvalidConfig("no feature columns selected".into()));
    }
    let mut idx = Vec::with_capacity(names.len());
    for name in &names {
        idx.push(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        );
    }

    let mut xs = Vec::new();
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let row: Option<Vec<f64>> = idx
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        match row {
            Some(row) => xs.push(row),
            None => rows_dropped += 1,
        }
    }
    if rows_read == 0 {
        return Err(Error::EmptyFile);
    }
    if xs.is_empty() {
        return Err(Error::NoUsableRows);
    }
    Ok((
        names,
        xs,
        LoadStats {
            rows_read,
            rows_dropped,
        },
    ))
}

/// Per-feature min-max map onto `[-1, 1]`.
///
/// A feature with `min = -1, max = 1` passes through unchanged, so the
/// identity map is representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n_features: usize) -> Self {
        Normalizer {
            mins: vec![-1.0; n_features],
            maxs: vec![1.0; n_features],
        }
    }

    /// Fit column ranges; returns the names of constant columns, which are
    /// pinned to the domain midpoint instead of being stretched.
    pub fn fit(xs: &[Vec<f64>], names: &[String]) -> Result<(Self, Vec<String>)> {
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let width = xs[0].len();
        let mut mins = vec![f64::INFINITY; width];
        let mut maxs = vec![f64::NEG_INFINITY; width];
        for row in xs {
            for (i, &v) in row.iter().enumerate() {
                mins[i] = mins[i].min(v);
                maxs[i] = maxs[i].max(v);
            }
        }
        let mut constant = Vec::new();
        for i in 0..width {
            if maxs[i] - mins[i] < f64::EPSILON * mins[i].abs().max(1.0) {
                constant.push(names.get(i).cloned().unwrap_or_else(|| format!("x{i}")));
                // widen to a unit interval around the value: output is 0
                mins[i] -= 0.5;
                maxs[i] += 0.5;
            }
        }
        Ok((Normalizer { mins, maxs }, constant))
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.width(), "feature width mismatch");
        raw.iter()
            .enumerate()
            .map(|(i, &v)| 2.0 * (v - self.mins[i]) / (self.maxs[i] - self.mins[i]) - 1.0)
            .collect()
    }

    pub fn apply_all(&self, raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
        raw.iter().map(|r| self.apply(r)).collect()
    }

    /// Map a normalized coordinate back to raw units for one feature.
    pub fn invert_feature(&self, feature: usize, z: f64) -> f64 {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        lo + (z + 1.0) * (hi - lo) / 2.0
    }

    /// Affine form of one feature's normalization: `z = scale * raw + shift`.
    pub fn feature_affine(&self, feature: usize) -> (f64, f64) {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        let scale = 2.0 / (hi - lo);
        (scale, -1.0 - scale * lo)
    }
}

/// Affine map from network output space back to target units:
/// `y_raw = scale * y_net + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Denormalizer {
    pub scale: f64,
    pub offset: f64,
}

impl Denormalizer {
    pub fn identity() -> Self {
        Denormalizer {
            scale: 1.0,
            offset: 0.0,
        }
    }

    /// Fit so the observed target range maps onto `[-1, 1]`.
    pub fn fit(ys: &[f64]) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < f64::EPSILON * lo.abs().max(1.0) {
            return Err(Error::ConstantInput(
                "target column is constant; nothing to regress".into(),
            ));
        }
        Ok(Denormalizer {
            scale: (hi - lo) / 2.0,
            offset: (hi + lo) / 2.0,
        })
    }

    pub fn normalize(&self, y_raw: f64) -> f64 {
        (y_raw - self.offset) / self.scale
    }

    pub fn denormalize(&self, y_net: f64) -> f64 {
        self.scale * y_net + self.offset
    }
}

/// Electrical parameters of an ideal dual-active-bridge converter in
/// single-phase-shift operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DabParams {
    /// Input voltage in volts.
    pub v_in: f64,
    /// Transformer turns ratio.
    pub n: f64,
    /// Series inductance in henries.
    pub l: f64,
    /// Switching frequency in hertz.
    pub f: f64,
    /// Transferred power in watts.
    pub p: f64,
}

impl Default for DabParams {
    fn default() -> Self {
        // chosen so the lumped coefficient is exactly 2
        DabParams {
            v_in: 100.0,
            n: 1.0,
            l: 60e-6,
            f: 50e3,
            p: 100.0 / 3.0,
        }
    }
}

impl DabParams {
    /// Lumped coefficient `2 L P f / (n V_in)` of the steady-state model.
    pub fn coefficient(&self) -> f64 {
        2.0 * self.l * self.p * self.f / (self.n * self.v_in)
    }

    /// Steady-state output voltage at phase-shift duty ratio `d`.
    pub fn output_voltage(&self, d: f64) -> f64 {
        self.coefficient() / (d * (1.0 - d))
    }
}

/// Sample the DAB steady-state curve at uniformly drawn duty ratios.
pub fn generate_dab(
    params: &DabParams,
    d_range: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = d_range;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidRange(format!(
            "duty ratio range ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
        )));
    }
    if n_samples == 0 {
        return Err(Error::EmptyBatch);
    }
    for (name, v) in [
        ("v_in", params.v_in),
        ("n", params.n),
        ("l", params.l),
        ("f", params.f),
        ("p", params.p),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "DAB parameter {name} must be positive and finite, got {v}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let d = rng.gen_range(lo..hi);
        xs.push(vec![d]);
        ys.push(params.output_voltage(d));
    }
    Dataset::new(vec!["D".into()], "V_out".into(), xs, ys)
}
