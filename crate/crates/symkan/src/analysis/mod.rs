//! Evaluation utilities: error metrics, rank correlations, Morris
//! screening, noise injection, and a dense-network baseline for
//! side-by-side comparisons.

pub mod correlation;
pub mod metrics;
pub mod mlp;
pub mod morris;
pub mod noise;
pub mod table;

pub use correlation::{kendall_tau, pearson, spearman};
pub use metrics::{energy_error, rmse};
pub use mlp::{train_mlp, Mlp, MlpTrainConfig};
pub use morris::{morris, MorrisConfig, MorrisResult};
pub use noise::add_noise;
pub use table::{format_comparison, ComparisonRow};
