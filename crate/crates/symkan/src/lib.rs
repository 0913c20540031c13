//! Kolmogorov-Arnold network engine for tabular surrogate modeling.
//!
//! A KAN places learnable univariate activation functions on the network
//! *edges* and plain summation on the nodes. Each edge starts life as a
//! SiLU backbone plus a B-spline combination, is sparsified by L1 and
//! entropy regularization, pruned at the node level, snapped to the
//! closest common basis function by R² search, and finally refined. What
//! remains is an explicit closed-form formula instead of a weight soup.
//!
//! The crate is organized around that pipeline:
//!
//! - [`spline`]: B-spline bases and derivatives on a fixed knot grid
//! - [`network`]: edge activations, layers, forward/backward, persistence
//! - [`training`]: regularized loss, the optimizer loop, node pruning
//! - [`symbolic`]: basis library, affine fitting, snapping, refinement,
//!   formula emission
//! - [`unsupervised`]: contrastive sample construction and dependency
//!   discovery
//! - [`analysis`]: error metrics, correlations, Morris sensitivity, noise
//!   injection, and an MLP baseline
//! - [`data`]: dataset generation, CSV ingestion, normalization, splits
//! - [`plot`]: SVG activation-curve plots

pub mod analysis;
pub mod data;
pub mod error;
pub mod network;
pub mod optimizer;
pub mod plot;
pub mod spline;
pub mod symbolic;
pub mod training;
pub mod unsupervised;

pub use error::{Error, ErrorKind, Result};
pub use network::{EdgeActivation, KanLayer, KanNetwork};
pub use spline::SplineGrid;
pub use symbolic::{BasisLibrary, SnapReport, SymbolicExpression};
pub use training::{PruneReport, TrainConfig, TrainReport};
