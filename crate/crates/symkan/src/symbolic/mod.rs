//! Symbolic layer: the basis function library, affine-transform fitting,
//! snapping spline edges to closed forms, refining the result, and
//! rendering it as a formula.

pub mod expression;
pub mod fit;
pub mod library;
pub mod refine;
pub mod snap;

pub use expression::{emit_formula, parse, sum_of, SymbolicExpression};
pub use fit::{all_fits, best_fit, fit_affine, select_fit, AffineFit, TIE_RESIDUAL_FRACTION};
pub use library::{BasisId, BasisLibrary, ALL_BASES};
pub use refine::{refine, RefineConfig, RefineReport};
pub use snap::{snap_network, SnapConfig, SnapDecision, SnapOverride, SnapReport};
