//! B-spline bases on a fixed uniform knot grid.
//!
//! Every spline edge activation is a linear combination of the `G + k`
//! B-spline basis functions living on one of these grids. Evaluation uses
//! the local triangular form of the Cox–de Boor recurrence, so only the
//! `k + 1` bases supported at `x` are ever touched.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform knot grid over `[domain_lo, domain_hi]` with `intervals` cells
/// and piecewise polynomial order `order`, extended by `order` equally
/// spaced knots beyond each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SplineGrid {
    domain_lo: f64,
    domain_hi: f64,
    intervals: usize,
    order: usize,
    knots: Vec<f64>,
}

/// Serialized form of a grid: the knot vector is reconstructed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridSpec {
    lo: f64,
    hi: f64,
    g: usize,
    k: usize,
}

impl TryFrom<GridSpec> for SplineGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        SplineGrid::new(s.lo, s.hi, s.g, s.k)
    }
}

impl From<SplineGrid> for GridSpec {
    fn from(g: SplineGrid) -> Self {
        GridSpec {
            lo: g.domain_lo,
            hi: g.domain_hi,
            g: g.intervals,
            k: g.order,
        }
    }
}

impl SplineGrid {
    /// Build a grid with `intervals` uniform cells of order `order`.
    pub fn new(domain_lo: f64, domain_hi: f64, intervals: usize, order: usize) -> Result<Self> {
        if !(domain_lo.is_finite() && domain_hi.is_finite()) {
            return Err(Error::InvalidGrid("domain bounds must be finite".into()));
        }
        if domain_lo >= domain_hi {
            return Err(Error::InvalidGrid(format!(
                "domain_lo {domain_lo} must be below domain_hi {domain_hi}"
            )));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("need at least one grid interval".into()));
        }
        let h = (domain_hi - domain_lo) / intervals as f64;
        let knots = (0..=intervals + 2 * order)
            .map(|i| domain_lo + (i as f64 - order as f64) * h)
            .collect();
        Ok(SplineGrid {
            domain_lo,
            domain_hi,
            intervals,
            order,
            knots,
        })
    }

    /// Default grid used by edge activations: 5 cubic intervals on [-1, 1].
    pub fn default_edge_grid() -> Self {
        SplineGrid::new(-1.0, 1.0, 5, 3).expect("static grid parameters are valid")
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions: `G + k`.
    pub fn basis_count(&self) -> usize {
        self.intervals + self.order
    }

    /// Clamp an input to the grid domain.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.domain_lo, self.domain_hi)
    }

    /// Index of the knot span containing `x`, in `[order, order + G - 1]`.
    fn span(&self, x: f64) -> usize {
        let h = (self.domain_hi - self.domain_lo) / self.intervals as f64;
        let cell = ((x - self.domain_lo) / h).floor() as isize;
        let cell = cell.clamp(0, self.intervals as isize - 1) as usize;
        cell + self.order
    }

    /// Evaluate all `G + k` basis functions at `x` (clamped to the domain).
    ///
    /// The returned values are non-negative and sum to 1 on the domain.
    pub fn basis_values(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_count()];
        self.basis_values_into(x, &mut out);
        out
    }

    /// Allocation-free form of `basis_values` for hot loops.
    pub fn basis_values_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.basis_count());
        out.fill(0.0);
        let x = self.clamp(x);
        let span = self.span(x);
        // the nonzero bases occupy the contiguous block span-k ..= span
        self.local_basis(x, span, self.order, &mut out[span - self.order..=span]);
    }

    /// Evaluate the derivative of every basis function at `x`.
    ///
    /// Strictly outside the domain the clamped bases are constant, so all
    /// derivatives are 0 there.
    pub fn basis_derivatives(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_count()];
        self.basis_derivatives_into(x, &mut out);
        out
    }

    /// Allocation-free form of `basis_derivatives` for hot loops.
    pub fn basis_derivatives_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.basis_count());
        out.fill(0.0);
        if x < self.domain_lo || x > self.domain_hi || self.order == 0 {
            return;
        }
        let span = self.span(x);
        let k = self.order;
        // The k nonzero degree-(k-1) bases at x carry indices
        // span-k+1 ..= span; stage them in that block of `out`, then
        // overwrite ascending with the derivative combination. Each step
        // reads out[i] and out[i+1] before out[i] is replaced.
        self.local_basis(x, span, k - 1, &mut out[span - k + 1..=span]);
        let t = &self.knots;
        for i in span - k..=span {
            let mut d = 0.0;
            if i >= span - k + 1 {
                d += out[i] / (t[i + k] - t[i]);
            }
            if i + 1 <= span {
                d -= out[i + 1] / (t[i + k + 1] - t[i + 1]);
            }
            out[i] = k as f64 * d;
        }
    }

    /// Triangular Cox–de Boor evaluation: fills `values[0..=degree]` with the
    /// `degree + 1` nonzero bases of the given degree at `x`, covering basis
    /// indices `span-degree ..= span`.
    fn local_basis(&self, x: f64, span: usize, degree: usize, values: &mut [f64]) {
        let t = &self.knots;
        values[0] = 1.0;
        for j in 1..=degree {
            let mut saved = 0.0;
            for r in 0..j {
                let right = t[span + r + 1] - x;
                let left = x - t[span + 1 - j + r];
                let temp = values[r] / (right + left);
                values[r] = saved + right * temp;
                saved = left * temp;
            }
            values[j] = saved;
        }
    }
}
