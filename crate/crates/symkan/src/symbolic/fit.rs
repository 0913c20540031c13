//! Fitting `c * g(a*x + b) + d` against sampled edge data.
//!
//! The outer parameters (c, d) are linear and solved in closed form for any
//! candidate (a, b); the inner pair is found by a coarse log-scaled grid
//! search followed by halving local refinement passes.

use crate::error::{Error, Result};
use crate::symbolic::library::{BasisId, BasisLibrary};
use serde::Serialize;

/// Result of fitting one basis to one edge's samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub basis: BasisId,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Coefficient of determination on the admissible samples.
    pub r2: f64,
    /// Samples that fell outside the basis domain at the chosen (a, b).
    pub excluded: usize,
}

// a candidate (a, b) must keep at least this fraction of the samples
const MIN_COVERAGE: f64 = 0.95;

const COARSE_STEPS: usize = 41;
const REFINE_PASSES: usize = 5;

struct Candidate {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    r2: f64,
    kept: usize,
}

/// Closed-form (c, d) and R^2 for fixed (a, b), restricted to admissible
/// samples. Returns None when coverage is too low to trust the fit.
fn solve_linear(basis: BasisId, a: f64, b: f64, xs: &[f64], ys: &[f64]) -> Option<Candidate> {
    let n = xs.len();
    let mut m = 0usize;
    let (mut sg, mut sgg, mut sy, mut syy, mut sgy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let z = a * x + b;
        if !basis.admissible(z) {
            continue;
        }
        let g = basis.eval(z);
        if !g.is_finite() {
            continue;
        }
        m += 1;
        sg += g;
        sgg += g * g;
        sy += y;
        syy += y * y;
        sgy += g * y;
    }
    if m < 2 || (m as f64) < MIN_COVERAGE * n as f64 {
        return None;
    }
    let mf = m as f64;
    let var_g = sgg - sg * sg / mf;
    let (c, d) = if var_g <= 1e-12 * sgg.abs().max(1.0) {
        (0.0, sy / mf)
    } else {
        let c = (sgy - sg * sy / mf) / var_g;
        (c, (sy - c * sg) / mf)
    };
    let ss_res =
        (syy + c * c * sgg + mf * d * d - 2.0 * c * sgy - 2.0 * d * sy + 2.0 * c * d * sg).max(0.0);
    let ss_tot = syy - sy * sy / mf;
    let r2 = if ss_tot <= 1e-14 * syy.abs().max(1.0) {
        // constant target: perfect iff the residual is also nothing
        if ss_res <= 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(Candidate {
        a,
        b,
        c,
        d,
        r2,
        kept: m,
    })
}

/// Fit one basis to `(x, y)` samples. Returns `Ok(None)` when no (a, b)
/// candidate reaches the coverage floor or the inputs are degenerate.
pub fn fit_affine(basis: BasisId, xs: &[f64], ys: &[f64]) -> Result<Option<AffineFit>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = xs.len();
    if n < 4 {
        return Ok(None);
    }

    if basis == BasisId::Constant {
        // g is 1 everywhere; (a, b) are irrelevant
        let cand = solve_linear(basis, 1.0, 0.0, xs, ys).unwrap();
        return Ok(Some(AffineFit {
            basis,
            a: 1.0,
            b: 0.0,
            c: cand.c,
            d: cand.d,
            r2: cand.r2,
            excluded: n - cand.kept,
        }));
    }

    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    if !(span.is_finite() && span > 0.0) {
        return Ok(None);
    }
    let x_mid = (x_min + x_max) / 2.0;

    let mut best: Option<Candidate> = None;
    let mut consider = |cand: Option<Candidate>| {
        if let Some(c) = cand {
            if best.as_ref().map_or(true, |b| c.r2 > b.r2) {
                best = Some(c);
            }
        }
    };

    // coarse sweep: |a| log-spaced over four decades, both signs; b chosen
    // so the window center z(x_mid) scans the basis's feature region
    for sign in [1.0, -1.0] {
        for e in 0..COARSE_STEPS {
            let mag = 10f64.powf(-2.0 + 4.0 * e as f64 / (COARSE_STEPS - 1) as f64);
            let a = sign * mag;
            let reach = 3.0 + mag * span;
            for t in 0..COARSE_STEPS {
                let center = -reach + 2.0 * reach * t as f64 / (COARSE_STEPS - 1) as f64;
                let b = center - a * x_mid;
                consider(solve_linear(basis, a, b, xs, ys));
            }
        }
    }
    // the untransformed argument is common enough to always try
    consider(solve_linear(basis, 1.0, 0.0, xs, ys));

    let Some(seed) = best.take() else {
        return Ok(None);
    };

    // halving local refinement around the winner, in (log10 |a|, center)
    let mut top = seed;
    let sign = top.a.signum();
    let mut step_log_a = 4.0 / (COARSE_STEPS - 1) as f64;
    let mut step_center = {
        let reach = 3.0 + top.a.abs() * span;
        2.0 * reach / (COARSE_STEPS - 1) as f64
    };
    for _ in 0..REFINE_PASSES {
        let log_a = top.a.abs().log10();
        let center = top.a * x_mid + top.b;
        let mut local_best = None;
        let mut local = |cand: Option<Candidate>| {
            if let Some(c) = cand {
                if local_best
                    .as_ref()
                    .map_or(true, |b: &Candidate| c.r2 > b.r2)
                {
                    local_best = Some(c);
                }
            }
        };
        for da in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let a = sign * 10f64.powf(log_a + da * step_log_a);
            for dc in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let b = (center + dc * step_center) - a * x_mid;
                local(solve_linear(basis, a, b, xs, ys));
            }
        }
        if let Some(cand) = local_best {
            if cand.r2 > top.r2 {
                top = cand;
            }
        }
        step_log_a /= 2.0;
        step_center /= 2.0;
    }

    Ok(Some(AffineFit {
        basis,
        a: top.a,
        b: top.b,
        c: top.c,
        d: top.d,
        r2: top.r2,
        excluded: n - top.kept,
    }))
}

/// A flexible basis can always shave a sliver of noise off an already
/// perfect fit, so R^2 wins that small are measurement noise rather
/// than evidence. A challenger counts as tied with the leader when the
/// leader removes less than this fraction of the challenger's residual
/// variance; within a tie the simpler basis takes the edge.
pub const TIE_RESIDUAL_FRACTION: f64 = 0.05;

/// Winner among already-computed fits: the simplest candidate tied
/// with the top scorer under `TIE_RESIDUAL_FRACTION`.
pub fn select_fit(fits: &[AffineFit]) -> Option<AffineFit> {
    let leader = fits
        .iter()
        .filter(|f| f.r2.is_finite())
        .max_by(|x, y| x.r2.total_cmp(&y.r2))?;
    fits.iter()
        .filter(|f| {
            f.r2.is_finite() && leader.r2 - f.r2 <= TIE_RESIDUAL_FRACTION * (1.0 - f.r2)
        })
        .min_by_key(|f| f.basis.complexity())
        .copied()
}

/// Fit every basis in the library and pick the winner: top R^2, with
/// near-ties resolved toward the simpler function by `select_fit`.
pub fn best_fit(library: &BasisLibrary, xs: &[f64], ys: &[f64]) -> Result<Option<AffineFit>> {
    Ok(select_fit(&all_fits(library, xs, ys)?))
}

/// Fit every basis and return all results sorted by raw R^2, best first.
/// Tie-breaking by simplicity is `best_fit`'s job; this is the full table
/// for reporting.
pub fn all_fits(library: &BasisLibrary, xs: &[f64], ys: &[f64]) -> Result<Vec<AffineFit>> {
    let mut fits = Vec::new();
    for &basis in library.bases() {
        if let Some(fit) = fit_affine(basis, xs, ys)? {
            fits.push(fit);
        }
    }
    fits.sort_by(|p, q| q.r2.total_cmp(&p.r2));
    Ok(fits)
}
