//! The candidate function library edges can be snapped to.
//!
//! Ordering matters: when two candidates fit equally well, the earlier
//! (simpler) one wins, so the list runs from constants and powers up to
//! the saturating and oscillatory shapes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// One primitive shape `g` usable in a snapped edge `c * g(a*x + b) + d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisId {
    Constant,
    Identity,
    Square,
    Cube,
    Reciprocal,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Arctan,
    Tanh,
    Sigmoid,
    Gaussian,
    Abs,
}

/// All bases in simplicity order.
pub const ALL_BASES: [BasisId; 16] = [
    BasisId::Constant,
    BasisId::Identity,
    BasisId::Square,
    BasisId::Cube,
    BasisId::Reciprocal,
    BasisId::Sqrt,
    BasisId::Exp,
    BasisId::Log,
    BasisId::Sin,
    BasisId::Cos,
    BasisId::Tan,
    BasisId::Arctan,
    BasisId::Tanh,
    BasisId::Sigmoid,
    BasisId::Gaussian,
    BasisId::Abs,
];

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BasisId {
    pub fn name(self) -> &'static str {
        match self {
            BasisId::Constant => "constant",
            BasisId::Identity => "identity",
            BasisId::Square => "square",
            BasisId::Cube => "cube",
            BasisId::Reciprocal => "reciprocal",
            BasisId::Sqrt => "sqrt",
            BasisId::Exp => "exp",
            BasisId::Log => "log",
            BasisId::Sin => "sin",
            BasisId::Cos => "cos",
            BasisId::Tan => "tan",
            BasisId::Arctan => "arctan",
            BasisId::Tanh => "tanh",
            BasisId::Sigmoid => "sigmoid",
            BasisId::Gaussian => "gaussian",
            BasisId::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<BasisId> {
        ALL_BASES.iter().copied().find(|b| b.name() == name)
    }

    /// Position in the simplicity ordering; lower wins fit ties.
    pub fn complexity(self) -> usize {
        ALL_BASES.iter().position(|&b| b == self).unwrap()
    }

    /// Whether `z` is safely inside the basis domain. Samples failing this
    /// are excluded from fits rather than fed to the function.
    pub fn admissible(self, z: f64) -> bool {
        if !z.is_finite() {
            return false;
        }
        match self {
            BasisId::Reciprocal => z.abs() >= 1e-8,
            BasisId::Sqrt => z >= 0.0,
            BasisId::Log => z >= 1e-12,
            BasisId::Tan => z.cos().abs() >= 1e-6,
            BasisId::Exp => z <= 700.0,
            _ => true,
        }
    }

    /// Exact evaluation; may return inf or NaN outside the domain.
    pub fn eval(self, z: f64) -> f64 {
        match self {
            BasisId::Constant => 1.0,
            BasisId::Identity => z,
            BasisId::Square => z * z,
            BasisId::Cube => z * z * z,
            BasisId::Reciprocal => 1.0 / z,
            BasisId::Sqrt => z.sqrt(),
            BasisId::Exp => z.exp(),
            BasisId::Log => z.ln(),
            BasisId::Sin => z.sin(),
            BasisId::Cos => z.cos(),
            BasisId::Tan => z.tan(),
            BasisId::Arctan => z.atan(),
            BasisId::Tanh => z.tanh(),
            BasisId::Sigmoid => sigmoid(z),
            BasisId::Gaussian => (-z * z).exp(),
            BasisId::Abs => z.abs(),
        }
    }

    /// Exact derivative; same domain caveats as `eval`.
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            BasisId::Constant => 0.0,
            BasisId::Identity => 1.0,
            BasisId::Square => 2.0 * z,
            BasisId::Cube => 3.0 * z * z,
            BasisId::Reciprocal => -1.0 / (z * z),
            BasisId::Sqrt => 0.5 / z.sqrt(),
            BasisId::Exp => z.exp(),
            BasisId::Log => 1.0 / z,
            BasisId::Sin => z.cos(),
            BasisId::Cos => -z.sin(),
            BasisId::Tan => {
                let t = z.tan();
                1.0 + t * t
            }
            BasisId::Arctan => 1.0 / (1.0 + z * z),
            BasisId::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            BasisId::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            BasisId::Gaussian => -2.0 * z * (-z * z).exp(),
            BasisId::Abs => {
                if z >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Total evaluation: the argument is nudged into the domain first so a
    /// live network never produces inf or NaN from a snapped edge.
    pub fn eval_guarded(self, z: f64) -> f64 {
        self.eval(self.guard(z))
    }

    /// Total derivative, consistent with `eval_guarded` away from guards.
    pub fn deriv_guarded(self, z: f64) -> f64 {
        self.deriv(self.guard(z))
    }

    fn guard(self, z: f64) -> f64 {
        match self {
            BasisId::Reciprocal => {
                if z.abs() < 1e-8 {
                    if z.is_sign_negative() {
                        -1e-8
                    } else {
                        1e-8
                    }
                } else {
                    z
                }
            }
            BasisId::Sqrt => z.max(1e-12),
            BasisId::Log => z.max(1e-12),
            BasisId::Exp => z.min(700.0),
            BasisId::Tan => {
                // push the argument off the pole by a fixed margin
                let period = std::f64::consts::PI;
                let frac = (z - period / 2.0).rem_euclid(period);
                if frac < 1e-6 {
                    z + (1e-6 - frac)
                } else if frac > period - 1e-6 {
                    z - (frac - (period - 1e-6))
                } else {
                    z
                }
            }
            _ => z,
        }
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A selection of bases available to the snapping search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisLibrary {
    bases: Vec<BasisId>,
}

impl BasisLibrary {
    /// Schema version stamped into saved models; bump on any change to the
    /// basis list or its semantics.
    pub const VERSION: u32 = 1;

    /// The full sixteen-function library in simplicity order.
    pub fn full() -> Self {
        BasisLibrary {
            bases: ALL_BASES.to_vec(),
        }
    }

    /// A restricted library, preserving simplicity order.
    pub fn subset(ids: &[BasisId]) -> Self {
        let mut bases: Vec<BasisId> = ALL_BASES
            .iter()
            .copied()
            .filter(|b| ids.contains(b))
            .collect();
        bases.dedup();
        BasisLibrary { bases }
    }

    pub fn bases(&self) -> &[BasisId] {
        &self.bases
    }
}

impl Default for BasisLibrary {
    fn default() -> Self {
        BasisLibrary::full()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in ALL_BASES {
            assert_eq!(BasisId::from_name(b.name()), Some(b));
        }
        assert_eq!(BasisId::from_name("sinh"), None);
        // serde uses the same spelling as from_name
        for b in ALL_BASES {
            let json = serde_json::to_string(&b).unwrap();
            assert_eq!(json, format!("\"{}\"", b.name()));
            let back: BasisId = serde_json::from_str(&json).unwrap();
            assert_eq!(back, b);
        }
    }

    #[test]
    fn complexity_follows_library_order() {
        for (i, b) in ALL_BASES.iter().enumerate() {
            assert_eq!(b.complexity(), i);
        }
        assert!(BasisId::Identity.complexity() < BasisId::Arctan.complexity());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for b in ALL_BASES {
            for step in 0..60 {
                let z = -3.0 + 6.0 * step as f64 / 59.0;
                // keep the FD stencil inside the domain and off kinks
                if !(b.admissible(z - 2.0 * h) && b.admissible(z + 2.0 * h)) {
                    continue;
                }
                if b == BasisId::Abs && z.abs() < 2.0 * h {
                    continue;
                }
                if b == BasisId::Reciprocal && z.abs() < 0.05 {
                    continue;
                }
                if b == BasisId::Tan && z.cos().abs() < 0.05 {
                    continue;
                }
                if b == BasisId::Sqrt && z < 0.05 {
                    continue;
                }
                if b == BasisId::Log && z < 0.05 {
                    continue;
                }
                let fd = (b.eval(z + h) - b.eval(z - h)) / (2.0 * h);
                let d = b.deriv(z);
                let tol = 1e-5 * d.abs().max(1.0);
                assert!(
                    (d - fd).abs() < tol,
                    "{b} at z={z}: analytic {d} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn guarded_eval_is_total() {
        let probes = [
            -1e6, -700.0, -10.0, -1.0, -1e-12, 0.0, 1e-12, 0.5, 1.0, 10.0, 700.0, 1e6,
            std::f64::consts::FRAC_PI_2,
        ];
        for b in ALL_BASES {
            for &z in &probes {
                let v = b.eval_guarded(z);
                let d = b.deriv_guarded(z);
                assert!(v.is_finite(), "{b} eval_guarded({z}) = {v}");
                assert!(d.is_finite(), "{b} deriv_guarded({z}) = {d}");
            }
        }
    }

    #[test]
    fn admissibility_bounds() {
        assert!(!BasisId::Reciprocal.admissible(0.0));
        assert!(BasisId::Reciprocal.admissible(0.5));
        assert!(!BasisId::Sqrt.admissible(-0.1));
        assert!(!BasisId::Log.admissible(0.0));
        assert!(!BasisId::Tan.admissible(std::f64::consts::FRAC_PI_2));
        assert!(!BasisId::Exp.admissible(800.0));
        assert!(BasisId::Gaussian.admissible(1e6));
    }

    #[test]
    fn subset_keeps_order() {
        let lib = BasisLibrary::subset(&[BasisId::Arctan, BasisId::Identity, BasisId::Arctan]);
        assert_eq!(lib.bases(), &[BasisId::Identity, BasisId::Arctan]);
        assert_eq!(BasisLibrary::full().bases().len(), 16);
    }
}
