//! Desk-scale numerical laboratory for multiplicity results on sets and
//! functions with non-convex range.
//!
//! * [`hilbert`]: points, sampled sets, distance fields, minimizer clustering.
//! * [`chebyshev`]: distance/radius certificates and perturbed nearest-point
//!   multiplicity.
//! * [`minimax`]: sup-inf bounds, duality gaps and linear-perturbation witnesses.
//! * [`three_solutions`]: the radius constant and three-root witnesses for
//!   `x + I'(x) + mu J'(x) = y`, plus deflated root enumeration.
//! * [`kirchhoff`]: the nonlocal boundary value problem
//!   `−omega(∫|u'|²) u'' = beta(t) f(u) + alpha(t)` on `[0,1]`.
//! * [`experiments`]: the configuration catalog, runner and report verifier.

pub mod ball;
pub mod chebyshev;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod hilbert;
pub mod kirchhoff;
pub mod lattice;
pub mod linalg;
pub mod minimax;
pub mod quadrature;
pub mod three_solutions;

pub use error::{LabError, Result};
pub use hilbert::{Perturbation, Point, SetSpec};

/// Result of a witness search. Exhausting a finite search is a reported
/// outcome, not an error: existence holds in the continuum only.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome<W> {
    Found(W),
    NotFound(String),
}

impl<W> Outcome<W> {
    pub fn found(self) -> Option<W> {
        match self {
            Outcome::Found(w) => Some(w),
            Outcome::NotFound(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Outcome::Found(_))
    }
}
