//! Stability analysis for perturbed vector families in finite-dimensional
//! Hilbert space.
//!
//! Given a linearly independent base family, its biorthogonal dual, and a
//! candidate family close to the dual, this crate measures how close the
//! candidate really is (a Gram-weighted double sum over the perturbations,
//! plus the classical quadratic and product criteria), assembles the
//! associated rank-update operators, and certifies whether the candidate is
//! independent and the operator invertible. On a certified family it also
//! produces the dual system of the candidates and expands arbitrary vectors
//! through it.
//!
//! Everything is deterministic: repeated runs over the same inputs produce
//! bitwise-identical numbers, independent of thread count.

pub mod certification;
pub mod corpus;
pub mod criteria;
pub mod error;
pub mod expansion;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod sampling;
pub mod sweep;

pub use certification::{certify, Certificate, Reason, Thresholds, Verdict};
pub use criteria::{generalized_sum, quadratic_sum, tail_bound, ClosenessReport};
pub use error::{Error, Result};
pub use expansion::{Expander, Expansion};
pub use hilbert::{biorthogonal, BasisFamily, DualFamily, PerturbedFamily, TruncatedSpace};
pub use operators::{build_bundle, operator_gap, OperatorBundle};
pub use sampling::DeterministicSampler;
pub use sweep::{default_levels, sweep, SweepReport};

/// Relative threshold on singular values when deciding numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Acceptable biorthogonality residual for a computed dual family.
pub const DEFAULT_BIO_TOL: f64 = 1e-10;

/// Relative floor on the smallest singular value before an operator is
/// treated as numerically singular.
pub const DEFAULT_INV_TOL: f64 = 1e-8;

/// Relative movement below which a partial sum counts as settled.
pub const DEFAULT_PLATEAU_TOL: f64 = 1e-6;

/// Acceptable reconstruction residual for expansions.
pub const DEFAULT_EXP_TOL: f64 = 1e-10;

/// Gram-matrix identity defect below which a base counts as orthonormal.
pub const DEFAULT_ORTHONORMAL_TOL: f64 = 1e-8;

/// Agreement threshold between an expansion and an independent
/// least-squares solution of the same system.
pub const DEFAULT_UNIQUENESS_TOL: f64 = 1e-8;
