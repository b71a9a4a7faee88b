//! Dense realizations of the truncated operators.
//!
//! At truncation level n the three operators are
//! `K x = sum_{i<=n} (f_i - e'_i, x) e_i`,
//! `A x = sum_{i<=n} (f_i, x) e_i`, and its adjoint
//! `A* x = sum_{i<=n} (e_i, x) f_i`.
//! Each is assembled independently from rank-one updates in ascending index
//! order, so the structural relations between them (A = I + K at full square
//! truncation, A* = A^T) are genuine checks rather than restatements of the
//! construction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{check_consistent, BasisFamily, DualFamily, PerturbedFamily};
use crate::linalg::{max_abs, spectral_norm};

/// The operators K, A, A* at one truncation level, with diagnostics.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    k: DMatrix<f64>,
    a: DMatrix<f64>,
    a_star: DMatrix<f64>,
    level: usize,
    identity_defect: Option<f64>,
}

impl OperatorBundle {
    /// The compact perturbation part, `K = sum e_i d_i^T`.
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// The candidate-expansion operator, `A = sum e_i f_i^T`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// The adjoint, `A* = sum f_i e_i^T`.
    pub fn a_star(&self) -> &DMatrix<f64> {
        &self.a_star
    }

    /// Truncation level used for the sums.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Ambient dimension of the matrices.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Max-abs of `A - (I + K)`; only defined at full square truncation
    /// (level = N = D), where the dual construction forces A = I + K.
    pub fn identity_defect(&self) -> Option<f64> {
        self.identity_defect
    }
}

/// Assembles the operator bundle at truncation level `level` (1-based count
/// of leading family members included).
pub fn build_bundle(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
    level: usize,
) -> Result<OperatorBundle> {
    check_consistent(basis, dual, perturbed)?;
    let n = basis.count();
    if level == 0 || level > n {
        return Err(Error::BadLevel { level, count: n });
    }
    let d = basis.dim();

    let mut k = DMatrix::<f64>::zeros(d, d);
    for i in 0..level {
        k.ger(1.0, &basis.vector(i), &perturbed.delta(i), 1.0);
    }

    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..level {
        a.ger(1.0, &basis.vector(i), &perturbed.vector(i), 1.0);
    }

    let mut a_star = DMatrix::<f64>::zeros(d, d);
    for i in 0..level {
        a_star.ger(1.0, &perturbed.vector(i), &basis.vector(i), 1.0);
    }

    let identity_defect = if level == n && n == d {
        let mut i_plus_k = k.clone();
        for idx in 0..d {
            i_plus_k[(idx, idx)] += 1.0;
        }
        Some(max_abs(&(&a - i_plus_k)))
    } else {
        None
    };

    Ok(OperatorBundle {
        k,
        a,
        a_star,
        level,
        identity_defect,
    })
}

/// Spectral norm of `K_j - K_l`, the difference of the compact parts at two
/// truncation levels, assembled directly from its rank-one terms
/// `e_i d_i^T` for i in l+1..=j (1-based).
///
/// The tail estimate guarantees this value is at most
/// `sqrt(tail_bound(l, j))` up to rounding slack.
pub fn operator_gap(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
    l: usize,
    j: usize,
) -> Result<f64> {
    check_consistent(basis, dual, perturbed)?;
    let n = basis.count();
    if l >= j || j > n {
        return Err(Error::BadRange { lo: l, hi: j, count: n });
    }
    let d = basis.dim();
    let mut diff = DMatrix::<f64>::zeros(d, d);
    for i in l..j {
        diff.ger(1.0, &basis.vector(i), &perturbed.delta(i), 1.0);
    }
    Ok(spectral_norm(&diff))
}
