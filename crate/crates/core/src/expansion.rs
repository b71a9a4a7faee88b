//! Expansion of vectors in the perturbed family.
//!
//! Once A is certified invertible, every y expands as
//! `y = sum (e_i, x) f_i` with `x` solving `A* x = y`. The coefficient
//! functionals have Riesz representers `f'_i = A^{-1} e_i`, the dual system
//! of the perturbed family; both views are implemented and cross-checked.
//!
//! All solves reuse pivoted LU factorizations computed once per operator;
//! the uniqueness oracle deliberately goes through an orthogonal
//! factorization of F instead, so the two answers come from algorithmically
//! independent paths.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisFamily, PerturbedFamily};
use crate::linalg;
use crate::operators::OperatorBundle;
use crate::DEFAULT_UNIQUENESS_TOL;

/// The dual system f'_i = A^{-1} e_i of a certified perturbed family.
#[derive(Debug, Clone)]
pub struct DualPerturbedFamily {
    matrix: DMatrix<f64>,
    bio_residual: f64,
}

impl DualPerturbedFamily {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn vector(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.matrix.column(i)
    }

    /// Max-abs of `(f'_i, f_j) - delta_ij`.
    pub fn bio_residual(&self) -> f64 {
        self.bio_residual
    }
}

/// One expansion result: coefficients and the reconstruction residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expansion {
    pub coefficients: Vec<f64>,
    /// `‖sum c_i f_i - y‖`, always computed, never assumed.
    pub residual: f64,
}

/// Shared solver for one certified operator bundle.
///
/// Holds pivoted LU factorizations of A and A*, computed once and reused
/// for every right-hand side. Construction fails when the smallest singular
/// value of A does not clear the invertibility threshold.
pub struct Expander {
    lu_a: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_a_star: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    sigma_min: f64,
    sigma_max: f64,
    dim: usize,
}

impl Expander {
    pub fn new(bundle: &OperatorBundle, inv_tol: f64) -> Result<Self> {
        let (sigma_max, sigma_min) = linalg::singular_extremes(bundle.a());
        // Negated so a NaN singular value is rejected rather than accepted.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(sigma_min > inv_tol * sigma_max) {
            return Err(Error::SingularOperator {
                sigma_min,
                threshold: inv_tol,
            });
        }
        Ok(Self {
            lu_a: bundle.a().clone().lu(),
            lu_a_star: bundle.a_star().clone().lu(),
            sigma_min,
            sigma_max,
            dim: bundle.dim(),
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Condition number of A.
    pub fn cond(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    /// Computes the dual system by solving `A f'_i = e_i` for all i at once.
    pub fn dual_system(
        &self,
        basis: &BasisFamily,
        perturbed: &PerturbedFamily,
    ) -> Result<DualPerturbedFamily> {
        self.check_dim(basis.dim())?;
        let matrix = self
            .lu_a
            .solve(basis.matrix())
            .ok_or(Error::SingularOperator {
                sigma_min: self.sigma_min,
                threshold: self.sigma_min / self.sigma_max.max(f64::MIN_POSITIVE),
            })?;
        let bio_residual =
            linalg::identity_defect(&(matrix.transpose() * perturbed.matrix()));
        Ok(DualPerturbedFamily {
            matrix,
            bio_residual,
        })
    }

    /// Expands y in the perturbed family: solves `A* x = y` and reads the
    /// coefficients off as `c_i = (e_i, x)`.
    pub fn expand(
        &self,
        basis: &BasisFamily,
        perturbed: &PerturbedFamily,
        y: &DVector<f64>,
    ) -> Result<Expansion> {
        self.check_dim(basis.dim())?;
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} in a space of dimension {}",
                y.len(),
                self.dim
            )));
        }
        let x = self.lu_a_star.solve(y).ok_or(Error::SingularOperator {
            sigma_min: self.sigma_min,
            threshold: 0.0,
        })?;
        let c = basis.matrix().tr_mul(&x);
        let coefficients: Vec<f64> = c.iter().copied().collect();
        let rebuilt = reconstruct(perturbed, &coefficients)?;
        let residual = (rebuilt - y).norm();
        Ok(Expansion {
            coefficients,
            residual,
        })
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "family dimension {} does not match operator dimension {}",
                dim, self.dim
            )));
        }
        Ok(())
    }
}

/// Linear combination `sum c_i f_i`, accumulated in ascending index order.
pub fn reconstruct(perturbed: &PerturbedFamily, coefficients: &[f64]) -> Result<DVector<f64>> {
    if coefficients.len() != perturbed.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a family of {} vectors",
            coefficients.len(),
            perturbed.count()
        )));
    }
    let mut acc = DVector::<f64>::zeros(perturbed.dim());
    for (i, &c) in coefficients.iter().enumerate() {
        acc.axpy(c, &perturbed.vector(i), 1.0);
    }
    Ok(acc)
}

/// Cross-validates coefficients against the least-squares solution of
/// `F c = y` computed through a QR factorization of F.
///
/// Returns false on any disagreement beyond the tolerance and on any
/// structural failure (wrong lengths, breakdown of the triangular solve);
/// it never errors.
pub fn uniqueness_check(perturbed: &PerturbedFamily, y: &DVector<f64>, coefficients: &[f64]) -> bool {
    if y.len() != perturbed.dim() || coefficients.len() != perturbed.count() {
        return false;
    }
    let qr = perturbed.matrix().clone().qr();
    let qty = qr.q().tr_mul(y);
    let Some(reference) = qr.r().solve_upper_triangular(&qty) else {
        return false;
    };
    let scale = 1.0 + reference.amax();
    coefficients
        .iter()
        .zip(reference.iter())
        .all(|(a, b)| (a - b).abs() <= DEFAULT_UNIQUENESS_TOL * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{biorthogonal, DualFamily};
    use crate::operators::build_bundle;
    use crate::DEFAULT_INV_TOL;
    use approx::assert_relative_eq;

    fn running_example() -> (BasisFamily, DualFamily, PerturbedFamily, OperatorBundle) {
        let basis = BasisFamily::with_default_tol(DMatrix::identity(2, 2)).unwrap();
        let dual = biorthogonal(&basis).unwrap();
        let candidate = DMatrix::from_column_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let perturbed = PerturbedFamily::new(&dual, candidate).unwrap();
        let bundle = build_bundle(&basis, &dual, &perturbed, 2).unwrap();
        (basis, dual, perturbed, bundle)
    }

    #[test]
    fn identity_operator_returns_basis_as_dual() {
        let basis = BasisFamily::with_default_tol(DMatrix::identity(3, 3)).unwrap();
        let dual = biorthogonal(&basis).unwrap();
        let perturbed = PerturbedFamily::from_deltas(&dual, DMatrix::zeros(3, 3)).unwrap();
        let bundle = build_bundle(&basis, &dual, &perturbed, 3).unwrap();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let ds = expander.dual_system(&basis, &perturbed).unwrap();
        assert!(linalg::max_abs(&(ds.matrix() - basis.matrix())) < 1e-13);
        assert!(ds.bio_residual() < 1e-13);
    }

    #[test]
    fn dual_system_of_running_example() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let ds = expander.dual_system(&b, &p).unwrap();
        assert_relative_eq!(ds.matrix()[(0, 0)], 1.0, epsilon = 1e-14);
        assert!(ds.matrix()[(1, 0)].abs() < 1e-14);
        assert_relative_eq!(ds.matrix()[(0, 1)], -0.5, epsilon = 1e-14);
        assert_relative_eq!(ds.matrix()[(1, 1)], 1.0, epsilon = 1e-14);
        // Biorthogonality by hand: (f'_2, f_1) = -0.5 + 0.5 = 0.
        let overlap = ds.vector(1).dot(&p.vector(0));
        assert!(overlap.abs() < 1e-14);
        assert!(ds.bio_residual() <= 1e-8);
    }

    #[test]
    fn expand_running_example_by_hand() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let expansion = expander.expand(&b, &p, &y).unwrap();
        assert_relative_eq!(expansion.coefficients[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(expansion.coefficients[1], 0.5, epsilon = 1e-14);
        assert!(expansion.residual < 1e-14);
        assert!(uniqueness_check(&p, &y, &expansion.coefficients));
    }

    #[test]
    fn expanding_family_members_gives_unit_coefficients() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        for k in 0..2 {
            let y = DVector::from(p.vector(k));
            let expansion = expander.expand(&b, &p, &y).unwrap();
            for (i, &c) in expansion.coefficients.iter().enumerate() {
                let expected = if i == k { 1.0 } else { 0.0 };
                assert!(
                    (c - expected).abs() <= 1e-8,
                    "coefficient {i} of f_{k} is {c}"
                );
            }
        }
    }

    #[test]
    fn zero_vector_expands_to_zero() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let expansion = expander.expand(&b, &p, &DVector::zeros(2)).unwrap();
        assert!(expansion.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(expansion.residual, 0.0);
        assert!(uniqueness_check(&p, &DVector::zeros(2), &expansion.coefficients));
    }

    #[test]
    fn singular_operator_is_rejected() {
        let basis = BasisFamily::with_default_tol(DMatrix::identity(2, 2)).unwrap();
        let dual = biorthogonal(&basis).unwrap();
        let candidate = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let perturbed = PerturbedFamily::new(&dual, candidate).unwrap();
        let bundle = build_bundle(&basis, &dual, &perturbed, 2).unwrap();
        assert!(matches!(
            Expander::new(&bundle, DEFAULT_INV_TOL),
            Err(Error::SingularOperator { .. })
        ));
    }

    #[test]
    fn reconstruct_basic_identities() {
        let (_, _, p, _) = running_example();
        let zero = reconstruct(&p, &[0.0, 0.0]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let f2 = reconstruct(&p, &[0.0, 1.0]).unwrap();
        assert_eq!(f2, DVector::from(p.vector(1)));
        assert!(matches!(
            reconstruct(&p, &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn uniqueness_check_rejects_shifted_coefficients() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let y = DVector::from_vec(vec![0.3, -0.7]);
        let expansion = expander.expand(&b, &p, &y).unwrap();
        assert!(uniqueness_check(&p, &y, &expansion.coefficients));
        let mut shifted = expansion.coefficients.clone();
        shifted[0] += 1e-3;
        assert!(!uniqueness_check(&p, &y, &shifted));
        assert!(!uniqueness_check(&p, &y, &expansion.coefficients[..1]));
    }

    #[test]
    fn wrong_dimension_vector_rejected() {
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            expander.expand(&b, &p, &y),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn coefficient_functional_identity() {
        // (e_i, (A*)^{-1} y) and (A^{-1} e_i, y) are the same functional.
        let (b, _, p, bundle) = running_example();
        let expander = Expander::new(&bundle, DEFAULT_INV_TOL).unwrap();
        let ds = expander.dual_system(&b, &p).unwrap();
        let y = DVector::from_vec(vec![0.9, 0.4]);
        let expansion = expander.expand(&b, &p, &y).unwrap();
        for i in 0..2 {
            let via_dual = ds.vector(i).dot(&y);
            assert_relative_eq!(expansion.coefficients[i], via_dual, max_relative = 1e-10);
        }
    }
}
