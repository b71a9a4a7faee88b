//! Finite-truncation model of the Hilbert space.
//!
//! Vectors are coordinate columns of length D under the standard Euclidean
//! inner product. A [`BasisFamily`] holds the N reference vectors e_i, a
//! [`DualFamily`] holds the biorthogonal vectors e'_i with (e'_i, e_j) =
//! delta_ij, and a [`PerturbedFamily`] holds the candidate vectors f_i
//! together with their cached differences d_i = f_i - e'_i.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::linalg;
use crate::DEFAULT_RANK_TOL;

/// Coordinate model of the ambient space at truncation dimension D.
///
/// The inner product is the Euclidean dot product on coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedSpace {
    dim: usize,
}

impl TruncatedSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("space dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Inner product of two coordinate vectors.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "vectors of length {} and {} in a space of dimension {}",
                x.len(),
                y.len(),
                self.dim
            )));
        }
        Ok(x.dot(y))
    }

    /// Norm induced by the inner product.
    pub fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.dot(x, x)?.sqrt())
    }
}

fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains a non-finite entry")))
    }
}

/// The reference family e_1..e_N, stored as columns of a D x N matrix.
///
/// Construction checks that the family has full numerical column rank, so a
/// value of this type is always usable as a basis of its span.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    space: TruncatedSpace,
    matrix: DMatrix<f64>,
    sigma_max: f64,
    sigma_min: f64,
    rank_tol: f64,
}

impl BasisFamily {
    /// Builds a family from the columns of `matrix`, rejecting inputs whose
    /// numerical rank at `rank_tol` (relative to the largest singular value)
    /// falls short of the column count.
    pub fn new(matrix: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (dim, count) = matrix.shape();
        let space = TruncatedSpace::new(dim)?;
        if count == 0 {
            return Err(Error::InvalidInput("family must contain at least one vector".into()));
        }
        if count > dim {
            return Err(Error::DimensionMismatch(format!(
                "{count} vectors cannot be independent in dimension {dim}"
            )));
        }
        if !(rank_tol.is_finite() && rank_tol > 0.0) {
            return Err(Error::InvalidInput(format!("rank tolerance {rank_tol} is not positive")));
        }
        ensure_finite(&matrix, "basis matrix")?;
        let sv = linalg::singular_values(&matrix);
        let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let rank = if sigma_max == 0.0 {
            0
        } else {
            sv.iter().filter(|&&s| s > rank_tol * sigma_max).count()
        };
        if rank < count {
            return Err(Error::RankDeficient { rank, count });
        }
        Ok(Self {
            space,
            matrix,
            sigma_max,
            sigma_min,
            rank_tol,
        })
    }

    /// Same as [`BasisFamily::new`] with the default rank tolerance.
    pub fn with_default_tol(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, DEFAULT_RANK_TOL)
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The i-th vector (0-based index).
    pub fn vector(&self, i: usize) -> DVectorView<'_, f64> {
        self.matrix.column(i)
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Largest absolute entry of `E^T E - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        linalg::identity_defect(&gram(self))
    }

    /// Whether the family is orthonormal at the given max-abs threshold.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.orthonormality_defect() <= tol
    }
}

/// Gram matrix G with G[i][j] = (e_i, e_j).
///
/// Filled symmetrically from the upper triangle so the result equals its own
/// transpose bit for bit.
pub fn gram(basis: &BasisFamily) -> DMatrix<f64> {
    let n = basis.count();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = basis.vector(i).dot(&basis.vector(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// The biorthogonal family e'_1..e'_N with (e'_i, e_j) = delta_ij.
#[derive(Debug, Clone)]
pub struct DualFamily {
    matrix: DMatrix<f64>,
    residual: f64,
}

impl DualFamily {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn vector(&self, i: usize) -> DVectorView<'_, f64> {
        self.matrix.column(i)
    }

    /// Max-abs biorthogonality defect, `max |(e'_i, e_j) - delta_ij|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Computes the biorthogonal family of a basis.
///
/// For a square family (N = D) this solves `E^T X = I` with a column-pivoted
/// factorization plus refinement; the columns of X are the e'_i. For N < D it
/// produces the minimum-norm dual `E' = E (E^T E)^{-1}`, which keeps every
/// e'_i inside the span of the family while preserving biorthogonality.
pub fn biorthogonal(basis: &BasisFamily) -> Result<DualFamily> {
    let matrix = if basis.count() == basis.dim() {
        linalg::invert_refined(&basis.matrix().transpose())
            .ok_or_else(|| rank_collapse(basis))?
    } else {
        let g = gram(basis);
        let z = linalg::invert_spd_refined(&g).ok_or_else(|| rank_collapse(basis))?;
        basis.matrix() * z
    };
    let residual = linalg::identity_defect(&(matrix.transpose() * basis.matrix()));
    Ok(DualFamily { matrix, residual })
}

/// Error for the corner where the rank check passed but the factored solve
/// still broke down: the family is singular at working precision.
fn rank_collapse(basis: &BasisFamily) -> Error {
    let rank = linalg::numerical_rank(basis.matrix(), 1e-15).min(basis.count().saturating_sub(1));
    Error::RankDeficient {
        rank,
        count: basis.count(),
    }
}

/// The candidate family f_1..f_N with cached differences d_i = f_i - e'_i.
///
/// Both constructors guarantee the identity `e'_i + d_i == f_i` bit for bit:
/// the stored candidate is always the floating-point sum of the dual vector
/// and the stored difference.
#[derive(Debug, Clone)]
pub struct PerturbedFamily {
    matrix: DMatrix<f64>,
    deltas: DMatrix<f64>,
    delta_norms: Vec<f64>,
}

impl PerturbedFamily {
    /// Builds the family from candidate vectors, caching d_i = f_i - e'_i.
    ///
    /// The stored vectors are re-derived as e'_i + d_i, which reproduces the
    /// input bit for bit whenever the subtraction was exact (always the case
    /// for same-scale data) and otherwise moves each entry by at most one
    /// rounding step.
    pub fn new(dual: &DualFamily, candidate: DMatrix<f64>) -> Result<Self> {
        if candidate.shape() != dual.matrix().shape() {
            return Err(Error::DimensionMismatch(format!(
                "candidate matrix is {}x{}, dual family is {}x{}",
                candidate.nrows(),
                candidate.ncols(),
                dual.dim(),
                dual.count()
            )));
        }
        ensure_finite(&candidate, "candidate matrix")?;
        let deltas = &candidate - dual.matrix();
        Ok(Self::assemble(dual, deltas))
    }

    /// Builds the family from prescribed differences: f_i := e'_i + d_i.
    pub fn from_deltas(dual: &DualFamily, deltas: DMatrix<f64>) -> Result<Self> {
        if deltas.shape() != dual.matrix().shape() {
            return Err(Error::DimensionMismatch(format!(
                "delta matrix is {}x{}, dual family is {}x{}",
                deltas.nrows(),
                deltas.ncols(),
                dual.dim(),
                dual.count()
            )));
        }
        ensure_finite(&deltas, "delta matrix")?;
        Ok(Self::assemble(dual, deltas))
    }

    fn assemble(dual: &DualFamily, deltas: DMatrix<f64>) -> Self {
        let matrix = dual.matrix() + &deltas;
        let delta_norms = (0..deltas.ncols()).map(|i| deltas.column(i).norm()).collect();
        Self {
            matrix,
            deltas,
            delta_norms,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn vector(&self, i: usize) -> DVectorView<'_, f64> {
        self.matrix.column(i)
    }

    pub fn deltas(&self) -> &DMatrix<f64> {
        &self.deltas
    }

    pub fn delta(&self, i: usize) -> DVectorView<'_, f64> {
        self.deltas.column(i)
    }

    /// Norms of the cached differences, `‖f_i - e'_i‖` per index.
    pub fn delta_norms(&self) -> &[f64] {
        &self.delta_norms
    }
}

/// Checks that a basis, its dual, and a perturbed family describe the same
/// truncation (shared dimension and count).
pub fn check_consistent(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
) -> Result<()> {
    let shape = basis.matrix().shape();
    if dual.matrix().shape() != shape || perturbed.matrix().shape() != shape {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, dual is {}x{}, perturbed family is {}x{}",
            shape.0,
            shape.1,
            dual.dim(),
            dual.count(),
            perturbed.dim(),
            perturbed.count()
        )));
    }
    Ok(())
}
