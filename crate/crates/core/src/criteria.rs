//! Closeness criteria between a perturbed family and the biorthogonal system.
//!
//! The central quantity is the weighted double sum
//! `S = sum_{i,j} |(e_i, e_j)| * ‖f_i - e'_i‖ * ‖f_j - e'_j‖`,
//! reported together with the quadratic sum `sum ‖f_i - e_i‖^2` (defined for
//! orthonormal reference families), the single-series variant
//! `sum ‖e_i‖ * ‖f_i - e'_i‖`, and the partial sums of S per truncation level.
//!
//! Every sum runs in a fixed row-major ascending order with compensated
//! accumulation, so repeated evaluations are identical bit for bit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{check_consistent, gram, BasisFamily, DualFamily, PerturbedFamily};
use crate::linalg::{compensated_sum, CompensatedSum};
use crate::DEFAULT_ORTHONORMAL_TOL;

/// Evaluation of the closeness criteria for one family pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosenessReport {
    /// Value of the weighted double sum over all N^2 index pairs.
    pub generalized_sum: f64,
    /// `sum ‖f_i - e_i‖^2`; `None` when the reference family is not
    /// orthonormal, since the quadratic criterion only applies there.
    pub quadratic_sum: Option<f64>,
    /// `sum ‖e_i‖ * ‖f_i - e'_i‖`.
    pub banach_sum: f64,
    /// Partial value of the double sum with both indices restricted to the
    /// first n vectors, for n = 1..N. The last entry equals `generalized_sum`.
    pub partial_sums: Vec<f64>,
}

/// Double sum over the index block `lo..hi` (0-based, exclusive upper end):
/// `sum |G[i][j]| * norms[i] * norms[j]` in row-major ascending order.
fn weighted_block_sum(g: &DMatrix<f64>, norms: &[f64], lo: usize, hi: usize) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in lo..hi {
        for j in lo..hi {
            acc.add(g[(i, j)].abs() * norms[i] * norms[j]);
        }
    }
    acc.value()
}

/// Computes the full closeness report.
///
/// The double sum uses the Gram matrix of the reference family as weights
/// and the cached difference norms of the perturbed family as factors.
pub fn generalized_sum(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
) -> Result<ClosenessReport> {
    check_consistent(basis, dual, perturbed)?;
    let g = gram(basis);
    let norms = perturbed.delta_norms();
    let n = basis.count();

    let partial_sums: Vec<f64> = (1..=n).map(|k| weighted_block_sum(&g, norms, 0, k)).collect();
    let generalized = partial_sums[n - 1];

    let quadratic = if basis.is_orthonormal(DEFAULT_ORTHONORMAL_TOL) {
        Some(quadratic_sum_unchecked(basis, perturbed))
    } else {
        None
    };

    let banach = banach_sum_from_parts(basis, norms);

    Ok(ClosenessReport {
        generalized_sum: generalized,
        quadratic_sum: quadratic,
        banach_sum: banach,
        partial_sums,
    })
}

/// `sum ‖f_i - e_i‖^2`, the quadratic criterion for orthonormal reference
/// families. Note the difference is against e_i, not against the dual
/// vectors; for an orthonormal family the two coincide.
pub fn quadratic_sum(basis: &BasisFamily, perturbed: &PerturbedFamily) -> Result<f64> {
    if basis.matrix().shape() != perturbed.matrix().shape() {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, perturbed family is {}x{}",
            basis.dim(),
            basis.count(),
            perturbed.dim(),
            perturbed.count()
        )));
    }
    let defect = basis.orthonormality_defect();
    if defect > DEFAULT_ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal {
            defect,
            tol: DEFAULT_ORTHONORMAL_TOL,
        });
    }
    Ok(quadratic_sum_unchecked(basis, perturbed))
}

fn quadratic_sum_unchecked(basis: &BasisFamily, perturbed: &PerturbedFamily) -> f64 {
    compensated_sum(
        (0..basis.count())
            .map(|i| (perturbed.vector(i) - basis.vector(i)).norm_squared()),
    )
}

/// `sum ‖e_i‖ * ‖f_i - e'_i‖`, the single-series closeness variant.
pub fn banach_sum(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
) -> Result<f64> {
    check_consistent(basis, dual, perturbed)?;
    Ok(banach_sum_from_parts(basis, perturbed.delta_norms()))
}

fn banach_sum_from_parts(basis: &BasisFamily, norms: &[f64]) -> f64 {
    compensated_sum((0..basis.count()).map(|i| basis.vector(i).norm() * norms[i]))
}

/// The tail estimate: the double sum restricted to indices `l+1..=j` in
/// 1-based terms, which bounds `‖(K_j - K_l)x‖^2` for unit x.
///
/// With `l = 0, j = N` this reproduces `generalized_sum` bit for bit, since
/// both run the same accumulation over the same block.
pub fn tail_bound(
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
    let g = gram(basis);
    Ok(weighted_block_sum(&g, perturbed.delta_norms(), l, j))
}

/// Plateau heuristic at a given level: the partial sum at `level` is within
/// `tol * (1 + S_level)` of the partial sum at `level / 2` (an empty half
/// range counts as zero).
///
/// This is a numerical convergence heuristic, not a proof of anything about
/// the untruncated series; reports label it accordingly.
pub fn plateau_at_level(partial_sums: &[f64], level: usize, tol: f64) -> Result<bool> {
    if level == 0 || level > partial_sums.len() {
        return Err(Error::BadLevel {
            level,
            count: partial_sums.len(),
        });
    }
    let s_full = partial_sums[level - 1];
    let half = level / 2;
    let s_half = if half == 0 { 0.0 } else { partial_sums[half - 1] };
    Ok(s_full - s_half <= tol * (1.0 + s_full))
}

/// Plateau heuristic at the final level.
pub fn plateau_converged(partial_sums: &[f64], tol: f64) -> Result<bool> {
    plateau_at_level(partial_sums, partial_sums.len(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::biorthogonal;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn family(
        entries: &[f64],
        dim: usize,
        count: usize,
        deltas: &[f64],
    ) -> (BasisFamily, DualFamily, PerturbedFamily) {
        let basis =
            BasisFamily::with_default_tol(DMatrix::from_column_slice(dim, count, entries)).unwrap();
        let dual = biorthogonal(&basis).unwrap();
        let perturbed = PerturbedFamily::from_deltas(
            &dual,
            DMatrix::from_column_slice(dim, count, deltas),
        )
        .unwrap();
        (basis, dual, perturbed)
    }

    #[test]
    fn zero_deltas_give_zero_sum() {
        let (b, d, p) = family(&[1.0, 0.0, 1.0, 1.0], 2, 2, &[0.0; 4]);
        let report = generalized_sum(&b, &d, &p).unwrap();
        assert_eq!(report.generalized_sum, 0.0);
        assert_eq!(report.banach_sum, 0.0);
        assert!(report.partial_sums.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_surviving_term() {
        // Orthonormal base, f_1 = e_1 + (0.1, 0): only the (1,1) term of the
        // double sum survives and S = 0.01.
        let (b, d, p) = family(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.1, 0.0, 0.0, 0.0]);
        let report = generalized_sum(&b, &d, &p).unwrap();
        assert_relative_eq!(report.generalized_sum, 0.01, max_relative = 1e-14);
        assert_eq!(report.partial_sums.len(), 2);
        assert_relative_eq!(report.partial_sums[0], 0.01, max_relative = 1e-14);
        assert_eq!(report.partial_sums[1], report.generalized_sum);
    }

    #[test]
    fn orthonormal_specialization_matches_quadratic() {
        let (b, d, p) = family(
            &[1.0, 0.0, 0.0, 1.0],
            2,
            2,
            &[0.03, -0.04, 0.12, 0.05],
        );
        let report = generalized_sum(&b, &d, &p).unwrap();
        let q = report.quadratic_sum.expect("orthonormal base");
        assert!((report.generalized_sum - q).abs() <= 1e-12 * (1.0 + q));
    }

    #[test]
    fn quadratic_sum_by_hand() {
        let (b, d, _) = family(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.0; 4]);
        let candidate = DMatrix::from_column_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let p = PerturbedFamily::new(&d, candidate).unwrap();
        assert_eq!(quadratic_sum(&b, &p).unwrap(), 0.25);
    }

    #[test]
    fn quadratic_sum_rejects_skew_base() {
        let (b, d, p) = family(&[1.0, 0.0, 1.0, 1.0], 2, 2, &[0.0; 4]);
        match quadratic_sum(&b, &p) {
            Err(Error::NotOrthonormal { defect, .. }) => assert_relative_eq!(defect, 1.0),
            other => panic!("expected orthonormality rejection, got {other:?}"),
        }
        let report = generalized_sum(&b, &d, &p).unwrap();
        assert!(report.quadratic_sum.is_none());
    }

    #[test]
    fn banach_sum_by_hand() {
        let (b, d, p) = family(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.3, 0.4, 0.0, 0.0]);
        assert_relative_eq!(banach_sum(&b, &d, &p).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn banach_sum_scales_with_basis_norms() {
        let entries = [1.0, 0.0, 1.0, 1.0];
        let deltas = [0.01, -0.02, 0.005, 0.0];
        let (b, d, p) = family(&entries, 2, 2, &deltas);
        let doubled: Vec<f64> = entries.iter().map(|x| 2.0 * x).collect();
        let b2 = BasisFamily::with_default_tol(DMatrix::from_column_slice(2, 2, &doubled)).unwrap();
        let d2 = biorthogonal(&b2).unwrap();
        let p2 =
            PerturbedFamily::from_deltas(&d2, DMatrix::from_column_slice(2, 2, &deltas)).unwrap();
        let small = banach_sum(&b, &d, &p).unwrap();
        let big = banach_sum(&b2, &d2, &p2).unwrap();
        assert_eq!(big.to_bits(), (2.0 * small).to_bits());
    }

    #[test]
    fn tail_over_full_range_is_the_sum() {
        let (b, d, p) = family(
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            3,
            3,
            &[0.1, 0.0, -0.2, 0.05, 0.3, 0.0, 0.0, 0.01, 0.07],
        );
        let report = generalized_sum(&b, &d, &p).unwrap();
        let tail = tail_bound(&b, &d, &p, 0, 3).unwrap();
        assert_eq!(tail.to_bits(), report.generalized_sum.to_bits());
    }

    #[test]
    fn tail_single_term() {
        let (b, d, p) = family(&[1.0, 0.0, 1.0, 1.0], 2, 2, &[0.1, 0.0, 0.0, 0.2]);
        // Range (1, 2] keeps only the (2,2) term: |G[2][2]| * ‖d_2‖^2.
        let tail = tail_bound(&b, &d, &p, 1, 2).unwrap();
        let g22 = 2.0;
        let d2 = p.delta_norms()[1];
        assert_relative_eq!(tail, g22 * d2 * d2, max_relative = 1e-15);
    }

    #[test]
    fn tail_ranges_are_monotone() {
        let (b, d, p) = family(
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            3,
            3,
            &[0.1, 0.0, -0.2, 0.05, 0.3, 0.0, 0.0, 0.01, 0.07],
        );
        for l in 0..3 {
            for j in (l + 1)..=3 {
                let inner = tail_bound(&b, &d, &p, l, j).unwrap();
                let outer = tail_bound(&b, &d, &p, 0, 3).unwrap();
                assert!(inner <= outer + 1e-18);
            }
        }
    }

    #[test]
    fn bad_ranges_rejected() {
        let (b, d, p) = family(&[1.0, 0.0, 1.0, 1.0], 2, 2, &[0.0; 4]);
        assert!(matches!(
            tail_bound(&b, &d, &p, 1, 1),
            Err(Error::BadRange { .. })
        ));
        assert!(matches!(
            tail_bound(&b, &d, &p, 2, 1),
            Err(Error::BadRange { .. })
        ));
        assert!(matches!(
            tail_bound(&b, &d, &p, 0, 3),
            Err(Error::BadRange { .. })
        ));
    }

    #[test]
    fn partial_sums_nondecreasing() {
        let (b, d, p) = family(
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            3,
            3,
            &[0.1, 0.0, -0.2, 0.05, 0.3, 0.0, 0.0, 0.01, 0.07],
        );
        let report = generalized_sum(&b, &d, &p).unwrap();
        for w in report.partial_sums.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn naive_double_loop_agreement() {
        let (b, d, p) = family(
            &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            3,
            3,
            &[0.1, 0.0, -0.2, 0.05, 0.3, 0.0, 0.0, 0.01, 0.07],
        );
        let g = gram(&b);
        let norms = p.delta_norms();
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                naive += g[(i, j)].abs() * norms[i] * norms[j];
            }
        }
        let report = generalized_sum(&b, &d, &p).unwrap();
        assert_relative_eq!(report.generalized_sum, naive, max_relative = 1e-14);
    }

    #[test]
    fn plateau_detects_stable_and_growing_series() {
        let stable = [1.0, 1.5, 1.5, 1.5];
        assert!(plateau_converged(&stable, 1e-6).unwrap());
        let growing = [1.0, 2.0, 3.0, 4.0];
        assert!(!plateau_converged(&growing, 1e-6).unwrap());
        assert!(matches!(
            plateau_at_level(&stable, 0, 1e-6),
            Err(Error::BadLevel { .. })
        ));
        assert!(matches!(
            plateau_at_level(&stable, 5, 1e-6),
            Err(Error::BadLevel { .. })
        ));
    }

    #[test]
    fn report_serializes_with_null_quadratic() {
        let (b, d, p) = family(&[1.0, 0.0, 1.0, 1.0], 2, 2, &[0.1, 0.0, 0.0, 0.0]);
        let report = generalized_sum(&b, &d, &p).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["quadratic_sum"].is_null());
        assert!(json["generalized_sum"].is_number());
        assert!(json["banach_sum"].is_number());
        assert_eq!(json["partial_sums"].as_array().unwrap().len(), 2);
    }
}
