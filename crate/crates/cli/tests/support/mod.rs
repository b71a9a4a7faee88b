//! Brute-force oracles for the acceptance suite. Everything here is written
//! the slow, obvious way (index loops, adjugates, textbook elimination) so
//! agreement with the production paths is evidence, not circularity.

use basis_perturb::hilbert::{biorthogonal, BasisFamily, DualFamily, PerturbedFamily};
use basis_perturb::sampling::DeterministicSampler;
use basis_perturb::DEFAULT_RANK_TOL;
use nalgebra::{DMatrix, DVector};

/// Relative closeness with an absolute floor of 1.
pub fn rel_close(actual: f64, reference: f64, tol: f64) -> bool {
    (actual - reference).abs() <= tol * (1.0 + reference.abs())
}

pub fn gaussian_matrix(sampler: &mut DeterministicSampler, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sampler.normal())
}

/// Random base with singular values pinned to [1, 2], built as Q1 D Q2^T
/// from QR factors of Gaussian draws. A raw Gaussian matrix would not do:
/// its condition number grows with size, and oracle solves need spread
/// they never have to fight.
pub fn well_conditioned_base(
    sampler: &mut DeterministicSampler,
    dim: usize,
    count: usize,
) -> DMatrix<f64> {
    let q1 = orthonormal_columns(sampler, dim, count);
    let q2 = orthonormal_columns(sampler, count, count);
    let spectrum =
        DMatrix::from_fn(count, count, |i, j| {
            if i == j {
                1.0 + sampler.uniform()
            } else {
                0.0
            }
        });
    q1 * spectrum * q2.transpose()
}

fn orthonormal_columns(
    sampler: &mut DeterministicSampler,
    rows: usize,
    cols: usize,
) -> DMatrix<f64> {
    loop {
        let q = gaussian_matrix(sampler, rows, cols).qr().q();
        // A degenerate draw can leave a zero column; resample, it is
        // measure-zero territory.
        if (0..cols).all(|j| q.column(j).norm() > 0.5) {
            return q;
        }
    }
}

/// Plain accumulation dot product.
pub fn naive_dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

pub fn naive_norm(v: &DVector<f64>) -> f64 {
    naive_dot(v, v).sqrt()
}

/// The weighted double sum, written as the double loop it is.
pub fn naive_generalized_sum(basis: &BasisFamily, perturbed: &PerturbedFamily) -> f64 {
    let n = basis.count();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let weight = naive_dot(&basis.vector(i).into_owned(), &basis.vector(j).into_owned());
            sum += weight.abs()
                * naive_norm(&perturbed.delta(i).into_owned())
                * naive_norm(&perturbed.delta(j).into_owned());
        }
    }
    sum
}

pub fn naive_banach_sum(basis: &BasisFamily, perturbed: &PerturbedFamily) -> f64 {
    let mut sum = 0.0;
    for i in 0..basis.count() {
        sum += naive_norm(&basis.vector(i).into_owned())
            * naive_norm(&perturbed.delta(i).into_owned());
    }
    sum
}

pub fn naive_quadratic_sum(basis: &BasisFamily, perturbed: &PerturbedFamily) -> f64 {
    let mut sum = 0.0;
    for i in 0..basis.count() {
        let diff = perturbed.vector(i) - basis.vector(i);
        sum += naive_dot(&diff, &diff);
    }
    sum
}

/// The double sum restricted to indices lo+1..hi (1-based), directly.
pub fn naive_tail_bound(
    basis: &BasisFamily,
    perturbed: &PerturbedFamily,
    lo: usize,
    hi: usize,
) -> f64 {
    let mut sum = 0.0;
    for i in lo..hi {
        for j in lo..hi {
            let weight = naive_dot(&basis.vector(i).into_owned(), &basis.vector(j).into_owned());
            sum += weight.abs()
                * naive_norm(&perturbed.delta(i).into_owned())
                * naive_norm(&perturbed.delta(j).into_owned());
        }
    }
    sum
}

/// I + sum of rank-one updates e_i d_i^T, assembled entry by entry.
pub fn naive_i_plus_k(basis: &BasisFamily, perturbed: &PerturbedFamily, level: usize) -> DMatrix<f64> {
    let d = basis.dim();
    let mut m = DMatrix::<f64>::identity(d, d);
    for r in 0..d {
        for c in 0..d {
            for i in 0..level {
                m[(r, c)] += basis.vector(i)[r] * perturbed.delta(i)[c];
            }
        }
    }
    m
}

/// Sum of rank-one maps e_i f_i^T, assembled entry by entry.
pub fn naive_a(basis: &BasisFamily, perturbed: &PerturbedFamily, level: usize) -> DMatrix<f64> {
    let d = basis.dim();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            for i in 0..level {
                m[(r, c)] += basis.vector(i)[r] * perturbed.vector(i)[c];
            }
        }
    }
    m
}

pub fn inverse_2x2(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det == 0.0 {
        return None;
    }
    Some(DMatrix::from_row_slice(
        2,
        2,
        &[
            m[(1, 1)] / det,
            -m[(0, 1)] / det,
            -m[(1, 0)] / det,
            m[(0, 0)] / det,
        ],
    ))
}

pub fn inverse_3x3(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let minor = |r0: usize, r1: usize, c0: usize, c1: usize| {
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    let det = m[(0, 0)] * minor(1, 2, 1, 2) - m[(0, 1)] * minor(1, 2, 0, 2)
        + m[(0, 2)] * minor(1, 2, 0, 1);
    if det == 0.0 {
        return None;
    }
    let adjugate = DMatrix::from_row_slice(
        3,
        3,
        &[
            minor(1, 2, 1, 2),
            -minor(0, 2, 1, 2),
            minor(0, 1, 1, 2),
            -minor(1, 2, 0, 2),
            minor(0, 2, 0, 2),
            -minor(0, 1, 0, 2),
            minor(1, 2, 0, 1),
            -minor(0, 2, 0, 1),
            minor(0, 1, 0, 1),
        ],
    );
    Some(adjugate / det)
}

/// Gauss-Jordan elimination with partial pivoting; None on a zero pivot.
pub fn gauss_jordan_solve(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(rhs.nrows(), n);
    let mut work = a.clone();
    let mut sol = rhs.clone();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if work[(row, col)].abs() > work[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if work[(pivot, col)] == 0.0 {
            return None;
        }
        work.swap_rows(col, pivot);
        sol.swap_rows(col, pivot);
        let diag = work[(col, col)];
        for c in 0..n {
            work[(col, c)] /= diag;
        }
        for c in 0..sol.ncols() {
            sol[(col, c)] /= diag;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[(row, col)];
            if factor == 0.0 {
                continue;
            }
            for c in 0..n {
                work[(row, c)] -= factor * work[(col, c)];
            }
            for c in 0..sol.ncols() {
                sol[(row, c)] -= factor * sol[(col, c)];
            }
        }
    }
    Some(sol)
}

pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    gauss_jordan_solve(a, &DMatrix::identity(a.nrows(), a.nrows()))
}

/// Least squares through the normal equations, solved by elimination.
pub fn least_squares(family: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let gram = family.transpose() * family;
    let rhs = family.transpose() * y;
    let solved = gauss_jordan_solve(&gram, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    Some(DVector::from_column_slice(solved.as_slice()))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let n = sym.nrows();
    assert_eq!(sym.ncols(), n);
    let mut a = sym.clone();
    let scale: f64 = (0..n).map(|i| a[(i, i)].abs()).sum::<f64>().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    eigs
}

/// Singular values through the Jacobi eigenvalues of the Gram matrix.
pub fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    jacobi_eigenvalues(&(m.transpose() * m))
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect()
}

/// Base, dual, and a perturbation with the given deltas, built through the
/// production constructors (the oracles re-derive everything else).
pub fn family_from_deltas(
    base: DMatrix<f64>,
    deltas: DMatrix<f64>,
) -> (BasisFamily, DualFamily, PerturbedFamily) {
    let basis = BasisFamily::new(base, DEFAULT_RANK_TOL).expect("test base is full rank");
    let dual = biorthogonal(&basis).expect("test base has a dual");
    let perturbed = PerturbedFamily::from_deltas(&dual, deltas).expect("shapes match");
    (basis, dual, perturbed)
}

/// Random deltas with column norms scale * (i+1)^(-alpha).
pub fn decay_deltas(
    sampler: &mut DeterministicSampler,
    dim: usize,
    count: usize,
    alpha: f64,
    scale: f64,
) -> DMatrix<f64> {
    let mut deltas = DMatrix::<f64>::zeros(dim, count);
    for i in 0..count {
        let direction = sampler.unit_vector(dim).expect("dim is positive");
        deltas.set_column(i, &(direction * (scale * ((i + 1) as f64).powf(-alpha))));
    }
    deltas
}
