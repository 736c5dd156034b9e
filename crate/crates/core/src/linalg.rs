//! Dense least squares via Householder QR, sized for the single-digit
//! coefficient counts used by the curve fits.

use crate::error::{Error, Result};
use crate::real::{real, Real};

/// Least-squares solution of `A x = b` in the two-norm.
#[derive(Debug, Clone)]
pub struct Lstsq<T> {
    /// Minimizer of `||A x - b||`.
    pub coefficients: Vec<T>,
    /// `(A^T A)^{-1}`, the coefficient covariance up to the residual
    /// variance factor.
    pub covariance_unscaled: Vec<Vec<T>>,
}

/// Solves an overdetermined system with `rows` as the `n x p` matrix.
///
/// Errors with `InsufficientData` when `n < p` and `DegenerateFit` when the
/// matrix is numerically rank deficient.
pub fn lstsq<T: Real>(rows: &[Vec<T>], rhs: &[T]) -> Result<Lstsq<T>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    assert!(p > 0, "matrix needs at least one column");
    assert_eq!(n, rhs.len(), "matrix and right-hand side disagree on row count");
    debug_assert!(rows.iter().all(|r| r.len() == p), "matrix must be rectangular");
    if n < p {
        return Err(Error::InsufficientData { needed: p, got: n });
    }

    // Row-major working copies; the factorization overwrites both.
    let mut a: Vec<T> = rows.iter().flatten().copied().collect();
    let mut b: Vec<T> = rhs.to_vec();
    let at = |i: usize, j: usize| i * p + j;

    let mut scratch = vec![T::zero(); n];
    for k in 0..p {
        let mut norm2 = T::zero();
        for i in k..n {
            norm2 += a[at(i, k)] * a[at(i, k)];
        }
        let norm = norm2.sqrt();
        if norm == T::zero() {
            continue;
        }
        let pivot = a[at(k, k)];
        let alpha = if pivot >= T::zero() { -norm } else { norm };
        scratch[k] = pivot - alpha;
        for i in (k + 1)..n {
            scratch[i] = a[at(i, k)];
        }
        let vtv = (norm2 - alpha * pivot) * real(2.0);
        for j in (k + 1)..p {
            let mut dot = T::zero();
            for i in k..n {
                dot += scratch[i] * a[at(i, j)];
            }
            let coef = real::<T>(2.0) * dot / vtv;
            for i in k..n {
                let delta = coef * scratch[i];
                a[at(i, j)] -= delta;
            }
        }
        let mut dot = T::zero();
        for i in k..n {
            dot += scratch[i] * b[i];
        }
        let coef = real::<T>(2.0) * dot / vtv;
        for i in k..n {
            b[i] -= coef * scratch[i];
        }
        a[at(k, k)] = alpha;
        for i in (k + 1)..n {
            a[at(i, k)] = T::zero();
        }
    }

    let max_diag = (0..p).fold(T::zero(), |m, k| m.max(a[at(k, k)].abs()));
    let tol = max_diag * T::epsilon() * real(n.max(p) as f64);
    if max_diag == T::zero() || (0..p).any(|k| a[at(k, k)].abs() <= tol) {
        return Err(Error::DegenerateFit("regressor matrix is numerically rank deficient".into()));
    }

    // Back-substitute R x = Q^T b.
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut acc = b[i];
        for j in (i + 1)..p {
            acc -= a[at(i, j)] * x[j];
        }
        x[i] = acc / a[at(i, i)];
    }

    // R^{-1} one column at a time (stored column-major), then
    // (A^T A)^{-1} = R^{-1} R^{-T}.
    let mut rinv_cols = vec![vec![T::zero(); p]; p];
    for (col, column) in rinv_cols.iter_mut().enumerate() {
        for i in (0..=col).rev() {
            let mut acc = if i == col { T::one() } else { T::zero() };
            for j in (i + 1)..=col {
                acc -= a[at(i, j)] * column[j];
            }
            column[i] = acc / a[at(i, i)];
        }
    }
    let mut cov = vec![vec![T::zero(); p]; p];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = rinv_cols[i.max(j)..]
                .iter()
                .fold(T::zero(), |acc, column| acc + column[i] * column[j]);
        }
    }

    Ok(Lstsq { coefficients: x, covariance_unscaled: cov })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_square_system_exactly() {
        let rows: Vec<Vec<f64>> = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let rhs = vec![5.0, 10.0];
        let solution = lstsq(&rows, &rhs).unwrap();
        assert!((solution.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((solution.coefficients[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fits_a_line_through_consistent_points() {
        // Points (0,1), (1,2), (2,3) lie exactly on 1 + x.
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let rhs = vec![1.0, 2.0, 3.0];
        let solution = lstsq(&rows, &rhs).unwrap();
        assert!((solution.coefficients[0] - 1.0).abs() < 1e-13);
        assert!((solution.coefficients[1] - 1.0).abs() < 1e-13);
        // (A^T A)^{-1} for this design is [[5/6, -1/2], [-1/2, 1/2]].
        let cov = &solution.covariance_unscaled;
        assert!((cov[0][0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((cov[0][1] + 0.5).abs() < 1e-12);
        assert!((cov[1][0] + 0.5).abs() < 1e-12);
        assert!((cov[1][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn minimizes_the_residual_for_inconsistent_data() {
        // Mean of [1, 2, 6] is the least-squares constant.
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![1.0]];
        let rhs = vec![1.0, 2.0, 6.0];
        let solution = lstsq(&rows, &rhs).unwrap();
        assert!((solution.coefficients[0] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_underdetermined_and_rank_deficient_systems() {
        let short = lstsq::<f64>(&[vec![1.0, 2.0]], &[1.0]);
        assert!(matches!(short, Err(Error::InsufficientData { needed: 2, got: 1 })));
        // Second column is twice the first.
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let rhs = vec![1.0, 2.0, 3.0];
        assert!(matches!(lstsq(&rows, &rhs), Err(Error::DegenerateFit(_))));
    }
}
