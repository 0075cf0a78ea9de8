use nalgebra::{DMatrix, DVector};

/// Largest singular value of `m` by power iteration on `mᵀm`.
///
/// The seed vector is all-ones so results are reproducible. Iteration stops
/// once the Rayleigh-quotient residual `‖mᵀm x − μx‖ / μ` drops below
/// `rel_tol`, or after `max_iter` sweeps.
pub fn spectral_norm(m: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let y = &gram * &x;
        mu = x.dot(&y);
        if mu <= f64::MIN_POSITIVE {
            return 0.0;
        }
        let residual = (&y - mu * &x).norm();
        let norm = y.norm();
        x = y / norm;
        if residual <= rel_tol * mu {
            break;
        }
    }
    mu.sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_small_cases() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 0.25, 0.25, 0.0]);
        assert!((spectral_norm(&k, 1e-12, 10_000) - 0.25).abs() < 1e-12);
        assert_eq!(spectral_norm(&DMatrix::zeros(3, 3), 1e-12, 100), 0.0);
        // Non-symmetric: singular values of [[1, 2], [0, 0]] are sqrt(5) and 0.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert!((spectral_norm(&m, 1e-12, 10_000) - 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn min_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((min_symmetric_eigenvalue(&m) - 1.0).abs() < 1e-12);
    }
}
