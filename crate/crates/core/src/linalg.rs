//! Dense linear-algebra helpers: spectral norms, symmetric eigenvalue bounds,
//! general eigenvalues and the continuous Lyapunov solver.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Real part an eigenvalue must stay below for a matrix to count as Hurwitz.
pub const HURWITZ_TOL: f64 = -1e-9;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 5000;

/// Largest singular value, by power iteration on MᵀM.
///
/// Falls back to a symmetric eigendecomposition of MᵀM when the iteration
/// stalls (nearly repeated top singular values).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let mtm = m.transpose() * m;
    let k = mtm.nrows();
    // Deterministic start vector with no special alignment.
    let mut v = DVector::from_fn(k, |i, _| 1.0 + 0.5 / (i as f64 + 1.0));
    v /= v.norm();
    let mut lambda = 0.0;
    let mut w = DVector::zeros(k);
    for _ in 0..POWER_MAX_ITER {
        w.gemv(1.0, &mtm, &v, 0.0);
        let norm = w.norm();
        if norm == 0.0 {
            // Start vector in the null space; fall through to the eigen path.
            break;
        }
        let next = v.dot(&w);
        v.copy_from(&w);
        v /= norm;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return next.max(0.0).sqrt();
        }
        lambda = next;
    }
    sym_max_eig(&mtm).max(0.0).sqrt()
}

pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn sym_max_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && !m.is_empty() && is_symmetric(m, 1e-10) && sym_min_eig(&symmetrize(m)) > 0.0
}

/// Eigenvalues sorted by real part ascending (ties by imaginary part).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

pub fn max_real_part(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Solves `A x = b` with partial-pivot LU, rejecting numerically singular `A`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    if max == 0.0 || min <= 1e-13 * max {
        return None;
    }
    lu.solve(b)
}

/// Solves AᵀP + PA = −Q through the vectorized system
/// (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov solve with A {:?} and Q {:?}",
            a.shape(),
            q.shape()
        )));
    }
    if !is_spd(q) {
        return Err(Error::InvalidArgument("Q must be symmetric positive definite".into()));
    }
    let max_real = max_real_part(a)?;
    if max_real >= HURWITZ_TOL {
        return Err(Error::NotHurwitz { max_real });
    }
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-q).as_slice());
    let sol = solve(&k, &rhs).ok_or(Error::SingularSystem)?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&p))
}

/// ‖AᵀP + PA + Q‖ in the spectral norm.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    spectral_norm(&(a.transpose() * p + p * a + q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rectangular_matches_svd() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 4.0]);
        let svd = m.clone().svd(false, false);
        assert!((spectral_norm(&m) - svd.singular_values.max()).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_repeated_singular_values() {
        let m = DMatrix::<f64>::identity(4, 4) * 2.5;
        assert!((spectral_norm(&m) - 2.5).abs() < 1e-12);
        assert_eq!(spectral_norm(&DMatrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn lyapunov_identity_examples() {
        let p = solve_lyapunov(&(-DMatrix::identity(2, 2)), &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!((p - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        let p = solve_lyapunov(&DMatrix::from_element(1, 1, -2.0), &DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_triangular_by_elimination() {
        // Unknowns p11, p12, p22 of AᵀP + PA = −I with A = [[-1,0],[1,-2]]:
        //   -2 p11 + 2 p12 = -1,  p22 - 3 p12 = 0,  -4 p22 = -1.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -2.0]);
        let q = DMatrix::identity(2, 2);
        let p = solve_lyapunov(&a, &q).unwrap();
        let p22 = 0.25;
        let p12 = p22 / 3.0;
        let p11 = (1.0 + 2.0 * p12) / 2.0;
        let expected = DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22]);
        assert!((&p - expected).amax() < 1e-14);
        assert!(lyapunov_residual(&a, &p, &q) <= 1e-9);
        assert!(sym_min_eig(&p) > 0.0);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        assert!(matches!(
            solve_lyapunov(&a, &DMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
        let marginal = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov(&marginal, &DMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn eigenvalues_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.1, -3.0]));
        let ev = eigenvalues(&a).unwrap();
        assert_eq!(ev[0].re, -3.0);
        assert_eq!(ev[1].re, -0.1);
        let ev = eigenvalues(&(-DMatrix::<f64>::identity(2, 2))).unwrap();
        assert!(ev.iter().all(|z| (z.re + 1.0).abs() < 1e-15 && z.im == 0.0));
    }

    #[test]
    fn singular_solve_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(&a, &DMatrix::identity(2, 2)).is_none());
    }
}
