//! Tridiagonal linear algebra shared by the chain and finite-difference
//! solvers.

use crate::{Error, Result};

/// Solve `A x = rhs` for tridiagonal `A` by the Thomas algorithm.
///
/// `sub[i] = A[i+1][i]`, `diag[i] = A[i][i]`, `sup[i] = A[i][i+1]`.
/// The systems built in this crate are strictly diagonally dominant
/// M-matrices, for which elimination without pivoting is stable.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert!(n == 0 || (sub.len() + 1 == n && sup.len() + 1 == n));
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n - 1];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::SingularSystem(0));
    }
    if n > 1 {
        c[0] = sup[0] / diag[0];
    }
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularSystem(i));
        }
        if i < n - 1 {
            c[i] = sup[i] / denom;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3, 5, 3] has solution [1, 1, 1].
        let x = solve_tridiagonal(&[1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0], &[3.0, 5.0, 3.0])
            .unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular() {
        assert!(solve_tridiagonal(&[1.0], &[0.0, 1.0], &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn residual_is_small_on_random_dominant_system() {
        let n = 200;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let sub: Vec<f64> = (0..n - 1).map(|_| next() - 0.5).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| next() - 0.5).collect();
        let diag: Vec<f64> = (0..n).map(|_| 2.5 + next()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| next() * 2.0 - 1.0).collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..n {
            let mut ax = diag[i] * x[i];
            if i > 0 {
                ax += sub[i - 1] * x[i - 1];
            }
            if i < n - 1 {
                ax += sup[i] * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() < 1e-10);
        }
    }
}
