//! Tridiagonal solves with partial pivoting (the LAPACK gtsv elimination).

use crate::error::{Error, Result};

/// Solves `T x = b` where `T` has sub-diagonal `sub` (len n-1), diagonal `diag`
/// (len n) and super-diagonal `sup` (len n-1).
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(n >= 1 && sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    let dl = sub.to_vec();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(Error::SingularOperator(i));
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(Error::SingularOperator(n - 1));
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularOperator(n));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn solves_indefinite_system_needing_pivots() {
        let n = 7;
        let diag: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1e-3 } else { -2.0 }).collect();
        let sub: Vec<f64> = (0..n - 1).map(|i| 1.0 + i as f64).collect();
        let sup: Vec<f64> = (0..n - 1).map(|i| 0.5 - i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let b = apply(&sub, &diag, &sup, &x);
        let y = solve_tridiagonal(&sub, &diag, &sup, &b).unwrap();
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-12, "{a} vs {c}");
        }
    }

    #[test]
    fn one_by_one() {
        assert_eq!(solve_tridiagonal(&[], &[4.0], &[], &[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn singular_is_reported() {
        assert!(solve_tridiagonal(&[0.0], &[0.0, 1.0], &[0.0], &[1.0, 1.0]).is_err());
    }
}
