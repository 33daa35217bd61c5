//! Small dense helpers on top of nalgebra. Every matrix here is at most a
//! few dozen rows; nothing is tuned for size.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return 0.0;
    }
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `a x = b` for symmetric positive definite `a` with one step of
/// iterative refinement.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    let mut x = chol.solve(b);
    let r = b - a * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// Solves a general square system by LU; `None` when singular.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Largest eigenvalue of `a a^T` (the squared operator norm of `a`) by
/// power iteration.
pub fn op_norm_sq(a: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let aat = a * a.transpose();
    // deterministic start with distinct components
    let mut v = DVector::from_fn(m, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = &aat * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - est).abs() <= 1e-14 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    // Rayleigh quotients approach from below; pad slightly
    est * (1.0 + 1e-9)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
