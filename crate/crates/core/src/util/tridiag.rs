//! Tridiagonal (Thomas) solves and the bordered extension
//!
//! ```text
//!     [ T   c ] [x]   [f]
//!     [ rᵀ  0 ] [μ] = [g]
//! ```
//!
//! solved via two Thomas passes: x₁ = T⁻¹f, x₂ = T⁻¹c, μ = (rᵀx₁ − g)/(rᵀx₂),
//! x = x₁ − μ x₂.  The bordered form handles T with a near-null direction as
//! long as the constraint row is not orthogonal to it.

use crate::{Error, Result};

/// Solve T x = rhs with T tridiagonal (no pivoting; the calling code only
/// builds diagonally-heavy second-difference operators where the pivots
/// stay O(1/h²)).  `lower[i]` multiplies x[i−1] in row i (lower[0] unused);
/// `upper[i]` multiplies x[i+1] in row i (upper[n−1] unused).
pub fn solve_tridiag(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv.abs() < 1e-300 * scale.max(1.0) {
        return Err(Error::SingularSystem(format!("zero pivot at row 0 (|piv| = {:e})", piv.abs())));
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv.abs() < 1e-300 * scale.max(1.0) {
            return Err(Error::SingularSystem(format!(
                "zero pivot at row {i} (|piv| = {:e})",
                piv.abs()
            )));
        }
        c[i] = upper[i] / piv;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// y = T x for tridiagonal T in the same layout as `solve_tridiag`.
pub fn tridiag_matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += upper[i] * x[i + 1];
            }
            v
        })
        .collect()
}

fn bordered_once(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    col: &[f64],
    row: &[f64],
    rhs: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let x1 = solve_tridiag(lower, diag, upper, rhs)?;
    let x2 = solve_tridiag(lower, diag, upper, col)?;
    let r_x1: f64 = row.iter().zip(&x1).map(|(r, x)| r * x).sum();
    let r_x2: f64 = row.iter().zip(&x2).map(|(r, x)| r * x).sum();
    let scale: f64 = row.iter().zip(&x2).map(|(r, x)| (r * x).abs()).sum();
    if r_x2.abs() < 1e-13 * scale.max(1e-300) {
        return Err(Error::SingularSystem(format!(
            "constraint row nearly orthogonal to border solve (rᵀT⁻¹c = {r_x2:e})"
        )));
    }
    let mu = (r_x1 - g) / r_x2;
    let x: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - mu * b).collect();
    Ok((x, mu))
}

/// Bordered solve: T x + μ c = f subject to rᵀ x = g.
///
/// Returns (x, μ).  One step of iterative refinement removes the
/// cancellation error that the elimination leaves along a near-null
/// direction of T (the intended regime: T with one tiny eigenvalue whose
/// eigenvector the border column controls).  Errors with `SingularSystem`
/// when rᵀT⁻¹c vanishes (constraint blind to the border column).
pub fn solve_bordered(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    col: &[f64],
    row: &[f64],
    rhs: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let (mut x, mut mu) = bordered_once(lower, diag, upper, col, row, rhs, g)?;
    for _ in 0..2 {
        let ax = tridiag_matvec(lower, diag, upper, &x);
        let res: Vec<f64> =
            (0..diag.len()).map(|i| rhs[i] - ax[i] - mu * col[i]).collect();
        let rg = g - row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>();
        match bordered_once(lower, diag, upper, col, row, &res, rg) {
            Ok((dx, dmu)) => {
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi += di;
                }
                mu += dmu;
            }
            Err(_) => break,
        }
    }
    Ok((x, mu))
}
