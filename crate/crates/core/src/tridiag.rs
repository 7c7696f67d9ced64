//! Thomas elimination for complex tridiagonal systems.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower`
/// (`lower[i]` couples rows `i + 1` and `i`), main diagonal `diag` and
/// super-diagonal `upper`.
///
/// `scratch` is resized as needed and can be reused across calls. No pivoting
/// is done; a vanishing pivot is reported as a solver failure.
pub fn solve_tridiagonal<T: Real>(
    lower: &[Complex<T>],
    diag: &[Complex<T>],
    upper: &[Complex<T>],
    rhs: &mut [Complex<T>],
    scratch: &mut Vec<Complex<T>>,
) -> Result<()> {
    let n = diag.len();
    if rhs.len() != n || lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal shapes disagree: diag {n}, lower {}, upper {}, rhs {}",
            lower.len(),
            upper.len(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(());
    }
    scratch.clear();
    scratch.resize(n, Complex::new(T::zero(), T::zero()));

    let tiny = T::min_positive_value();
    let reciprocal = |p: Complex<T>, row: usize| -> Result<Complex<T>> {
        let m = p.norm_sqr();
        if m <= tiny || !m.is_finite() {
            return Err(Error::SolverFailure(format!("zero pivot in row {row}")));
        }
        Ok(Complex::new(p.re / m, -p.im / m))
    };
    let mut inv = reciprocal(diag[0], 0)?;
    rhs[0] = rhs[0] * inv;
    for i in 1..n {
        scratch[i - 1] = upper[i - 1] * inv;
        inv = reciprocal(diag[i] - lower[i - 1] * scratch[i - 1], i)?;
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) * inv;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
    Ok(())
}
