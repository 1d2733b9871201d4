//! Thomas solve for tridiagonal systems. Used by the implicit PDE steps and
//! the lattice hitting-probability solve.

/// Solves a tridiagonal system in place. `lower[0]` and `upper[n-1]` are
/// ignored; `diag` and `rhs` are clobbered. Panics on a zero pivot, which the
/// diagonally dominant systems built in this crate never produce.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &mut [f64],
    upper: &[f64],
    rhs: &mut [f64],
) {
    let n = diag.len();
    assert!(n >= 1);
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    assert_eq!(rhs.len(), n);
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        assert!(w.is_finite(), "zero pivot at row {}", i - 1);
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}
