//! Truncated real DFT as dense basis products.
//!
//! Conventions: `X[k] = sum_j x[j] exp(-2 pi i j k / n)` with no forward
//! scaling, and the inverse carries the `1/n`. Only modes `0..m` are kept;
//! the `m <= n/2 + 1` bound lets the inverse treat the dropped modes as zero.

use std::f64::consts::PI;

use super::gemm::{gemm, View, ViewMut};
use super::{AutodiffError, Result};

/// Largest admissible retained-mode count for signals of length `n`.
pub fn max_modes(n: usize) -> usize {
    n / 2 + 1
}

pub(crate) fn check_modes(n: usize, modes: usize) -> Result<()> {
    let max = max_modes(n);
    if modes == 0 || modes > max {
        return Err(AutodiffError::ModeRange { modes, n, max });
    }
    Ok(())
}

fn twiddle(j: usize, k: usize, n: usize) -> (f64, f64) {
    // Reduce the phase index first so large j*k stays accurate.
    let theta = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
    (theta.cos(), theta.sin())
}

/// `[n, 2m]` matrix: column `2k` holds `cos`, column `2k+1` holds `-sin`.
pub(crate) fn forward_basis(n: usize, modes: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * 2 * modes];
    for j in 0..n {
        for k in 0..modes {
            let (c, s) = twiddle(j, k, n);
            b[j * 2 * modes + 2 * k] = c;
            b[j * 2 * modes + 2 * k + 1] = -s;
        }
    }
    b
}

/// `[2m, n]` matrix mapping `(re, im)` pairs back to real samples.
pub(crate) fn inverse_basis(n: usize, modes: usize) -> Vec<f64> {
    let mut b = vec![0.0; 2 * modes * n];
    let inv_n = 1.0 / n as f64;
    for k in 0..modes {
        // Modes with a distinct conjugate partner count twice.
        let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        for j in 0..n {
            let (c, s) = twiddle(j, k, n);
            b[2 * k * n + j] = weight * c * inv_n;
            b[(2 * k + 1) * n + j] = -weight * s * inv_n;
        }
    }
    b
}

/// Rows of length `n` to rows of `m` interleaved complex modes.
pub(crate) fn rdft_rows(x: &[f64], rows: usize, n: usize, modes: usize) -> Vec<f64> {
    let basis = forward_basis(n, modes);
    let mut out = vec![0.0; rows * 2 * modes];
    gemm(
        rows,
        n,
        2 * modes,
        1.0,
        View::row_major(x, n),
        View::row_major(&basis, 2 * modes),
        0.0,
        ViewMut::row_major(&mut out, 2 * modes),
    );
    out
}

/// Adjoint of [`rdft_rows`].
pub(crate) fn rdft_rows_adjoint(dy: &[f64], rows: usize, n: usize, modes: usize) -> Vec<f64> {
    let basis = forward_basis(n, modes);
    let mut out = vec![0.0; rows * n];
    gemm(
        rows,
        2 * modes,
        n,
        1.0,
        View::row_major(dy, 2 * modes),
        View::row_major(&basis, 2 * modes).t(),
        0.0,
        ViewMut::row_major(&mut out, n),
    );
    out
}

/// Rows of `m` complex modes to real rows of length `n`.
pub(crate) fn irdft_rows(x: &[f64], rows: usize, n: usize, modes: usize) -> Vec<f64> {
    let basis = inverse_basis(n, modes);
    let mut out = vec![0.0; rows * n];
    gemm(
        rows,
        2 * modes,
        n,
        1.0,
        View::row_major(x, 2 * modes),
        View::row_major(&basis, n),
        0.0,
        ViewMut::row_major(&mut out, n),
    );
    out
}

/// Adjoint of [`irdft_rows`].
pub(crate) fn irdft_rows_adjoint(dy: &[f64], rows: usize, n: usize, modes: usize) -> Vec<f64> {
    let basis = inverse_basis(n, modes);
    let mut out = vec![0.0; rows * 2 * modes];
    gemm(
        rows,
        n,
        2 * modes,
        1.0,
        View::row_major(dy, n),
        View::row_major(&basis, n).t(),
        0.0,
        ViewMut::row_major(&mut out, 2 * modes),
    );
    out
}
