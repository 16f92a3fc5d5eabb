//! Error metrics, the gradient-energy diagnostic, and sine-mode analysis.

use std::f64::consts::PI;

use thiserror::Error;

use crate::solver::{CoefficientField, Grid, WaveField};

mod analysis;

pub use analysis::{
    evaluate_report, modal_error_curve, modes_ablation, representative_case_export, split_metrics, write_ablation_csv,
    write_metrics_csv, write_modal_csv, AblationOutcome, AblationRow, MetricsReport, ModalErrorCurve, Predictor,
    SplitMetrics, ABLATION_MODES,
};

/// Default number of analysed sine modes.
pub const DEFAULT_ANALYSIS_MODES: usize = 32;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference field has zero norm")]
    ZeroNormTruth,
    #[error("length mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{modes} modes requested but at most {limit} are resolvable")]
    TooManyModes { modes: usize, limit: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Train(#[from] crate::trainer::TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(EvalError::Dimension { expected, actual });
    }
    Ok(())
}

/// `||pred - truth|| / ||truth||` over raw grid values.
pub fn relative_l2(pred: &WaveField, truth: &WaveField) -> Result<f64> {
    relative_l2_slices(pred.values(), truth.values())
}

pub fn relative_l2_slices(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), pred.len())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        num += (p - t) * (p - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(EvalError::ZeroNormTruth);
    }
    Ok((num / den).sqrt())
}

/// Trapezoidal `integral of c^2 u_x^2`, with second-order one-sided
/// differences at the two ends.
pub fn energy_diagnostic(u: &WaveField, c: &CoefficientField, grid: &Grid) -> Result<f64> {
    let n = grid.n_points();
    check_len(n, u.len())?;
    check_len(n, c.values().len())?;
    let u = u.values();
    let c = c.values();
    let h = grid.dx();
    let ux = |i: usize| -> f64 {
        if i == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h)
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * h)
        }
    };
    let mut total = 0.0;
    for i in 0..n {
        let d = c[i] * ux(i);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        total += w * d * d;
    }
    Ok(total * h)
}

/// Discrete sine quadrature `a_k = 2 dx sum_i f_i sin(k pi x_i)` over
/// interior nodes, `k = 1..=modes`.
pub fn sine_coefficients(f: &WaveField, grid: &Grid, modes: usize) -> Result<Vec<f64>> {
    sine_coefficients_slice(f.values(), grid, modes)
}

pub fn sine_coefficients_slice(f: &[f64], grid: &Grid, modes: usize) -> Result<Vec<f64>> {
    let n = grid.n_points();
    check_len(n, f.len())?;
    let limit = (n - 1) / 2;
    if modes > limit {
        return Err(EvalError::TooManyModes { modes, limit });
    }
    let h = grid.dx();
    let xs = grid.xs();
    Ok((1..=modes)
        .map(|k| {
            let s: f64 = (1..n - 1).map(|i| f[i] * (k as f64 * PI * xs[i]).sin()).sum();
            2.0 * h * s
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(128).unwrap()
    }

    #[test]
    fn relative_l2_examples() {
        let g = grid();
        let t = WaveField::from_fn(&g, |x| (PI * x).sin() + x * x);
        assert_eq!(relative_l2(&t, &t).unwrap(), 0.0);
        let neg = WaveField::new(t.values().iter().map(|v| -v).collect());
        assert!((relative_l2(&neg, &t).unwrap() - 2.0).abs() < 1e-15);
        let eps = -0.03;
        let pert = WaveField::new(t.values().iter().map(|v| v * (1.0 + eps)).collect());
        assert!((relative_l2(&pert, &t).unwrap() - eps.abs()).abs() < 1e-14);
        assert!(matches!(
            relative_l2(&t, &WaveField::zeros(&g)),
            Err(EvalError::ZeroNormTruth)
        ));
    }

    #[test]
    fn energy_examples() {
        let g = grid();
        let one = CoefficientField::constant(&g, 1.0).unwrap();
        assert_eq!(energy_diagnostic(&WaveField::zeros(&g), &one, &g).unwrap(), 0.0);
        let u = WaveField::from_fn(&g, |x| (PI * x).sin());
        let e = energy_diagnostic(&u, &one, &g).unwrap();
        assert!((e - PI * PI / 2.0).abs() < 1e-3, "{e}");
        let two = CoefficientField::constant(&g, 2.0).unwrap();
        let e2 = energy_diagnostic(&u, &two, &g).unwrap();
        assert!((e2 - 4.0 * e).abs() < 1e-12 * e2);
        assert!(energy_diagnostic(&WaveField::new(vec![0.0; 127]), &one, &g).is_err());
    }

    #[test]
    fn sine_projection_examples() {
        let g = grid();
        let f = WaveField::from_fn(&g, |x| (3.0 * PI * x).sin());
        let a = sine_coefficients(&f, &g, 10).unwrap();
        for (k, v) in a.iter().enumerate() {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10);
        }
        let z = sine_coefficients(&WaveField::zeros(&g), &g, 5).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(matches!(
            sine_coefficients(&f, &g, 64),
            Err(EvalError::TooManyModes { limit: 63, .. })
        ));
    }

    /// Solves the normal equations of the interior least-squares fit directly.
    fn least_squares_oracle(f: &[f64], g: &Grid, m: usize) -> Vec<f64> {
        let xs = g.xs();
        let n = g.n_points();
        let basis = |k: usize, i: usize| ((k + 1) as f64 * PI * xs[i]).sin();
        let mut a = vec![vec![0.0; m + 1]; m];
        for r in 0..m {
            for c in 0..m {
                a[r][c] = (1..n - 1).map(|i| basis(r, i) * basis(c, i)).sum();
            }
            a[r][m] = (1..n - 1).map(|i| basis(r, i) * f[i]).sum();
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let factor = a[r][col] / a[col][col];
                    for c in col..=m {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
        (0..m).map(|r| a[r][m] / a[r][r]).collect()
    }

    #[test]
    fn projection_matches_least_squares() {
        let g = grid();
        let f = WaveField::from_fn(&g, |x| 0.5 * (PI * x).sin() - 0.25 * (5.0 * PI * x).sin());
        let got = sine_coefficients(&f, &g, 8).unwrap();
        let want = least_squares_oracle(f.values(), &g, 8);
        for (k, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!((a - b).abs() < 1e-10, "mode {}: {a} vs {b}", k + 1);
        }
        assert!((got[0] - 0.5).abs() < 1e-10 && (got[4] + 0.25).abs() < 1e-10);
    }

    #[test]
    fn parseval_for_band_limited_signal() {
        let g = grid();
        let amps = [0.3, -0.7, 0.0, 0.2, 0.9, -0.1];
        let f = crate::data::sine_series(&amps, &g);
        let a = sine_coefficients(&f, &g, 6).unwrap();
        let lhs: f64 = a.iter().map(|v| 0.5 * v * v).sum();
        let rhs = g.dx() * f.values().iter().map(|v| v * v).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }
}
