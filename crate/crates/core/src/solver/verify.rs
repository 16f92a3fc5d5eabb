//! Constant-coefficient checks against the exact standing-wave solution.

use std::f64::consts::PI;

use super::{
    cfl_timestep, solve_with, CoefficientField, Grid, Result, SolverConfig, SolverError, TimeStart, WaveField,
};
use crate::evaluation::{energy_diagnostic, relative_l2};

/// `sin(k pi x) cos(k pi c t)`, the exact solution for constant `c` and zero
/// initial velocity.
pub fn analytic_standing_wave(k: u32, c_const: f64, t: f64, grid: &Grid) -> Result<WaveField> {
    if k == 0 {
        return Err(SolverError::InvalidConfig("mode index must be at least 1".into()));
    }
    if !(c_const > 0.0) {
        return Err(SolverError::InvalidCoefficient(format!(
            "wave speed must be positive, got {c_const}"
        )));
    }
    let kpi = k as f64 * PI;
    let amp = (kpi * c_const * t).cos();
    let mut u = WaveField::from_fn(grid, |x| (kpi * x).sin() * amp);
    let n = u.len();
    u.values_mut()[0] = 0.0;
    u.values_mut()[n - 1] = 0.0;
    Ok(u)
}

/// Horizon used for order-of-accuracy checks. At t = 1 the single-mode
/// solution is at a turning point and the measured order doubles.
pub const VERIFY_TERMINAL_TIME: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergencePoint {
    pub n_points: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub rel_error: f64,
}

pub fn convergence_study(
    k: u32,
    c_const: f64,
    resolutions: &[usize],
    terminal_time: f64,
    cfl: f64,
) -> Result<Vec<ConvergencePoint>> {
    convergence_study_with(k, c_const, resolutions, terminal_time, cfl, TimeStart::Taylor)
}

/// Relative L2 error at `terminal_time` for each resolution. dt follows dx
/// through the Courant number, so refinement is joint in space and time.
pub fn convergence_study_with(
    k: u32,
    c_const: f64,
    resolutions: &[usize],
    terminal_time: f64,
    cfl: f64,
    start: TimeStart,
) -> Result<Vec<ConvergencePoint>> {
    if resolutions.windows(2).any(|w| w[1] < w[0]) {
        return Err(SolverError::InvalidConfig("resolutions must be non-decreasing".into()));
    }
    if let Some(&n) = resolutions.iter().find(|&&n| n < 9) {
        return Err(SolverError::InvalidConfig(format!(
            "resolution {n} is below the minimum of 9"
        )));
    }
    resolutions
        .iter()
        .map(|&n| {
            let grid = Grid::new(n)?;
            let c = CoefficientField::constant(&grid, c_const)?;
            let u0 = analytic_standing_wave(k, c_const, 0.0, &grid)?;
            if terminal_time == 0.0 {
                return Ok(ConvergencePoint {
                    n_points: n,
                    dt: 0.0,
                    n_steps: 0,
                    rel_error: 0.0,
                });
            }
            let cfg = cfl_timestep(&c, &grid, cfl, terminal_time)?;
            let out = solve_with(&u0, &c, &grid, &cfg, start, |_, _| {})?;
            let exact = analytic_standing_wave(k, c_const, terminal_time, &grid)?;
            let rel_error = relative_l2(&out, &exact).map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
            Ok(ConvergencePoint {
                n_points: n,
                dt: cfg.dt,
                n_steps: cfg.n_steps,
                rel_error,
            })
        })
        .collect()
}

/// Relative change `|E(u(T)) - E(u0)| / E(u0)` of the energy diagnostic for a
/// single standing mode with constant speed.
pub fn energy_drift(k: u32, c_const: f64, n_points: usize, terminal_time: f64, cfl: f64) -> Result<f64> {
    let grid = Grid::new(n_points)?;
    let c = CoefficientField::constant(&grid, c_const)?;
    let u0 = analytic_standing_wave(k, c_const, 0.0, &grid)?;
    let cfg = cfl_timestep(&c, &grid, cfl, terminal_time)?;
    let out = solve_with(&u0, &c, &grid, &cfg, TimeStart::Taylor, |_, _| {})?;
    let to_err = |e: crate::evaluation::EvalError| SolverError::InvalidConfig(e.to_string());
    let e0 = energy_diagnostic(&u0, &c, &grid).map_err(to_err)?;
    let e1 = energy_diagnostic(&out, &c, &grid).map_err(to_err)?;
    Ok((e1 - e0).abs() / e0)
}

/// Runs a single standing mode for up to `max_steps` at a fixed Courant
/// number, ignoring the usual horizon, and returns the step at which the
/// solution stopped being finite.
pub fn instability_onset(k: u32, n_points: usize, cfl: f64, max_steps: usize) -> Result<Option<usize>> {
    if !(cfl > 0.0 && cfl.is_finite()) || max_steps == 0 {
        return Err(SolverError::InvalidConfig(format!(
            "need a positive cfl and step budget, got {cfl} and {max_steps}"
        )));
    }
    let grid = Grid::new(n_points)?;
    let c = CoefficientField::constant(&grid, 1.0)?;
    let u0 = analytic_standing_wave(k, 1.0, 0.0, &grid)?;
    let dt = cfl * grid.dx();
    let cfg = SolverConfig {
        cfl_number: cfl,
        terminal_time: max_steps as f64 * dt,
        dt,
        n_steps: max_steps,
    };
    match solve_with(&u0, &c, &grid, &cfg, TimeStart::Taylor, |_, _| {}) {
        Ok(_) => Ok(None),
        Err(SolverError::Unstable { step }) => Ok(Some(step)),
        Err(e) => Err(e),
    }
}
