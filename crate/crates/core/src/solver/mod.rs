//! Conservative finite-difference solver for `u_tt = (c(x)^2 u_x)_x` on
//! `[0, 1]` with homogeneous Dirichlet ends and zero initial velocity.
//!
//! Space is discretized in flux form with harmonic averaging of `c^2` at the
//! cell interfaces; time uses leapfrog, started from a second-order Taylor
//! step. All arithmetic is `f64`.

mod verify;

pub use verify::{
    analytic_standing_wave, convergence_study, convergence_study_with, energy_drift, instability_onset,
    ConvergencePoint, VERIFY_TERMINAL_TIME,
};

use thiserror::Error;

/// Wave-speed floor shared by the solver and the coefficient sampler.
pub const C_MIN: f64 = 0.3;

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.9;

/// Default terminal time.
pub const DEFAULT_TERMINAL_TIME: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid solver setting: {0}")]
    InvalidConfig(String),
    #[error("non-finite value detected at time step {step}")]
    Unstable { step: usize },
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// Uniform grid on `[0, 1]`, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_points: usize,
    dx: f64,
    xs: Vec<f64>,
}

impl Grid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(SolverError::GridTooSmall(n_points));
        }
        let last = (n_points - 1) as f64;
        let xs = (0..n_points).map(|i| i as f64 / last).collect();
        Ok(Self {
            n_points,
            dx: 1.0 / last,
            xs,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_points {
            return Err(SolverError::Dimension {
                expected: self.n_points,
                actual: len,
            });
        }
        Ok(())
    }
}

/// Displacement samples, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField(Vec<f64>);

impl WaveField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.n_points()])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self(grid.xs().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Wave speed samples, one per grid node, each at least [`C_MIN`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField(Vec<f64>);

impl CoefficientField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SolverError::InvalidCoefficient("empty field".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < C_MIN) {
            return Err(SolverError::InvalidCoefficient(format!(
                "c[{i}] = {v} is below the floor {C_MIN} or not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(vec![c; grid.n_points()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Time stepping for one solve. `dt * n_steps == terminal_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub cfl_number: f64,
    pub terminal_time: f64,
    pub dt: f64,
    pub n_steps: usize,
}

/// Harmonic mean of two squared speeds.
pub fn harmonic_interface_speed_sq(c_sq_left: f64, c_sq_right: f64) -> Result<f64> {
    if !(c_sq_left > 0.0 && c_sq_right > 0.0) {
        return Err(SolverError::InvalidCoefficient(format!(
            "interface speeds must be positive, got {c_sq_left} and {c_sq_right}"
        )));
    }
    Ok(2.0 * c_sq_left * c_sq_right / (c_sq_left + c_sq_right))
}

/// Discrete `(c^2 u_x)_x` with interface speeds precomputed.
#[derive(Debug, Clone)]
pub struct FluxOperator {
    /// `c^2` at interface `i + 1/2`, for `i = 0..n-2`.
    interface_sq: Vec<f64>,
    inv_dx_sq: f64,
}

impl FluxOperator {
    pub fn new(c: &CoefficientField, grid: &Grid) -> Result<Self> {
        grid.check_len(c.values().len())?;
        let interface_sq = c
            .values()
            .windows(2)
            .map(|w| harmonic_interface_speed_sq(w[0] * w[0], w[1] * w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            interface_sq,
            inv_dx_sq: 1.0 / (grid.dx() * grid.dx()),
        })
    }

    pub fn n_points(&self) -> usize {
        self.interface_sq.len() + 1
    }

    /// Writes the divergence into `out`; boundary entries are set to zero.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n_points();
        debug_assert_eq!(u.len(), n);
        debug_assert_eq!(out.len(), n);
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let right = self.interface_sq[i] * (u[i + 1] - u[i]);
            let left = self.interface_sq[i - 1] * (u[i] - u[i - 1]);
            out[i] = (right - left) * self.inv_dx_sq;
        }
    }
}

/// `(F_{i+1/2} - F_{i-1/2}) / dx` at interior nodes, zero at both ends.
pub fn flux_divergence(u: &WaveField, c: &CoefficientField, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(u.len())?;
    let op = FluxOperator::new(c, grid)?;
    let mut out = vec![0.0; grid.n_points()];
    op.apply(u.values(), &mut out);
    Ok(out)
}

/// Picks the largest step allowed by the Courant number, then shrinks it so
/// that an integer number of steps lands exactly on `terminal_time`.
pub fn cfl_timestep(c: &CoefficientField, grid: &Grid, cfl_number: f64, terminal_time: f64) -> Result<SolverConfig> {
    if !(cfl_number > 0.0 && cfl_number.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "cfl number must be positive, got {cfl_number}"
        )));
    }
    if !(terminal_time > 0.0 && terminal_time.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "terminal time must be positive, got {terminal_time}"
        )));
    }
    grid.check_len(c.values().len())?;
    let c_max = c.max();
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(SolverError::InvalidCoefficient(format!(
            "max wave speed {c_max} is not usable"
        )));
    }
    let dt_max = cfl_number * grid.dx() / c_max;
    // Guard against ceil(1.0000000000000002) when T is an exact multiple.
    let ratio = terminal_time / dt_max;
    let mut n_steps = ratio.ceil() as usize;
    if n_steps > 1 && (ratio - (n_steps - 1) as f64) <= 4.0 * f64::EPSILON * ratio {
        n_steps -= 1;
    }
    let n_steps = n_steps.max(1);
    Ok(SolverConfig {
        cfl_number,
        terminal_time,
        dt: terminal_time / n_steps as f64,
        n_steps,
    })
}

/// `u^1 = u^0 + dt^2/2 * L u^0`.
pub fn taylor_first_step(u0: &WaveField, c: &CoefficientField, grid: &Grid, dt: f64) -> Result<WaveField> {
    let acc = flux_divergence(u0, c, grid)?;
    let half = 0.5 * dt * dt;
    let mut out: Vec<f64> = u0.values().iter().zip(&acc).map(|(u, a)| u + half * a).collect();
    pin_boundary(&mut out);
    Ok(WaveField(out))
}

/// `u^{n+1} = 2 u^n - u^{n-1} + dt^2 L u^n`.
pub fn leapfrog_step(
    u_prev: &WaveField,
    u_curr: &WaveField,
    c: &CoefficientField,
    grid: &Grid,
    dt: f64,
) -> Result<WaveField> {
    grid.check_len(u_prev.len())?;
    let acc = flux_divergence(u_curr, c, grid)?;
    let dt_sq = dt * dt;
    let mut out: Vec<f64> = u_curr
        .values()
        .iter()
        .zip(u_prev.values())
        .zip(&acc)
        .map(|((uc, up), a)| 2.0 * uc - up + dt_sq * a)
        .collect();
    pin_boundary(&mut out);
    Ok(WaveField(out))
}

fn pin_boundary(u: &mut [f64]) {
    if let Some(first) = u.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = u.last_mut() {
        *last = 0.0;
    }
}

/// How the second time level is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeStart {
    /// Second-order Taylor start.
    #[default]
    Taylor,
    /// `u^1 = u^0`. Only first-order accurate; used as a negative control
    /// for the convergence check.
    Frozen,
}

/// Leapfrog state that can be advanced one step at a time.
#[derive(Debug, Clone)]
pub struct Integrator {
    op: FluxOperator,
    dt_sq: f64,
    prev: Vec<f64>,
    curr: Vec<f64>,
    scratch: Vec<f64>,
    step: usize,
}

impl Integrator {
    /// Sets up the first two time levels. After construction `step() == 1`.
    pub fn start(u0: &WaveField, c: &CoefficientField, grid: &Grid, dt: f64, start: TimeStart) -> Result<Self> {
        grid.check_len(u0.len())?;
        let op = FluxOperator::new(c, grid)?;
        let mut prev = u0.values().to_vec();
        pin_boundary(&mut prev);
        let mut curr = prev.clone();
        let mut scratch = vec![0.0; grid.n_points()];
        if start == TimeStart::Taylor {
            op.apply(&prev, &mut scratch);
            let half = 0.5 * dt * dt;
            for (u, a) in curr.iter_mut().zip(&scratch) {
                *u += half * a;
            }
        }
        let it = Self {
            op,
            dt_sq: dt * dt,
            prev,
            curr,
            scratch,
            step: 1,
        };
        it.check_finite()?;
        Ok(it)
    }

    /// Resumes from two explicit time levels, e.g. with roles swapped to run
    /// backwards in time.
    pub fn from_levels(
        u_prev: &WaveField,
        u_curr: &WaveField,
        c: &CoefficientField,
        grid: &Grid,
        dt: f64,
    ) -> Result<Self> {
        grid.check_len(u_prev.len())?;
        grid.check_len(u_curr.len())?;
        Ok(Self {
            op: FluxOperator::new(c, grid)?,
            dt_sq: dt * dt,
            prev: u_prev.values().to_vec(),
            curr: u_curr.values().to_vec(),
            scratch: vec![0.0; grid.n_points()],
            step: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn current(&self) -> &[f64] {
        &self.curr
    }

    pub fn previous(&self) -> &[f64] {
        &self.prev
    }

    pub fn advance(&mut self) -> Result<()> {
        self.op.apply(&self.curr, &mut self.scratch);
        // scratch <- next level, then rotate.
        for ((s, &uc), &up) in self.scratch.iter_mut().zip(&self.curr).zip(&self.prev) {
            *s = 2.0 * uc - up + self.dt_sq * *s;
        }
        pin_boundary(&mut self.scratch);
        std::mem::swap(&mut self.prev, &mut self.curr);
        std::mem::swap(&mut self.curr, &mut self.scratch);
        self.step += 1;
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        if self.curr.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SolverError::Unstable { step: self.step })
        }
    }

    pub fn into_current(self) -> WaveField {
        WaveField(self.curr)
    }
}

/// Runs to `config.terminal_time` and returns the last level.
pub fn solve_terminal(u0: &WaveField, c: &CoefficientField, grid: &Grid, config: &SolverConfig) -> Result<WaveField> {
    solve_with(u0, c, grid, config, TimeStart::Taylor, |_, _| {})
}

/// Like [`solve_terminal`] but calls `observe(step, u)` after every level,
/// starting with `(0, u0)`.
pub fn solve_with(
    u0: &WaveField,
    c: &CoefficientField,
    grid: &Grid,
    config: &SolverConfig,
    start: TimeStart,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<WaveField> {
    if config.n_steps == 0 {
        return Err(SolverError::InvalidConfig("n_steps must be positive".into()));
    }
    observe(0, u0.values());
    let mut it = Integrator::start(u0, c, grid, config.dt, start)?;
    observe(1, it.current());
    while it.step() < config.n_steps {
        it.advance()?;
        observe(it.step(), it.current());
    }
    Ok(it.into_current())
}
