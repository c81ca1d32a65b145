//! The two competing mean-field equations for a single paper's citation
//! growth factor `f` (where the citation count is `c = m (f - 1)`), an
//! adaptive integrator for both, and fixed-point verification.
//!
//! Each variant is the mean-field reduction of one attachment-kernel reading,
//! with the system-wide prefactor absorbed into the relative fitness:
//!
//! - [`OdeVariant::Literal`]: `df/ddt = lambda (f - 1) pdf(dt)` — the bare
//!   count weighting. With `f(0) = 1` the right-hand side vanishes
//!   identically, so `f = 1` (zero citations) is the unique solution.
//! - [`OdeVariant::WithAttractiveness`]: `df/ddt = lambda f pdf(dt)` — the
//!   `c + m` weighting, solved by `f = exp(lambda cdf(dt))`, which reproduces
//!   the closed-form ultimate impact `m (e^lambda - 1)`.

mod dopri5;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgingKernel;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow integrating {variant:?} at dt = {t_reached}")]
    StepSizeUnderflow { variant: OdeVariant, t_reached: f64 },
    #[error("invalid integration setup: {0}")]
    InvalidSetup(String),
}

/// Which mean-field equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeVariant {
    /// Right-hand side `lambda * (f - 1) * pdf(dt)`.
    Literal,
    /// Right-hand side `lambda * f * pdf(dt)`.
    WithAttractiveness,
}

impl OdeVariant {
    pub fn label(self) -> &'static str {
        match self {
            OdeVariant::Literal => "literal",
            OdeVariant::WithAttractiveness => "with_attractiveness",
        }
    }

    /// Closed-form solution with `f(0) = 1`, used as the comparison target.
    pub fn closed_form(self, lambda: f64, kernel: &AgingKernel, dt: f64) -> f64 {
        match self {
            OdeVariant::Literal => 1.0,
            OdeVariant::WithAttractiveness => (lambda * kernel.cdf(dt)).exp(),
        }
    }
}

/// Right-hand side of the selected mean-field equation.
pub fn rhs(variant: OdeVariant, f: f64, dt: f64, lambda: f64, kernel: &AgingKernel) -> f64 {
    match variant {
        OdeVariant::Literal => lambda * (f - 1.0) * kernel.pdf(dt),
        OdeVariant::WithAttractiveness => lambda * f * kernel.pdf(dt),
    }
}

/// Integration provenance carried alongside a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub variant: OdeVariant,
    pub lambda: f64,
    pub kernel: AgingKernel,
    pub tol: f64,
}

/// Numerical solution `f(dt)` on a strictly increasing age grid, starting
/// from the initial condition `f(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Citation count implied by `f` at grid index `i`: `m (f - 1)`.
    pub fn implied_citations(&self, i: usize, m: u64) -> f64 {
        m as f64 * (self.values[i] - 1.0)
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty trajectory")
    }
}

/// Default number of grid points for [`integrate`].
pub const DEFAULT_GRID_POINTS: usize = 513;

/// Integrates the selected variant from `f(0) = 1` over `[0, t_end]` on a
/// uniform grid, with absolute and relative local error control at `tol`.
pub fn integrate(
    variant: OdeVariant,
    lambda: f64,
    kernel: &AgingKernel,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory, OdeError> {
    let grid: Vec<f64> = (0..DEFAULT_GRID_POINTS)
        .map(|i| t_end * i as f64 / (DEFAULT_GRID_POINTS - 1) as f64)
        .collect();
    integrate_on_grid(variant, lambda, kernel, &grid, tol)
}

/// As [`integrate`], but evaluating on a caller-chosen strictly increasing
/// grid starting at 0.
pub fn integrate_on_grid(
    variant: OdeVariant,
    lambda: f64,
    kernel: &AgingKernel,
    grid: &[f64],
    tol: f64,
) -> Result<Trajectory, OdeError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(OdeError::InvalidSetup(format!("tolerance must be positive, got {tol}")));
    }
    if lambda < 0.0 {
        return Err(OdeError::InvalidSetup(format!("lambda must be nonnegative, got {lambda}")));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::InvalidSetup(
            "grid must be non-empty, nonnegative, strictly increasing".to_string(),
        ));
    }
    let t_end = *grid.last().expect("non-empty grid");
    let mut values = vec![0.0; grid.len()];

    // The global error accumulates roughly one local error per step, so the
    // per-step controller runs two orders below the requested tolerance.
    let local_tol = tol * 1e-2;

    // Split at the kernel's pdf discontinuity (if inside the range) so the
    // controller never steps across it.
    let mut segment_starts = vec![0.0];
    if let Some(b) = kernel.discontinuity() {
        if b > 0.0 && b < t_end {
            segment_starts.push(b);
        }
    }
    segment_starts.push(t_end);

    let mut y = 1.0;
    let mut done = 0usize;
    for seg in segment_starts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let in_seg = grid[done..].iter().take_while(|&&g| g <= b).count();
        let (seg_grid, seg_out) = (&grid[done..done + in_seg], &mut values[done..done + in_seg]);
        y = dopri5::integrate_grid(
            |t, f| rhs(variant, f, t, lambda, kernel),
            a,
            y,
            b,
            local_tol,
            local_tol,
            seg_grid,
            seg_out,
        )
        .map_err(|e| OdeError::StepSizeUnderflow { variant, t_reached: e.t_reached })?;
        done += in_seg;
    }

    Ok(Trajectory {
        times: grid.to_vec(),
        values,
        meta: TrajectoryMeta { variant, lambda, kernel: *kernel, tol },
    })
}

/// Outcome of integrating the literal-kernel equation and checking the
/// `f = 1` stationary solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub lambda: f64,
    pub kernel: AgingKernel,
    pub m: u64,
    pub tol: f64,
    pub t_end: f64,
    /// Max over the trajectory of `|f - 1|`.
    pub max_abs_deviation: f64,
    /// Max over the trajectory of the implied citation count `m (f - 1)`.
    pub max_implied_citations: f64,
    /// True when `max_abs_deviation <= 100 * tol`.
    pub verdict: bool,
}

/// Integrates the literal-kernel equation from `f(0) = 1` and reports how far
/// the numerical solution strays from the stationary value 1, together with
/// the implied citation curve `m (f - 1)`.
pub fn verify_fixed_point(
    lambda: f64,
    kernel: &AgingKernel,
    t_end: f64,
    tol: f64,
    m: u64,
) -> Result<FixedPointReport, OdeError> {
    let traj = integrate(OdeVariant::Literal, lambda, kernel, t_end, tol)?;
    let max_abs_deviation = traj
        .values
        .iter()
        .map(|f| (f - 1.0).abs())
        .fold(0.0, f64::max);
    let max_implied_citations = traj
        .values
        .iter()
        .map(|f| m as f64 * (f - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FixedPointReport {
        lambda,
        kernel: *kernel,
        m,
        tol,
        t_end,
        max_abs_deviation,
        max_implied_citations,
        verdict: max_abs_deviation <= 100.0 * tol,
    })
}

/// Max-abs and RMS deviation of a trajectory from its variant's closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub max_abs: f64,
    pub rms: f64,
}

/// Compares a trajectory against the closed-form solution of its variant:
/// `exp(lambda cdf(dt))` for the attractiveness reading, the constant 1 for
/// the literal reading.
pub fn compare_closed_form(traj: &Trajectory) -> DeviationSummary {
    let meta = &traj.meta;
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0f64;
    for (&t, &f) in traj.times.iter().zip(&traj.values) {
        let exact = meta.variant.closed_form(meta.lambda, &meta.kernel, t);
        let d = (f - exact).abs();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
    }
    DeviationSummary { max_abs, rms: (sum_sq / traj.times.len() as f64).sqrt() }
}
