//! Dormand-Prince 5(4) adaptive integrator for scalar first-order ODEs.
//!
//! Explicit embedded pair with FSAL (7 stages, 6 evaluations per step) and
//! the standard 4th-order dense-output interpolant, which supplies solution
//! values at arbitrary points inside each accepted step.

// Butcher tableau (lower-triangular A, nodes C, 5th-order weights B).
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;
const ERR_EXP: f64 = 0.2;

#[derive(Debug, Clone, Copy)]
pub struct StepUnderflow {
    /// Independent-variable value the integrator had reached when the
    /// controller demanded a step below machine resolution.
    pub t_reached: f64,
}

/// Integrates `dy/dt = rhs(t, y)` from `(t0, y0)` to `t_end`, writing the
/// solution at each requested grid point into `out` and returning the value
/// at `t_end`.
///
/// `grid` must be sorted ascending within `[t0, t_end]`; `out` must have the
/// same length. Points interior to an accepted step are filled from the
/// dense-output interpolant.
#[allow(clippy::too_many_arguments)]
pub fn integrate_grid(
    rhs: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
    grid: &[f64],
    out: &mut [f64],
) -> Result<f64, StepUnderflow> {
    debug_assert_eq!(grid.len(), out.len());
    debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]));

    let mut next_grid = 0;
    while next_grid < grid.len() && grid[next_grid] <= t0 {
        out[next_grid] = y0;
        next_grid += 1;
    }
    if t_end <= t0 {
        return Ok(y0);
    }

    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, y);
    let mut h = (1e-4 * span).min(span);
    let mut rejected = false;
    let mut k = [0.0f64; 7];

    loop {
        if t + h > t_end {
            h = t_end - t;
        }

        k[0] = k1;
        for stage in 1..7 {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(stage) {
                // Row 7 of the tableau reuses the 5th-order weights (FSAL).
                let a = if stage < 6 { A[stage - 1][j] } else { A[5][j] };
                acc += a * kj;
            }
            k[stage] = rhs(t + C[stage] * h, y + h * acc);
        }
        let y_new = y + h * (0..6).map(|j| A[5][j] * k[j]).sum::<f64>();

        let err_raw: f64 = (0..7).map(|j| E[j] * k[j]).sum::<f64>() * h;
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let err = (err_raw / scale).abs();

        if err <= 1.0 {
            // Accepted: fill grid points inside (t, t + h] from the
            // dense-output interpolant.
            let t_new = t + h;
            if next_grid < grid.len() && grid[next_grid] <= t_new {
                let ydiff = y_new - y;
                let bspl = h * k[0] - ydiff;
                let cont = [
                    y,
                    ydiff,
                    bspl,
                    ydiff - h * k[6] - bspl,
                    h * (0..7).map(|j| D[j] * k[j]).sum::<f64>(),
                ];
                while next_grid < grid.len() && grid[next_grid] <= t_new {
                    let s = (grid[next_grid] - t) / h;
                    let s1 = 1.0 - s;
                    out[next_grid] = cont[0]
                        + s * (cont[1] + s1 * (cont[2] + s * (cont[3] + s1 * cont[4])));
                    next_grid += 1;
                }
            }

            t = t_new;
            y = y_new;
            k1 = k[6]; // FSAL
            if t >= t_end {
                for slot in out.iter_mut().skip(next_grid) {
                    *slot = y;
                }
                return Ok(y);
            }

            let mut scale_h = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * err.powf(-ERR_EXP)).clamp(MIN_SCALE, MAX_SCALE)
            };
            if rejected {
                scale_h = scale_h.min(1.0);
            }
            rejected = false;
            h *= scale_h;
        } else {
            rejected = true;
            // Non-finite error estimates (NaN rhs) shrink maximally.
            let shrink = if err.is_finite() {
                (SAFETY * err.powf(-ERR_EXP)).clamp(MIN_SCALE, 1.0)
            } else {
                MIN_SCALE
            };
            h *= shrink;
            if h.abs() <= f64::EPSILON * t.abs().max(1.0) {
                return Err(StepUnderflow { t_reached: t });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_at(rhs: impl Fn(f64, f64) -> f64, t_end: f64, grid: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        integrate_grid(rhs, 0.0, 1.0, t_end, 1e-10, 1e-10, grid, &mut out).unwrap();
        out
    }

    #[test]
    fn exponential_growth() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let out = solve_at(|_, y| y, 5.0, &grid);
        for (g, v) in grid.iter().zip(&out) {
            assert!((v - g.exp()).abs() < 1e-8 * g.exp(), "at t={g}: {v}");
        }
    }

    #[test]
    fn time_dependent_rhs() {
        // dy/dt = cos(t), y(0) = 1 -> y = 1 + sin(t).
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let out = solve_at(|t, _| t.cos(), 10.0, &grid);
        for (g, v) in grid.iter().zip(&out) {
            assert!((v - (1.0 + g.sin())).abs() < 1e-8, "at t={g}: {v}");
        }
    }

    #[test]
    fn stationary_rhs_stays_put() {
        let grid = [0.0, 1.0, 7.5, 40.0, 100.0];
        let out = solve_at(|_, _| 0.0, 100.0, &grid);
        assert!(out.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn non_finite_rhs_reports_step_underflow() {
        // NaN error estimates reject every step until h underflows.
        let mut out = [0.0];
        let err = integrate_grid(|_, _| f64::NAN, 0.0, 1.0, 1.0, 1e-10, 1e-10, &[1.0], &mut out)
            .unwrap_err();
        assert!(err.t_reached < 1.0);
    }

    #[test]
    fn dense_output_between_large_steps() {
        // Flat dynamics force step growth, so most grid points land inside
        // accepted steps and exercise the interpolant.
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        let mut out = vec![0.0; grid.len()];
        integrate_grid(|t, _| (-t).exp(), 0.0, 1.0, 100.0, 1e-10, 1e-10, &grid, &mut out)
            .unwrap();
        for (g, v) in grid.iter().zip(&out) {
            let exact = 2.0 - (-g).exp();
            assert!((v - exact).abs() < 1e-8, "at t={g}: {v} vs {exact}");
        }
    }
}
