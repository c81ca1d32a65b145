//! Nelder-Mead downhill simplex in unconstrained coordinates.
//!
//! Standard reflection/expansion/contraction/shrink moves; callers enforce
//! positivity via parameter transforms, so the optimizer itself is
//! unconstrained and deterministic.

const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Simplex diameter dropped below the requested tolerance.
    pub converged: bool,
    /// Max distance from the best vertex to any other at termination.
    pub final_diameter: f64,
}

/// Minimizes `f` starting from `x0`, stepping `step` along each coordinate to
/// build the initial simplex. Convergence is declared when the max distance
/// from the best vertex to any other falls below `diameter_tol`.
pub fn minimize(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    diameter_tol: f64,
    max_iter: usize,
) -> NelderMeadResult {
    let dim = x0.len();
    assert!(dim >= 1, "need at least one parameter");

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }

    let diameter_of = |simplex: &[(Vec<f64>, f64)]| -> f64 {
        simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        if diameter_of(&simplex) < diameter_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(x, _)| x[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let fr = f(&reflected);

        if fr < simplex[0].1 {
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + GAMMA * (c - w))
                .collect();
            let fe = f(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted: Vec<f64> = if fr < worst.1 {
                centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + RHO * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + RHO * (w - c))
                    .collect()
            };
            let fc = f(&contracted);
            if fc < fr.min(worst.1) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + SIGMA * (*xi - bi);
                    }
                    *v = f(x);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let final_diameter = diameter_of(&simplex);
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult { x, value, iterations, converged, final_diameter }
}
