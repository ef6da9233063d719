//! Projected gradient ascent over the long-only simplex.
//!
//! The search direction is the normalized gradient and the step length
//! adapts: it doubles after an accepted move and halves until a move
//! improves the objective. Both the acceptance rule and the stopping rule
//! compare objective values only through inequalities that are invariant
//! to multiplying the objective by a positive constant.

use ndarray::Array1;

/// Euclidean projection onto `{w : w_i >= 0, sum w_i = 1}` by the sort and
/// threshold method: find the largest prefix of the descending sort whose
/// running mean offset keeps entries positive, subtract it, clip at zero.
pub fn project_to_simplex(v: &Array1<f64>) -> Array1<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut running = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        running += uj;
        let t = (running - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.mapv(|x| (x - tau).max(0.0))
}

#[derive(Debug, Clone)]
pub(crate) struct AscentOutcome {
    pub x: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const STEP_INIT: f64 = 0.25;
const STEP_MIN: f64 = 1e-13;
const STEP_MAX: f64 = 1e6;

/// Maximizes `value` over the simplex from `start`.
///
/// Stops when no step of at least `STEP_MIN` improves the objective, when
/// the relative improvement drops to `tolerance`, or after `max_iterations`
/// gradient steps (only the last case reports `converged = false`).
pub(crate) fn maximize_on_simplex<V, G>(
    start: &Array1<f64>,
    value: V,
    gradient: G,
    max_iterations: usize,
    tolerance: f64,
) -> AscentOutcome
where
    V: Fn(&Array1<f64>) -> f64,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut x = project_to_simplex(start);
    let mut f = value(&x);
    let mut step = STEP_INIT;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations {
        let g = gradient(&x);
        let norm = g.dot(&g).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            converged = true;
            break;
        }
        let dir = g / norm;

        let mut accepted = None;
        let mut t = step;
        while t >= STEP_MIN {
            let cand = project_to_simplex(&(&x + &(&dir * t)));
            let fc = value(&cand);
            if fc > f {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;

        match accepted {
            None => {
                // No uphill move at any admissible step length.
                converged = true;
                break;
            }
            Some((cand, fc)) => {
                let improvement = fc - f;
                x = cand;
                let done = improvement <= tolerance * fc.abs();
                f = fc;
                step = (t * 2.0).min(STEP_MAX);
                if done {
                    converged = true;
                    break;
                }
            }
        }
    }

    AscentOutcome {
        x,
        objective: f,
        iterations,
        converged,
    }
}
