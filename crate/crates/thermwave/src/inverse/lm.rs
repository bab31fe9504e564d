//! Damped Gauss-Newton (Levenberg-Marquardt) core used by [`super::solve`].
//!
//! Works on box-constrained coordinates supplied by the caller (the solver
//! passes log-parameters). Steps solve `(J^T J + lambda diag(J^T J)) d =
//! -J^T r`; candidates are clamped into the box and only accepted when they
//! strictly reduce the squared residual norm, so the objective is
//! non-increasing across accepted iterations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::Result;

use super::SolveSettings;

/// Result of one local minimization run.
#[derive(Debug, Clone)]
pub(crate) struct LocalRun {
    pub point: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub objective_history: Vec<f64>,
}

/// Finite-difference Jacobian with per-coordinate steps, staying inside the
/// box `[lo, hi]`. Central differences where both sides fit, one-sided at a
/// wall; returns the indices that fell back to one-sided differences.
pub(crate) fn fd_jacobian<F>(
    eval: &F,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    steps: &[f64],
) -> Result<(DMatrix<f64>, Vec<usize>)>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let dim = x.len();
    let mut one_sided = Vec::new();
    let mut base: Option<DVector<f64>> = None;
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut probe = x.to_vec();
    for i in 0..dim {
        let room_up = hi[i] - x[i];
        let room_down = x[i] - lo[i];
        let mut h = steps[i];
        let column = if h <= room_up && h <= room_down {
            probe[i] = x[i] + h;
            let fp = eval(&probe)?;
            probe[i] = x[i] - h;
            let fm = eval(&probe)?;
            probe[i] = x[i];
            (fp - fm) / (2.0 * h)
        } else {
            one_sided.push(i);
            if base.is_none() {
                base = Some(eval(x)?);
            }
            let f0 = base.as_ref().unwrap();
            if h <= room_up {
                probe[i] = x[i] + h;
                let fp = eval(&probe)?;
                probe[i] = x[i];
                (fp - f0) / h
            } else if h <= room_down {
                probe[i] = x[i] - h;
                let fm = eval(&probe)?;
                probe[i] = x[i];
                (f0 - fm) / h
            } else {
                // box narrower than the step on both sides
                h = room_up.max(room_down);
                if h <= 0.0 {
                    return Err(crate::Error::Domain(format!(
                        "parameter {} is pinned by its bounds; cannot difference",
                        i + 1
                    )));
                }
                if room_up >= room_down {
                    probe[i] = x[i] + h;
                    let fp = eval(&probe)?;
                    probe[i] = x[i];
                    (fp - f0) / h
                } else {
                    probe[i] = x[i] - h;
                    let fm = eval(&probe)?;
                    probe[i] = x[i];
                    (f0 - fm) / h
                }
            }
        };
        columns.push(column);
    }
    let rows = columns.first().map(|c| c.len()).unwrap_or(0);
    let mut jac = DMatrix::zeros(rows, dim);
    for (i, col) in columns.iter().enumerate() {
        jac.set_column(i, col);
    }
    Ok((jac, one_sided))
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Run the damped iteration from one start point.
pub(crate) fn minimize<F>(
    eval: &F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    settings: &SolveSettings,
) -> Result<LocalRun>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let dim = start.len();
    let mut x = start.to_vec();
    clamp_into(&mut x, lo, hi);
    let mut residual = eval(&x)?;
    let mut objective = residual.norm_squared();
    let mut history = vec![objective];
    let mut lambda = -1.0;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let steps: Vec<f64> = x.iter().map(|v| 1e-6 * v.abs().max(1.0)).collect();
        let (jac, _) = fd_jacobian(eval, &x, lo, hi, &steps)?;
        let gradient = 2.0 * jac.transpose() * &residual;
        if gradient.amax() < settings.gradient_tol * objective.max(1.0) {
            return Ok(LocalRun {
                point: x,
                objective,
                converged: true,
                iterations,
                objective_history: history,
            });
        }
        let jtj = jac.transpose() * &jac;
        let max_diag = jtj.diagonal().amax();
        if lambda < 0.0 {
            lambda = 1e-3 * if max_diag > 0.0 { max_diag } else { 1.0 };
        }
        let x_norm = DVector::from_column_slice(&x).norm();
        loop {
            let mut damped = jtj.clone();
            for i in 0..dim {
                let d = jtj[(i, i)].max(1e-12 * max_diag).max(f64::MIN_POSITIVE);
                damped[(i, i)] = jtj[(i, i)] + lambda * d;
            }
            let delta = match Cholesky::new(damped) {
                Some(chol) => chol.solve(&(-0.5 * &gradient)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            if delta.norm() / x_norm.max(1.0) < settings.step_tol {
                return Ok(LocalRun {
                    point: x,
                    objective,
                    converged: true,
                    iterations,
                    objective_history: history,
                });
            }
            let mut candidate = x.clone();
            for i in 0..dim {
                candidate[i] += delta[i];
            }
            clamp_into(&mut candidate, lo, hi);
            let moved: f64 = candidate
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if moved / x_norm.max(1.0) < settings.step_tol {
                // clamping pinned the step against the box
                return Ok(LocalRun {
                    point: x,
                    objective,
                    converged: true,
                    iterations,
                    objective_history: history,
                });
            }
            let cand_residual = eval(&candidate)?;
            let cand_objective = cand_residual.norm_squared();
            if cand_objective < objective {
                x = candidate;
                residual = cand_residual;
                objective = cand_objective;
                history.push(objective);
                lambda = (lambda / 3.0).max(1e-16);
                break;
            }
            lambda *= 4.0;
            if !lambda.is_finite() {
                // only reachable through non-finite residuals
                return Ok(LocalRun {
                    point: x,
                    objective,
                    converged: false,
                    iterations,
                    objective_history: history,
                });
            }
        }
    }

    Ok(LocalRun {
        point: x,
        objective,
        converged: false,
        iterations,
        objective_history: history,
    })
}
