//! Bounded nonlinear least squares: recover layer thicknesses, thermal
//! properties, or both from measured phase spectra.
//!
//! The solver is a multi-start Levenberg-Marquardt iteration run in
//! log-parameter coordinates (every fitted quantity is positive and spans
//! decades), with candidate steps clamped into the bound box. Multi-start
//! matters here: single-frequency single-start fits routinely land in
//! spurious minima, so problems should carry several starts (see
//! [`latin_hypercube_starts`]) and more frequencies than unknowns.

mod lm;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{positive_finite, within, Error};
use crate::forward::{forward_phases, PhaseSpectrum};
use crate::wavecore::CoatingStack;
use crate::Result;

/// Which group of stack quantities the parameter vector controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// Layer thicknesses, materials frozen. Parameters: one thickness per
    /// free layer, in meters.
    Thicknesses,
    /// Thermal properties, thicknesses frozen per target. Parameters:
    /// `[alpha_1..alpha_n, e_1..e_{n+1}]` (substrate effusivity last).
    Properties,
    /// Everything at once: `[L_1..L_n, alpha_1..alpha_n, e_1..e_{n+1}]`.
    /// Subject to the scaling ambiguity; exists mainly to demonstrate it.
    Joint,
}

/// One residual block: a measured spectrum, with the thickness vector it was
/// measured at when thicknesses are frozen (property fits).
#[derive(Debug, Clone, PartialEq)]
pub struct FitTarget {
    pub known_thicknesses: Option<Vec<f64>>,
    pub spectrum: PhaseSpectrum,
}

/// Iteration limits and convergence tolerances for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub max_iterations: usize,
    /// Converged when the objective-gradient infinity norm drops below
    /// `gradient_tol * max(1, objective)`.
    pub gradient_tol: f64,
    /// Converged when the relative step falls below this.
    pub step_tol: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-12,
            step_tol: 1e-12,
        }
    }
}

/// A bounded least-squares problem over a coating-stack template.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    template: CoatingStack,
    parameterization: Parameterization,
    free_layers: Vec<usize>,
    targets: Vec<FitTarget>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    starts: Vec<Vec<f64>>,
    settings: SolveSettings,
}

/// Outcome of one start of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub parameters: Vec<f64>,
    /// Objective after every accepted step (first entry: at the start).
    pub objective_history: Vec<f64>,
}

/// Best parameters over all starts with per-start diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameters: Vec<f64>,
    /// Squared 2-norm of the residuals at the returned parameters.
    pub objective: f64,
    /// True when at least one start met a convergence criterion.
    pub converged: bool,
    pub trace: Vec<StartTrace>,
    /// Ratio of extreme singular values of the log-parameter Jacobian at
    /// the optimum; large values flag poorly identified directions.
    pub jacobian_condition: f64,
    /// Trace indices whose objectives tie with the best within tolerance.
    pub co_optimal: Vec<usize>,
}

impl FitProblem {
    /// Fit every layer thickness of `template` against one measured
    /// spectrum.
    pub fn thickness_fit(
        template: CoatingStack,
        spectrum: PhaseSpectrum,
        lower: Vec<f64>,
        upper: Vec<f64>,
        starts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let free = (0..template.layer_count()).collect();
        Self::partial_thickness_fit(template, free, spectrum, lower, upper, starts)
    }

    /// Fit a subset of layer thicknesses, the others frozen at the template
    /// values. `free_layers` holds 0-based layer indices; parameters follow
    /// the same order.
    pub fn partial_thickness_fit(
        template: CoatingStack,
        free_layers: Vec<usize>,
        spectrum: PhaseSpectrum,
        lower: Vec<f64>,
        upper: Vec<f64>,
        starts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if free_layers.is_empty() {
            return Err(Error::Validation("no free thicknesses to fit".into()));
        }
        let mut seen = vec![false; template.layer_count()];
        for &i in &free_layers {
            if i >= template.layer_count() {
                return Err(Error::Validation(format!(
                    "free layer index {i} out of range for {} layers",
                    template.layer_count()
                )));
            }
            if seen[i] {
                return Err(Error::Validation(format!("duplicate free layer index {i}")));
            }
            seen[i] = true;
        }
        let problem = Self {
            template,
            parameterization: Parameterization::Thicknesses,
            free_layers,
            targets: vec![FitTarget {
                known_thicknesses: None,
                spectrum,
            }],
            lower,
            upper,
            starts,
            settings: SolveSettings::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Fit the `2n+1` thermal properties jointly against several targets,
    /// each with its own known thickness vector.
    pub fn property_fit(
        template: CoatingStack,
        targets: Vec<(Vec<f64>, PhaseSpectrum)>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        starts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Validation("property fit needs at least one target".into()));
        }
        let n = template.layer_count();
        for (thicknesses, _) in &targets {
            if thicknesses.len() != n {
                return Err(Error::Validation(format!(
                    "target thickness vector has {} entries for {n} layers",
                    thicknesses.len()
                )));
            }
        }
        let problem = Self {
            template,
            parameterization: Parameterization::Properties,
            free_layers: Vec::new(),
            targets: targets
                .into_iter()
                .map(|(known_thicknesses, spectrum)| FitTarget {
                    known_thicknesses: Some(known_thicknesses),
                    spectrum,
                })
                .collect(),
            lower,
            upper,
            starts,
            settings: SolveSettings::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Fit thicknesses and properties simultaneously against one spectrum.
    pub fn joint_fit(
        template: CoatingStack,
        spectrum: PhaseSpectrum,
        lower: Vec<f64>,
        upper: Vec<f64>,
        starts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let problem = Self {
            template,
            parameterization: Parameterization::Joint,
            free_layers: Vec::new(),
            targets: vec![FitTarget {
                known_thicknesses: None,
                spectrum,
            }],
            lower,
            upper,
            starts,
            settings: SolveSettings::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dimension();
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(Error::Validation(format!(
                "expected {dim} bound pairs, got {} lower / {} upper",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..dim {
            if !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::Validation(format!("non-finite bound for parameter {}", i + 1)));
            }
            if self.lower[i] <= 0.0 {
                return Err(Error::Validation(format!(
                    "lower bound of parameter {} must be positive, got {}",
                    i + 1,
                    self.lower[i]
                )));
            }
            if self.lower[i] >= self.upper[i] {
                return Err(Error::Validation(format!(
                    "bounds of parameter {} are not ordered: [{}, {}]",
                    i + 1,
                    self.lower[i],
                    self.upper[i]
                )));
            }
        }
        if self.starts.is_empty() {
            return Err(Error::Validation("at least one start is required".into()));
        }
        for (s, start) in self.starts.iter().enumerate() {
            if start.len() != dim {
                return Err(Error::Validation(format!(
                    "start {} has {} entries, expected {dim}",
                    s + 1,
                    start.len()
                )));
            }
            for (i, &value) in start.iter().enumerate() {
                if !within(value, self.lower[i], self.upper[i]) {
                    return Err(Error::Validation(format!(
                        "start {} parameter {} = {value} lies outside [{}, {}]",
                        s + 1,
                        i + 1,
                        self.lower[i],
                        self.upper[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    pub fn template(&self) -> &CoatingStack {
        &self.template
    }

    pub fn starts(&self) -> &[Vec<f64>] {
        &self.starts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn settings(&self) -> &SolveSettings {
        &self.settings
    }

    pub fn set_settings(&mut self, settings: SolveSettings) {
        self.settings = settings;
    }

    /// Number of fitted parameters.
    pub fn dimension(&self) -> usize {
        let n = self.template.layer_count();
        match self.parameterization {
            Parameterization::Thicknesses => self.free_layers.len(),
            Parameterization::Properties => 2 * n + 1,
            Parameterization::Joint => 3 * n + 1,
        }
    }

    /// Total residual count over all targets.
    pub fn residual_len(&self) -> usize {
        self.targets.iter().map(|t| t.spectrum.len()).sum()
    }

    fn check_bounds(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dimension() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.dimension(),
                params.len()
            )));
        }
        for (i, &param) in params.iter().enumerate() {
            if !within(param, self.lower[i], self.upper[i]) {
                return Err(Error::Domain(format!(
                    "parameter {} = {} lies outside [{}, {}]",
                    i + 1,
                    param,
                    self.lower[i],
                    self.upper[i]
                )));
            }
        }
        Ok(())
    }

    fn stack_for(&self, params: &[f64], target: &FitTarget) -> Result<CoatingStack> {
        let n = self.template.layer_count();
        match self.parameterization {
            Parameterization::Thicknesses => {
                let mut thicknesses = self.template.thicknesses();
                for (slot, &layer) in self.free_layers.iter().enumerate() {
                    thicknesses[layer] = params[slot];
                }
                self.template.with_thicknesses(&thicknesses)
            }
            Parameterization::Properties => {
                let known = target
                    .known_thicknesses
                    .as_ref()
                    .expect("property targets carry thicknesses");
                self.template
                    .with_properties(&params[..n], &params[n..])?
                    .with_thicknesses(known)
            }
            Parameterization::Joint => self
                .template
                .with_thicknesses(&params[..n])?
                .with_properties(&params[n..2 * n], &params[2 * n..]),
        }
    }

    fn residuals_unchecked(&self, params: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.residual_len());
        for target in &self.targets {
            let stack = self.stack_for(params, target)?;
            let model = forward_phases(&stack, target.spectrum.grid())?;
            out.extend(
                model
                    .phases()
                    .iter()
                    .zip(target.spectrum.phases())
                    .map(|(m, d)| m - d),
            );
        }
        Ok(out)
    }
}

/// Residual vector `model - measurement` at `params` (must be in bounds).
pub fn residuals(problem: &FitProblem, params: &[f64]) -> Result<Vec<f64>> {
    problem.check_bounds(params)?;
    problem.residuals_unchecked(params)
}

/// Squared 2-norm of the residuals.
pub fn objective(problem: &FitProblem, params: &[f64]) -> Result<f64> {
    Ok(residuals(problem, params)?.iter().map(|r| r * r).sum())
}

/// Finite-difference Jacobian of the residuals in raw parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEstimate {
    /// `residual_len x dimension` matrix of partial derivatives.
    pub matrix: DMatrix<f64>,
    /// Parameters that had to fall back to one-sided differences because a
    /// central step would have crossed a bound.
    pub one_sided: Vec<usize>,
}

/// Central-difference Jacobian with the default relative step `1e-6`.
pub fn jacobian(problem: &FitProblem, params: &[f64]) -> Result<JacobianEstimate> {
    jacobian_with_step(problem, params, 1e-6)
}

/// Central-difference Jacobian with step `rel_step * max(|p_i|, scale_i)`
/// per parameter, where `scale_i` is the geometric mean of the bounds.
/// Falls back to one-sided differences at a bound and reports which
/// parameters did.
pub fn jacobian_with_step(
    problem: &FitProblem,
    params: &[f64],
    rel_step: f64,
) -> Result<JacobianEstimate> {
    problem.check_bounds(params)?;
    if !positive_finite(rel_step) {
        return Err(Error::Domain(format!(
            "relative step must be positive and finite, got {rel_step}"
        )));
    }
    let steps: Vec<f64> = params
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let scale = (problem.lower[i] * problem.upper[i]).sqrt();
            rel_step * p.abs().max(scale)
        })
        .collect();
    let eval = |p: &[f64]| -> Result<DVector<f64>> {
        problem.residuals_unchecked(p).map(DVector::from)
    };
    let (matrix, one_sided) =
        lm::fd_jacobian(&eval, params, &problem.lower, &problem.upper, &steps)?;
    Ok(JacobianEstimate { matrix, one_sided })
}

/// Ratio of extreme singular values; `inf` for a rank-deficient matrix.
pub fn condition_estimate(matrix: &DMatrix<f64>) -> f64 {
    let sv = matrix.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else if max > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Minimize the problem from every start and keep the best outcome.
///
/// Starts run independently; the merge picks the lowest objective among
/// converged starts (among all starts when none converged, with the result
/// flagged). Objectives tying within an absolute `1e-18` plus relative
/// `1e-9` band count as co-optimal, and the tie breaks deterministically to
/// the candidate closest (in log coordinates) to the centroid of the
/// starts, so the merge does not depend on start order.
pub fn solve(problem: &FitProblem) -> Result<FitResult> {
    let dim = problem.dimension();
    let lo_ln: Vec<f64> = problem.lower.iter().map(|v| v.ln()).collect();
    let hi_ln: Vec<f64> = problem.upper.iter().map(|v| v.ln()).collect();
    let eval = |y: &[f64]| -> Result<DVector<f64>> {
        let params: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        problem.residuals_unchecked(&params).map(DVector::from)
    };

    let mut trace = Vec::with_capacity(problem.starts.len());
    for start in &problem.starts {
        let y0: Vec<f64> = start.iter().map(|v| v.ln()).collect();
        let run = lm::minimize(&eval, &y0, &lo_ln, &hi_ln, &problem.settings)?;
        trace.push(StartTrace {
            start: start.clone(),
            converged: run.converged,
            iterations: run.iterations,
            objective: run.objective,
            parameters: run.point.iter().map(|v| v.exp()).collect(),
            objective_history: run.objective_history,
        });
    }

    let any_converged = trace.iter().any(|t| t.converged);
    let candidates: Vec<usize> = (0..trace.len())
        .filter(|&i| trace[i].converged || !any_converged)
        .collect();
    let best_objective = candidates
        .iter()
        .map(|&i| trace[i].objective)
        .fold(f64::INFINITY, f64::min);
    let tie_band = 1e-18 + 1e-9 * best_objective;
    let co_optimal: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| trace[i].objective <= best_objective + tie_band)
        .collect();

    let mut centroid = vec![0.0; dim];
    for start in &problem.starts {
        for (sum, value) in centroid.iter_mut().zip(start) {
            *sum += value.ln();
        }
    }
    for c in centroid.iter_mut() {
        *c /= problem.starts.len() as f64;
    }
    let distance = |idx: usize| -> f64 {
        trace[idx]
            .parameters
            .iter()
            .zip(&centroid)
            .map(|(p, c)| {
                let d = p.ln() - c;
                d * d
            })
            .sum::<f64>()
    };
    let best_index = co_optimal
        .iter()
        .copied()
        .min_by(|&a, &b| {
            distance(a)
                .partial_cmp(&distance(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
        .expect("at least one candidate");

    let best = &trace[best_index];
    let y_best: Vec<f64> = best.parameters.iter().map(|v| v.ln()).collect();
    let steps: Vec<f64> = y_best.iter().map(|v| 1e-6 * v.abs().max(1.0)).collect();
    let (jac_ln, _) = lm::fd_jacobian(&eval, &y_best, &lo_ln, &hi_ln, &steps)?;
    let jacobian_condition = condition_estimate(&jac_ln);

    Ok(FitResult {
        parameters: best.parameters.clone(),
        objective: best.objective,
        converged: any_converged,
        trace,
        jacobian_condition,
        co_optimal,
    })
}

/// Default start count: 8 for up to two layers, 16 beyond.
pub fn default_start_count(layer_count: usize) -> usize {
    if layer_count <= 2 {
        8
    } else {
        16
    }
}

/// Latin-hypercube start points over the bound box, stratified uniformly in
/// log space, reproducible from `seed`.
pub fn latin_hypercube_starts(
    lower: &[f64],
    upper: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if lower.len() != upper.len() {
        return Err(Error::Validation(format!(
            "{} lower bounds vs {} upper bounds",
            lower.len(),
            upper.len()
        )));
    }
    if count == 0 {
        return Err(Error::Validation("start count must be >= 1".into()));
    }
    for i in 0..lower.len() {
        let ordered = positive_finite(lower[i]) && upper[i].is_finite() && upper[i] > lower[i];
        if !ordered {
            return Err(Error::Validation(format!(
                "bounds of parameter {} must satisfy 0 < lower < upper < inf",
                i + 1
            )));
        }
    }
    let dim = lower.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![vec![0.0; dim]; count];
    for i in 0..dim {
        let lo = lower[i].ln();
        let span = upper[i].ln() - lo;
        let mut cells: Vec<usize> = (0..count).collect();
        cells.shuffle(&mut rng);
        for (s, &cell) in cells.iter().enumerate() {
            let u: f64 = rng.gen();
            let frac = (cell as f64 + u) / count as f64;
            starts[s][i] = (lo + frac * span).exp().clamp(lower[i], upper[i]);
        }
    }
    Ok(starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward_phases, FrequencyGrid};
    use crate::wavecore::{CoatingStack, Layer, MaterialProperties};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn material(alpha: f64, e: f64) -> MaterialProperties {
        MaterialProperties::from_diffusivity_effusivity(alpha, e).unwrap()
    }

    fn stack_n1(ambient: f64) -> CoatingStack {
        CoatingStack::new(
            vec![Layer::new(material(1.2e-7, 850.0), 3e-5)],
            24000.0,
            ambient,
        )
        .unwrap()
    }

    fn stack_n2() -> CoatingStack {
        CoatingStack::new(
            vec![
                Layer::new(material(1.2e-7, 850.0), 3e-5),
                Layer::new(material(2.1e-7, 1450.0), 2e-5),
            ],
            24000.0,
            6.0,
        )
        .unwrap()
    }

    fn thickness_problem(stack: &CoatingStack, m: usize) -> FitProblem {
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, m).unwrap();
        let data = forward_phases(stack, &grid).unwrap();
        let truth = stack.thicknesses();
        let lower: Vec<f64> = truth.iter().map(|t| 0.2 * t).collect();
        let upper: Vec<f64> = truth.iter().map(|t| 1.8 * t).collect();
        let starts = latin_hypercube_starts(&lower, &upper, 8, 42).unwrap();
        FitProblem::thickness_fit(stack.clone(), data, lower, upper, starts).unwrap()
    }

    // --- problem validation ---

    #[test]
    fn problem_validation_rejects_bad_inputs() {
        let stack = stack_n1(6.0);
        let grid = FrequencyGrid::new(vec![1.0, 2.0]).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        // unordered bounds
        assert!(FitProblem::thickness_fit(
            stack.clone(),
            data.clone(),
            vec![1e-4],
            vec![1e-5],
            vec![vec![5e-5]]
        )
        .is_err());
        // negative lower bound
        assert!(FitProblem::thickness_fit(
            stack.clone(),
            data.clone(),
            vec![-1e-5],
            vec![1e-4],
            vec![vec![5e-5]]
        )
        .is_err());
        // start outside bounds
        assert!(FitProblem::thickness_fit(
            stack.clone(),
            data.clone(),
            vec![1e-5],
            vec![1e-4],
            vec![vec![2e-4]]
        )
        .is_err());
        // no starts
        assert!(FitProblem::thickness_fit(
            stack.clone(),
            data.clone(),
            vec![1e-5],
            vec![1e-4],
            vec![]
        )
        .is_err());
        // dimension mismatch in starts
        assert!(FitProblem::thickness_fit(
            stack,
            data,
            vec![1e-5],
            vec![1e-4],
            vec![vec![5e-5, 5e-5]]
        )
        .is_err());
    }

    // --- residuals ---

    #[test]
    fn residuals_vanish_at_truth() {
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 6);
        let r = residuals(&problem, &stack.thicknesses()).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|&v| v == 0.0));
        assert_eq!(objective(&problem, &stack.thicknesses()).unwrap(), 0.0);
    }

    #[test]
    fn residuals_reject_out_of_bounds() {
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 4);
        let mut p = stack.thicknesses();
        p[0] = problem.upper()[0] * 1.01;
        assert!(matches!(residuals(&problem, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn perturbed_thickness_gives_nonzero_objective() {
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 6);
        let mut p = stack.thicknesses();
        p[0] += 1e-6; // +1 um
        let f = objective(&problem, &p).unwrap();
        assert!(f > 0.0);
    }

    fn joint_problem_with_ambient(ambient: f64, m: usize, starts: Vec<Vec<f64>>) -> (CoatingStack, FitProblem) {
        let stack = stack_n1(ambient);
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, m).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        // bounds wide enough to hold the scaled family for c in [0.5, 2]
        let lower = vec![3e-6, 1.2e-8, 100.0, 3000.0];
        let upper = vec![3e-4, 1.2e-6, 7000.0, 200000.0];
        let problem = FitProblem::joint_fit(stack.clone(), data, lower, upper, starts).unwrap();
        (stack, problem)
    }

    fn scaled_joint_params(stack: &CoatingStack, c: f64) -> Vec<f64> {
        vec![
            c * stack.layers()[0].thickness,
            c * c * stack.layers()[0].material.diffusivity(),
            c * c * stack.layers()[0].material.effusivity(),
            c * c * stack.substrate_effusivity(),
        ]
    }

    #[test]
    fn scaling_family_gives_zero_residuals() {
        // with a negligible ambient coupling the scaled parameters
        // reproduce the data exactly
        let (stack, problem) = joint_problem_with_ambient(1e-10, 6, vec![vec![5e-5, 2e-7, 1000.0, 20000.0]]);
        for c in [0.5, 1.3, 2.0] {
            let r = residuals(&problem, &scaled_joint_params(&stack, c)).unwrap();
            let max = r.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(max < 1e-12, "c = {c}: max residual {max}");
        }
    }

    #[test]
    fn objective_constant_along_scaling_curve() {
        let (stack, problem) = joint_problem_with_ambient(1e-10, 6, vec![vec![5e-5, 2e-7, 1000.0, 20000.0]]);
        for k in 0..=20 {
            let c = 0.5 + 1.5 * k as f64 / 20.0;
            let f = objective(&problem, &scaled_joint_params(&stack, c)).unwrap();
            assert!(f < 1e-14, "c = {c}: objective {f}");
        }
    }

    // --- jacobian ---

    #[test]
    fn jacobian_zero_for_transparent_stack() {
        let e = 900.0;
        let stack = CoatingStack::new(
            vec![Layer::new(material(1.2e-7, e), 3e-5)],
            e,
            e,
        )
        .unwrap();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 5).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        let problem = FitProblem::thickness_fit(
            stack.clone(),
            data,
            vec![1e-5],
            vec![1e-4],
            vec![vec![3e-5]],
        )
        .unwrap();
        let jac = jacobian(&problem, &[3e-5]).unwrap();
        assert!(jac.matrix.iter().all(|&v| v == 0.0));
        assert!(jac.one_sided.is_empty());
    }

    #[test]
    fn jacobian_matches_manual_central_difference() {
        let stack = stack_n1(6.0);
        let problem = thickness_problem(&stack, 4);
        let p = vec![3e-5];
        let rel = 1e-6;
        let jac = jacobian_with_step(&problem, &p, rel).unwrap();
        let scale = (problem.lower()[0] * problem.upper()[0]).sqrt();
        let h = rel * p[0].max(scale);
        let rp = residuals(&problem, &[p[0] + h]).unwrap();
        let rm = residuals(&problem, &[p[0] - h]).unwrap();
        for k in 0..rp.len() {
            let manual = (rp[k] - rm[k]) / (2.0 * h);
            assert_eq!(jac.matrix[(k, 0)], manual);
        }
    }

    #[test]
    fn jacobian_step_halving_richardson_ratio() {
        // central differences are second order: halving the step shrinks
        // the truncation error fourfold, so the norm ratio of successive
        // difference matrices sits near 4
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 6);
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..10 {
            let p: Vec<f64> = (0..2)
                .map(|i| rng.gen_range(problem.lower()[i] * 1.4..problem.upper()[i] / 1.4))
                .collect();
            let h = 4e-3;
            let j1 = jacobian_with_step(&problem, &p, h).unwrap().matrix;
            let j2 = jacobian_with_step(&problem, &p, h / 2.0).unwrap().matrix;
            let j4 = jacobian_with_step(&problem, &p, h / 4.0).unwrap().matrix;
            let d1 = (&j1 - &j2).norm();
            let d2 = (&j2 - &j4).norm();
            assert!(d2 > 0.0);
            let ratio = d1 / d2;
            assert!(
                (3.5..=4.5).contains(&ratio),
                "Richardson ratio {ratio} outside [3.5, 4.5] at p = {p:?}"
            );
        }
    }

    #[test]
    fn jacobian_one_sided_fallback_at_bound() {
        let stack = stack_n1(6.0);
        let problem = thickness_problem(&stack, 4);
        let at_edge = vec![problem.lower()[0]];
        let jac = jacobian(&problem, &at_edge).unwrap();
        assert_eq!(jac.one_sided, vec![0]);
    }

    #[test]
    fn joint_jacobian_has_scaling_null_direction() {
        let stack = stack_n1(6.0);
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 6).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        let lower = vec![3e-6, 1.2e-8, 85.0, 2400.0];
        let upper = vec![3e-4, 1.2e-6, 8500.0, 240000.0];
        let truth = vec![3e-5, 1.2e-7, 850.0, 24000.0];
        let problem =
            FitProblem::joint_fit(stack, data, lower, upper, vec![truth.clone()]).unwrap();
        let jac = jacobian(&problem, &truth).unwrap().matrix;
        // tangent of c -> (c L, c^2 alpha, c^2 e) at c = 1
        let v = DVector::from_vec(vec![truth[0], 2.0 * truth[1], 2.0 * truth[2], 2.0 * truth[3]]);
        let jv = &jac * &v;
        let j_norm = jac.norm();
        assert!(jv.norm() <= 1e-6 * j_norm * v.norm());
    }

    // --- solve ---

    #[test]
    fn single_layer_round_trip() {
        let stack = stack_n1(6.0);
        let truth = stack.thicknesses();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 2).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        let lower = vec![0.2 * truth[0]];
        let upper = vec![1.8 * truth[0]];
        let starts = latin_hypercube_starts(&lower, &upper, 8, 1).unwrap();
        let problem = FitProblem::thickness_fit(stack, data, lower, upper, starts).unwrap();
        let result = solve(&problem).unwrap();
        assert!(result.converged);
        let rel = (result.parameters[0] - truth[0]).abs() / truth[0];
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn three_layer_round_trip_with_multistart() {
        let stack = CoatingStack::new(
            vec![
                Layer::new(material(1.2e-7, 850.0), 3e-5),
                Layer::new(material(2.1e-7, 1450.0), 2e-5),
                Layer::new(material(0.8e-7, 600.0), 5e-5),
            ],
            24000.0,
            6.0,
        )
        .unwrap();
        let truth = stack.thicknesses();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 4).unwrap();
        let data = forward_phases(&stack, &grid).unwrap();
        let lower: Vec<f64> = truth.iter().map(|t| 0.2 * t).collect();
        let upper: Vec<f64> = truth.iter().map(|t| 1.8 * t).collect();
        let starts = latin_hypercube_starts(&lower, &upper, 10, 3).unwrap();
        let problem = FitProblem::thickness_fit(stack, data, lower, upper, starts).unwrap();
        let result = solve(&problem).unwrap();
        assert!(result.converged);
        assert!(result.objective < 1e-16);
        for (est, tr) in result.parameters.iter().zip(&truth) {
            assert!((est - tr).abs() / tr < 1e-4);
        }
    }

    #[test]
    fn joint_fit_follows_ambiguity_away_from_truth() {
        // start on the scaled family: the solver settles at an equally good
        // minimum that is not the truth
        let c = 1.3;
        let (stack, problem) =
            joint_problem_with_ambient(1e-10, 6, vec![scaled_joint_params(&stack_n1(1e-10), c)]);
        let result = solve(&problem).unwrap();
        assert!(result.converged);
        assert!(result.objective < 1e-20, "objective {}", result.objective);
        let truth = vec![
            stack.layers()[0].thickness,
            stack.layers()[0].material.diffusivity(),
            stack.layers()[0].material.effusivity(),
            stack.substrate_effusivity(),
        ];
        let distance: f64 = result
            .parameters
            .iter()
            .zip(&truth)
            .map(|(p, t)| (p.ln() - t.ln()).abs())
            .fold(0.0, f64::max);
        assert!(distance > 0.1, "converged back to truth: {distance}");
    }

    #[test]
    fn accepted_objectives_never_increase() {
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 6);
        let result = solve(&problem).unwrap();
        for trace in &result.trace {
            for pair in trace.objective_history.windows(2) {
                assert!(pair[1] <= pair[0]);
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let stack = stack_n2();
        let problem = thickness_problem(&stack, 5);
        let a = solve(&problem).unwrap();
        let b = solve(&problem).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let stack = stack_n2();
        let mut problem = thickness_problem(&stack, 6);
        problem.set_settings(SolveSettings {
            max_iterations: 1,
            ..SolveSettings::default()
        });
        let result = solve(&problem).unwrap();
        assert!(!result.converged);
        assert!(result.trace.iter().all(|t| !t.converged));
        assert!(result.trace.iter().all(|t| t.iterations == 1));
    }

    // --- latin hypercube ---

    #[test]
    fn latin_hypercube_stratifies_each_dimension() {
        let lower = vec![1e-6, 10.0];
        let upper = vec![1e-3, 1e4];
        let count = 16;
        let starts = latin_hypercube_starts(&lower, &upper, count, 5).unwrap();
        assert_eq!(starts.len(), count);
        for i in 0..2 {
            let lo = lower[i].ln();
            let span = upper[i].ln() - lo;
            let mut cells: Vec<usize> = starts
                .iter()
                .map(|s| (((s[i].ln() - lo) / span) * count as f64).floor() as usize)
                .map(|c| c.min(count - 1))
                .collect();
            cells.sort_unstable();
            let expected: Vec<usize> = (0..count).collect();
            assert_eq!(cells, expected, "dimension {i} not stratified");
        }
        // reproducible
        let again = latin_hypercube_starts(&lower, &upper, count, 5).unwrap();
        assert_eq!(starts, again);
    }

    #[test]
    fn default_start_counts() {
        assert_eq!(default_start_count(1), 8);
        assert_eq!(default_start_count(2), 8);
        assert_eq!(default_start_count(3), 16);
        assert_eq!(default_start_count(5), 16);
    }
}
