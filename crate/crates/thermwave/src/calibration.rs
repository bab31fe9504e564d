//! Two-step calibration for coating systems with unknown thermal
//! properties.
//!
//! Fitting properties and thicknesses simultaneously from one spectrum is
//! ambiguous: scaling every diffusivity and effusivity by `c^2` while
//! scaling thicknesses by `c` leaves the thermal contrasts and every
//! `L/sqrt(alpha)` unchanged. The way out is a batch of samples with known
//! thicknesses: freezing those thicknesses breaks the scaling family, so a
//! first pass can estimate the properties, and a second pass fits
//! thicknesses on held-out samples to confirm the calibration.
//!
//! STEP 1 minimizes the stacked residual over the training set S1 jointly
//! in the `2n+1` properties. STEP 2 feeds the estimate into per-sample
//! thickness fits on the confirmation set S2 and reports the summed squared
//! thickness error.

use crate::error::{non_negative_finite, positive_finite, Error};
use crate::forward::PhaseSpectrum;
use crate::inverse::{
    default_start_count, latin_hypercube_starts, solve, FitProblem,
};
use crate::wavecore::{CoatingStack, Layer, MaterialProperties};
use crate::Result;

/// One calibration sample: a known thickness vector and the spectrum
/// measured on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub known_thicknesses: Vec<f64>,
    pub spectrum: PhaseSpectrum,
}

/// An ordered batch of calibration samples split into a training set S1
/// (first `split` samples) and a confirmation set S2 (the rest).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBatch {
    samples: Vec<CalibrationSample>,
    split: usize,
    ambient_effusivity: f64,
}

impl CalibrationBatch {
    /// `split` is the training-set size k1 and must satisfy `1 < k1 < k`.
    /// All samples must share the layer count and the frequency grid.
    pub fn new(
        samples: Vec<CalibrationSample>,
        split: usize,
        ambient_effusivity: f64,
    ) -> Result<Self> {
        let k = samples.len();
        if !(split > 1 && split < k) {
            return Err(Error::Validation(format!(
                "split k1 = {split} must satisfy 1 < k1 < k with k = {k} samples"
            )));
        }
        if !positive_finite(ambient_effusivity) {
            return Err(Error::Domain(format!(
                "ambient effusivity must be positive and finite, got {ambient_effusivity}"
            )));
        }
        let n = samples[0].known_thicknesses.len();
        if n == 0 {
            return Err(Error::Validation("samples carry empty thickness vectors".into()));
        }
        let grid = samples[0].spectrum.grid().clone();
        for (j, sample) in samples.iter().enumerate() {
            if sample.known_thicknesses.len() != n {
                return Err(Error::Validation(format!(
                    "sample {} has {} thicknesses, expected {n}",
                    j + 1,
                    sample.known_thicknesses.len()
                )));
            }
            if sample.spectrum.grid() != &grid {
                return Err(Error::Validation(format!(
                    "sample {} uses a different frequency grid than sample 1",
                    j + 1
                )));
            }
            for (i, &t) in sample.known_thicknesses.iter().enumerate() {
                if !positive_finite(t) {
                    return Err(Error::Validation(format!(
                        "sample {} layer {} thickness must be positive, got {t}",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            split,
            ambient_effusivity,
        })
    }

    pub fn samples(&self) -> &[CalibrationSample] {
        &self.samples
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn layer_count(&self) -> usize {
        self.samples[0].known_thicknesses.len()
    }

    pub fn ambient_effusivity(&self) -> f64 {
        self.ambient_effusivity
    }

    /// Training set S1.
    pub fn training(&self) -> &[CalibrationSample] {
        &self.samples[..self.split]
    }

    /// Confirmation set S2.
    pub fn confirmation(&self) -> &[CalibrationSample] {
        &self.samples[self.split..]
    }
}

/// Search boxes for the property parameters; broad physical ranges by
/// default, override per material system when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyBounds {
    /// Diffusivity box in m^2/s.
    pub diffusivity: (f64, f64),
    /// Effusivity box in W·s^1/2/(m^2·K).
    pub effusivity: (f64, f64),
}

impl Default for PropertyBounds {
    fn default() -> Self {
        Self {
            diffusivity: (1e-9, 1e-3),
            effusivity: (10.0, 3e4),
        }
    }
}

/// Knobs of the calibration pipeline. The acceptance threshold has no
/// default: how small the confirmation error must be depends on the
/// accuracy requirements of the process being calibrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub property_bounds: PropertyBounds,
    /// Thickness box for the STEP-2 fits, in meters.
    pub thickness_bounds: (f64, f64),
    /// Pass/fail threshold on the summed squared thickness error, m^2.
    pub acceptance_threshold: f64,
    /// Multi-start count; `None` picks the layer-count default.
    pub start_count: Option<usize>,
    pub seed: u64,
}

impl CalibrationSettings {
    pub fn new(acceptance_threshold: f64) -> Self {
        Self {
            property_bounds: PropertyBounds::default(),
            thickness_bounds: (1e-7, 1e-2),
            acceptance_threshold,
            start_count: None,
            seed: 0,
        }
    }
}

/// STEP-1 output: the estimated property vector with fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyEstimate {
    pub diffusivities: Vec<f64>,
    /// Layer effusivities followed by the substrate effusivity.
    pub effusivities: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub condition: f64,
}

/// One STEP-2 confirmation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessFitOutcome {
    pub fitted_thicknesses: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

/// Confirmation-set error: summed squared thickness deviation with
/// per-layer breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    /// `sum_j ||fitted_j - known_j||^2` in m^2.
    pub total_squared_error: f64,
    /// Per-layer RMS deviation over the confirmation samples, m.
    pub per_layer_rms: Vec<f64>,
    /// Per-layer worst relative deviation.
    pub per_layer_max_relative: Vec<f64>,
}

/// Full calibration outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub estimate: PropertyEstimate,
    pub sample_fits: Vec<ThicknessFitOutcome>,
    pub validation: ValidationSummary,
    pub passed: bool,
    pub warnings: Vec<String>,
}

fn mid(bounds: (f64, f64)) -> f64 {
    (bounds.0 * bounds.1).sqrt()
}

fn template_stack(batch: &CalibrationBatch, settings: &CalibrationSettings) -> Result<CoatingStack> {
    let n = batch.layer_count();
    let alpha = mid(settings.property_bounds.diffusivity);
    let e = mid(settings.property_bounds.effusivity);
    let material = MaterialProperties::from_diffusivity_effusivity(alpha, e)?;
    let thickness = mid(settings.thickness_bounds);
    let layers = vec![Layer::new(material, thickness); n];
    CoatingStack::new(layers, e, batch.ambient_effusivity())
}

fn design_warnings(batch: &CalibrationBatch) -> Vec<String> {
    let mut warnings = Vec::new();
    let training = batch.training();
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for sample in training {
        if !distinct.contains(&&sample.known_thicknesses) {
            distinct.push(&sample.known_thicknesses);
        }
    }
    if distinct.len() < 2 {
        warnings.push(
            "degenerate calibration design: all training samples share one thickness vector; \
             the property estimate may sit anywhere on the scaling family"
                .to_string(),
        );
    }
    let n = batch.layer_count();
    let m = training[0].spectrum.len();
    if m * training.len() < 2 * n + 1 {
        warnings.push(format!(
            "underdetermined calibration: {} training phase values for {} unknown properties",
            m * training.len(),
            2 * n + 1
        ));
    }
    warnings
}

/// STEP 1: estimate the `2n+1` thermal properties from the training set,
/// thicknesses frozen at their known values.
///
/// Returns design warnings alongside; non-convergence is flagged on the
/// estimate instead of raised.
pub fn step1_estimate_properties(
    batch: &CalibrationBatch,
    settings: &CalibrationSettings,
) -> Result<(PropertyEstimate, Vec<String>)> {
    let n = batch.layer_count();
    let warnings = design_warnings(batch);
    let template = template_stack(batch, settings)?;

    let mut lower = vec![settings.property_bounds.diffusivity.0; n];
    let mut upper = vec![settings.property_bounds.diffusivity.1; n];
    lower.extend(vec![settings.property_bounds.effusivity.0; n + 1]);
    upper.extend(vec![settings.property_bounds.effusivity.1; n + 1]);

    let count = settings.start_count.unwrap_or_else(|| default_start_count(n));
    let starts = latin_hypercube_starts(&lower, &upper, count, settings.seed)?;

    let targets = batch
        .training()
        .iter()
        .map(|s| (s.known_thicknesses.clone(), s.spectrum.clone()))
        .collect();
    let problem = FitProblem::property_fit(template, targets, lower, upper, starts)?;
    let result = solve(&problem)?;

    let estimate = PropertyEstimate {
        diffusivities: result.parameters[..n].to_vec(),
        effusivities: result.parameters[n..].to_vec(),
        objective: result.objective,
        converged: result.converged,
        condition: result.jacobian_condition,
    };
    Ok((estimate, warnings))
}

/// STEP 2: fit the thickness vector of every confirmation sample with the
/// properties frozen at the STEP-1 estimate. Per-sample non-convergence is
/// flagged and the batch continues.
pub fn step2_fit_thicknesses(
    batch: &CalibrationBatch,
    estimate: &PropertyEstimate,
    settings: &CalibrationSettings,
) -> Result<Vec<ThicknessFitOutcome>> {
    let n = batch.layer_count();
    let template = template_stack(batch, settings)?
        .with_properties(&estimate.diffusivities, &estimate.effusivities)?;
    let lower = vec![settings.thickness_bounds.0; n];
    let upper = vec![settings.thickness_bounds.1; n];
    let count = settings.start_count.unwrap_or_else(|| default_start_count(n));

    let mut outcomes = Vec::with_capacity(batch.confirmation().len());
    for (j, sample) in batch.confirmation().iter().enumerate() {
        let starts = latin_hypercube_starts(
            &lower,
            &upper,
            count,
            settings.seed.wrapping_add(j as u64 + 1),
        )?;
        let problem = FitProblem::thickness_fit(
            template.clone(),
            sample.spectrum.clone(),
            lower.clone(),
            upper.clone(),
            starts,
        )?;
        let result = solve(&problem)?;
        outcomes.push(ThicknessFitOutcome {
            fitted_thicknesses: result.parameters,
            objective: result.objective,
            converged: result.converged,
        });
    }
    Ok(outcomes)
}

/// Summed squared thickness error over matched sample pairs, with
/// per-layer RMS and worst relative deviation.
pub fn validation_error(known: &[Vec<f64>], fitted: &[Vec<f64>]) -> Result<ValidationSummary> {
    if known.len() != fitted.len() {
        return Err(Error::Domain(format!(
            "{} known vs {} fitted thickness vectors",
            known.len(),
            fitted.len()
        )));
    }
    if known.is_empty() {
        return Err(Error::Domain("no samples to validate".into()));
    }
    let n = known[0].len();
    let mut total = 0.0;
    let mut per_layer_sq = vec![0.0; n];
    let mut per_layer_max_rel = vec![0.0f64; n];
    for (j, (k, f)) in known.iter().zip(fitted).enumerate() {
        if k.len() != n || f.len() != n {
            return Err(Error::Domain(format!(
                "sample {} thickness vectors do not match the layer count {n}",
                j + 1
            )));
        }
        for i in 0..n {
            let d = f[i] - k[i];
            total += d * d;
            per_layer_sq[i] += d * d;
            per_layer_max_rel[i] = per_layer_max_rel[i].max(d.abs() / k[i]);
        }
    }
    let count = known.len() as f64;
    let per_layer_rms = per_layer_sq.iter().map(|s| (s / count).sqrt()).collect();
    Ok(ValidationSummary {
        total_squared_error: total,
        per_layer_rms,
        per_layer_max_relative: per_layer_max_rel,
    })
}

/// Run both steps and assemble the report.
pub fn calibrate(
    batch: &CalibrationBatch,
    settings: &CalibrationSettings,
) -> Result<CalibrationReport> {
    if !non_negative_finite(settings.acceptance_threshold) {
        return Err(Error::Validation(format!(
            "acceptance threshold must be non-negative, got {}",
            settings.acceptance_threshold
        )));
    }
    let (estimate, mut warnings) = step1_estimate_properties(batch, settings)?;
    if !estimate.converged {
        warnings.push("property estimation did not meet the convergence criteria".to_string());
    }
    let sample_fits = step2_fit_thicknesses(batch, &estimate, settings)?;
    for (j, fit) in sample_fits.iter().enumerate() {
        if !fit.converged {
            warnings.push(format!(
                "confirmation sample {} thickness fit did not converge",
                batch.split() + j + 1
            ));
        }
    }
    let known: Vec<Vec<f64>> = batch
        .confirmation()
        .iter()
        .map(|s| s.known_thicknesses.clone())
        .collect();
    let fitted: Vec<Vec<f64>> = sample_fits
        .iter()
        .map(|f| f.fitted_thicknesses.clone())
        .collect();
    let validation = validation_error(&known, &fitted)?;
    let passed = validation.total_squared_error <= settings.acceptance_threshold;
    Ok(CalibrationReport {
        estimate,
        sample_fits,
        validation,
        passed,
        warnings,
    })
}
