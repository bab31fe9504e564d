//! Serializable report structures written by the fitting and calibration
//! commands.

use std::path::Path;

use serde::Serialize;

use crate::calibration::CalibrationReport;
use crate::error::Error;
use crate::inverse::FitResult;
use crate::Result;

/// One fitted thickness in a fit report.
#[derive(Debug, Clone, Serialize)]
pub struct FittedLayer {
    /// 1-based layer index, counted from the surface.
    pub layer: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub estimate_m: f64,
}

/// Per-start summary in a fit report.
#[derive(Debug, Clone, Serialize)]
pub struct FitStartSummary {
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

/// Report written by the thickness-fit command.
#[derive(Debug, Clone, Serialize)]
pub struct FitReportFile {
    pub converged: bool,
    pub objective: f64,
    pub jacobian_condition: f64,
    pub thicknesses: Vec<FittedLayer>,
    pub starts: Vec<FitStartSummary>,
}

impl FitReportFile {
    /// Assemble from a solver result; `free_layers` maps fitted parameters
    /// back to 1-based layer indices, `names` carries optional layer names.
    pub fn from_result(
        result: &FitResult,
        free_layers: &[usize],
        names: &[Option<String>],
    ) -> Self {
        let thicknesses = free_layers
            .iter()
            .zip(&result.parameters)
            .map(|(&layer, &estimate)| FittedLayer {
                layer: layer + 1,
                name: names.get(layer).cloned().flatten(),
                estimate_m: estimate,
            })
            .collect();
        let starts = result
            .trace
            .iter()
            .map(|t| FitStartSummary {
                converged: t.converged,
                iterations: t.iterations,
                objective: t.objective,
            })
            .collect();
        Self {
            converged: result.converged,
            objective: result.objective,
            jacobian_condition: result.jacobian_condition,
            thicknesses,
            starts,
        }
    }
}

/// Per-sample entry in a calibration report.
#[derive(Debug, Clone, Serialize)]
pub struct SampleFitEntry {
    /// 1-based index into the manifest sample list.
    pub sample: usize,
    pub fitted_thicknesses_m: Vec<f64>,
    pub known_thicknesses_m: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

/// Report written by the calibration command.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReportFile {
    pub passed: bool,
    pub threshold_m2: f64,
    pub validation_error_m2: f64,
    pub per_layer_rms_m: Vec<f64>,
    pub per_layer_max_relative: Vec<f64>,
    pub diffusivities_m2_s: Vec<f64>,
    #[serde(rename = "effusivities_SI")]
    pub effusivities_si: Vec<f64>,
    pub step1_objective: f64,
    pub step1_converged: bool,
    pub step1_condition: f64,
    pub warnings: Vec<String>,
    pub samples: Vec<SampleFitEntry>,
}

impl CalibrationReportFile {
    pub fn from_report(
        report: &CalibrationReport,
        threshold_m2: f64,
        split: usize,
        known: &[Vec<f64>],
    ) -> Self {
        let samples = report
            .sample_fits
            .iter()
            .enumerate()
            .map(|(j, fit)| SampleFitEntry {
                sample: split + j + 1,
                fitted_thicknesses_m: fit.fitted_thicknesses.clone(),
                known_thicknesses_m: known[j].clone(),
                objective: fit.objective,
                converged: fit.converged,
            })
            .collect();
        Self {
            passed: report.passed,
            threshold_m2,
            validation_error_m2: report.validation.total_squared_error,
            per_layer_rms_m: report.validation.per_layer_rms.clone(),
            per_layer_max_relative: report.validation.per_layer_max_relative.clone(),
            diffusivities_m2_s: report.estimate.diffusivities.clone(),
            effusivities_si: report.estimate.effusivities.clone(),
            step1_objective: report.estimate.objective,
            step1_converged: report.estimate.converged,
            step1_condition: report.estimate.condition,
            warnings: report.warnings.clone(),
            samples,
        }
    }
}

/// Serialize a report as TOML and write it.
pub fn write_toml_report<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(report)
        .map_err(|e| Error::Validation(format!("cannot serialize report: {e}")))?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
