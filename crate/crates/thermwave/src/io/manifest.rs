//! Calibration batch manifests.
//!
//! TOML listing the samples of one coating setup, the S1/S2 split, and the
//! acceptance threshold (required: how small is small enough depends on the
//! process). `split_k1` defaults to two thirds of the batch, rounded up.
//! Sample CSV paths resolve relative to the manifest location.
//!
//! ```toml
//! n_layers = 2
//! split_k1 = 5
//! threshold_m2 = 1.0e-12
//!
//! [ambient]
//! effusivity_SI = 6.0
//!
//! [bounds]                       # optional overrides
//! diffusivity_m2_s = [1.0e-9, 1.0e-3]
//! effusivity_SI = [10.0, 30000.0]
//! thickness_m = [1.0e-7, 1.0e-2]
//!
//! [fit]                          # optional solver knobs
//! starts = 16
//! seed = 7
//!
//! [[samples]]
//! thicknesses_m = [3.0e-5, 2.0e-5]
//! phase_csv = "sample_01.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibration::{CalibrationBatch, CalibrationSample, CalibrationSettings};
use crate::error::{non_negative_finite, Error, ParseError};
use crate::wavecore::AIR_EFFUSIVITY;
use crate::Result;

use super::phase_csv::read_phase_csv;
use super::stack_config::{read_to_string, toml_parse_error};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEffusivity {
    #[serde(rename = "effusivity_SI")]
    effusivity_si: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    diffusivity_m2_s: Option<[f64; 2]>,
    #[serde(rename = "effusivity_SI")]
    effusivity_si: Option<[f64; 2]>,
    thickness_m: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    starts: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    thicknesses_m: Vec<f64>,
    phase_csv: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    n_layers: usize,
    split_k1: Option<usize>,
    threshold_m2: f64,
    ambient: Option<RawEffusivity>,
    bounds: Option<RawBounds>,
    fit: Option<RawFit>,
    samples: Vec<RawSample>,
}

/// A loaded manifest: the batch with its spectra plus the settings the
/// manifest declared.
#[derive(Debug, Clone)]
pub struct ManifestLoad {
    pub batch: CalibrationBatch,
    pub settings: CalibrationSettings,
}

fn checked_interval(name: &str, pair: [f64; 2], path: &Path) -> Result<(f64, f64)> {
    let ordered = pair[0] > 0.0 && pair[1].is_finite() && pair[1] > pair[0];
    if !ordered {
        return Err(ParseError::new(
            path,
            format!("bounds.{name} must satisfy 0 < lower < upper, got [{}, {}]", pair[0], pair[1]),
        )
        .into());
    }
    Ok((pair[0], pair[1]))
}

/// Load and validate a manifest, reading every referenced phase CSV.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ManifestLoad> {
    let path = path.as_ref();
    let src = read_to_string(path)?;
    let raw: RawManifest = toml::from_str(&src).map_err(|e| toml_parse_error(path, &src, e))?;

    if raw.n_layers == 0 {
        return Err(ParseError::new(path, "n_layers must be at least 1").into());
    }
    let k = raw.samples.len();
    let split = raw.split_k1.unwrap_or((2 * k).div_ceil(3));
    if !(split > 1 && split < k) {
        return Err(ParseError::new(
            path,
            format!("split_k1 = {split} must satisfy 1 < k1 < k with k = {k} samples"),
        )
        .into());
    }
    if !non_negative_finite(raw.threshold_m2) {
        return Err(ParseError::new(
            path,
            format!("threshold_m2 must be non-negative, got {}", raw.threshold_m2),
        )
        .into());
    }

    let base = path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(k);
    for (j, raw_sample) in raw.samples.iter().enumerate() {
        if raw_sample.thicknesses_m.len() != raw.n_layers {
            return Err(ParseError::new(
                path,
                format!(
                    "sample {}: {} thicknesses for n_layers = {}",
                    j + 1,
                    raw_sample.thicknesses_m.len(),
                    raw.n_layers
                ),
            )
            .into());
        }
        let csv_path = if raw_sample.phase_csv.is_absolute() {
            raw_sample.phase_csv.clone()
        } else {
            base.join(&raw_sample.phase_csv)
        };
        if !csv_path.exists() {
            return Err(ParseError::new(
                path,
                format!(
                    "sample {}: referenced file {} does not exist",
                    j + 1,
                    csv_path.display()
                ),
            )
            .into());
        }
        let spectrum = read_phase_csv(&csv_path)?;
        samples.push(CalibrationSample {
            known_thicknesses: raw_sample.thicknesses_m.clone(),
            spectrum,
        });
    }

    let ambient = raw
        .ambient
        .map(|a| a.effusivity_si)
        .unwrap_or(AIR_EFFUSIVITY);
    let batch = CalibrationBatch::new(samples, split, ambient).map_err(|e| match e {
        Error::Validation(msg) | Error::Domain(msg) => ParseError::new(path, msg).into(),
        other => other,
    })?;

    let mut settings = CalibrationSettings::new(raw.threshold_m2);
    if let Some(bounds) = raw.bounds {
        if let Some(pair) = bounds.diffusivity_m2_s {
            settings.property_bounds.diffusivity = checked_interval("diffusivity_m2_s", pair, path)?;
        }
        if let Some(pair) = bounds.effusivity_si {
            settings.property_bounds.effusivity = checked_interval("effusivity_SI", pair, path)?;
        }
        if let Some(pair) = bounds.thickness_m {
            settings.thickness_bounds = checked_interval("thickness_m", pair, path)?;
        }
    }
    if let Some(fit) = raw.fit {
        if let Some(starts) = fit.starts {
            if starts == 0 {
                return Err(ParseError::new(path, "fit.starts must be at least 1").into());
            }
            settings.start_count = Some(starts);
        }
        if let Some(seed) = fit.seed {
            settings.seed = seed;
        }
    }

    Ok(ManifestLoad { batch, settings })
}
