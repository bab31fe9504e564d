//! Stack configuration files.
//!
//! TOML with unit-suffixed keys. Layer materials take either the
//! (`diffusivity_m2_s`, `effusivity_SI`) pair or the (`conductivity_W_mK`,
//! `volumetric_heat_capacity_J_m3K`) pair; giving all four is accepted only
//! when they are consistent. A layer thickness may be the marker string
//! `"?"` in fit templates. The optional top-level `frequencies_hz` array
//! must appear before the first section, per TOML rules.
//!
//! ```toml
//! frequencies_hz = [0.5, 1.0, 2.0, 4.0]
//!
//! [ambient]
//! effusivity_SI = 6.0
//!
//! [[layers]]
//! name = "basecoat"
//! thickness_m = 3.0e-5
//! diffusivity_m2_s = 1.2e-7
//! effusivity_SI = 850.0
//!
//! [substrate]
//! effusivity_SI = 24000.0
//!
//! [noise]
//! sigma_deg = 0.1
//! seed = 42
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{non_negative_finite, Error, ParseError};
use crate::forward::FrequencyGrid;
use crate::wavecore::{CoatingStack, Layer, MaterialProperties, AIR_EFFUSIVITY};
use crate::Result;

/// Map a byte offset in `src` to 1-based line and column.
pub(crate) fn locate(src: &str, byte: usize) -> (usize, usize) {
    let byte = byte.min(src.len());
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in src.char_indices() {
        if i >= byte {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

pub(crate) fn toml_parse_error(path: &Path, src: &str, err: toml::de::Error) -> ParseError {
    let mut parse = ParseError::new(path, err.message().to_string());
    if let Some(span) = err.span() {
        let (line, col) = locate(src, span.start);
        parse = parse.at(line, col);
    }
    parse
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ThicknessValue {
    Known(f64),
    Marker(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: Option<String>,
    thickness_m: ThicknessValue,
    diffusivity_m2_s: Option<f64>,
    #[serde(rename = "effusivity_SI")]
    effusivity_si: Option<f64>,
    #[serde(rename = "conductivity_W_mK")]
    conductivity_w_mk: Option<f64>,
    #[serde(rename = "volumetric_heat_capacity_J_m3K")]
    volumetric_heat_capacity_j_m3k: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEffusivity {
    #[serde(rename = "effusivity_SI")]
    effusivity_si: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma_deg: f64,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStackConfig {
    frequencies_hz: Option<Vec<f64>>,
    ambient: Option<RawEffusivity>,
    layers: Vec<RawLayer>,
    substrate: RawEffusivity,
    noise: Option<RawNoise>,
}

/// One parsed layer; `thickness_m` is `None` when the file marked it `"?"`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: Option<String>,
    pub material: MaterialProperties,
    pub thickness_m: Option<f64>,
}

/// Noise section of a stack config, degrees at the file boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_deg: f64,
    pub seed: u64,
}

/// Parsed stack configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    pub layers: Vec<LayerSpec>,
    pub substrate_effusivity: f64,
    pub ambient_effusivity: f64,
    pub frequencies_hz: Option<Vec<f64>>,
    pub noise: Option<NoiseSpec>,
}

/// Placeholder thickness substituted for `"?"` markers in templates; always
/// overwritten by the fit.
const TEMPLATE_THICKNESS: f64 = 1e-5;

fn material_from_raw(raw: &RawLayer, index: usize, path: &Path) -> Result<MaterialProperties> {
    let which = format!("layer {}", index + 1);
    match (
        raw.diffusivity_m2_s,
        raw.effusivity_si,
        raw.conductivity_w_mk,
        raw.volumetric_heat_capacity_j_m3k,
    ) {
        (Some(alpha), Some(e), None, None) => {
            MaterialProperties::from_diffusivity_effusivity(alpha, e)
        }
        (None, None, Some(k), Some(c)) => MaterialProperties::from_conductivity_capacity(k, c),
        (Some(alpha), Some(e), Some(k), Some(c)) => {
            let derived = MaterialProperties::from_conductivity_capacity(k, c)?;
            let alpha_ok = (derived.diffusivity() - alpha).abs() <= 1e-12 * alpha.abs();
            let e_ok = (derived.effusivity() - e).abs() <= 1e-12 * e.abs();
            if !alpha_ok || !e_ok {
                return Err(ParseError::new(
                    path,
                    format!(
                        "{which}: diffusivity/effusivity disagree with conductivity/capacity \
                         (derived {:e} m2/s and {:e} SI)",
                        derived.diffusivity(),
                        derived.effusivity()
                    ),
                )
                .into());
            }
            Ok(derived)
        }
        _ => Err(ParseError::new(
            path,
            format!(
                "{which}: specify either diffusivity_m2_s + effusivity_SI or \
                 conductivity_W_mK + volumetric_heat_capacity_J_m3K"
            ),
        )
        .into()),
    }
}

impl StackConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = read_to_string(path)?;
        Self::parse(&src, path)
    }

    /// Parse config text; `path` is only used in diagnostics.
    pub fn parse(src: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let raw: RawStackConfig =
            toml::from_str(src).map_err(|e| toml_parse_error(&path, src, e))?;
        if raw.layers.is_empty() {
            return Err(ParseError::new(&path, "at least one [[layers]] entry is required").into());
        }
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (i, raw_layer) in raw.layers.iter().enumerate() {
            let material = material_from_raw(raw_layer, i, &path)?;
            let thickness_m = match &raw_layer.thickness_m {
                ThicknessValue::Known(t) => {
                    if !non_negative_finite(*t) {
                        return Err(ParseError::new(
                            &path,
                            format!("layer {}: thickness_m must be non-negative, got {t}", i + 1),
                        )
                        .into());
                    }
                    Some(*t)
                }
                ThicknessValue::Marker(s) if s == "?" => None,
                ThicknessValue::Marker(s) => {
                    return Err(ParseError::new(
                        &path,
                        format!(
                            "layer {}: thickness_m must be a number or \"?\", got \"{s}\"",
                            i + 1
                        ),
                    )
                    .into());
                }
            };
            layers.push(LayerSpec {
                name: raw_layer.name.clone(),
                material,
                thickness_m,
            });
        }
        if let Some(freqs) = &raw.frequencies_hz {
            FrequencyGrid::new(freqs.clone())
                .map_err(|e| ParseError::new(&path, format!("frequencies_hz: {e}")))?;
        }
        if let Some(noise) = &raw.noise {
            if !non_negative_finite(noise.sigma_deg) {
                return Err(ParseError::new(
                    &path,
                    format!("noise.sigma_deg must be non-negative, got {}", noise.sigma_deg),
                )
                .into());
            }
        }
        Ok(Self {
            layers,
            substrate_effusivity: raw.substrate.effusivity_si,
            ambient_effusivity: raw
                .ambient
                .map(|a| a.effusivity_si)
                .unwrap_or(AIR_EFFUSIVITY),
            frequencies_hz: raw.frequencies_hz,
            noise: raw.noise.map(|n| NoiseSpec {
                sigma_deg: n.sigma_deg,
                seed: n.seed,
            }),
        })
    }

    /// 0-based indices of layers whose thickness is the `"?"` marker.
    pub fn unknown_thickness_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.thickness_m.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// Build the stack; every thickness must be given.
    pub fn stack(&self) -> Result<CoatingStack> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let thickness = spec.thickness_m.ok_or_else(|| {
                Error::Validation(format!(
                    "layer {} thickness is \"?\"; a concrete value is required here",
                    i + 1
                ))
            })?;
            layers.push(Layer::new(spec.material, thickness));
        }
        CoatingStack::with_degenerate_layers(
            layers,
            self.substrate_effusivity,
            self.ambient_effusivity,
        )
    }

    /// Build a template stack for fitting: `"?"` thicknesses get a
    /// placeholder value. Returns the stack and the free layer indices.
    pub fn template(&self) -> Result<(CoatingStack, Vec<usize>)> {
        let free = self.unknown_thickness_indices();
        let layers = self
            .layers
            .iter()
            .map(|spec| Layer::new(spec.material, spec.thickness_m.unwrap_or(TEMPLATE_THICKNESS)))
            .collect();
        let stack = CoatingStack::with_degenerate_layers(
            layers,
            self.substrate_effusivity,
            self.ambient_effusivity,
        )?;
        Ok((stack, free))
    }

    /// The frequency grid, when the file declares one.
    pub fn grid(&self) -> Result<Option<FrequencyGrid>> {
        match &self.frequencies_hz {
            Some(freqs) => Ok(Some(FrequencyGrid::new(freqs.clone())?)),
            None => Ok(None),
        }
    }
}
