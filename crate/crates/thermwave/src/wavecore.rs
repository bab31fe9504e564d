//! Thermal-wave primitives for layered coating systems.
//!
//! Harmonic surface heating at angular frequency `omega` drives a thermal
//! wave `exp(-x/mu) exp(i(omega t - x/mu))` into the part. The diffusion
//! length `mu = sqrt(2 alpha / omega)` sets the penetration depth, so low
//! modulation frequencies probe deep layers and high frequencies stay near
//! the surface. At each interface the wave is partially reflected and
//! transmitted with coefficients set by the effusivity ratio; the surface
//! temperature is the superposition of all round trips. All of that folds
//! into a single complex effective reflection coefficient per interface,
//! computed bottom-up from the substrate.

use num_complex::Complex64;

use crate::error::{non_negative_finite, positive_finite, Error};
use crate::Result;

/// Order-of-magnitude thermal effusivity of still air, W·s^1/2/(m^2·K).
///
/// Used as the default ambient effusivity when a stack does not specify one.
pub const AIR_EFFUSIVITY: f64 = 6.0;

/// Thermal transport properties of one homogeneous material.
///
/// Diffusivity and effusivity are the quantities the wave model consumes.
/// Conductivity and volumetric heat capacity are kept when the material was
/// specified that way (`alpha = k/c`, `e = sqrt(k c)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProperties {
    conductivity: Option<f64>,
    volumetric_heat_capacity: Option<f64>,
    diffusivity: f64,
    effusivity: f64,
}

impl MaterialProperties {
    /// Build from diffusivity (m^2/s) and effusivity (W·s^1/2/(m^2·K)).
    pub fn from_diffusivity_effusivity(diffusivity: f64, effusivity: f64) -> Result<Self> {
        if !positive_finite(diffusivity) {
            return Err(Error::Domain(format!(
                "thermal diffusivity must be positive and finite, got {diffusivity}"
            )));
        }
        if !positive_finite(effusivity) {
            return Err(Error::Domain(format!(
                "thermal effusivity must be positive and finite, got {effusivity}"
            )));
        }
        Ok(Self {
            conductivity: None,
            volumetric_heat_capacity: None,
            diffusivity,
            effusivity,
        })
    }

    /// Build from conductivity k (W/(m·K)) and volumetric heat capacity
    /// c (J/(m^3·K)); derives `alpha = k/c` and `e = sqrt(k c)`.
    pub fn from_conductivity_capacity(conductivity: f64, capacity: f64) -> Result<Self> {
        if !positive_finite(conductivity) {
            return Err(Error::Domain(format!(
                "thermal conductivity must be positive and finite, got {conductivity}"
            )));
        }
        if !positive_finite(capacity) {
            return Err(Error::Domain(format!(
                "volumetric heat capacity must be positive and finite, got {capacity}"
            )));
        }
        Ok(Self {
            conductivity: Some(conductivity),
            volumetric_heat_capacity: Some(capacity),
            diffusivity: conductivity / capacity,
            effusivity: (conductivity * capacity).sqrt(),
        })
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn effusivity(&self) -> f64 {
        self.effusivity
    }

    pub fn conductivity(&self) -> Option<f64> {
        self.conductivity
    }

    pub fn volumetric_heat_capacity(&self) -> Option<f64> {
        self.volumetric_heat_capacity
    }
}

/// One coating layer: material plus thickness in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub material: MaterialProperties,
    pub thickness: f64,
}

impl Layer {
    pub fn new(material: MaterialProperties, thickness: f64) -> Self {
        Self {
            material,
            thickness,
        }
    }
}

/// An ordered coating stack: layers top-down, over a thermally thick
/// substrate, exposed to an ambient medium above.
///
/// The substrate only contributes through its effusivity (its thickness and
/// diffusivity never enter because nothing reflected below it returns).
#[derive(Debug, Clone, PartialEq)]
pub struct CoatingStack {
    layers: Vec<Layer>,
    substrate_effusivity: f64,
    ambient_effusivity: f64,
}

impl CoatingStack {
    /// Build a stack, requiring every layer thickness to be strictly
    /// positive. Zero-thickness layers are only accepted through
    /// [`CoatingStack::with_degenerate_layers`].
    pub fn new(
        layers: Vec<Layer>,
        substrate_effusivity: f64,
        ambient_effusivity: f64,
    ) -> Result<Self> {
        let stack = Self::with_degenerate_layers(layers, substrate_effusivity, ambient_effusivity)?;
        if let Some(i) = stack.degenerate_layer_indices().first() {
            return Err(Error::Validation(format!(
                "layer {} has zero thickness; use with_degenerate_layers to allow collapsed layers",
                i + 1
            )));
        }
        Ok(stack)
    }

    /// Build a stack permitting zero-thickness layers. The propagation
    /// factor of a zero-thickness layer is 1, so the recursion composes the
    /// two adjacent interfaces directly. Callers should surface a warning:
    /// the physical model assumes distinct layers.
    pub fn with_degenerate_layers(
        layers: Vec<Layer>,
        substrate_effusivity: f64,
        ambient_effusivity: f64,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation(
                "a coating stack needs at least one layer".into(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if !non_negative_finite(layer.thickness) {
                return Err(Error::Validation(format!(
                    "layer {} thickness must be finite and non-negative, got {}",
                    i + 1,
                    layer.thickness
                )));
            }
        }
        if !positive_finite(substrate_effusivity) {
            return Err(Error::Domain(format!(
                "substrate effusivity must be positive and finite, got {substrate_effusivity}"
            )));
        }
        if !positive_finite(ambient_effusivity) {
            return Err(Error::Domain(format!(
                "ambient effusivity must be positive and finite, got {ambient_effusivity}"
            )));
        }
        Ok(Self {
            layers,
            substrate_effusivity,
            ambient_effusivity,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn substrate_effusivity(&self) -> f64 {
        self.substrate_effusivity
    }

    pub fn ambient_effusivity(&self) -> f64 {
        self.ambient_effusivity
    }

    /// Indices (0-based) of zero-thickness layers.
    pub fn degenerate_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.thickness == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn thicknesses(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.thickness).collect()
    }

    /// Copy of this stack with all layer thicknesses replaced.
    pub fn with_thicknesses(&self, thicknesses: &[f64]) -> Result<Self> {
        if thicknesses.len() != self.layers.len() {
            return Err(Error::Domain(format!(
                "expected {} thicknesses, got {}",
                self.layers.len(),
                thicknesses.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .zip(thicknesses)
            .map(|(l, &t)| Layer::new(l.material, t))
            .collect();
        Self::with_degenerate_layers(layers, self.substrate_effusivity, self.ambient_effusivity)
    }

    /// Copy of this stack with layer diffusivities and all non-ambient
    /// effusivities replaced. `effusivities` holds the n layer values
    /// followed by the substrate value.
    pub fn with_properties(&self, diffusivities: &[f64], effusivities: &[f64]) -> Result<Self> {
        let n = self.layers.len();
        if diffusivities.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} diffusivities, got {}",
                diffusivities.len()
            )));
        }
        if effusivities.len() != n + 1 {
            return Err(Error::Domain(format!(
                "expected {} effusivities (layers plus substrate), got {}",
                n + 1,
                effusivities.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Ok(Layer::new(
                    MaterialProperties::from_diffusivity_effusivity(
                        diffusivities[i],
                        effusivities[i],
                    )?,
                    l.thickness,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_degenerate_layers(layers, effusivities[n], self.ambient_effusivity)
    }
}

/// Complex thermal wave number `sigma = (1+i)/mu` with the diffusion length
/// it derives from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexWaveNumber {
    pub sigma: Complex64,
    pub diffusion_length: f64,
}

/// Reflection/transmission coefficients of one interface, for a wave
/// traveling from the `from` medium into the `to` medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceCoefficients {
    /// Thermal refraction index `b = e_to / e_from`.
    pub refraction_index: f64,
    /// Reflection coefficient `R = (1 - b) / (1 + b)`.
    pub reflection: f64,
    /// Transmission coefficient `T = 1 + R = 2 / (1 + b)`.
    pub transmission: f64,
}

/// Complex surface-temperature amplitude with its polar decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceResponse {
    /// Normalized complex amplitude at the surface.
    pub complex_amplitude: Complex64,
    /// Magnitude, relative to the source scale.
    pub amplitude: f64,
    /// Phase angle in radians, in (-pi, pi].
    pub phase: f64,
}

impl SurfaceResponse {
    /// Phase including the -pi/4 lag of the surface temperature behind the
    /// excitation, for comparison against raw demodulated data. The
    /// normalized [`SurfaceResponse::phase`] excludes this lag.
    pub fn raw_phase(&self) -> f64 {
        wrap_phase(self.phase - std::f64::consts::FRAC_PI_4)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    if phi > -PI && phi <= PI {
        return phi;
    }
    let mut w = phi % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Thermal diffusion length `mu = sqrt(2 alpha / omega)` in meters.
pub fn diffusion_length(diffusivity: f64, omega: f64) -> Result<f64> {
    if !positive_finite(diffusivity) {
        return Err(Error::Domain(format!(
            "diffusivity must be positive and finite, got {diffusivity}"
        )));
    }
    if !positive_finite(omega) {
        return Err(Error::Domain(format!(
            "angular frequency must be positive and finite, got {omega}"
        )));
    }
    Ok((2.0 * diffusivity / omega).sqrt())
}

/// Complex wave number `sigma = (1+i) sqrt(omega / (2 alpha)) = (1+i)/mu`.
pub fn wave_number(diffusivity: f64, omega: f64) -> Result<ComplexWaveNumber> {
    let mu = diffusion_length(diffusivity, omega)?;
    Ok(ComplexWaveNumber {
        sigma: Complex64::new(1.0 / mu, 1.0 / mu),
        diffusion_length: mu,
    })
}

/// Interface coefficients for a wave traveling from effusivity `e_from`
/// into effusivity `e_to`. Swapping the arguments negates the reflection.
pub fn interface_coefficients(e_from: f64, e_to: f64) -> Result<InterfaceCoefficients> {
    if !positive_finite(e_from) {
        return Err(Error::Domain(format!(
            "effusivity must be positive and finite, got {e_from}"
        )));
    }
    if !positive_finite(e_to) {
        return Err(Error::Domain(format!(
            "effusivity must be positive and finite, got {e_to}"
        )));
    }
    let b = e_to / e_from;
    let r = (1.0 - b) / (1.0 + b);
    Ok(InterfaceCoefficients {
        refraction_index: b,
        reflection: r,
        transmission: 1.0 + r,
    })
}

/// Downward interface reflection coefficients R_1..R_n of a stack: R_j is
/// taken from layer j into the medium below (layer j+1, or the substrate
/// under the bottom layer).
pub(crate) fn downward_reflections(stack: &CoatingStack) -> Result<Vec<f64>> {
    let layers = stack.layers();
    let n = layers.len();
    (0..n)
        .map(|j| {
            let e_from = layers[j].material.effusivity();
            let e_to = if j + 1 < n {
                layers[j + 1].material.effusivity()
            } else {
                stack.substrate_effusivity()
            };
            Ok(interface_coefficients(e_from, e_to)?.reflection)
        })
        .collect()
}

/// Effective reflection coefficient seen from inside the top layer,
/// summarizing every wave train below the first interface.
///
/// Computed bottom-up: the deepest coefficient is the plain substrate
/// reflection, and each layer above folds the one below through
/// `(R_j + G e) / (1 + R_j G e)` with `e = exp(-2 sigma_{j+1} L_{j+1})`.
pub fn effective_reflection(stack: &CoatingStack, omega: f64) -> Result<Complex64> {
    let refl = downward_reflections(stack)?;
    let layers = stack.layers();
    let n = layers.len();
    let mut gamma = Complex64::new(refl[n - 1], 0.0);
    for j in (0..n - 1).rev() {
        let below = &layers[j + 1];
        let sigma = wave_number(below.material.diffusivity(), omega)?.sigma;
        let decay = (-2.0 * sigma * below.thickness).exp();
        let ge = gamma * decay;
        gamma = (refl[j] + ge) / (1.0 + refl[j] * ge);
    }
    Ok(gamma)
}

/// Normalized complex surface-temperature amplitude of a stack at angular
/// frequency `omega`.
///
/// `source_scale` is the positive real prefactor combining source intensity
/// and surface transmission; the phase does not depend on it.
pub fn surface_response(
    stack: &CoatingStack,
    omega: f64,
    source_scale: f64,
) -> Result<SurfaceResponse> {
    if !positive_finite(source_scale) {
        return Err(Error::Domain(format!(
            "source scale must be positive and finite, got {source_scale}"
        )));
    }
    let top = &stack.layers()[0];
    let surface =
        interface_coefficients(top.material.effusivity(), stack.ambient_effusivity())?.reflection;
    let gamma = effective_reflection(stack, omega)?;
    let sigma = wave_number(top.material.diffusivity(), omega)?.sigma;
    let decay = (-2.0 * sigma * top.thickness).exp();
    let ge = gamma * decay;
    let denominator = 1.0 - surface * ge;
    if denominator.norm() < 1e-300 {
        return Err(Error::SingularDenominator {
            magnitude: denominator.norm(),
        });
    }
    let t = source_scale * (1.0 + ge) / denominator;
    Ok(SurfaceResponse {
        complex_amplitude: t,
        amplitude: t.norm(),
        phase: t.arg(),
    })
}

/// Explicit one-coating phase angle.
///
/// With `x = -2 L1/mu1`, returns the four-quadrant arc-tangent of
/// `(1+R0) R1 e^x sin x` over `1 + (1-R0) R1 e^x cos x - R1^2 R0 e^{2x}`,
/// which lands in the same branch as `arg` of the general surface response.
pub fn one_layer_phase_closed_form(r0: f64, r1: f64, thickness: f64, mu: f64) -> f64 {
    let x = -2.0 * thickness / mu;
    let ex = x.exp();
    let numerator = (1.0 + r0) * r1 * ex * x.sin();
    let denominator = 1.0 + (1.0 - r0) * r1 * ex * x.cos() - r1 * r1 * r0 * (2.0 * x).exp();
    numerator.atan2(denominator)
}

/// Explicit one-coating amplitude, `source_scale` times the magnitude of
/// the normalized surface response.
pub fn one_layer_amplitude_closed_form(
    r0: f64,
    r1: f64,
    thickness: f64,
    mu: f64,
    source_scale: f64,
) -> f64 {
    let x = -2.0 * thickness / mu;
    let ex = x.exp();
    let re = 1.0 + r1 * (1.0 - r0) * ex * x.cos() - r1 * r1 * r0 * (2.0 * x).exp();
    let im = r1 * (1.0 + r0) * ex * x.sin();
    let denominator = (1.0 - r0 * r1 * ex * x.cos()).powi(2) + (r0 * r1 * ex * x.sin()).powi(2);
    source_scale * (re * re + im * im).sqrt() / denominator
}
