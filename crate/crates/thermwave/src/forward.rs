//! Forward evaluation of phase spectra over a frequency grid, and synthetic
//! measurement generation with seeded noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{non_negative_finite, positive_finite, Error};
use crate::wavecore::{surface_response, wrap_phase, CoatingStack};
use crate::Result;

/// Strictly increasing, strictly positive modulation frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies_hz: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(frequencies_hz: Vec<f64>) -> Result<Self> {
        if frequencies_hz.is_empty() {
            return Err(Error::Validation(
                "frequency grid needs at least one frequency".into(),
            ));
        }
        for (i, &f) in frequencies_hz.iter().enumerate() {
            if !positive_finite(f) {
                return Err(Error::Validation(format!(
                    "frequency {} must be positive and finite, got {f}",
                    i + 1
                )));
            }
            if i > 0 && f <= frequencies_hz[i - 1] {
                return Err(Error::Validation(format!(
                    "frequencies must be strictly increasing, violated at entry {}",
                    i + 1
                )));
            }
        }
        Ok(Self { frequencies_hz })
    }

    /// Logarithmically spaced grid from `f_min` to `f_max` inclusive.
    ///
    /// Depth sensitivity scales with the diffusion length, i.e. with
    /// `1/sqrt(omega)`, so log spacing spreads the probed depths evenly.
    pub fn log_spaced(f_min: f64, f_max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Validation("frequency count must be >= 1".into()));
        }
        if !positive_finite(f_min) {
            return Err(Error::Validation(format!(
                "minimum frequency must be positive, got {f_min}"
            )));
        }
        if count == 1 {
            return Self::new(vec![f_min]);
        }
        let ordered = f_max.is_finite() && f_max > f_min;
        if !ordered {
            return Err(Error::Validation(format!(
                "maximum frequency must exceed the minimum, got [{f_min}, {f_max}]"
            )));
        }
        let log_min = f_min.ln();
        let step = (f_max.ln() - log_min) / (count - 1) as f64;
        let freqs = (0..count)
            .map(|i| (log_min + step * i as f64).exp())
            .collect();
        Self::new(freqs)
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    /// Angular frequencies `omega = 2 pi f`.
    pub fn angular(&self) -> impl Iterator<Item = f64> + '_ {
        self.frequencies_hz
            .iter()
            .map(|&f| 2.0 * std::f64::consts::PI * f)
    }
}

/// Phase angles over a frequency grid, optionally with the relative
/// amplitudes alongside for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrum {
    grid: FrequencyGrid,
    phases: Vec<f64>,
    amplitudes: Option<Vec<f64>>,
}

impl PhaseSpectrum {
    pub fn new(grid: FrequencyGrid, phases: Vec<f64>, amplitudes: Option<Vec<f64>>) -> Result<Self> {
        if phases.len() != grid.len() {
            return Err(Error::Validation(format!(
                "{} phases for a grid of {} frequencies",
                phases.len(),
                grid.len()
            )));
        }
        for (i, &phi) in phases.iter().enumerate() {
            if !phi.is_finite() || phi <= -std::f64::consts::PI || phi > std::f64::consts::PI {
                return Err(Error::Validation(format!(
                    "phase {} must lie in (-pi, pi], got {phi}",
                    i + 1
                )));
            }
        }
        if let Some(amps) = &amplitudes {
            if amps.len() != grid.len() {
                return Err(Error::Validation(format!(
                    "{} amplitudes for a grid of {} frequencies",
                    amps.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self {
            grid,
            phases,
            amplitudes,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn amplitudes(&self) -> Option<&[f64]> {
        self.amplitudes.as_deref()
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Additive noise description for synthetic measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// Zero-mean Gaussian phase noise with standard deviation `sigma` in
    /// radians, reproducible from `seed`.
    Gaussian { sigma: f64, seed: u64 },
}

/// Evaluate the phase spectrum of a stack over a frequency grid.
///
/// Component `k` is the phase of the surface response at `omega_k`; the
/// amplitude channel is filled alongside. Per-frequency evaluations are
/// independent, so the result does not depend on evaluation order.
pub fn forward_phases(stack: &CoatingStack, grid: &FrequencyGrid) -> Result<PhaseSpectrum> {
    let mut phases = Vec::with_capacity(grid.len());
    let mut amplitudes = Vec::with_capacity(grid.len());
    for omega in grid.angular() {
        let resp = surface_response(stack, omega, 1.0)?;
        phases.push(resp.phase);
        amplitudes.push(resp.amplitude);
    }
    PhaseSpectrum::new(grid.clone(), phases, Some(amplitudes))
}

/// Forward phases plus additive noise, wrapped back into (-pi, pi].
///
/// Each frequency index draws from its own counter-selected stream of a
/// seeded ChaCha generator, so the output is identical for identical seeds
/// no matter how or in what order the components are generated.
pub fn synthesize_measurement(
    stack: &CoatingStack,
    grid: &FrequencyGrid,
    noise: NoiseModel,
) -> Result<PhaseSpectrum> {
    let clean = forward_phases(stack, grid)?;
    match noise {
        NoiseModel::None => Ok(clean),
        NoiseModel::Gaussian { sigma, seed } => {
            if !non_negative_finite(sigma) {
                return Err(Error::Domain(format!(
                    "noise standard deviation must be non-negative and finite, got {sigma}"
                )));
            }
            let phases = clean
                .phases()
                .iter()
                .enumerate()
                .map(|(k, &phi)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    wrap_phase(phi + sigma * z)
                })
                .collect();
            let amplitudes = clean.amplitudes().map(|a| a.to_vec());
            PhaseSpectrum::new(grid.clone(), phases, amplitudes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavecore::{
        diffusion_length, interface_coefficients, one_layer_phase_closed_form, Layer,
        MaterialProperties,
    };
    use std::f64::consts::PI;

    fn material(alpha: f64, e: f64) -> MaterialProperties {
        MaterialProperties::from_diffusivity_effusivity(alpha, e).unwrap()
    }

    fn test_stack() -> CoatingStack {
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

    // --- grid ---

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.5, 1.0, 20.0]).is_ok());
    }

    #[test]
    fn log_spacing_endpoints_and_ratios() {
        let g = FrequencyGrid::log_spaced(0.5, 20.0, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g.frequencies_hz()[0] - 0.5).abs() < 1e-12);
        assert!((g.frequencies_hz()[9] - 20.0).abs() < 1e-12);
        let r0 = g.frequencies_hz()[1] / g.frequencies_hz()[0];
        for w in g.frequencies_hz().windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-9);
        }
        assert_eq!(FrequencyGrid::log_spaced(2.0, 20.0, 1).unwrap().len(), 1);
        assert!(FrequencyGrid::log_spaced(2.0, 1.0, 5).is_err());
    }

    // --- forward phases ---

    #[test]
    fn equal_effusivities_give_zero_vector() {
        let e = 777.0;
        let stack = CoatingStack::new(
            vec![Layer::new(material(1e-7, e), 3e-5)],
            e,
            e,
        )
        .unwrap();
        let grid = FrequencyGrid::log_spaced(0.5, 50.0, 8).unwrap();
        let spec = forward_phases(&stack, &grid).unwrap();
        assert!(spec.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_frequency_equals_surface_response() {
        let stack = test_stack();
        let grid = FrequencyGrid::new(vec![2.5]).unwrap();
        let spec = forward_phases(&stack, &grid).unwrap();
        let resp = surface_response(&stack, 2.0 * PI * 2.5, 1.0).unwrap();
        assert_eq!(spec.phases()[0], resp.phase);
        assert_eq!(spec.amplitudes().unwrap()[0], resp.amplitude);
    }

    #[test]
    fn one_layer_grid_matches_closed_form() {
        let alpha = 1.2e-7;
        let e0 = 6.0;
        let e1 = 850.0;
        let e2 = 24000.0;
        let l1 = 3e-5;
        let stack = CoatingStack::new(vec![Layer::new(material(alpha, e1), l1)], e2, e0).unwrap();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 10).unwrap();
        let spec = forward_phases(&stack, &grid).unwrap();
        let r0 = interface_coefficients(e1, e0).unwrap().reflection;
        let r1 = interface_coefficients(e1, e2).unwrap().reflection;
        for (k, omega) in grid.angular().enumerate() {
            let mu = diffusion_length(alpha, omega).unwrap();
            let expected = one_layer_phase_closed_form(r0, r1, l1, mu);
            assert!((spec.phases()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_order_does_not_matter() {
        let stack = test_stack();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 7).unwrap();
        let spec = forward_phases(&stack, &grid).unwrap();
        // each frequency evaluated on its own singleton grid gives the
        // identical component
        for (k, &f) in grid.frequencies_hz().iter().enumerate() {
            let single = FrequencyGrid::new(vec![f]).unwrap();
            let one = forward_phases(&stack, &single).unwrap();
            assert_eq!(one.phases()[0], spec.phases()[k]);
        }
    }

    #[test]
    fn scaling_family_leaves_phases_unchanged() {
        // diffusivities and effusivities scaled by c^2 (ambient included)
        // with thicknesses scaled by c reproduce the phases exactly
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 9).unwrap();
        let base = test_stack();
        let reference = forward_phases(&base, &grid).unwrap();
        for c in [0.5, 2.0] {
            let layers = base
                .layers()
                .iter()
                .map(|l| {
                    Layer::new(
                        material(
                            c * c * l.material.diffusivity(),
                            c * c * l.material.effusivity(),
                        ),
                        c * l.thickness,
                    )
                })
                .collect();
            let scaled = CoatingStack::new(
                layers,
                c * c * base.substrate_effusivity(),
                c * c * base.ambient_effusivity(),
            )
            .unwrap();
            let spec = forward_phases(&scaled, &grid).unwrap();
            for (a, b) in spec.phases().iter().zip(reference.phases()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn high_frequency_phase_decays() {
        let alpha = 1.2e-7;
        let l1 = 3e-5;
        let stack =
            CoatingStack::new(vec![Layer::new(material(alpha, 850.0), l1)], 24000.0, 6.0).unwrap();
        // pick omega0 so that L/mu > 12 at 100 omega0
        let omega0 = 2.0 * PI * 70.0;
        let mu_high = diffusion_length(alpha, 100.0 * omega0).unwrap();
        assert!(l1 / mu_high > 12.0);
        let resp = surface_response(&stack, 100.0 * omega0, 1.0).unwrap();
        assert!(resp.phase.abs() < 1e-6);
        let low = surface_response(&stack, omega0, 1.0).unwrap();
        assert!(low.phase.abs() > resp.phase.abs());
    }

    // --- synthetic measurements ---

    #[test]
    fn no_noise_is_identity() {
        let stack = test_stack();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 6).unwrap();
        let clean = forward_phases(&stack, &grid).unwrap();
        let synth = synthesize_measurement(&stack, &grid, NoiseModel::None).unwrap();
        assert_eq!(clean, synth);
        let zero_sigma = synthesize_measurement(
            &stack,
            &grid,
            NoiseModel::Gaussian {
                sigma: 0.0,
                seed: 99,
            },
        )
        .unwrap();
        assert_eq!(clean.phases(), zero_sigma.phases());
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let stack = test_stack();
        let grid = FrequencyGrid::log_spaced(0.5, 20.0, 12).unwrap();
        let noise = NoiseModel::Gaussian {
            sigma: 0.1f64.to_radians(),
            seed: 7,
        };
        let a = synthesize_measurement(&stack, &grid, noise).unwrap();
        let b = synthesize_measurement(&stack, &grid, noise).unwrap();
        assert_eq!(a, b);
        let other = synthesize_measurement(
            &stack,
            &grid,
            NoiseModel::Gaussian {
                sigma: 0.1f64.to_radians(),
                seed: 8,
            },
        )
        .unwrap();
        assert_ne!(a.phases(), other.phases());
    }

    #[test]
    fn noise_sample_std_matches_sigma() {
        // 10k draws at one frequency: sample std within 5% of sigma
        let stack = test_stack();
        let grid = FrequencyGrid::new(vec![2.0]).unwrap();
        let clean = forward_phases(&stack, &grid).unwrap().phases()[0];
        let sigma = 0.1f64.to_radians();
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let spec = synthesize_measurement(
                &stack,
                &grid,
                NoiseModel::Gaussian {
                    sigma,
                    seed: seed as u64,
                },
            )
            .unwrap();
            let d = spec.phases()[0] - clean;
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(
            (std - sigma).abs() < 0.05 * sigma,
            "sample std {std} vs sigma {sigma}"
        );
    }

    #[test]
    fn negative_sigma_rejected() {
        let stack = test_stack();
        let grid = FrequencyGrid::new(vec![1.0]).unwrap();
        assert!(synthesize_measurement(
            &stack,
            &grid,
            NoiseModel::Gaussian {
                sigma: -0.1,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn spectrum_validation() {
        let grid = FrequencyGrid::new(vec![1.0, 2.0]).unwrap();
        assert!(PhaseSpectrum::new(grid.clone(), vec![0.1], None).is_err());
        assert!(PhaseSpectrum::new(grid.clone(), vec![0.1, 4.0], None).is_err());
        assert!(PhaseSpectrum::new(grid.clone(), vec![0.1, -0.2], Some(vec![1.0])).is_err());
        assert!(PhaseSpectrum::new(grid, vec![0.1, -0.2], Some(vec![1.0, 0.9])).is_ok());
    }
}
