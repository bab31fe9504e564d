//! Brute-force wave-train summation.
//!
//! Everything here deliberately avoids the closed-form geometric-series
//! division used by [`crate::wavecore`]: individual reflection orders are
//! summed term by term so the closed forms can be verified against an
//! independent evaluation path. Slow and simple on purpose.

use num_complex::Complex64;

use crate::error::Error;
use crate::wavecore::{self, CoatingStack};
use crate::Result;

/// Truncation rule for wave-train sums.
///
/// The number of summed reflection orders is the smallest `N` whose
/// per-round-trip ratio satisfies `|ratio|^N < target_tail_bound`, capped at
/// `max_order`. A tail bound of zero forces exactly `max_order` terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub max_order: usize,
    pub target_tail_bound: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_order: 10_000,
            target_tail_bound: 1e-16,
        }
    }
}

impl TruncationPolicy {
    /// Exactly `orders` terms, no early stop.
    pub fn fixed(orders: usize) -> Self {
        Self {
            max_order: orders.max(1),
            target_tail_bound: 0.0,
        }
    }

    /// Number of terms to sum for a given per-round-trip ratio.
    pub fn effective_order(&self, ratio: Complex64) -> Result<usize> {
        let magnitude = ratio.norm();
        if magnitude >= 1.0 || !magnitude.is_finite() {
            return Err(Error::DivergentSeries { ratio: magnitude });
        }
        if magnitude == 0.0 {
            return Ok(1);
        }
        // smallest N with magnitude^N < bound; ln(bound)/ln(magnitude) with
        // bound <= 0 maps to +inf and the cap takes over
        let needed = (self.target_tail_bound.ln() / magnitude.ln()).ceil();
        if needed.is_finite() && needed < self.max_order as f64 {
            Ok((needed as usize).max(1))
        } else {
            Ok(self.max_order.max(1))
        }
    }
}

/// Compensated (Kahan) accumulator; keeps round-off below the truncation
/// error of the series.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct ComplexAccumulator {
    re: Compensated,
    im: Compensated,
}

impl ComplexAccumulator {
    fn add(&mut self, value: Complex64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.sum, self.im.sum)
    }
}

/// One-coating surface temperature from explicit wave trains.
///
/// Sums the two wave-train families in ascending reflection order `n`:
/// `(R0 r E)^n` for waves first reflected at the surface and
/// `r E (R0 r E)^n` for waves first reflected at the buried interface,
/// with `E = exp(-2 sigma_l)`. The inner coefficient `r` may be complex so
/// an effective reflection coefficient can stand in for a plain interface.
/// The source prefactor is normalized to one.
pub fn one_layer_series(
    r0: f64,
    r1: Complex64,
    sigma_l: Complex64,
    policy: TruncationPolicy,
) -> Result<Complex64> {
    let decay = (-2.0 * sigma_l).exp();
    let ratio = r0 * r1 * decay;
    let orders = policy.effective_order(ratio)?;
    let mut acc = ComplexAccumulator::default();
    let mut round_trip = Complex64::new(1.0, 0.0);
    for _ in 0..orders {
        acc.add(round_trip);
        acc.add(r1 * decay * round_trip);
        round_trip *= ratio;
    }
    Ok(acc.value())
}

/// Effective reflection coefficient of a buried layer from explicit wave
/// trains: `r_up + T T' g E sum_n (r_up' g E)^n` with `T T' = 1 - r_up^2`
/// and `r_up' = -r_up`, summed term by term.
pub fn two_layer_gamma_series(
    r_upper: f64,
    gamma_below: Complex64,
    sigma_l: Complex64,
    policy: TruncationPolicy,
) -> Result<Complex64> {
    let decay = (-2.0 * sigma_l).exp();
    let ratio = -r_upper * gamma_below * decay;
    let orders = policy.effective_order(ratio)?;
    let prefactor = (1.0 - r_upper * r_upper) * gamma_below * decay;
    let mut acc = ComplexAccumulator::default();
    acc.add(Complex64::new(r_upper, 0.0));
    let mut round_trip = Complex64::new(1.0, 0.0);
    for _ in 0..orders {
        acc.add(prefactor * round_trip);
        round_trip *= ratio;
    }
    Ok(acc.value())
}

/// Effective reflection coefficient of a whole stack built bottom-up from
/// truncated series instead of closed-form division.
pub fn recursive_truncated_stack(
    stack: &CoatingStack,
    omega: f64,
    policy: TruncationPolicy,
) -> Result<Complex64> {
    let refl = wavecore::downward_reflections(stack)?;
    let layers = stack.layers();
    let n = layers.len();
    let mut gamma = Complex64::new(refl[n - 1], 0.0);
    for j in (0..n - 1).rev() {
        let below = &layers[j + 1];
        let sigma = wavecore::wave_number(below.material.diffusivity(), omega)?.sigma;
        gamma = two_layer_gamma_series(refl[j], gamma, sigma * below.thickness, policy)?;
    }
    Ok(gamma)
}

/// Surface temperature of a whole stack with both the effective-reflection
/// recursion and the top-layer interference evaluated as truncated series.
pub fn truncated_surface_temperature(
    stack: &CoatingStack,
    omega: f64,
    policy: TruncationPolicy,
) -> Result<Complex64> {
    let gamma = recursive_truncated_stack(stack, omega, policy)?;
    let top = &stack.layers()[0];
    let surface = wavecore::interface_coefficients(
        top.material.effusivity(),
        stack.ambient_effusivity(),
    )?
    .reflection;
    let sigma = wavecore::wave_number(top.material.diffusivity(), omega)?.sigma;
    one_layer_series(surface, gamma, sigma * top.thickness, policy)
}
