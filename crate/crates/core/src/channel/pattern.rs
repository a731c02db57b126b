//! Feed radiation pattern and the per-entry link coefficient.

use core::f64::consts::PI;

use crate::math;
use crate::{Error, Result};

/// Bessel argument that places the pattern's -3 dB point at `θ = θ_3dB`.
pub const HALF_POWER_ARGUMENT: f64 = 2.07123;

/// Tapered-aperture beam gain relative to the peak,
/// `(J1(u)/(2u) + 36·J3(u)/u³)²` with `u = 2.07123·sin θ / sin θ_3dB`.
///
/// At `u → 0` the two terms tend to `1/4` and `36/48`, so the bracket tends
/// to one and the on-axis gain equals the peak gain exactly.
pub fn normalized_gain(theta_rad: f64, halfwidth_3db_rad: f64) -> f64 {
    let u = HALF_POWER_ARGUMENT * math::sin(theta_rad) / math::sin(halfwidth_3db_rad);
    let amp = pattern_amplitude(u.abs());
    amp * amp
}

fn pattern_amplitude(u: f64) -> f64 {
    if u < 1e-3 {
        // J1(u)/(2u) = 1/4 - u²/32 + …, 36·J3(u)/u³ = 3/4 - 3u²/64 + …
        return 1.0 - 5.0 * u * u / 64.0;
    }
    math::bessel_j1(u) / (2.0 * u) + 36.0 * math::bessel_jn(3, u) / (u * u * u)
}

/// `G_{k,m}` from the peak feed gain (linear) and the off-axis angle.
pub fn beam_gain(peak_gain: f64, theta_rad: f64, halfwidth_3db_rad: f64) -> f64 {
    peak_gain * normalized_gain(theta_rad, halfwidth_3db_rad)
}

/// Scalars entering the channel coefficient of one user/feed pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConstants {
    pub wavelength_m: f64,
    pub receive_gain: f64,
    pub boltzmann: f64,
    pub noise_temperature_k: f64,
    pub bandwidth_hz: f64,
}

impl LinkConstants {
    /// `√(G_R·G_{k,m}) / (4π·(d/λ)·√(κ·T_R·B_W))`.
    pub fn coefficient(&self, distance_m: f64, feed_gain: f64) -> Result<f64> {
        if !(distance_m > 0.0) || !distance_m.is_finite() {
            return Err(Error::InvalidGeometry(alloc::format!(
                "user distance must be positive, got {distance_m}"
            )));
        }
        if feed_gain < 0.0 {
            return Err(Error::InvalidGeometry("feed gain must be nonnegative".into()));
        }
        let noise = math::sqrt(self.boltzmann * self.noise_temperature_k * self.bandwidth_hz);
        Ok(math::sqrt(self.receive_gain * feed_gain) / (4.0 * PI * (distance_m / self.wavelength_m) * noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_axis_gain_is_peak() {
        assert_eq!(normalized_gain(0.0, 0.01), 1.0);
        let near = normalized_gain(1e-9, 0.01);
        assert!((near - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_argument_branch_is_continuous() {
        // compare the series branch against the Bessel branch just above the switch
        let u = 1.0001e-3;
        let bessel = math::bessel_j1(u) / (2.0 * u) + 36.0 * math::bessel_jn(3, u) / (u * u * u);
        assert!((bessel - (1.0 - 5.0 * u * u / 64.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_feed_gain_gives_zero_coefficient() {
        let link = LinkConstants {
            wavelength_m: 0.015,
            receive_gain: 1e4,
            boltzmann: 1.38e-23,
            noise_temperature_k: 250.0,
            bandwidth_hz: 5e8,
        };
        assert_eq!(link.coefficient(3.6e7, 0.0).unwrap(), 0.0);
        assert!(link.coefficient(0.0, 1.0).is_err());
        let a = link.coefficient(3.6e7, 2.0).unwrap();
        let b = link.coefficient(7.2e7, 2.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }
}
