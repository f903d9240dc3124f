use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Units;
use crate::error::{Error, Result};

/// Rectangular wave train `Φ₀(x − x_c) e^{i k x}` with optional cosine-ramped edges.
///
/// The ramp is centred on the nominal edges `±L/2`: the envelope is flat on
/// `|s| ≤ L/2 − ramp/2`, falls as `½(1 + cos)` over the next `ramp`, and is zero
/// beyond `L/2 + ramp/2`. A zero ramp gives the ideal rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    pub width: f64,
    pub wavenumber: f64,
    pub center: f64,
    pub amplitude: Option<f64>,
    pub edge_ramp: f64,
}

impl WavePacketSpec {
    /// Packet with the default edge ramp of one wavelength.
    pub fn new(width: f64, wavenumber: f64, center: f64) -> Self {
        let ramp = if wavenumber != 0.0 {
            2.0 * PI / wavenumber.abs()
        } else {
            0.0
        };
        Self {
            width,
            wavenumber,
            center,
            amplitude: None,
            edge_ramp: ramp,
        }
    }

    pub fn with_edge_ramp(mut self, ramp: f64) -> Self {
        self.edge_ramp = ramp;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = Some(amplitude);
        self
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber.abs()
    }

    /// `C`, defaulting to `1/√L`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude.unwrap_or_else(|| 1.0 / self.width.sqrt())
    }

    pub fn group_velocity(&self, units: Units) -> f64 {
        units.hbar * self.wavenumber / units.mass
    }

    /// Angular frequency of the carrier, `ħk²/2m`.
    pub fn omega(&self, units: Units) -> f64 {
        units.hbar * self.wavenumber * self.wavenumber / (2.0 * units.mass)
    }

    /// Checks the packet invariants; `min_wavelengths` is the required `L/λ`.
    pub fn validate(&self, min_wavelengths: f64) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::invalid("width", format!("{} must be positive", self.width)));
        }
        if self.wavenumber == 0.0 || !self.wavenumber.is_finite() {
            return Err(Error::DegenerateWavenumber);
        }
        if self.wavelength() * min_wavelengths > self.width * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "width",
                format!(
                    "wavelength {} is not below width/{}",
                    self.wavelength(),
                    min_wavelengths
                ),
            ));
        }
        if !(0.0..self.width / 4.0).contains(&self.edge_ramp) {
            return Err(Error::invalid(
                "edge_ramp",
                format!("{} must lie in [0, L/4)", self.edge_ramp),
            ));
        }
        if let Some(c) = self.amplitude {
            if !(c > 0.0) {
                return Err(Error::invalid("amplitude", "must be positive"));
            }
        }
        Ok(())
    }

    /// Outer edges of the (ramped) support.
    pub fn support(&self) -> (f64, f64) {
        let half = 0.5 * (self.width + self.edge_ramp);
        (self.center - half, self.center + half)
    }

    /// Real envelope `Φ₀` at offset `s` from the centre.
    pub fn envelope(&self, s: f64) -> f64 {
        let c = self.amplitude();
        let a = s.abs();
        let plateau = 0.5 * (self.width - self.edge_ramp);
        if a <= plateau {
            c
        } else if a < plateau + self.edge_ramp {
            let phase = PI * (a - plateau) / self.edge_ramp;
            c * 0.5 * (1.0 + phase.cos())
        } else {
            0.0
        }
    }

    /// Freely translating packet `Φ₀(x − x_c − v t) e^{i(kx − ωt)}`, with the
    /// centre at `x_c` when `t = 0`.
    pub fn free_value(&self, x: f64, t: f64, units: Units) -> Complex64 {
        let env = self.envelope(x - self.center - self.group_velocity(units) * t);
        if env == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(env, self.wavenumber * x - self.omega(units) * t)
    }

    /// Mirror image `x → −x`: centre and wavenumber change sign.
    pub fn mirrored(&self) -> Self {
        Self {
            center: -self.center,
            wavenumber: -self.wavenumber,
            ..*self
        }
    }
}
