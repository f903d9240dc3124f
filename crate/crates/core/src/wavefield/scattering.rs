//! Stationary scattering off a rectangular barrier or well.
//!
//! Sign conventions follow a packet incident from `x > 0` with `k_x < 0`:
//! the transmitted wave is `T e^{ikx}` on the far side, the reflected wave is
//! `R e^{−ikx}` on the incident side and the interior field is
//! `A e^{iqx} + B e^{−iqx}` with `q` carrying the sign of `k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Units;
use crate::error::{Error, Result};
use crate::numeric::bisect;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    /// Potential inside the barrier; negative values describe a well.
    pub height: f64,
    pub width: f64,
    #[serde(default)]
    pub center: f64,
}

impl BarrierSpec {
    pub fn new(height: f64, width: f64) -> Self {
        Self {
            height,
            width,
            center: 0.0,
        }
    }

    /// Barrier whose interior wavenumber is `ratio · k`.
    pub fn from_interior_ratio(k: f64, ratio: f64, width: f64, units: Units) -> Self {
        let height = units.hbar * units.hbar * k * k * (1.0 - ratio * ratio) / (2.0 * units.mass);
        Self::new(height, width)
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    /// Interior wavenumber for the exterior wavenumber `k`, same sign as `k`.
    pub fn interior_wavenumber(&self, k: f64, units: Units) -> Result<f64> {
        if k == 0.0 {
            return Err(Error::DegenerateWavenumber);
        }
        let q2 = k * k - 2.0 * units.mass * self.height / (units.hbar * units.hbar);
        if q2 < 0.0 {
            return Err(Error::EvanescentRegime { q_squared: q2 });
        }
        if q2 == 0.0 {
            return Err(Error::DegenerateWavenumber);
        }
        Ok(q2.sqrt().copysign(k))
    }

    /// Cell-averaged potential on the nodes of `grid` (a node's cell is
    /// `[x − dx/2, x + dx/2]`), so partial overlaps keep the barrier area exact.
    pub fn sample(&self, grid: &super::Grid) -> Vec<f64> {
        let lo = self.center - 0.5 * self.width;
        let hi = self.center + 0.5 * self.width;
        (0..grid.len)
            .map(|i| {
                let x = grid.x(i);
                let a = (x - 0.5 * grid.dx).max(lo);
                let b = (x + 0.5 * grid.dx).min(hi);
                if b > a {
                    self.height * (b - a) / grid.dx
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::invalid("barrier.width", "epsilon must be positive"));
        }
        if !self.height.is_finite() {
            return Err(Error::invalid("barrier.height", "must be finite"));
        }
        Ok(())
    }
}

/// Plane-wave amplitudes for one wavenumber.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringAmplitudes {
    pub t: Complex64,
    pub r: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    pub k: f64,
    pub q: f64,
}

impl ScatteringAmplitudes {
    pub fn transmittance(&self) -> f64 {
        self.t.norm_sqr()
    }

    pub fn reflectance(&self) -> f64 {
        self.r.norm_sqr()
    }

    /// `|T|² + |R|² − 1`.
    pub fn flux_defect(&self) -> f64 {
        self.t.norm_sqr() + self.r.norm_sqr() - 1.0
    }
}

/// Closed-form Fabry-Perot amplitudes of a rectangular barrier.
///
/// `T` and `R` use the classic closed forms; `A` and `B` come from matching the
/// interior field to the transmitted wave at the far interface. Off-centre
/// barriers pick up `R → R e^{2ik x_c}` and the matching interior phases.
pub fn scattering_amplitudes(k: f64, barrier: &BarrierSpec, units: Units) -> Result<ScatteringAmplitudes> {
    barrier.validate()?;
    let q = barrier.interior_wavenumber(k, units)?;
    let eps = barrier.width;
    let sum = q + k;
    let diff = q - k;

    let ratio = diff / sum;
    let den = Complex64::from_polar(1.0, diff * eps) - ratio * ratio * Complex64::from_polar(1.0, -sum * eps);
    let t = Complex64::new(4.0 * q * k / (sum * sum), 0.0) / den;
    let r = I * t * ((k * k - q * q) / (2.0 * q * k)) * (q * eps).sin();

    let h = 0.5 * eps;
    let a = t * (sum / (2.0 * q)) * Complex64::from_polar(1.0, diff * h);
    let b = t * (diff / (2.0 * q)) * Complex64::from_polar(1.0, -sum * h);

    let xc = barrier.center;
    if xc == 0.0 {
        return Ok(ScatteringAmplitudes { t, r, a, b, k, q });
    }
    Ok(ScatteringAmplitudes {
        t,
        r: r * Complex64::from_polar(1.0, 2.0 * k * xc),
        a: a * Complex64::from_polar(1.0, (k - q) * xc),
        b: b * Complex64::from_polar(1.0, (k + q) * xc),
        k,
        q,
    })
}

/// Ratio `q/k` near `guess` at which the barrier of width `width` reflects
/// exactly `target` of the flux.
pub fn calibrate_interior_ratio(
    k: f64,
    width: f64,
    target_reflectance: f64,
    bracket: (f64, f64),
    units: Units,
) -> Result<f64> {
    let f = |ratio: f64| -> f64 {
        let barrier = BarrierSpec::from_interior_ratio(k, ratio, width, units);
        scattering_amplitudes(k, &barrier, units)
            .map(|amps| amps.reflectance() - target_reflectance)
            .unwrap_or(f64::NAN)
    };
    bisect(f, bracket.0, bracket.1, 1e-15).ok_or_else(|| {
        Error::invalid(
            "target_reflectance",
            format!("no interior ratio in {bracket:?} gives |R|^2 = {target_reflectance}"),
        )
    })
}

/// Barrier width on the first rising branch of `|R|²(ε)` that reflects `target`.
pub fn width_for_reflectance(k: f64, ratio: f64, target_reflectance: f64, units: Units) -> Result<f64> {
    let q = (ratio * k).abs();
    let f = |width: f64| -> f64 {
        let barrier = BarrierSpec::from_interior_ratio(k, ratio, width, units);
        scattering_amplitudes(k, &barrier, units)
            .map(|amps| amps.reflectance() - target_reflectance)
            .unwrap_or(f64::NAN)
    };
    let hi = 0.5 * std::f64::consts::PI / q;
    bisect(f, 1e-12 * hi, hi, 1e-15).ok_or_else(|| {
        Error::invalid(
            "target_reflectance",
            format!("|R|^2 = {target_reflectance} unreachable for q/k = {ratio}"),
        )
    })
}

/// Which 2×2 matrix maps input mode amplitudes to output mode amplitudes.
#[derive(Clone, Copy, Debug)]
pub enum SplitterMode<'a> {
    /// `[[R, T], [T, R]]` from the barrier amplitudes.
    Physical(&'a ScatteringAmplitudes),
    /// Phase-plate idealisation `(1/√2)[[1, 1], [1, −1]]`.
    Idealized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitterMatrix(pub [[Complex64; 2]; 2]);

impl SplitterMatrix {
    pub fn physical(amps: &ScatteringAmplitudes) -> Self {
        Self([[amps.r, amps.t], [amps.t, amps.r]])
    }

    pub fn idealized() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self([[s, s], [s, -s]])
    }

    pub fn from_mode(mode: SplitterMode<'_>) -> Self {
        match mode {
            SplitterMode::Physical(amps) => Self::physical(amps),
            SplitterMode::Idealized => Self::idealized(),
        }
    }

    /// Max-norm of `M†M − 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = &self.0;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let g = m[0][i].conj() * m[0][j] + m[1][i].conj() * m[1][j];
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    pub fn apply(&self, a_plus: Complex64, a_minus: Complex64) -> (Complex64, Complex64) {
        let m = &self.0;
        (
            m[0][0] * a_plus + m[0][1] * a_minus,
            m[1][0] * a_plus + m[1][1] * a_minus,
        )
    }
}

/// Output mode amplitudes `(a'₊, a'₋)` for the input superposition
/// `a₊ψ₀ + a₋ψ₁`.
pub fn asymptotic_out_state(
    a_plus: Complex64,
    a_minus: Complex64,
    mode: SplitterMode<'_>,
) -> Result<(Complex64, Complex64)> {
    let norm = a_plus.norm_sqr() + a_minus.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { integral: norm });
    }
    let matrix = SplitterMatrix::from_mode(mode);
    let deviation = matrix.unitarity_defect();
    if deviation > 1e-8 {
        return Err(Error::NonUnitaryAmplitudes { deviation });
    }
    Ok(matrix.apply(a_plus, a_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    /// Independent oracle: glue the two step interfaces with 2×2 transfer
    /// matrices acting on (right-mover, left-mover) coefficients.
    fn transfer_matrix_amplitudes(k: f64, q: f64, eps: f64) -> (Complex64, Complex64) {
        // Transfer matrix taking coefficients on the left of an interface at x0
        // (wavenumber k1) to coefficients on the right (wavenumber k2).
        fn interface(k1: f64, k2: f64, x0: f64) -> [[Complex64; 2]; 2] {
            let e = |s: f64| Complex64::from_polar(1.0, s * x0);
            let p = 0.5 * (1.0 + k1 / k2);
            let m = 0.5 * (1.0 - k1 / k2);
            [
                [e(k1 - k2) * p, e(-k1 - k2) * m],
                [e(k1 + k2) * m, e(-k1 + k2) * p],
            ]
        }
        fn mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
            let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            c
        }
        let (ka, qa) = (k.abs(), q.abs());
        // Positive-wavenumber picture: wave incident from the left, mirrored back at the end.
        let m = mul(interface(qa, ka, 0.5 * eps), interface(ka, qa, -0.5 * eps));
        // left: (1, r), right: (t, 0) => t = m00 + m01 r, 0 = m10 + m11 r
        let r = -m[1][0] / m[1][1];
        let t = m[0][0] + m[0][1] * r;
        (t, r)
    }

    #[test]
    fn no_barrier_is_transparent() {
        let amps = scattering_amplitudes(-1.3, &BarrierSpec::new(0.0, 0.7), Units::default()).unwrap();
        assert!((amps.t - 1.0).norm() < 1e-14);
        assert!(amps.r.norm() < 1e-14);
    }

    #[test]
    fn balanced_splitter_matches_printed_values() {
        let k: f64 = -1.0;
        let eps = 0.5 / k.abs();
        let barrier = BarrierSpec::from_interior_ratio(k, 2.5, eps, Units::default());
        let amps = scattering_amplitudes(k, &barrier, Units::default()).unwrap();
        assert!((amps.t.norm() - FRAC_1_SQRT_2).abs() < 0.005);
        assert!((amps.t.arg() / PI - 0.267).abs() < 0.005);
        assert!((amps.r / amps.t - I).norm() < 5e-3);
    }

    #[test]
    fn interior_amplitudes_satisfy_matching_conditions() {
        let units = Units::default();
        let barrier = BarrierSpec::new(-2.1, 0.63);
        let k = -0.9;
        let amps = scattering_amplitudes(k, &barrier, units).unwrap();
        let q = amps.q;
        let h = 0.5 * barrier.width;
        let inside = |x: f64| amps.a * Complex64::from_polar(1.0, q * x) + amps.b * Complex64::from_polar(1.0, -q * x);
        let d_inside = |x: f64| {
            I * q * (amps.a * Complex64::from_polar(1.0, q * x) - amps.b * Complex64::from_polar(1.0, -q * x))
        };
        let right = |x: f64| Complex64::from_polar(1.0, k * x) + amps.r * Complex64::from_polar(1.0, -k * x);
        let d_right = |x: f64| {
            I * k * (Complex64::from_polar(1.0, k * x) - amps.r * Complex64::from_polar(1.0, -k * x))
        };
        let left = |x: f64| amps.t * Complex64::from_polar(1.0, k * x);
        let d_left = |x: f64| I * k * left(x);
        assert!((inside(h) - right(h)).norm() < 1e-12);
        assert!((d_inside(h) - d_right(h)).norm() < 1e-12);
        assert!((inside(-h) - left(-h)).norm() < 1e-12);
        assert!((d_inside(-h) - d_left(-h)).norm() < 1e-12);
    }

    #[test]
    fn width_sweep_agrees_with_transfer_matrices() {
        let units = Units::default();
        let k = -1.0;
        for i in 1..60 {
            let eps = 0.05 * i as f64;
            let barrier = BarrierSpec::from_interior_ratio(k, 2.5, eps, units);
            let amps = scattering_amplitudes(k, &barrier, units).unwrap();
            assert!(amps.flux_defect().abs() < 1e-10);
            let (t, r) = transfer_matrix_amplitudes(k, amps.q, eps);
            assert!((t.norm_sqr() - amps.transmittance()).abs() < 1e-10, "eps {eps}");
            assert!((r.norm_sqr() - amps.reflectance()).abs() < 1e-10, "eps {eps}");
        }
    }

    #[test]
    fn off_center_barrier_shifts_reflection_phase() {
        let units = Units::default();
        let base = BarrierSpec::new(-2.0, 0.5);
        let shifted = base.with_center(0.3);
        let a0 = scattering_amplitudes(-1.0, &base, units).unwrap();
        let a1 = scattering_amplitudes(-1.0, &shifted, units).unwrap();
        assert!((a1.t - a0.t).norm() < 1e-14);
        assert!((a1.r - a0.r * Complex64::from_polar(1.0, -0.6)).norm() < 1e-14);
    }

    #[test]
    fn evanescent_and_degenerate_inputs_error() {
        let units = Units::default();
        assert!(matches!(
            scattering_amplitudes(-1.0, &BarrierSpec::new(2.0, 0.5), units),
            Err(Error::EvanescentRegime { .. })
        ));
        assert!(matches!(
            scattering_amplitudes(0.0, &BarrierSpec::new(-2.0, 0.5), units),
            Err(Error::DegenerateWavenumber)
        ));
    }

    #[test]
    fn idealized_splitter_columns() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let (p, m) = asymptotic_out_state(one, zero, SplitterMode::Idealized).unwrap();
        assert!((p - FRAC_1_SQRT_2).norm() < 1e-15 && (m - FRAC_1_SQRT_2).norm() < 1e-15);
        let (p, m) = asymptotic_out_state(zero, one, SplitterMode::Idealized).unwrap();
        assert!((p - FRAC_1_SQRT_2).norm() < 1e-15 && (m + FRAC_1_SQRT_2).norm() < 1e-15);
    }

    #[test]
    fn balanced_splitter_routes_symmetric_superposition_to_one_gate() {
        let units = Units::default();
        let k = -1.0;
        let ratio = calibrate_interior_ratio(k, 0.5, 0.5, (2.3, 2.7), units).unwrap();
        let amps = scattering_amplitudes(k, &BarrierSpec::from_interior_ratio(k, ratio, 0.5, units), units).unwrap();
        let s = FRAC_1_SQRT_2;
        let (p, m) = asymptotic_out_state(Complex64::new(s, 0.0), Complex64::new(0.0, s), SplitterMode::Physical(&amps))
            .unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-10);
        assert!(m.norm() < 1e-10);
    }

    #[test]
    fn unnormalized_input_and_broken_matrix_error() {
        let amps = ScatteringAmplitudes {
            t: Complex64::new(0.9, 0.0),
            r: Complex64::new(0.0, 0.9),
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            k: -1.0,
            q: -2.0,
        };
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(matches!(
            asymptotic_out_state(one, zero, SplitterMode::Physical(&amps)),
            Err(Error::NonUnitaryAmplitudes { .. })
        ));
        assert!(matches!(
            asymptotic_out_state(one, one, SplitterMode::Idealized),
            Err(Error::NotNormalized { .. })
        ));
    }

    proptest! {
        #[test]
        fn flux_and_dispersion_relation_hold(
            k in -4.0f64..-0.05,
            depth in 0.0f64..20.0,
            eps in 0.01f64..5.0,
        ) {
            let units = Units::default();
            let barrier = BarrierSpec::new(-depth, eps);
            let amps = scattering_amplitudes(k, &barrier, units).unwrap();
            prop_assert!(amps.flux_defect().abs() < 1e-10);
            prop_assert!(((amps.q * amps.q - k * k) - 2.0 * depth).abs() < 1e-10 * (1.0 + depth));
            let m = SplitterMatrix::physical(&amps);
            prop_assert!(m.unitarity_defect() < 1e-12);
        }

        #[test]
        fn splitter_preserves_norm(theta in 0.0f64..std::f64::consts::PI, phi in -3.2f64..3.2) {
            let a = Complex64::new(theta.cos(), 0.0);
            let b = Complex64::from_polar(theta.sin(), phi);
            let amps = scattering_amplitudes(-1.0, &BarrierSpec::new(-2.6, 0.5), Units::default()).unwrap();
            for mode in [SplitterMode::Physical(&amps), SplitterMode::Idealized] {
                let (p, m) = asymptotic_out_state(a, b, mode).unwrap();
                prop_assert!((p.norm_sqr() + m.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }
}
