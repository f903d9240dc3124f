use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Units, WavePacketSpec};
use crate::error::{Error, Result};

/// Uniform spatial grid `x_i = x0 + i·dx`, `i < len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !(x_max > x_min) {
            return Err(Error::invalid("grid", format!("bad window [{x_min}, {x_max}] / dx {dx}")));
        }
        let len = ((x_max - x_min) / dx).round() as usize + 1;
        if len < 8 {
            return Err(Error::invalid("grid", "fewer than 8 nodes"));
        }
        Ok(Self { x0: x_min, dx, len })
    }

    /// Grid with a node at `0` and nodes mirrored about it.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !(half_width > 0.0) {
            return Err(Error::invalid("grid", "half width and dx must be positive"));
        }
        let half = (half_width / dx).ceil() as usize;
        Ok(Self {
            x0: -(half as f64) * dx,
            dx,
            len: 2 * half + 1,
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.x(i))
    }

    /// Node index range whose positions fall in `[lo, hi]`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = ((lo - self.x0) / self.dx).ceil().max(0.0) as usize;
        let b = (((hi - self.x0) / self.dx).floor() + 1.0).max(0.0) as usize;
        a.min(self.len)..b.min(self.len)
    }

    pub fn mirrored(&self) -> Self {
        Self {
            x0: -self.x_max(),
            ..*self
        }
    }
}

/// Complex field sampled on a uniform grid at one instant.
#[derive(Clone, Debug)]
pub struct GridWavefunction {
    grid: Grid,
    values: Vec<Complex64>,
    t: f64,
    units: Units,
    max_density: OnceLock<f64>,
}

impl PartialEq for GridWavefunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.t == other.t && self.units == other.units && self.values == other.values
    }
}

impl GridWavefunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, t: f64, units: Units) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::invalid(
                "values",
                format!("{} samples for a grid of {}", values.len(), grid.len),
            ));
        }
        Ok(Self {
            grid,
            values,
            t,
            units,
            max_density: OnceLock::new(),
        })
    }

    pub fn from_fn(grid: Grid, t: f64, units: Units, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.positions().map(f).collect();
        Self {
            grid,
            values,
            t,
            units,
            max_density: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x0(&self) -> f64 {
        self.grid.x0
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        self.max_density = OnceLock::new();
        &mut self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.norm_sqr())
    }

    pub fn max_density(&self) -> f64 {
        *self.max_density.get_or_init(|| self.density().fold(0.0, f64::max))
    }

    /// `∫|ψ|² dx` (rectangle rule; the field vanishes at the walls).
    pub fn norm(&self) -> f64 {
        self.density().sum::<f64>() * self.grid.dx
    }

    /// Norm carried by the nodes inside `[lo, hi]`.
    pub fn norm_in(&self, lo: f64, hi: f64) -> f64 {
        let range = self.grid.index_range(lo, hi);
        self.values[range].iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized { integral: n });
        }
        let s = 1.0 / n.sqrt();
        for v in self.values_mut() {
            *v *= s;
        }
        Ok(self)
    }

    pub fn centroid(&self) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.x(i) * v.norm_sqr())
            .sum();
        num / self.density().sum::<f64>()
    }

    /// Standard deviation of the position distribution.
    pub fn spread(&self) -> f64 {
        let c = self.centroid();
        let total: f64 = self.density().sum();
        let var: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.grid.x(i) - c).powi(2) * v.norm_sqr())
            .sum::<f64>()
            / total;
        var.sqrt()
    }

    /// Probability current `(ħ/m) Im(ψ* ∂ψ)` at interior nodes (central differences).
    pub fn current(&self) -> Vec<f64> {
        let n = self.len();
        let scale = self.units.hbar / self.units.mass / (2.0 * self.grid.dx);
        let mut j = vec![0.0; n];
        for i in 1..n - 1 {
            let d = self.values[i + 1] - self.values[i - 1];
            j[i] = scale * (self.values[i].conj() * d).im;
        }
        j
    }

    pub fn total_current(&self) -> f64 {
        self.current().iter().sum::<f64>() * self.grid.dx
    }

    /// Field of `x → ψ(−x)`, on the mirrored grid.
    pub fn mirrored(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid.mirrored(),
            values,
            t: self.t,
            units: self.units,
            max_density: OnceLock::new(),
        }
    }

    /// `a·self + b·other` on a shared grid.
    pub fn superpose(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("superpose", "grids differ"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Self::new(self.grid, values, self.t, self.units)
    }

    /// Interpolated value of the field at `x`.
    pub fn value_at(&self, x: f64) -> Result<Complex64> {
        let s = LocalStencil::locate(&self.grid, x)?;
        Ok(s.evaluate(|i| self.values[i]).0)
    }

    /// Guidance velocity `(ħ/m) Im(∂ψ/ψ)` at `x`; `node_floor` is relative to
    /// `max|ψ|²`.
    pub fn velocity(&self, x: f64, node_floor: f64) -> Result<f64> {
        local_velocity(
            &self.grid,
            self.units,
            |i| self.values[i],
            x,
            node_floor * self.max_density(),
        )
    }
}

/// Four-point neighbourhood of a position on the grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LocalStencil {
    first: usize,
    s: f64,
    dx: f64,
}

impl LocalStencil {
    pub(crate) fn locate(grid: &Grid, x: f64) -> Result<Self> {
        let x_max = grid.x_max();
        if !(x >= grid.x0 && x <= x_max) {
            return Err(Error::OutsideGrid {
                x,
                x_min: grid.x0,
                x_max,
            });
        }
        let u = (x - grid.x0) / grid.dx;
        let i = (u.floor() as usize).clamp(1, grid.len - 3);
        Ok(Self {
            first: i - 1,
            s: u - i as f64,
            dx: grid.dx,
        })
    }

    /// Value and derivative of the demodulated cubic interpolant.
    ///
    /// A local carrier `e^{iκ(x − x_i)}` taken from the two nodes bracketing `x`
    /// is divided out before interpolating, so plane waves are reproduced
    /// exactly and the remaining envelope is smooth.
    pub(crate) fn evaluate(&self, sample: impl Fn(usize) -> Complex64) -> (Complex64, Complex64) {
        let p = [
            sample(self.first),
            sample(self.first + 1),
            sample(self.first + 2),
            sample(self.first + 3),
        ];
        let cross = p[2] * p[1].conj();
        let kappa = if cross.norm_sqr() > 0.0 { cross.arg() } else { 0.0 };
        let rot = Complex64::from_polar(1.0, -kappa);
        let irot = rot.conj();
        let u = [p[0] * irot, p[1], p[2] * rot, p[3] * rot * rot];

        let s = self.s;
        let w = [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ];
        let dw = [
            -(3.0 * s * s - 6.0 * s + 2.0) / 6.0,
            (3.0 * s * s - 4.0 * s - 1.0) / 2.0,
            -(3.0 * s * s - 2.0 * s - 2.0) / 2.0,
            (3.0 * s * s - 1.0) / 6.0,
        ];
        let mut val = Complex64::new(0.0, 0.0);
        let mut der = Complex64::new(0.0, 0.0);
        for j in 0..4 {
            val += u[j] * w[j];
            der += u[j] * dw[j];
        }
        // Restore the carrier: ψ = e^{iκs} u, ψ' = e^{iκs}(u' + iκu) per unit s.
        let carrier = Complex64::from_polar(1.0, kappa * s);
        let psi = carrier * val;
        let dpsi = carrier * (der + Complex64::new(0.0, kappa) * val) / self.dx;
        (psi, dpsi)
    }
}

/// Shared guidance-velocity kernel over any node sampler (single field,
/// time-blended pair, or branch sum).
pub(crate) fn local_velocity(
    grid: &Grid,
    units: Units,
    sample: impl Fn(usize) -> Complex64,
    x: f64,
    abs_floor: f64,
) -> Result<f64> {
    let stencil = LocalStencil::locate(grid, x)?;
    let (psi, dpsi) = stencil.evaluate(sample);
    let density = psi.norm_sqr();
    if !(density > abs_floor) {
        return Err(Error::NodeSingularity {
            x,
            density,
            floor: abs_floor,
        });
    }
    Ok(units.hbar / units.mass * (dpsi / psi).im)
}

/// Sampling requirements for building a packet on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketGridRules {
    /// Required `λ/dx`.
    pub points_per_wavelength: f64,
    /// Required `L/λ`.
    pub min_wavelengths_per_packet: f64,
}

impl Default for PacketGridRules {
    fn default() -> Self {
        Self {
            points_per_wavelength: 20.0,
            min_wavelengths_per_packet: 10.0,
        }
    }
}

/// Samples the packet at `t = 0` on `grid` and normalizes it.
pub fn init_packet(spec: &WavePacketSpec, grid: Grid, units: Units, rules: PacketGridRules) -> Result<GridWavefunction> {
    spec.validate(rules.min_wavelengths_per_packet)?;
    let limit = spec.wavelength() / rules.points_per_wavelength;
    if grid.dx > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse {
            dx: grid.dx,
            limit,
            points_per_wavelength: rules.points_per_wavelength,
        });
    }
    let (lo, hi) = spec.support();
    let margin = spec.width;
    if lo - grid.x0 < margin || grid.x_max() - hi < margin {
        return Err(Error::WindowTooSmall {
            x_min: grid.x0,
            x_max: grid.x_max(),
            margin,
        });
    }
    GridWavefunction::from_fn(grid, 0.0, units, |x| spec.free_value(x, 0.0, units)).normalized()
}

/// Normalized Gaussian `exp(−(x−x_c)²/4σ²) e^{ikx}`.
pub fn init_gaussian(center: f64, sigma: f64, k: f64, grid: Grid, units: Units) -> Result<GridWavefunction> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    GridWavefunction::from_fn(grid, 0.0, units, |x| {
        let s = x - center;
        Complex64::from_polar((-s * s / (4.0 * sigma * sigma)).exp(), k * x)
    })
    .normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(k: f64, dx: f64) -> GridWavefunction {
        let grid = Grid::new(-5.0, 5.0, dx).unwrap();
        GridWavefunction::from_fn(grid, 0.0, Units::default(), |x| Complex64::from_polar(1.0, k * x))
    }

    #[test]
    fn plane_wave_velocity_is_exact() {
        let psi = plane(1.7, 0.05);
        for &x in &[-4.93, -1.0, 0.012, 2.5, 4.97] {
            let v = psi.velocity(x, 1e-10).unwrap();
            assert!((v - 1.7).abs() < 1e-8, "x {x}: {v}");
        }
    }

    #[test]
    fn standing_wave_has_zero_velocity() {
        let grid = Grid::new(-5.0, 5.0, 0.05).unwrap();
        let psi = GridWavefunction::from_fn(grid, 0.0, Units::default(), |x| Complex64::new((1.3 * x).cos(), 0.0));
        for &x in &[0.1, 0.77, -2.0] {
            assert!(psi.velocity(x, 1e-10).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn two_wave_superposition_matches_closed_form() {
        let k = 2.0;
        let grid = Grid::new(-3.0, 3.0, 0.002).unwrap();
        let f = |x: f64| Complex64::from_polar(1.0, k * x) + 0.5 * Complex64::from_polar(1.0, -k * x);
        let psi = GridWavefunction::from_fn(grid, 0.0, Units::default(), f);
        // Im(ψ'/ψ) with ψ' = ik e^{ikx} − ik/2 e^{−ikx}, evaluated directly.
        let oracle = |x: f64| {
            let d = Complex64::new(0.0, k) * (Complex64::from_polar(1.0, k * x) - 0.5 * Complex64::from_polar(1.0, -k * x));
            (d / f(x)).im
        };
        assert!((oracle(0.0) - k / 3.0).abs() < 1e-14);
        for &x in &[0.0, 0.3137, -1.1, 2.05] {
            let v = psi.velocity(x, 1e-10).unwrap();
            assert!((v - oracle(x)).abs() < 1e-6, "x {x}: {v} vs {}", oracle(x));
        }
    }

    #[test]
    fn node_and_outside_errors() {
        let grid = Grid::new(-5.0, 5.0, 0.01).unwrap();
        let psi = GridWavefunction::from_fn(grid, 0.0, Units::default(), |x| Complex64::new(x, 0.0));
        assert!(matches!(psi.velocity(0.0, 1e-10), Err(Error::NodeSingularity { .. })));
        assert!(matches!(psi.velocity(6.0, 1e-10), Err(Error::OutsideGrid { .. })));
    }

    #[test]
    fn packet_is_normalized_and_left_moving() {
        let spec = WavePacketSpec::new(40.0, -2.0 * std::f64::consts::PI / 2.0, 0.0).with_edge_ramp(0.0);
        let grid = Grid::symmetric(70.0, 0.05).unwrap();
        let psi = init_packet(&spec, grid, Units::default(), PacketGridRules::default()).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!(psi.total_current() < 0.0);
    }

    #[test]
    fn packet_grid_rules_are_enforced() {
        let spec = WavePacketSpec::new(40.0, -std::f64::consts::PI, 0.0);
        let rules = PacketGridRules::default();
        let coarse = Grid::symmetric(70.0, 0.2).unwrap();
        assert!(matches!(
            init_packet(&spec, coarse, Units::default(), rules),
            Err(Error::GridTooCoarse { .. })
        ));
        let narrow = Grid::symmetric(40.0, 0.05).unwrap();
        assert!(matches!(
            init_packet(&spec, narrow, Units::default(), rules),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn mirror_reverses_values() {
        let grid = Grid::symmetric(2.0, 0.5).unwrap();
        let psi = GridWavefunction::from_fn(grid, 0.0, Units::default(), |x| Complex64::new(x, 1.0));
        let m = psi.mirrored();
        assert_eq!(m.grid(), psi.grid());
        assert_eq!(m.values()[0], Complex64::new(2.0, 1.0));
    }
}
