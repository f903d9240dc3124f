//! Perron-Frobenius evolution of densities on `[0, 1]` under the doubling map.
//!
//! Grid densities live on `2^K + 1` uniform nodes. The preimages `y/2` and
//! `(y+1)/2` of a node are then nodes or exact midpoints of the grid, so the
//! operator is exact on piecewise-linear data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{fd_weights, trapezoid};

pub const DEFAULT_K: u32 = 12;
/// Highest Bernoulli polynomial order available.
pub const M_MAX: usize = 8;
/// Highest expansion order extracted from grid data.
pub const GRID_M_MAX: usize = 6;

const NORM_TOL: f64 = 1e-8;

/// `K` such that `len = 2^K + 1`.
pub fn grid_exponent(len: usize) -> Result<u32> {
    let n = len.wrapping_sub(1);
    if len < 3 || !n.is_power_of_two() {
        return Err(Error::BadGridSize { len });
    }
    Ok(n.trailing_zeros())
}

/// Node positions of the `2^K + 1` grid.
pub fn grid_nodes(k: u32) -> Vec<f64> {
    let n = 1usize << k;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// A normalized, nonnegative density in grid form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitDensity {
    values: Vec<f64>,
    /// Most negative value clamped away when the density was built from a
    /// spectral reconstruction; zero otherwise.
    overshoot: f64,
}

impl UnitDensity {
    /// Checks grid size, sign and normalization (trapezoid, within 1e-8).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let k = grid_exponent(values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NonPositiveDensity { index, value });
        }
        let integral = trapezoid(&values, 1.0 / (1u64 << k) as f64);
        if (integral - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { integral });
        }
        Ok(Self { values, overshoot: 0.0 })
    }

    /// Samples `f` on the grid and rescales to unit integral.
    pub fn from_fn(k: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(1..=24).contains(&k) {
            return Err(Error::invalid("K", format!("{k} outside 1..=24")));
        }
        let mut values: Vec<f64> = grid_nodes(k).into_iter().map(f).collect();
        let integral = trapezoid(&values, 1.0 / (1u64 << k) as f64);
        if !(integral > 0.0) || !integral.is_finite() {
            return Err(Error::NotNormalized { integral });
        }
        values.iter_mut().for_each(|v| *v /= integral);
        Self::new(values)
    }

    pub fn uniform(k: u32) -> Result<Self> {
        Self::from_fn(k, |_| 1.0)
    }

    /// Narrow triangle centred on the node nearest `y0`, `half_width` nodes wide on each side.
    pub fn spike(k: u32, y0: f64, half_width: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&y0) || half_width == 0 {
            return Err(Error::invalid("spike", "need y0 in [0, 1] and a positive half width"));
        }
        let n = (1usize << k) as f64;
        let j = (y0 * n).round();
        let w = half_width as f64;
        Self::from_fn(k, |y| (1.0 - ((y * n - j).abs() / w)).max(0.0))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn k(&self) -> u32 {
        (self.values.len() - 1).trailing_zeros()
    }

    pub fn dy(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid_nodes(self.k())
    }

    pub fn overshoot(&self) -> f64 {
        self.overshoot
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.dy())
    }

    /// Largest slope magnitude over the grid cells.
    pub fn max_slope(&self) -> f64 {
        let dy = self.dy();
        self.values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dy).abs())
            .fold(0.0, f64::max)
    }

    pub fn pf_apply(&self) -> Self {
        Self {
            values: pf_step(&self.values),
            overshoot: self.overshoot,
        }
    }

    /// `f, Uf, …, Uⁿf`.
    pub fn iterate(&self, n: usize) -> Vec<Self> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.clone());
        for i in 0..n {
            let next = out[i].pf_apply();
            out.push(next);
        }
        out
    }
}

/// `(Uf)(y) = ½[f(y/2) + f((y+1)/2)]` on `2^K + 1` samples of any function.
pub fn pf_apply_values(values: &[f64]) -> Result<Vec<f64>> {
    grid_exponent(values.len())?;
    Ok(pf_step(values))
}

pub fn pf_apply(f: &UnitDensity) -> UnitDensity {
    f.pf_apply()
}

fn pf_step(f: &[f64]) -> Vec<f64> {
    let n = f.len() - 1;
    // Value at half-node position i/2 of the grid.
    let half = |i: usize| {
        if i % 2 == 0 {
            f[i / 2]
        } else {
            0.5 * (f[i / 2] + f[i / 2 + 1])
        }
    };
    (0..=n).map(|i| 0.5 * (half(i) + half(i + n))).collect()
}

/// Monomial coefficients of `B_m`, lowest degree first.
pub fn bernoulli_coefficients(m: usize) -> Result<Vec<f64>> {
    if m > M_MAX {
        return Err(Error::OrderTooHigh { order: m, max: M_MAX });
    }
    let mut c = vec![1.0];
    for order in 1..=m {
        // Integrate order·B_{order−1}, then fix the constant so ∫₀¹ B = 0.
        let mut next = vec![0.0; order + 1];
        for (j, &cj) in c.iter().enumerate() {
            next[j + 1] = order as f64 * cj / (j + 1) as f64;
        }
        next[0] = -next.iter().enumerate().skip(1).map(|(j, &cj)| cj / (j + 1) as f64).sum::<f64>();
        c = next;
    }
    Ok(c)
}

pub fn bernoulli_poly(m: usize, y: f64) -> Result<f64> {
    Ok(horner(&bernoulli_coefficients(m)?, y))
}

fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &cj| acc * y + cj)
}

/// `f = Σ A_m B_m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralDecomposition {
    #[serde(rename = "A")]
    pub coefficients: Vec<f64>,
    #[serde(rename = "M")]
    pub order: usize,
    /// `sup |f0 − Σ A_m B_m|` on the source grid, when extracted from data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl SpectralDecomposition {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let Some(&a0) = coefficients.first() else {
            return Err(Error::invalid("A", "empty coefficient list"));
        };
        if coefficients.len() - 1 > M_MAX {
            return Err(Error::OrderTooHigh {
                order: coefficients.len() - 1,
                max: M_MAX,
            });
        }
        if (a0 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { integral: a0 });
        }
        Ok(Self {
            order: coefficients.len() - 1,
            coefficients,
            residual: None,
        })
    }

    pub fn evaluate(&self, y: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, a)| a * bernoulli_poly(m, y).expect("order checked on construction"))
            .sum()
    }
}

/// One-sided stencil spacing exponent `b` (spacing `2^-b`) for `A_m`:
/// balances rounding against truncation, while leaving room for the
/// doubled-spacing comparison stencil inside `[0, 1]`.
fn stencil_exponent(m: usize) -> u32 {
    let balanced = (52.0 / (2 * m + 1) as f64).round() as u32;
    let fits = ((4 * m) as f64).log2().ceil() as u32;
    balanced.max(fits)
}

/// `(1/m!)·[f^{(m−1)}(1) − f^{(m−1)}(0)]` from one-sided stencils of accuracy
/// `m + 2` with node stride `stride`.
fn endpoint_coefficient(values: &[f64], m: usize, stride: usize) -> f64 {
    let n = values.len() - 1;
    let h = stride as f64 / n as f64;
    let count = (m - 1) + (m + 2);
    let left: Vec<f64> = (0..count).map(|j| j as f64 * h).collect();
    let right: Vec<f64> = left.iter().map(|x| -x).collect();
    let wl = fd_weights(0.0, &left, m - 1);
    let wr = fd_weights(0.0, &right, m - 1);
    let d0: f64 = wl.iter().enumerate().map(|(j, w)| w * values[j * stride]).sum();
    let d1: f64 = wr.iter().enumerate().map(|(j, w)| w * values[n - j * stride]).sum();
    let factorial: f64 = (1..=m).map(|i| i as f64).product();
    (d1 - d0) / factorial
}

/// Expansion coefficients `A_0..A_M` from endpoint derivatives of grid data.
///
/// Each `A_m` is computed at two stencil spacings; a relative disagreement
/// above 10% raises `RoughDensity`.
pub fn spectral_coefficients(f0: &UnitDensity, m_order: usize) -> Result<SpectralDecomposition> {
    if m_order > GRID_M_MAX {
        return Err(Error::OrderTooHigh {
            order: m_order,
            max: GRID_M_MAX,
        });
    }
    let values = f0.values();
    let k = f0.k();
    let mut a = vec![f0.integral()];
    for m in 1..=m_order {
        let b = stencil_exponent(m).min(k);
        let stride = 1usize << (k - b);
        let fine = endpoint_coefficient(values, m, stride);
        let count = 2 * m + 1;
        if 2 * stride * (count - 1) <= values.len() - 1 {
            let coarse = endpoint_coefficient(values, m, 2 * stride);
            let diff = (fine - coarse).abs();
            let scale = fine.abs().max(coarse.abs());
            if diff > 1e-6 && diff > 0.1 * scale {
                return Err(Error::RoughDensity {
                    order: m,
                    rel_change: diff / scale,
                });
            }
        }
        a.push(fine);
    }
    let mut dec = SpectralDecomposition::new(a)?;
    let residual = f0
        .nodes()
        .iter()
        .zip(values)
        .map(|(&y, &v)| (v - dec.evaluate(y)).abs())
        .fold(0.0, f64::max);
    dec.residual = Some(residual);
    Ok(dec)
}

/// `A_m → A_m·2^{−nm}`.
pub fn spectral_evolve(dec: &SpectralDecomposition, n: u32) -> SpectralDecomposition {
    let coefficients = dec
        .coefficients
        .iter()
        .enumerate()
        .map(|(m, a)| a * 0.5f64.powi((n as usize * m).min(i32::MAX as usize) as i32))
        .collect();
    SpectralDecomposition {
        coefficients,
        order: dec.order,
        residual: None,
    }
}

/// Samples the expansion on the `2^K + 1` grid. Negative values down to
/// −1e-8 are clamped to zero and recorded as the overshoot.
pub fn reconstruct(dec: &SpectralDecomposition, k: u32) -> Result<UnitDensity> {
    let mut values: Vec<f64> = grid_nodes(k).into_iter().map(|y| dec.evaluate(y)).collect();
    let mut overshoot = 0.0f64;
    for (index, v) in values.iter_mut().enumerate() {
        if *v < -NORM_TOL {
            return Err(Error::NonPositiveDensity { index, value: *v });
        }
        if *v < 0.0 {
            overshoot = overshoot.min(*v);
            *v = 0.0;
        }
    }
    let mut f = UnitDensity::new(values)?;
    f.overshoot = overshoot;
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelaxationDistance {
    pub sup: f64,
    pub l1: f64,
}

/// `sup|f − 1|` and `∫|f − 1| dy`.
pub fn relaxation_distance(f: &UnitDensity) -> RelaxationDistance {
    let dev: Vec<f64> = f.values().iter().map(|v| (v - 1.0).abs()).collect();
    RelaxationDistance {
        sup: dev.iter().copied().fold(0.0, f64::max),
        l1: trapezoid(&dev, f.dy()),
    }
}

/// Distances of `f0, Uf0, …, Uⁿf0`.
pub fn relaxation_trace(f0: &UnitDensity, n: usize) -> Vec<RelaxationDistance> {
    f0.iterate(n).iter().map(relaxation_distance).collect()
}

/// Smallest `r` with `sup_n ≤ sup_0·rⁿ` for every step of the trace.
pub fn geometric_rate(trace: &[RelaxationDistance]) -> f64 {
    let d0 = trace[0].sup;
    if d0 == 0.0 {
        return 0.0;
    }
    trace
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, d)| (d.sup / d0).powf(1.0 / n as f64))
        .fold(0.0, f64::max)
}

/// First step at which the sup distance drops below `threshold`.
pub fn steps_to_relax(f0: &UnitDensity, threshold: f64, max_steps: usize) -> Option<usize> {
    let mut f = f0.clone();
    for n in 0..=max_steps {
        if relaxation_distance(&f).sup < threshold {
            return Some(n);
        }
        f = f.pf_apply();
    }
    None
}

/// `sup|(Uf)'| / sup|f'|`, at most ½.
pub fn derivative_contraction(f: &UnitDensity) -> f64 {
    f.pf_apply().max_slope() / f.max_slope()
}

/// Irregular test densities in the style of the relaxation figure, on `[0, 1]`.
pub fn test_density(name: &str) -> Option<fn(f64) -> f64> {
    use std::f64::consts::PI;
    let f: fn(f64) -> f64 = match name {
        "bumps" => |y| 1.0 + 0.5 * (-(y - 0.3f64).powi(2) / 0.005).exp() - 0.4 * (-(y - 0.7f64).powi(2) / 0.0128).exp(),
        "mix" => |y| 1.0 + 0.3 * (2.0 * PI * y).sin() + 0.25 * (10.0 * PI * y + 0.3).sin() + 0.1 * (y - 0.5),
        "wiggle" => |y| 1.0 + 0.4 * (6.0 * PI * y).sin() * (-3.0 * y).exp() + 0.2 * (11.0 * PI * y).cos(),
        "ramp" => |y| 1.0 + (y - 0.5),
        _ => return None,
    };
    Some(f)
}

pub const TEST_DENSITIES: [&str; 4] = ["bumps", "mix", "wiggle", "ramp"];
