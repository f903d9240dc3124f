//! Space-time field tables and standing-wave (Wiener fringe) analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::GridWavefunction;
use crate::error::{Error, Result};

/// `Re ψ(x, t)` sampled on a (decimated) space-time lattice.
#[derive(Clone, Debug, Serialize)]
pub struct FieldTable {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// `re[t][x]`.
    pub re: Vec<Vec<f64>>,
}

/// Collects `Re ψ` from a snapshot series, keeping every `x_stride`-th node.
pub fn wiener_field(snapshots: &[GridWavefunction], x_stride: usize) -> Result<FieldTable> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::invalid("snapshots", "empty series"))?;
    let stride = x_stride.max(1);
    if snapshots.iter().any(|s| s.grid() != first.grid()) {
        return Err(Error::invalid("snapshots", "grids differ"));
    }
    if snapshots.windows(2).any(|w| w[1].t() <= w[0].t()) {
        return Err(Error::invalid("snapshots", "times must increase"));
    }
    let grid = first.grid();
    let idx: Vec<usize> = (0..grid.len).step_by(stride).collect();
    Ok(FieldTable {
        times: snapshots.iter().map(|s| s.t()).collect(),
        positions: idx.iter().map(|&i| grid.x(i)).collect(),
        re: snapshots
            .iter()
            .map(|s| idx.iter().map(|&i| s.values()[i].re).collect())
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FringeReport {
    /// Dominant spatial period of `|ψ|²` in the window.
    pub period: f64,
    /// `2|c|/c₀` for the dominant Fourier component `c` of `|ψ|²` and its mean `c₀`.
    pub visibility: f64,
}

/// Fourier coefficient `mean((ρ − ρ̄) e^{−iκx})` of the density over the window.
fn density_component(rho: &[f64], xs: &[f64], kappa: f64) -> Complex64 {
    let n = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / n;
    rho.iter()
        .zip(xs)
        .map(|(r, x)| (r - mean) * Complex64::from_polar(1.0, -kappa * x))
        .sum::<Complex64>()
        / n
}

/// Relative modulation depth of `|ψ|²` at spatial wavenumber `kappa` in `[lo, hi]`.
pub fn fringe_visibility_at(psi: &GridWavefunction, lo: f64, hi: f64, kappa: f64) -> Result<f64> {
    let (rho, xs) = window(psi, lo, hi)?;
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    Ok(2.0 * density_component(&rho, &xs, kappa).norm() / mean)
}

fn window(psi: &GridWavefunction, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = psi.grid();
    let range = grid.index_range(lo, hi);
    if range.len() < 16 {
        return Err(Error::invalid("window", "fewer than 16 nodes in the analysis window"));
    }
    let rho: Vec<f64> = psi.values()[range.clone()].iter().map(|v| v.norm_sqr()).collect();
    if !(rho.iter().sum::<f64>() > 0.0) {
        return Err(Error::invalid("window", "no density in the analysis window"));
    }
    Ok((rho, range.map(|i| grid.x(i)).collect()))
}

/// Finds the strongest periodic component of `|ψ|²` in `[lo, hi]`.
///
/// Periods are scanned from two grid cells up to a third of the window, then
/// the peak is refined by golden-section search on the periodogram.
pub fn fringe_analysis(psi: &GridWavefunction, lo: f64, hi: f64) -> Result<FringeReport> {
    let (rho, xs) = window(psi, lo, hi)?;
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let span = xs[xs.len() - 1] - xs[0];
    let dx = psi.dx();
    let k_min = 3.0 * 2.0 * PI / span;
    let k_max = PI / dx;
    let power = |k: f64| density_component(&rho, &xs, k).norm_sqr();

    // The coarse step is a quarter of the periodogram's main-lobe width.
    let step = 0.25 * 2.0 * PI / span;
    let mut best = (k_min, power(k_min));
    let mut k = k_min;
    while k <= k_max {
        let p = power(k);
        if p > best.1 {
            best = (k, p);
        }
        k += step;
    }
    let (mut a, mut b) = ((best.0 - step).max(k_min), (best.0 + step).min(k_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let kappa = 0.5 * (a + b);
    Ok(FringeReport {
        period: 2.0 * PI / kappa,
        visibility: 2.0 * power(kappa).sqrt() / mean,
    })
}
