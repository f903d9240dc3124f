//! Born-rule sampling and histogram tests of equivariance.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::wavefield::GridWavefunction;

/// Normalized cumulative trapezoid integral of `|ψ|²` at each node.
pub fn born_cdf(psi: &GridWavefunction) -> Result<Vec<f64>> {
    let rho: Vec<f64> = psi.density().collect();
    let mut cdf = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in rho.windows(2) {
        acc += 0.5 * (w[0] + w[1]);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::invalid("psi", "zero density"));
    }
    cdf.iter_mut().for_each(|c| *c /= acc);
    Ok(cdf)
}

/// Position where the CDF reaches `u`, linear within a cell.
fn invert(psi: &GridWavefunction, cdf: &[f64], u: f64) -> f64 {
    let j = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
    let (a, b) = (cdf[j - 1], cdf[j]);
    let s = if b > a { (u - a) / (b - a) } else { 0.5 };
    psi.grid().x(j - 1) + s * psi.dx()
}

/// Position below which a fraction `u` of the Born mass lies.
pub fn born_quantile(psi: &GridWavefunction, u: f64) -> Result<f64> {
    let cdf = born_cdf(psi)?;
    Ok(invert(psi, &cdf, u.clamp(0.0, 1.0)))
}

/// `n` independent draws from `|ψ|²`, sorted ascending.
pub fn born_samples(psi: &GridWavefunction, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let cdf = born_cdf(psi)?;
    let mut xs: Vec<f64> = (0..n).map(|_| invert(psi, &cdf, rng.random::<f64>())).collect();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Deterministic samples at the quantiles `(i + ½)/n`.
pub fn stratified_samples(psi: &GridWavefunction, n: usize) -> Result<Vec<f64>> {
    let cdf = born_cdf(psi)?;
    Ok((0..n).map(|i| invert(psi, &cdf, (i as f64 + 0.5) / n as f64)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquivarianceReport {
    /// L1 distance between the sample histogram and the binned `|ψ|²`.
    pub distance: f64,
    /// Multinomial noise band `3·√(bins/N)`.
    pub bound: f64,
    pub bins: usize,
    pub samples: usize,
}

impl EquivarianceReport {
    pub fn passed(&self) -> bool {
        self.distance <= self.bound
    }
}

pub fn noise_band(bins: usize, samples: usize) -> f64 {
    3.0 * (bins as f64 / samples as f64).sqrt()
}

/// Compares `samples` with `|ψ|²` on `bins` equal bins spanning the central
/// `1 − 2·10⁻⁶` of the Born mass. Mass outside the span counts as one more bin.
pub fn histogram_distance(samples: &[f64], psi: &GridWavefunction, bins: usize) -> Result<EquivarianceReport> {
    if bins == 0 || samples.is_empty() {
        return Err(Error::invalid("bins", "need at least one bin and one sample"));
    }
    let cdf = born_cdf(psi)?;
    let lo = invert(psi, &cdf, 1e-6);
    let hi = invert(psi, &cdf, 1.0 - 1e-6);
    let width = (hi - lo) / bins as f64;
    let cdf_at = |x: f64| -> f64 {
        let g = psi.grid();
        let u = ((x - g.x0) / g.dx).clamp(0.0, (g.len - 1) as f64);
        let j = (u.floor() as usize).min(g.len - 2);
        let s = u - j as f64;
        cdf[j] + s * (cdf[j + 1] - cdf[j])
    };

    let n = samples.len() as f64;
    let mut counts = vec![0usize; bins + 1];
    for &x in samples {
        let b = ((x - lo) / width).floor();
        if b >= 0.0 && (b as usize) < bins {
            counts[b as usize] += 1;
        } else {
            counts[bins] += 1;
        }
    }
    let mut distance = 0.0;
    let mut inside = 0.0;
    for (b, &c) in counts[..bins].iter().enumerate() {
        let mass = cdf_at(lo + (b + 1) as f64 * width) - cdf_at(lo + b as f64 * width);
        inside += mass;
        distance += (c as f64 / n - mass).abs();
    }
    distance += (counts[bins] as f64 / n - (1.0 - inside)).abs();
    Ok(EquivarianceReport {
        distance,
        bound: noise_band(bins, samples.len()),
        bins,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{init_gaussian, Grid, Units};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian() -> GridWavefunction {
        init_gaussian(1.0, 2.0, 0.5, Grid::symmetric(30.0, 0.05).unwrap(), Units::default()).unwrap()
    }

    #[test]
    fn samples_follow_the_density() {
        let psi = gaussian();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs = born_samples(&psi, 20_000, &mut rng).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        // |ψ|² is normal with σ = 2.
        assert!((mean - 1.0).abs() < 0.05);
        assert!((var.sqrt() - 2.0).abs() < 0.05);
        let rep = histogram_distance(&xs, &psi, 30).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn stratified_beats_random() {
        let psi = gaussian();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let random = histogram_distance(&born_samples(&psi, 2000, &mut rng).unwrap(), &psi, 20).unwrap();
        let strat = histogram_distance(&stratified_samples(&psi, 2000).unwrap(), &psi, 20).unwrap();
        assert!(strat.distance < random.distance);
        assert!(strat.distance < 0.02);
    }

    #[test]
    fn displaced_samples_fail() {
        let psi = gaussian();
        let xs: Vec<f64> = stratified_samples(&psi, 2000).unwrap().iter().map(|x| x + 3.0).collect();
        assert!(!histogram_distance(&xs, &psi, 20).unwrap().passed());
    }
}
