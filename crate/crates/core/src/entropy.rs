//! Valentini entropy, its growth under the Perron-Frobenius map and the
//! relaxation-time model `∂f/∂t = −(f − 1)/τ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frobenius::{grid_exponent, relaxation_distance, UnitDensity};
use crate::numeric::{simpson, trapezoid};

/// Slack allowed on entropy monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// `f ln f − f + 1`: nonnegative, zero only at `f = 1`, with `0 ln 0 = 0`.
fn convex_part(f: f64) -> f64 {
    if f > 0.0 {
        f * f.ln() - f + 1.0
    } else {
        1.0
    }
}

/// `S = −∫ f ln f dΓ` with `dΓ = w dy` (uniform when `weights` is `None`).
///
/// The integrand is `f ln f − f + 1`, which has the same integral for a
/// normalized `f` and makes `S ≤ 0` exact under positive quadrature weights.
pub fn valentini_entropy(values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    let k = grid_exponent(values.len())?;
    let dy = 1.0 / (1u64 << k) as f64;
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::invalid("weights", "length differs from the density"));
        }
        let mass = trapezoid(w, dy);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { integral: mass });
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let fw: Vec<f64> = values.iter().enumerate().map(|(i, f)| f * weight(i)).collect();
    let integral = trapezoid(&fw, dy);
    if (integral - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { integral });
    }
    let integrand: Vec<f64> = values.iter().enumerate().map(|(i, &f)| convex_part(f) * weight(i)).collect();
    Ok(-simpson(&integrand, dy))
}

pub fn entropy(f: &UnitDensity) -> f64 {
    valentini_entropy(f.values(), None).expect("unit densities are normalized")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub steps: Vec<usize>,
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    /// Lower bound on `dS/dt` of the relaxation model at each density.
    pub ds_bound: Vec<f64>,
}

/// Entropy along `f0, Uf0, …, Uⁿf0`. The bound column uses `τ = 1/ln 2`,
/// one map step per unit time.
pub fn entropy_trace_pf(f0: &UnitDensity, n: usize) -> Result<EntropyTrace> {
    let tau = 1.0 / std::f64::consts::LN_2;
    let mut trace = EntropyTrace {
        steps: Vec::with_capacity(n + 1),
        s: Vec::with_capacity(n + 1),
        ds_bound: Vec::with_capacity(n + 1),
    };
    for (step, f) in f0.iterate(n).iter().enumerate() {
        let s = entropy(f);
        if let Some(&before) = trace.s.last() {
            if s < before - MONOTONE_SLACK {
                return Err(Error::MonotonicityViolation { step, before, after: s });
            }
        }
        trace.steps.push(step);
        trace.s.push(s);
        trace.ds_bound.push(h_theorem_bound(f.values(), tau)?);
    }
    Ok(trace)
}

/// `f(t) = 1 + (f0 − 1)e^{−t/τ}`, pointwise.
pub fn relaxation_ode_evolve(f0: &UnitDensity, tau: f64, t: f64) -> Result<UnitDensity> {
    if !(tau > 0.0) || !(t >= 0.0) {
        return Err(Error::invalid("tau", "need tau > 0 and t >= 0"));
    }
    let decay = (-t / tau).exp();
    UnitDensity::new(f0.values().iter().map(|f| 1.0 + (f - 1.0) * decay).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HRate {
    pub ds_dt: f64,
    pub lower_bound: f64,
}

/// `∫_{f≥1} (f−1)²/(fτ) + ∫_{f<1} (f−1)²/τ`.
fn h_theorem_bound(values: &[f64], tau: f64) -> Result<f64> {
    let k = grid_exponent(values.len())?;
    let integrand: Vec<f64> = values
        .iter()
        .map(|&f| {
            let d = f - 1.0;
            if f >= 1.0 {
                d * d / (f.max(1e-300) * tau)
            } else {
                d * d / tau
            }
        })
        .collect();
    Ok(simpson(&integrand, 1.0 / (1u64 << k) as f64))
}

/// `dS/dt = ∫ (f − 1) ln f / τ` under the relaxation model, and its lower bound.
pub fn h_theorem_rate(f: &UnitDensity, tau: f64) -> Result<HRate> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    let values = f.values();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { index, value });
    }
    let rate: Vec<f64> = values.iter().map(|&f| (f - 1.0) * f.ln() / tau).collect();
    Ok(HRate {
        ds_dt: simpson(&rate, f.dy()),
        lower_bound: h_theorem_bound(values, tau)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdeSample {
    pub t: f64,
    pub sup_dist: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub ds_dt: f64,
    pub lower_bound: f64,
}

/// Samples the relaxation model at `steps + 1` equally spaced times in `[0, t_end]`.
pub fn ode_trace(f0: &UnitDensity, tau: f64, t_end: f64, steps: usize) -> Result<Vec<OdeSample>> {
    if steps == 0 {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    (0..=steps)
        .map(|i| {
            let t = t_end * i as f64 / steps as f64;
            let f = relaxation_ode_evolve(f0, tau, t)?;
            let rate = h_theorem_rate(&f, tau)?;
            Ok(OdeSample {
                t,
                sup_dist: relaxation_distance(&f).sup,
                s: entropy(&f),
                ds_dt: rate.ds_dt,
                lower_bound: rate.lower_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius::{bernoulli_poly, test_density};
    use proptest::prelude::*;

    fn b1(y: f64) -> f64 {
        bernoulli_poly(1, y).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&UnitDensity::uniform(12).unwrap()), 0.0);
        // Second order: S ≈ −(ε²/2)∫B₁² = −ε²/24.
        let eps = 0.1;
        let s = entropy(&UnitDensity::from_fn(12, |y| 1.0 + eps * b1(y)).unwrap());
        // Independent oracle: closed form of −∫(1+εu)ln(1+εu) for u = y − ½.
        let g = |u: f64| {
            let f = 1.0 + eps * u;
            f * f * (2.0 * f.ln() - 1.0) / (4.0 * eps)
        };
        let exact = -(g(0.5) - g(-0.5));
        assert!((s - exact).abs() < 1e-12, "{s} vs {exact}");
        assert!((s + 4.17e-4).abs() < 5e-6);
        let step = UnitDensity::from_fn(12, |y| if y < 0.5 { 2.0 } else if y > 0.5 { 0.0 } else { 1.0 }).unwrap();
        assert!((entropy(&step) + std::f64::consts::LN_2).abs() < 1e-3);
    }

    #[test]
    fn normalization_is_checked() {
        assert!(matches!(valentini_entropy(&[2.0; 5], None), Err(Error::NotNormalized { .. })));
        let w = vec![1.0; 5];
        assert!(valentini_entropy(&[1.0; 5], Some(&w)).unwrap().abs() < 1e-15);
        assert!(matches!(valentini_entropy(&[1.0; 5], Some(&[2.0; 5])), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn first_mode_entropy_decays_by_a_quarter() {
        let f = UnitDensity::from_fn(12, |y| 1.0 + b1(y)).unwrap();
        let trace = entropy_trace_pf(&f, 10).unwrap();
        for n in 4..10 {
            let ratio = trace.s[n + 1] / trace.s[n];
            assert!((ratio - 0.25).abs() < 1e-3, "n = {n}: {ratio}");
        }
        let s10 = trace.s[10];
        let expected = -(0.5f64.powi(10)).powi(2) / 24.0;
        assert!((s10 / expected - 1.0).abs() < 1e-2, "{s10:e} vs {expected:e}");
        let flat = entropy_trace_pf(&UnitDensity::uniform(10).unwrap(), 5).unwrap();
        assert!(flat.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rough_density_entropy_rises_fast() {
        let f = UnitDensity::from_fn(12, test_density("bumps").unwrap()).unwrap();
        let trace = entropy_trace_pf(&f, 3).unwrap();
        assert!(trace.s.windows(2).all(|w| w[1] >= w[0]));
        assert!(trace.s[3].abs() < 0.05 * trace.s[0].abs());
        assert!(trace.ds_bound.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn ode_solution() {
        let tau = 2.0;
        let a1 = 0.6;
        let f0 = UnitDensity::from_fn(12, |y| 1.0 + a1 * b1(y)).unwrap();
        assert_eq!(relaxation_ode_evolve(&f0, tau, 0.0).unwrap(), f0);
        let t = 1.3;
        let f = relaxation_ode_evolve(&f0, tau, t).unwrap();
        for (y, v) in f.nodes().iter().zip(f.values()) {
            assert!((v - (1.0 + a1 * (-t / tau).exp() * b1(*y))).abs() < 1e-14);
        }
        let half = relaxation_ode_evolve(&f0, tau, tau * std::f64::consts::LN_2).unwrap();
        let one_step = f0.pf_apply();
        let diff = half.values().iter().zip(one_step.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
        assert!(relaxation_ode_evolve(&f0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = h_theorem_rate(&UnitDensity::uniform(12).unwrap(), 1.0).unwrap();
        assert_eq!((r.ds_dt, r.lower_bound), (0.0, 0.0));
        let r = h_theorem_rate(&UnitDensity::from_fn(12, |y| 1.0 + 0.5 * b1(y)).unwrap(), 1.0).unwrap();
        assert!(r.lower_bound > 0.0 && r.ds_dt >= r.lower_bound);
        let piecewise = UnitDensity::from_fn(12, |y| if y <= 0.5 { 1.3 } else { 0.7 }).unwrap();
        let r = h_theorem_rate(&piecewise, 1.0).unwrap();
        assert!(r.ds_dt >= r.lower_bound && r.lower_bound >= 0.0, "{r:?}");
        let spike = UnitDensity::spike(8, 0.3, 2).unwrap();
        assert!(matches!(h_theorem_rate(&spike, 1.0), Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn numerical_derivative_matches_the_rate() {
        let tau = 1.0;
        let f0 = UnitDensity::from_fn(12, test_density("mix").unwrap()).unwrap();
        let dt = tau / 100.0;
        let trace = ode_trace(&f0, tau, 2.0, 200).unwrap();
        for w in trace.windows(3) {
            let numeric = (w[2].s - w[0].s) / (2.0 * dt);
            assert!((numeric / w[1].ds_dt - 1.0).abs() < 0.01);
            assert!(w[1].ds_dt >= w[1].lower_bound && w[1].lower_bound >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn entropy_is_nonpositive_and_grows(raw in proptest::collection::vec(0.05f64..3.0, 129)) {
            let total = trapezoid(&raw, 1.0 / 128.0);
            let f = UnitDensity::new(raw.iter().map(|v| v / total).collect()).unwrap();
            let s0 = entropy(&f);
            prop_assert!(s0 <= 0.0);
            prop_assert!(entropy(&f.pf_apply()) >= s0 - MONOTONE_SLACK);
            let r = h_theorem_rate(&f, 0.7).unwrap();
            prop_assert!(r.ds_dt >= r.lower_bound && r.lower_bound >= 0.0);
        }
    }
}
