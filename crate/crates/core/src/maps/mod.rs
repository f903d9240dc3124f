//! Interval-map reduction of the iterated interferometer.
//!
//! Positions in the two gates are rescaled to `y ∈ [0, 1]`; the decohered
//! splitter then acts as the doubling map and the coherent one as `y/2 + 1/2`.

mod word;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use word::{branch_history, BinaryWord, YInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epoch {
    Initial,
    Final,
}

/// Output gate: `Plus` is the `x > 0` side, `Minus` the `x < 0` side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Plus,
    Minus,
}

impl Gate {
    pub fn of(x: f64) -> Self {
        if x >= 0.0 {
            Gate::Plus
        } else {
            Gate::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Gate::Plus => 1.0,
            Gate::Minus => -1.0,
        }
    }

    /// Half of `[0, 1]` the gate is mapped onto.
    pub fn half_interval(self) -> (f64, f64) {
        match self {
            Gate::Plus => (0.5, 1.0),
            Gate::Minus => (0.0, 0.5),
        }
    }
}

/// A packet segment `[±c − L/2, ±c + L/2]` at the start or end of a pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub epoch: Epoch,
    pub gate: Gate,
    pub center_magnitude: f64,
    pub length: f64,
}

impl SegmentSpec {
    pub fn new(epoch: Epoch, gate: Gate, center_magnitude: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::invalid("length", "must be positive"));
        }
        if !(center_magnitude > 0.5 * length) {
            return Err(Error::invalid("center_magnitude", "gates overlap: need |center| > L/2"));
        }
        Ok(Self {
            epoch,
            gate,
            center_magnitude,
            length,
        })
    }

    pub fn center(&self) -> f64 {
        self.gate.sign() * self.center_magnitude
    }

    pub fn support(&self) -> (f64, f64) {
        let c = self.center();
        (c - 0.5 * self.length, c + 0.5 * self.length)
    }

    /// Same geometry in the other gate.
    pub fn in_gate(&self, gate: Gate) -> Self {
        Self { gate, ..*self }
    }
}

/// `(x − x_c)/(2L) + 3/4` in the `Plus` gate, `(x + x_c)/(2L) + 1/4` in `Minus`.
pub fn x_to_y(x: f64, seg: &SegmentSpec) -> Result<f64> {
    let (lo, hi) = seg.support();
    let slack = 1e-12 * seg.length;
    if !(x >= lo - slack && x <= hi + slack) {
        return Err(Error::OutOfSupport { x, lo, hi });
    }
    Ok(unchecked_x_to_y(x, seg))
}

/// [`x_to_y`] without the support check, for points slightly outside a segment.
pub fn unchecked_x_to_y(x: f64, seg: &SegmentSpec) -> f64 {
    let offset = match seg.gate {
        Gate::Plus => 0.75,
        Gate::Minus => 0.25,
    };
    (x - seg.center()) / (2.0 * seg.length) + offset
}

pub fn y_to_x(y: f64, seg: &SegmentSpec) -> Result<f64> {
    let (lo, hi) = seg.gate.half_interval();
    if !(y >= lo && y <= hi) {
        return Err(Error::WrongHalfInterval { y, lo, hi });
    }
    let offset = match seg.gate {
        Gate::Plus => 0.75,
        Gate::Minus => 0.25,
    };
    Ok(seg.center() + 2.0 * seg.length * (y - offset))
}

/// Doubling map `2y mod 1`; the tie `y = 1/2` goes to 0.
pub fn bernoulli_step(y: f64) -> f64 {
    if y > 0.5 {
        2.0 * y - 1.0
    } else if y < 0.5 {
        2.0 * y
    } else {
        0.0
    }
}

/// Contraction onto the `Plus` half for the coherent superposition.
pub fn coherent_step(y: f64) -> f64 {
    0.5 * y + 0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Bernoulli,
    Coherent,
}

impl StepKind {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            StepKind::Bernoulli => bernoulli_step(y),
            StepKind::Coherent => coherent_step(y),
        }
    }

    /// Slope of the map, constant on each branch.
    pub fn slope(self) -> f64 {
        match self {
            StepKind::Bernoulli => 2.0,
            StepKind::Coherent => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapOrbit {
    pub y0: f64,
    pub ys: Vec<f64>,
    /// `1` where the orbit sits in the upper (`Plus`) half.
    pub branch_bits: Vec<u8>,
}

pub fn branch_bit(y: f64) -> u8 {
    u8::from(y > 0.5)
}

pub fn iterate_map(y0: f64, n: usize, kind: StepKind) -> Result<MapOrbit> {
    if !(0.0..=1.0).contains(&y0) {
        return Err(Error::invalid("y0", format!("{y0} outside [0, 1]")));
    }
    let mut ys = Vec::with_capacity(n + 1);
    ys.push(y0);
    for i in 0..n {
        ys.push(kind.apply(ys[i]));
    }
    Ok(MapOrbit {
        y0,
        branch_bits: ys.iter().map(|&y| branch_bit(y)).collect(),
        ys,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub exponent: f64,
    /// Lyapunov time `δt/|λ|`.
    pub tau: f64,
    /// Number of steps the separation was followed.
    pub window: usize,
}

/// Growth rate of the separation between orbits from `y0` and `y0 + delta0`.
///
/// Separations are measured on the circle (`y ~ y + 1`), and `delta0` is the
/// difference actually representable in floating point.
pub fn lyapunov_estimate(y0: f64, delta0: f64, n: usize, kind: StepKind, step_delay: f64) -> Result<LyapunovReport> {
    if n == 0 || !(delta0 > 0.0) {
        return Err(Error::invalid("window", "need n > 0 and delta0 > 0"));
    }
    let predicted = delta0 * kind.slope().powi(n as i32);
    if predicted >= 0.1 {
        return Err(Error::SaturatedSeparation { predicted });
    }
    let (mut a, mut b) = (y0, y0 + delta0);
    let d0 = b - a;
    for _ in 0..n {
        a = kind.apply(a);
        b = kind.apply(b);
    }
    let d = (b - a).abs();
    let dn = d.min(1.0 - d);
    let exponent = (dn / d0).ln() / n as f64;
    Ok(LyapunovReport {
        exponent,
        tau: step_delay / exponent.abs(),
        window: n,
    })
}

/// First step at which two orbits are more than `threshold` apart on the circle.
pub fn divergence_step(a: &MapOrbit, b: &MapOrbit, threshold: f64) -> Option<usize> {
    a.ys.iter().zip(&b.ys).position(|(x, y)| {
        let d = (x - y).abs();
        d.min(1.0 - d) > threshold
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn seg(epoch: Epoch, gate: Gate) -> SegmentSpec {
        SegmentSpec::new(epoch, gate, 100.0, 40.0).unwrap()
    }

    #[test]
    fn segment_coordinates() {
        let plus = seg(Epoch::Initial, Gate::Plus);
        assert_eq!(x_to_y(100.0, &plus).unwrap(), 0.75);
        assert_eq!(x_to_y(120.0, &plus).unwrap(), 1.0);
        assert_eq!(x_to_y(-100.0, &plus.in_gate(Gate::Minus)).unwrap(), 0.25);
        assert!(matches!(x_to_y(50.0, &plus), Err(Error::OutOfSupport { .. })));
        let fin = seg(Epoch::Final, Gate::Plus);
        assert_eq!(y_to_x(0.75, &fin).unwrap(), 100.0);
        assert_eq!(y_to_x(0.5, &fin).unwrap(), 80.0);
        assert!(matches!(y_to_x(0.3, &fin), Err(Error::WrongHalfInterval { .. })));
        assert!(SegmentSpec::new(Epoch::Initial, Gate::Plus, 10.0, 20.0).is_err());
    }

    #[test]
    fn steps() {
        assert!((bernoulli_step(0.22) - 0.44).abs() < 1e-15);
        assert_eq!(bernoulli_step(0.75), 0.5);
        assert_eq!(bernoulli_step(0.5), 0.0);
        assert_eq!(coherent_step(0.0), 0.5);
        assert_eq!(coherent_step(1.0), 1.0);
    }

    #[test]
    fn orbits() {
        let o = iterate_map(0.22, 5, StepKind::Bernoulli).unwrap();
        for (y, e) in o.ys.iter().zip([0.22, 0.44, 0.88, 0.76, 0.52, 0.04]) {
            assert!((y - e).abs() < 1e-12);
        }
        assert_eq!(o.branch_bits, vec![0, 0, 1, 1, 1, 0]);
        let o = iterate_map(0.6875, 4, StepKind::Bernoulli).unwrap();
        assert_eq!(*o.ys.last().unwrap(), 0.0);
        let o = iterate_map(1.0 / 3.0, 6, StepKind::Bernoulli).unwrap();
        for (i, y) in o.ys.iter().enumerate() {
            let e = if i % 2 == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
            assert!((y - e).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov() {
        let r = lyapunov_estimate(0.22, 1e-9, 10, StepKind::Bernoulli, 1.0).unwrap();
        assert!((r.exponent - LN_2).abs() < 1e-12);
        assert!((r.tau - 1.0 / LN_2).abs() < 1e-12);
        // A contraction never saturates; a wide start keeps rounding negligible.
        let c = lyapunov_estimate(0.22, 1e-3, 10, StepKind::Coherent, 1.0).unwrap();
        assert!((c.exponent + LN_2).abs() < 1e-8);
        assert!(matches!(
            lyapunov_estimate(0.22, 1e-3, 10, StepKind::Bernoulli, 1.0),
            Err(Error::SaturatedSeparation { .. })
        ));
    }

    #[test]
    fn orbits_diverge_within_25_steps() {
        let a = iterate_map(0.22, 25, StepKind::Bernoulli).unwrap();
        let b = iterate_map(0.220001, 25, StepKind::Bernoulli).unwrap();
        let n = divergence_step(&a, &b, 0.1).unwrap();
        assert!(n <= 25 && n > 10, "{n}");
    }

    #[test]
    fn coherent_pushforward_of_uniform_is_uniform_on_upper_half() {
        let n = 100_000;
        let mut hist = [0usize; 4];
        for i in 0..n {
            let y = coherent_step((i as f64 + 0.5) / n as f64);
            hist[((y * 4.0) as usize).min(3)] += 1;
        }
        assert_eq!(hist[0] + hist[1], 0);
        for h in &hist[2..] {
            // Density 2 on [1/2, 1]: each quarter holds half the mass.
            assert!((*h as f64 / n as f64 - 0.5).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn round_trip(y in 0.0f64..=1.0, c in 30.0f64..200.0, l in 1.0f64..50.0) {
            let gate = if y >= 0.5 { Gate::Plus } else { Gate::Minus };
            let s = SegmentSpec::new(Epoch::Final, gate, c.max(0.6 * l), l).unwrap();
            let back = x_to_y(y_to_x(y, &s).unwrap(), &s).unwrap();
            prop_assert!((back - y).abs() < 1e-12);
        }

        #[test]
        fn doubling_preserves_uniform_measure(seed in 0u64..1000) {
            // Pushforward of a stratified uniform sample stays uniform.
            let n = 4096;
            let shift = (seed as f64 + 0.5) / 1000.0 / n as f64;
            let mut hist = [0usize; 8];
            for i in 0..n {
                let y = bernoulli_step(i as f64 / n as f64 + shift);
                hist[((y * 8.0) as usize).min(7)] += 1;
            }
            for h in hist {
                prop_assert!((h as i64 - 512).abs() <= 1);
            }
        }
    }
}
