//! RK4 integration of the guidance equation with step halving near nodes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::VelocityField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    /// Smallest step the halving may reach before a trajectory is declared trapped.
    pub dt_min: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { dt_min: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Reflected,
    Transmitted,
    Undecided,
}

impl fmt::Display for Fate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fate::Reflected => "reflected",
            Fate::Transmitted => "transmitted",
            Fate::Undecided => "undecided",
        })
    }
}

/// Output regions of the two packets and the fraction of the norm not yet in
/// either at the classification time. Positions outside both regions, or in
/// both, are `Undecided`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FateRule {
    pub reflected: (f64, f64),
    pub transmitted: (f64, f64),
    /// Fraction of the norm outside both regions.
    pub overlap: f64,
    /// Overlap below which the packets count as fully separated.
    pub overlap_limit: f64,
}

impl FateRule {
    pub fn new(reflected: (f64, f64), transmitted: (f64, f64)) -> Self {
        Self {
            reflected,
            transmitted,
            overlap: 0.0,
            overlap_limit: 1e-4,
        }
    }

    pub fn with_overlap(mut self, overlap: f64) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn is_resolved(&self) -> bool {
        self.overlap < self.overlap_limit
    }

    pub fn classify(&self, x: f64) -> Fate {
        let inside = |(lo, hi): (f64, f64)| x >= lo && x <= hi;
        if inside(self.reflected) && !inside(self.transmitted) {
            Fate::Reflected
        } else if inside(self.transmitted) && !inside(self.reflected) {
            Fate::Transmitted
        } else {
            Fate::Undecided
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub fate: Fate,
    /// Why integration stopped early, if it did.
    pub issue: Option<String>,
}

impl Trajectory {
    pub fn start(x0: f64, t0: f64) -> Self {
        Self {
            times: vec![t0],
            positions: vec![x0],
            fate: Fate::Undecided,
            issue: None,
        }
    }

    pub fn x0(&self) -> f64 {
        self.positions[0]
    }

    pub fn final_position(&self) -> f64 {
        *self.positions.last().expect("trajectory has a start point")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a start point")
    }

    pub fn is_complete(&self) -> bool {
        self.issue.is_none()
    }

    pub(crate) fn push(&mut self, t: f64, x: f64) {
        if t > self.final_time() {
            self.times.push(t);
            self.positions.push(x);
        }
    }

    pub fn classify(&mut self, rule: &FateRule) {
        self.fate = if self.is_complete() {
            rule.classify(self.final_position())
        } else {
            Fate::Undecided
        };
    }
}

/// One classical RK4 step.
pub fn rk4_step(field: &impl VelocityField, x: f64, t: f64, h: f64) -> Result<f64> {
    let k1 = field.velocity(x, t)?;
    let k2 = field.velocity(x + 0.5 * h * k1, t + 0.5 * h)?;
    let k3 = field.velocity(x + 0.5 * h * k2, t + 0.5 * h)?;
    let k4 = field.velocity(x + h * k3, t + h)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Advances by `h`, splitting the step in halves whenever a stage lands on a node.
pub fn advance(field: &impl VelocityField, x: f64, t: f64, h: f64, opts: &IntegratorOptions) -> Result<f64> {
    match rk4_step(field, x, t, h) {
        Err(Error::NodeSingularity { .. }) => {
            let half = 0.5 * h;
            if half < opts.dt_min {
                return Err(Error::StepUnderflow {
                    t,
                    x,
                    dt_min: opts.dt_min,
                });
            }
            let mid = advance(field, x, t, half, opts)?;
            advance(field, mid, t + half, half, opts)
        }
        other => other,
    }
}

/// Integrates from `x0` over `t_span` with steps no larger than `dt`.
///
/// A trapped trajectory is returned with its issue recorded and fate
/// `Undecided`; other errors abort.
pub fn integrate_trajectory(
    x0: f64,
    field: &impl VelocityField,
    t_span: (f64, f64),
    dt: f64,
    opts: &IntegratorOptions,
    rule: Option<&FateRule>,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(dt > 0.0) || !(t1 >= t0) {
        return Err(Error::invalid("t_span", "need dt > 0 and t1 >= t0"));
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut traj = Trajectory::start(x0, t0);
    if n == 0 {
        return Ok(traj);
    }
    let h = (t1 - t0) / n as f64;
    let mut x = x0;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        match advance(field, x, t, h, opts) {
            Ok(next) => x = next,
            Err(e @ Error::StepUnderflow { .. }) => {
                traj.issue = Some(e.to_string());
                return Ok(traj);
            }
            Err(e) => return Err(e),
        }
        traj.push(t0 + (i + 1) as f64 * h, x);
    }
    if let Some(rule) = rule {
        traj.classify(rule);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear;
    impl VelocityField for Linear {
        fn velocity(&self, x: f64, _t: f64) -> Result<f64> {
            Ok(-0.5 * x)
        }
    }

    /// Velocity that is singular in a thin band around the origin.
    struct Wall;
    impl VelocityField for Wall {
        fn velocity(&self, x: f64, _t: f64) -> Result<f64> {
            if x.abs() < 1e-3 {
                Err(Error::NodeSingularity {
                    x,
                    density: 0.0,
                    floor: 1.0,
                })
            } else {
                Ok(1.0)
            }
        }
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let traj = integrate_trajectory(2.0, &Linear, (0.0, 4.0), 0.01, &Default::default(), None).unwrap();
        let expected = 2.0 * (-2.0f64).exp();
        assert!((traj.final_position() - expected).abs() < 1e-10);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.final_time(), 4.0);
    }

    #[test]
    fn node_band_traps_with_underflow() {
        let traj = integrate_trajectory(-0.5, &Wall, (0.0, 2.0), 0.1, &Default::default(), None).unwrap();
        assert!(traj.issue.as_deref().unwrap().contains("step underflow"));
        assert!(traj.final_position() < 0.0);
        assert_eq!(traj.fate, Fate::Undecided);
    }

    #[test]
    fn rule_classifies_by_support_and_overlap() {
        let rule = FateRule::new((5.0, 10.0), (-10.0, -5.0));
        assert_eq!(rule.classify(6.0), Fate::Reflected);
        assert_eq!(rule.classify(-6.0), Fate::Transmitted);
        assert_eq!(rule.classify(0.0), Fate::Undecided);
        let rule = rule.with_overlap(1e-3);
        assert!(!rule.is_resolved());
        assert_eq!(rule.classify(6.0), Fate::Reflected);
    }
}
