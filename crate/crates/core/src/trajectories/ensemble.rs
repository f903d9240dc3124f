//! Ensembles of trajectories: fates, the reflection/transmission split and
//! lockstep integration alongside the Schrödinger propagator.

use rayon::prelude::*;
use serde::Serialize;

use super::{advance, integrate_trajectory, Fate, FateRule, FrameSeries, Guide, IntegratorOptions, Trajectory, VelocityField};
use crate::error::{Error, Result};
use crate::wavefield::{GridWavefunction, Propagator};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleFates {
    pub initial_positions: Vec<f64>,
    pub final_positions: Vec<f64>,
    pub fates: Vec<Fate>,
    /// Boundary between the reflected and transmitted blocks, when both occur
    /// and each forms one contiguous block.
    pub split_point: Option<f64>,
    /// Trajectories that stopped at a node.
    pub trapped: usize,
}

impl EnsembleFates {
    /// Classifies complete trajectories and checks that their order is kept.
    pub fn from_trajectories(trajectories: &[Trajectory], rule: &FateRule) -> Result<Self> {
        let initial: Vec<f64> = trajectories.iter().map(Trajectory::x0).collect();
        if initial.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("x0", "initial positions must be sorted"));
        }
        let mut last: Option<f64> = None;
        for (index, t) in trajectories.iter().enumerate() {
            if !t.is_complete() {
                continue;
            }
            let x = t.final_position();
            if last.is_some_and(|prev| x < prev) {
                return Err(Error::OrderViolation { index });
            }
            last = Some(x);
        }
        let fates: Vec<Fate> = trajectories
            .iter()
            .map(|t| if t.is_complete() { rule.classify(t.final_position()) } else { Fate::Undecided })
            .collect();
        Ok(Self {
            split_point: split_point(&initial, &fates),
            final_positions: trajectories.iter().map(Trajectory::final_position).collect(),
            trapped: trajectories.iter().filter(|t| !t.is_complete()).count(),
            initial_positions: initial,
            fates,
        })
    }

    pub fn fraction(&self, fate: Fate) -> f64 {
        self.fates.iter().filter(|&&f| f == fate).count() as f64 / self.fates.len().max(1) as f64
    }
}

/// Midpoint between the last member of the lower block and the first of the
/// upper block, if the decided fates form exactly two blocks.
fn split_point(x0: &[f64], fates: &[Fate]) -> Option<f64> {
    let decided: Vec<(f64, Fate)> = x0
        .iter()
        .zip(fates)
        .filter(|(_, f)| **f != Fate::Undecided)
        .map(|(x, f)| (*x, *f))
        .collect();
    let changes: Vec<usize> = (1..decided.len()).filter(|&i| decided[i].1 != decided[i - 1].1).collect();
    match changes.as_slice() {
        [i] => Some(0.5 * (decided[i - 1].0 + decided[*i].0)),
        _ => None,
    }
}

/// Integrates every start point in `field` and classifies the ensemble.
pub fn ensemble_fates(
    x0: &[f64],
    field: &impl VelocityField,
    t_span: (f64, f64),
    dt: f64,
    opts: &IntegratorOptions,
    rule: &FateRule,
) -> Result<(EnsembleFates, Vec<Trajectory>)> {
    let trajectories = x0
        .par_iter()
        .map(|&x| integrate_trajectory(x, field, t_span, dt, opts, Some(rule)))
        .collect::<Result<Vec<_>>>()?;
    Ok((EnsembleFates::from_trajectories(&trajectories, rule)?, trajectories))
}

/// A particle started at `x0` and guided by one channel, or all channels summed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub x0: f64,
    pub guide: Guide,
}

#[derive(Clone, Debug)]
pub struct LockstepConfig {
    /// Propagator steps per trajectory step; even so the RK4 midpoint is a PDE state.
    pub stride: usize,
    /// Number of trajectory steps.
    pub macro_steps: usize,
    /// Keep positions every this many trajectory steps (the last is always kept).
    pub record_every: usize,
    /// Keep field snapshots every this many trajectory steps.
    pub snapshot_every: Option<usize>,
    /// Further trajectory-step counts after which to keep a snapshot.
    pub snapshot_at: Vec<usize>,
    pub integrator: IntegratorOptions,
    pub node_floor: f64,
}

impl Default for LockstepConfig {
    fn default() -> Self {
        Self {
            stride: 8,
            macro_steps: 0,
            record_every: 1,
            snapshot_every: None,
            snapshot_at: Vec::new(),
            integrator: IntegratorOptions::default(),
            node_floor: super::NODE_FLOOR,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LockstepRun {
    pub final_states: Vec<GridWavefunction>,
    pub trajectories: Vec<Trajectory>,
    /// Field snapshots per channel, including the initial state.
    pub snapshots: Vec<Vec<GridWavefunction>>,
    pub norm_drift: Vec<f64>,
}

/// Evolves each channel with its propagator while moving the particles.
///
/// Each trajectory step spans `stride` propagator steps; the RK4 stages read
/// the exact PDE states at its start, midpoint and end, and halved sub-steps
/// interpolate linearly in time between them.
pub fn co_evolve(
    propagators: &[&Propagator],
    initial: Vec<GridWavefunction>,
    particles: &[Particle],
    cfg: &LockstepConfig,
) -> Result<LockstepRun> {
    if propagators.len() != initial.len() || initial.is_empty() {
        return Err(Error::invalid("channels", "need one propagator per initial state"));
    }
    if cfg.stride == 0 || cfg.stride % 2 != 0 {
        return Err(Error::invalid("stride", "must be a positive even number"));
    }
    let t0 = initial[0].t();
    if initial.iter().any(|s| s.t() != t0) {
        return Err(Error::invalid("channels", "initial states at different times"));
    }
    let half = cfg.stride / 2;
    let h = propagators[0].dt() * cfg.stride as f64;
    let n_channels = initial.len();

    let mut snapshots: Vec<Vec<GridWavefunction>> = initial.iter().map(|s| vec![s.clone()]).collect();
    let mut frames: Vec<Vec<GridWavefunction>> = initial.iter().map(|s| vec![s.clone(); 3]).collect();
    let mut steppers: Vec<_> = propagators.iter().zip(initial).map(|(p, s)| p.stepper(s)).collect();
    let mut trajectories: Vec<Trajectory> = particles.iter().map(|p| Trajectory::start(p.x0, t0)).collect();
    let mut positions: Vec<f64> = particles.iter().map(|p| p.x0).collect();

    for step in 0..cfg.macro_steps {
        steppers
            .par_iter_mut()
            .zip(frames.par_iter_mut())
            .try_for_each(|(stepper, f)| -> Result<()> {
                f.swap(0, 2);
                if step == 0 {
                    f[0] = stepper.state().clone();
                }
                stepper.advance(half)?;
                f[1] = stepper.state().clone();
                stepper.advance(half)?;
                f[2] = stepper.state().clone();
                Ok(())
            })?;
        let t_start = frames[0][0].t();
        let series = FrameSeries::new(frames.iter().map(Vec::as_slice).collect(), Guide::Sum)?
            .with_node_floor(cfg.node_floor);
        let by_guide: Vec<FrameSeries> = (0..n_channels)
            .map(Guide::Channel)
            .chain([Guide::Sum])
            .map(|g| series.with_guide(g))
            .collect::<Result<_>>()?;

        let record = (step + 1) % cfg.record_every.max(1) == 0 || step + 1 == cfg.macro_steps;
        let t_end = frames[0][2].t();
        positions
            .par_iter_mut()
            .zip(trajectories.par_iter_mut())
            .zip(particles.par_iter())
            .try_for_each(|((x, traj), particle)| -> Result<()> {
                if !traj.is_complete() {
                    return Ok(());
                }
                let field = match particle.guide {
                    Guide::Channel(c) => &by_guide[c],
                    Guide::Sum => &by_guide[n_channels],
                };
                match advance(field, *x, t_start, h, &cfg.integrator) {
                    Ok(next) => {
                        *x = next;
                        if record {
                            traj.push(t_end, next);
                        }
                        Ok(())
                    }
                    Err(e @ Error::StepUnderflow { .. }) => {
                        traj.push(t_start, *x);
                        traj.issue = Some(e.to_string());
                        Ok(())
                    }
                    Err(e) => Err(e),
                }
            })?;

        let periodic = cfg.snapshot_every.is_some_and(|every| every > 0 && (step + 1) % every == 0);
        if periodic || cfg.snapshot_at.contains(&(step + 1)) {
            for (c, f) in frames.iter().enumerate() {
                snapshots[c].push(f[2].clone());
            }
        }
    }

    let norm_drift = steppers.iter().map(|s| s.norm_drift()).collect();
    Ok(LockstepRun {
        final_states: steppers.into_iter().map(|s| s.into_state()).collect(),
        trajectories,
        snapshots,
        norm_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{init_packet, time_step_bound, Grid, PacketGridRules, PropagatorConfig, Units, WavePacketSpec};

    #[test]
    fn split_point_needs_two_blocks() {
        use Fate::*;
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(split_point(&x, &[Transmitted, Transmitted, Undecided, Reflected, Reflected]), Some(1.5 + 0.5));
        assert_eq!(split_point(&x, &[Reflected; 5]), None);
        assert_eq!(split_point(&x, &[Reflected, Transmitted, Reflected, Reflected, Reflected]), None);
    }

    #[test]
    fn crossing_is_an_order_violation() {
        let mut a = Trajectory::start(0.0, 0.0);
        a.push(1.0, 2.0);
        let mut b = Trajectory::start(1.0, 0.0);
        b.push(1.0, 1.0);
        let rule = FateRule::new((0.0, 10.0), (-10.0, -1.0));
        assert!(matches!(
            EnsembleFates::from_trajectories(&[a, b], &rule),
            Err(Error::OrderViolation { index: 1 })
        ));
    }

    #[test]
    fn free_packet_trajectories_co_move() {
        let units = Units::default();
        let k = -1.0;
        let spec = WavePacketSpec::new(20.0 * std::f64::consts::TAU, k, 0.0);
        let dx = spec.wavelength() / 40.0;
        let grid = Grid::symmetric(320.0, dx).unwrap();
        let psi = init_packet(&spec, grid, units, PacketGridRules::default()).unwrap();
        let dt = time_step_bound(dx, units);
        let prop = Propagator::new(grid, units, &vec![0.0; grid.len], dt, PropagatorConfig::default()).unwrap();
        let inner = [-30.0, -10.0, 0.0, 10.0, 30.0];
        let particles: Vec<Particle> = inner.iter().map(|&x0| Particle { x0, guide: Guide::Channel(0) }).collect();
        let cfg = LockstepConfig {
            stride: 8,
            macro_steps: 500,
            record_every: 100,
            ..Default::default()
        };
        let run = co_evolve(&[&prop], vec![psi], &particles, &cfg).unwrap();
        let t = run.trajectories[0].final_time();
        for tr in &run.trajectories {
            let moved = tr.final_position() - tr.x0();
            assert!((moved - k * t).abs() < 0.005 * (k * t).abs(), "{moved} vs {}", k * t);
        }
        assert!(run.norm_drift[0] < 1e-7);
    }
}
