//! The two-gate splitter run shared by the scattering, trajectory and
//! coherent scenarios and by `verify`.
//!
//! One lockstep run carries the channels `[ψ₊, iψ₋]` and several particle
//! groups: channel 0 alone is the single-gate experiment, a particle guided by
//! the channel of its own gate sees the decohered splitter, and the channel
//! sum is the coherent superposition.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::maps::{unchecked_x_to_y, y_to_x, Epoch, Gate, StepKind};
use crate::splitter::{Splitter, SplitterSetup};
use crate::trajectories::{born_samples, histogram_distance, EnsembleFates, EquivarianceReport, Guide, LockstepRun, Particle};
use crate::wavefield::GridWavefunction;

/// Half-width of the band around the unstable points `y = 1/4, 3/4` left out
/// of the conjugacy checks.
pub const INSTABILITY_MARGIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PairOptions {
    /// Evenly spaced particles across the `Plus` packet.
    pub uniform: usize,
    /// Born-distributed particles in the `Plus` packet.
    pub born: usize,
    /// `y` grid size for each of the decohered and coherent groups.
    pub conjugacy: usize,
    pub seed: u64,
    pub record_every: usize,
    pub snapshot_every: Option<usize>,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            uniform: 200,
            born: 2000,
            conjugacy: 80,
            seed: 0,
            record_every: 10,
            snapshot_every: None,
        }
    }
}

pub struct PairRun {
    pub splitter: Splitter,
    pub run: LockstepRun,
    pub uniform: Range<usize>,
    pub born: Range<usize>,
    pub decohered: Range<usize>,
    pub coherent: Range<usize>,
    /// Initial `y` of the particles in each conjugacy group.
    pub conjugacy_y: Vec<f64>,
}

/// `y` values spread over `[0, 1]`, avoiding the unstable points and the
/// packet edges `y = 0, 1/2, 1` by `edge_margin`.
///
/// Near the edges the density ramps off, so a coordinate linear in `x` no
/// longer tracks the Born measure that the flow carries across.
pub fn conjugacy_grid(n: usize, edge_margin: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (i as f64 + 0.5) / n as f64)
        .filter(|y| (y - 0.25).abs() >= INSTABILITY_MARGIN && (y - 0.75).abs() >= INSTABILITY_MARGIN)
        .filter(|y| [0.0, 0.5, 1.0].iter().all(|e| (y - e).abs() >= edge_margin))
        .collect()
}

impl PairRun {
    pub fn execute(setup: SplitterSetup, opts: &PairOptions) -> Result<Self> {
        let splitter = Splitter::new(setup)?;
        let channels = splitter.branch_pair()?;
        let mut particles = Vec::new();
        let group = |particles: &mut Vec<Particle>, xs: &[f64], guide: &dyn Fn(f64) -> Guide| {
            let start = particles.len();
            particles.extend(xs.iter().map(|&x0| Particle { x0, guide: guide(x0) }));
            start..particles.len()
        };
        let uniform = group(&mut particles, &splitter.uniform_positions(Gate::Plus, opts.uniform), &|_| Guide::Channel(0));
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let born_x = born_samples(&channels[0], opts.born, &mut rng)?;
        let born = group(&mut particles, &born_x, &|_| Guide::Channel(0));

        // One full ramp width in y: half of it lies inside the nominal packet,
        // the rest allows for spreading on the way to the barrier and back.
        let edge_margin = splitter.ramp / (2.0 * splitter.length);
        let conjugacy_y = conjugacy_grid(opts.conjugacy, edge_margin);
        let conj_x = conjugacy_y
            .iter()
            .map(|&y| {
                let gate = if y >= 0.5 { Gate::Plus } else { Gate::Minus };
                y_to_x(y, &splitter.segment(Epoch::Initial, gate)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let own_channel = |x: f64| match Gate::of(x) {
            Gate::Plus => Guide::Channel(0),
            Gate::Minus => Guide::Channel(1),
        };
        let decohered = group(&mut particles, &conj_x, &own_channel);
        let coherent = group(&mut particles, &conj_x, &|_| Guide::Sum);

        let run = splitter.run(channels, &particles, opts.record_every, opts.snapshot_every)?;
        Ok(Self {
            splitter,
            run,
            uniform,
            born,
            decohered,
            coherent,
            conjugacy_y,
        })
    }

    /// Final state of the single packet from the `Plus` gate.
    pub fn single_final(&self) -> &GridWavefunction {
        &self.run.final_states[0]
    }

    /// `(ψ₊ + iψ₋)/√2` from the two channels.
    pub fn coherent_of(states: &[GridWavefunction]) -> Result<GridWavefunction> {
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        states[0].superpose(a, &states[1], a)
    }

    pub fn scatter_report(&self) -> ScatterReport {
        let psi = self.single_final();
        let (plus, minus) = self.splitter.gate_norms(psi);
        let total = psi.norm();
        ScatterReport {
            reflected: plus / total,
            transmitted: minus / total,
            expected_reflected: self.splitter.amplitudes.reflectance(),
            expected_transmitted: self.splitter.amplitudes.transmittance(),
            norm_drift: self.run.norm_drift.iter().copied().fold(0.0, f64::max),
            band_overlap: self.splitter.fate_rule(psi, Gate::Plus).overlap,
        }
    }

    pub fn uniform_fates(&self) -> Result<EnsembleFates> {
        let rule = self.splitter.fate_rule(self.single_final(), Gate::Plus);
        EnsembleFates::from_trajectories(&self.run.trajectories[self.uniform.clone()], &rule)
    }

    pub fn equivariance(&self, bins: usize) -> Result<EquivarianceReport> {
        let finals: Vec<f64> = self.run.trajectories[self.born.clone()]
            .iter()
            .map(|t| t.final_position())
            .collect();
        histogram_distance(&finals, self.single_final(), bins)
    }

    /// Initial and final `y` of one conjugacy group against the expected map.
    pub fn conjugacy(&self, kind: StepKind) -> ConjugacyReport {
        let range = match kind {
            StepKind::Bernoulli => self.decohered.clone(),
            StepKind::Coherent => self.coherent.clone(),
        };
        let points: Vec<ConjugacyPoint> = self.run.trajectories[range]
            .iter()
            .zip(&self.conjugacy_y)
            .map(|(traj, &y_in)| {
                let x = traj.final_position();
                let seg = self
                    .splitter
                    .segment(Epoch::Final, Gate::of(x))
                    .expect("segment geometry was validated when the run started");
                let y_out = unchecked_x_to_y(x, &seg);
                ConjugacyPoint {
                    y_in,
                    y_out,
                    expected: kind.apply(y_in),
                    complete: traj.is_complete(),
                }
            })
            .collect();
        ConjugacyReport { kind, points }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterReport {
    pub reflected: f64,
    pub transmitted: f64,
    pub expected_reflected: f64,
    pub expected_transmitted: f64,
    pub norm_drift: f64,
    /// Norm fraction still in the central band at `t_f`.
    pub band_overlap: f64,
}

impl ScatterReport {
    /// Largest relative deviation of the two output norms from `|R|², |T|²`.
    pub fn relative_error(&self) -> f64 {
        ((self.reflected - self.expected_reflected) / self.expected_reflected)
            .abs()
            .max(((self.transmitted - self.expected_transmitted) / self.expected_transmitted).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugacyPoint {
    pub y_in: f64,
    pub y_out: f64,
    pub expected: f64,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyReport {
    pub kind: StepKind,
    pub points: Vec<ConjugacyPoint>,
}

/// Least-squares line `y_out = slope·y_in + offset` over one map branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchFit {
    pub slope: f64,
    pub offset: f64,
}

impl ConjugacyReport {
    pub fn max_error(&self) -> f64 {
        self.points
            .iter()
            .map(|p| if p.complete { (p.y_out - p.expected).abs() } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    /// Line fits on `y_in < 1/2` and `y_in > 1/2`.
    pub fn branch_fits(&self) -> [BranchFit; 2] {
        let fit = |lower: bool| {
            let pts: Vec<(f64, f64)> = self
                .points
                .iter()
                .filter(|p| (p.y_in < 0.5) == lower)
                .map(|p| (p.y_in, p.y_out))
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            BranchFit {
                slope,
                offset: my - slope * mx,
            }
        };
        [fit(true), fit(false)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectories::Fate;
    use crate::wavefield::PropagatorConfig;

    #[test]
    fn grid_skips_the_unstable_points() {
        let ys = conjugacy_grid(40, 0.0);
        assert!(ys.iter().all(|y| (y - 0.25).abs() >= 0.05 && (y - 0.75).abs() >= 0.05));
        assert_eq!(ys.len(), 32);
        assert_eq!(conjugacy_grid(40, 0.02).len(), 28);
    }

    #[test]
    fn coarse_pair_run_reproduces_both_maps() {
        let setup = SplitterSetup {
            packet_wavelengths: 10.0,
            points_per_wavelength: 40.0,
            propagator: PropagatorConfig {
                edge_tolerance: 1e-4,
                ..PropagatorConfig::default()
            },
            ..SplitterSetup::default()
        };
        let opts = PairOptions {
            uniform: 40,
            born: 400,
            conjugacy: 20,
            seed: 5,
            record_every: 50,
            snapshot_every: None,
        };
        let pair = PairRun::execute(setup, &opts).unwrap();
        let report = pair.scatter_report();
        assert!((report.reflected - 0.5).abs() < 0.03, "{report:?}");
        let fates = pair.uniform_fates().unwrap();
        assert!((fates.fraction(Fate::Reflected) - 0.5).abs() < 0.06);
        // Coarse grid: only a loose version of the map checks.
        assert!(pair.conjugacy(StepKind::Bernoulli).max_error() < 0.06);
        assert!(pair.conjugacy(StepKind::Coherent).max_error() < 0.06);
        let [lo, hi] = pair.conjugacy(StepKind::Bernoulli).branch_fits();
        assert!((lo.slope - 2.0).abs() < 0.1 && (hi.offset + 1.0).abs() < 0.1);
    }
}
