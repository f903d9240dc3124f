//! The barrier beam splitter on the grid: geometry, incident packets,
//! lockstep runs and what is read off their outputs.
//!
//! Packets start centred at `±x_in` at `t_in = −x_in/v` and are read out at
//! `t_f = −t_in`, so the packet centre meets the barrier at `t = 0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Epoch, Gate, SegmentSpec};
use crate::trajectories::{co_evolve, FateRule, Guide, LockstepConfig, LockstepRun, Particle};
use crate::wavefield::{
    calibrate_interior_ratio, init_packet, scattering_amplitudes, time_step_bound, width_for_reflectance, BarrierSpec,
    Grid, GridWavefunction, PacketGridRules, Propagator, PropagatorConfig, ScatteringAmplitudes, Units,
    WavePacketSpec,
};

/// Which barrier parameter is solved for to hit the target reflectance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    /// Use `interior_ratio` and `barrier_width` as given.
    None,
    /// Adjust `q/k` near `interior_ratio` at the given width.
    Ratio,
    /// Adjust the width at the given `q/k`.
    Width,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitterSetup {
    pub units: Units,
    /// `|k|` of the carrier.
    pub wavenumber: f64,
    pub packet_wavelengths: f64,
    pub edge_ramp_wavelengths: f64,
    pub interior_ratio: f64,
    /// Defaults to `λ/4π`.
    pub barrier_width: Option<f64>,
    pub target_reflectance: f64,
    pub tuning: Tuning,
    /// Clearance between the packet and the barrier at the start, in wavelengths.
    pub gap_wavelengths: f64,
    pub points_per_wavelength: f64,
    /// Time step as a multiple of the accuracy bound.
    pub dt_factor: f64,
    /// Propagator steps per trajectory step.
    pub stride: usize,
    pub propagator: PropagatorConfig,
}

impl Default for SplitterSetup {
    fn default() -> Self {
        Self {
            units: Units::default(),
            wavenumber: 1.0,
            packet_wavelengths: 20.0,
            edge_ramp_wavelengths: 1.0,
            interior_ratio: 2.5,
            barrier_width: None,
            target_reflectance: 0.5,
            tuning: Tuning::Ratio,
            gap_wavelengths: 2.0,
            points_per_wavelength: 100.0,
            dt_factor: 1.0,
            stride: 8,
            propagator: PropagatorConfig::default(),
        }
    }
}

impl SplitterSetup {
    /// The asymmetric splitter: width tuned at `q/k = 2.5` for `|R|² = reflectance`.
    pub fn asymmetric(reflectance: f64) -> Self {
        Self {
            target_reflectance: reflectance,
            tuning: Tuning::Width,
            ..Self::default()
        }
    }
}

/// A resolved splitter experiment.
#[derive(Clone, Debug)]
pub struct Splitter {
    pub setup: SplitterSetup,
    /// Signed carrier wavenumber of the packet incident from `x > 0` (negative).
    pub k: f64,
    pub wavelength: f64,
    pub length: f64,
    pub ramp: f64,
    pub barrier: BarrierSpec,
    pub interior_ratio: f64,
    pub amplitudes: ScatteringAmplitudes,
    pub grid: Grid,
    pub dt: f64,
    pub macro_steps: usize,
    pub t_in: f64,
    pub x_in: f64,
    propagator: Propagator,
}

impl Splitter {
    pub fn new(setup: SplitterSetup) -> Result<Self> {
        let s = &setup;
        if !(s.wavenumber > 0.0) {
            return Err(Error::invalid("wavenumber", "must be positive"));
        }
        if s.stride == 0 || s.stride % 2 != 0 {
            return Err(Error::invalid("stride", "must be a positive even number"));
        }
        if !(s.dt_factor > 0.0) || !(s.gap_wavelengths >= 0.0) {
            return Err(Error::invalid("dt_factor", "dt_factor must be positive and the gap non-negative"));
        }
        let units = s.units;
        let k = -s.wavenumber;
        let wavelength = 2.0 * PI / s.wavenumber;
        let length = s.packet_wavelengths * wavelength;
        let ramp = s.edge_ramp_wavelengths * wavelength;
        let width0 = s.barrier_width.unwrap_or(wavelength / (4.0 * PI));
        let (ratio, width) = match s.tuning {
            Tuning::None => (s.interior_ratio, width0),
            Tuning::Ratio => {
                let bracket = (0.9 * s.interior_ratio, 1.1 * s.interior_ratio);
                (calibrate_interior_ratio(k, width0, s.target_reflectance, bracket, units)?, width0)
            }
            Tuning::Width => (
                s.interior_ratio,
                width_for_reflectance(k, s.interior_ratio, s.target_reflectance, units)?,
            ),
        };
        let barrier = BarrierSpec::from_interior_ratio(k, ratio, width, units);
        barrier.validate()?;
        let amplitudes = scattering_amplitudes(k, &barrier, units)?;

        let dx = wavelength / s.points_per_wavelength;
        let speed = units.hbar * s.wavenumber / units.mass;
        let dt = s.dt_factor * time_step_bound(dx, units);
        let clearance = 0.5 * (length + ramp) + 0.5 * width + s.gap_wavelengths * wavelength;
        let macro_dt = dt * s.stride as f64;
        let half_macros = (clearance / speed / macro_dt).ceil() as usize;
        let t_in = -(half_macros as f64) * macro_dt;
        let x_in = -speed * t_in;
        let grid = Grid::symmetric(x_in + 0.5 * (length + ramp) + length + 8.0 * dx, dx)?;
        let propagator = Propagator::new(grid, units, &barrier.sample(&grid), dt, s.propagator)?;
        Ok(Self {
            k,
            wavelength,
            length,
            ramp,
            barrier,
            interior_ratio: ratio,
            amplitudes,
            grid,
            dt,
            macro_steps: 2 * half_macros,
            t_in,
            x_in,
            propagator,
            setup,
        })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn t_f(&self) -> f64 {
        -self.t_in
    }

    /// Trajectory steps from `t_in` to `t = 0`.
    pub fn steps_to_impact(&self) -> usize {
        self.macro_steps / 2
    }

    pub fn packet_spec(&self, gate: Gate) -> WavePacketSpec {
        let spec = WavePacketSpec::new(self.length, self.k, self.x_in).with_edge_ramp(self.ramp);
        match gate {
            Gate::Plus => spec,
            Gate::Minus => spec.mirrored(),
        }
    }

    /// Normalized packet entering from the given gate at `t_in`.
    pub fn incident(&self, gate: Gate) -> Result<GridWavefunction> {
        let mut psi = init_packet(&self.packet_spec(gate), self.grid, self.setup.units, PacketGridRules::default())?;
        psi.set_t(self.t_in);
        Ok(psi)
    }

    /// `(ψ₊ + iψ₋)/√2`, which a balanced splitter sends entirely into one gate.
    pub fn coherent_incident(&self) -> Result<GridWavefunction> {
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let b = Complex64::new(0.0, FRAC_1_SQRT_2);
        self.incident(Gate::Plus)?.superpose(a, &self.incident(Gate::Minus)?, b)
    }

    pub fn segment(&self, epoch: Epoch, gate: Gate) -> Result<SegmentSpec> {
        SegmentSpec::new(epoch, gate, self.x_in, self.length)
    }

    /// `n` evenly spaced points across the nominal support in a gate.
    pub fn uniform_positions(&self, gate: Gate, n: usize) -> Vec<f64> {
        let lo = gate.sign() * self.x_in - 0.5 * self.length;
        (0..n).map(|i| lo + (i as f64 + 0.5) * self.length / n as f64).collect()
    }

    /// Half-width of the band around the barrier separating the two outputs
    /// at `t_f` (the gap between their nominal supports).
    pub fn central_band(&self) -> f64 {
        self.x_in - 0.5 * (self.length + self.ramp)
    }

    /// Norms on the `x > 0` and `x < 0` sides.
    pub fn gate_norms(&self, psi: &GridWavefunction) -> (f64, f64) {
        (psi.norm_in(0.0, f64::INFINITY), psi.norm_in(f64::NEG_INFINITY, 0.0))
    }

    /// Fate rule for a packet that entered through `incident`. The outputs are
    /// the two sides beyond the central band, and the overlap is the fraction
    /// of the norm still inside it.
    pub fn fate_rule(&self, final_state: &GridWavefunction, incident: Gate) -> FateRule {
        let a = self.central_band();
        let plus = (a, f64::INFINITY);
        let minus = (f64::NEG_INFINITY, -a);
        let (r, t) = match incident {
            Gate::Plus => (plus, minus),
            Gate::Minus => (minus, plus),
        };
        FateRule::new(r, t).with_overlap(final_state.norm_in(-a, a) / final_state.norm())
    }

    pub fn lockstep_config(&self, record_every: usize, snapshot_every: Option<usize>) -> LockstepConfig {
        LockstepConfig {
            stride: self.setup.stride,
            macro_steps: self.macro_steps,
            record_every,
            snapshot_every,
            // The impact frame is always kept when snapshots are requested.
            snapshot_at: snapshot_every.map(|_| vec![self.steps_to_impact()]).unwrap_or_default(),
            ..LockstepConfig::default()
        }
    }

    /// Runs the channels from `t_in` to `t_f` with the particles.
    pub fn run(
        &self,
        initial: Vec<GridWavefunction>,
        particles: &[Particle],
        record_every: usize,
        snapshot_every: Option<usize>,
    ) -> Result<LockstepRun> {
        let props = vec![&self.propagator; initial.len()];
        co_evolve(&props, initial, particles, &self.lockstep_config(record_every, snapshot_every))
    }

    /// Single packet from `gate` guiding particles at `x0`.
    pub fn run_single(&self, gate: Gate, x0: &[f64], record_every: usize, snapshot_every: Option<usize>) -> Result<LockstepRun> {
        let particles: Vec<Particle> = x0.iter().map(|&x0| Particle { x0, guide: Guide::Channel(0) }).collect();
        self.run(vec![self.incident(gate)?], &particles, record_every, snapshot_every)
    }

    /// Both packets, each particle guided only by the branch it starts in
    /// (`[Plus, Minus]` channels, as for a definite pointer record).
    pub fn run_decohered(&self, x0: &[f64], record_every: usize) -> Result<LockstepRun> {
        let particles: Vec<Particle> = x0
            .iter()
            .map(|&x0| Particle {
                x0,
                guide: match Gate::of(x0) {
                    Gate::Plus => Guide::Channel(0),
                    Gate::Minus => Guide::Channel(1),
                },
            })
            .collect();
        self.run(
            vec![self.incident(Gate::Plus)?, self.incident(Gate::Minus)?],
            &particles,
            record_every,
            None,
        )
    }

    /// `[ψ₊, iψ₋]`: each channel guides like its own packet, and their sum is
    /// `√2` times the coherent superposition, which guides identically.
    pub fn branch_pair(&self) -> Result<Vec<GridWavefunction>> {
        let minus = self.incident(Gate::Minus)?;
        let i_minus = minus.superpose(Complex64::new(0.0, 1.0), &minus, Complex64::new(0.0, 0.0))?;
        Ok(vec![self.incident(Gate::Plus)?, i_minus])
    }

    /// The coherent superposition guiding every particle.
    pub fn run_coherent(&self, x0: &[f64], record_every: usize, snapshot_every: Option<usize>) -> Result<LockstepRun> {
        let particles: Vec<Particle> = x0.iter().map(|&x0| Particle { x0, guide: Guide::Channel(0) }).collect();
        self.run(vec![self.coherent_incident()?], &particles, record_every, snapshot_every)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectories::{EnsembleFates, Fate};

    /// Coarse geometry; its short margins let ~1e-6 of fast tails reach the walls.
    fn small() -> Splitter {
        Splitter::new(SplitterSetup {
            packet_wavelengths: 10.0,
            points_per_wavelength: 40.0,
            propagator: PropagatorConfig {
                edge_tolerance: 1e-4,
                ..PropagatorConfig::default()
            },
            ..SplitterSetup::default()
        })
        .unwrap()
    }

    #[test]
    fn geometry_puts_impact_on_a_trajectory_step() {
        let s = small();
        assert!((s.amplitudes.reflectance() - 0.5).abs() < 1e-12);
        assert_eq!(s.macro_steps % 2, 0);
        let t_mid = s.t_in + s.steps_to_impact() as f64 * s.dt * s.setup.stride as f64;
        assert!(t_mid.abs() < 1e-9);
        let (lo, _) = s.packet_spec(Gate::Plus).support();
        assert!(lo > 0.5 * s.barrier.width + s.setup.gap_wavelengths * s.wavelength - 1e-9);
    }

    #[test]
    fn asymmetric_width_hits_target() {
        let s = Splitter::new(SplitterSetup {
            packet_wavelengths: 10.0,
            points_per_wavelength: 40.0,
            ..SplitterSetup::asymmetric(0.3)
        })
        .unwrap();
        assert!((s.amplitudes.reflectance() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn coarse_run_splits_in_half() {
        let s = small();
        let x0 = s.uniform_positions(Gate::Plus, 40);
        let run = s.run_single(Gate::Plus, &x0, 50, None).unwrap();
        let fin = &run.final_states[0];
        let (plus, minus) = s.gate_norms(fin);
        assert!((plus - 0.5).abs() < 0.02, "{plus} {minus}");
        let rule = s.fate_rule(fin, Gate::Plus);
        assert!(rule.overlap < 0.05, "{rule:?}");
        let fates = EnsembleFates::from_trajectories(&run.trajectories, &rule).unwrap();
        assert!((fates.fraction(Fate::Reflected) - 0.5).abs() <= 0.05);
        assert!((fates.split_point.unwrap() - s.x_in).abs() < 0.02 * s.length);
    }
}
