//! Crank-Nicolson propagation of the 1D Schrödinger equation between hard walls.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid, GridWavefunction, Units};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    /// Multiplier on the accuracy bound `dt ≤ dx²·m/(2ħ)`.
    pub dt_safety: f64,
    /// Width, in nodes, of the monitored strip next to each wall.
    pub edge_cells: usize,
    /// Largest norm allowed inside the monitored strips.
    pub edge_tolerance: f64,
    /// Largest allowed change of `∫|ψ|²` over a single step.
    pub step_norm_tolerance: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt_safety: 1.0,
            edge_cells: 5,
            edge_tolerance: 1e-6,
            step_norm_tolerance: 1e-10,
        }
    }
}

/// Accuracy bound on the time step for spacing `dx`.
pub fn time_step_bound(dx: f64, units: Units) -> f64 {
    dx * dx * units.mass / (2.0 * units.hbar)
}

/// Pre-factored `(1 + iΔtH/2ħ) ψⁿ⁺¹ = (1 − iΔtH/2ħ) ψⁿ` for a static potential.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: Grid,
    units: Units,
    dt: f64,
    config: PropagatorConfig,
    /// `iΔt/2ħ · H` split into diagonal and the constant off-diagonal.
    half_diag: Vec<Complex64>,
    half_off: Complex64,
    /// Thomas sweep coefficients of the left-hand matrix.
    c_prime: Vec<Complex64>,
    inv_den: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: Grid, units: Units, potential: &[f64], dt: f64, config: PropagatorConfig) -> Result<Self> {
        if potential.len() != grid.len {
            return Err(Error::invalid("potential", "length differs from the grid"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let bound = config.dt_safety * time_step_bound(grid.dx, units);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::TimeStepTooLarge { dt, bound });
        }
        let kinetic = units.hbar * units.hbar / (2.0 * units.mass * grid.dx * grid.dx);
        let alpha = Complex64::new(0.0, dt / (2.0 * units.hbar));
        let half_off = alpha * (-kinetic);
        let half_diag: Vec<Complex64> = potential.iter().map(|&v| alpha * (2.0 * kinetic + v)).collect();

        let n = grid.len;
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_den = vec![Complex64::new(0.0, 0.0); n];
        let one = Complex64::new(1.0, 0.0);
        inv_den[0] = one / (one + half_diag[0]);
        c_prime[0] = half_off * inv_den[0];
        for i in 1..n {
            inv_den[i] = one / (one + half_diag[i] - half_off * c_prime[i - 1]);
            c_prime[i] = half_off * inv_den[i];
        }
        Ok(Self {
            grid,
            units,
            dt,
            config,
            half_diag,
            half_off,
            c_prime,
            inv_den,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances `psi` by one step in place, checking norm drift and the walls.
    pub fn step(&self, psi: &mut GridWavefunction, scratch: &mut Vec<Complex64>) -> Result<()> {
        let before = psi.norm();
        self.step_checked(psi, scratch, before).map(|_| ())
    }

    /// As [`Propagator::step`] with the incoming norm supplied; returns the new norm.
    fn step_checked(&self, psi: &mut GridWavefunction, scratch: &mut Vec<Complex64>, before: f64) -> Result<f64> {
        if psi.grid() != &self.grid || psi.units() != self.units {
            return Err(Error::invalid("psi", "grid or units differ from the propagator"));
        }
        let t = psi.t() + self.dt;
        let values = psi.values_mut();
        let n = values.len();
        scratch.resize(n, Complex64::new(0.0, 0.0));
        let one = Complex64::new(1.0, 0.0);
        let off = self.half_off;

        // Right-hand side and forward sweep fused.
        let mut prev_d = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let left = if i > 0 { values[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < n { values[i + 1] } else { Complex64::new(0.0, 0.0) };
            let rhs = (one - self.half_diag[i]) * values[i] - off * (left + right);
            let d = if i == 0 {
                rhs * self.inv_den[0]
            } else {
                (rhs - off * prev_d) * self.inv_den[i]
            };
            scratch[i] = d;
            prev_d = d;
        }
        values[n - 1] = scratch[n - 1];
        for i in (0..n - 1).rev() {
            values[i] = scratch[i] - self.c_prime[i] * values[i + 1];
        }
        psi.set_t(t);

        let after = psi.norm();
        let drift = (after - before).abs();
        if drift > self.config.step_norm_tolerance * before.max(1.0) {
            return Err(Error::NormDrift {
                drift,
                limit: self.config.step_norm_tolerance,
            });
        }
        self.check_edges(psi)?;
        Ok(after)
    }

    fn check_edges(&self, psi: &GridWavefunction) -> Result<()> {
        let m = self.config.edge_cells.min(psi.len() / 2);
        let vals = psi.values();
        let n = vals.len();
        let edge: f64 = vals[..m].iter().chain(&vals[n - m..]).map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx;
        if edge > self.config.edge_tolerance {
            return Err(Error::BoundaryContamination {
                t: psi.t(),
                edge_norm: edge,
            });
        }
        Ok(())
    }

    /// Runs `n_steps`, keeping every `snapshot_every`-th state (plus the start).
    pub fn evolve(
        &self,
        psi: &GridWavefunction,
        n_steps: usize,
        snapshot_every: Option<usize>,
    ) -> Result<Evolution> {
        self.evolve_with(psi, n_steps, |step, state| {
            Ok(match snapshot_every {
                Some(every) if every > 0 && step % every == 0 => Some(state.clone()),
                _ => None,
            })
        })
    }

    /// Runs `n_steps`, calling `observe(step, state)` after every step (and
    /// once with step 0 before the first); `Some` results are kept as snapshots.
    pub fn evolve_with(
        &self,
        psi: &GridWavefunction,
        n_steps: usize,
        mut observe: impl FnMut(usize, &GridWavefunction) -> Result<Option<GridWavefunction>>,
    ) -> Result<Evolution> {
        let mut stepper = self.stepper(psi.clone());
        let mut snapshots = Vec::new();
        if let Some(s) = observe(0, stepper.state())? {
            snapshots.push(s);
        }
        for step in 1..=n_steps {
            stepper.advance(1)?;
            if let Some(s) = observe(step, stepper.state())? {
                snapshots.push(s);
            }
        }
        let norm_drift = stepper.norm_drift();
        Ok(Evolution {
            final_state: stepper.into_state(),
            snapshots,
            norm_drift,
        })
    }

    /// Incremental driver owning the evolving state.
    pub fn stepper(&self, psi: GridWavefunction) -> Stepper<'_> {
        let norm = psi.norm();
        Stepper {
            propagator: self,
            scratch: Vec::with_capacity(psi.len()),
            state: psi,
            norm,
            start_norm: norm,
        }
    }
}

/// A state being advanced by a [`Propagator`], with its running norm.
#[derive(Debug)]
pub struct Stepper<'a> {
    propagator: &'a Propagator,
    state: GridWavefunction,
    scratch: Vec<Complex64>,
    norm: f64,
    start_norm: f64,
}

impl Stepper<'_> {
    pub fn advance(&mut self, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.norm = self
                .propagator
                .step_checked(&mut self.state, &mut self.scratch, self.norm)?;
        }
        Ok(())
    }

    pub fn state(&self) -> &GridWavefunction {
        &self.state
    }

    pub fn into_state(self) -> GridWavefunction {
        self.state
    }

    pub fn norm_drift(&self) -> f64 {
        (self.norm - self.start_norm).abs()
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub final_state: GridWavefunction,
    pub snapshots: Vec<GridWavefunction>,
    /// `|∫|ψ_final|² − ∫|ψ_start|²|`.
    pub norm_drift: f64,
}

/// Propagates `psi` through `n_steps` of size `dt` in the static `potential`.
pub fn evolve_schrodinger(
    psi: &GridWavefunction,
    potential: &[f64],
    dt: f64,
    n_steps: usize,
    config: PropagatorConfig,
    snapshot_every: Option<usize>,
) -> Result<Evolution> {
    Propagator::new(*psi.grid(), psi.units(), potential, dt, config)?.evolve(psi, n_steps, snapshot_every)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::init_gaussian;

    fn gaussian_setup() -> (GridWavefunction, f64) {
        let units = Units::default();
        let grid = Grid::symmetric(60.0, 0.05).unwrap();
        let psi = init_gaussian(-10.0, 2.0, 1.5, grid, units).unwrap();
        (psi, time_step_bound(0.05, units))
    }

    #[test]
    fn zero_steps_is_identity() {
        let (psi, dt) = gaussian_setup();
        let zeros = vec![0.0; psi.len()];
        let out = evolve_schrodinger(&psi, &zeros, dt, 0, PropagatorConfig::default(), None).unwrap();
        assert_eq!(out.final_state, psi);
    }

    #[test]
    fn free_gaussian_spreads_as_predicted() {
        let (psi, dt) = gaussian_setup();
        let zeros = vec![0.0; psi.len()];
        let steps = 8000;
        let out = evolve_schrodinger(&psi, &zeros, dt, steps, PropagatorConfig::default(), Some(2000)).unwrap();
        let sigma0: f64 = 2.0;
        for snap in &out.snapshots {
            let t = snap.t();
            // σ(t) = σ₀ √(1 + (ħt / 2mσ₀²)²)
            let expected = sigma0 * (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt();
            let rel = (snap.spread() - expected).abs() / expected;
            assert!(rel < 5e-3, "t {t}: spread {} vs {expected}", snap.spread());
            let centroid = -10.0 + 1.5 * t;
            assert!((snap.centroid() - centroid).abs() < 0.01 * (1.0 + 1.5 * t));
        }
        assert!(out.norm_drift < 1e-7);
    }

    #[test]
    fn rejects_large_steps() {
        let (psi, dt) = gaussian_setup();
        let zeros = vec![0.0; psi.len()];
        assert!(matches!(
            Propagator::new(*psi.grid(), psi.units(), &zeros, 3.0 * dt, PropagatorConfig::default()),
            Err(Error::TimeStepTooLarge { .. })
        ));
    }

    #[test]
    fn detects_wall_contact() {
        let units = Units::default();
        let grid = Grid::symmetric(20.0, 0.05).unwrap();
        let psi = init_gaussian(12.0, 1.0, 3.0, grid, units).unwrap();
        let zeros = vec![0.0; psi.len()];
        let dt = time_step_bound(0.05, units);
        let res = evolve_schrodinger(&psi, &zeros, dt, 20000, PropagatorConfig::default(), None);
        assert!(matches!(res, Err(Error::BoundaryContamination { .. })));
    }
}
