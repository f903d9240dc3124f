//! One-dimensional wavefunctions: analytic scattering states and the
//! numerical propagator used in the barrier region.

mod fringes;
mod grid;
mod packet;
mod propagator;
mod scattering;

use serde::{Deserialize, Serialize};

pub use fringes::{fringe_analysis, fringe_visibility_at, wiener_field, FieldTable, FringeReport};
pub(crate) use grid::local_velocity;
pub use grid::{init_gaussian, init_packet, Grid, GridWavefunction, PacketGridRules};
pub use packet::WavePacketSpec;
pub use propagator::{evolve_schrodinger, time_step_bound, Evolution, Propagator, PropagatorConfig, Stepper};
pub use scattering::{
    asymptotic_out_state, calibrate_interior_ratio, scattering_amplitudes, width_for_reflectance, BarrierSpec,
    ScatteringAmplitudes, SplitterMatrix, SplitterMode,
};

/// `ħ` and `m`; both 1 in natural units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// Which-path record of the pointer qubit entangled with the particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerBit {
    Up,
    Down,
    /// No pointer attached: both branches guide the particle together.
    Coherent,
}

/// Two branches of the particle wavefunction, correlated with orthogonal
/// pointer states. With a definite pointer bit only that branch guides.
#[derive(Clone, Debug)]
pub struct BranchState {
    pub psi_up: GridWavefunction,
    pub psi_down: GridWavefunction,
    pub pointer: PointerBit,
}

impl BranchState {
    pub fn new(psi_up: GridWavefunction, psi_down: GridWavefunction, pointer: PointerBit) -> crate::Result<Self> {
        if psi_up.grid() != psi_down.grid() {
            return Err(crate::Error::invalid("branch", "branch grids differ"));
        }
        Ok(Self {
            psi_up,
            psi_down,
            pointer,
        })
    }

    /// Branch guiding the particle, or `None` in the coherent case.
    pub fn active(&self) -> Option<&GridWavefunction> {
        match self.pointer {
            PointerBit::Up => Some(&self.psi_up),
            PointerBit::Down => Some(&self.psi_down),
            PointerBit::Coherent => None,
        }
    }
}
