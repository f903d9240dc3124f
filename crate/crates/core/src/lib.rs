//! Numerical laboratory for a beam-splitter model of relaxation to quantum
//! equilibrium in pilot-wave dynamics.
//!
//! * [`wavefield`]: scattering amplitudes, packets and a Crank-Nicolson solver.
//! * [`trajectories`]: guidance-law integration, fates and equivariance checks.
//! * [`maps`]: reduction of the interferometer to interval maps.
//! * [`frobenius`]: density evolution under the doubling-map transfer operator.
//! * [`entropy`]: subquantum entropy and the relaxation H-theorem.
//! * [`scenario`] and [`verify`]: declarative runs and the acceptance checks.

pub mod entropy;
mod error;
pub mod experiment;
pub mod frobenius;
pub mod io;
pub mod maps;
pub mod numeric;
pub mod plot;
pub mod scenario;
pub mod splitter;
pub mod trajectories;
pub mod verify;
pub mod wavefield;

pub use error::{Error, Result};
