//! de Broglie–Bohm trajectories guided by grid wavefunctions.

mod ensemble;
mod integrate;
mod sampling;
mod velocity;

pub use ensemble::{co_evolve, ensemble_fates, EnsembleFates, LockstepConfig, LockstepRun, Particle};
pub use integrate::{advance, integrate_trajectory, rk4_step, Fate, FateRule, IntegratorOptions, Trajectory};
pub use sampling::{born_cdf, born_quantile, born_samples, histogram_distance, noise_band, stratified_samples, EquivarianceReport};
pub use velocity::{bohm_velocity, conditional_velocity, FrameSeries, Guide, VelocityField, NODE_FLOOR};
