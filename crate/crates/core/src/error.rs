use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical modules and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("evanescent regime: interior wavenumber squared is {q_squared:e} < 0")]
    EvanescentRegime { q_squared: f64 },

    #[error("degenerate wavenumber: k_x = 0 (or interior q_x = 0)")]
    DegenerateWavenumber,

    #[error("splitter matrix is not unitary (deviation {deviation:e})")]
    NonUnitaryAmplitudes { deviation: f64 },

    #[error("grid too coarse: dx = {dx} exceeds {limit} (wavelength / {points_per_wavelength})")]
    GridTooCoarse {
        dx: f64,
        limit: f64,
        points_per_wavelength: f64,
    },

    #[error("grid window [{x_min}, {x_max}] leaves less than {margin} margin around the packet support")]
    WindowTooSmall { x_min: f64, x_max: f64, margin: f64 },

    #[error("time step {dt:e} exceeds the accuracy bound {bound:e}")]
    TimeStepTooLarge { dt: f64, bound: f64 },

    #[error("boundary contamination at t = {t}: norm {edge_norm:e} within the edge margin")]
    BoundaryContamination { t: f64, edge_norm: f64 },

    #[error("norm drift {drift:e} over one step exceeds {limit:e}")]
    NormDrift { drift: f64, limit: f64 },

    #[error("position {x} lies outside the grid [{x_min}, {x_max}]")]
    OutsideGrid { x: f64, x_min: f64, x_max: f64 },

    #[error("node singularity at x = {x}: |psi|^2 = {density:e} below floor {floor:e}")]
    NodeSingularity { x: f64, density: f64, floor: f64 },

    #[error("step underflow at t = {t}, x = {x}: dt fell below {dt_min:e}")]
    StepUnderflow { t: f64, x: f64, dt_min: f64 },

    #[error("trajectory ordering violated at index {index}")]
    OrderViolation { index: usize },

    #[error("x = {x} is outside the segment support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("y = {y} is outside the half interval [{lo}, {hi}] of the gate")]
    WrongHalfInterval { y: f64, lo: f64, hi: f64 },

    #[error("saturated separation: 2^n * delta0 = {predicted:e} leaves the linear window")]
    SaturatedSeparation { predicted: f64 },

    #[error("binary digit {bit} cannot be extracted reliably from a float")]
    PrecisionExhausted { bit: usize },

    #[error("grid of {len} nodes is not of the form 2^K + 1")]
    BadGridSize { len: usize },

    #[error("Bernoulli polynomial order {order} exceeds the maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("density too rough for endpoint derivatives: A_{order} differs by {rel_change:.3} between resolutions")]
    RoughDensity { order: usize, rel_change: f64 },

    #[error("density is not normalized: integral = {integral}")]
    NotNormalized { integral: f64 },

    #[error("entropy decreased at step {step}: {before:e} -> {after:e}")]
    MonotonicityViolation { step: usize, before: f64, after: f64 },

    #[error("density has a non-positive value {value:e} at node {index}")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{context}: {source}")]
    Scenario {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps a module error with the scenario step that produced it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Scenario {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
