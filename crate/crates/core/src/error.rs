use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} lies outside the domain [0, {x_max}]")]
    Domain { x: f64, x_max: f64 },

    /// The state left `[0, x_max]` while integrating.
    #[error("trajectory left [0, {x_max}] at t = {t} (x = {x})")]
    Escape { t: f64, x: f64, x_max: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching t = {t_end}")]
    StepLimit { max_steps: usize, t_end: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A modelling hypothesis the analysis relies on does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("x0 = {x0} is not a fixed point of the pulsed time map (residual {residual:e})")]
    NotFixedPoint { x0: f64, residual: f64 },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input
    /// or violated hypotheses.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Escape { .. } | Error::StepLimit { .. } | Error::StepUnderflow { .. }
        )
    }
}
