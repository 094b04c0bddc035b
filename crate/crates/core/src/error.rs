use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("potential evaluated at a singularity near {0}")]
    PoleEvaluation(Complex64),
    #[error("no classical turning point for energy {energy}")]
    NoTurningPoint { energy: f64 },
    #[error("barrier condition violated: strength {strength} below hbar^2/(8m) = {bound}")]
    BarrierCondition { strength: f64, bound: f64 },
    #[error("path came within {distance:e} of a singularity at lambda = {lambda}")]
    PoleHit { lambda: f64, distance: f64 },
    #[error("integrator step underflow at lambda = {lambda}")]
    StepUnderflow { lambda: f64 },
    #[error(
        "newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("jacobian is singular (|J| = {0:e})")]
    JacobianSingular(f64),
    #[error("energy equals the barrier height")]
    DegenerateEnergy,
    #[error("endpoint lies on a branch cut of the closed form")]
    BranchAmbiguity,
    #[error("no sign change of the jacobian in the bracket")]
    NoBracket,
    #[error("tracking stalled at x1 = {x1}: {reason}")]
    TrackStalled { x1: f64, reason: String },
    #[error("gamma function evaluated at a pole {0}")]
    PoleOfGamma(Complex64),
    #[error("hypergeometric series did not converge")]
    SeriesDivergence,
    #[error("parameter sits on a pole of the gamma prefactor")]
    ParameterPole,
    #[error("caustic divergence: |d2S/dT2| = {0:e}")]
    CausticDivergence(f64),
    #[error("discrete chain overflowed at index {0}")]
    Overflow(usize),
    #[error("no level-set crossing in the window")]
    EmptyContour,
    #[error("malformed CSV: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
