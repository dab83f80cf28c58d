//! Error type shared by all solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog system `{0}`")]
    UnknownSystem(String),
    #[error("invalid system specification: {0}")]
    InvalidSystem(String),
    #[error("energy M = {m} does not exceed M* = {mstar}")]
    EnergyBelowMstar { m: f64, mstar: f64 },
    #[error("root bracketing failed: {0}")]
    BracketFailure(String),
    #[error("root solve did not converge: {0}")]
    RootDivergence(String),
    #[error("gauge singularity: |H_p·u| = {0:.3e} below threshold")]
    GaugeSingularity(f64),
    #[error("momentum vanishes: gauge domain excludes p = 0")]
    ZeroMomentum(String),
    #[error("dilation precondition violated: {0}")]
    DilationDomain(String),
    #[error("ODE step size collapsed at t = {0}")]
    StepCollapse(f64),
    #[error("cell-safety validation failed after {0} delta halvings")]
    CellSafety(usize),
    #[error("level {b} outside the admissible range [0, {max}]")]
    LevelOutOfRange { b: f64, max: f64 },
    #[error("fixed-point iteration lost contraction (ratio {0:.3})")]
    NonContraction(f64),
    #[error("not a solution: {0}")]
    NotASolution(String),
    #[error("transversality lost along orbit: {0}")]
    TransversalityLoss(String),
    #[error("shooting failed: {0}")]
    ShootingFailure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
