use alloc::string::String;
use core::fmt;

use crate::domain::Point;

/// Which side of an inequality a field is supposed to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Role {
    Sub,
    Super,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidArgument(String),
    DegenerateDomain,
    GridTooCoarse { h: f64 },
    ProjectionDiverged { point: Point },
    NotStronglyPseudoconvex { point: Point, eigenvalue: f64 },
    StencilOutOfDomain { node: usize },
    NonFiniteUpdate { node: usize, t: f64 },
    DegenerateDensity { node: usize },
    MaxStepsExceeded { steps: usize, t: f64 },
    UnboundedData(String),
    BarrierSearchFailed(String),
    NoWitness,
    NoWitnessFound { residual_mass: f64, c_tried: f64 },
    CoverIncomplete { uncovered: usize },
    NotConverged { iterations: usize, residual: f64 },
    ConvergenceStalled { error: f64, target: f64 },
    InputsNotSubSuper { role: Role, violations: usize, worst: f64 },
    NoDeltaFound { smallest: f64 },
    InsufficientData { needed: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::DegenerateDomain => write!(f, "domain is empty on the lattice"),
            Error::GridTooCoarse { h } => write!(f, "no interior node at h = {h}"),
            Error::ProjectionDiverged { point } => {
                write!(f, "boundary projection diverged from {point:?}")
            }
            Error::NotStronglyPseudoconvex { point, eigenvalue } => {
                write!(f, "defining function not strictly psh at {point:?} (min eigenvalue {eigenvalue:e})")
            }
            Error::StencilOutOfDomain { node } => {
                write!(f, "stencil of node {node} leaves the domain")
            }
            Error::NonFiniteUpdate { node, t } => {
                write!(f, "non-finite update at node {node}, t = {t} (time step too large?)")
            }
            Error::DegenerateDensity { node } => {
                write!(f, "f + density shift vanishes at node {node}")
            }
            Error::MaxStepsExceeded { steps, t } => {
                write!(f, "step budget {steps} exhausted at t = {t}")
            }
            Error::UnboundedData(m) => write!(f, "non-finite data: {m}"),
            Error::BarrierSearchFailed(m) => write!(f, "barrier search failed: {m}"),
            Error::NoWitness => write!(f, "no admissibility witness supplied"),
            Error::NoWitnessFound { residual_mass, c_tried } => {
                write!(f, "no witness up to C = {c_tried} (zero-set mass {residual_mass:e})")
            }
            Error::CoverIncomplete { uncovered } => {
                write!(f, "{uncovered} deep-interior nodes are not covered")
            }
            Error::NotConverged { iterations, residual } => {
                write!(f, "not converged after {iterations} sweeps (residual {residual:e})")
            }
            Error::ConvergenceStalled { error, target } => {
                write!(f, "long-time error {error:e} above target {target:e}")
            }
            Error::InputsNotSubSuper { role, violations, worst } => {
                write!(f, "input expected as {role:?} fails its sweep at {violations} samples (worst {worst:e})")
            }
            Error::NoDeltaFound { smallest } => {
                write!(f, "no admissible time shift down to {smallest:e}")
            }
            Error::InsufficientData { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
