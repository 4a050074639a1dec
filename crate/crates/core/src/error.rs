use thiserror::Error;

use crate::model::Resource;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("user {user} routed to station {station}, which does not cover it")]
    RouteNotCovering { user: usize, station: usize },
    #[error("user {user} routed to station {station}, which does not hold service {service}")]
    ServiceNotPlaced {
        user: usize,
        station: usize,
        service: usize,
    },
    #[error("station {station} has zero {resource} capacity but positive load {load}")]
    ZeroCapacityLoad {
        station: usize,
        resource: Resource,
        load: f64,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("adaptation constraint requested but the instance has no previous placement or budget")]
    MissingAdaptationData,
    #[error("simplex exceeded its iteration cap of {0}")]
    IterationCap(usize),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("instance exceeds brute-force limits: {0}")]
    TooLarge(String),
    #[error("instance requires unit requirements: {0}")]
    NotUnit(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 3 for solver failures, 2 for everything the
    /// caller can fix by changing its input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IterationCap(_) | Error::Infeasible | Error::Unbounded | Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
