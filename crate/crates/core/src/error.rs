use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// A single problem found while checking a topology. Violations are data:
/// the validator collects all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyViolation {
    DuplicateHubId { id: String },
    UnknownEndpoint { from: String, to: String, missing: String },
    SelfLoop { hub: String },
    NonPositiveDistance { from: String, to: String, miles: f64 },
    NonPositiveTravelTime { from: String, to: String, hours: f64 },
    RelayLimitExceeded { from: String, to: String, hours: f64, limit_hours: f64 },
    Disconnected { unreachable: Vec<String> },
}

impl std::fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DuplicateHubId { id } => write!(f, "duplicate hub id {id:?}"),
            Self::UnknownEndpoint { from, to, missing } => {
                write!(f, "arc {from}-{to} references unknown hub {missing:?}")
            }
            Self::SelfLoop { hub } => write!(f, "arc from {hub} to itself"),
            Self::NonPositiveDistance { from, to, miles } => {
                write!(f, "arc {from}-{to} has non-positive distance {miles} mi")
            }
            Self::NonPositiveTravelTime { from, to, hours } => {
                write!(f, "arc {from}-{to} has non-positive travel time {hours} h")
            }
            Self::RelayLimitExceeded { from, to, hours, limit_hours } => {
                write!(f, "arc {from}-{to} takes {hours} h, over the {limit_hours} h relay limit")
            }
            Self::Disconnected { unreachable } => {
                write!(f, "hubs unreachable from the rest of the network: {}", unreachable.join(", "))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} row {row}: {message}")]
    CsvRow { path: PathBuf, row: usize, message: String },
    #[error("invalid topology: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Topology(Vec<TopologyViolation>),
    #[error("unknown hub id {0:?}")]
    UnknownHub(String),
    #[error("invalid rate interval [{low}, {high}]: low must be positive and not exceed high")]
    InvalidInterval { low: f64, high: f64 },
    #[error("no feasible delivery window for pair {origin}->{destination}: shortest time {shortest_hours} h + 4 h exceeds 24 h")]
    InfeasibleWindow { origin: String, destination: String, shortest_hours: f64 },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("cannot compute statistics over an empty observation group")]
    EmptyGroup,
    #[error("cannot compute quartiles of an empty list")]
    EmptyQuartileInput,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
