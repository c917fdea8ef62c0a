//! Simulator and dynamic quoting engine for a hyperconnected
//! less-than-truckload relay freight network.
//!
//! The crate models an open relay network whose hub-to-hub arcs each stay
//! within a driver-friendly 5.5-hour limit. Shipment requests spawn from
//! annual origin-destination tonnage, get quoted on arrival from pooled
//! per-pound cost observations (weighted mean plus a one-sided confidence
//! margin), move through hourly greedy consolidation onto capacity-limited
//! trucks, and feed their realized allocated costs back into the quoting
//! pool.
//!
//! Module map:
//! - [`network`]: topology, validation, shortest paths, per-case cost draws
//! - [`demand`]: OD flow ingestion/synthesis and request generation
//! - [`pricing`]: weighted-statistics quoting and outcome feedback
//! - [`planning`]: time-expanded graph, greedy consolidation, cost allocation
//! - [`harness`]: historical/testing phases, KPIs, quartiles, baseline
//! - [`config`] / [`report`]: run configuration and result files

pub mod bundled;
pub mod config;
pub mod demand;
pub mod error;
pub mod harness;
pub mod network;
pub mod planning;
pub mod pricing;
pub mod report;

pub use config::{Resolved, RunConfig, ScenarioSelect};
pub use demand::{DemandParams, ODFlow, ScenarioSpec, ShipmentRequest};
pub use error::{Error, Result, TopologyViolation};
pub use harness::{run_scenario, RunParams, ScenarioResult};
pub use network::{Arc, ArcCostTable, Hub, Network, RateSpec, Topology};
pub use pricing::{ObservationPool, Quote, RobustnessConfig};
