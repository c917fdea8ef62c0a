//! Example data shipped with the crate: an 8-hub / 30-arc Georgia-Florida
//! relay topology and a gravity-model OD flow file calibrated so that
//! scenario 1 moves roughly 550 truckloads over a 48-hour horizon.

/// JSON topology, also available at `data/topology_ga_fl.json`.
pub const TOPOLOGY_JSON: &str = include_str!("../data/topology_ga_fl.json");

/// OD flow CSV (`origin,destination,annual_tons`), also at
/// `data/od_flows_ga_fl.csv`.
pub const OD_FLOWS_CSV: &str = include_str!("../data/od_flows_ga_fl.csv");
