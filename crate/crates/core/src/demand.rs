//! Demand ingestion and synthetic request generation.
//!
//! Annual OD tonnage comes from a user-supplied CSV or a gravity-model
//! synthesizer. `spawn_requests` turns each pair's share of a 48-hour
//! horizon into individual sub-truckload shipment requests with feasible,
//! deliberately tight delivery windows.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, RateSpec};

pub const POUNDS_PER_TON: f64 = 2000.0;
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Annual freight volume between one ordered hub pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ODFlow {
    pub origin: String,
    pub destination: String,
    pub annual_tons: f64,
}

/// One experimental setup: how much of the flow the network handles, how
/// large requests may get, and how arc costs are drawn per case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    /// Fraction of the ingested annual tonnage routed through the network.
    pub ltl_flow_fraction: f64,
    /// Request size cap as a fraction of truck capacity (1/3 or 1).
    pub volume_upper_bound: f64,
    pub truck_mile_cost: RateSpec,
    pub transload_cost: RateSpec,
    pub n_historical: usize,
    pub n_testing: usize,
}

impl ScenarioSpec {
    /// The three bundled setups. 1: small flow share, fixed costs.
    /// 2: same flow share, uniform cost fluctuation. 3: five times the flow
    /// share, full-truckload sizes, fluctuating costs.
    pub fn preset(id: u8) -> Result<ScenarioSpec> {
        let spec = match id {
            1 => ScenarioSpec {
                id,
                ltl_flow_fraction: 0.01,
                volume_upper_bound: 1.0 / 3.0,
                truck_mile_cost: RateSpec::Fixed(2.0),
                transload_cost: RateSpec::Fixed(0.04),
                n_historical: 100,
                n_testing: 30,
            },
            2 => ScenarioSpec {
                id,
                ltl_flow_fraction: 0.01,
                volume_upper_bound: 1.0 / 3.0,
                truck_mile_cost: RateSpec::Uniform { low: 1.0, high: 3.0 },
                transload_cost: RateSpec::Uniform { low: 0.02, high: 0.06 },
                n_historical: 100,
                n_testing: 30,
            },
            3 => ScenarioSpec {
                id,
                ltl_flow_fraction: 0.05,
                volume_upper_bound: 1.0,
                truck_mile_cost: RateSpec::Uniform { low: 1.0, high: 3.0 },
                transload_cost: RateSpec::Uniform { low: 0.02, high: 0.06 },
                n_historical: 100,
                n_testing: 30,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown scenario preset {other}; expected 1, 2, or 3"
                )))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ltl_flow_fraction > 0.0 && self.ltl_flow_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ltl_flow_fraction must lie in (0, 1], got {}",
                self.ltl_flow_fraction
            )));
        }
        if !(self.volume_upper_bound > 0.0 && self.volume_upper_bound <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "volume_upper_bound must lie in (0, 1], got {}",
                self.volume_upper_bound
            )));
        }
        self.truck_mile_cost.validate()?;
        self.transload_cost.validate()?;
        if self.n_historical == 0 || self.n_testing == 0 {
            return Err(Error::InvalidConfig(
                "case counts must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// One priced LTL request. `deadline_hour` is fractional; release hours are
/// whole because requests enter the system at hourly planning instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentRequest {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub release_hour: u32,
    pub deadline_hour: f64,
    pub weight_lb: f64,
}

impl ShipmentRequest {
    pub fn window_hours(&self) -> f64 {
        self.deadline_hour - self.release_hour as f64
    }
}

/// Knobs of the request generator that are not scenario-specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    pub truck_capacity_lb: f64,
    pub horizon_hours: u32,
    /// Size floor as a fraction of capacity; keeps dust requests out.
    pub min_size_fraction: f64,
    /// Truncated remainders below this many pounds are discarded.
    pub min_request_lb: f64,
    /// Earliest deadline is shortest travel time plus this slack.
    pub window_slack_hours: f64,
    /// Latest deadline offset from release ("one day").
    pub max_window_hours: f64,
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams {
            truck_capacity_lb: 40_000.0,
            horizon_hours: 48,
            min_size_fraction: 0.05,
            min_request_lb: 500.0,
            window_slack_hours: 4.0,
            max_window_hours: 24.0,
        }
    }
}

impl DemandParams {
    /// Requests spawn over `horizon_hours` but their windows extend up to
    /// `max_window_hours` past release, so the network keeps operating
    /// until the last admissible deadline.
    pub fn delivery_horizon_hours(&self) -> u32 {
        self.horizon_hours + self.max_window_hours.ceil() as u32
    }
}

/// Parse OD flows from `origin,destination,annual_tons` CSV. Any bad row is
/// an error carrying its line number; nothing is silently skipped.
pub fn ingest_od_flows(path: &Path, net: &Network) -> Result<Vec<ODFlow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_od_flows(file, net, path)
}

/// The OD flow file shipped with the crate, matching the bundled topology.
pub fn bundled_od_flows(net: &Network) -> Result<Vec<ODFlow>> {
    parse_od_flows(
        crate::bundled::OD_FLOWS_CSV.as_bytes(),
        net,
        Path::new("<bundled od flows>"),
    )
}

fn parse_od_flows<R: Read>(reader: R, net: &Network, path: &Path) -> Result<Vec<ODFlow>> {
    let row_err = |row: usize, message: String| Error::CsvRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = csv_reader
            .headers()
            .map_err(|e| row_err(1, e.to_string()))?;
        let expected = ["origin", "destination", "annual_tons"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(row_err(
                1,
                format!("expected header {:?}, got {:?}", expected.join(","), headers),
            ));
        }
    }
    let mut flows = Vec::new();
    // data rows start on line 2, after the header
    for (i, record) in csv_reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(row_err(row, format!("expected 3 fields, got {}", record.len())));
        }
        let origin = record[0].to_string();
        let destination = record[1].to_string();
        let annual_tons: f64 = record[2]
            .parse()
            .map_err(|e| row_err(row, format!("bad annual_tons {:?}: {e}", &record[2])))?;
        for id in [&origin, &destination] {
            if net.hub_index(id).is_err() {
                return Err(row_err(row, format!("unknown hub {id:?}")));
            }
        }
        if origin == destination {
            return Err(row_err(row, format!("origin equals destination ({origin})")));
        }
        if annual_tons < 0.0 {
            return Err(row_err(row, format!("negative annual_tons {annual_tons}")));
        }
        flows.push(ODFlow {
            origin,
            destination,
            annual_tons,
        });
    }
    Ok(flows)
}

/// Gravity-style synthetic flows: every ordered pair gets volume
/// proportional to the product of randomly drawn hub weights and inversely
/// proportional to shortest-path mileage, scaled to `total_annual_tons`.
pub fn synthesize_od_flows(
    net: &Network,
    total_annual_tons: f64,
    rng: &mut impl Rng,
) -> Result<Vec<ODFlow>> {
    if total_annual_tons <= 0.0 || total_annual_tons.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "total_annual_tons must be positive, got {total_annual_tons}"
        )));
    }
    let n = net.hubs().len();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut raw = Vec::with_capacity(n * (n - 1));
    for origin in 0..n {
        for destination in 0..n {
            if origin == destination {
                continue;
            }
            let miles = net.dist_path(origin, destination).miles;
            raw.push((origin, destination, weights[origin] * weights[destination] / miles));
        }
    }
    let total_raw: f64 = raw.iter().map(|&(_, _, g)| g).sum();
    Ok(raw
        .into_iter()
        .map(|(o, d, g)| ODFlow {
            origin: net.hub_id(o).to_string(),
            destination: net.hub_id(d).to_string(),
            annual_tons: g / total_raw * total_annual_tons,
        })
        .collect())
}

/// Generate one case's shipment requests.
///
/// Each pair's 48-hour target tonnage is `annual_tons * horizon/8760 *
/// ltl_flow_fraction`. Request sizes are uniform between the size floor and
/// the scenario's volume cap; the final draw per pair is truncated to the
/// remaining target and dropped if it falls under `min_request_lb`.
/// Release hours are uniform over the span that leaves room for the
/// whole-hour transit the dispatch cadence needs, and deadlines are uniform
/// between shortest-time-plus-slack and one day out.
pub fn spawn_requests(
    flows: &[ODFlow],
    spec: &ScenarioSpec,
    net: &Network,
    params: &DemandParams,
    rng: &mut impl Rng,
) -> Result<Vec<ShipmentRequest>> {
    spec.validate()?;
    if params.min_size_fraction >= spec.volume_upper_bound {
        return Err(Error::InvalidConfig(format!(
            "min_size_fraction {} must be below volume_upper_bound {}",
            params.min_size_fraction, spec.volume_upper_bound
        )));
    }

    let mut requests = Vec::new();
    let mut seq = 0usize;
    for flow in flows {
        let origin = net.hub_index(&flow.origin)?;
        let destination = net.hub_index(&flow.destination)?;
        let path = net.time_path(origin, destination);
        let shortest = path.hours;
        if shortest + params.window_slack_hours > params.max_window_hours {
            return Err(Error::InfeasibleWindow {
                origin: flow.origin.clone(),
                destination: flow.destination.clone(),
                shortest_hours: shortest,
            });
        }
        let transit_int = path.transit_hours_int;
        if transit_int >= params.horizon_hours {
            return Err(Error::InvalidConfig(format!(
                "pair {}->{} needs {transit_int} whole hours of transit but the horizon is {} h",
                flow.origin, flow.destination, params.horizon_hours
            )));
        }
        let release_span = params.horizon_hours - transit_int;

        let target_lb = flow.annual_tons
            * (params.horizon_hours as f64 / HOURS_PER_YEAR)
            * spec.ltl_flow_fraction
            * POUNDS_PER_TON;
        let mut remaining = target_lb;
        while remaining > 0.0 {
            let mut weight_lb = rng
                .gen_range(params.min_size_fraction..spec.volume_upper_bound)
                * params.truck_capacity_lb;
            let truncated = weight_lb >= remaining;
            if truncated {
                weight_lb = remaining;
            }
            if weight_lb >= params.min_request_lb {
                let release_hour = rng.gen_range(0..release_span);
                let window = rng.gen_range(
                    (shortest + params.window_slack_hours)..=params.max_window_hours,
                );
                requests.push(ShipmentRequest {
                    id: format!("r{seq:05}"),
                    origin: flow.origin.clone(),
                    destination: flow.destination.clone(),
                    release_hour,
                    deadline_hour: release_hour as f64 + window,
                    weight_lb,
                });
                seq += 1;
            }
            remaining -= weight_lb;
            if truncated {
                break;
            }
        }
    }
    Ok(requests)
}
