//! Hub/arc topology for a relay freight network.
//!
//! Arcs are stored once and traversable in both directions. Every arc must
//! respect the relay limit (5.5 hours by default) so that drivers can run a
//! leg and return within a shift. Parallel arcs between the same pair of
//! hubs are allowed; they model alternative highway routings.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TopologyViolation};

/// Closed upper bound on arc travel time. The bound is closed so that a
/// topology built exactly at the limit is legal.
pub const DEFAULT_RELAY_LIMIT_HOURS: f64 = 5.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hub {
    pub id: String,
    pub name: String,
    pub zone: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

/// One bidirectional relay arc. `miles` and `hours` are stored separately so
/// that per-truck-mile costs stay well-defined whatever the assumed speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Arc {
    pub from: String,
    pub to: String,
    pub miles: f64,
    pub hours: f64,
}

/// Raw parsed topology, prior to validation. `Network` wraps a checked one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub hubs: Vec<Hub>,
    pub arcs: Vec<Arc>,
}

impl Topology {
    pub fn from_file(path: &Path) -> Result<Topology> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Every violation in the topology, in check order. Empty means valid.
    pub fn violations(&self, relay_limit_hours: f64) -> Vec<TopologyViolation> {
        let mut found = Vec::new();

        let mut index: HashMap<&str, usize> = HashMap::new();
        for hub in &self.hubs {
            if index.insert(hub.id.as_str(), index.len()).is_some() {
                found.push(TopologyViolation::DuplicateHubId { id: hub.id.clone() });
            }
        }

        for arc in &self.arcs {
            for end in [&arc.from, &arc.to] {
                if !index.contains_key(end.as_str()) {
                    found.push(TopologyViolation::UnknownEndpoint {
                        from: arc.from.clone(),
                        to: arc.to.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if arc.from == arc.to {
                found.push(TopologyViolation::SelfLoop { hub: arc.from.clone() });
            }
            if arc.miles <= 0.0 || arc.miles.is_nan() {
                found.push(TopologyViolation::NonPositiveDistance {
                    from: arc.from.clone(),
                    to: arc.to.clone(),
                    miles: arc.miles,
                });
            }
            if arc.hours <= 0.0 || arc.hours.is_nan() {
                found.push(TopologyViolation::NonPositiveTravelTime {
                    from: arc.from.clone(),
                    to: arc.to.clone(),
                    hours: arc.hours,
                });
            }
        }
        found.extend(relay_violations(&self.arcs, relay_limit_hours));

        // Connectivity, over arcs whose endpoints resolve.
        if self.hubs.len() > 1 {
            let mut reached = vec![false; self.hubs.len()];
            let mut stack = vec![0usize];
            reached[0] = true;
            while let Some(u) = stack.pop() {
                for arc in &self.arcs {
                    if let (Some(&a), Some(&b)) =
                        (index.get(arc.from.as_str()), index.get(arc.to.as_str()))
                    {
                        for (x, y) in [(a, b), (b, a)] {
                            if x == u && !reached[y] {
                                reached[y] = true;
                                stack.push(y);
                            }
                        }
                    }
                }
            }
            let unreachable: Vec<String> = self
                .hubs
                .iter()
                .zip(&reached)
                .filter(|(_, &r)| !r)
                .map(|(h, _)| h.id.clone())
                .collect();
            if !unreachable.is_empty() {
                found.push(TopologyViolation::Disconnected { unreachable });
            }
        }

        found
    }
}

/// Relay-constraint check on its own: one violation per arc over the limit.
pub fn relay_violations(arcs: &[Arc], limit_hours: f64) -> Vec<TopologyViolation> {
    arcs.iter()
        .filter(|a| a.hours > limit_hours)
        .map(|a| TopologyViolation::RelayLimitExceeded {
            from: a.from.clone(),
            to: a.to.clone(),
            hours: a.hours,
            limit_hours,
        })
        .collect()
}

/// A fully explored route between two hubs: hub indices visited in order,
/// the arc index used for each leg, and its totals. `transit_hours_int` is
/// the whole-hour transit the dispatch system can actually achieve on this
/// path (each leg rounds up to the next planning instance).
#[derive(Debug, Clone, PartialEq)]
pub struct PathDetail {
    pub hubs: Vec<usize>,
    pub arcs: Vec<usize>,
    pub hours: f64,
    pub miles: f64,
    pub transit_hours_int: u32,
}

#[derive(Clone, Copy)]
enum Metric {
    Time,
    Distance,
}

/// A validated relay network with precomputed all-pairs canonical paths.
/// Immutable after construction; share freely across parallel case runs.
#[derive(Debug, Clone)]
pub struct Network {
    hubs: Vec<Hub>,
    arcs: Vec<Arc>,
    relay_limit_hours: f64,
    index: HashMap<String, usize>,
    /// hub idx -> (neighbor idx, arc idx), sorted for deterministic scans
    adjacency: Vec<Vec<(usize, usize)>>,
    /// rank of each hub id in lexicographic order, for path tie-breaking
    lex_rank: Vec<u32>,
    time_paths: Vec<Vec<PathDetail>>,
    dist_paths: Vec<Vec<PathDetail>>,
}

impl Network {
    pub fn new(topology: Topology, relay_limit_hours: f64) -> Result<Network> {
        let violations = topology.violations(relay_limit_hours);
        if !violations.is_empty() {
            return Err(Error::Topology(violations));
        }
        let Topology { hubs, arcs } = topology;

        let index: HashMap<String, usize> = hubs
            .iter()
            .enumerate()
            .map(|(i, h)| (h.id.clone(), i))
            .collect();

        let mut adjacency = vec![Vec::new(); hubs.len()];
        for (arc_idx, arc) in arcs.iter().enumerate() {
            let a = index[&arc.from];
            let b = index[&arc.to];
            adjacency[a].push((b, arc_idx));
            adjacency[b].push((a, arc_idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let mut ids: Vec<&str> = hubs.iter().map(|h| h.id.as_str()).collect();
        ids.sort_unstable();
        let lex_rank = hubs
            .iter()
            .map(|h| ids.binary_search(&h.id.as_str()).unwrap() as u32)
            .collect();

        let mut net = Network {
            hubs,
            arcs,
            relay_limit_hours,
            index,
            adjacency,
            lex_rank,
            time_paths: Vec::new(),
            dist_paths: Vec::new(),
        };
        net.time_paths = (0..net.hubs.len())
            .map(|s| net.single_source(s, Metric::Time))
            .collect();
        net.dist_paths = (0..net.hubs.len())
            .map(|s| net.single_source(s, Metric::Distance))
            .collect();
        Ok(net)
    }

    pub fn from_file(path: &Path) -> Result<Network> {
        Network::new(Topology::from_file(path)?, DEFAULT_RELAY_LIMIT_HOURS)
    }

    /// The 8-hub / 30-arc Georgia-Florida example topology shipped with the
    /// crate. Example data: plausible metro hubs with road distances at a
    /// 50 mph average, not a ground-truth network.
    pub fn bundled() -> Network {
        let topology: Topology = serde_json::from_str(crate::bundled::TOPOLOGY_JSON)
            .expect("bundled topology parses");
        Network::new(topology, DEFAULT_RELAY_LIMIT_HOURS).expect("bundled topology is valid")
    }

    pub fn hubs(&self) -> &[Hub] {
        &self.hubs
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn relay_limit_hours(&self) -> f64 {
        self.relay_limit_hours
    }

    pub fn hub_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownHub(id.to_string()))
    }

    pub fn hub_id(&self, idx: usize) -> &str {
        &self.hubs[idx].id
    }

    /// Always empty on a constructed `Network`; exposed so callers can audit
    /// a network against a different limit.
    pub fn relay_violations(&self, limit_hours: f64) -> Vec<TopologyViolation> {
        relay_violations(&self.arcs, limit_hours)
    }

    /// Minimal-travel-time route from `origin` to `destination`, as
    /// (hub id sequence, total hours). Ties break on fewer hops, then the
    /// lexicographically smallest hub-id sequence.
    pub fn shortest_time_path(&self, origin: &str, destination: &str) -> Result<(Vec<String>, f64)> {
        let detail = self.time_path(self.hub_index(origin)?, self.hub_index(destination)?);
        Ok((
            detail.hubs.iter().map(|&i| self.hubs[i].id.clone()).collect(),
            detail.hours,
        ))
    }

    /// Minimal-mileage route, same tie-breaking scheme as the time paths.
    pub fn shortest_distance_path(
        &self,
        origin: &str,
        destination: &str,
    ) -> Result<(Vec<String>, f64)> {
        let detail = self.dist_path(self.hub_index(origin)?, self.hub_index(destination)?);
        Ok((
            detail.hubs.iter().map(|&i| self.hubs[i].id.clone()).collect(),
            detail.miles,
        ))
    }

    pub fn time_path(&self, origin: usize, destination: usize) -> &PathDetail {
        &self.time_paths[origin][destination]
    }

    pub fn dist_path(&self, origin: usize, destination: usize) -> &PathDetail {
        &self.dist_paths[origin][destination]
    }

    /// Whole-hour transit along the canonical shortest-time path. This is
    /// the earliest arrival offset the hourly dispatch cadence can realize.
    pub fn min_transit_hours_int(&self, origin: usize, destination: usize) -> u32 {
        self.time_paths[origin][destination].transit_hours_int
    }

    /// Dijkstra from `source` with deterministic tie-breaking:
    /// (weight, hop count, lexicographic hub-id sequence). Linear-scan node
    /// selection; networks here are small.
    fn single_source(&self, source: usize, metric: Metric) -> Vec<PathDetail> {
        let n = self.hubs.len();
        let mut best: Vec<Option<PathDetail>> = vec![None; n];
        let mut done = vec![false; n];
        best[source] = Some(PathDetail {
            hubs: vec![source],
            arcs: Vec::new(),
            hours: 0.0,
            miles: 0.0,
            transit_hours_int: 0,
        });

        loop {
            let mut next: Option<usize> = None;
            for v in 0..n {
                if done[v] || best[v].is_none() {
                    continue;
                }
                match next {
                    None => next = Some(v),
                    Some(u) => {
                        if self.key_less(best[v].as_ref().unwrap(), best[u].as_ref().unwrap(), metric)
                        {
                            next = Some(v);
                        }
                    }
                }
            }
            let Some(u) = next else { break };
            done[u] = true;
            let base = best[u].clone().unwrap();
            for &(v, arc_idx) in &self.adjacency[u] {
                if done[v] {
                    continue;
                }
                let arc = &self.arcs[arc_idx];
                let mut candidate = base.clone();
                candidate.hubs.push(v);
                candidate.arcs.push(arc_idx);
                candidate.hours += arc.hours;
                candidate.miles += arc.miles;
                candidate.transit_hours_int += arc.hours.ceil() as u32;
                let better = match &best[v] {
                    None => true,
                    Some(current) => self.key_less(&candidate, current, metric),
                };
                if better {
                    best[v] = Some(candidate);
                }
            }
        }

        best.into_iter()
            .enumerate()
            .map(|(d, p)| {
                p.unwrap_or_else(|| panic!("validated network must connect {source} to {d}"))
            })
            .collect()
    }

    fn key_less(&self, a: &PathDetail, b: &PathDetail, metric: Metric) -> bool {
        let (wa, wb) = match metric {
            Metric::Time => (a.hours, b.hours),
            Metric::Distance => (a.miles, b.miles),
        };
        match wa.total_cmp(&wb) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
        match a.hubs.len().cmp(&b.hubs.len()) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
        let ra = a.hubs.iter().map(|&i| self.lex_rank[i]);
        let rb = b.hubs.iter().map(|&i| self.lex_rank[i]);
        ra.cmp(rb) == std::cmp::Ordering::Less
    }

    /// Draw one case's cost table. Fixed specs consume no randomness, so
    /// scenarios that differ only in cost uncertainty still see identical
    /// downstream draws from a separately seeded demand stream.
    pub fn sample_arc_costs(
        &self,
        truck_mile: &RateSpec,
        transload: &RateSpec,
        rng: &mut impl Rng,
    ) -> Result<ArcCostTable> {
        truck_mile.validate()?;
        transload.validate()?;
        let per_truck_mile = self.arcs.iter().map(|_| truck_mile.sample(rng)).collect();
        let per_pound_transload = self.hubs.iter().map(|_| transload.sample(rng)).collect();
        Ok(ArcCostTable {
            per_truck_mile,
            per_pound_transload,
        })
    }
}

/// A dollar rate that is either fixed or drawn uniformly from an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSpec {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

impl RateSpec {
    pub fn validate(&self) -> Result<()> {
        let (low, high) = match *self {
            RateSpec::Fixed(v) => (v, v),
            RateSpec::Uniform { low, high } => (low, high),
        };
        if low <= 0.0 || low > high {
            return Err(Error::InvalidInterval { low, high });
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            RateSpec::Fixed(v) => v,
            RateSpec::Uniform { low, high } => rng.gen_range(low..=high),
        }
    }

    /// Expectation of the rate; interval specs use the midpoint.
    pub fn expected(&self) -> f64 {
        match *self {
            RateSpec::Fixed(v) => v,
            RateSpec::Uniform { low, high } => (low + high) / 2.0,
        }
    }
}

/// Per-case sampled rates: dollars per truck-mile by arc and dollars per
/// pound of transload handling by hub.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcCostTable {
    pub per_truck_mile: Vec<f64>,
    pub per_pound_transload: Vec<f64>,
}

impl ArcCostTable {
    pub fn truck_mile_rate(&self, arc_idx: usize) -> f64 {
        self.per_truck_mile[arc_idx]
    }

    pub fn transload_rate(&self, hub_idx: usize) -> f64 {
        self.per_pound_transload[hub_idx]
    }

    /// Full-truck cost of traversing one arc.
    pub fn leg_cost(&self, net: &Network, arc_idx: usize) -> f64 {
        net.arcs()[arc_idx].miles * self.per_truck_mile[arc_idx]
    }
}
