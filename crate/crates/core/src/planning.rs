//! The planning agent: routes released requests over a time-expanded relay
//! network, consolidates them onto capacity-limited trucks at hourly
//! planning instances, and allocates each truck leg's cost pro rata by
//! weight. Allocated costs are the realized `c_k` the pricing feedback
//! loop consumes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::demand::ShipmentRequest;
use crate::error::Result;
use crate::network::{ArcCostTable, Network};

/// Movement possibility in the hub-by-hour expansion of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MovementArc {
    pub from_hub: usize,
    pub to_hub: usize,
    pub arc_index: usize,
    pub depart_hour: u32,
    pub arrive_hour: u32,
}

/// Hub-by-hour expansion over `[0, horizon]`. Nodes are implicit
/// (hub, hour) pairs; waiting arcs connect consecutive hours at a hub, and
/// movement arcs exist wherever a network arc's whole-hour traversal still
/// fits the horizon.
#[derive(Debug, Clone)]
pub struct TimeExpandedGraph {
    pub horizon_hours: u32,
    pub hub_count: usize,
    pub movement_arcs: Vec<MovementArc>,
    /// Whole-hour traversal time per network arc (travel time rounded up).
    leg_hours: Vec<u32>,
}

pub fn build_time_expanded_graph(net: &Network, horizon_hours: u32) -> TimeExpandedGraph {
    let leg_hours: Vec<u32> = net.arcs().iter().map(|a| a.hours.ceil() as u32).collect();
    let hub_index: BTreeMap<&str, usize> = net
        .hubs()
        .iter()
        .enumerate()
        .map(|(i, h)| (h.id.as_str(), i))
        .collect();
    let mut movement_arcs = Vec::new();
    for depart_hour in 0..horizon_hours {
        for (arc_index, arc) in net.arcs().iter().enumerate() {
            let arrive_hour = depart_hour + leg_hours[arc_index];
            if arrive_hour > horizon_hours {
                continue;
            }
            let a = hub_index[arc.from.as_str()];
            let b = hub_index[arc.to.as_str()];
            for (from_hub, to_hub) in [(a, b), (b, a)] {
                movement_arcs.push(MovementArc {
                    from_hub,
                    to_hub,
                    arc_index,
                    depart_hour,
                    arrive_hour,
                });
            }
        }
    }
    TimeExpandedGraph {
        horizon_hours,
        hub_count: net.hubs().len(),
        movement_arcs,
        leg_hours,
    }
}

impl TimeExpandedGraph {
    pub fn node_count(&self) -> usize {
        self.hub_count * (self.horizon_hours as usize + 1)
    }

    pub fn waiting_arc_count(&self) -> usize {
        self.hub_count * self.horizon_hours as usize
    }

    /// Arrival hour of a truck departing on `arc_index` at `depart`, if the
    /// traversal still fits inside the horizon.
    pub fn movement_arrival(&self, arc_index: usize, depart: u32) -> Option<u32> {
        let arrive = depart + self.leg_hours[arc_index];
        (arrive <= self.horizon_hours).then_some(arrive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerConfig {
    pub truck_capacity_lb: f64,
    /// A truck departs once its load reaches this fraction of capacity.
    pub fill_threshold: f64,
    /// ... or once any onboard request can afford to wait at most this long.
    pub urgency_slack_hours: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            truck_capacity_lb: 40_000.0,
            fill_threshold: 0.8,
            urgency_slack_hours: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub request_id: String,
    pub pounds: f64,
}

/// One truck over one relay leg with its consolidated load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruckDispatch {
    pub truck_id: String,
    pub arc_index: usize,
    pub from: String,
    pub to: String,
    pub depart_hour: u32,
    pub arrive_hour: u32,
    pub manifest: Vec<ManifestEntry>,
}

impl TruckDispatch {
    pub fn manifest_pounds(&self) -> f64 {
        self.manifest.iter().map(|e| e.pounds).sum()
    }
}

/// A request's realized journey: the hub-hour points it touched, when it
/// arrived (if it did), what it was charged, and whether it met its window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutePlan {
    pub request_id: String,
    pub itinerary: Vec<(String, u32)>,
    pub arrival_hour: Option<u32>,
    pub allocated_cost: f64,
    pub feasible: bool,
}

/// Everything the planner produced for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRouting {
    pub dispatches: Vec<TruckDispatch>,
    pub plans: BTreeMap<String, RoutePlan>,
}

/// State change surfaced by `process_arrivals`: the request reached `hub`
/// at `hour`; `realized_cost` is set when that hub is its destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub request_id: String,
    pub hub: String,
    pub hour: u32,
    pub realized_cost: Option<f64>,
}

/// Hourly-instance planner interface. Exact optimizers can implement this
/// next to the greedy heuristic; `plan_instance` receives the case's cost
/// table for planners that route cost-aware.
pub trait Planner {
    fn release(&mut self, req: &ShipmentRequest) -> Result<()>;
    fn process_arrivals(&mut self, now: u32, costs: &ArcCostTable) -> Vec<Arrival>;
    fn plan_instance(&mut self, now: u32, costs: &ArcCostTable) -> Vec<TruckDispatch>;
    fn finalize(&mut self, costs: &ArcCostTable) -> CaseRouting;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RequestState {
    Pending { hub: usize },
    InTransit { to_hub: usize, arrive_hour: u32 },
    Delivered { hour: u32 },
    Infeasible { hour: u32 },
}

#[derive(Debug, Clone, Copy)]
struct LegRecord {
    arc_index: usize,
    pounds: f64,
    manifest_pounds: f64,
    to_hub: usize,
    depart_hour: u32,
}

#[derive(Debug, Clone)]
struct ActiveRequest {
    destination: usize,
    deadline_hour: f64,
    weight_lb: f64,
    state: RequestState,
    itinerary: Vec<(usize, u32)>,
    legs: Vec<LegRecord>,
}

/// Deterministic greedy consolidation.
///
/// Each instance: (1) every pending request follows its canonical
/// shortest-time path; (2) requests sharing (hub, next hub) are sorted by
/// slack and packed first-fit into trucks; (3) a truck leaves when it hits
/// the fill threshold or carries anything urgent, otherwise everyone waits
/// an hour. Slack counts down to the earlier of the deadline and the end of
/// the horizon, so nothing is dispatched onto a leg it cannot finish.
pub struct GreedyPlanner<'a> {
    net: &'a Network,
    graph: &'a TimeExpandedGraph,
    cfg: PlannerConfig,
    active: BTreeMap<String, ActiveRequest>,
    dispatches: Vec<TruckDispatch>,
    truck_seq: usize,
}

impl<'a> GreedyPlanner<'a> {
    pub fn new(net: &'a Network, graph: &'a TimeExpandedGraph, cfg: PlannerConfig) -> Self {
        GreedyPlanner {
            net,
            graph,
            cfg,
            active: BTreeMap::new(),
            dispatches: Vec::new(),
            truck_seq: 0,
        }
    }

    fn slack(&self, now: u32, hub: usize, ar: &ActiveRequest) -> f64 {
        let transit = self.net.time_path(hub, ar.destination).transit_hours_int;
        let limit = ar.deadline_hour.min(self.graph.horizon_hours as f64);
        limit - (now + transit) as f64
    }

    fn cost_of(&self, ar: &ActiveRequest, costs: &ArcCostTable) -> f64 {
        legs_cost(&ar.legs, costs, self.net)
    }
}

impl Planner for GreedyPlanner<'_> {
    fn release(&mut self, req: &ShipmentRequest) -> Result<()> {
        let origin = self.net.hub_index(&req.origin)?;
        let destination = self.net.hub_index(&req.destination)?;
        self.active.insert(
            req.id.clone(),
            ActiveRequest {
                destination,
                deadline_hour: req.deadline_hour,
                weight_lb: req.weight_lb,
                state: RequestState::Pending { hub: origin },
                itinerary: vec![(origin, req.release_hour)],
                legs: Vec::new(),
            },
        );
        Ok(())
    }

    fn process_arrivals(&mut self, now: u32, costs: &ArcCostTable) -> Vec<Arrival> {
        let net = self.net;
        let mut arrivals = Vec::new();
        let ids: Vec<String> = self
            .active
            .iter()
            .filter(|(_, ar)| {
                matches!(ar.state, RequestState::InTransit { arrive_hour, .. } if arrive_hour == now)
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in ids {
            let ar = self.active.get_mut(&id).unwrap();
            let RequestState::InTransit { to_hub, .. } = ar.state else {
                unreachable!()
            };
            ar.itinerary.push((to_hub, now));
            let delivered = to_hub == ar.destination;
            ar.state = if delivered {
                RequestState::Delivered { hour: now }
            } else {
                RequestState::Pending { hub: to_hub }
            };
            let realized_cost = delivered.then(|| legs_cost(&ar.legs, costs, net));
            arrivals.push(Arrival {
                request_id: id.clone(),
                hub: net.hub_id(to_hub).to_string(),
                hour: now,
                realized_cost,
            });
        }
        arrivals
    }

    fn plan_instance(&mut self, now: u32, _costs: &ArcCostTable) -> Vec<TruckDispatch> {
        // (1) feasibility sweep and grouping by next hub on the canonical path
        let mut groups: BTreeMap<(usize, usize, usize), Vec<(f64, String)>> = BTreeMap::new();
        let ids: Vec<String> = self.active.keys().cloned().collect();
        for id in &ids {
            let ar = &self.active[id];
            let RequestState::Pending { hub } = ar.state else { continue };
            let path = self.net.time_path(hub, ar.destination);
            let earliest_arrival = now + path.transit_hours_int;
            if earliest_arrival as f64 > ar.deadline_hour + 1e-9
                || earliest_arrival > self.graph.horizon_hours
            {
                self.active.get_mut(id).unwrap().state = RequestState::Infeasible { hour: now };
                continue;
            }
            let slack = self.slack(now, hub, ar);
            groups
                .entry((hub, path.hubs[1], path.arcs[0]))
                .or_default()
                .push((slack, id.clone()));
        }

        // (2) slack-ordered first-fit packing, (3) threshold-or-urgency dispatch
        let mut new_dispatches = Vec::new();
        for ((hub, _next, arc_index), mut members) in groups {
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let mut trucks: Vec<(Vec<usize>, f64)> = Vec::new();
            for (i, (_, id)) in members.iter().enumerate() {
                let pounds = self.active[id].weight_lb;
                match trucks
                    .iter_mut()
                    .find(|(_, load)| load + pounds <= self.cfg.truck_capacity_lb + 1e-9)
                {
                    Some((slots, load)) => {
                        slots.push(i);
                        *load += pounds;
                    }
                    None => trucks.push((vec![i], pounds)),
                }
            }
            for (slots, load) in trucks {
                assert!(
                    load <= self.cfg.truck_capacity_lb * (1.0 + 1e-12),
                    "manifest exceeds truck capacity"
                );
                let urgent = slots
                    .iter()
                    .any(|&i| members[i].0 <= self.cfg.urgency_slack_hours + 1e-9);
                let full = load >= self.cfg.fill_threshold * self.cfg.truck_capacity_lb - 1e-9;
                if !urgent && !full {
                    continue; // held: onboard requests wait one hour
                }
                let arrive_hour = self
                    .graph
                    .movement_arrival(arc_index, now)
                    .expect("slack accounting keeps dispatched legs inside the horizon");
                let to_hub = {
                    // the arc endpoint that is not the current hub
                    let arc = &self.net.arcs()[arc_index];
                    let a = self.net.hub_index(&arc.from).unwrap();
                    let b = self.net.hub_index(&arc.to).unwrap();
                    if a == hub {
                        b
                    } else {
                        a
                    }
                };
                let manifest: Vec<ManifestEntry> = slots
                    .iter()
                    .map(|&i| ManifestEntry {
                        request_id: members[i].1.clone(),
                        pounds: self.active[&members[i].1].weight_lb,
                    })
                    .collect();
                let manifest_pounds: f64 = manifest.iter().map(|e| e.pounds).sum();
                let dispatch = TruckDispatch {
                    truck_id: format!("k{:05}", self.truck_seq),
                    arc_index,
                    from: self.net.hub_id(hub).to_string(),
                    to: self.net.hub_id(to_hub).to_string(),
                    depart_hour: now,
                    arrive_hour,
                    manifest,
                };
                self.truck_seq += 1;
                for entry in &dispatch.manifest {
                    let ar = self.active.get_mut(&entry.request_id).unwrap();
                    ar.state = RequestState::InTransit { to_hub, arrive_hour };
                    ar.legs.push(LegRecord {
                        arc_index,
                        pounds: entry.pounds,
                        manifest_pounds,
                        to_hub,
                        depart_hour: now,
                    });
                }
                self.dispatches.push(dispatch.clone());
                new_dispatches.push(dispatch);
            }
        }
        new_dispatches
    }

    fn finalize(&mut self, costs: &ArcCostTable) -> CaseRouting {
        let mut plans = BTreeMap::new();
        for (id, ar) in &self.active {
            let (arrival_hour, feasible) = match ar.state {
                RequestState::Delivered { hour } => (Some(hour), true),
                _ => (None, false),
            };
            plans.insert(
                id.clone(),
                RoutePlan {
                    request_id: id.clone(),
                    itinerary: ar
                        .itinerary
                        .iter()
                        .map(|&(hub, hour)| (self.net.hub_id(hub).to_string(), hour))
                        .collect(),
                    arrival_hour,
                    allocated_cost: self.cost_of(ar, costs),
                    feasible,
                },
            );
        }
        CaseRouting {
            dispatches: std::mem::take(&mut self.dispatches),
            plans,
        }
    }
}

/// Per-request realized cost from a case's dispatch list: each truck leg's
/// cost is split pro rata by onboard weight, and each truck change at an
/// intermediate hub is charged at that hub's per-pound transload rate.
/// Per leg, the shares sum to the leg cost exactly (up to rounding).
pub fn allocate_costs(
    dispatches: &[TruckDispatch],
    costs: &ArcCostTable,
    net: &Network,
) -> BTreeMap<String, f64> {
    let mut legs: BTreeMap<String, Vec<LegRecord>> = BTreeMap::new();
    for dispatch in dispatches {
        let manifest_pounds = dispatch.manifest_pounds();
        let to_hub = net.hub_index(&dispatch.to).expect("dispatch hub exists");
        for entry in &dispatch.manifest {
            legs.entry(entry.request_id.clone()).or_default().push(LegRecord {
                arc_index: dispatch.arc_index,
                pounds: entry.pounds,
                manifest_pounds,
                to_hub,
                depart_hour: dispatch.depart_hour,
            });
        }
    }
    legs.into_iter()
        .map(|(id, mut recs)| {
            recs.sort_by_key(|r| r.depart_hour);
            let cost = legs_cost(&recs, costs, net);
            (id, cost)
        })
        .collect()
}

fn legs_cost(legs: &[LegRecord], costs: &ArcCostTable, net: &Network) -> f64 {
    let mut leg_sum = 0.0;
    for leg in legs {
        leg_sum += costs.leg_cost(net, leg.arc_index) * (leg.pounds / leg.manifest_pounds);
    }
    let mut transfer_sum = 0.0;
    for pair in legs.windows(2) {
        transfer_sum += costs.transload_rate(pair[0].to_hub) * pair[0].pounds;
    }
    leg_sum + transfer_sum
}
