//! Scenario orchestration: seed derivation, the historical phase that fills
//! the observation pool, testing cases that run the quote-plan-feedback
//! loop, KPI aggregation into case-level quartiles, and the fixed-price
//! baseline comparison. Cases are embarrassingly parallel; aggregation is a
//! single-threaded reduction in case order, so results are identical at any
//! parallelism level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::demand::{spawn_requests, DemandParams, ODFlow, ScenarioSpec, ShipmentRequest};
use crate::error::{Error, Result};
use crate::network::{ArcCostTable, Network};
use crate::planning::{
    build_time_expanded_graph, GreedyPlanner, Planner, PlannerConfig, TimeExpandedGraph,
    TruckDispatch,
};
use crate::pricing::{
    group_key, quote, record_outcome, CostObservation, FallbackRates, ObservationPool,
    OutcomeRecord, Provenance, Quote, RobustnessConfig,
};

// seed-derivation streams
const STREAM_HISTORICAL: u64 = 1;
const STREAM_TESTING: u64 = 2;
const STREAM_COSTS: u64 = 3;
const STREAM_DEMAND: u64 = 4;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-case / per-stream seed derivation from one master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(
        splitmix64(master.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
            .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)),
    )
}

/// Everything a scenario run needs beyond the network and demand inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    pub scenario: ScenarioSpec,
    pub demand: DemandParams,
    pub planner: PlannerConfig,
    pub robustness: RobustnessConfig,
    pub load_factor_margin: f64,
    pub histogram_bin_width: f64,
    pub baseline_markup: f64,
    pub compare_baseline: bool,
    /// Rayon worker count; 0 uses the default pool.
    pub jobs: usize,
}

impl RunParams {
    pub fn new(scenario: ScenarioSpec) -> RunParams {
        RunParams {
            scenario,
            demand: DemandParams::default(),
            planner: PlannerConfig::default(),
            robustness: RobustnessConfig::default(),
            load_factor_margin: 3.0,
            histogram_bin_width: 0.02,
            baseline_markup: 1.3,
            compare_baseline: false,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.demand.truck_capacity_lb != self.planner.truck_capacity_lb {
            return Err(Error::InvalidConfig(format!(
                "demand and planner disagree on truck capacity ({} vs {})",
                self.demand.truck_capacity_lb, self.planner.truck_capacity_lb
            )));
        }
        Ok(())
    }

    fn fallback_rates(&self) -> FallbackRates {
        FallbackRates {
            per_truck_mile: self.scenario.truck_mile_cost.expected(),
            per_pound_transload: self.scenario.transload_cost.expected(),
            truck_capacity_lb: self.demand.truck_capacity_lb,
            load_factor_margin: self.load_factor_margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseRole {
    Historical,
    Testing,
}

/// Case-level key performance indicators over delivered requests.
/// `defined` is false when the case delivered nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseKpis {
    pub total_deviation: f64,
    pub per_pound_deviation: f64,
    pub avg_price_per_pound: f64,
    pub total_weight_lb: f64,
    pub total_price: f64,
    pub defined: bool,
}

/// One simulated 48-hour world and everything it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: String,
    pub role: CaseRole,
    pub seed: u64,
    pub costs: ArcCostTable,
    pub requests: Vec<ShipmentRequest>,
    pub quotes: Vec<Quote>,
    pub outcomes: Vec<OutcomeRecord>,
    pub infeasible_ids: Vec<String>,
    /// Per delivered request: (quoted - realized) / pounds.
    pub pricing_errors: Vec<f64>,
    pub dispatches: Vec<TruckDispatch>,
    pub kpis: CaseKpis,
}

/// KPI formulas over one case's quotes and outcomes.
pub fn compute_kpis(quotes: &[Quote], outcomes: &[OutcomeRecord]) -> CaseKpis {
    let by_id: BTreeMap<&str, &Quote> = quotes.iter().map(|q| (q.request_id.as_str(), q)).collect();
    let mut total_deviation = 0.0;
    let mut total_weight_lb = 0.0;
    let mut total_price = 0.0;
    for outcome in outcomes {
        let quote = by_id[outcome.request_id.as_str()];
        total_deviation += outcome.deviation;
        total_weight_lb += quote.weight_lb;
        total_price += quote.total_price;
    }
    if total_weight_lb > 0.0 {
        CaseKpis {
            total_deviation,
            per_pound_deviation: total_deviation / total_weight_lb,
            avg_price_per_pound: total_price / total_weight_lb,
            total_weight_lb,
            total_price,
            defined: true,
        }
    } else {
        CaseKpis {
            total_deviation: 0.0,
            per_pound_deviation: 0.0,
            avg_price_per_pound: 0.0,
            total_weight_lb: 0.0,
            total_price: 0.0,
            defined: false,
        }
    }
}

/// Linear-interpolation quartiles (the common "R-7" rule: position p(n-1)).
pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyQuartileInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let at = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        }
    };
    Ok((at(0.25), at(0.5), at(0.75)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
    pub nonnegative_share: f64,
    pub total: usize,
}

/// Bin per-pound pricing errors at `bin_width`, reporting the share of
/// nonnegative errors (quotes that covered their realized cost).
pub fn pricing_error_histogram(errors: &[f64], bin_width: f64) -> Histogram {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut nonnegative = 0usize;
    for &e in errors {
        *counts.entry((e / bin_width).floor() as i64).or_default() += 1;
        if e >= 0.0 {
            nonnegative += 1;
        }
    }
    Histogram {
        bin_width,
        bins: counts
            .into_iter()
            .map(|(idx, count)| HistogramBin {
                low: idx as f64 * bin_width,
                high: (idx + 1) as f64 * bin_width,
                count,
            })
            .collect(),
        nonnegative_share: if errors.is_empty() {
            0.0
        } else {
            nonnegative as f64 / errors.len() as f64
        },
        total: errors.len(),
    }
}

/// Physical simulation of one case, no quoting: sample costs, spawn
/// requests, run the hourly planning loop to completion.
fn simulate_physical(
    net: &Network,
    graph: &TimeExpandedGraph,
    flows: &[ODFlow],
    params: &RunParams,
    case_seed: u64,
) -> Result<(ArcCostTable, Vec<ShipmentRequest>, crate::planning::CaseRouting)> {
    use rand::SeedableRng;
    let mut cost_rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(case_seed, STREAM_COSTS, 0));
    let mut demand_rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(case_seed, STREAM_DEMAND, 0));
    let costs = net.sample_arc_costs(
        &params.scenario.truck_mile_cost,
        &params.scenario.transload_cost,
        &mut cost_rng,
    )?;
    let requests = spawn_requests(flows, &params.scenario, net, &params.demand, &mut demand_rng)?;

    let mut planner = GreedyPlanner::new(net, graph, params.planner.clone());
    let horizon = params.demand.delivery_horizon_hours();
    for now in 0..=horizon {
        planner.process_arrivals(now, &costs);
        if now < horizon {
            for req in requests.iter().filter(|r| r.release_hour == now) {
                planner.release(req)?;
            }
            planner.plan_instance(now, &costs);
        }
    }
    let routing = planner.finalize(&costs);
    Ok((costs, requests, routing))
}

/// Run the historical cases and pool their realized per-pound costs.
/// No quoting happens here; the pool is what later quotes draw on.
pub fn run_historical_phase(
    net: &Network,
    flows: &[ODFlow],
    params: &RunParams,
    master_seed: u64,
) -> Result<ObservationPool> {
    let graph = build_time_expanded_graph(net, params.demand.delivery_horizon_hours());
    let per_case: Vec<Result<Vec<(crate::pricing::GroupKey, CostObservation)>>> = (0..params
        .scenario
        .n_historical)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, STREAM_HISTORICAL, i as u64);
            let (_, requests, routing) = simulate_physical(net, &graph, flows, params, seed)?;
            let by_id: BTreeMap<&str, &ShipmentRequest> =
                requests.iter().map(|r| (r.id.as_str(), r)).collect();
            let mut observations = Vec::new();
            for (id, plan) in &routing.plans {
                if !plan.feasible {
                    continue;
                }
                let req = by_id[id.as_str()];
                observations.push((
                    group_key(req, params.robustness.bucket_hours),
                    CostObservation {
                        cost_per_lb: plan.allocated_cost / req.weight_lb,
                        weight: params.robustness.weight_historical,
                        provenance: Provenance::Historical,
                    },
                ));
            }
            Ok(observations)
        })
        .collect();

    let mut pool = ObservationPool::new();
    for case in per_case {
        for (key, obs) in case? {
            pool.push(key, obs);
        }
    }
    Ok(pool)
}

/// One testing case: the full request lifecycle. Each hour, completed
/// requests feed the case-local real-time pool before that hour's new
/// requests are quoted against the union of both pools, then the planning
/// instance runs. The shared historical pool is never mutated.
pub fn run_testing_case(
    net: &Network,
    graph: &TimeExpandedGraph,
    flows: &[ODFlow],
    params: &RunParams,
    historical: &ObservationPool,
    seed: u64,
    case_id: &str,
) -> Result<Case> {
    use rand::SeedableRng;
    let mut cost_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_COSTS, 0));
    let mut demand_rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DEMAND, 0));
    let costs = net.sample_arc_costs(
        &params.scenario.truck_mile_cost,
        &params.scenario.transload_cost,
        &mut cost_rng,
    )?;
    let requests = spawn_requests(flows, &params.scenario, net, &params.demand, &mut demand_rng)?;
    let fallback = params.fallback_rates();

    let mut planner = GreedyPlanner::new(net, graph, params.planner.clone());
    let mut realtime = ObservationPool::new();
    let mut quotes: Vec<Quote> = Vec::new();
    let mut quote_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut outcomes: Vec<OutcomeRecord> = Vec::new();
    let mut pricing_errors: Vec<f64> = Vec::new();

    let horizon = params.demand.delivery_horizon_hours();
    for now in 0..=horizon {
        for arrival in planner.process_arrivals(now, &costs) {
            if let Some(realized) = arrival.realized_cost {
                let q = &quotes[quote_index[&arrival.request_id]];
                let outcome = record_outcome(q, realized, &params.robustness, &mut realtime);
                pricing_errors.push((q.total_price - realized) / q.weight_lb);
                outcomes.push(outcome);
            }
        }
        if now < horizon {
            for req in requests.iter().filter(|r| r.release_hour == now) {
                let q = quote(req, historical, &realtime, &params.robustness, net, &fallback)?;
                quote_index.insert(req.id.clone(), quotes.len());
                quotes.push(q);
                planner.release(req)?;
            }
            planner.plan_instance(now, &costs);
        }
    }
    let routing = planner.finalize(&costs);
    let infeasible_ids: Vec<String> = routing
        .plans
        .values()
        .filter(|p| !p.feasible)
        .map(|p| p.request_id.clone())
        .collect();

    let kpis = compute_kpis(&quotes, &outcomes);
    Ok(Case {
        id: case_id.to_string(),
        role: CaseRole::Testing,
        seed,
        costs,
        requests,
        quotes,
        outcomes,
        infeasible_ids,
        pricing_errors,
        dispatches: routing.dispatches,
        kpis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Result<Quartiles> {
        let (lower, median, upper) = quartiles(values)?;
        Ok(Quartiles { lower, median, upper })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiQuartiles {
    pub total_deviation: Quartiles,
    pub per_pound_deviation: Quartiles,
    pub avg_price_per_pound: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCase {
    pub case_id: String,
    pub dynamic_profit: f64,
    pub fixed_profit: f64,
    pub difference: f64,
}

/// Accumulated profit of the dynamic quotes versus a flat per-pound rate on
/// the same request streams and identical realized costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub rate_per_lb: f64,
    pub markup: f64,
    pub per_case: Vec<BaselineCase>,
    pub dynamic_total: f64,
    pub fixed_total: f64,
}

/// Price every delivered request at `rate_per_lb` and compare accumulated
/// profit with the dynamic strategy, case by case on paired seeds.
pub fn run_fixed_price_baseline(rate_per_lb: f64, markup: f64, cases: &[Case]) -> BaselineComparison {
    let mut per_case = Vec::with_capacity(cases.len());
    let mut dynamic_total = 0.0;
    let mut fixed_total = 0.0;
    for case in cases {
        let by_id: BTreeMap<&str, &Quote> =
            case.quotes.iter().map(|q| (q.request_id.as_str(), q)).collect();
        let mut dynamic_profit = 0.0;
        let mut fixed_profit = 0.0;
        for outcome in &case.outcomes {
            let quote = by_id[outcome.request_id.as_str()];
            dynamic_profit += outcome.quoted_total - outcome.realized_cost;
            fixed_profit += rate_per_lb * quote.weight_lb - outcome.realized_cost;
        }
        dynamic_total += dynamic_profit;
        fixed_total += fixed_profit;
        per_case.push(BaselineCase {
            case_id: case.id.clone(),
            dynamic_profit,
            fixed_profit,
            difference: dynamic_profit - fixed_profit,
        });
    }
    BaselineComparison {
        rate_per_lb,
        markup,
        per_case,
        dynamic_total,
        fixed_total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySummary {
    pub n_requests: usize,
    pub n_delivered: usize,
    pub n_infeasible: usize,
    pub delivered_fraction: f64,
}

/// Full scenario outcome: the historical pool, every testing case, and the
/// case-level aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub master_seed: u64,
    pub scenario_id: u8,
    pub historical_pool: ObservationPool,
    pub cases: Vec<Case>,
    pub kpi_quartiles: Option<KpiQuartiles>,
    pub histogram: Histogram,
    pub baseline: Option<BaselineComparison>,
    pub feasibility: FeasibilitySummary,
}

/// Historical phase, then the testing cases, then aggregation. Fully
/// deterministic for a given (network, flows, params, master_seed),
/// whatever `params.jobs` says.
pub fn run_scenario(
    net: &Network,
    flows: &[ODFlow],
    params: &RunParams,
    master_seed: u64,
) -> Result<ScenarioResult> {
    params.validate()?;
    if params.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
        pool.install(|| run_scenario_inner(net, flows, params, master_seed))
    } else {
        run_scenario_inner(net, flows, params, master_seed)
    }
}

fn run_scenario_inner(
    net: &Network,
    flows: &[ODFlow],
    params: &RunParams,
    master_seed: u64,
) -> Result<ScenarioResult> {
    let historical = run_historical_phase(net, flows, params, master_seed)?;
    let graph = build_time_expanded_graph(net, params.demand.delivery_horizon_hours());

    let cases: Vec<Case> = (0..params.scenario.n_testing)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, STREAM_TESTING, i as u64);
            run_testing_case(net, &graph, flows, params, &historical, seed, &format!("t{i:03}"))
        })
        .collect::<Result<Vec<Case>>>()?;

    let defined: Vec<&Case> = cases.iter().filter(|c| c.kpis.defined).collect();
    let kpi_quartiles = if defined.is_empty() {
        None
    } else {
        let collect = |f: fn(&CaseKpis) -> f64| -> Vec<f64> {
            defined.iter().map(|c| f(&c.kpis)).collect()
        };
        Some(KpiQuartiles {
            total_deviation: Quartiles::of(&collect(|k| k.total_deviation))?,
            per_pound_deviation: Quartiles::of(&collect(|k| k.per_pound_deviation))?,
            avg_price_per_pound: Quartiles::of(&collect(|k| k.avg_price_per_pound))?,
        })
    };

    let all_errors: Vec<f64> = cases.iter().flat_map(|c| c.pricing_errors.iter().copied()).collect();
    let histogram = pricing_error_histogram(&all_errors, params.histogram_bin_width);

    let baseline = if params.compare_baseline {
        let mean_cost = historical.global_mean_cost().unwrap_or(0.0);
        Some(run_fixed_price_baseline(
            mean_cost * params.baseline_markup,
            params.baseline_markup,
            &cases,
        ))
    } else {
        None
    };

    let n_requests: usize = cases.iter().map(|c| c.requests.len()).sum();
    let n_delivered: usize = cases.iter().map(|c| c.outcomes.len()).sum();
    let n_infeasible: usize = cases.iter().map(|c| c.infeasible_ids.len()).sum();
    let feasibility = FeasibilitySummary {
        n_requests,
        n_delivered,
        n_infeasible,
        delivered_fraction: if n_requests == 0 {
            0.0
        } else {
            n_delivered as f64 / n_requests as f64
        },
    };

    Ok(ScenarioResult {
        master_seed,
        scenario_id: params.scenario.id,
        historical_pool: historical,
        cases,
        kpi_quartiles,
        histogram,
        baseline,
        feasibility,
    })
}
