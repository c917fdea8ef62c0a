//! Result files for a scenario run and the console quartile report.
//!
//! `kpis.csv` carries one row per testing case; `summary.json` carries the
//! resolved configuration, the KPI quartiles, the pricing-error histogram,
//! and the baseline comparison. Both are written deterministically so
//! reruns with the same config and seed are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{
    BaselineComparison, FeasibilitySummary, Histogram, KpiQuartiles, ScenarioResult,
};
use crate::network::Network;

/// Everything `summary.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub master_seed: u64,
    pub scenario_id: u8,
    pub historical_pool_observations: usize,
    pub feasibility: FeasibilitySummary,
    pub kpi_quartiles: Option<KpiQuartiles>,
    pub histogram: Histogram,
    pub baseline: Option<BaselineComparison>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `kpis.csv`, `summary.json`, `historical_pool.csv`, and (optionally)
/// per-case dispatch logs into `dir`. Returns the summary that was written.
pub fn write_results(
    dir: &Path,
    echo: &RunConfig,
    result: &ScenarioResult,
    net: &Network,
    write_dispatch_logs: bool,
) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut kpis = String::from(
        "case_id,total_deviation,per_pound_deviation,avg_price_per_pound,n_requests,n_infeasible\n",
    );
    for case in &result.cases {
        writeln!(
            kpis,
            "{},{},{},{},{},{}",
            case.id,
            case.kpis.total_deviation,
            case.kpis.per_pound_deviation,
            case.kpis.avg_price_per_pound,
            case.requests.len(),
            case.infeasible_ids.len()
        )
        .expect("writing to a String cannot fail");
    }
    write_file(&dir.join("kpis.csv"), &kpis)?;

    result.historical_pool.write_csv(&dir.join("historical_pool.csv"))?;

    if write_dispatch_logs {
        for case in &result.cases {
            let mut log = String::from(
                "depart_hour,from,to,truck_id,request_id,pounds,leg_cost_share\n",
            );
            for dispatch in &case.dispatches {
                let leg_cost = case.costs.leg_cost(net, dispatch.arc_index);
                let total = dispatch.manifest_pounds();
                for entry in &dispatch.manifest {
                    writeln!(
                        log,
                        "{},{},{},{},{},{},{}",
                        dispatch.depart_hour,
                        dispatch.from,
                        dispatch.to,
                        dispatch.truck_id,
                        entry.request_id,
                        entry.pounds,
                        leg_cost * entry.pounds / total
                    )
                    .expect("writing to a String cannot fail");
                }
            }
            write_file(&dir.join(format!("dispatch_{}.csv", case.id)), &log)?;
        }
    }

    let summary = RunSummary {
        config: echo.clone(),
        master_seed: result.master_seed,
        scenario_id: result.scenario_id,
        historical_pool_observations: result.historical_pool.observation_count(),
        feasibility: result.feasibility.clone(),
        kpi_quartiles: result.kpi_quartiles.clone(),
        histogram: result.histogram.clone(),
        baseline: result.baseline.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|source| Error::Json {
        path: dir.join("summary.json"),
        source,
    })?;
    write_file(&dir.join("summary.json"), &format!("{json}\n"))?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

/// `pricing_errors.csv`: one row per histogram bin, for external plotting.
pub fn write_pricing_errors_csv(dir: &Path, histogram: &Histogram) -> Result<PathBuf> {
    let mut out = String::from("bin_low,bin_high,count\n");
    for bin in &histogram.bins {
        writeln!(out, "{},{},{}", bin.low, bin.high, bin.count)
            .expect("writing to a String cannot fail");
    }
    let path = dir.join("pricing_errors.csv");
    write_file(&path, &out)?;
    Ok(path)
}

/// The three-KPI quartile table in the familiar layout.
pub fn quartile_table(summary: &RunSummary) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Scenario {}  ({} testing cases, seed {})",
        summary.scenario_id, summary.config.n_testing.unwrap_or(0), summary.master_seed
    )
    .unwrap();
    writeln!(
        out,
        "{:<26}{:>16}{:>12}{:>16}",
        "KPIs", "Lower Quartile", "Median", "Upper Quartile"
    )
    .unwrap();
    match &summary.kpi_quartiles {
        Some(q) => {
            for (label, quartile) in [
                ("Total Deviation", &q.total_deviation),
                ("Per Pound Deviation", &q.per_pound_deviation),
                ("Average Price Per Pound", &q.avg_price_per_pound),
            ] {
                writeln!(
                    out,
                    "{:<26}{:>16.4}{:>12.4}{:>16.4}",
                    label, quartile.lower, quartile.median, quartile.upper
                )
                .unwrap();
            }
        }
        None => {
            writeln!(out, "(no delivered requests; KPIs undefined)").unwrap();
        }
    }
    writeln!(
        out,
        "Pricing errors: {} requests, {:.1}% nonnegative",
        summary.histogram.total,
        summary.histogram.nonnegative_share * 100.0
    )
    .unwrap();
    if let Some(b) = &summary.baseline {
        writeln!(
            out,
            "Baseline (flat {:.4} $/lb): dynamic profit {:.2} vs fixed {:.2}",
            b.rate_per_lb, b.dynamic_total, b.fixed_total
        )
        .unwrap();
    }
    writeln!(
        out,
        "Feasibility: {}/{} delivered ({:.2}%), {} infeasible",
        summary.feasibility.n_delivered,
        summary.feasibility.n_requests,
        summary.feasibility.delivered_fraction * 100.0,
        summary.feasibility.n_infeasible
    )
    .unwrap();
    out
}
