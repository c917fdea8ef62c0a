//! Run configuration: a single JSON document whose keys the CLI flags
//! override. `resolve` materializes every default so the echo written into
//! `summary.json` reproduces the run byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::demand::{
    bundled_od_flows, ingest_od_flows, synthesize_od_flows, DemandParams, ODFlow, ScenarioSpec,
};
use crate::error::{Error, Result};
use crate::harness::{derive_seed, RunParams};
use crate::network::Network;
use crate::planning::PlannerConfig;
use crate::pricing::RobustnessConfig;

// seed stream for demand synthesis; the harness owns streams 1-4
const STREAM_SYNTHESIS: u64 = 5;

/// A bundled preset number or a fully spelled-out scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSelect {
    Preset(u8),
    Custom(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Topology JSON; null means the bundled 8-hub network.
    pub topology: Option<PathBuf>,
    /// OD flow CSV; null means the bundled demand file.
    pub demand: Option<PathBuf>,
    /// With no demand file, synthesize gravity-model flows totalling this
    /// many annual tons (seeded from the master seed) instead of using the
    /// bundled file.
    pub synthesize_annual_tons: Option<f64>,
    pub scenario: ScenarioSelect,
    pub seed: u64,
    /// Case-count overrides; null defers to desk_scale or the scenario.
    pub n_historical: Option<usize>,
    pub n_testing: Option<usize>,
    /// 20 historical / 10 testing cases instead of the full 100 / 30.
    pub desk_scale: bool,
    pub jobs: usize,
    pub compare_baseline: bool,
    pub baseline_markup: f64,
    pub out_dir: PathBuf,
    pub confidence: f64,
    pub weight_historical: f64,
    pub weight_realtime: f64,
    pub bucket_hours: f64,
    pub truck_capacity_lb: f64,
    pub fill_threshold: f64,
    pub urgency_slack_hours: f64,
    pub load_factor_margin: f64,
    pub horizon_hours: u32,
    pub histogram_bin_width: f64,
    pub write_dispatch_logs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let demand = DemandParams::default();
        let planner = PlannerConfig::default();
        let robustness = RobustnessConfig::default();
        RunConfig {
            topology: None,
            demand: None,
            synthesize_annual_tons: None,
            scenario: ScenarioSelect::Preset(1),
            seed: 42,
            n_historical: None,
            n_testing: None,
            desk_scale: false,
            jobs: 0,
            compare_baseline: false,
            baseline_markup: 1.3,
            out_dir: PathBuf::from("results"),
            confidence: robustness.confidence,
            weight_historical: robustness.weight_historical,
            weight_realtime: robustness.weight_realtime,
            bucket_hours: robustness.bucket_hours,
            truck_capacity_lb: demand.truck_capacity_lb,
            fill_threshold: planner.fill_threshold,
            urgency_slack_hours: planner.urgency_slack_hours,
            load_factor_margin: 3.0,
            horizon_hours: demand.horizon_hours,
            histogram_bin_width: 0.02,
            write_dispatch_logs: false,
        }
    }
}

/// Desk-scale case counts: enough signal to compare scenarios, small
/// enough for local iteration and CI.
pub const DESK_SCALE_HISTORICAL: usize = 20;
pub const DESK_SCALE_TESTING: usize = 10;

#[derive(Debug, Clone)]
pub struct Resolved {
    /// The config with every default materialized; echoed into results.
    pub echo: RunConfig,
    pub params: RunParams,
}

impl RunConfig {
    /// The network this config selects: an explicit file or the bundled one.
    pub fn load_network(&self) -> Result<Network> {
        match &self.topology {
            Some(path) => Network::from_file(path),
            None => Ok(Network::bundled()),
        }
    }

    /// The demand flows this config selects: an explicit CSV, synthesized
    /// gravity flows (seeded from the master seed), or the bundled file.
    pub fn load_flows(&self, net: &Network) -> Result<Vec<ODFlow>> {
        use rand::SeedableRng;
        match (&self.demand, self.synthesize_annual_tons) {
            (Some(path), _) => ingest_od_flows(path, net),
            (None, Some(total)) => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
                    self.seed,
                    STREAM_SYNTHESIS,
                    0,
                ));
                synthesize_od_flows(net, total, &mut rng)
            }
            (None, None) => bundled_od_flows(net),
        }
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let mut spec = match &self.scenario {
            ScenarioSelect::Preset(id) => ScenarioSpec::preset(*id)?,
            ScenarioSelect::Custom(custom) => custom.clone(),
        };
        if self.desk_scale {
            spec.n_historical = DESK_SCALE_HISTORICAL;
            spec.n_testing = DESK_SCALE_TESTING;
        }
        if let Some(n) = self.n_historical {
            spec.n_historical = n;
        }
        if let Some(n) = self.n_testing {
            spec.n_testing = n;
        }
        spec.validate()?;

        let check = |ok: bool, key: &str, detail: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{key}: {detail}")))
            }
        };
        check(
            self.fill_threshold > 0.0 && self.fill_threshold <= 1.0,
            "fill_threshold",
            format!("must lie in (0, 1], got {}", self.fill_threshold),
        )?;
        check(
            self.urgency_slack_hours >= 0.0,
            "urgency_slack_hours",
            format!("must be nonnegative, got {}", self.urgency_slack_hours),
        )?;
        check(
            self.truck_capacity_lb > 0.0,
            "truck_capacity_lb",
            format!("must be positive, got {}", self.truck_capacity_lb),
        )?;
        check(
            self.horizon_hours >= 1,
            "horizon_hours",
            format!("must be at least 1, got {}", self.horizon_hours),
        )?;
        check(
            self.histogram_bin_width > 0.0,
            "histogram_bin_width",
            format!("must be positive, got {}", self.histogram_bin_width),
        )?;
        check(
            self.baseline_markup > 0.0,
            "baseline_markup",
            format!("must be positive, got {}", self.baseline_markup),
        )?;
        check(
            self.load_factor_margin >= 1.0,
            "load_factor_margin",
            format!("must be at least 1, got {}", self.load_factor_margin),
        )?;
        if let Some(tons) = self.synthesize_annual_tons {
            check(
                tons > 0.0,
                "synthesize_annual_tons",
                format!("must be positive, got {tons}"),
            )?;
        }

        let robustness = RobustnessConfig::new(
            self.confidence,
            self.weight_historical,
            self.weight_realtime,
            self.bucket_hours,
        )?;
        let demand = DemandParams {
            truck_capacity_lb: self.truck_capacity_lb,
            horizon_hours: self.horizon_hours,
            ..DemandParams::default()
        };
        let planner = PlannerConfig {
            truck_capacity_lb: self.truck_capacity_lb,
            fill_threshold: self.fill_threshold,
            urgency_slack_hours: self.urgency_slack_hours,
        };
        let params = RunParams {
            scenario: spec.clone(),
            demand,
            planner,
            robustness,
            load_factor_margin: self.load_factor_margin,
            histogram_bin_width: self.histogram_bin_width,
            baseline_markup: self.baseline_markup,
            compare_baseline: self.compare_baseline,
            jobs: self.jobs,
        };
        params.validate()?;

        // jobs is echoed as 0: worker count never changes results, so runs
        // that differ only in parallelism produce identical summaries
        let echo = RunConfig {
            scenario: ScenarioSelect::Custom(spec.clone()),
            n_historical: Some(spec.n_historical),
            n_testing: Some(spec.n_testing),
            jobs: 0,
            ..self.clone()
        };
        Ok(Resolved { echo, params })
    }
}
