//! The two quoting-side agents.
//!
//! The first prices an incoming request from the pooled per-pound costs of
//! similar past requests: weighted mean, weighted variance, and the standard
//! error of the weighted mean over the effective sample size, then
//! `price = mean + z * SE` for a one-sided robustness target. The second
//! records the realized cost after fulfillment, logs the deviation, and
//! grows the real-time pool that future quotes draw on.
//!
//! Costs are pooled per pound and the quote rescales by the request's
//! weight, so observations from requests of different sizes stay
//! comparable.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demand::ShipmentRequest;
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Historical,
    Realtime,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Historical => "historical",
            Provenance::Realtime => "realtime",
        }
    }
}

/// One realized per-pound cost with its confidence weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostObservation {
    pub cost_per_lb: f64,
    pub weight: f64,
    pub provenance: Provenance,
}

/// Similarity key: exact origin and destination, plus the request's window
/// duration bucketed to `bucket_hours`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub origin: String,
    pub destination: String,
    pub window_bucket: u32,
}

pub fn group_key(req: &ShipmentRequest, bucket_hours: f64) -> GroupKey {
    GroupKey {
        origin: req.origin.clone(),
        destination: req.destination.clone(),
        window_bucket: (req.window_hours() / bucket_hours).floor() as u32,
    }
}

/// A keyed store of cost observations. Groups iterate in key order and
/// observations in insertion order, so persisted pools are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationPool {
    groups: BTreeMap<GroupKey, Vec<CostObservation>>,
}

impl ObservationPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: GroupKey, obs: CostObservation) {
        self.groups.entry(key).or_default().push(obs);
    }

    pub fn group(&self, key: &GroupKey) -> &[CostObservation] {
        self.groups.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn groups(&self) -> impl Iterator<Item = (&GroupKey, &[CostObservation])> {
        self.groups.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn observation_count(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Unweighted mean per-pound cost over every observation; None if empty.
    pub fn global_mean_cost(&self) -> Option<f64> {
        let n = self.observation_count();
        if n == 0 {
            return None;
        }
        let sum: f64 = self
            .groups
            .values()
            .flat_map(|v| v.iter().map(|o| o.cost_per_lb))
            .sum();
        Some(sum / n as f64)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("origin,destination,window_bucket,per_pound_cost,weight,provenance\n");
        for (key, observations) in &self.groups {
            for obs in observations {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    key.origin,
                    key.destination,
                    key.window_bucket,
                    obs.cost_per_lb,
                    obs.weight,
                    obs.provenance.as_str()
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<ObservationPool> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, path)
    }

    fn from_reader<R: Read>(reader: R, path: &Path) -> Result<ObservationPool> {
        let row_err = |row: usize, message: String| Error::CsvRow {
            path: path.to_path_buf(),
            row,
            message,
        };
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut pool = ObservationPool::new();
        for (i, record) in csv_reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| row_err(row, e.to_string()))?;
            if record.len() != 6 {
                return Err(row_err(row, format!("expected 6 fields, got {}", record.len())));
            }
            let parse_f64 = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|e| row_err(row, format!("bad number {s:?}: {e}")))
            };
            let provenance = match &record[5] {
                "historical" => Provenance::Historical,
                "realtime" => Provenance::Realtime,
                other => return Err(row_err(row, format!("bad provenance {other:?}"))),
            };
            pool.push(
                GroupKey {
                    origin: record[0].to_string(),
                    destination: record[1].to_string(),
                    window_bucket: record[2]
                        .parse()
                        .map_err(|e| row_err(row, format!("bad bucket {:?}: {e}", &record[2])))?,
                },
                CostObservation {
                    cost_per_lb: parse_f64(&record[3])?,
                    weight: parse_f64(&record[4])?,
                    provenance,
                },
            );
        }
        Ok(pool)
    }
}

// ---- weighted statistics ----

pub fn weighted_mean(observations: &[CostObservation]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyGroup);
    }
    debug_assert!(observations.iter().all(|o| o.weight > 0.0));
    let (num, den) = observations
        .iter()
        .fold((0.0, 0.0), |(n, d), o| (n + o.weight * o.cost_per_lb, d + o.weight));
    Ok(num / den)
}

/// Weighted population variance around `mean` (no Bessel correction).
pub fn weighted_variance(observations: &[CostObservation], mean: f64) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (num, den) = observations.iter().fold((0.0, 0.0), |(n, d), o| {
        let diff = o.cost_per_lb - mean;
        (n + o.weight * diff * diff, d + o.weight)
    });
    Ok(num / den)
}

/// (sum w)^2 / sum(w^2): the equivalent count of equally weighted samples.
pub fn effective_sample_size(observations: &[CostObservation]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (sum, sum_sq) = observations
        .iter()
        .fold((0.0, 0.0), |(s, q), o| (s + o.weight, q + o.weight * o.weight));
    Ok(sum * sum / sum_sq)
}

pub fn standard_error(variance: f64, effective_n: f64) -> f64 {
    (variance / effective_n).sqrt()
}

/// One-sided standard normal quantile. Rational approximation (Acklam);
/// absolute error well below 1e-6 everywhere in (0, 1).
pub fn z_from_confidence(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfidence(confidence));
    }
    Ok(norm_ppf(confidence))
}

fn norm_ppf(q: f64) -> f64 {
    const A1: f64 = -39.6968302866538;
    const A2: f64 = 220.946098424521;
    const A3: f64 = -275.928510446969;
    const A4: f64 = 138.357751867269;
    const A5: f64 = -30.6647980661472;
    const A6: f64 = 2.50662827745924;

    const B1: f64 = -54.4760987982241;
    const B2: f64 = 161.585836858041;
    const B3: f64 = -155.698979859887;
    const B4: f64 = 66.8013118877197;
    const B5: f64 = -13.2806815528857;

    const C1: f64 = -7.78489400243029E-03;
    const C2: f64 = -0.322396458041136;
    const C3: f64 = -2.40075827716184;
    const C4: f64 = -2.54973253934373;
    const C5: f64 = 4.37466414146497;
    const C6: f64 = 2.93816398269878;

    const D1: f64 = 7.78469570904146E-03;
    const D2: f64 = 0.32246712907004;
    const D3: f64 = 2.445134137143;
    const D4: f64 = 3.75440866190742;

    // lower tail
    if q < 0.02425 {
        let q = (-2.0 * q.ln()).sqrt();
        return (((((C1 * q + C2) * q + C3) * q + C4) * q + C5) * q + C6)
            / ((((D1 * q + D2) * q + D3) * q + D4) * q + 1.0);
    }

    // central region
    if q < 0.97575 {
        let q = q - 0.5;
        let r = q * q;
        return (((((A1 * r + A2) * r + A3) * r + A4) * r + A5) * r + A6) * q
            / (((((B1 * r + B2) * r + B3) * r + B4) * r + B5) * r + 1.0);
    }

    // upper tail
    let q = (-2.0 * (1.0 - q).ln()).sqrt();
    -(((((C1 * q + C2) * q + C3) * q + C4) * q + C5) * q + C6)
        / ((((D1 * q + D2) * q + D3) * q + D4) * q + 1.0)
}

// ---- quoting ----

/// Robustness target and grouping/weighting knobs shared by a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub confidence: f64,
    /// One-sided normal quantile of `confidence`.
    pub z: f64,
    pub weight_historical: f64,
    pub weight_realtime: f64,
    pub bucket_hours: f64,
}

impl RobustnessConfig {
    pub fn new(
        confidence: f64,
        weight_historical: f64,
        weight_realtime: f64,
        bucket_hours: f64,
    ) -> Result<RobustnessConfig> {
        if weight_historical <= 0.0 || weight_realtime <= 0.0 {
            return Err(Error::InvalidConfig(
                "confidence weights must be positive".to_string(),
            ));
        }
        if bucket_hours <= 0.0 {
            return Err(Error::InvalidConfig(
                "bucket_hours must be positive".to_string(),
            ));
        }
        Ok(RobustnessConfig {
            confidence,
            z: z_from_confidence(confidence)?,
            weight_historical,
            weight_realtime,
            bucket_hours,
        })
    }
}

impl Default for RobustnessConfig {
    /// 90% robustness target; real-time outcomes count double so quotes
    /// lean toward the current network's conditions. Windows bucket to the
    /// hour, matching the hourly planning cadence; coarser buckets pool so
    /// many observations that the standard-error margin collapses.
    fn default() -> Self {
        RobustnessConfig::new(0.9, 1.0, 2.0, 1.0).expect("default config is valid")
    }
}

/// Expected rates for quoting a request whose group has no observations
/// yet. `load_factor_margin` covers the poor fill a lone request implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackRates {
    pub per_truck_mile: f64,
    pub per_pound_transload: f64,
    pub truck_capacity_lb: f64,
    pub load_factor_margin: f64,
}

/// A robust price estimate and the statistics behind it. On a cold start
/// (`fallback_used`) the mean is the engineered estimate, the variance is
/// zero, and `effective_n` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub request_id: String,
    pub group_key: GroupKey,
    pub weight_lb: f64,
    pub weighted_mean: f64,
    pub weighted_variance: f64,
    pub effective_n: f64,
    pub standard_error: f64,
    pub z: f64,
    pub price_per_lb: f64,
    pub total_price: f64,
    pub fallback_used: bool,
}

/// Per-pound cost guess from first principles: full-truck mileage cost
/// spread over capacity, inflated by the load-factor margin, plus one
/// transload fee per intermediate hub on the shortest-distance route.
pub fn fallback_estimate(req: &ShipmentRequest, net: &Network, rates: &FallbackRates) -> Result<f64> {
    let origin = net.hub_index(&req.origin)?;
    let destination = net.hub_index(&req.destination)?;
    let path = net.dist_path(origin, destination);
    let intermediates = path.hubs.len().saturating_sub(2) as f64;
    Ok(
        (path.miles * rates.per_truck_mile / rates.truck_capacity_lb) * rates.load_factor_margin
            + rates.per_pound_transload * intermediates,
    )
}

/// Price a request from the union of its historical and real-time groups.
pub fn quote(
    req: &ShipmentRequest,
    historical: &ObservationPool,
    realtime: &ObservationPool,
    cfg: &RobustnessConfig,
    net: &Network,
    fallback: &FallbackRates,
) -> Result<Quote> {
    let key = group_key(req, cfg.bucket_hours);
    let merged: Vec<CostObservation> = historical
        .group(&key)
        .iter()
        .chain(realtime.group(&key))
        .copied()
        .collect();

    if merged.is_empty() {
        let price_per_lb = fallback_estimate(req, net, fallback)?;
        return Ok(Quote {
            request_id: req.id.clone(),
            group_key: key,
            weight_lb: req.weight_lb,
            weighted_mean: price_per_lb,
            weighted_variance: 0.0,
            effective_n: 0.0,
            standard_error: 0.0,
            z: cfg.z,
            price_per_lb,
            total_price: price_per_lb * req.weight_lb,
            fallback_used: true,
        });
    }

    let mean = weighted_mean(&merged)?;
    let variance = weighted_variance(&merged, mean)?;
    let effective_n = effective_sample_size(&merged)?;
    let se = standard_error(variance, effective_n);
    let price_per_lb = mean + cfg.z * se;
    Ok(Quote {
        request_id: req.id.clone(),
        group_key: key,
        weight_lb: req.weight_lb,
        weighted_mean: mean,
        weighted_variance: variance,
        effective_n,
        standard_error: se,
        z: cfg.z,
        price_per_lb,
        total_price: price_per_lb * req.weight_lb,
        fallback_used: false,
    })
}

/// The quoted price, the realized cost, and their absolute deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub request_id: String,
    pub quoted_total: f64,
    pub realized_cost: f64,
    pub deviation: f64,
    pub realized_cost_per_lb: f64,
}

/// Log a fulfilled request: compute the deviation and append the realized
/// per-pound cost to its group in the real-time pool.
pub fn record_outcome(
    quote: &Quote,
    realized_cost: f64,
    cfg: &RobustnessConfig,
    realtime: &mut ObservationPool,
) -> OutcomeRecord {
    let realized_cost_per_lb = realized_cost / quote.weight_lb;
    realtime.push(
        quote.group_key.clone(),
        CostObservation {
            cost_per_lb: realized_cost_per_lb,
            weight: cfg.weight_realtime,
            provenance: Provenance::Realtime,
        },
    );
    OutcomeRecord {
        request_id: quote.request_id.clone(),
        quoted_total: quote.total_price,
        realized_cost,
        deviation: (quote.total_price - realized_cost).abs(),
        realized_cost_per_lb,
    }
}
