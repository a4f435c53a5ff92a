//! Statistics over result tables: pooled per-tick rate summaries, empirical
//! CDFs, scenario ratios and the inverse resource-block planner.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::engine::TickResult;
use crate::linkrate::RateModel;
use crate::{Error, Result, StationId, VehicleId};

/// Percentile levels reported by [`rate_stats`].
pub const PERCENTILES: [u8; 7] = [1, 5, 25, 50, 75, 95, 99];

/// Note attached to reports: the rate guaranteed in 95 % of samples is p5.
pub const P5_NOTE: &str = "p5 is the rate met or exceeded in 95% of per-vehicle per-tick samples";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub scenario_label: String,
    pub mean_rate: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    /// Lower-step empirical percentiles keyed by level.
    pub percentiles: BTreeMap<u8, f64>,
    pub sample_count: u64,
}

impl RateStats {
    pub fn percentile(&self, p: u8) -> Option<f64> {
        self.percentiles.get(&p).copied()
    }
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
    let mut xs: Vec<f64> = values.into_iter().collect();
    if xs.is_empty() {
        return Err(Error::Validation("statistics of an empty sample".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Validation("NaN rate in sample".into()));
    }
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Smallest sample whose empirical CDF reaches `p` percent.
fn lower_step(sorted: &[f64], p: u8) -> f64 {
    let n = sorted.len() as u64;
    let rank = (u64::from(p) * n).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

pub fn rate_stats_from(
    rates: impl IntoIterator<Item = f64>,
    scenario_label: &str,
) -> Result<RateStats> {
    let xs = sorted(rates)?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(RateStats {
        scenario_label: scenario_label.to_owned(),
        mean_rate: mean,
        min_rate: xs[0],
        max_rate: xs[xs.len() - 1],
        percentiles: PERCENTILES
            .iter()
            .map(|&p| (p, lower_step(&xs, p)))
            .collect(),
        sample_count: xs.len() as u64,
    })
}

/// Which samples enter the rate statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Every per-vehicle, per-tick rate is one sample.
    #[default]
    Ticks,
    /// One sample per vehicle: its mean rate over its ticks.
    Vehicles,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ticks" => Ok(Pooling::Ticks),
            "vehicles" => Ok(Pooling::Vehicles),
            other => Err(Error::Config(format!(
                "unknown pooling {other:?} (expected ticks or vehicles)"
            ))),
        }
    }
}

/// Samples selected by `pooling`, in a deterministic order.
pub fn pooled_rates(results: &[TickResult], pooling: Pooling) -> Vec<f64> {
    match pooling {
        Pooling::Ticks => results.iter().map(|r| r.rate_bps).collect(),
        Pooling::Vehicles => {
            let mut sums: BTreeMap<&VehicleId, (f64, u64)> = BTreeMap::new();
            for r in results {
                let e = sums.entry(&r.vehicle_id).or_default();
                e.0 += r.rate_bps;
                e.1 += 1;
            }
            sums.values().map(|(sum, n)| sum / *n as f64).collect()
        }
    }
}

/// Rate statistics pooled over every per-vehicle, per-tick sample.
pub fn rate_stats(results: &[TickResult], scenario_label: &str) -> Result<RateStats> {
    rate_stats_from(results.iter().map(|r| r.rate_bps), scenario_label)
}

/// Right-continuous empirical CDF as `(rate, P[X <= rate])` at each distinct
/// rate, ascending.
pub fn cdf_from(rates: impl IntoIterator<Item = f64>) -> Result<Vec<(f64, f64)>> {
    let xs = sorted(rates)?;
    let n = xs.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let prob = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = prob,
            _ => out.push((x, prob)),
        }
    }
    Ok(out)
}

pub fn cdf(results: &[TickResult]) -> Result<Vec<(f64, f64)>> {
    cdf_from(results.iter().map(|r| r.rate_bps))
}

/// Smallest rate at which the CDF reaches `p` percent.
pub fn percentile_from_cdf(cdf: &[(f64, f64)], p: u8) -> Option<f64> {
    let level = f64::from(p) / 100.0;
    cdf.iter().find(|(_, prob)| *prob >= level).map(|(x, _)| *x)
}

/// Resource blocks needed to guarantee a rate at a given link quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbPlan {
    pub required_rate: f64,
    pub snr: f64,
    pub speed: f64,
    pub rb_needed: u64,
}

pub fn plan_rb(
    required_rate: f64,
    snr_db: f64,
    speed: f64,
    model: &impl RateModel,
) -> Result<RbPlan> {
    if !(required_rate.is_finite() && required_rate >= 0.0) {
        return Err(Error::Validation(format!(
            "required rate must be finite and non-negative, got {required_rate}"
        )));
    }
    if speed.is_nan() || speed < 0.0 {
        return Err(Error::Validation(format!(
            "speed must be non-negative, got {speed}"
        )));
    }
    let per_rb = model.rb_rate(snr_db, speed);
    let rb_needed = if required_rate == 0.0 {
        0
    } else if per_rb <= 0.0 {
        return Err(Error::Infeasible(format!(
            "link at {snr_db} dB is in outage; no number of resource blocks carries {required_rate} bit/s"
        )));
    } else {
        let mut n = (required_rate / per_rb).ceil() as u64;
        // guard against the quotient rounding below the true ratio
        while (n as f64) * per_rb < required_rate {
            n += 1;
        }
        n
    };
    Ok(RbPlan {
        required_rate,
        snr: snr_db,
        speed,
        rb_needed,
    })
}

/// A ratio that stays explicit about division by zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Finite(f64),
    /// Positive numerator over zero.
    Infinite,
    /// Zero over zero.
    Undefined,
}

impl Ratio {
    pub fn of(a: f64, b: f64) -> Self {
        if b != 0.0 {
            Ratio::Finite(a / b)
        } else if a == 0.0 {
            Ratio::Undefined
        } else {
            Ratio::Infinite
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(v) => s.serialize_f64(*v),
            Ratio::Infinite => s.serialize_str("inf"),
            Ratio::Undefined => s.serialize_str("undefined"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub numerator: String,
    pub denominator: String,
    pub mean_ratio: Ratio,
    pub percentile_ratios: BTreeMap<u8, Ratio>,
}

/// Ratios `a / b` of the means and of every shared percentile.
pub fn compare_scenarios(a: &RateStats, b: &RateStats) -> RatioReport {
    RatioReport {
        numerator: a.scenario_label.clone(),
        denominator: b.scenario_label.clone(),
        mean_ratio: Ratio::of(a.mean_rate, b.mean_rate),
        percentile_ratios: a
            .percentiles
            .iter()
            .filter_map(|(p, va)| b.percentiles.get(p).map(|vb| (*p, Ratio::of(*va, *vb))))
            .collect(),
    }
}

/// Contents of `stats.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub scenarios: Vec<RateStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<RatioReport>,
    pub note: &'static str,
}

impl StatsReport {
    /// Ratios are reported when exactly two scenarios are given.
    pub fn new(scenarios: Vec<RateStats>) -> Self {
        let ratio = match scenarios.as_slice() {
            [a, b] => Some(compare_scenarios(a, b)),
            _ => None,
        };
        StatsReport {
            scenarios,
            ratio,
            note: P5_NOTE,
        }
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::Io(e.into()))?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// `cdf.csv` with header `rate_bps,cum_prob`.
pub fn write_cdf_csv<W: Write>(cdf: &[(f64, f64)], mut out: W) -> Result<()> {
    writeln!(out, "rate_bps,cum_prob")?;
    for (rate, prob) in cdf {
        writeln!(out, "{rate},{prob}")?;
    }
    Ok(())
}

/// `cell_packages.csv` with header `station_id,mean_packages`.
pub fn write_cell_packages_csv<W: Write>(
    counts: &BTreeMap<StationId, f64>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "station_id,mean_packages")?;
    for (station, mean) in counts {
        writeln!(out, "{station},{mean}")?;
    }
    Ok(())
}
