//! Vehicle mobility at a 1 Hz tick.
//!
//! Trajectories either come from external trace files ([`parse_trace_csv`],
//! [`parse_fcd_xml`]) or are generated by a single-lane Krauss
//! car-following model ([`generate_traces`]).

mod generator;
mod krauss;
mod trace_io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, VehicleId};

pub use generator::generate_traces;
pub use krauss::krauss_step;
pub use trace_io::{emit_trace_csv, parse_fcd_xml, parse_trace_csv, TRACE_CSV_HEADER};

/// One kinematic sample of a vehicle at an integer tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: u32,
    /// Planar position in meters.
    pub x: f64,
    pub y: f64,
    /// m/s, never negative.
    pub speed: f64,
}

/// All samples of one vehicle, strictly increasing in `t` with step 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub vehicle_id: VehicleId,
    pub samples: Vec<TraceSample>,
}

impl VehicleTrace {
    pub fn first_tick(&self) -> Option<u32> {
        self.samples.first().map(|s| s.t)
    }

    /// Sample at tick `t`, if the vehicle is present then.
    pub fn at(&self, t: u32) -> Option<&TraceSample> {
        let first = self.first_tick()?;
        let idx = t.checked_sub(first)? as usize;
        self.samples.get(idx)
    }
}

/// Krauss car-following parameters. Defaults are the mobility settings of
/// the reference free-flow and traffic-jam scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KraussParams {
    /// Maximum acceleration, m/s².
    pub a_max: f64,
    /// Maximum (comfortable) deceleration, m/s².
    pub b_max: f64,
    /// Maximum speed, m/s.
    pub v_max: f64,
    /// Driver imperfection in [0, 1].
    pub sigma: f64,
    /// Reaction time, s.
    pub tau: f64,
    /// Minimum standstill gap, m.
    pub min_gap: f64,
    pub veh_length: f64,
    /// Standard deviation of the per-vehicle desired speed factor.
    pub speed_dev: f64,
}

impl Default for KraussParams {
    fn default() -> Self {
        KraussParams {
            a_max: 1.5,
            b_max: 4.5,
            v_max: 130.0 / 3.6,
            sigma: 0.5,
            tau: 1.0,
            min_gap: 2.5,
            veh_length: 5.0,
            speed_dev: 0.1,
        }
    }
}

impl KraussParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_max", self.a_max),
            ("b_max", self.b_max),
            ("v_max", self.v_max),
            ("tau", self.tau),
            ("min_gap", self.min_gap),
            ("veh_length", self.veh_length),
            ("speed_dev", self.speed_dev),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "krauss.{name} must be positive, got {value}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config(format!(
                "krauss.sigma must lie in [0, 1], got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Open road along the x axis, vehicles enter at x = 0 and leave at x = length.
    Strip,
    /// Closed loop laid out as a circle of circumference `length`.
    Ring,
}

/// Synthetic road and demand description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub topology: Topology,
    /// Meters.
    pub length: f64,
    /// Vehicles per hour for a strip, vehicle count for a ring.
    pub inflow: f64,
    /// Number of simulated ticks (seconds).
    pub duration: u32,
    pub seed: u64,
}

impl RoadSpec {
    pub const FREE_FLOW_INFLOW: f64 = 1000.0;
    pub const TRAFFIC_JAM_INFLOW: f64 = 4000.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Config(format!(
                "road.length must be positive, got {}",
                self.length
            )));
        }
        if !(self.inflow.is_finite() && self.inflow > 0.0) {
            return Err(Error::Config(format!(
                "road.inflow must be positive, got {}",
                self.inflow
            )));
        }
        if self.topology == Topology::Ring && self.inflow.fract() != 0.0 {
            return Err(Error::Config(format!(
                "road.inflow is a vehicle count on a ring, got {}",
                self.inflow
            )));
        }
        Ok(())
    }
}

impl Default for RoadSpec {
    fn default() -> Self {
        RoadSpec {
            topology: Topology::Strip,
            length: 10_000.0,
            inflow: Self::FREE_FLOW_INFLOW,
            duration: 600,
            seed: 1,
        }
    }
}

/// Generator-internal state of one vehicle along the road axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleKinematicState {
    pub vehicle_id: VehicleId,
    /// Front bumper position along the road axis, m.
    pub position: f64,
    pub speed: f64,
    pub desired_speed_factor: f64,
}

/// Histogram of all sample speeds as `(bin lower edge, probability)` pairs
/// in ascending edge order.
pub fn speed_distribution(traces: &[VehicleTrace], bin_width: f64) -> Result<Vec<(f64, f64)>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Config(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut total = 0u64;
    for sample in traces.iter().flat_map(|tr| &tr.samples) {
        let bin = (sample.speed / bin_width).floor() as u64;
        *counts.entry(bin).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Validation(
            "speed distribution of an empty trace set".into(),
        ));
    }
    Ok(counts
        .into_iter()
        .map(|(bin, n)| (bin as f64 * bin_width, n as f64 / total as f64))
        .collect())
}

/// Mean over all samples of all traces; `None` for an empty set.
pub fn mean_speed(traces: &[VehicleTrace]) -> Option<f64> {
    let (sum, n) = traces
        .iter()
        .flat_map(|tr| &tr.samples)
        .fold((0.0, 0usize), |(s, n), x| (s + x.speed, n + 1));
    (n > 0).then(|| sum / n as f64)
}
