//! The per-second simulation loop.
//!
//! Each tick: associate every present vehicle with its best-SNR station,
//! partition vehicles into cells, split each cell's resource blocks
//! Round-Robin (rotation offset = tick), convert shares to rates, generate
//! the tick's CVIM package and drain the vehicle's transmit queue.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::cvim::{ChannelRecord, TransmitQueue};
use crate::mobility::{TraceSample, VehicleTrace};
use crate::radio::{self, BaseStation};
use crate::scheduler::{self, group_into_cells, rr_allocate};
use crate::{Error, Result, StationId, VehicleId};

pub use io::{read_results_csv, write_results_csv, write_summary_json, RESULTS_HEADER};

/// Seconds per tick.
pub const TICK: f64 = 1.0;

/// What one vehicle experienced during one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickResult {
    pub t: u32,
    pub vehicle_id: VehicleId,
    pub serving_station: StationId,
    pub snr_db: f64,
    pub rb_share: f64,
    pub rate_bps: f64,
    pub packages_generated: u64,
    pub bits_sent: u64,
    /// Backlog after this tick's transmission.
    pub queue_bytes: u64,
}

/// Packages still queued when a vehicle left the simulation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Undelivered {
    pub vehicle_id: VehicleId,
    pub packages: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_label: String,
    pub seed: u64,
    pub n_rb: u32,
    pub first_tick: Option<u32>,
    pub last_tick: Option<u32>,
    pub vehicles: u64,
    pub vehicle_ticks: u64,
    pub packages_generated: u64,
    pub packages_sent: u64,
    pub bits_sent: u64,
    pub mean_rate_bps: Option<f64>,
    pub undelivered_packages: u64,
    pub undelivered_bytes: u64,
    /// Vehicles that left with a non-empty queue.
    pub undelivered: Vec<Undelivered>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRun {
    /// Ordered by `(t, vehicle_id)`.
    pub results: Vec<TickResult>,
    pub summary: RunSummary,
}

struct VehicleComm {
    queue: TransmitQueue,
    window: Vec<ChannelRecord>,
    window_start: u32,
    last_tick: u32,
}

/// Run the communication model over the given trajectories.
pub fn run(
    config: &SimConfig,
    traces: &[VehicleTrace],
    stations: &[BaseStation],
) -> Result<SimulationRun> {
    config.validate()?;
    if stations.is_empty() {
        return Err(Error::Config("no base stations configured".into()));
    }
    for s in stations {
        radio::path_loss_b1(radio::MIN_DISTANCE, &config.radio, s.height)
            .map_err(|e| Error::Config(format!("station {}: {e}", s.station_id)))?;
    }

    let mut traces: Vec<&VehicleTrace> =
        traces.iter().filter(|tr| !tr.samples.is_empty()).collect();
    traces.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
    if let Some(w) = traces
        .windows(2)
        .find(|w| w[0].vehicle_id == w[1].vehicle_id)
    {
        return Err(Error::Validation(format!(
            "vehicle {} has two traces",
            w[0].vehicle_id
        )));
    }
    for tr in &traces {
        if tr.samples.windows(2).any(|w| w[1].t != w[0].t + 1) {
            return Err(Error::Validation(format!(
                "vehicle {}: trace is not 1 Hz",
                tr.vehicle_id
            )));
        }
    }

    let n_rb = config.cell.effective_rb();
    let k = u32::from(config.cvim.aggregate_ticks);
    let channels = config.cvim.channel_set()?;
    let packager = config.cvim.packager();
    let priority = config.cvim.priority();

    let first_tick = traces.iter().filter_map(|tr| tr.first_tick()).min();
    let last_tick = traces
        .iter()
        .filter_map(|tr| tr.samples.last().map(|s| s.t))
        .max();

    let mut results = Vec::new();
    let mut comms: BTreeMap<VehicleId, VehicleComm> = BTreeMap::new();
    let mut summary = RunSummary {
        scenario_label: config.scenario_label.clone(),
        seed: config.road.seed,
        n_rb,
        first_tick,
        last_tick,
        vehicles: traces.len() as u64,
        vehicle_ticks: 0,
        packages_generated: 0,
        packages_sent: 0,
        bits_sent: 0,
        mean_rate_bps: None,
        undelivered_packages: 0,
        undelivered_bytes: 0,
        undelivered: Vec::new(),
    };
    let mut rate_sum = 0.0;

    let (Some(first), Some(last)) = (first_tick, last_tick) else {
        return Ok(SimulationRun { results, summary });
    };
    for t in first..=last {
        let present: Vec<(&VehicleTrace, &TraceSample)> = traces
            .iter()
            .filter_map(|tr| tr.at(t).map(|s| (*tr, s)))
            .collect();

        let links = present
            .iter()
            .map(|(tr, s)| {
                radio::best_station((s.x, s.y), stations, &config.radio).map_err(|e| {
                    Error::AtTick {
                        t,
                        vehicle: tr.vehicle_id.to_string(),
                        source: Box::new(e),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let cells = group_into_cells(
            t,
            present.iter().zip(&links).map(|((tr, _), (idx, _))| {
                (stations[*idx].station_id.clone(), tr.vehicle_id.clone())
            }),
        );
        let mut shares: BTreeMap<&VehicleId, f64> = BTreeMap::new();
        let allocations: Vec<_> = cells
            .iter()
            .map(|cell| rr_allocate(cell, n_rb, config.scheduler, u64::from(t)))
            .collect();
        for alloc in &allocations {
            for (vehicle, share) in &alloc.shares {
                shares.insert(vehicle, *share);
            }
        }

        for ((trace, sample), (idx, link)) in present.iter().zip(&links) {
            let vehicle = &trace.vehicle_id;
            let share = shares[vehicle];
            let rate = scheduler::vehicle_rate(share, link.snr, sample.speed, &config.linkrate);

            let comm = comms.entry(vehicle.clone()).or_insert_with(|| VehicleComm {
                queue: TransmitQueue::new(vehicle.clone(), priority.clone()),
                window: Vec::new(),
                window_start: t - t % k,
                last_tick: trace.samples.last().expect("non-empty trace").t,
            });
            let context = |e: Error| Error::AtTick {
                t,
                vehicle: vehicle.to_string(),
                source: Box::new(e),
            };

            if comm.window.is_empty() {
                comm.window_start = t - t % k;
            }
            comm.window
                .extend(channels.sample(sample).map_err(context)?);
            let mut generated = 0;
            if t % k == k - 1 || t == comm.last_tick {
                let records = std::mem::take(&mut comm.window);
                let package = packager
                    .package_span(vehicle, comm.window_start, k as u8, records)
                    .map_err(context)?;
                comm.queue.push(package);
                generated = 1;
            }

            let capacity_bits = (rate * TICK).floor() as u64;
            let tx = comm.queue.try_transmit(capacity_bits);

            summary.vehicle_ticks += 1;
            summary.packages_generated += generated;
            summary.packages_sent += tx.sent.len() as u64;
            summary.bits_sent += tx.sent_bits;
            rate_sum += rate;

            results.push(TickResult {
                t,
                vehicle_id: vehicle.clone(),
                serving_station: stations[*idx].station_id.clone(),
                snr_db: link.snr,
                rb_share: share,
                rate_bps: rate,
                packages_generated: generated,
                bits_sent: tx.sent_bits,
                queue_bytes: comm.queue.queued_bytes(),
            });
        }

        let departed: Vec<VehicleId> = comms
            .iter()
            .filter(|(_, c)| c.last_tick == t)
            .map(|(v, _)| v.clone())
            .collect();
        for vehicle in departed {
            let comm = comms.remove(&vehicle).expect("listed above");
            if !comm.queue.is_empty() {
                summary.undelivered_packages += comm.queue.len() as u64;
                summary.undelivered_bytes += comm.queue.queued_bytes();
                summary.undelivered.push(Undelivered {
                    vehicle_id: vehicle,
                    packages: comm.queue.len() as u64,
                    bytes: comm.queue.queued_bytes(),
                });
            }
        }
    }

    if summary.vehicle_ticks > 0 {
        summary.mean_rate_bps = Some(rate_sum / summary.vehicle_ticks as f64);
    }
    Ok(SimulationRun { results, summary })
}

/// `(t, snr_db, rate_bps)` of one vehicle in tick order.
pub fn vehicle_timeseries(
    results: &[TickResult],
    vehicle: &VehicleId,
) -> Result<Vec<(u32, f64, f64)>> {
    let mut rows: Vec<(u32, f64, f64)> = results
        .iter()
        .filter(|r| &r.vehicle_id == vehicle)
        .map(|r| (r.t, r.snr_db, r.rate_bps))
        .collect();
    if rows.is_empty() {
        return Err(Error::Lookup(format!(
            "vehicle {vehicle} not found in results"
        )));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows)
}
