//! Common Vehicle Information Model: proprietary signals are harmonized
//! into measurement channels, aggregated per interval into data packages
//! and queued for uplink transmission.

mod model;
mod package;
mod queue;

use std::collections::BTreeMap;

use crate::engine::TickResult;
use crate::{Error, Result, StationId, VehicleId};

pub use model::{
    harmonize, ChannelRecord, ChannelSet, MeasurementChannel, SignalDescriptor, SignalSource,
    EXTRA_CHANNEL_BASE,
};
pub use package::{
    CvimDataPackage, PackageId, PackageLayout, PackageMeta, Packager, PrivacyLevel,
    WIRE_HEADER_BYTES, WIRE_RECORD_BYTES,
};
pub use queue::{PriorityPredicate, Transmission, TransmitQueue};

use crate::mobility::TraceSample;

/// The package a vehicle produces for one tick: every configured channel
/// sampled at that tick.
pub fn generate_tick_package(
    vehicle: &VehicleId,
    state: &TraceSample,
    channels: &ChannelSet,
    packager: &Packager,
) -> Result<CvimDataPackage> {
    packager.package(vehicle, state.t, channels.sample(state)?)
}

/// A maximal run of consecutive ticks one vehicle spent attached to one cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Traversal {
    pub vehicle_id: VehicleId,
    pub station_id: StationId,
    pub first_tick: u32,
    pub ticks: u32,
    /// Sum of `packages_generated` over the run.
    pub packages: u64,
}

/// Split results into cell traversals. Results may be in any order.
pub fn traversals(results: &[TickResult]) -> Vec<Traversal> {
    let mut by_vehicle: BTreeMap<&VehicleId, Vec<&TickResult>> = BTreeMap::new();
    for r in results {
        by_vehicle.entry(&r.vehicle_id).or_default().push(r);
    }
    let mut out = Vec::new();
    for (vehicle, mut rows) in by_vehicle {
        rows.sort_by_key(|r| r.t);
        let mut current: Option<Traversal> = None;
        for r in rows {
            match &mut current {
                Some(tr)
                    if tr.station_id == r.serving_station && tr.first_tick + tr.ticks == r.t =>
                {
                    tr.ticks += 1;
                    tr.packages += r.packages_generated;
                }
                _ => {
                    out.extend(current.take());
                    current = Some(Traversal {
                        vehicle_id: vehicle.clone(),
                        station_id: r.serving_station.clone(),
                        first_tick: r.t,
                        ticks: 1,
                        packages: r.packages_generated,
                    });
                }
            }
        }
        out.extend(current);
    }
    out
}

/// Mean packages generated per vehicle traversal of each cell, one package
/// per attached tick. Cells nobody traversed are absent.
pub fn count_packages_per_cell(results: &[TickResult]) -> Result<BTreeMap<StationId, f64>> {
    let mut sums: BTreeMap<StationId, (u64, u64)> = BTreeMap::new();
    for tr in traversals(results) {
        let entry = sums.entry(tr.station_id).or_default();
        entry.0 += u64::from(tr.ticks);
        entry.1 += 1;
    }
    if sums.is_empty() {
        return Err(Error::Validation(
            "no cell traversals in the results".into(),
        ));
    }
    Ok(sums
        .into_iter()
        .map(|(station, (ticks, n))| (station, ticks as f64 / n as f64))
        .collect())
}
