//! Per-tick cell membership and Round-Robin resource-block allocation.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linkrate::RateModel;
use crate::radio::{self, BaseStation, LinkBudgetConfig};
use crate::{Error, Result, StationId, VehicleId};

/// Vehicles attached to one station during one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellTickState {
    pub station_id: StationId,
    pub t: u32,
    /// Ascending vehicle id.
    pub attached: Vec<VehicleId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Equal real-valued shares: time sharing inside the tick.
    #[default]
    Fractional,
    /// Whole resource blocks; the remainder rotates with the tick.
    Integer,
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fractional" => Ok(ScheduleMode::Fractional),
            "integer" => Ok(ScheduleMode::Integer),
            other => Err(Error::Config(format!(
                "scheduler.mode must be `fractional` or `integer`, got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbAllocation {
    pub station_id: StationId,
    pub t: u32,
    pub mode: ScheduleMode,
    /// Resource-block share per attached vehicle, in canonical order.
    pub shares: Vec<(VehicleId, f64)>,
}

impl RbAllocation {
    pub fn share_of(&self, vehicle: &VehicleId) -> Option<f64> {
        self.shares
            .binary_search_by(|(v, _)| v.cmp(vehicle))
            .ok()
            .map(|i| self.shares[i].1)
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().map(|(_, s)| s).sum()
    }
}

/// Group `(station, vehicle)` assignments into cells, ordered by station id.
pub fn group_into_cells(
    t: u32,
    assignments: impl IntoIterator<Item = (StationId, VehicleId)>,
) -> Vec<CellTickState> {
    let mut cells: BTreeMap<StationId, Vec<VehicleId>> = BTreeMap::new();
    for (station, vehicle) in assignments {
        cells.entry(station).or_default().push(vehicle);
    }
    cells
        .into_iter()
        .map(|(station_id, mut attached)| {
            attached.sort();
            CellTickState {
                station_id,
                t,
                attached,
            }
        })
        .collect()
}

/// Associate every vehicle position with its best station and partition the
/// vehicles into non-empty cells.
pub fn build_cells(
    t: u32,
    positions: &[(VehicleId, (f64, f64))],
    stations: &[BaseStation],
    cfg: &LinkBudgetConfig,
) -> Result<Vec<CellTickState>> {
    let assignments = positions
        .iter()
        .map(|(vehicle, pos)| Ok((radio::associate(*pos, stations, cfg)?, vehicle.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(group_into_cells(t, assignments))
}

/// Round-Robin split of `n_rb` resource blocks across the cell.
///
/// In integer mode every vehicle gets `n_rb / n` blocks and the `n_rb % n`
/// leftovers go to consecutive vehicles starting at `rotation_offset mod n`.
pub fn rr_allocate(
    cell: &CellTickState,
    n_rb: u32,
    mode: ScheduleMode,
    rotation_offset: u64,
) -> RbAllocation {
    let n = cell.attached.len();
    let shares = match (mode, n) {
        (_, 0) => Vec::new(),
        (ScheduleMode::Fractional, _) => {
            let share = f64::from(n_rb) / n as f64;
            cell.attached.iter().map(|v| (v.clone(), share)).collect()
        }
        (ScheduleMode::Integer, _) => {
            let base = n_rb as usize / n;
            let extra = n_rb as usize % n;
            let start = (rotation_offset % n as u64) as usize;
            cell.attached
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let lucky = (i + n - start) % n < extra;
                    (v.clone(), (base + usize::from(lucky)) as f64)
                })
                .collect()
        }
    };
    RbAllocation {
        station_id: cell.station_id.clone(),
        t: cell.t,
        mode,
        shares,
    }
}

/// Rate of a vehicle holding `share` resource blocks.
pub fn vehicle_rate(share: f64, snr_db: f64, speed: f64, model: &impl RateModel) -> f64 {
    share * model.rb_rate(snr_db, speed)
}
