//! Uplink link budget: Winner-II B1 (LOS) path loss, SNR and best-SNR cell
//! association.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, StationId, VehicleId};

const SPEED_OF_LIGHT: f64 = 3.0e8;
/// Distances below this are evaluated at this value.
pub const MIN_DISTANCE: f64 = 10.0;
pub const DEFAULT_BS_GAIN: f64 = 15.0;
pub const DEFAULT_BS_HEIGHT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub station_id: StationId,
    pub x: f64,
    pub y: f64,
    /// dBi
    pub antenna_gain: f64,
    /// Antenna height in meters, must exceed 1 m.
    pub height: f64,
}

impl BaseStation {
    pub fn new(id: impl Into<StationId>, x: f64, y: f64) -> Self {
        BaseStation {
            station_id: id.into(),
            x,
            y,
            antenna_gain: DEFAULT_BS_GAIN,
            height: DEFAULT_BS_HEIGHT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetConfig {
    pub carrier_freq_ghz: f64,
    pub tx_power_dbm: f64,
    pub ue_gain_dbi: f64,
    pub ue_height_m: f64,
    pub noise_figure_db: f64,
    pub noise_power_dbm: f64,
    /// Additional loss applied to every link (shadowing hook), dB.
    pub extra_loss_db: f64,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        LinkBudgetConfig {
            carrier_freq_ghz: 1.8,
            tx_power_dbm: 23.0,
            ue_gain_dbi: 1.0,
            ue_height_m: 1.5,
            noise_figure_db: 6.0,
            noise_power_dbm: -100.0,
            extra_loss_db: 0.0,
        }
    }
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_ghz.is_finite() && self.carrier_freq_ghz > 0.0) {
            return Err(Error::Config(format!(
                "radio.carrier_freq_ghz must be positive, got {}",
                self.carrier_freq_ghz
            )));
        }
        check_height("radio.ue_height_m", self.ue_height_m)
    }

    /// SNR + path loss for a station with the given antenna gain.
    pub fn budget_db(&self, bs_gain_dbi: f64) -> f64 {
        self.tx_power_dbm + self.ue_gain_dbi + bs_gain_dbi
            - (self.noise_power_dbm + self.noise_figure_db)
            - self.extra_loss_db
    }
}

fn check_height(name: &str, height: f64) -> Result<()> {
    if height.is_finite() && height > 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must exceed 1 m, got {height}"
        )))
    }
}

/// Distance at which the LOS path loss switches to the steeper slope.
pub fn breakpoint_distance(cfg: &LinkBudgetConfig, bs_height: f64) -> f64 {
    4.0 * (bs_height - 1.0) * (cfg.ue_height_m - 1.0) * cfg.carrier_freq_ghz * 1e9 / SPEED_OF_LIGHT
}

/// Winner-II B1 LOS path loss in dB. Distances below 10 m are clamped.
pub fn path_loss_b1(distance: f64, cfg: &LinkBudgetConfig, bs_height: f64) -> Result<f64> {
    check_height("station height", bs_height)?;
    check_height("radio.ue_height_m", cfg.ue_height_m)?;
    let d = distance.max(MIN_DISTANCE);
    let f_ghz = cfg.carrier_freq_ghz;
    let h_bs = bs_height - 1.0;
    let h_ue = cfg.ue_height_m - 1.0;
    let loss = if d <= breakpoint_distance(cfg, bs_height) {
        22.7 * d.log10() + 41.0 + 20.0 * (f_ghz / 5.0).log10()
    } else {
        40.0 * d.log10() + 9.45 - 17.3 * h_bs.log10() - 17.3 * h_ue.log10()
            + 2.7 * (f_ghz / 5.0).log10()
    };
    Ok(loss)
}

/// Geometry and budget of one vehicle-to-station link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub distance: f64,
    pub path_loss: f64,
    pub snr: f64,
}

/// Link from a vehicle at `pos` to `station`.
pub fn snr(pos: (f64, f64), station: &BaseStation, cfg: &LinkBudgetConfig) -> Result<Link> {
    let distance = (pos.0 - station.x).hypot(pos.1 - station.y);
    let path_loss = path_loss_b1(distance, cfg, station.height)?;
    Ok(Link {
        distance,
        path_loss,
        snr: cfg.budget_db(station.antenna_gain) - path_loss,
    })
}

/// Per-vehicle, per-tick link record toward the serving station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrSample {
    pub vehicle_id: VehicleId,
    pub t: u32,
    pub serving_station: StationId,
    pub distance: f64,
    pub path_loss: f64,
    pub snr: f64,
}

/// Index of the best-SNR station and its link. Equal SNRs resolve to the
/// smallest station id, independent of collection order.
pub fn best_station(
    pos: (f64, f64),
    stations: &[BaseStation],
    cfg: &LinkBudgetConfig,
) -> Result<(usize, Link)> {
    let mut best: Option<(usize, Link)> = None;
    for (i, station) in stations.iter().enumerate() {
        let link = snr(pos, station, cfg)?;
        let better = match &best {
            None => true,
            Some((j, current)) => match link.snr.total_cmp(&current.snr) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => station.station_id < stations[*j].station_id,
                std::cmp::Ordering::Less => false,
            },
        };
        if better {
            best = Some((i, link));
        }
    }
    best.ok_or_else(|| Error::Config("no base stations configured".into()))
}

/// Serving station for a vehicle at `pos`.
pub fn associate(
    pos: (f64, f64),
    stations: &[BaseStation],
    cfg: &LinkBudgetConfig,
) -> Result<StationId> {
    best_station(pos, stations, cfg).map(|(i, _)| stations[i].station_id.clone())
}

/// Read `station_id,x,y[,antenna_gain][,height]`. Missing or empty gain and
/// height fields take the defaults.
pub fn parse_station_csv<R: Read>(input: R) -> Result<Vec<BaseStation>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let expected = ["station_id", "x", "y", "antenna_gain", "height"];
    if header.len() < 3 || header.len() > 5 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::parse(
            "line 1",
            "expected header `station_id,x,y[,antenna_gain[,height]]`",
        ));
    }

    let mut stations: Vec<BaseStation> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let location = format!("line {}", record.position().map_or(0, |p| p.line()));
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let number = |i: usize| -> Result<Option<f64>> {
            match field(i) {
                "" => Ok(None),
                raw => raw.parse().map(Some).map_err(|_| {
                    Error::parse(
                        &location,
                        format!("{} is not a number: {raw:?}", expected[i]),
                    )
                }),
            }
        };
        if field(0).is_empty() {
            return Err(Error::parse(&location, "empty station_id"));
        }
        let x = number(1)?.ok_or_else(|| Error::parse(&location, "missing x"))?;
        let y = number(2)?.ok_or_else(|| Error::parse(&location, "missing y"))?;
        let station = BaseStation {
            station_id: StationId::new(field(0)),
            x,
            y,
            antenna_gain: number(3)?.unwrap_or(DEFAULT_BS_GAIN),
            height: number(4)?.unwrap_or(DEFAULT_BS_HEIGHT),
        };
        check_height(&format!("{location}: height"), station.height)?;
        if stations.iter().any(|s| s.station_id == station.station_id) {
            return Err(Error::Validation(format!(
                "{location}: duplicate station {}",
                station.station_id
            )));
        }
        stations.push(station);
    }
    Ok(stations)
}
