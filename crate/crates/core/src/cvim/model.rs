use serde::{Deserialize, Serialize};

use crate::mobility::TraceSample;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalSource {
    Can,
    Obd,
    Other,
}

/// A proprietary, manufacturer-specific in-vehicle signal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignalDescriptor {
    pub signal_id: String,
    pub source: SignalSource,
    pub raw_unit: String,
    /// Manufacturer-identifying tag; never leaves the vehicle.
    pub brand_tag: String,
}

/// Brand-independent channel with a linear map from raw signal units into
/// its SI unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementChannel {
    pub channel_id: u16,
    pub name: String,
    pub si_unit: String,
    pub scale: f64,
    pub offset: f64,
    /// Hz
    pub sample_rate: f64,
}

impl MeasurementChannel {
    pub fn new(
        channel_id: u16,
        name: &str,
        si_unit: &str,
        scale: f64,
        offset: f64,
    ) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::Validation(format!(
                "channel {name}: scale must be finite and non-zero, offset finite"
            )));
        }
        Ok(MeasurementChannel {
            channel_id,
            name: name.to_owned(),
            si_unit: si_unit.to_owned(),
            scale,
            offset,
            sample_rate: 1.0,
        })
    }
}

/// One harmonized datum: a channel value at an absolute time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub channel_id: u16,
    /// Seconds since simulation start.
    pub t: f64,
    /// Value in the channel's SI unit.
    pub value: f64,
}

/// Map a raw proprietary reading onto the channel's SI scale.
pub fn harmonize(raw_value: f64, channel: &MeasurementChannel) -> Result<f64> {
    if !raw_value.is_finite() {
        return Err(Error::Validation(format!(
            "non-finite raw value for channel {}",
            channel.name
        )));
    }
    let value = raw_value * channel.scale + channel.offset;
    if !value.is_finite() {
        return Err(Error::Validation(format!(
            "channel {} overflowed",
            channel.name
        )));
    }
    Ok(value)
}

/// How a proprietary signal is read from the simulated vehicle state.
#[derive(Clone, Copy, Debug, PartialEq)]
enum RawReading {
    /// x position in centimeters
    PositionXCm,
    PositionYCm,
    /// speed in 0.01 km/h
    SpeedCentiKmh,
    /// deterministic synthetic sensor, 10-bit counter in 0.1 units
    Synthetic(u16),
}

impl RawReading {
    fn read(self, sample: &TraceSample) -> f64 {
        match self {
            RawReading::PositionXCm => sample.x * 100.0,
            RawReading::PositionYCm => sample.y * 100.0,
            RawReading::SpeedCentiKmh => sample.speed * 360.0,
            RawReading::Synthetic(i) => {
                let i = u64::from(i);
                ((u64::from(sample.t) * (i + 1) * 37 + i * 11) % 1024) as f64
            }
        }
    }
}

/// First channel id used for synthetic extra channels.
pub const EXTRA_CHANNEL_BASE: u16 = 100;

/// The signal → channel mappings a vehicle reports every tick.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    entries: Vec<(SignalDescriptor, MeasurementChannel, RawReading)>,
}

impl ChannelSet {
    /// Position x/y and speed, plus `n_extra` synthetic sensor channels.
    pub fn standard(n_extra: u16, brand_tag: &str) -> Result<Self> {
        if brand_tag.is_empty() {
            return Err(Error::Config("brand tag must be non-empty".into()));
        }
        if n_extra > u16::MAX - EXTRA_CHANNEL_BASE {
            return Err(Error::Config(format!("too many extra channels: {n_extra}")));
        }
        let signal = |id: &str, source, unit: &str| SignalDescriptor {
            signal_id: id.to_owned(),
            source,
            raw_unit: unit.to_owned(),
            brand_tag: brand_tag.to_owned(),
        };
        let mut entries = vec![
            (
                signal("GPS_E_CM", SignalSource::Can, "cm"),
                MeasurementChannel::new(1, "position_x", "m", 0.01, 0.0)?,
                RawReading::PositionXCm,
            ),
            (
                signal("GPS_N_CM", SignalSource::Can, "cm"),
                MeasurementChannel::new(2, "position_y", "m", 0.01, 0.0)?,
                RawReading::PositionYCm,
            ),
            (
                signal("VEH_SPD", SignalSource::Obd, "0.01 km/h"),
                MeasurementChannel::new(3, "speed", "m/s", 1.0 / 360.0, 0.0)?,
                RawReading::SpeedCentiKmh,
            ),
        ];
        for i in 0..n_extra {
            entries.push((
                signal(&format!("AUX_{i}"), SignalSource::Other, "0.1 degC"),
                MeasurementChannel::new(
                    EXTRA_CHANNEL_BASE + i,
                    &format!("sensor_{i}"),
                    "degC",
                    0.1,
                    -40.0,
                )?,
                RawReading::Synthetic(i),
            ));
        }
        Ok(ChannelSet { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn channels(&self) -> impl Iterator<Item = &MeasurementChannel> {
        self.entries.iter().map(|(_, c, _)| c)
    }

    pub fn signals(&self) -> impl Iterator<Item = &SignalDescriptor> {
        self.entries.iter().map(|(s, _, _)| s)
    }

    /// Read every signal from the vehicle state and harmonize it.
    pub fn sample(&self, state: &TraceSample) -> Result<Vec<ChannelRecord>> {
        self.entries
            .iter()
            .map(|(_, channel, reading)| {
                Ok(ChannelRecord {
                    channel_id: channel.channel_id,
                    t: f64::from(state.t),
                    value: harmonize(reading.read(state), channel)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(scale: f64, offset: f64) -> MeasurementChannel {
        MeasurementChannel::new(1, "c", "u", scale, offset).unwrap()
    }

    #[test]
    fn harmonize_cases() {
        assert_eq!(harmonize(42.0, &channel(1.0, 0.0)).unwrap(), 42.0);
        assert!((harmonize(2550.0, &channel(0.01, 0.0)).unwrap() - 25.5).abs() < 1e-12);
        assert_eq!(harmonize(0.0, &channel(0.01, -40.0)).unwrap(), -40.0);
        assert!(harmonize(f64::NAN, &channel(1.0, 0.0)).is_err());
        assert!(harmonize(f64::INFINITY, &channel(1.0, 0.0)).is_err());
    }

    #[test]
    fn zero_scale_rejected() {
        assert!(MeasurementChannel::new(1, "c", "u", 0.0, 1.0).is_err());
    }

    #[test]
    fn standard_set_reports_kinematics() {
        let set = ChannelSet::standard(2, "ACME").unwrap();
        assert_eq!(set.len(), 5);
        let state = TraceSample {
            t: 4,
            x: 12.5,
            y: -3.0,
            speed: 20.0,
        };
        let records = set.sample(&state).unwrap();
        assert_eq!(
            records.iter().map(|r| r.channel_id).collect::<Vec<_>>(),
            [1, 2, 3, 100, 101]
        );
        assert!((records[0].value - 12.5).abs() < 1e-9);
        assert!((records[1].value + 3.0).abs() < 1e-9);
        assert!((records[2].value - 20.0).abs() < 1e-9);
        assert!(records.iter().all(|r| r.t == 4.0));
        assert!(set.signals().all(|s| s.brand_tag == "ACME"));
    }
}
