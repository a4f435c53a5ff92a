use std::hash::Hasher;

use crc::{Crc, CRC_64_XZ};
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher24;

use crate::{Error, Result, VehicleId};

use super::ChannelRecord;

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Encoded header size; the wire header is always this long.
pub const WIRE_HEADER_BYTES: usize = 64;
/// Encoded size of one record.
pub const WIRE_RECORD_BYTES: usize = 16;
pub const OWNER_BYTES: usize = 16;

// header field offsets
const OFF_PACKAGE_ID: usize = 0;
const OFF_PSEUDONYM: usize = 16;
const OFF_INTERVAL: usize = 24;
const OFF_DURATION: usize = 28;
const OFF_COUNT: usize = 29;
const OFF_PRIVACY: usize = 31;
const OFF_OWNER: usize = 32;
const OFF_CHECKSUM: usize = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyLevel {
    Public,
    #[default]
    Restricted,
    Private,
}

impl PrivacyLevel {
    fn code(self) -> u8 {
        match self {
            PrivacyLevel::Public => 0,
            PrivacyLevel::Restricted => 1,
            PrivacyLevel::Private => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PrivacyLevel::Public),
            1 => Some(PrivacyLevel::Restricted),
            2 => Some(PrivacyLevel::Private),
            _ => None,
        }
    }
}

impl std::str::FromStr for PrivacyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "public" => Ok(PrivacyLevel::Public),
            "restricted" => Ok(PrivacyLevel::Restricted),
            "private" => Ok(PrivacyLevel::Private),
            other => Err(Error::Config(format!("unknown privacy level {other:?}"))),
        }
    }
}

/// Canonical package identity: pseudonymized vehicle and interval start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackageId {
    pub pseudonym: u64,
    pub interval_start: u32,
}

impl PackageId {
    fn to_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.pseudonym.to_le_bytes());
        out[8..].copy_from_slice(&u64::from(self.interval_start).to_le_bytes());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageMeta {
    pub owner: String,
    pub privacy_level: PrivacyLevel,
    pub checksum: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvimDataPackage {
    pub package_id: PackageId,
    pub pseudonymous_vehicle_id: u64,
    /// Tick at which the covered interval starts.
    pub interval_start: u32,
    /// Seconds covered.
    pub duration: u8,
    pub records: Vec<ChannelRecord>,
    /// Size used for transmission accounting.
    pub payload_bytes: u64,
    pub meta: PackageMeta,
}

/// Accounting sizes of a package.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageLayout {
    pub header_bytes: u64,
    pub record_bytes: u64,
}

impl Default for PackageLayout {
    fn default() -> Self {
        PackageLayout {
            header_bytes: WIRE_HEADER_BYTES as u64,
            record_bytes: WIRE_RECORD_BYTES as u64,
        }
    }
}

impl PackageLayout {
    pub fn payload_bytes(&self, records: usize) -> u64 {
        self.header_bytes + self.record_bytes * records as u64
    }
}

/// Builds packages for one deployment: sizing, ownership and the
/// pseudonymization key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packager {
    pub layout: PackageLayout,
    pub pseudonym_key: u64,
    pub owner: String,
    pub privacy_level: PrivacyLevel,
}

impl Default for Packager {
    fn default() -> Self {
        Packager {
            layout: PackageLayout::default(),
            pseudonym_key: 0x5eed_cafe_f00d_0001,
            owner: "vehicle-owner".to_owned(),
            privacy_level: PrivacyLevel::Restricted,
        }
    }
}

impl Packager {
    pub fn validate(&self) -> Result<()> {
        if self.owner.len() > OWNER_BYTES {
            return Err(Error::Config(format!(
                "cvim.owner must fit in {OWNER_BYTES} bytes, got {:?}",
                self.owner
            )));
        }
        Ok(())
    }

    /// Keyed 64-bit hash standing in for the vehicle id outside the vehicle.
    pub fn pseudonym(&self, vehicle: &VehicleId) -> u64 {
        let mut hasher = SipHasher24::new_with_keys(self.pseudonym_key, !self.pseudonym_key);
        hasher.write(vehicle.as_str().as_bytes());
        hasher.finish()
    }

    /// One-second package starting at `interval_start`.
    pub fn package(
        &self,
        vehicle: &VehicleId,
        interval_start: u32,
        records: Vec<ChannelRecord>,
    ) -> Result<CvimDataPackage> {
        self.package_span(vehicle, interval_start, 1, records)
    }

    /// Package covering `[interval_start, interval_start + duration)`.
    pub fn package_span(
        &self,
        vehicle: &VehicleId,
        interval_start: u32,
        duration: u8,
        records: Vec<ChannelRecord>,
    ) -> Result<CvimDataPackage> {
        if duration == 0 || usize::from(duration) * 1000 > usize::from(u16::MAX) + 1 {
            return Err(Error::Validation(format!(
                "package duration {duration} s out of range"
            )));
        }
        if records.len() > usize::from(u16::MAX) {
            return Err(Error::Validation(format!(
                "{} records exceed one package",
                records.len()
            )));
        }
        let start = f64::from(interval_start);
        let end = start + f64::from(duration);
        for (i, r) in records.iter().enumerate() {
            if !(r.t >= start && r.t < end) {
                return Err(Error::Validation(format!(
                    "record {i} (channel {}, t = {}) outside interval [{start}, {end})",
                    r.channel_id, r.t
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::Validation(format!(
                    "record {i} (channel {}) has a non-finite value",
                    r.channel_id
                )));
            }
        }
        let pseudonym = self.pseudonym(vehicle);
        let mut package = CvimDataPackage {
            package_id: PackageId {
                pseudonym,
                interval_start,
            },
            pseudonymous_vehicle_id: pseudonym,
            interval_start,
            duration,
            payload_bytes: self.layout.payload_bytes(records.len()),
            records,
            meta: PackageMeta {
                owner: self.owner.clone(),
                privacy_level: self.privacy_level,
                checksum: 0,
            },
        };
        package.meta.checksum = CHECKSUM.checksum(&package.encode_unsigned()?);
        Ok(package)
    }
}

impl CvimDataPackage {
    fn encode_unsigned(&self) -> Result<Vec<u8>> {
        let owner = self.meta.owner.as_bytes();
        if owner.len() > OWNER_BYTES {
            return Err(Error::Validation(format!(
                "owner {:?} exceeds {OWNER_BYTES} bytes",
                self.meta.owner
            )));
        }
        let mut out = vec![0u8; WIRE_HEADER_BYTES + WIRE_RECORD_BYTES * self.records.len()];
        out[OFF_PACKAGE_ID..OFF_PACKAGE_ID + 16].copy_from_slice(&self.package_id.to_bytes());
        out[OFF_PSEUDONYM..OFF_PSEUDONYM + 8]
            .copy_from_slice(&self.pseudonymous_vehicle_id.to_le_bytes());
        out[OFF_INTERVAL..OFF_INTERVAL + 4].copy_from_slice(&self.interval_start.to_le_bytes());
        out[OFF_DURATION] = self.duration;
        out[OFF_COUNT..OFF_COUNT + 2].copy_from_slice(&(self.records.len() as u16).to_le_bytes());
        out[OFF_PRIVACY] = self.meta.privacy_level.code();
        out[OFF_OWNER..OFF_OWNER + owner.len()].copy_from_slice(owner);

        let start = f64::from(self.interval_start);
        for (i, r) in self.records.iter().enumerate() {
            let at = WIRE_HEADER_BYTES + i * WIRE_RECORD_BYTES;
            let offset_ms = ((r.t - start) * 1000.0).round() as u16;
            out[at..at + 2].copy_from_slice(&r.channel_id.to_le_bytes());
            out[at + 2..at + 4].copy_from_slice(&offset_ms.to_le_bytes());
            out[at + 4..at + 12].copy_from_slice(&r.value.to_le_bytes());
        }
        Ok(out)
    }

    /// Little-endian wire encoding: 64-byte header then 16 bytes per record.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = self.encode_unsigned()?;
        out[OFF_CHECKSUM..OFF_CHECKSUM + 8].copy_from_slice(&self.meta.checksum.to_le_bytes());
        Ok(out)
    }

    /// Decode and verify the checksum. `payload_bytes` is set to the wire
    /// length.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::parse("package", msg);
        if bytes.len() < WIRE_HEADER_BYTES {
            return Err(bad(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        let u16_at = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());

        let count = usize::from(u16_at(OFF_COUNT));
        let expected = WIRE_HEADER_BYTES + count * WIRE_RECORD_BYTES;
        if bytes.len() != expected {
            return Err(bad(format!(
                "length {} does not match {count} records",
                bytes.len()
            )));
        }
        let mut unsigned = bytes.to_vec();
        unsigned[OFF_CHECKSUM..OFF_CHECKSUM + 8].fill(0);
        let checksum = u64_at(OFF_CHECKSUM);
        if CHECKSUM.checksum(&unsigned) != checksum {
            return Err(Error::Validation("package checksum mismatch".into()));
        }

        let interval_start = u32_at(OFF_INTERVAL);
        if u64_at(OFF_PACKAGE_ID + 8) != u64::from(interval_start)
            || u64_at(OFF_PACKAGE_ID) != u64_at(OFF_PSEUDONYM)
        {
            return Err(Error::Validation("package id disagrees with header".into()));
        }
        let owner_raw = &bytes[OFF_OWNER..OFF_OWNER + OWNER_BYTES];
        let owner_len = owner_raw
            .iter()
            .position(|&b| b == 0)
            .unwrap_or(OWNER_BYTES);
        let owner = std::str::from_utf8(&owner_raw[..owner_len])
            .map_err(|_| bad("owner is not UTF-8".into()))?
            .to_owned();
        let privacy_level = PrivacyLevel::from_code(bytes[OFF_PRIVACY])
            .ok_or_else(|| bad(format!("unknown privacy code {}", bytes[OFF_PRIVACY])))?;

        let start = f64::from(interval_start);
        let records = (0..count)
            .map(|i| {
                let at = WIRE_HEADER_BYTES + i * WIRE_RECORD_BYTES;
                ChannelRecord {
                    channel_id: u16_at(at),
                    t: start + f64::from(u16_at(at + 2)) / 1000.0,
                    value: f64::from_le_bytes(bytes[at + 4..at + 12].try_into().unwrap()),
                }
            })
            .collect();
        let pseudonym = u64_at(OFF_PSEUDONYM);
        Ok(CvimDataPackage {
            package_id: PackageId {
                pseudonym,
                interval_start,
            },
            pseudonymous_vehicle_id: pseudonym,
            interval_start,
            duration: bytes[OFF_DURATION],
            records,
            payload_bytes: bytes.len() as u64,
            meta: PackageMeta {
                owner,
                privacy_level,
                checksum,
            },
        })
    }
}
