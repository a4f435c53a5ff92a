//! Simulation configuration and its flat `section.key = value` text format.
//!
//! ```text
//! # traffic jam at 10 RB
//! road.inflow = 4000
//! cell.rb_limit = 10
//! sim.scenario_label = traffic_jam
//! ```
//!
//! Unknown keys are errors. Later assignments override earlier ones.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cvim::{ChannelSet, PackageLayout, Packager, PriorityPredicate};
use crate::linkrate::RbRateParams;
use crate::mobility::{KraussParams, RoadSpec, Topology};
use crate::radio::LinkBudgetConfig;
use crate::scheduler::ScheduleMode;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// Resource blocks per cell.
    pub n_rb: u32,
    /// Resource blocks actually reserved for car-to-cloud traffic, if fewer.
    pub rb_limit: Option<u32>,
}

impl CellConfig {
    pub fn effective_rb(&self) -> u32 {
        self.rb_limit.unwrap_or(self.n_rb)
    }
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            n_rb: 100,
            rb_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvimConfig {
    pub header_bytes: u64,
    pub record_bytes: u64,
    /// Synthetic channels reported on top of position and speed.
    pub n_extra: u16,
    /// Ticks merged into one package.
    pub aggregate_ticks: u8,
    pub owner: String,
    pub privacy: crate::cvim::PrivacyLevel,
    pub pseudonym_key: u64,
    /// Channels whose packages are sent ahead of the rest; empty means FIFO.
    pub priority_channels: Vec<u16>,
    pub brand_tag: String,
}

impl Default for CvimConfig {
    fn default() -> Self {
        let packager = Packager::default();
        CvimConfig {
            header_bytes: packager.layout.header_bytes,
            record_bytes: packager.layout.record_bytes,
            n_extra: 0,
            aggregate_ticks: 1,
            owner: packager.owner,
            privacy: packager.privacy_level,
            pseudonym_key: packager.pseudonym_key,
            priority_channels: Vec::new(),
            brand_tag: "OEM-PROPRIETARY".to_owned(),
        }
    }
}

impl CvimConfig {
    pub fn packager(&self) -> Packager {
        Packager {
            layout: PackageLayout {
                header_bytes: self.header_bytes,
                record_bytes: self.record_bytes,
            },
            pseudonym_key: self.pseudonym_key,
            owner: self.owner.clone(),
            privacy_level: self.privacy,
        }
    }

    pub fn channel_set(&self) -> Result<ChannelSet> {
        ChannelSet::standard(self.n_extra, &self.brand_tag)
    }

    pub fn priority(&self) -> Option<PriorityPredicate> {
        (!self.priority_channels.is_empty()).then(|| {
            PriorityPredicate::channel_allowlist(
                self.priority_channels
                    .iter()
                    .copied()
                    .collect::<BTreeSet<_>>(),
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.aggregate_ticks == 0 || self.aggregate_ticks > 65 {
            return Err(Error::Config(format!(
                "cvim.aggregate_ticks must lie in 1..=65, got {}",
                self.aggregate_ticks
            )));
        }
        self.packager().validate()?;
        self.channel_set().map(|_| ())
    }
}

/// Every parameter group of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario_label: String,
    pub road: RoadSpec,
    pub krauss: KraussParams,
    pub radio: LinkBudgetConfig,
    pub linkrate: RbRateParams,
    pub cell: CellConfig,
    pub scheduler: ScheduleMode,
    pub cvim: CvimConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::free_flow()
    }
}

impl SimConfig {
    pub fn free_flow() -> Self {
        SimConfig {
            scenario_label: "free_flow".to_owned(),
            road: RoadSpec {
                inflow: RoadSpec::FREE_FLOW_INFLOW,
                ..RoadSpec::default()
            },
            krauss: KraussParams::default(),
            radio: LinkBudgetConfig::default(),
            linkrate: RbRateParams::default(),
            cell: CellConfig::default(),
            scheduler: ScheduleMode::default(),
            cvim: CvimConfig::default(),
        }
    }

    pub fn traffic_jam() -> Self {
        SimConfig {
            scenario_label: "traffic_jam".to_owned(),
            road: RoadSpec {
                inflow: RoadSpec::TRAFFIC_JAM_INFLOW,
                ..RoadSpec::default()
            },
            ..Self::free_flow()
        }
    }

    /// Preset by scenario label.
    pub fn preset(label: &str) -> Result<Self> {
        match label {
            "free_flow" => Ok(Self::free_flow()),
            "traffic_jam" => Ok(Self::traffic_jam()),
            other => Err(Error::Config(format!(
                "unknown scenario preset {other:?} (expected free_flow or traffic_jam)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.krauss.validate()?;
        self.radio.validate()?;
        self.linkrate.validate()?;
        self.cvim.validate()
    }

    /// Apply the assignments of a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `section.key = value`, got {raw:?}",
                    n + 1
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    /// Apply one `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "override {assignment:?} is not `section.key=value`"
            ))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sim.scenario_label" => {
                if value.is_empty() {
                    return Err(Error::Config("sim.scenario_label is empty".into()));
                }
                self.scenario_label = value.to_owned();
            }

            "road.topology" => {
                self.road.topology = match value {
                    "strip" => Topology::Strip,
                    "ring" => Topology::Ring,
                    _ => return Err(bad_value(key, value)),
                }
            }
            "road.length" => self.road.length = parse(key, value)?,
            "road.inflow" => self.road.inflow = parse(key, value)?,
            "road.duration" => self.road.duration = parse(key, value)?,
            "road.seed" => self.road.seed = parse(key, value)?,

            "krauss.a_max" => self.krauss.a_max = parse(key, value)?,
            "krauss.b_max" => self.krauss.b_max = parse(key, value)?,
            "krauss.v_max" => self.krauss.v_max = parse(key, value)?,
            "krauss.sigma" => self.krauss.sigma = parse(key, value)?,
            "krauss.tau" => self.krauss.tau = parse(key, value)?,
            "krauss.min_gap" => self.krauss.min_gap = parse(key, value)?,
            "krauss.veh_length" => self.krauss.veh_length = parse(key, value)?,
            "krauss.speed_dev" => self.krauss.speed_dev = parse(key, value)?,

            "radio.carrier_freq_ghz" => self.radio.carrier_freq_ghz = parse(key, value)?,
            "radio.tx_power_dbm" => self.radio.tx_power_dbm = parse(key, value)?,
            "radio.ue_gain_dbi" => self.radio.ue_gain_dbi = parse(key, value)?,
            "radio.ue_height_m" => self.radio.ue_height_m = parse(key, value)?,
            "radio.noise_figure_db" => self.radio.noise_figure_db = parse(key, value)?,
            "radio.noise_power_dbm" => self.radio.noise_power_dbm = parse(key, value)?,
            "radio.extra_loss_db" => self.radio.extra_loss_db = parse(key, value)?,

            "linkrate.rb_bandwidth" => self.linkrate.rb_bandwidth = parse(key, value)?,
            "linkrate.attenuation_beta" => self.linkrate.attenuation_beta = parse(key, value)?,
            "linkrate.eta_max" => self.linkrate.eta_max = parse(key, value)?,
            "linkrate.snr_min" => self.linkrate.snr_min = parse(key, value)?,
            "linkrate.speed_penalty_at_vmax" => {
                self.linkrate.speed_penalty_at_vmax = parse(key, value)?
            }
            "linkrate.v_ref" => self.linkrate.v_ref = parse(key, value)?,

            "cell.n_rb" => self.cell.n_rb = parse(key, value)?,
            "cell.rb_limit" => {
                self.cell.rb_limit = match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "scheduler.mode" => self.scheduler = value.parse()?,

            "cvim.header_bytes" => self.cvim.header_bytes = parse(key, value)?,
            "cvim.record_bytes" => self.cvim.record_bytes = parse(key, value)?,
            "cvim.n_extra" => self.cvim.n_extra = parse(key, value)?,
            "cvim.aggregate_ticks" => self.cvim.aggregate_ticks = parse(key, value)?,
            "cvim.owner" => self.cvim.owner = value.to_owned(),
            "cvim.privacy" => self.cvim.privacy = value.parse()?,
            "cvim.pseudonym_key" => self.cvim.pseudonym_key = parse(key, value)?,
            "cvim.brand_tag" => self.cvim.brand_tag = value.to_owned(),
            "cvim.priority_channels" => {
                self.cvim.priority_channels = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }

            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

fn bad_value(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value for `{key}`: {value:?}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("invalid value for `{key}`: {value:?} ({e})")))
}
