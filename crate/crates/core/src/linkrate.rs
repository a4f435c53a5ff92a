//! Achievable uplink rate per LTE resource block as a function of SNR and
//! vehicle speed.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A per-resource-block rate model.
///
/// Implementations must be nondecreasing in SNR and nonincreasing in speed;
/// the scheduler, engine and planner rely on nothing else.
pub trait RateModel {
    /// Bits per second carried by one resource block.
    fn rb_rate(&self, snr_db: f64, speed: f64) -> f64;
}

/// Attenuated, truncated Shannon bound with a linear speed penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbRateParams {
    /// Hz per resource block.
    pub rb_bandwidth: f64,
    /// Implementation-loss factor applied to the Shannon bound, in (0, 1].
    pub attenuation_beta: f64,
    /// Spectral-efficiency ceiling, bit/s/Hz.
    pub eta_max: f64,
    /// Outage threshold, dB.
    pub snr_min: f64,
    /// Fractional rate loss at and above `v_ref`, in [0, 1).
    pub speed_penalty_at_vmax: f64,
    /// m/s
    pub v_ref: f64,
}

impl Default for RbRateParams {
    fn default() -> Self {
        RbRateParams {
            rb_bandwidth: 180_000.0,
            attenuation_beta: 0.6,
            eta_max: 5.55,
            snr_min: -10.0,
            speed_penalty_at_vmax: 0.3,
            v_ref: 36.11,
        }
    }
}

impl RbRateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation_beta > 0.0 && self.attenuation_beta <= 1.0) {
            return Err(Error::Config(format!(
                "linkrate.attenuation_beta must lie in (0, 1], got {}",
                self.attenuation_beta
            )));
        }
        if !(self.eta_max.is_finite() && self.eta_max > 0.0) {
            return Err(Error::Config(format!(
                "linkrate.eta_max must be positive, got {}",
                self.eta_max
            )));
        }
        if !(0.0..1.0).contains(&self.speed_penalty_at_vmax) {
            return Err(Error::Config(format!(
                "linkrate.speed_penalty_at_vmax must lie in [0, 1), got {}",
                self.speed_penalty_at_vmax
            )));
        }
        if !(self.rb_bandwidth.is_finite() && self.rb_bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "linkrate.rb_bandwidth must be positive, got {}",
                self.rb_bandwidth
            )));
        }
        if !(self.v_ref.is_finite() && self.v_ref > 0.0) {
            return Err(Error::Config(format!(
                "linkrate.v_ref must be positive, got {}",
                self.v_ref
            )));
        }
        if self.snr_min.is_nan() {
            return Err(Error::Config("linkrate.snr_min is NaN".into()));
        }
        Ok(())
    }

    /// Multiplicative speed penalty in [1 - speed_penalty_at_vmax, 1].
    pub fn speed_factor(&self, speed: f64) -> f64 {
        1.0 - self.speed_penalty_at_vmax * speed.max(0.0).min(self.v_ref) / self.v_ref
    }

    /// Ceiling of [`RateModel::rb_rate`].
    pub fn max_rb_rate(&self) -> f64 {
        self.eta_max * self.rb_bandwidth
    }
}

impl RateModel for RbRateParams {
    fn rb_rate(&self, snr_db: f64, speed: f64) -> f64 {
        if snr_db.is_nan() || snr_db < self.snr_min {
            return 0.0;
        }
        let snr_linear = 10f64.powf(snr_db / 10.0);
        let efficiency =
            (self.attenuation_beta * snr_linear.ln_1p() / std::f64::consts::LN_2).min(self.eta_max);
        efficiency * self.rb_bandwidth * self.speed_factor(speed)
    }
}

/// Rate of a single user holding `n_rb` resource blocks.
pub fn cell_peak_rate(n_rb: f64, snr_db: f64, speed: f64, model: &impl RateModel) -> f64 {
    n_rb * model.rb_rate(snr_db, speed)
}
