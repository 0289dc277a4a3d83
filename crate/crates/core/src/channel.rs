//! Link budget for the vehicle-to-AP radio links.
//!
//! Path loss follows the two-slope breakpoint model of the TGn channel
//! family: free-space propagation up to the breakpoint distance, a steeper
//! exponent beyond it, plus wall penetration and a fixed shadowing margin.
//! Log-normal shadow fading is drawn per link and per evaluation.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Boltzmann constant as used by the noise-power formula.
pub const BOLTZMANN: f64 = 1.3803e-23;
/// Reference temperature in kelvin.
pub const REFERENCE_TEMP_K: f64 = 290.0;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Transmit power as a raw number, inserted into the SNR budget as-is
    /// unless `tx_power_in_mw` is set.
    pub tx_power: f64,
    /// Interpret `tx_power` as milliwatts and convert it to dBm first.
    pub tx_power_in_mw: bool,
    pub op_bandwidth_hz: f64,
    pub frequency_hz: f64,
    pub noise_figure_db: f64,
    pub breakpoint_m: f64,
    pub slope_pre: f64,
    pub slope_post: f64,
    pub shadow_sigma_pre_db: f64,
    pub shadow_sigma_post_db: f64,
    pub penetration_loss_db: f64,
    pub fixed_shadow_db: f64,
    pub min_distance_m: f64,
    pub shadow_enabled: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            tx_power: 25.0,
            tx_power_in_mw: false,
            op_bandwidth_hz: 2e7,
            frequency_hz: 5e9,
            noise_figure_db: 7.0,
            breakpoint_m: 5.0,
            slope_pre: 2.0,
            slope_post: 3.5,
            shadow_sigma_pre_db: 3.0,
            shadow_sigma_post_db: 4.0,
            penetration_loss_db: 7.0,
            fixed_shadow_db: 18.0,
            min_distance_m: 0.1,
            shadow_enabled: true,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("op_bandwidth_hz", self.op_bandwidth_hz),
            ("frequency_hz", self.frequency_hz),
            ("breakpoint_m", self.breakpoint_m),
            ("min_distance_m", self.min_distance_m),
            ("slope_pre", self.slope_pre),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("channel.{name} must be > 0, got {v}")));
            }
        }
        if !(self.slope_post >= self.slope_pre) {
            return Err(Error::domain(format!(
                "channel.slope_post ({}) must be >= slope_pre ({})",
                self.slope_post, self.slope_pre
            )));
        }
        for (name, v) in [
            ("shadow_sigma_pre_db", self.shadow_sigma_pre_db),
            ("shadow_sigma_post_db", self.shadow_sigma_post_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("channel.{name} must be >= 0, got {v}")));
            }
        }
        if self.tx_power_in_mw && !(self.tx_power > 0.0) {
            return Err(Error::domain("channel.tx_power must be > 0 mW"));
        }
        Ok(())
    }

    /// Transmit power term entering the SNR budget.
    pub fn tx_power_term(&self) -> f64 {
        if self.tx_power_in_mw {
            10.0 * self.tx_power.log10()
        } else {
            self.tx_power
        }
    }

    fn shadow_sigma(&self, clamped_distance: f64) -> f64 {
        if clamped_distance <= self.breakpoint_m {
            self.shadow_sigma_pre_db
        } else {
            self.shadow_sigma_post_db
        }
    }
}

/// Normalization frame for SNR values, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrBounds {
    pub snr_min_db: f64,
    pub snr_max_db: f64,
}

impl SnrBounds {
    pub fn new(snr_min_db: f64, snr_max_db: f64) -> Result<Self> {
        if !(snr_max_db > snr_min_db) {
            return Err(Error::domain(format!(
                "snr_max_db ({snr_max_db}) must exceed snr_min_db ({snr_min_db})"
            )));
        }
        Ok(Self {
            snr_min_db,
            snr_max_db,
        })
    }

    pub fn normalize(&self, snr_db: f64) -> f64 {
        let v = (snr_db - self.snr_min_db) / (self.snr_max_db - self.snr_min_db);
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, 1.0)
        }
    }
}

/// Thermal noise power in watts for the given bandwidth and noise figure.
pub fn noise_power(op_bandwidth_hz: f64, noise_figure_db: f64) -> Result<f64> {
    if !(op_bandwidth_hz >= 0.0) {
        return Err(Error::domain(format!(
            "bandwidth must be >= 0, got {op_bandwidth_hz}"
        )));
    }
    Ok(10f64.powf(noise_figure_db / 10.0) * BOLTZMANN * REFERENCE_TEMP_K * op_bandwidth_hz)
}

/// Two-slope loss without penetration or fixed-shadow offsets.
pub fn breakpoint_loss(distance_m: f64, params: &ChannelParams) -> f64 {
    let d = distance_m.max(params.min_distance_m);
    let free_space = |d: f64| {
        20.0 * (4.0 * std::f64::consts::PI * d * params.frequency_hz / SPEED_OF_LIGHT).log10()
            * (params.slope_pre / 2.0)
    };
    if d <= params.breakpoint_m {
        free_space(d)
    } else {
        free_space(params.breakpoint_m)
            + 10.0 * params.slope_post * (d / params.breakpoint_m).log10()
    }
}

/// Deterministic path loss in dB, offsets included.
pub fn path_loss_deterministic(distance_m: f64, params: &ChannelParams) -> f64 {
    breakpoint_loss(distance_m, params) + params.penetration_loss_db + params.fixed_shadow_db
}

/// Path loss with a shadow-fading draw. No draw is consumed when fading is
/// disabled.
pub fn path_loss<R: Rng + ?Sized>(distance_m: f64, params: &ChannelParams, rng: &mut R) -> f64 {
    let base = path_loss_deterministic(distance_m, params);
    if !params.shadow_enabled {
        return base;
    }
    let sigma = params.shadow_sigma(distance_m.max(params.min_distance_m));
    if sigma == 0.0 {
        return base;
    }
    // sigma was validated finite and non-negative
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    base + normal.sample(rng)
}

pub fn snr_db(tx_power: f64, ploss_db: f64, noise_power_w: f64) -> Result<f64> {
    if !(noise_power_w > 0.0) {
        return Err(Error::domain(format!(
            "noise power must be > 0, got {noise_power_w}"
        )));
    }
    Ok(tx_power - ploss_db - 30.0 - 10.0 * noise_power_w.log10())
}

pub fn normalize_snr(snr_values: &[f64], bounds: &SnrBounds) -> Vec<f64> {
    snr_values.iter().map(|&v| bounds.normalize(v)).collect()
}

/// Fixed normalization frame for a square world of side `world_size_m`:
/// the best link is a vehicle sitting on an AP, the worst one spans the
/// diagonal. Shadow fading is excluded.
pub fn scenario_snr_bounds(world_size_m: f64, params: &ChannelParams) -> Result<SnrBounds> {
    if !(world_size_m.is_finite() && world_size_m > 0.0) {
        return Err(Error::domain(format!(
            "world size must be > 0, got {world_size_m}"
        )));
    }
    let npw = noise_power(params.op_bandwidth_hz, params.noise_figure_db)?;
    let at = |d: f64| snr_db(params.tx_power_term(), path_loss_deterministic(d, params), npw);
    let diagonal = world_size_m * std::f64::consts::SQRT_2;
    SnrBounds::new(at(diagonal)?, at(params.min_distance_m)?)
}

/// Validated channel parameters with the derived noise power cached.
#[derive(Debug, Clone)]
pub struct Channel {
    params: ChannelParams,
    noise_power_w: f64,
}

impl Channel {
    pub fn new(params: ChannelParams) -> Result<Self> {
        params.validate()?;
        let noise_power_w = noise_power(params.op_bandwidth_hz, params.noise_figure_db)?;
        if !(noise_power_w > 0.0) {
            return Err(Error::domain("noise power evaluates to zero"));
        }
        Ok(Self {
            params,
            noise_power_w,
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn noise_power_w(&self) -> f64 {
        self.noise_power_w
    }

    pub fn snr_from_loss(&self, ploss_db: f64) -> f64 {
        self.params.tx_power_term() - ploss_db - 30.0 - 10.0 * self.noise_power_w.log10()
    }

    pub fn snr_deterministic(&self, distance_m: f64) -> f64 {
        self.snr_from_loss(path_loss_deterministic(distance_m, &self.params))
    }

    pub fn snr<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> f64 {
        self.snr_from_loss(path_loss(distance_m, &self.params, rng))
    }

    /// Raw SNR matrix in dB for a distance matrix. Fading draws are consumed
    /// in row-major order.
    pub fn snr_matrix<R: Rng + ?Sized>(&self, distances: &Array2<f64>, rng: &mut R) -> Array2<f64> {
        distances.mapv(|d| self.snr(d, rng))
    }
}
