use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellLayout, Propagation};
use crate::protocol::{sucre_power, PowerPolicy, Protocol};

/// Every knob of one simulated configuration.
///
/// Powers are linear and relative to the noise power. Options left as
/// `None` resolve to the usual defaults: `dl_power` and `rho_max` to the
/// fixed SUCRe power, `rho_bar` to the noise power and `sucre_bias` to
/// `-omega_bar / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Base station antennas `M`.
    pub antennas: usize,
    /// RA pilots `tau_p`.
    pub tau_p: usize,
    /// Inactive devices in the home cell `K0`.
    pub k0: usize,
    /// Per-block activation probability of an idle device.
    pub activation_prob: f64,
    pub max_attempts: u32,
    /// Backoff is uniform on `1..=backoff_window` blocks.
    pub backoff_window: u32,
    pub blocks: usize,
    pub warmup_blocks: usize,
    pub protocol: Protocol,
    pub interference: bool,
    /// Std of the multiplicative error on the known large-scale gain.
    pub sigma_beta: f64,
    /// Downlink power `q`.
    pub dl_power: Option<f64>,
    pub noise_power: f64,
    pub rho_bar: Option<f64>,
    pub rho_max: Option<f64>,
    pub d_max: f64,
    pub d_min: f64,
    /// `log10` of the path loss at 1 m.
    pub path_loss_log10: f64,
    pub path_loss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub sucre_bias: Option<f64>,
    /// Samples used to estimate the average intercell interference.
    pub omega_bar_samples: usize,
    /// Physical power (W) that the fixed SUCRe power corresponds to, used
    /// to report energy.
    pub reference_power_w: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            antennas: 100,
            tau_p: 10,
            k0: 15_000,
            activation_prob: 0.001,
            max_attempts: 10,
            backoff_window: 10,
            blocks: 20_000,
            warmup_blocks: 4_000,
            protocol: Protocol::Acbpc,
            interference: true,
            sigma_beta: 0.0,
            dl_power: None,
            noise_power: 1.0,
            rho_bar: None,
            rho_max: None,
            d_max: 250.0,
            d_min: 25.0,
            path_loss_log10: -3.53,
            path_loss_exponent: 3.8,
            shadow_sigma_db: 8.0,
            sucre_bias: None,
            omega_bar_samples: 200_000,
            reference_power_w: 0.1,
            seed: 1,
        }
    }
}

impl SimParams {
    /// Sets the block count and discards the first fifth as warmup.
    pub fn with_blocks(mut self, blocks: usize) -> Self {
        self.blocks = blocks;
        self.warmup_blocks = blocks / 5;
        self
    }

    /// Block count such that about `episodes` activations fall after warmup.
    pub fn with_target_episodes(self, episodes: usize) -> Self {
        let per_block = (self.k0 as f64 * self.activation_prob).max(1e-9);
        let measured = (episodes as f64 / per_block).ceil() as usize;
        self.with_blocks((measured * 5).div_ceil(4).max(2))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(key, format!("must be positive, got {v}")))
            }
        };
        if self.antennas == 0 {
            return Err(Error::param("antennas", "must be at least 1"));
        }
        if self.tau_p == 0 {
            return Err(Error::param("tau_p", "must be at least 1"));
        }
        if !(self.activation_prob > 0.0 && self.activation_prob <= 1.0) {
            return Err(Error::param(
                "activation_prob",
                format!("must lie in (0, 1], got {}", self.activation_prob),
            ));
        }
        if self.max_attempts == 0 {
            return Err(Error::param("max_attempts", "must be at least 1"));
        }
        if self.backoff_window == 0 {
            return Err(Error::param("backoff_window", "must be at least 1"));
        }
        if self.blocks <= self.warmup_blocks {
            return Err(Error::param(
                "blocks",
                format!(
                    "must exceed warmup_blocks ({} <= {})",
                    self.blocks, self.warmup_blocks
                ),
            ));
        }
        if !(self.sigma_beta >= 0.0 && self.sigma_beta.is_finite()) {
            return Err(Error::param("sigma_beta", "must be non-negative"));
        }
        if let Some(q) = self.dl_power {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::param("dl_power", "must be non-negative"));
            }
        }
        positive("noise_power", self.noise_power)?;
        if let Some(v) = self.rho_bar {
            positive("rho_bar", v)?;
        }
        if let Some(v) = self.rho_max {
            positive("rho_max", v)?;
        }
        positive("d_max", self.d_max)?;
        if !(self.d_min >= 0.0 && self.d_min < self.d_max) {
            return Err(Error::param("d_min", "must lie in [0, d_max)"));
        }
        positive("path_loss_exponent", self.path_loss_exponent)?;
        if !self.path_loss_log10.is_finite() {
            return Err(Error::param("path_loss_log10", "must be finite"));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return Err(Error::param("shadow_sigma_db", "must be non-negative"));
        }
        if let Some(b) = self.sucre_bias {
            if !b.is_finite() {
                return Err(Error::param("sucre_bias", "must be finite"));
            }
        }
        if self.interference && self.omega_bar_samples == 0 {
            return Err(Error::param("omega_bar_samples", "must be at least 1"));
        }
        positive("reference_power_w", self.reference_power_w)?;
        Ok(())
    }

    pub fn propagation(&self) -> Propagation {
        Propagation {
            d_bar: 10f64.powf(self.path_loss_log10),
            exponent: self.path_loss_exponent,
            shadow_sigma_db: self.shadow_sigma_db,
        }
    }

    pub fn layout(&self) -> Result<CellLayout> {
        if self.interference {
            CellLayout::hexagonal(self.d_max, self.d_min)
        } else {
            CellLayout::isolated(self.d_max, self.d_min)
        }
    }

    pub fn rho_sucre(&self) -> f64 {
        sucre_power(self.d_max, &self.propagation(), self.noise_power)
    }

    pub fn power_policy(&self) -> Result<PowerPolicy> {
        let rho_sucre = self.rho_sucre();
        PowerPolicy::new(
            self.protocol,
            rho_sucre,
            self.rho_bar.unwrap_or(self.noise_power),
            self.rho_max.unwrap_or(rho_sucre),
        )
    }

    pub fn q(&self) -> f64 {
        self.dl_power.unwrap_or_else(|| self.rho_sucre())
    }
}
