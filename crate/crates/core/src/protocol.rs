//! Power policies and Step-3 decision rules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Propagation;
use crate::signal::{estimate_contenders, AlphaEstimate, DecisionInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Strongest-user collision resolution.
    Sucre,
    /// Access class barring with power control.
    Acbpc,
    /// Collisions are only resolved by later retransmission.
    Baseline,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Sucre, Protocol::Acbpc, Protocol::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Sucre => "sucre",
            Protocol::Acbpc => "acbpc",
            Protocol::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sucre" => Ok(Protocol::Sucre),
            "acbpc" => Ok(Protocol::Acbpc),
            "baseline" => Ok(Protocol::Baseline),
            other => Err(Error::domain(format!(
                "unknown protocol `{other}` (expected sucre, acbpc or baseline)"
            ))),
        }
    }
}

/// Pilot transmit power rule.
///
/// SUCRe and the baseline transmit at the fixed `rho_sucre`. ACBPC inverts
/// the known large-scale gain so that the average received power is
/// `rho_bar`, capped at `rho_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    pub protocol: Protocol,
    pub rho_sucre: f64,
    pub rho_bar: f64,
    pub rho_max: f64,
}

impl PowerPolicy {
    pub fn new(protocol: Protocol, rho_sucre: f64, rho_bar: f64, rho_max: f64) -> Result<Self> {
        for (name, v) in [
            ("rho_sucre", rho_sucre),
            ("rho_bar", rho_bar),
            ("rho_max", rho_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            protocol,
            rho_sucre,
            rho_bar,
            rho_max,
        })
    }

    /// Cell-edge SNR of 0 dB for the fixed power, `rho_bar = sigma2` and
    /// `rho_max = rho_sucre`.
    pub fn standard(protocol: Protocol, d_max: f64, prop: &Propagation, sigma2: f64) -> Self {
        let rho_sucre = sucre_power(d_max, prop, sigma2);
        Self {
            protocol,
            rho_sucre,
            rho_bar: sigma2,
            rho_max: rho_sucre,
        }
    }

    pub fn tx_power(&self, beta_known: f64) -> Result<f64> {
        tx_power(self, beta_known)
    }
}

/// `sigma2 / (d_bar * d_max^(-kappa))`: the fixed power giving 0 dB median
/// SNR at the cell edge.
pub fn sucre_power(d_max: f64, prop: &Propagation, sigma2: f64) -> f64 {
    sigma2 / prop.path_gain(d_max)
}

pub fn tx_power(policy: &PowerPolicy, beta_known: f64) -> Result<f64> {
    if beta_known.is_nan() || beta_known <= 0.0 {
        return Err(Error::domain(format!(
            "large-scale gain must be positive, got {beta_known}"
        )));
    }
    Ok(match policy.protocol {
        Protocol::Sucre | Protocol::Baseline => policy.rho_sucre,
        Protocol::Acbpc => (policy.rho_bar / beta_known).min(policy.rho_max),
    })
}

/// SUCRe bias. Defaults to `-omega_bar / 2`, which removes the average
/// interference from the half-total threshold.
pub fn sucre_bias(omega_bar: f64, override_value: Option<f64>) -> f64 {
    override_value.unwrap_or(-omega_bar / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Repeat,
    Inactive,
}

/// Step-3 decision of one contender with the quantities it was based on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub alpha_hat: Option<f64>,
    /// ACBPC only: estimated number of contenders.
    pub contenders_hat: Option<f64>,
    /// ACBPC only: retransmission probability.
    pub zeta: Option<f64>,
}

impl Decision {
    fn bare(action: Action) -> Self {
        Self {
            action,
            alpha_hat: None,
            contenders_hat: None,
            zeta: None,
        }
    }

    pub fn is_repeat(&self) -> bool {
        self.action == Action::Repeat
    }
}

/// Repeat iff the own average gain exceeds half the estimated total plus
/// the bias. The inequality is strict.
pub fn sucre_decide(input: &DecisionInput, alpha: &AlphaEstimate) -> Decision {
    let own = input.own_gain();
    let action = if own > alpha.value / 2.0 + input.bias {
        Action::Repeat
    } else {
        Action::Inactive
    };
    Decision {
        alpha_hat: Some(alpha.value),
        ..Decision::bare(action)
    }
}

/// Repeat with probability `1 / S_hat`, where `S_hat` is the contender
/// count inferred from the power-leveled total.
pub fn acbpc_decide<R: Rng + ?Sized>(
    input: &DecisionInput,
    alpha: &AlphaEstimate,
    rng: &mut R,
) -> Decision {
    let s_hat = estimate_contenders(alpha, input.omega_bar, input.rho_bar, input.tau_p);
    let zeta = (1.0 / s_hat).min(1.0);
    let u: f64 = rng.random();
    let action = if u < zeta {
        Action::Repeat
    } else {
        Action::Inactive
    };
    Decision {
        action,
        alpha_hat: Some(alpha.value),
        contenders_hat: Some(s_hat),
        zeta: Some(zeta),
    }
}

pub fn baseline_decide() -> Decision {
    Decision::bare(Action::Repeat)
}

/// Probability that exactly one of `n` contenders retransmits when each
/// does so independently with probability `1/n`: `(1 - 1/n)^(n-1)`.
///
/// This is an upper bound on ACBPC's resolution probability and tends to
/// `1/e` as `n` grows.
pub fn p_res_bound(n_contenders: u64) -> Result<f64> {
    match n_contenders {
        0 => Err(Error::domain("contender count must be at least 1")),
        1 => Ok(1.0),
        n => {
            let n = n as f64;
            Ok(((n - 1.0) * (-1.0 / n).ln_1p()).exp())
        }
    }
}
