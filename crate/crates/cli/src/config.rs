//! Flat `key = value` configuration with `#` comments.
//!
//! Keys are the field names of [`SimParams`]. Optional fields accept `auto`
//! for their derived default.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use acbpc_core::{Protocol, SimParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Invalid(#[from] acbpc_core::Error),
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "protocol",
    "interference",
    "k0",
    "activation_prob",
    "tau_p",
    "antennas",
    "max_attempts",
    "backoff_window",
    "blocks",
    "warmup_blocks",
    "sigma_beta",
    "dl_power",
    "noise_power",
    "rho_bar",
    "rho_max",
    "d_max",
    "d_min",
    "path_loss_log10",
    "path_loss_exponent",
    "shadow_sigma_db",
    "sucre_bias",
    "omega_bar_samples",
    "reference_power_w",
    "seed",
];

/// Splits config text into `(line, key, value)` entries.
pub fn parse_text(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                path: origin.to_string(),
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parses a `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<(String, String), ConfigError> {
    parse_text(arg, "--set")?
        .pop()
        .map(|(_, k, v)| (k, v))
        .ok_or_else(|| ConfigError::Syntax {
            path: "--set".into(),
            line: 1,
            text: arg.to_string(),
        })
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected true or false".into(),
        }),
    }
}

/// Sets one field. Does not validate cross-field invariants.
pub fn apply(params: &mut SimParams, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "protocol" => params.protocol = parse::<Protocol>(key, value)?,
        "interference" => params.interference = parse_bool(key, value)?,
        "k0" => params.k0 = parse(key, value)?,
        "activation_prob" => params.activation_prob = parse(key, value)?,
        "tau_p" => params.tau_p = parse(key, value)?,
        "antennas" => params.antennas = parse(key, value)?,
        "max_attempts" => params.max_attempts = parse(key, value)?,
        "backoff_window" => params.backoff_window = parse(key, value)?,
        "blocks" => params.blocks = parse(key, value)?,
        "warmup_blocks" => params.warmup_blocks = parse(key, value)?,
        "sigma_beta" => params.sigma_beta = parse(key, value)?,
        "dl_power" => params.dl_power = parse_opt(key, value)?,
        "noise_power" => params.noise_power = parse(key, value)?,
        "rho_bar" => params.rho_bar = parse_opt(key, value)?,
        "rho_max" => params.rho_max = parse_opt(key, value)?,
        "d_max" => params.d_max = parse(key, value)?,
        "d_min" => params.d_min = parse(key, value)?,
        "path_loss_log10" => params.path_loss_log10 = parse(key, value)?,
        "path_loss_exponent" => params.path_loss_exponent = parse(key, value)?,
        "shadow_sigma_db" => params.shadow_sigma_db = parse(key, value)?,
        "sucre_bias" => params.sucre_bias = parse_opt(key, value)?,
        "omega_bar_samples" => params.omega_bar_samples = parse(key, value)?,
        "reference_power_w" => params.reference_power_w = parse(key, value)?,
        "seed" => params.seed = parse(key, value)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Applies a layer of entries. Setting `blocks` without `warmup_blocks` in
/// the same layer keeps the warmup at a fifth of the run.
pub fn apply_layer(
    params: &mut SimParams,
    entries: &[(String, String)],
) -> Result<(), ConfigError> {
    for (k, v) in entries {
        apply(params, k, v)?;
    }
    let sets = |key: &str| entries.iter().any(|(k, _)| k == key);
    if sets("blocks") && !sets("warmup_blocks") {
        params.warmup_blocks = params.blocks / 5;
    }
    Ok(())
}

/// Effective configuration and the keys the user set explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub params: SimParams,
    pub explicit: Vec<String>,
}

impl Loaded {
    pub fn is_set(&self, key: &str) -> bool {
        self.explicit.iter().any(|k| k == key)
    }
}

/// Overlays an optional config file and then `--set` overrides on `base`,
/// and validates the result.
pub fn load_config(
    base: SimParams,
    file: Option<&Path>,
    overrides: &[String],
) -> Result<Loaded, ConfigError> {
    let mut params = base;
    let mut explicit = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let entries: Vec<(String, String)> = parse_text(&text, &path.display().to_string())?
            .into_iter()
            .map(|(_, k, v)| (k, v))
            .collect();
        apply_layer(&mut params, &entries)?;
        explicit.extend(entries.into_iter().map(|(k, _)| k));
    }
    let entries = overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    apply_layer(&mut params, &entries)?;
    explicit.extend(entries.into_iter().map(|(k, _)| k));
    params.validate()?;
    Ok(Loaded { params, explicit })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

/// `(key, value)` pairs of every field; floats print in shortest
/// round-trip form.
pub fn entries(p: &SimParams) -> Vec<(&'static str, String)> {
    KEYS.iter()
        .map(|&k| {
            let v = match k {
                "protocol" => p.protocol.to_string(),
                "interference" => p.interference.to_string(),
                "k0" => p.k0.to_string(),
                "activation_prob" => p.activation_prob.to_string(),
                "tau_p" => p.tau_p.to_string(),
                "antennas" => p.antennas.to_string(),
                "max_attempts" => p.max_attempts.to_string(),
                "backoff_window" => p.backoff_window.to_string(),
                "blocks" => p.blocks.to_string(),
                "warmup_blocks" => p.warmup_blocks.to_string(),
                "sigma_beta" => p.sigma_beta.to_string(),
                "dl_power" => opt(p.dl_power),
                "noise_power" => p.noise_power.to_string(),
                "rho_bar" => opt(p.rho_bar),
                "rho_max" => opt(p.rho_max),
                "d_max" => p.d_max.to_string(),
                "d_min" => p.d_min.to_string(),
                "path_loss_log10" => p.path_loss_log10.to_string(),
                "path_loss_exponent" => p.path_loss_exponent.to_string(),
                "shadow_sigma_db" => p.shadow_sigma_db.to_string(),
                "sucre_bias" => opt(p.sucre_bias),
                "omega_bar_samples" => p.omega_bar_samples.to_string(),
                "reference_power_w" => p.reference_power_w.to_string(),
                "seed" => p.seed.to_string(),
                _ => unreachable!("key list and printer disagree"),
            };
            (k, v)
        })
        .collect()
}

/// Config text that [`load_config`] reads back into the same parameters.
pub fn echo(p: &SimParams) -> String {
    entries(p)
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
