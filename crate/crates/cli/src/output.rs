//! CSV result files, the run manifest and output directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use acbpc_core::{idealized_resolution, p_res_bound, MetricsTable, Protocol, SimParams};
use serde::Serialize;

use crate::config;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Sim(#[from] acbpc_core::Error),
}

pub const ATTEMPTS_CSV: &str = "attempts_vs_k0.csv";
pub const RES_CSV: &str = "res_vs_st.csv";
pub const DIST_CSV: &str = "dist_perf.csv";
pub const BOUND_CSV: &str = "bound.csv";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.txt";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptsRow {
    pub protocol: Protocol,
    pub interference: bool,
    #[serde(rename = "K0")]
    pub k0: usize,
    pub avg_attempts_all: f64,
    pub avg_attempts_success: f64,
    pub fail_prob: f64,
    pub avg_contenders: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResRow {
    pub protocol: Protocol,
    pub interference: bool,
    pub st: usize,
    pub p_res: f64,
    pub n_samples: u64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistRow {
    pub protocol: Protocol,
    pub interference: bool,
    pub bin_lo_m: f64,
    pub bin_hi_m: f64,
    pub avg_attempts: f64,
    pub fail_prob: f64,
    pub p_res: f64,
    pub avg_power_norm: f64,
    pub avg_energy_bw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub st: usize,
    pub bound: f64,
    pub p_idealized: f64,
    pub n_idealized: u64,
}

pub fn attempts_rows(tables: &[MetricsTable]) -> Vec<AttemptsRow> {
    tables
        .iter()
        .map(|t| AttemptsRow {
            protocol: t.protocol,
            interference: t.interference,
            k0: t.k0,
            avg_attempts_all: t.avg_attempts_all(),
            avg_attempts_success: t.avg_attempts_success(),
            fail_prob: t.fail_prob(),
            avg_contenders: t.avg_contenders(),
        })
        .collect()
}

/// Pools tables by `(protocol, interference)` in first-seen order.
pub fn pool(tables: &[MetricsTable]) -> Result<Vec<MetricsTable>, OutputError> {
    let mut out: Vec<MetricsTable> = Vec::new();
    for t in tables {
        match out
            .iter_mut()
            .find(|o| o.protocol == t.protocol && o.interference == t.interference)
        {
            Some(o) => o.merge(t)?,
            None => out.push(t.clone()),
        }
    }
    Ok(out)
}

/// Resolution against the number of contenders, pooled over loads. Sizes
/// never observed are skipped.
pub fn res_rows(tables: &[MetricsTable]) -> Result<Vec<ResRow>, OutputError> {
    let mut rows = Vec::new();
    for t in pool(tables)? {
        for (st, c) in t.by_contenders.iter().enumerate().skip(1) {
            if c.total == 0 {
                continue;
            }
            rows.push(ResRow {
                protocol: t.protocol,
                interference: t.interference,
                st,
                p_res: c.probability().unwrap_or(f64::NAN),
                n_samples: c.total,
                bound: p_res_bound(st as u64)?,
            });
        }
    }
    Ok(rows)
}

pub fn dist_rows(tables: &[MetricsTable]) -> Vec<DistRow> {
    let mut rows = Vec::new();
    for t in tables {
        for (i, b) in t.bins.iter().enumerate() {
            rows.push(DistRow {
                protocol: t.protocol,
                interference: t.interference,
                bin_lo_m: b.lo,
                bin_hi_m: b.hi,
                avg_attempts: b.avg_attempts(),
                fail_prob: b.fail_prob(),
                p_res: b.p_res(),
                avg_power_norm: b.avg_power_norm(),
                avg_energy_bw: t.avg_energy_bw(i),
            });
        }
    }
    rows
}

/// Exact bound next to the frequency observed when every device knows the
/// contender count exactly.
pub fn bound_rows(max_n: usize, trials: u64, seed: u64) -> Result<Vec<BoundRow>, OutputError> {
    (1..=max_n)
        .map(|st| {
            let c = idealized_resolution(st, trials, acbpc_core::derive_seed(seed, st as u64))?;
            Ok(BoundRow {
                st,
                bound: p_res_bound(st as u64)?,
                p_idealized: c.probability().unwrap_or(f64::NAN),
                n_idealized: c.total,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Creates `<out>/<timestamp>-<name>`, adding a numeric suffix instead of
/// reusing an existing directory.
pub fn create_run_dir(out: &Path, name: &str) -> Result<PathBuf, OutputError> {
    let io = |path: &Path, source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let stem = format!(
        "{}-{name}",
        chrono::Local::now().format("%Y%m%dT%H%M%S%.3f")
    );
    for n in 0u32.. {
        let dir = if n == 0 {
            out.join(&stem)
        } else {
            out.join(format!("{stem}-{n}"))
        };
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io(&dir, e)),
        }
    }
    unreachable!("suffix space exhausted")
}

/// Package version with the `git describe` of the build tree when known.
pub fn version() -> &'static str {
    static VERSION: OnceLock<String> = OnceLock::new();
    VERSION.get_or_init(|| match option_env!("ACBPC_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("{} ({d})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub label: String,
    pub params: SimParams,
    pub omega_bar: f64,
    pub episodes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration before the sweep axes are applied.
    pub config: BTreeMap<String, String>,
    pub points: Vec<PointRecord>,
    pub files: Vec<String>,
    pub started_at: String,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(
        command: &str,
        params: &SimParams,
        started_at: chrono::DateTime<chrono::Local>,
    ) -> Self {
        Self {
            version: version().to_string(),
            command: command.to_string(),
            seed: params.seed,
            config: config::entries(params)
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            points: Vec::new(),
            files: Vec::new(),
            started_at: started_at.to_rfc3339(),
            wall_time_s: 0.0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(self).map_err(|source| OutputError::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, text).map_err(|source| OutputError::Io { path, source })
    }
}
