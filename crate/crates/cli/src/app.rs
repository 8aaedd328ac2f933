//! Command implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use acbpc_core::{sweep_points, MetricsTable, Protocol, SimParams};
use anyhow::{bail, Context, Result};

use crate::config::{self, load_config, Loaded};
use crate::output::{self, Manifest, PointRecord};
use crate::preset::{Axes, ExperimentPreset, Family};

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Common {
    fn load(&self, base: SimParams) -> Result<Loaded> {
        let mut sets = self.sets.clone();
        if let Some(seed) = self.seed {
            sets.push(format!("seed={seed}"));
        }
        let loaded = load_config(base, self.config.as_deref(), &sets)?;
        eprintln!(
            "# effective configuration\n{}",
            config::echo(&loaded.params)
        );
        Ok(loaded)
    }
}

/// Which families to write for a set of simulated tables.
fn write_tables(
    dir: &Path,
    tables: &[MetricsTable],
    families: &[Family],
    manifest: &mut Manifest,
) -> Result<()> {
    for family in families {
        let name = match family {
            Family::AttemptsVsK0 => {
                output::write_csv(
                    &dir.join(output::ATTEMPTS_CSV),
                    &output::attempts_rows(tables),
                )?;
                output::ATTEMPTS_CSV
            }
            Family::ResVsSt => {
                output::write_csv(&dir.join(output::RES_CSV), &output::res_rows(tables)?)?;
                output::RES_CSV
            }
            Family::DistPerf => {
                let pooled = output::pool(tables)?;
                if pooled.len() != tables.len() {
                    eprintln!("skipping {}: several loads per protocol", output::DIST_CSV);
                    continue;
                }
                output::write_csv(&dir.join(output::DIST_CSV), &output::dist_rows(tables))?;
                output::DIST_CSV
            }
            Family::Bound => continue,
        };
        manifest.files.push(name.to_string());
    }
    Ok(())
}

fn simulate(
    command: &str,
    common: &Common,
    loaded: &Loaded,
    points: Vec<(String, SimParams)>,
    families: &[Family],
) -> Result<PathBuf> {
    if points.is_empty() {
        bail!("nothing to simulate");
    }
    let started_at = chrono::Local::now();
    let clock = Instant::now();
    let dir = output::create_run_dir(&common.out, command)?;
    std::fs::write(dir.join(output::CONFIG_ECHO), config::echo(&loaded.params))
        .with_context(|| format!("writing {}", dir.join(output::CONFIG_ECHO).display()))?;
    let mut manifest = Manifest::new(command, &loaded.params, started_at);
    manifest.files.push(output::CONFIG_ECHO.to_string());

    eprintln!("simulating {} point(s)", points.len());
    let tables = sweep_points(&points, common.workers)?;
    write_tables(&dir, &tables, families, &mut manifest)?;
    manifest.points = points
        .into_iter()
        .zip(&tables)
        .map(|((label, params), t)| PointRecord {
            label,
            params,
            omega_bar: t.omega_bar,
            episodes: t.episodes,
        })
        .collect();
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    Ok(dir)
}

const ALL_FAMILIES: [Family; 3] = [Family::AttemptsVsK0, Family::ResVsSt, Family::DistPerf];

/// One configuration.
pub fn run(common: &Common) -> Result<PathBuf> {
    let loaded = common.load(SimParams::default())?;
    let points = vec![("run".to_string(), loaded.params.clone())];
    simulate("run", common, &loaded, points, &ALL_FAMILIES)
}

fn or_single<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

/// Cartesian sweep over loads, protocols and interference settings. Empty
/// lists fall back to the configured single value.
pub fn sweep(
    common: &Common,
    k0: &[usize],
    protocols: &[Protocol],
    interference: &[bool],
) -> Result<PathBuf> {
    let loaded = common.load(SimParams::default())?;
    let axes = Axes {
        protocols: or_single(protocols, loaded.params.protocol),
        interference: or_single(interference, loaded.params.interference),
        k0: or_single(k0, loaded.params.k0),
    };
    let points = axes.points(&loaded.params, None);
    simulate("sweep", common, &loaded, points, &ALL_FAMILIES)
}

pub fn preset(common: &Common, preset: ExperimentPreset) -> Result<PathBuf> {
    if preset == ExperimentPreset::BoundTable {
        return bound(common, 50, 100_000);
    }
    let loaded = common.load(preset.base())?;
    let points = preset.points(&loaded);
    simulate(preset.name(), common, &loaded, points, &[preset.family()])
}

/// Bound table next to the idealized retransmission frequency.
pub fn bound(common: &Common, max_n: usize, trials: u64) -> Result<PathBuf> {
    if max_n == 0 || trials == 0 {
        bail!("max contender count and trial count must be positive");
    }
    let loaded = common.load(SimParams::default())?;
    let started_at = chrono::Local::now();
    let clock = Instant::now();
    let dir = output::create_run_dir(&common.out, "bound")?;
    let rows = output::bound_rows(max_n, trials, loaded.params.seed)?;
    output::write_csv(&dir.join(output::BOUND_CSV), &rows)?;
    let mut manifest = Manifest::new("bound", &loaded.params, started_at);
    manifest.files.push(output::BOUND_CSV.to_string());
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    Ok(dir)
}
