use rayon::prelude::*;

use crate::error::{Error, Result};

use super::engine::run;
use super::metrics::MetricsTable;
use super::params::SimParams;

/// What varies across the points of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Number of inactive devices.
    K0(Vec<usize>),
    /// Independent replicas of the base configuration; their tables can be
    /// merged.
    Replicas(usize),
    /// Arbitrary labelled configurations, run with their own seeds.
    Points(Vec<(String, SimParams)>),
}

impl SweepAxis {
    pub fn expand(&self, base: &SimParams) -> Vec<(String, SimParams)> {
        match self {
            SweepAxis::K0(values) => values
                .iter()
                .enumerate()
                .map(|(i, &k0)| {
                    let p = SimParams {
                        k0,
                        seed: derive_seed(base.seed, i as u64),
                        ..base.clone()
                    };
                    (format!("k0={k0}"), p)
                })
                .collect(),
            SweepAxis::Replicas(n) => (0..*n)
                .map(|i| {
                    let p = SimParams {
                        seed: derive_seed(base.seed, i as u64),
                        ..base.clone()
                    };
                    (format!("replica={i}"), p)
                })
                .collect(),
            SweepAxis::Points(points) => points.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SweepAxis::K0(v) => v.is_empty(),
            SweepAxis::Replicas(n) => *n == 0,
            SweepAxis::Points(p) => p.is_empty(),
        }
    }
}

/// Seed of the `index`-th point. Index 0 keeps the base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs every axis point, on up to `workers` threads, and returns the
/// tables in axis order.
pub fn sweep(
    base: &SimParams,
    axis: &SweepAxis,
    workers: Option<usize>,
) -> Result<Vec<MetricsTable>> {
    if axis.is_empty() {
        return Err(Error::domain("sweep axis is empty"));
    }
    sweep_points(&axis.expand(base), workers)
}

pub fn sweep_points(
    points: &[(String, SimParams)],
    workers: Option<usize>,
) -> Result<Vec<MetricsTable>> {
    let job = || {
        points
            .par_iter()
            .map(|(label, p)| {
                run(p).map_err(|e| Error::Point {
                    label: label.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Pool(e.to_string()))?
            .install(job),
        None => job(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;

    fn base() -> SimParams {
        SimParams {
            protocol: Protocol::Sucre,
            k0: 3000,
            omega_bar_samples: 5000,
            ..SimParams::default()
        }
        .with_blocks(600)
    }

    #[test]
    fn one_table_per_point_in_order() {
        let axis = SweepAxis::K0(vec![1000, 2000, 3000]);
        let tables = sweep(&base(), &axis, Some(2)).unwrap();
        assert_eq!(
            tables.iter().map(|t| t.k0).collect::<Vec<_>>(),
            vec![1000, 2000, 3000]
        );
    }

    #[test]
    fn single_point_matches_run() {
        let b = base();
        let tables = sweep(&b, &SweepAxis::K0(vec![b.k0]), None).unwrap();
        assert_eq!(tables, vec![run(&b).unwrap()]);
    }

    #[test]
    fn sweeps_are_reproducible() {
        let axis = SweepAxis::Replicas(3);
        assert_eq!(
            sweep(&base(), &axis, Some(3)).unwrap(),
            sweep(&base(), &axis, Some(1)).unwrap()
        );
    }

    #[test]
    fn errors_carry_the_label() {
        let bad = SimParams {
            activation_prob: 0.0,
            ..base()
        };
        let err = sweep_points(&[("broken".into(), bad)], None).unwrap_err();
        assert!(err.to_string().contains("broken"));
        assert!(sweep(&base(), &SweepAxis::K0(vec![]), None).is_err());
    }

    #[test]
    fn replicas_merge() {
        let tables = sweep(&base(), &SweepAxis::Replicas(2), None).unwrap();
        let mut merged = tables[0].clone();
        merged.merge(&tables[1]).unwrap();
        assert_eq!(merged.episodes, tables[0].episodes + tables[1].episodes);
    }
}
