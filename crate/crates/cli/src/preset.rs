//! Named experiments. Each preset is a parameter template plus the axes it
//! sweeps; explicitly set keys collapse the matching axis.

use std::fmt;
use std::str::FromStr;

use acbpc_core::{derive_seed, Protocol, SimParams};

use crate::config::Loaded;

/// Measured episodes per point when `blocks` is not set explicitly.
pub const DEFAULT_EPISODES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentPreset {
    Fig1Attempts,
    Fig1Failures,
    Fig2aResVsSt,
    Fig2bResVsDist,
    Fig3DistPerformance,
    Fig4PowerEnergy,
    BoundTable,
}

/// Which result file a preset produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    AttemptsVsK0,
    ResVsSt,
    DistPerf,
    Bound,
}

impl ExperimentPreset {
    pub const ALL: [ExperimentPreset; 7] = [
        Self::Fig1Attempts,
        Self::Fig1Failures,
        Self::Fig2aResVsSt,
        Self::Fig2bResVsDist,
        Self::Fig3DistPerformance,
        Self::Fig4PowerEnergy,
        Self::BoundTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1Attempts => "fig1-attempts",
            Self::Fig1Failures => "fig1-failures",
            Self::Fig2aResVsSt => "fig2a-res-vs-st",
            Self::Fig2bResVsDist => "fig2b-res-vs-dist",
            Self::Fig3DistPerformance => "fig3-dist-performance",
            Self::Fig4PowerEnergy => "fig4-power-energy",
            Self::BoundTable => "bound-table",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Self::Fig1Attempts | Self::Fig1Failures => Family::AttemptsVsK0,
            Self::Fig2aResVsSt => Family::ResVsSt,
            Self::Fig2bResVsDist | Self::Fig3DistPerformance | Self::Fig4PowerEnergy => {
                Family::DistPerf
            }
            Self::BoundTable => Family::Bound,
        }
    }

    /// Points to simulate for a loaded configuration. Block counts are
    /// sized to [`DEFAULT_EPISODES`] unless `blocks` was set.
    pub fn points(self, loaded: &Loaded) -> Vec<(String, SimParams)> {
        let target = (!loaded.is_set("blocks")).then_some(DEFAULT_EPISODES);
        self.axes().restrict(loaded).points(&loaded.params, target)
    }

    /// Template the overrides are laid on.
    pub fn base(self) -> SimParams {
        SimParams::default()
    }

    /// Sweep axes before user overrides.
    pub fn axes(self) -> Axes {
        let both = vec![Protocol::Sucre, Protocol::Acbpc];
        match self {
            Self::Fig1Attempts | Self::Fig1Failures => Axes {
                protocols: Protocol::ALL.to_vec(),
                interference: vec![true, false],
                k0: (1..=28).map(|i| i * 1000).collect(),
            },
            Self::Fig2aResVsSt => Axes {
                protocols: both,
                interference: vec![true, false],
                k0: vec![5_000, 15_000],
            },
            Self::Fig2bResVsDist | Self::Fig3DistPerformance | Self::Fig4PowerEnergy => Axes {
                protocols: both,
                interference: vec![true],
                k0: vec![15_000],
            },
            Self::BoundTable => Axes {
                protocols: Vec::new(),
                interference: Vec::new(),
                k0: Vec::new(),
            },
        }
    }
}

impl fmt::Display for ExperimentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset `{s}`; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub protocols: Vec<Protocol>,
    pub interference: Vec<bool>,
    pub k0: Vec<usize>,
}

impl Axes {
    /// Replaces an axis by the single configured value when the user set
    /// the corresponding key.
    pub fn restrict(mut self, loaded: &Loaded) -> Self {
        if loaded.is_set("protocol") {
            self.protocols = vec![loaded.params.protocol];
        }
        if loaded.is_set("interference") {
            self.interference = vec![loaded.params.interference];
        }
        if loaded.is_set("k0") {
            self.k0 = vec![loaded.params.k0];
        }
        self
    }

    /// One parameter set per axis combination, protocol-major. Seeds are
    /// derived from the configured seed. With `target_episodes` the block
    /// count of every point is sized to its load.
    pub fn points(
        &self,
        base: &SimParams,
        target_episodes: Option<usize>,
    ) -> Vec<(String, SimParams)> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &interference in &self.interference {
                for &k0 in &self.k0 {
                    let mut p = SimParams {
                        protocol,
                        interference,
                        k0,
                        ..base.clone()
                    };
                    if let Some(e) = target_episodes {
                        p = p.with_target_episodes(e);
                    }
                    p.seed = derive_seed(base.seed, out.len() as u64);
                    out.push((format!("{protocol} interference={interference} k0={k0}"), p));
                }
            }
        }
        out
    }
}
