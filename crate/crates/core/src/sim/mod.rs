//! Multi-block random access dynamics.

mod engine;
mod episode;
mod metrics;
mod params;
mod sweep;

pub use engine::{
    idealized_resolution, resolve_pilot, run, run_with_observer, BlockStats, PilotContext,
    PilotOutcome,
};
pub use episode::{energy_account, EpisodeState, UeEpisode};
pub use metrics::{DistanceBin, MetricsTable, ResolutionCount};
pub use params::SimParams;
pub use sweep::{derive_seed, sweep, sweep_points, SweepAxis};
