//! Monte Carlo simulation of pilot-based random access in a crowded
//! massive MIMO cell.
//!
//! Three Step-3 collision resolution rules are modelled:
//!
//! - **SUCRe**: strongest-user collision resolution. Every contender
//!   compares its own average received gain against half of the estimated
//!   total received power on its pilot and retransmits only if it is the
//!   strongest.
//! - **ACBPC**: access class barring with power control. Contenders invert
//!   their large-scale fading so every one of them arrives at the base
//!   station with the same average power, which turns the estimated total
//!   into an estimate of the number of contenders. Each contender then
//!   retransmits with probability one over that estimate.
//! - **Baseline**: no collision resolution; a pilot is granted only when a
//!   single device picked it.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: hexagonal layout, device placement, path loss and
//!   shadowing, Rayleigh channel vectors, adjacent-cell interferers.
//! - [`signal`]: post-correlation uplink/downlink observations and the
//!   estimators the devices run on them.
//! - [`protocol`]: power policies and the per-device Step-3 decisions.
//! - [`sim`]: the multi-block random access dynamics and metrics.

pub mod error;
pub mod geometry;
pub mod protocol;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{
    large_scale_gain, perturb_beta, place_ue, spawn_interferers, CellLayout, ChannelVector,
    Interferer, LargeScaleGain, Propagation, UePosition,
};
pub use protocol::{
    acbpc_decide, baseline_decide, p_res_bound, sucre_bias, sucre_decide, tx_power, Action,
    Decision, PowerPolicy, Protocol,
};
pub use signal::{
    downlink_observation, estimate_alpha, estimate_contenders, estimate_omega_bar, gamma_ratio_sq,
    uplink_observation, AlphaEstimate, DecisionInput, PilotObservation, Transmission,
};
pub use sim::{
    derive_seed, energy_account, idealized_resolution, resolve_pilot, run, run_with_observer,
    sweep, sweep_points, BlockStats, DistanceBin, EpisodeState, MetricsTable, PilotContext,
    PilotOutcome, ResolutionCount, SimParams, SweepAxis, UeEpisode,
};
