use crate::error::{Error, Result};
use crate::geometry::{LargeScaleGain, UePosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeState {
    Idle,
    Contending,
    BackingOff,
    Succeeded,
    Failed,
}

/// One activation of a home-cell device, from its first pilot transmission
/// until it is granted access or gives up.
///
/// Position and shadowing are fixed for the whole episode.
#[derive(Debug, Clone, PartialEq)]
pub struct UeEpisode {
    pub position: UePosition,
    pub gain: LargeScaleGain,
    /// Sum of the large-scale gains towards the adjacent base stations.
    pub adjacent_beta_sum: f64,
    /// Pilot transmit power.
    pub power: f64,
    pub attempts: u32,
    /// Remaining blocks to wait while backing off.
    pub backoff: u32,
    /// Transmit energy times bandwidth, in power units times channel uses.
    pub energy: f64,
    pub state: EpisodeState,
}

impl UeEpisode {
    pub fn new(
        position: UePosition,
        gain: LargeScaleGain,
        adjacent_beta_sum: f64,
        power: f64,
    ) -> Self {
        Self {
            position,
            gain,
            adjacent_beta_sum,
            power,
            attempts: 0,
            backoff: 0,
            energy: 0.0,
            state: EpisodeState::Idle,
        }
    }

    pub fn activate(&mut self) {
        debug_assert_eq!(self.state, EpisodeState::Idle);
        self.state = EpisodeState::Contending;
    }

    pub fn is_contending(&self) -> bool {
        self.state == EpisodeState::Contending
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.state, EpisodeState::Succeeded | EpisodeState::Failed)
    }

    pub fn win(&mut self) {
        debug_assert_eq!(self.state, EpisodeState::Contending);
        self.state = EpisodeState::Succeeded;
    }

    /// Unresolved attempt: give up once the budget is spent, otherwise wait
    /// `backoff` blocks.
    pub fn lose(&mut self, max_attempts: u32, backoff: u32) {
        debug_assert_eq!(self.state, EpisodeState::Contending);
        debug_assert!(backoff >= 1);
        if self.attempts >= max_attempts {
            self.state = EpisodeState::Failed;
        } else {
            self.backoff = backoff;
            self.state = EpisodeState::BackingOff;
        }
    }

    /// Advances one block of backoff.
    pub fn tick(&mut self) {
        if self.state == EpisodeState::BackingOff {
            self.backoff -= 1;
            if self.backoff == 0 {
                self.state = EpisodeState::Contending;
            }
        }
    }
}

/// Books one pilot transmission of `power` over `tau_p` channel uses.
pub fn energy_account(episode: &mut UeEpisode, power: f64, tau_p: usize) -> Result<()> {
    if power.is_nan() || power <= 0.0 {
        return Err(Error::domain(format!(
            "transmit power must be positive, got {power}"
        )));
    }
    episode.energy += power * tau_p as f64;
    episode.attempts += 1;
    Ok(())
}
