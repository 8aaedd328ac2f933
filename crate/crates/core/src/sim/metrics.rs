use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::Protocol;

use super::params::SimParams;

use super::episode::{EpisodeState, UeEpisode};

/// Width of a distance bin in meters.
pub const BIN_WIDTH_M: f64 = 25.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResolutionCount {
    pub resolved: u64,
    pub total: u64,
}

impl ResolutionCount {
    pub fn probability(&self) -> Option<f64> {
        (self.total > 0).then(|| self.resolved as f64 / self.total as f64)
    }
}

/// Accumulators for devices whose home-BS distance lies in `[lo, hi)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistanceBin {
    pub lo: f64,
    pub hi: f64,
    pub episodes: u64,
    pub failures: u64,
    /// Attempts summed over finished episodes.
    pub attempts: u64,
    /// Transmit energy of finished episodes, normalised by the fixed SUCRe
    /// power (channel uses).
    pub energy_norm: f64,
    /// Pilot transmissions made by devices in this bin.
    pub transmissions: u64,
    /// Transmit power summed over transmissions, normalised by the fixed
    /// SUCRe power.
    pub power_norm: f64,
    /// Transmissions on a pilot with at least two contenders.
    pub collisions: u64,
    /// Collisions this bin's device won.
    pub collision_wins: u64,
}

impl DistanceBin {
    pub fn avg_attempts(&self) -> f64 {
        ratio(self.attempts as f64, self.episodes)
    }

    pub fn fail_prob(&self) -> f64 {
        ratio(self.failures as f64, self.episodes)
    }

    /// Probability of winning a pilot collision.
    pub fn p_res(&self) -> f64 {
        ratio(self.collision_wins as f64, self.collisions)
    }

    pub fn avg_power_norm(&self) -> f64 {
        ratio(self.power_norm, self.transmissions)
    }

    pub fn avg_energy_norm(&self) -> f64 {
        ratio(self.energy_norm, self.episodes)
    }

    fn merge(&mut self, other: &DistanceBin) {
        self.episodes += other.episodes;
        self.failures += other.failures;
        self.attempts += other.attempts;
        self.energy_norm += other.energy_norm;
        self.transmissions += other.transmissions;
        self.power_norm += other.power_norm;
        self.collisions += other.collisions;
        self.collision_wins += other.collision_wins;
    }
}

fn ratio(num: f64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num / den as f64
    }
}

/// Counters for one simulated configuration. Tables of the same
/// configuration from disjoint random streams can be merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub protocol: Protocol,
    pub interference: bool,
    pub k0: usize,
    pub sigma_beta: f64,
    pub reference_power_w: f64,
    pub omega_bar: f64,
    pub tau_p: usize,
    /// Measured blocks.
    pub blocks: u64,
    pub episodes: u64,
    pub successes: u64,
    pub failures: u64,
    pub attempts_all: u64,
    pub attempts_success: u64,
    /// Finished episodes by number of attempts used.
    pub attempts_hist: Vec<u64>,
    /// Pilot resolution indexed by the number of contenders.
    pub by_contenders: Vec<ResolutionCount>,
    pub contenders_sum: u64,
    pub bins: Vec<DistanceBin>,
}

impl MetricsTable {
    /// Empty table labelled with `params`; one bin per 25 m band covering
    /// `[d_min, d_max]`.
    pub fn for_params(params: &SimParams) -> Self {
        let first = (params.d_min / BIN_WIDTH_M).floor() * BIN_WIDTH_M;
        let n_bins = (((params.d_max - first) / BIN_WIDTH_M).ceil() as usize).max(1);
        let bins = (0..n_bins)
            .map(|i| DistanceBin {
                lo: first + i as f64 * BIN_WIDTH_M,
                hi: first + (i + 1) as f64 * BIN_WIDTH_M,
                ..Default::default()
            })
            .collect();
        Self {
            protocol: params.protocol,
            interference: params.interference,
            k0: params.k0,
            sigma_beta: params.sigma_beta,
            reference_power_w: params.reference_power_w,
            omega_bar: 0.0,
            tau_p: params.tau_p,
            blocks: 0,
            episodes: 0,
            successes: 0,
            failures: 0,
            attempts_all: 0,
            attempts_success: 0,
            attempts_hist: vec![0; params.max_attempts as usize + 1],
            by_contenders: Vec::new(),
            contenders_sum: 0,
            bins,
        }
    }

    pub fn bin_index(&self, distance: f64) -> usize {
        let lo = self.bins[0].lo;
        let i = ((distance - lo) / BIN_WIDTH_M).floor();
        (i.max(0.0) as usize).min(self.bins.len() - 1)
    }

    pub(crate) fn record_pilot(&mut self, contenders: usize, resolved: bool) {
        if self.by_contenders.len() <= contenders {
            self.by_contenders
                .resize(contenders + 1, ResolutionCount::default());
        }
        let slot = &mut self.by_contenders[contenders];
        slot.total += 1;
        slot.resolved += u64::from(resolved);
    }

    pub(crate) fn record_transmission(
        &mut self,
        distance: f64,
        power_norm: f64,
        collided: bool,
        won: bool,
    ) {
        let i = self.bin_index(distance);
        let bin = &mut self.bins[i];
        bin.transmissions += 1;
        bin.power_norm += power_norm;
        if collided {
            bin.collisions += 1;
            bin.collision_wins += u64::from(won);
        }
    }

    pub(crate) fn record_episode(&mut self, episode: &UeEpisode, rho_sucre: f64) {
        let attempts = episode.attempts as u64;
        let failed = episode.state == EpisodeState::Failed;
        debug_assert!(episode.is_finished());
        self.episodes += 1;
        self.attempts_all += attempts;
        if failed {
            self.failures += 1;
        } else {
            self.successes += 1;
            self.attempts_success += attempts;
        }
        let a = episode.attempts as usize;
        if self.attempts_hist.len() <= a {
            self.attempts_hist.resize(a + 1, 0);
        }
        self.attempts_hist[a] += 1;

        let i = self.bin_index(episode.position.distance);
        let bin = &mut self.bins[i];
        bin.episodes += 1;
        bin.failures += u64::from(failed);
        bin.attempts += attempts;
        bin.energy_norm += episode.energy / rho_sucre;
    }

    /// Average attempts over all finished episodes; failures count with
    /// the full attempt budget.
    pub fn avg_attempts_all(&self) -> f64 {
        ratio(self.attempts_all as f64, self.episodes)
    }

    pub fn avg_attempts_success(&self) -> f64 {
        ratio(self.attempts_success as f64, self.successes)
    }

    pub fn fail_prob(&self) -> f64 {
        ratio(self.failures as f64, self.episodes)
    }

    /// Average contenders per pilot and block, idle pilots included.
    pub fn avg_contenders(&self) -> f64 {
        ratio(self.contenders_sum as f64, self.blocks * self.tau_p as u64)
    }

    pub fn resolution(&self, contenders: usize) -> ResolutionCount {
        self.by_contenders
            .get(contenders)
            .copied()
            .unwrap_or_default()
    }

    /// Average transmit energy times bandwidth per episode in a bin, in
    /// joule-equivalents of `reference_power_w`.
    pub fn avg_energy_bw(&self, bin: usize) -> f64 {
        self.bins[bin].avg_energy_norm() * self.reference_power_w
    }

    /// Adds the counters of `other`. Labels of `self` are kept.
    pub fn merge(&mut self, other: &MetricsTable) -> Result<()> {
        if self.bins.len() != other.bins.len() {
            return Err(Error::Dimension {
                expected: self.bins.len(),
                actual: other.bins.len(),
            });
        }
        if self.tau_p != other.tau_p {
            return Err(Error::domain(
                "cannot merge tables with different pilot counts",
            ));
        }
        self.blocks += other.blocks;
        self.episodes += other.episodes;
        self.successes += other.successes;
        self.failures += other.failures;
        self.attempts_all += other.attempts_all;
        self.attempts_success += other.attempts_success;
        self.contenders_sum += other.contenders_sum;
        if self.attempts_hist.len() < other.attempts_hist.len() {
            self.attempts_hist.resize(other.attempts_hist.len(), 0);
        }
        for (a, b) in self.attempts_hist.iter_mut().zip(&other.attempts_hist) {
            *a += b;
        }
        if self.by_contenders.len() < other.by_contenders.len() {
            self.by_contenders
                .resize(other.by_contenders.len(), ResolutionCount::default());
        }
        for (a, b) in self.by_contenders.iter_mut().zip(&other.by_contenders) {
            a.resolved += b.resolved;
            a.total += b.total;
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b);
        }
        Ok(())
    }
}
