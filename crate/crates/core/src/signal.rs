//! Physical-layer model of RA Steps 1 and 2.
//!
//! Pilots are orthonormal, so everything is simulated directly in the
//! post-correlation domain: the base station sees one `M`-vector per pilot
//! and each device sees one complex scalar.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{draw_interferer, CellLayout, ChannelVector, Propagation};
use crate::protocol::PowerPolicy;

/// `Re(z)^2` below this is treated as zero.
const RE_Z_SQ_FLOOR: f64 = 1e-30;

fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// One pilot transmission as seen by the home base station.
#[derive(Debug, Clone, Copy)]
pub struct Transmission<'a> {
    pub id: usize,
    pub channel: &'a ChannelVector,
    pub power: f64,
}

/// Correlated uplink signal of one pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub pilot: usize,
    pub tau_p: usize,
    /// Ids of the home-cell devices that sent this pilot.
    pub contenders: Vec<usize>,
    pub y: Vec<Complex64>,
    /// Noise realisation contained in `y`.
    pub noise: Vec<Complex64>,
    /// Sum of average received powers of contenders and interferers.
    pub alpha: f64,
    /// Interference part of `alpha`.
    pub omega: f64,
}

impl PilotObservation {
    pub fn antennas(&self) -> usize {
        self.y.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.y.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// `y_t = sum sqrt(rho * tau_p) h + interference + n`, with `n ~ CN(0, sigma2 I)`.
pub fn uplink_observation<R: Rng + ?Sized>(
    pilot: usize,
    antennas: usize,
    contenders: &[Transmission<'_>],
    interferers: &[Transmission<'_>],
    tau_p: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    if tau_p == 0 {
        return Err(Error::domain("at least one pilot is required"));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); antennas];
    let (mut alpha, mut omega) = (0.0, 0.0);
    for (i, tx) in contenders.iter().chain(interferers).enumerate() {
        if tx.channel.len() != antennas {
            return Err(Error::Dimension {
                expected: antennas,
                actual: tx.channel.len(),
            });
        }
        if tx.power.is_nan() || tx.power <= 0.0 {
            return Err(Error::domain(format!(
                "transmit power must be positive, got {}",
                tx.power
            )));
        }
        let amp = (tx.power * tau_p as f64).sqrt();
        for (acc, h) in y.iter_mut().zip(&tx.channel.entries) {
            *acc += h * amp;
        }
        let received = tx.power * tx.channel.beta * tau_p as f64;
        if i < contenders.len() {
            alpha += received;
        } else {
            omega += received;
        }
    }
    let noise: Vec<Complex64> = (0..antennas)
        .map(|_| complex_gaussian(sigma2, rng))
        .collect();
    for (acc, n) in y.iter_mut().zip(&noise) {
        *acc += n;
    }
    Ok(PilotObservation {
        pilot,
        tau_p,
        contenders: contenders.iter().map(|t| t.id).collect(),
        y,
        noise,
        alpha: alpha + omega,
        omega,
    })
}

/// Scalar a contender obtains after correlating the precoded downlink
/// response with its pilot:
/// `z = sqrt(q tau_p) h^T conj(y) / |y| + nu + eta`.
///
/// `dl_interference_var` is the variance of the adjacent-cell term `nu`.
pub fn downlink_observation<R: Rng + ?Sized>(
    obs: &PilotObservation,
    ue_channel: &ChannelVector,
    q: f64,
    sigma2: f64,
    dl_interference_var: f64,
    rng: &mut R,
) -> Result<Complex64> {
    if ue_channel.len() != obs.antennas() {
        return Err(Error::Dimension {
            expected: obs.antennas(),
            actual: ue_channel.len(),
        });
    }
    let norm = obs.norm_sq().sqrt();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::domain("uplink observation has zero norm"));
    }
    let inner: Complex64 = ue_channel
        .entries
        .iter()
        .zip(&obs.y)
        .map(|(h, y)| h * y.conj())
        .sum();
    let mut z = inner * ((q * obs.tau_p as f64).sqrt() / norm);
    if dl_interference_var > 0.0 {
        z += complex_gaussian(dl_interference_var, rng);
    }
    if sigma2 > 0.0 {
        z += complex_gaussian(sigma2, rng);
    }
    Ok(z)
}

/// `(Gamma(M + 1/2) / Gamma(M))^2`, evaluated through log-gamma.
pub fn gamma_ratio_sq(antennas: usize) -> Result<f64> {
    if antennas == 0 {
        return Err(Error::domain("antenna count must be at least 1"));
    }
    let m = antennas as f64;
    Ok((2.0 * (ln_gamma(m + 0.5) - ln_gamma(m))).exp())
}

/// Everything a contender knows when it takes its Step-3 decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInput {
    pub z: Complex64,
    /// Own pilot transmit power.
    pub power: f64,
    /// Own large-scale gain as known to the device.
    pub beta_known: f64,
    pub tau_p: usize,
    pub q: f64,
    pub sigma2: f64,
    /// Average intercell interference power.
    pub omega_bar: f64,
    /// Target received power of the power-controlled policy.
    pub rho_bar: f64,
    /// SUCRe bias.
    pub bias: f64,
}

impl DecisionInput {
    /// `rho * beta * tau_p` from the device's point of view.
    pub fn own_gain(&self) -> f64 {
        self.power * self.beta_known * self.tau_p as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub value: f64,
    pub gamma_ratio: f64,
    /// `rho * beta * tau_p`; the estimate never drops below it.
    pub floor: f64,
    /// `Re(z)` was numerically zero and the floor was returned.
    pub degenerate: bool,
}

impl AlphaEstimate {
    /// Estimate with a precomputed [`gamma_ratio_sq`].
    pub fn with_ratio(input: &DecisionInput, gamma_ratio: f64) -> Self {
        let floor = input.own_gain();
        let re_sq = input.z.re * input.z.re;
        if re_sq < RE_Z_SQ_FLOOR {
            return Self {
                value: floor,
                gamma_ratio,
                floor,
                degenerate: true,
            };
        }
        let tau = input.tau_p as f64;
        let raw = gamma_ratio * input.q * input.power * input.beta_known.powi(2) * tau * tau
            / re_sq
            - input.sigma2;
        Self {
            value: raw.max(floor),
            gamma_ratio,
            floor,
            degenerate: false,
        }
    }
}

/// Estimate of the total received power on the pilot from `Re(z)`.
pub fn estimate_alpha(input: &DecisionInput, antennas: usize) -> Result<AlphaEstimate> {
    Ok(AlphaEstimate::with_ratio(input, gamma_ratio_sq(antennas)?))
}

/// `max((alpha_hat - omega_bar) / (rho_bar tau_p), 1)`; fractional values
/// are kept.
pub fn estimate_contenders(
    alpha: &AlphaEstimate,
    omega_bar: f64,
    rho_bar: f64,
    tau_p: usize,
) -> f64 {
    ((alpha.value - omega_bar) / (rho_bar * tau_p as f64)).max(1.0)
}

/// Monte Carlo average of the intercell interference power on one pilot.
///
/// Every sample places one device per adjacent cell with fresh shadowing.
pub fn estimate_omega_bar<R: Rng + ?Sized>(
    layout: &CellLayout,
    prop: &Propagation,
    tau_p: usize,
    policy: &PowerPolicy,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::domain("at least one sample is required"));
    }
    if tau_p == 0 {
        return Err(Error::domain("at least one pilot is required"));
    }
    let cells = layout.neighbors().len();
    if cells == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for _ in 0..n_samples {
        for cell in 0..cells {
            total += draw_interferer(layout, cell, 0, policy, prop, rng)?.received(tau_p);
        }
    }
    Ok(total / n_samples as f64)
}

/// Variance of a contender's downlink intercell interference: each
/// adjacent BS sends a unit-norm precoded pilot with power `q`.
pub fn dl_interference_var(
    q: f64,
    tau_p: usize,
    adjacent_betas: impl IntoIterator<Item = f64>,
) -> f64 {
    q * tau_p as f64 * adjacent_betas.into_iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn decision_input(z: f64, power: f64, beta: f64) -> DecisionInput {
        DecisionInput {
            z: Complex64::new(z, 0.3),
            power,
            beta_known: beta,
            tau_p: 10,
            q: 2.0,
            sigma2: 1.0,
            omega_bar: 0.0,
            rho_bar: 1.0,
            bias: 0.0,
        }
    }

    #[test]
    fn noise_only_pilot() {
        let mut r = rng(1);
        let obs = uplink_observation(3, 8, &[], &[], 10, 1.0, &mut r).unwrap();
        assert_eq!(obs.y, obs.noise);
        assert_eq!(obs.alpha, 0.0);
        assert_eq!(obs.omega, 0.0);
        assert!(obs.contenders.is_empty());
    }

    #[test]
    fn single_noiseless_contender() {
        let mut r = rng(2);
        let h = ChannelVector::draw(2.0, 16, &mut r);
        let tx = [Transmission {
            id: 7,
            channel: &h,
            power: 3.0,
        }];
        let obs = uplink_observation(0, 16, &tx, &[], 10, 0.0, &mut r).unwrap();
        assert_relative_eq!(obs.norm_sq(), 30.0 * h.norm_sq(), max_relative = 1e-12);
        assert_relative_eq!(obs.alpha, 60.0, max_relative = 1e-12);
        assert_eq!(obs.contenders, vec![7]);
    }

    #[test]
    fn observation_reconstructs_from_components() {
        let mut r = rng(3);
        let (h1, h2, g) = (
            ChannelVector::draw(1.0, 12, &mut r),
            ChannelVector::draw(0.5, 12, &mut r),
            ChannelVector::draw(0.1, 12, &mut r),
        );
        let contenders = [
            Transmission {
                id: 0,
                channel: &h1,
                power: 2.0,
            },
            Transmission {
                id: 1,
                channel: &h2,
                power: 4.0,
            },
        ];
        let interferers = [Transmission {
            id: 99,
            channel: &g,
            power: 5.0,
        }];
        let obs = uplink_observation(1, 12, &contenders, &interferers, 10, 1.0, &mut r).unwrap();
        for i in 0..12 {
            let rebuilt = h1.entries[i] * 20f64.sqrt()
                + h2.entries[i] * 40f64.sqrt()
                + g.entries[i] * 50f64.sqrt()
                + obs.noise[i];
            assert_relative_eq!((obs.y[i] - rebuilt).norm(), 0.0, epsilon = 1e-12);
        }
        assert_relative_eq!(obs.omega, 5.0, max_relative = 1e-12);
        assert_relative_eq!(obs.alpha, 20.0 + 20.0 + 5.0, max_relative = 1e-12);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mut r = rng(4);
        let h = ChannelVector::draw(1.0, 4, &mut r);
        let tx = [Transmission {
            id: 0,
            channel: &h,
            power: 1.0,
        }];
        assert!(matches!(
            uplink_observation(0, 8, &tx, &[], 10, 1.0, &mut r),
            Err(Error::Dimension {
                expected: 8,
                actual: 4
            })
        ));
        let obs = uplink_observation(0, 8, &[], &[], 10, 1.0, &mut r).unwrap();
        assert!(downlink_observation(&obs, &h, 1.0, 1.0, 0.0, &mut r).is_err());
    }

    #[test]
    fn uplink_energy_per_antenna() {
        // alpha = rho * beta * tau_p = 10, sigma2 = 1.
        let mut r = rng(5);
        let (m, n) = (200, 10_000);
        let mut acc = 0.0;
        for _ in 0..n {
            let h = ChannelVector::draw(1.0, m, &mut r);
            let tx = [Transmission {
                id: 0,
                channel: &h,
                power: 1.0,
            }];
            let obs = uplink_observation(0, m, &tx, &[], 10, 1.0, &mut r).unwrap();
            acc += obs.norm_sq() / m as f64;
        }
        let mean = acc / n as f64;
        assert!((mean - 11.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn silent_bs_leaves_noise() {
        let mut r = rng(6);
        let h = ChannelVector::draw(1.0, 8, &mut r);
        let tx = [Transmission {
            id: 0,
            channel: &h,
            power: 1.0,
        }];
        let obs = uplink_observation(0, 8, &tx, &[], 10, 1.0, &mut r).unwrap();
        let mut twin = r.clone();
        let z = downlink_observation(&obs, &h, 0.0, 1.0, 0.0, &mut r).unwrap();
        assert_eq!(z, complex_gaussian(1.0, &mut twin));
    }

    #[test]
    fn downlink_interference_variance() {
        let mut r = rng(7);
        let h = ChannelVector::draw(1.0, 8, &mut r);
        let tx = [Transmission {
            id: 0,
            channel: &h,
            power: 1.0,
        }];
        let obs = uplink_observation(0, 8, &tx, &[], 10, 1.0, &mut r).unwrap();
        let (x, n) = (3.7, 100_000);
        let samples: Vec<Complex64> = (0..n)
            .map(|_| downlink_observation(&obs, &h, 0.0, 0.0, x, &mut r).unwrap())
            .collect();
        let mean: Complex64 = samples.iter().sum::<Complex64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
        assert!((var - x).abs() / x < 0.02, "{var}");
    }

    #[test]
    fn zero_norm_uplink_is_rejected() {
        let mut r = rng(8);
        let h = ChannelVector::draw(1.0, 4, &mut r);
        let obs = uplink_observation(0, 4, &[], &[], 10, 0.0, &mut r).unwrap();
        assert!(matches!(
            downlink_observation(&obs, &h, 1.0, 1.0, 0.0, &mut r),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gamma_ratio_values() {
        assert_relative_eq!(gamma_ratio_sq(1).unwrap(), PI / 4.0, max_relative = 1e-12);
        // Gamma(2.5) = 3 sqrt(pi) / 4, Gamma(2) = 1.
        let g25 = 3.0 * PI.sqrt() / 4.0;
        assert_relative_eq!(gamma_ratio_sq(2).unwrap(), g25 * g25, max_relative = 1e-12);
        assert_relative_eq!(gamma_ratio_sq(2).unwrap(), 1.767_146, max_relative = 1e-6);
        let g100 = gamma_ratio_sq(100).unwrap();
        assert!(g100 > 99.5 && g100 < 100.0);
        assert!(gamma_ratio_sq(0).is_err());
    }

    #[test]
    fn alpha_floor_engages_for_huge_re_z() {
        let inp = decision_input(1e200, 1.0, 1.0);
        let a = estimate_alpha(&inp, 100).unwrap();
        assert_eq!(a.value, 10.0);
        assert_eq!(a.floor, 10.0);
        assert!(!a.degenerate);
    }

    #[test]
    fn alpha_tie_returns_floor() {
        // Choose Re(z) so that the raw estimate equals the floor exactly:
        // ratio * q * rho * beta^2 * tau^2 / re^2 - sigma2 = rho * beta * tau.
        let ratio = gamma_ratio_sq(1).unwrap();
        let (q, power, beta, tau) = (2.0, 1.0, 1.0, 10.0);
        let floor = power * beta * tau;
        let re = (ratio * q * power * beta * beta * tau * tau / (floor + 1.0)).sqrt();
        let a = estimate_alpha(&decision_input(re, power, beta), 1).unwrap();
        assert_relative_eq!(a.value, floor, max_relative = 1e-12);
    }

    #[test]
    fn alpha_degenerate_re_z() {
        let a = estimate_alpha(&decision_input(0.0, 1.0, 1.0), 100).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.value, a.floor);
    }

    #[test]
    fn alpha_is_consistent_for_many_antennas() {
        let mut r = rng(9);
        let m = 10_000;
        let (power, beta, tau, q, sigma2) = (1.0, 1.0, 10, 1.0, 1.0);
        let ratio = gamma_ratio_sq(m).unwrap();
        let mut errors: Vec<f64> = (0..1000)
            .map(|_| {
                let h = ChannelVector::draw(beta, m, &mut r);
                let tx = [Transmission {
                    id: 0,
                    channel: &h,
                    power,
                }];
                let obs = uplink_observation(0, m, &tx, &[], tau, sigma2, &mut r).unwrap();
                let z = downlink_observation(&obs, &h, q, sigma2, 0.0, &mut r).unwrap();
                let inp = DecisionInput {
                    z,
                    power,
                    beta_known: beta,
                    tau_p: tau,
                    q,
                    sigma2,
                    omega_bar: 0.0,
                    rho_bar: 1.0,
                    bias: 0.0,
                };
                let a = AlphaEstimate::with_ratio(&inp, ratio);
                (a.value / obs.alpha - 1.0).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        assert!(errors[500] < 0.05, "median {}", errors[500]);
    }

    #[test]
    fn contender_estimates() {
        let a = |v: f64| AlphaEstimate {
            value: v,
            gamma_ratio: 1.0,
            floor: 0.0,
            degenerate: false,
        };
        let (omega, rho, tau) = (7.0, 1.0, 10);
        assert_relative_eq!(estimate_contenders(&a(40.0 + omega), omega, rho, tau), 4.0);
        assert_eq!(estimate_contenders(&a(omega), omega, rho, tau), 1.0);
        assert_relative_eq!(estimate_contenders(&a(25.0 + omega), omega, rho, tau), 2.5);
        assert_eq!(estimate_contenders(&a(-5.0), omega, rho, tau), 1.0);
    }

    #[test]
    fn omega_bar_without_neighbours_is_zero() {
        let layout = CellLayout::isolated(250.0, 25.0).unwrap();
        let prop = Propagation::default();
        let policy = PowerPolicy::standard(Protocol::Sucre, 250.0, &prop, 1.0);
        assert_eq!(
            estimate_omega_bar(&layout, &prop, 10, &policy, 100, &mut rng(1)).unwrap(),
            0.0
        );
        assert!(estimate_omega_bar(&layout, &prop, 10, &policy, 0, &mut rng(1)).is_err());
    }

    #[test]
    fn omega_bar_single_sample_is_single_draw() {
        let layout = CellLayout::hexagonal(250.0, 25.0).unwrap();
        let prop = Propagation::default();
        let policy = PowerPolicy::standard(Protocol::Sucre, 250.0, &prop, 1.0);
        let est = estimate_omega_bar(&layout, &prop, 10, &policy, 1, &mut rng(11)).unwrap();
        let mut r = rng(11);
        let direct: f64 = (0..6)
            .map(|c| {
                draw_interferer(&layout, c, 0, &policy, &prop, &mut r)
                    .unwrap()
                    .received(10)
            })
            .sum();
        assert_eq!(est, direct);
    }

    #[test]
    fn omega_bar_is_seed_stable() {
        let layout = CellLayout::hexagonal(250.0, 25.0).unwrap();
        let prop = Propagation::default();
        let policy = PowerPolicy::standard(Protocol::Sucre, 250.0, &prop, 1.0);
        let a = estimate_omega_bar(&layout, &prop, 10, &policy, 100_000, &mut rng(12)).unwrap();
        let b = estimate_omega_bar(&layout, &prop, 10, &policy, 100_000, &mut rng(13)).unwrap();
        assert!(((a - b) / a).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn interference_power_fluctuates() {
        let layout = CellLayout::hexagonal(250.0, 25.0).unwrap();
        let prop = Propagation::default();
        let policy = PowerPolicy::standard(Protocol::Acbpc, 250.0, &prop, 1.0);
        let mut r = rng(14);
        let draws: Vec<f64> = (0..1000)
            .map(|_| estimate_omega_bar(&layout, &prop, 10, &policy, 1, &mut r).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(var > 0.0);
    }

    #[test]
    fn channel_hardening_fixed_gains() {
        let mut r = rng(15);
        for m in [64usize, 256] {
            let trials = 1000;
            let (alpha, sigma2) = (10.0 * (0.4 * 2.0 + 0.2 * 3.0) + 10.0 * 0.05 * 4.0, 1.0);
            let mut acc = 0.0;
            for _ in 0..trials {
                let h1 = ChannelVector::draw(0.4, m, &mut r);
                let h2 = ChannelVector::draw(0.2, m, &mut r);
                let g = ChannelVector::draw(0.05, m, &mut r);
                let c = [
                    Transmission {
                        id: 0,
                        channel: &h1,
                        power: 2.0,
                    },
                    Transmission {
                        id: 1,
                        channel: &h2,
                        power: 3.0,
                    },
                ];
                let i = [Transmission {
                    id: 2,
                    channel: &g,
                    power: 4.0,
                }];
                let obs = uplink_observation(0, m, &c, &i, 10, sigma2, &mut r).unwrap();
                assert_relative_eq!(obs.alpha, alpha, max_relative = 1e-12);
                acc += obs.norm_sq() / m as f64;
            }
            let mean = acc / trials as f64;
            let tol = 3.0 * (alpha + sigma2) / ((m * trials) as f64).sqrt();
            assert!((mean - alpha - sigma2).abs() < tol, "M={m}: {mean}");
        }
    }

    proptest! {
        #[test]
        fn gamma_ratio_bracketed_and_increasing(m in 1usize..5000) {
            let g = gamma_ratio_sq(m).unwrap();
            let next = gamma_ratio_sq(m + 1).unwrap();
            prop_assert!(g > m as f64 - 0.5 && g < m as f64);
            prop_assert!(next > g);
        }

        #[test]
        fn alpha_never_below_floor(
            re in -1e3f64..1e3,
            im in -1e3f64..1e3,
            power in 1e-3f64..1e3,
            beta in 1e-3f64..1e3,
            m in 1usize..512,
        ) {
            let mut inp = decision_input(re, power, beta);
            inp.z.im = im;
            let a = estimate_alpha(&inp, m).unwrap();
            prop_assert!(a.value >= power * beta * 10.0);
        }

        #[test]
        fn noiseless_estimate_recovers_count(n in 1u32..200, omega in 0.0f64..1e3, rho in 0.01f64..100.0) {
            let tau = 10;
            let exact = rho * tau as f64 * n as f64 + omega;
            let a = AlphaEstimate { value: exact, gamma_ratio: 1.0, floor: 0.0, degenerate: false };
            let s = estimate_contenders(&a, omega, rho, tau);
            prop_assert!((s - n as f64).abs() <= 1e-9 * n as f64);
        }
    }
}
