//! Cell layout, device placement and channel generation.
//!
//! The home cell is a regular hexagon centred on its base station at the
//! origin, with its vertices on the x axis (flat top). Adjacent cells tile
//! the plane around it at an inter-site distance of `sqrt(3) * d_max`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::PowerPolicy;

const MAX_REJECTIONS: usize = 1_000_000;

/// Hexagonal cell geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLayout {
    d_max: f64,
    d_min: f64,
    neighbors: Vec<(f64, f64)>,
}

impl CellLayout {
    /// Home cell surrounded by its six first-tier neighbours.
    pub fn hexagonal(d_max: f64, d_min: f64) -> Result<Self> {
        let mut layout = Self::isolated(d_max, d_min)?;
        let isd = 3f64.sqrt() * d_max;
        layout.neighbors = (0..6)
            .map(|k| {
                let angle = PI / 6.0 + k as f64 * PI / 3.0;
                (isd * angle.cos(), isd * angle.sin())
            })
            .collect();
        Ok(layout)
    }

    /// A single cell without neighbours (no intercell interference).
    pub fn isolated(d_max: f64, d_min: f64) -> Result<Self> {
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(Error::domain(format!(
                "d_max must be positive, got {d_max}"
            )));
        }
        if !(d_min >= 0.0 && d_min < d_max) {
            return Err(Error::domain(format!(
                "d_min must lie in [0, d_max), got {d_min} with d_max = {d_max}"
            )));
        }
        Ok(Self {
            d_max,
            d_min,
            neighbors: Vec::new(),
        })
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    /// Centres of the adjacent base stations, relative to the home BS.
    pub fn neighbors(&self) -> &[(f64, f64)] {
        &self.neighbors
    }

    pub fn apothem(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.d_max
    }

    /// Whether a point given relative to a cell centre lies inside the hexagon.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let a = self.apothem();
        let (x, y) = (x.abs(), y.abs());
        y <= a && 0.5 * 3f64.sqrt() * x + 0.5 * y <= a
    }

    /// Uniform point in the hexagon around a cell centre, at least `d_min`
    /// from that centre. Coordinates are relative to the centre.
    fn sample_local<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let a = self.apothem();
        for _ in 0..MAX_REJECTIONS {
            let x = rng.random_range(-self.d_max..=self.d_max);
            let y = rng.random_range(-a..=a);
            if self.contains(x, y) && x.hypot(y) >= self.d_min {
                return Ok((x, y));
            }
        }
        Err(Error::Internal(format!(
            "placement rejected {MAX_REJECTIONS} consecutive samples"
        )))
    }
}

/// Location of a home-cell device and its distances to every base station.
#[derive(Debug, Clone, PartialEq)]
pub struct UePosition {
    pub x: f64,
    pub y: f64,
    /// Distance to the home base station in meters.
    pub distance: f64,
    /// Distances to the adjacent base stations, in the layout's order.
    pub adjacent_distances: Vec<f64>,
}

impl UePosition {
    pub fn new(layout: &CellLayout, x: f64, y: f64) -> Self {
        let adjacent_distances = layout
            .neighbors()
            .iter()
            .map(|&(cx, cy)| (x - cx).hypot(y - cy))
            .collect();
        Self {
            x,
            y,
            distance: x.hypot(y),
            adjacent_distances,
        }
    }
}

/// Draws a device uniformly over the home hexagon, excluding the disc of
/// radius `d_min` around the base station.
pub fn place_ue<R: Rng + ?Sized>(layout: &CellLayout, rng: &mut R) -> Result<UePosition> {
    let (x, y) = layout.sample_local(rng)?;
    Ok(UePosition::new(layout, x, y))
}

/// Path loss and log-normal shadowing: `beta = d_bar * d^(-exponent) * chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub d_bar: f64,
    pub exponent: f64,
    pub shadow_sigma_db: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            d_bar: 10f64.powf(-3.53),
            exponent: 3.8,
            shadow_sigma_db: 8.0,
        }
    }
}

impl Propagation {
    /// Median gain at distance `d`, without shadowing.
    pub fn path_gain(&self, d: f64) -> f64 {
        self.d_bar * d.powf(-self.exponent)
    }
}

/// Large-scale fading of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleGain {
    pub distance: f64,
    /// Shadowing multiplier.
    pub chi: f64,
    /// True gain.
    pub beta: f64,
    /// Gain as known to the device. Equals `beta` unless perturbed.
    pub beta_known: f64,
}

impl LargeScaleGain {
    /// Gain for a given distance and shadowing realisation.
    pub fn with_shadowing(distance: f64, chi: f64, prop: &Propagation) -> Result<Self> {
        if distance.is_nan() || distance <= 0.0 {
            return Err(Error::domain(format!(
                "distance must be positive, got {distance}"
            )));
        }
        let beta = prop.path_gain(distance) * chi;
        Ok(Self {
            distance,
            chi,
            beta,
            beta_known: beta,
        })
    }
}

/// Draws the shadowing for a link of length `d` and returns its gain.
pub fn large_scale_gain<R: Rng + ?Sized>(
    d: f64,
    prop: &Propagation,
    rng: &mut R,
) -> Result<LargeScaleGain> {
    let chi = if prop.shadow_sigma_db == 0.0 {
        1.0
    } else {
        let z: f64 = rng.sample(StandardNormal);
        10f64.powf(prop.shadow_sigma_db * z / 10.0)
    };
    LargeScaleGain::with_shadowing(d, chi, prop)
}

/// Imperfect knowledge of the gain: `beta' = phi * beta` with
/// `phi ~ N(1, sigma_beta^2)`, redrawn while `phi <= 0`.
pub fn perturb_beta<R: Rng + ?Sized>(
    gain: LargeScaleGain,
    sigma_beta: f64,
    rng: &mut R,
) -> Result<LargeScaleGain> {
    if !(sigma_beta >= 0.0 && sigma_beta.is_finite()) {
        return Err(Error::domain(format!(
            "sigma_beta must be non-negative, got {sigma_beta}"
        )));
    }
    if sigma_beta == 0.0 {
        return Ok(LargeScaleGain {
            beta_known: gain.beta,
            ..gain
        });
    }
    let phi = loop {
        let z: f64 = rng.sample(StandardNormal);
        let phi = 1.0 + sigma_beta * z;
        if phi > 0.0 {
            break phi;
        }
    };
    Ok(LargeScaleGain {
        beta_known: phi * gain.beta,
        ..gain
    })
}

/// Small-scale fading scaled by the large-scale gain: `h = sqrt(beta) * g`,
/// `g ~ CN(0, I_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub beta: f64,
    pub entries: Vec<Complex64>,
}

impl ChannelVector {
    pub fn draw<R: Rng + ?Sized>(beta: f64, antennas: usize, rng: &mut R) -> Self {
        let scale = beta.sqrt() * FRAC_1_SQRT_2;
        let entries = (0..antennas)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(scale * re, scale * im)
            })
            .collect();
        Self { beta, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// A device of an adjacent cell transmitting an RA pilot in the same block.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferer {
    /// Index into [`CellLayout::neighbors`].
    pub cell: usize,
    /// Zero-based pilot index.
    pub pilot: usize,
    /// Gain towards the home base station.
    pub gain_home: LargeScaleGain,
    /// Gain towards its own base station.
    pub gain_own: LargeScaleGain,
    pub power: f64,
}

impl Interferer {
    /// Average received power at the home BS after pilot correlation.
    pub fn received(&self, tau_p: usize) -> f64 {
        self.power * self.gain_home.beta * tau_p as f64
    }
}

pub(crate) fn draw_interferer<R: Rng + ?Sized>(
    layout: &CellLayout,
    cell: usize,
    pilot: usize,
    policy: &PowerPolicy,
    prop: &Propagation,
    rng: &mut R,
) -> Result<Interferer> {
    let (cx, cy) = layout.neighbors()[cell];
    let (lx, ly) = layout.sample_local(rng)?;
    let gain_own = large_scale_gain(lx.hypot(ly), prop, rng)?;
    let gain_home = large_scale_gain((cx + lx).hypot(cy + ly), prop, rng)?;
    let power = policy.tx_power(gain_own.beta)?;
    Ok(Interferer {
        cell,
        pilot,
        gain_home,
        gain_own,
        power,
    })
}

/// One active device per pilot in every adjacent cell. Each device runs
/// `policy` against its own base station.
pub fn spawn_interferers<R: Rng + ?Sized>(
    layout: &CellLayout,
    tau_p: usize,
    policy: &PowerPolicy,
    prop: &Propagation,
    rng: &mut R,
) -> Result<Vec<Interferer>> {
    if tau_p == 0 {
        return Err(Error::domain("at least one pilot is required"));
    }
    let mut out = Vec::with_capacity(layout.neighbors().len() * tau_p);
    let mut pilots: Vec<usize> = (0..tau_p).collect();
    for cell in 0..layout.neighbors().len() {
        pilots.shuffle(rng);
        for &pilot in &pilots {
            out.push(draw_interferer(layout, cell, pilot, policy, prop, rng)?);
        }
    }
    Ok(out)
}
