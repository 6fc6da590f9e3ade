//! Channel application: turns a release schedule into binned absorptions.
//!
//! Every released molecule gets its own first-hitting time (or escapes), so
//! the inter-symbol interference of all earlier releases is included with no
//! memory truncation.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::series::ArrivalSeries;
use crate::brownian::{simulate_first_hits, ParticleSimConfig, DEFAULT_LEAP_SIGMAS};
use crate::channel::{
    fraction_inverse_unchecked, hitting_fraction_unchecked, ChannelGeometry, MoleculeKind, MoleculePair,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::tx::EmissionSchedule;

/// Source of first-hitting times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact inverse-CDF sampling from the closed-form hitting fraction.
    #[default]
    AnalyticSample,
    /// Step-by-step Brownian walkers.
    Particle,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::AnalyticSample => "analytic_sample",
            Backend::Particle => "particle",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic_sample" | "analytic" => Ok(Backend::AnalyticSample),
            "particle" => Ok(Backend::Particle),
            other => Err(Error::invalid(format!("unknown backend `{other}`"))),
        }
    }
}

/// Walker settings for the particle backend. The geometry, diffusion
/// coefficient, molecule count and horizon come from the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleOverrides {
    /// Walker step; defaults to the bin width.
    pub dt: Option<f64>,
    /// `None` disables far-field leaping.
    pub leap_sigmas: Option<f64>,
}

impl Default for ParticleOverrides {
    fn default() -> Self {
        ParticleOverrides {
            dt: None,
            leap_sigmas: Some(DEFAULT_LEAP_SIGMAS),
        }
    }
}

fn grid(
    schedule: &EmissionSchedule,
    geom: &ChannelGeometry,
    specs: &MoleculePair,
    bin_width: f64,
    horizon: f64,
) -> Result<usize> {
    geom.validate()?;
    specs.validate()?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width}")));
    }
    if !horizon.is_finite() || horizon < schedule.end_time() {
        return Err(Error::invalid(format!(
            "horizon {horizon} s ends before the schedule ({} s)",
            schedule.end_time()
        )));
    }
    Ok((horizon / bin_width - 1e-9).ceil().max(0.0) as usize)
}

fn collect(bin_width: f64, n_bins: usize, per_event: Vec<(MoleculeKind, Vec<u32>)>) -> Result<ArrivalSeries> {
    let mut info = Vec::new();
    let mut sync = Vec::new();
    for (kind, bins) in per_event {
        match kind {
            MoleculeKind::Information => info.extend(bins),
            MoleculeKind::Synchronization => sync.extend(bins),
        }
    }
    ArrivalSeries::from_hit_bins(bin_width, n_bins, info, sync)
}

fn bin_of(t: f64, bin_width: f64, n_bins: usize) -> Option<u32> {
    let b = (t / bin_width).floor();
    (b >= 0.0 && (b as usize) < n_bins).then_some(b as u32)
}

/// Samples every molecule's hit time from the closed-form distribution.
///
/// Event `i` of the schedule draws from stream `i` of `seed`.
pub fn synthesize_arrivals(
    schedule: &EmissionSchedule,
    geom: &ChannelGeometry,
    specs: &MoleculePair,
    bin_width: f64,
    horizon: f64,
    seed: u64,
) -> Result<ArrivalSeries> {
    let n_bins = grid(schedule, geom, specs, bin_width, horizon)?;
    let per_event: Vec<(MoleculeKind, Vec<u32>)> = schedule
        .events
        .par_iter()
        .enumerate()
        .map(|(i, ev)| {
            let d = specs.get(ev.kind).diffusion;
            let mut rng = stream_rng(seed, i as u64);
            // anything above this variate lands at or past the horizon
            let u_max = hitting_fraction_unchecked(geom, d, horizon - ev.release_time);
            let mut bins = Vec::new();
            for _ in 0..ev.count {
                let u: f64 = rng.sample(Open01);
                if u >= u_max {
                    continue;
                }
                if let Some(t) = fraction_inverse_unchecked(geom, d, u) {
                    bins.extend(bin_of(ev.release_time + t, bin_width, n_bins));
                }
            }
            (ev.kind, bins)
        })
        .collect();
    collect(bin_width, n_bins, per_event)
}

/// Same contract as [`synthesize_arrivals`] with hit times from the
/// particle engine, one simulation per release event.
pub fn synthesize_arrivals_particle(
    schedule: &EmissionSchedule,
    geom: &ChannelGeometry,
    specs: &MoleculePair,
    bin_width: f64,
    horizon: f64,
    seed: u64,
    overrides: &ParticleOverrides,
) -> Result<ArrivalSeries> {
    let n_bins = grid(schedule, geom, specs, bin_width, horizon)?;
    let dt = overrides.dt.unwrap_or(bin_width);
    let mut per_event = Vec::with_capacity(schedule.events.len());
    for (i, ev) in schedule.events.iter().enumerate() {
        let t_max = horizon - ev.release_time;
        if t_max < dt {
            continue;
        }
        let cfg = ParticleSimConfig {
            geom: *geom,
            diffusion: specs.get(ev.kind).diffusion,
            n_molecules: ev.count as u64,
            dt,
            t_max,
            seed: derive_seed(seed, i as u64),
            leap_sigmas: overrides.leap_sigmas,
        };
        let rec = simulate_first_hits(&cfg)?;
        let bins = rec
            .hit_times
            .iter()
            .filter_map(|h| bin_of(ev.release_time + h, bin_width, n_bins))
            .collect();
        per_event.push((ev.kind, bins));
    }
    collect(bin_width, n_bins, per_event)
}

/// Dispatches to the chosen backend.
pub fn synthesize(
    backend: Backend,
    schedule: &EmissionSchedule,
    geom: &ChannelGeometry,
    specs: &MoleculePair,
    bin_width: f64,
    horizon: f64,
    seed: u64,
) -> Result<ArrivalSeries> {
    match backend {
        Backend::AnalyticSample => synthesize_arrivals(schedule, geom, specs, bin_width, horizon, seed),
        Backend::Particle => synthesize_arrivals_particle(
            schedule,
            geom,
            specs,
            bin_width,
            horizon,
            seed,
            &ParticleOverrides::default(),
        ),
    }
}
