//! Particle-level Monte Carlo of Brownian molecules around an absorbing
//! sphere.
//!
//! Each molecule starts on the +z axis at distance `d + r` from the sphere
//! centre and moves with independent Gaussian increments of variance `2·D·dt`
//! per axis. Absorption is tested at step endpoints only and the hit is
//! stamped with the end time of that step.
//!
//! Far from the sphere a walker may take `m` steps at once (one Gaussian
//! increment of variance `2·D·dt·m`). `m` is chosen so that reaching the
//! sphere inside the leap would need a `leap_sigmas`-sigma excursion; the
//! leap lands on the same dt grid, so hit times keep the step-end convention.
//! A walker whose gap to the sphere cannot be closed within the remaining
//! horizon at that same confidence is retired as never-hit.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{check_diffusion, ChannelGeometry};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const DEFAULT_LEAP_SIGMAS: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSimConfig {
    pub geom: ChannelGeometry,
    pub diffusion: f64,
    pub n_molecules: u64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Far-field leap confidence in standard deviations; `None` forces
    /// single steps everywhere.
    pub leap_sigmas: Option<f64>,
}

impl ParticleSimConfig {
    pub fn new(geom: ChannelGeometry, diffusion: f64, n_molecules: u64, dt: f64, t_max: f64, seed: u64) -> Self {
        ParticleSimConfig {
            geom,
            diffusion,
            n_molecules,
            dt,
            t_max,
            seed,
            leap_sigmas: Some(DEFAULT_LEAP_SIGMAS),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geom.validate()?;
        check_diffusion(self.diffusion)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return Err(Error::invalid(format!(
                "t_max ({}) must be >= dt ({})",
                self.t_max, self.dt
            )));
        }
        if self.n_molecules == 0 {
            return Err(Error::invalid("n_molecules must be >= 1"));
        }
        let step = self.step_sigma();
        if step > self.geom.radius / 4.0 {
            return Err(Error::invalid(format!(
                "step scale sqrt(2·D·dt) = {step:.4} µm exceeds r/4 = {:.4} µm; reduce dt",
                self.geom.radius / 4.0
            )));
        }
        if let Some(c) = self.leap_sigmas {
            if !(c.is_finite() && c >= 3.0) {
                return Err(Error::invalid(format!("leap_sigmas must be >= 3, got {c}")));
            }
        }
        Ok(())
    }

    /// Per-axis displacement standard deviation of one step.
    pub fn step_sigma(&self) -> f64 {
        (2.0 * self.diffusion * self.dt).sqrt()
    }

    pub fn n_steps(&self) -> u64 {
        // tolerate t_max values that are a whole number of steps up to rounding
        (self.t_max / self.dt * (1.0 + 1e-12)).floor() as u64
    }
}

/// Sorted absorption times of the molecules that hit before `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HitRecord {
    pub hit_times: Vec<f64>,
    pub n_released: u64,
}

impl HitRecord {
    pub fn hit_fraction(&self) -> f64 {
        self.hit_times.len() as f64 / self.n_released as f64
    }

    /// Writes the hit times as a one-column CSV with header `hit_time_s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, |w| self.write_csv_to(w))
    }

    pub fn write_csv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "hit_time_s")?;
        for t in &self.hit_times {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }
}

/// Simulates every molecule of `cfg` and returns the absorbed ones.
///
/// Molecule `i` draws from stream `i` of the seed, so the result does not
/// depend on how molecules are split across threads.
pub fn simulate_first_hits(cfg: &ParticleSimConfig) -> Result<HitRecord> {
    cfg.validate()?;
    let steps = cfg.n_steps();
    let mut hit_steps: Vec<u64> = (0..cfg.n_molecules)
        .into_par_iter()
        .filter_map(|i| walk(cfg, steps, i))
        .collect();
    hit_steps.sort_unstable();
    Ok(HitRecord {
        hit_times: hit_steps.into_iter().map(|s| s as f64 * cfg.dt).collect(),
        n_released: cfg.n_molecules,
    })
}

/// Runs molecule `index` and returns its absorbing step count, if any.
fn walk(cfg: &ParticleSimConfig, n_steps: u64, index: u64) -> Option<u64> {
    let mut rng = stream_rng(cfg.seed, index);
    let r = cfg.geom.radius;
    let r2 = r * r;
    let sigma = cfg.step_sigma();
    let mut pos = [0.0, 0.0, cfg.geom.center_distance()];
    let mut step = 0_u64;
    // an excursion of `c` sigma per axis in each coordinate covers √3·c·σ in space
    let leap_scale = cfg.leap_sigmas.map(|c| c * sigma * 3f64.sqrt());

    while step < n_steps {
        let mut m = 1_u64;
        if let Some(scale) = leap_scale {
            let rho = (pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt();
            let gap = rho - r;
            let remaining = n_steps - step;
            if gap > scale * (remaining as f64).sqrt() {
                return None;
            }
            let ratio = gap / scale;
            m = ((ratio * ratio).floor() as u64).clamp(1, remaining);
        }
        let s = sigma * (m as f64).sqrt();
        for x in pos.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += s * z;
        }
        step += m;
        if pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2] <= r2 {
            return Some(step);
        }
    }
    None
}

/// Fraction of released molecules absorbed by time `t`.
pub fn empirical_fraction(rec: &HitRecord, t: f64) -> f64 {
    if rec.n_released == 0 {
        return 0.0;
    }
    let n = rec.hit_times.partition_point(|&h| h <= t);
    n as f64 / rec.n_released as f64
}
