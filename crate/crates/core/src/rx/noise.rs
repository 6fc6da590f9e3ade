//! Additive Gaussian counting noise at a prescribed per-bin SNR.
//!
//! The SNR is fixed as `s_peak² / σ_n²`, where `s_peak` is the expected
//! count in the busiest bin of one isolated release. Each molecule type gets
//! its own noise level from its own channel response.

use serde::{Deserialize, Serialize};

use super::series::{ArrivalSeries, ClampMode};
use crate::channel::{check_diffusion, peak_bin_probability, ChannelGeometry, MoleculeSpec};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-bin SNR in dB; `+inf` disables the noise.
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub clamp: ClampMode,
}

impl NoiseConfig {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        NoiseConfig {
            snr_db,
            seed,
            clamp: ClampMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid(format!(
                "snr_db must be finite or +inf, got {}",
                self.snr_db
            )));
        }
        Ok(())
    }
}

/// Expected count in the busiest bin after releasing `n_per_symbol`
/// molecules at once.
pub fn peak_bin_count(geom: &ChannelGeometry, diffusion: f64, n_per_symbol: u32, bin_width: f64) -> f64 {
    n_per_symbol as f64 * peak_bin_probability(geom, diffusion, bin_width)
}

/// Per-bin noise standard deviation for `snr_db`.
pub fn noise_sigma(
    geom: &ChannelGeometry,
    diffusion: f64,
    n_per_symbol: u32,
    bin_width: f64,
    snr_db: f64,
) -> Result<f64> {
    geom.validate()?;
    check_diffusion(diffusion)?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width}")));
    }
    NoiseConfig::new(snr_db, 0).validate()?;
    let s_peak = peak_bin_count(geom, diffusion, n_per_symbol, bin_width);
    Ok(s_peak / 10f64.powf(snr_db / 20.0))
}

/// Adds i.i.d. zero-mean Gaussian noise to every bin of `spec.kind` and
/// keeps the bins non-negative according to `noise.clamp`.
pub fn add_counting_noise(
    series: &ArrivalSeries,
    geom: &ChannelGeometry,
    spec: &MoleculeSpec,
    n_per_symbol: u32,
    noise: &NoiseConfig,
) -> Result<ArrivalSeries> {
    noise.validate()?;
    let sigma = noise_sigma(geom, spec.diffusion, n_per_symbol, series.bin_width(), noise.snr_db)?;
    if sigma == 0.0 {
        return Ok(series.clone());
    }
    let seed = derive_seed(noise.seed, spec.kind.tag());
    Ok(series.with_noise_layer(spec.kind, sigma, seed, noise.clamp))
}
