//! Closed-form first-hitting statistics for a point transmitter and a fully
//! absorbing sphere in an unbounded 3-D medium.
//!
//! Units are micrometres and seconds throughout; diffusion coefficients are
//! in µm²/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erfc, erfc_inv};

/// Receiver radius `radius` and transmitter-to-surface distance `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub radius: f64,
    pub distance: f64,
}

impl ChannelGeometry {
    pub fn new(radius: f64, distance: f64) -> Result<Self> {
        let g = ChannelGeometry { radius, distance };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "receiver radius must be > 0, got {}",
                self.radius
            )));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(Error::invalid(format!(
                "transmitter distance must be > 0, got {}",
                self.distance
            )));
        }
        Ok(())
    }

    /// Probability that a released molecule is ever absorbed, `r / (d + r)`.
    pub fn capture_probability(&self) -> f64 {
        self.radius / (self.distance + self.radius)
    }

    /// Distance from the transmitter to the receiver centre.
    pub fn center_distance(&self) -> f64 {
        self.distance + self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoleculeKind {
    Information,
    Synchronization,
}

impl MoleculeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoleculeKind::Information => "info",
            MoleculeKind::Synchronization => "sync",
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        match self {
            MoleculeKind::Information => 0,
            MoleculeKind::Synchronization => 1,
        }
    }
}

impl std::fmt::Display for MoleculeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MoleculeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "info" | "information" => Ok(MoleculeKind::Information),
            "sync" | "synchronization" => Ok(MoleculeKind::Synchronization),
            other => Err(Error::invalid(format!("unknown molecule type `{other}`"))),
        }
    }
}

/// A molecule type together with its diffusion coefficient (µm²/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub kind: MoleculeKind,
    pub diffusion: f64,
}

impl MoleculeSpec {
    pub fn new(kind: MoleculeKind, diffusion: f64) -> Result<Self> {
        check_diffusion(diffusion)?;
        Ok(MoleculeSpec { kind, diffusion })
    }
}

/// Information and synchronization molecule types used together.
///
/// The scheme only works if the synchronization molecules are the faster
/// diffusers, so that is enforced here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculePair {
    pub info: MoleculeSpec,
    pub sync: MoleculeSpec,
}

impl MoleculePair {
    pub fn new(d_info: f64, d_sync: f64) -> Result<Self> {
        let pair = MoleculePair {
            info: MoleculeSpec::new(MoleculeKind::Information, d_info)?,
            sync: MoleculeSpec::new(MoleculeKind::Synchronization, d_sync)?,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        check_diffusion(self.info.diffusion)?;
        check_diffusion(self.sync.diffusion)?;
        if self.info.kind != MoleculeKind::Information || self.sync.kind != MoleculeKind::Synchronization {
            return Err(Error::invalid("molecule pair labels are swapped"));
        }
        if self.sync.diffusion <= self.info.diffusion {
            return Err(Error::invalid(format!(
                "synchronization molecules must diffuse faster: D_sync = {} <= D_info = {}",
                self.sync.diffusion, self.info.diffusion
            )));
        }
        Ok(())
    }

    pub fn get(&self, kind: MoleculeKind) -> &MoleculeSpec {
        match kind {
            MoleculeKind::Information => &self.info,
            MoleculeKind::Synchronization => &self.sync,
        }
    }
}

pub fn check_diffusion(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("diffusion coefficient must be > 0, got {d}")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and >= 0, got {t}")))
    }
}

/// First-hitting density `f(t)` in 1/s.
///
/// `f(t) = r/(d+r) · d/√(4πDt³) · exp(−d²/(4Dt))`, with `f(0) = 0`.
pub fn hitting_rate(geom: &ChannelGeometry, diffusion: f64, t: f64) -> Result<f64> {
    geom.validate()?;
    check_diffusion(diffusion)?;
    check_time(t)?;
    Ok(hitting_rate_unchecked(geom, diffusion, t))
}

pub(crate) fn hitting_rate_unchecked(geom: &ChannelGeometry, diffusion: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let d = geom.distance;
    // log space keeps t → 0⁺ from producing inf · 0
    let log_f = geom.capture_probability().ln() + d.ln()
        - 0.5 * (4.0 * PI * diffusion).ln()
        - 1.5 * t.ln()
        - d * d / (4.0 * diffusion * t);
    log_f.exp()
}

/// Fraction of released molecules absorbed by time `t`:
/// `F(t) = r/(d+r) · erfc(d/√(4Dt))`, with `F(0) = 0`.
pub fn hitting_fraction(geom: &ChannelGeometry, diffusion: f64, t: f64) -> Result<f64> {
    geom.validate()?;
    check_diffusion(diffusion)?;
    check_time(t)?;
    Ok(hitting_fraction_unchecked(geom, diffusion, t))
}

pub(crate) fn hitting_fraction_unchecked(geom: &ChannelGeometry, diffusion: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    geom.capture_probability() * erfc(geom.distance / (4.0 * diffusion * t).sqrt())
}

/// Mode of the hitting density, `d²/(6D)`.
pub fn peak_time(geom: &ChannelGeometry, diffusion: f64) -> f64 {
    geom.distance * geom.distance / (6.0 * diffusion)
}

/// Time at which the absorbed fraction reaches `p`, or `None` if `p` is at
/// or above the capture probability (never reached in finite time).
pub fn hitting_fraction_inverse(geom: &ChannelGeometry, diffusion: f64, p: f64) -> Result<Option<f64>> {
    geom.validate()?;
    check_diffusion(diffusion)?;
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::invalid(format!("fraction must be >= 0, got {p}")));
    }
    Ok(fraction_inverse_unchecked(geom, diffusion, p))
}

pub(crate) fn fraction_inverse_unchecked(geom: &ChannelGeometry, diffusion: f64, p: f64) -> Option<f64> {
    let p_hit = geom.capture_probability();
    if p >= p_hit {
        return None;
    }
    if p <= 0.0 {
        return Some(0.0);
    }
    let x = erfc_inv(p / p_hit);
    Some(geom.distance * geom.distance / (4.0 * diffusion * x * x))
}

/// Draws a first-hitting time by inverting `F` at the uniform variate `u`.
///
/// Returns `None` when the molecule escapes (`u ≥ r/(d+r)`).
pub fn sample_hit_time(geom: &ChannelGeometry, diffusion: f64, u: f64) -> Result<Option<f64>> {
    geom.validate()?;
    check_diffusion(diffusion)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!("uniform variate must lie in (0, 1), got {u}")));
    }
    Ok(fraction_inverse_unchecked(geom, diffusion, u))
}

/// Probability that a molecule released at time 0 is absorbed in
/// `[t, t + width)`.
pub fn bin_probability(geom: &ChannelGeometry, diffusion: f64, t: f64, width: f64) -> f64 {
    hitting_fraction_unchecked(geom, diffusion, t + width) - hitting_fraction_unchecked(geom, diffusion, t.max(0.0))
}

/// Largest single-bin absorption probability on the grid `t = i · width`.
///
/// Bin probabilities are unimodal in `i`, so the scan stops once they start
/// to fall.
pub fn peak_bin_probability(geom: &ChannelGeometry, diffusion: f64, width: f64) -> f64 {
    let mut best = 0.0_f64;
    let mut i = ((peak_time(geom, diffusion) / width).floor() as u64).saturating_sub(2);
    loop {
        let p = bin_probability(geom, diffusion, i as f64 * width, width);
        if p < best {
            return best;
        }
        best = p;
        i += 1;
    }
}
