//! Threshold detectors: windows anchored on estimated sync peaks, and the
//! fixed-clock baseline.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::series::ArrivalSeries;
use super::sync::SyncEstimate;
use crate::channel::{hitting_fraction_unchecked, ChannelGeometry, MoleculeKind};
use crate::error::{Error, Result};
use crate::tx::SymbolSequence;

/// How the decision threshold `Th` is chosen.
///
/// With the default geometry only about a fifth of the information
/// molecules arrive within one symbol, so `N_info/2` decodes almost every
/// symbol as 0; `Calibrated` halves the expected in-symbol count instead.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdRule {
    /// `N_info / 2`.
    #[default]
    Literal,
    /// `N_info · F_info(T_s) / 2`.
    Calibrated,
    /// A fixed molecule count.
    Count(f64),
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThresholdRule::Count(c) if !(c.is_finite() && *c >= 0.0) => Err(Error::invalid(format!(
                "threshold count must be finite and >= 0, got {c}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn resolve(&self, geom: &ChannelGeometry, d_info: f64, n_info: u32, t_s: f64) -> f64 {
        match self {
            ThresholdRule::Literal => n_info as f64 / 2.0,
            ThresholdRule::Calibrated => n_info as f64 * hitting_fraction_unchecked(geom, d_info, t_s) / 2.0,
            ThresholdRule::Count(c) => *c,
        }
    }

    /// `literal`, `calibrated` or the count itself.
    pub fn label(&self) -> String {
        match self {
            ThresholdRule::Literal => "literal".into(),
            ThresholdRule::Calibrated => "calibrated".into(),
            ThresholdRule::Count(c) => format!("count:{c}"),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ThresholdRule::Literal),
            "calibrated" => Ok(ThresholdRule::Calibrated),
            other => {
                let c = other.strip_prefix("count:").unwrap_or(other);
                let rule = c
                    .parse::<f64>()
                    .map(ThresholdRule::Count)
                    .map_err(|_| Error::invalid(format!("unknown threshold `{other}`")))?;
                rule.validate()?;
                Ok(rule)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RuleRepr {
    Name(String),
    Count(f64),
}

impl Serialize for ThresholdRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdRule::Count(c) => RuleRepr::Count(*c),
            other => RuleRepr::Name(other.label()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ThresholdRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rule = match RuleRepr::deserialize(d)? {
            RuleRepr::Name(n) => n.parse().map_err(serde::de::Error::custom)?,
            RuleRepr::Count(c) => ThresholdRule::Count(c),
        };
        rule.validate().map_err(serde::de::Error::custom)?;
        Ok(rule)
    }
}

fn decide(series: &ArrivalSeries, windows: impl Iterator<Item = (f64, f64)>, th: f64) -> SymbolSequence {
    SymbolSequence::from_bools(windows.map(|(a, b)| series.time_window_sum(MoleculeKind::Information, a, b) > th))
}

/// Bit `k` is 1 iff the information count in `[t̂(k), t̂(k+1))` exceeds `th`.
pub fn detect_symbols_synced(series: &ArrivalSeries, est: &SyncEstimate, th: f64) -> SymbolSequence {
    decide(series, est.all_peaks().windows(2).map(|w| (w[0], w[1])), th)
}

/// Bit `k` is 1 iff the information count in `[k·T_s, (k+1)·T_s)` exceeds
/// `th`; the receiver's clock knows nothing of the actual durations.
pub fn detect_symbols_fixed(series: &ArrivalSeries, t_s: f64, k: usize, th: f64) -> Result<SymbolSequence> {
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::invalid(format!("T_s must be > 0, got {t_s}")));
    }
    let needed = k as f64 * t_s;
    if series.t0() + series.duration() < needed * (1.0 - 1e-12) {
        return Err(Error::SeriesTooShort(format!(
            "{k} fixed windows need {needed} s, series has {} s",
            series.duration()
        )));
    }
    let t0 = series.t0();
    Ok(decide(
        series,
        (0..k).map(|i| (t0 + i as f64 * t_s, t0 + (i + 1) as f64 * t_s)),
        th,
    ))
}
