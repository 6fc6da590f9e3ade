//! Binary CSK transmitter: symbols, jittered symbol durations and the
//! per-symbol release schedule of both molecule types.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::MoleculeKind;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, TAG_DURATIONS, TAG_SYMBOLS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    /// Number of symbols.
    pub k: usize,
    /// Nominal symbol duration in seconds.
    pub t_s: f64,
    /// Variance of the (pre-truncation) relative duration jitter ψ.
    pub sigma2_symbol: f64,
    pub n_info: u32,
    pub n_sync: u32,
    pub p_one: f64,
    pub seed: u64,
}

impl Default for TxConfig {
    fn default() -> Self {
        TxConfig {
            k: 10_000,
            t_s: 0.38,
            sigma2_symbol: 0.0,
            n_info: 1000,
            n_sync: 1000,
            p_one: 0.5,
            seed: 0,
        }
    }
}

impl TxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("symbol count K must be >= 1"));
        }
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::invalid(format!("T_s must be > 0, got {}", self.t_s)));
        }
        if !(self.sigma2_symbol >= 0.0 && self.sigma2_symbol < 0.5) {
            return Err(Error::invalid(format!(
                "sigma2_symbol must lie in [0, 0.5), got {}",
                self.sigma2_symbol
            )));
        }
        if self.n_info == 0 || self.n_sync == 0 {
            return Err(Error::invalid("N_info and N_sync must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.p_one) {
            return Err(Error::invalid(format!("p_one must lie in [0, 1], got {}", self.p_one)));
        }
        Ok(())
    }
}

/// Transmitted bits, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    bits: Vec<u8>,
}

impl SymbolSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("symbol value {b} is not binary")));
        }
        Ok(SymbolSequence { bits })
    }

    pub(crate) fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        SymbolSequence {
            bits: bits.into_iter().map(u8::from).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

pub fn generate_symbols(cfg: &TxConfig) -> Result<SymbolSequence> {
    cfg.validate()?;
    let mut rng = stream_rng(derive_seed(cfg.seed, TAG_SYMBOLS), 0);
    Ok(SymbolSequence::from_bools(
        (0..cfg.k).map(|_| rng.random_bool(cfg.p_one)),
    ))
}

/// Draws `T(k) = (1 + ψ_k)·T_s` with ψ_k ~ N(0, σ²) resampled until
/// `|ψ_k| < 0.5`.
pub fn draw_symbol_durations(cfg: &TxConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.sigma2_symbol == 0.0 {
        return Ok(vec![cfg.t_s; cfg.k]);
    }
    let normal = Normal::new(0.0, cfg.sigma2_symbol.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = stream_rng(derive_seed(cfg.seed, TAG_DURATIONS), 0);
    Ok((0..cfg.k)
        .map(|_| loop {
            let psi: f64 = normal.sample(&mut rng);
            if psi.abs() < 0.5 {
                break (1.0 + psi) * cfg.t_s;
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub release_time: f64,
    pub kind: MoleculeKind,
    pub count: u32,
}

/// Release events plus the ground-truth symbol boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionSchedule {
    pub events: Vec<Emission>,
    pub symbol_starts: Vec<f64>,
    pub durations: Vec<f64>,
}

impl EmissionSchedule {
    pub fn empty() -> Self {
        EmissionSchedule {
            events: Vec::new(),
            symbol_starts: Vec::new(),
            durations: Vec::new(),
        }
    }

    /// End of the last symbol (0 for an empty schedule).
    pub fn end_time(&self) -> f64 {
        match (self.symbol_starts.last(), self.durations.last()) {
            (Some(s), Some(d)) => s + d,
            _ => self.events.iter().map(|e| e.release_time).fold(0.0, f64::max),
        }
    }

    pub fn total_released(&self, kind: MoleculeKind) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.count as u64)
            .sum()
    }

    /// CSV with columns `release_time_s,type,count`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, |w| self.write_csv_to(w))
    }

    pub fn write_csv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "release_time_s,type,count")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.release_time, e.kind, e.count)?;
        }
        Ok(())
    }
}

/// Sync molecules go out at every symbol start; information molecules only
/// for a '1', at the same instant.
pub fn build_emission_schedule(bits: &SymbolSequence, durations: &[f64], cfg: &TxConfig) -> Result<EmissionSchedule> {
    if bits.len() != durations.len() {
        return Err(Error::invalid(format!(
            "{} symbols but {} durations",
            bits.len(),
            durations.len()
        )));
    }
    if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::invalid(format!("symbol duration must be > 0, got {d}")));
    }
    let mut events = Vec::with_capacity(bits.len() * 2);
    let mut symbol_starts = Vec::with_capacity(bits.len());
    let mut t = 0.0;
    for (&b, &dur) in bits.bits().iter().zip(durations) {
        symbol_starts.push(t);
        events.push(Emission {
            release_time: t,
            kind: MoleculeKind::Synchronization,
            count: cfg.n_sync,
        });
        if b == 1 {
            events.push(Emission {
                release_time: t,
                kind: MoleculeKind::Information,
                count: cfg.n_info,
            });
        }
        t += dur;
    }
    Ok(EmissionSchedule {
        events,
        symbol_starts,
        durations: durations.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(k: usize) -> TxConfig {
        TxConfig {
            k,
            seed: 17,
            ..TxConfig::default()
        }
    }

    #[test]
    fn extreme_probabilities() {
        let mut c = cfg(5);
        c.p_one = 1.0;
        assert_eq!(generate_symbols(&c).unwrap().bits(), &[1, 1, 1, 1, 1]);
        c.p_one = 0.0;
        assert_eq!(generate_symbols(&c).unwrap().bits(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn fair_bits_mean() {
        let s = generate_symbols(&cfg(100_000)).unwrap();
        let mean = s.ones() as f64 / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_jitter_durations() {
        let d = draw_symbol_durations(&cfg(50)).unwrap();
        assert!(d.iter().all(|&x| x == 0.38));
    }

    #[test]
    fn truncated_jitter_range_and_variance() {
        let mut c = cfg(100_000);
        c.sigma2_symbol = 0.2;
        let d = draw_symbol_durations(&c).unwrap();
        assert!(d.iter().all(|&x| x > 0.19 && x < 0.57));

        c.sigma2_symbol = 0.01;
        let d = draw_symbol_durations(&c).unwrap();
        let psi: Vec<f64> = d.iter().map(|x| x / c.t_s - 1.0).collect();
        let mean = psi.iter().sum::<f64>() / psi.len() as f64;
        let var = psi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (psi.len() - 1) as f64;
        assert!((var - 0.01).abs() < 0.05 * 0.01, "{var}");
    }

    #[test]
    fn rejects_invalid_config() {
        let mut c = cfg(1);
        c.sigma2_symbol = 0.5;
        assert!(generate_symbols(&c).is_err());
        let mut c = cfg(0);
        c.k = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(1);
        c.p_one = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule_example() {
        let c = cfg(2);
        let bits = SymbolSequence::new(vec![1, 0]).unwrap();
        let s = build_emission_schedule(&bits, &[0.38, 0.38], &c).unwrap();
        assert_eq!(
            s.events,
            vec![
                Emission {
                    release_time: 0.0,
                    kind: MoleculeKind::Synchronization,
                    count: 1000
                },
                Emission {
                    release_time: 0.0,
                    kind: MoleculeKind::Information,
                    count: 1000
                },
                Emission {
                    release_time: 0.38,
                    kind: MoleculeKind::Synchronization,
                    count: 1000
                },
            ]
        );
        assert_eq!(s.symbol_starts, vec![0.0, 0.38]);
    }

    #[test]
    fn single_zero_symbol() {
        let s = build_emission_schedule(&SymbolSequence::new(vec![0]).unwrap(), &[0.38], &cfg(1)).unwrap();
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].kind, MoleculeKind::Synchronization);
    }

    #[test]
    fn length_mismatch() {
        let bits = SymbolSequence::new(vec![1, 0, 1]).unwrap();
        assert!(matches!(
            build_emission_schedule(&bits, &[0.38, 0.38], &cfg(3)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(SymbolSequence::new(vec![0, 2]).is_err());
    }

    #[test]
    fn csv_columns() {
        let bits = SymbolSequence::new(vec![1]).unwrap();
        let s = build_emission_schedule(&bits, &[0.38], &cfg(1)).unwrap();
        let mut buf = Vec::new();
        s.write_csv_to(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "release_time_s,type,count\n0,sync,1000\n0,info,1000\n"
        );
    }

    #[test]
    fn info_event_ratio() {
        let c = cfg(20_000);
        let bits = generate_symbols(&c).unwrap();
        let s = build_emission_schedule(&bits, &draw_symbol_durations(&c).unwrap(), &c).unwrap();
        let info = s.events.iter().filter(|e| e.kind == MoleculeKind::Information).count();
        let ratio = info as f64 / c.k as f64;
        assert!((0.45..=0.55).contains(&ratio));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn schedule_invariants(k in 1usize..200, sigma2 in 0.0f64..0.49, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let c = TxConfig { k, sigma2_symbol: sigma2, p_one: p, seed, ..TxConfig::default() };
            let bits = generate_symbols(&c).unwrap();
            let durs = draw_symbol_durations(&c).unwrap();
            let s = build_emission_schedule(&bits, &durs, &c).unwrap();
            prop_assert_eq!(s.symbol_starts[0], 0.0);
            for i in 0..k - 1 {
                prop_assert_eq!(s.symbol_starts[i + 1], s.symbol_starts[i] + s.durations[i]);
            }
            prop_assert!(s.durations.iter().all(|&d| d > 0.5 * c.t_s && d < 1.5 * c.t_s));
            for (i, &start) in s.symbol_starts.iter().enumerate() {
                let at: Vec<_> = s.events.iter().filter(|e| e.release_time == start).collect();
                let sync = at.iter().filter(|e| e.kind == MoleculeKind::Synchronization).count();
                let info = at.iter().filter(|e| e.kind == MoleculeKind::Information).count();
                prop_assert_eq!(sync, 1);
                prop_assert_eq!(info, bits.bits()[i] as usize);
            }
            prop_assert_eq!(s.total_released(MoleculeKind::Information), c.n_info as u64 * bits.ones() as u64);
            // determinism
            let again = build_emission_schedule(&generate_symbols(&c).unwrap(), &draw_symbol_durations(&c).unwrap(), &c).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
