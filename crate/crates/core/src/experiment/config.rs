//! Flat experiment configuration.
//!
//! Keys follow the simulation-parameter names (`D_A`, `D_B`, `r`, `d`,
//! `T_s`, `sigma2_symbol`, `delta_t`) plus the transmitter, noise, detector
//! and run settings. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelGeometry, MoleculePair};
use crate::error::{Error, Result};
use crate::rx::{Backend, ClampMode, DetectorConfig, NoiseConfig, SyncReference, ThresholdRule};
use crate::tx::TxConfig;

/// Runs and symbols per run for `--full-scale`.
pub const FULL_SCALE_RUNS: usize = 100;
pub const FULL_SCALE_SYMBOLS: usize = 100_000;

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "sigma2_symbol")]
    Sigma2Symbol,
    #[serde(rename = "e_bar_target")]
    EBarTarget,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::SnrDb => "snr_db",
            SweepParam::Sigma2Symbol => "sigma2_symbol",
            SweepParam::EBarTarget => "e_bar_target",
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr_db" => Ok(SweepParam::SnrDb),
            "sigma2_symbol" => Ok(SweepParam::Sigma2Symbol),
            "e_bar_target" => Ok(SweepParam::EBarTarget),
            other => Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (expected snr_db, sigma2_symbol or e_bar_target)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Receiver radius (µm).
    pub r: f64,
    /// Transmitter to receiver-surface distance (µm).
    pub d: f64,
    /// Information molecule diffusion coefficient (µm²/s).
    #[serde(rename = "D_A")]
    pub d_a: f64,
    /// Synchronization molecule diffusion coefficient (µm²/s).
    #[serde(rename = "D_B")]
    pub d_b: f64,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    pub sigma2_symbol: f64,
    /// Receiver bin width (s).
    pub delta_t: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_info")]
    pub n_info: u32,
    #[serde(rename = "N_sync")]
    pub n_sync: u32,
    pub p_one: f64,

    /// Per-bin SNR for both molecule types; `inf` disables noise.
    pub snr_db: f64,
    pub clamp: ClampMode,

    pub smooth_window: usize,
    pub gate_fraction: f64,
    pub refractory_fraction: f64,
    pub search_horizon: f64,
    pub lobe_fraction: f64,
    pub refine: bool,
    pub threshold: ThresholdRule,
    /// Extra Gaussian error on every sync peak, as a mean fraction of `T_s`.
    pub e_bar_target: f64,

    pub backend: Backend,
    pub runs: usize,
    pub seed_base: u64,
    /// Arrivals are recorded up to this many nominal symbols past the end of
    /// the last symbol.
    pub tail_symbols: f64,

    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let det = DetectorConfig::default();
        let tx = TxConfig::default();
        ExperimentConfig {
            r: 2.0,
            d: 4.0,
            d_a: 79.4,
            d_b: 158.8,
            t_s: tx.t_s,
            sigma2_symbol: tx.sigma2_symbol,
            delta_t: 1e-5,
            k: tx.k,
            n_info: tx.n_info,
            n_sync: tx.n_sync,
            p_one: tx.p_one,
            snr_db: f64::INFINITY,
            clamp: ClampMode::default(),
            smooth_window: det.smooth_window,
            gate_fraction: det.gate_fraction,
            refractory_fraction: det.refractory_fraction,
            search_horizon: det.search_horizon,
            lobe_fraction: det.lobe_fraction,
            refine: det.refine,
            threshold: det.threshold,
            e_bar_target: 0.0,
            backend: Backend::default(),
            runs: 20,
            seed_base: 1,
            tail_symbols: 2.0,
            sweep_param: None,
            sweep_values: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Checks every nested setting; failures are reported as config errors.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.geometry().map_err(wrap)?;
        self.molecules().map_err(wrap)?;
        self.tx_config(0).validate().map_err(wrap)?;
        self.noise_config(0).validate().map_err(wrap)?;
        self.detector_config().validate().map_err(wrap)?;
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::Config(format!("delta_t must be > 0, got {}", self.delta_t)));
        }
        if !(self.e_bar_target.is_finite() && self.e_bar_target >= 0.0) {
            return Err(Error::Config(format!(
                "e_bar_target must be >= 0, got {}",
                self.e_bar_target
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if !(self.tail_symbols.is_finite() && self.tail_symbols >= 1.5) {
            return Err(Error::Config(format!(
                "tail_symbols must be >= 1.5 so the look-ahead peak is observable, got {}",
                self.tail_symbols
            )));
        }
        if let Some(v) = self.sweep_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sweep values must be finite, got {v}")));
        }
        if self.sweep_param.is_some() && self.sweep_values.is_empty() {
            return Err(Error::Config("sweep_param given without sweep_values".into()));
        }
        if let Some(p) = self.sweep_param {
            for &v in &self.sweep_values {
                self.at(p, v).validate_point()?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let mut point = self.clone();
        point.sweep_param = None;
        point.sweep_values.clear();
        point.validate()
    }

    pub fn geometry(&self) -> Result<ChannelGeometry> {
        ChannelGeometry::new(self.r, self.d)
    }

    pub fn molecules(&self) -> Result<MoleculePair> {
        MoleculePair::new(self.d_a, self.d_b)
    }

    pub fn tx_config(&self, seed: u64) -> TxConfig {
        TxConfig {
            k: self.k,
            t_s: self.t_s,
            sigma2_symbol: self.sigma2_symbol,
            n_info: self.n_info,
            n_sync: self.n_sync,
            p_one: self.p_one,
            seed,
        }
    }

    pub fn noise_config(&self, seed: u64) -> NoiseConfig {
        NoiseConfig {
            snr_db: self.snr_db,
            seed,
            clamp: self.clamp,
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            smooth_window: self.smooth_window,
            gate_fraction: self.gate_fraction,
            refractory_fraction: self.refractory_fraction,
            search_horizon: self.search_horizon,
            lobe_fraction: self.lobe_fraction,
            refine: self.refine,
            threshold: self.threshold,
        }
    }

    pub fn sync_reference(&self) -> Result<SyncReference> {
        Ok(SyncReference {
            geom: self.geometry()?,
            d_sync: self.d_b,
            n_sync: self.n_sync,
        })
    }

    /// Decision threshold in molecules.
    pub fn threshold_count(&self) -> Result<f64> {
        Ok(self
            .threshold
            .resolve(&self.geometry()?, self.d_a, self.n_info, self.t_s))
    }

    /// Copy with one swept parameter set to `value`.
    pub fn at(&self, param: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::SnrDb => c.snr_db = value,
            SweepParam::Sigma2Symbol => c.sigma2_symbol = value,
            SweepParam::EBarTarget => c.e_bar_target = value,
        }
        c
    }

    /// Switches to full scale: 100 runs of 10⁵ symbols.
    pub fn full_scale(mut self) -> Self {
        self.runs = FULL_SCALE_RUNS;
        self.k = FULL_SCALE_SYMBOLS;
        self
    }

    /// Short hash of every setting that affects results. The sweep list is
    /// left out so that each sweep point hashes like the equivalent single
    /// run.
    pub fn fingerprint(&self) -> String {
        let mut point = self.clone();
        point.sweep_param = None;
        point.sweep_values.clear();
        let digest = Sha256::digest(point.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_table_values() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.r, c.d, c.d_a, c.d_b, c.t_s, c.delta_t),
            (2.0, 4.0, 79.4, 158.8, 0.38, 1e-5)
        );
        assert_eq!((c.runs, c.k, c.n_info, c.n_sync), (20, 10_000, 1000, 1000));
        assert_eq!(c.threshold, ThresholdRule::Literal);
        c.validate().unwrap();
    }

    #[test]
    fn parses_flat_toml() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            D_A = 79.4
            D_B = 158.8
            T_s = 0.38
            sigma2_symbol = 0.2
            snr_db = 8.0
            threshold = "calibrated"
            sweep_param = "snr_db"
            sweep_values = [0.0, 4.0, 8.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.sigma2_symbol, 0.2);
        assert_eq!(c.threshold, ThresholdRule::Calibrated);
        assert_eq!(c.sweep_param, Some(SweepParam::SnrDb));
        let c = ExperimentConfig::from_toml_str("threshold = 120.5\nsnr_db = inf").unwrap();
        assert_eq!(c.threshold, ThresholdRule::Count(120.5));
        assert_eq!(c.snr_db, f64::INFINITY);
    }

    #[test]
    fn rejects_unknown_and_invalid_keys() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("D_C = 1.0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("sweep_param = \"tau\"\nsweep_values = [1.0]"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("D_B = 50.0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("runs = 0"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml_str("sweep_param = \"sigma2_symbol\"\nsweep_values = [0.3]").is_ok());
        assert!(matches!(
            ExperimentConfig::from_toml_str("sweep_param = \"sigma2_symbol\"\nsweep_values = [0.5]"),
            Err(Error::Config(_))
        ));
        assert!(matches!("nope".parse::<SweepParam>(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig {
            threshold: ThresholdRule::Count(3.0),
            sweep_param: Some(SweepParam::EBarTarget),
            sweep_values: vec![0.0, 0.1],
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn fingerprint_tracks_semantic_fields() {
        let base = ExperimentConfig::default();
        let fp = base.fingerprint();
        assert_eq!(fp.len(), 16);
        assert_eq!(fp, base.clone().fingerprint());
        let variants = [
            ExperimentConfig {
                d_b: 160.0,
                ..base.clone()
            },
            ExperimentConfig {
                snr_db: 8.0,
                ..base.clone()
            },
            ExperimentConfig {
                runs: 3,
                ..base.clone()
            },
            ExperimentConfig {
                seed_base: 2,
                ..base.clone()
            },
            ExperimentConfig {
                threshold: ThresholdRule::Calibrated,
                ..base.clone()
            },
            ExperimentConfig {
                clamp: ClampMode::PerBin,
                ..base.clone()
            },
        ];
        for v in &variants {
            assert_ne!(v.fingerprint(), fp);
        }
        let swept = ExperimentConfig {
            sweep_param: Some(SweepParam::SnrDb),
            sweep_values: vec![1.0],
            ..base.clone()
        };
        assert_eq!(swept.fingerprint(), fp);
    }
}
