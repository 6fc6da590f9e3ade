//! Per-symbol sync-peak estimation.
//!
//! For each symbol the sync counts are smoothed with a centred moving
//! average and searched inside `[prev + ρ·T_s, prev + H·T_s]`. The first bin
//! whose smoothed value clears `gate_fraction` of the expected smoothed peak
//! marks the leading edge of the pulse; the coarse estimate is the smoothed
//! maximum within `lobe_fraction·T_s` after it. Taking the first lobe rather
//! than the global maximum of the window keeps the next symbol's pulse, or a
//! late lump of interference, from being picked up.
//!
//! The coarse position is then refined by sliding the expected pulse shape
//! over the raw counts and keeping the release time with the highest
//! log-likelihood score. Raw-count smoothing alone is biased by the pulse's
//! long tail and has a heavy-tailed error at low counts; the matched score
//! uses the whole pulse.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::detect::ThresholdRule;
use super::series::ArrivalSeries;
use crate::channel::{
    check_diffusion, hitting_fraction_unchecked, hitting_rate_unchecked, peak_time, ChannelGeometry, MoleculeKind,
};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Moving-average width in bins.
    pub smooth_window: usize,
    /// Fraction of the expected smoothed peak height a pulse must reach.
    pub gate_fraction: f64,
    /// Search starts this many nominal symbol durations after the previous
    /// peak.
    pub refractory_fraction: f64,
    /// Search ends this many nominal symbol durations after the previous
    /// peak.
    pub search_horizon: f64,
    /// Length of the lobe scanned after the gate crossing, in nominal symbol
    /// durations.
    pub lobe_fraction: f64,
    /// Refine the coarse peak by matching the expected pulse shape.
    pub refine: bool,
    pub threshold: ThresholdRule,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            smooth_window: 5000,
            gate_fraction: 0.5,
            refractory_fraction: 0.5,
            search_horizon: 1.5,
            lobe_fraction: 0.25,
            refine: true,
            threshold: ThresholdRule::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smooth_window == 0 {
            return Err(Error::invalid("smooth_window must be >= 1"));
        }
        if !(self.gate_fraction > 0.0 && self.gate_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "gate_fraction must lie in (0, 1), got {}",
                self.gate_fraction
            )));
        }
        if !(self.refractory_fraction > 0.0 && self.refractory_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "refractory_fraction must lie in (0, 1), got {}",
                self.refractory_fraction
            )));
        }
        if !(self.search_horizon.is_finite() && self.search_horizon > self.refractory_fraction) {
            return Err(Error::invalid(format!(
                "search_horizon ({}) must exceed refractory_fraction ({})",
                self.search_horizon, self.refractory_fraction
            )));
        }
        if !(self.lobe_fraction.is_finite() && self.lobe_fraction > 0.0) {
            return Err(Error::invalid(format!(
                "lobe_fraction must be > 0, got {}",
                self.lobe_fraction
            )));
        }
        self.threshold.validate()
    }
}

/// What the receiver knows about the sync pulse of one release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncReference {
    pub geom: ChannelGeometry,
    pub d_sync: f64,
    pub n_sync: u32,
}

impl SyncReference {
    pub fn validate(&self) -> Result<()> {
        self.geom.validate()?;
        check_diffusion(self.d_sync)?;
        if self.n_sync == 0 {
            return Err(Error::invalid("n_sync must be >= 1"));
        }
        Ok(())
    }

    pub fn peak_time(&self) -> f64 {
        peak_time(&self.geom, self.d_sync)
    }
}

/// Estimated sync peaks of `K` symbols plus one look-ahead peak.
///
/// The information window of symbol `k` starts at its sync peak and lasts
/// until the next one, so `T̂(k) = t̂(k+1) − t̂(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncEstimate {
    peaks: Vec<f64>,
    erasures: Vec<bool>,
    reordered: bool,
}

impl SyncEstimate {
    /// `peaks` holds `K + 1` non-decreasing times.
    pub fn new(peaks: Vec<f64>, erasures: Vec<bool>) -> Result<Self> {
        if peaks.len() < 2 {
            return Err(Error::invalid("a sync estimate needs at least two peaks"));
        }
        if erasures.len() != peaks.len() {
            return Err(Error::invalid(format!(
                "{} erasure flags for {} peaks",
                erasures.len(),
                peaks.len()
            )));
        }
        if peaks.iter().any(|p| !p.is_finite()) || peaks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("peak times must be finite and non-decreasing"));
        }
        Ok(SyncEstimate {
            peaks,
            erasures,
            reordered: false,
        })
    }

    /// Number of symbols covered.
    pub fn k(&self) -> usize {
        self.peaks.len() - 1
    }

    /// `t̂_sync,peak(k)` for every symbol.
    pub fn t_sync_peak_hat(&self) -> &[f64] {
        &self.peaks[..self.k()]
    }

    /// Start of each information window; equal to the sync peak.
    pub fn t_info_start_hat(&self) -> &[f64] {
        self.t_sync_peak_hat()
    }

    /// Every peak including the look-ahead one.
    pub fn all_peaks(&self) -> &[f64] {
        &self.peaks
    }

    pub fn t_hat(&self) -> Vec<f64> {
        self.peaks.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Whether symbol `k`'s peak fell back to nominal spacing.
    pub fn erasures(&self) -> &[bool] {
        &self.erasures[..self.k()]
    }

    pub fn erasure_rate(&self) -> f64 {
        self.erasures().iter().filter(|&&e| e).count() as f64 / self.k() as f64
    }

    /// Set when injected errors had to be re-sorted.
    pub fn reordered(&self) -> bool {
        self.reordered
    }
}

/// Expected single-release pulse as the estimator sees it.
struct PulseModel {
    t_peak: f64,
    /// Expected smoothed height at the smoothed maximum.
    height: f64,
    /// Bin offset of the smoothed maximum from the release bin.
    apex: i64,
    /// Bins per fine template cell.
    cell: usize,
    fine: Vec<f64>,
    /// Same pulse on cells `COARSE` times wider.
    coarse: Vec<f64>,
    /// Refinement half-range in bins.
    reach: i64,
}

const COARSE: usize = 10;

impl PulseModel {
    fn new(reference: &SyncReference, dt: f64, w: usize) -> Self {
        let g = &reference.geom;
        let d = reference.d_sync;
        let n = reference.n_sync as f64;
        let t_peak = reference.peak_time();
        let half = (w / 2) as i64;
        let big_f = |j: i64| hitting_fraction_unchecked(g, d, j as f64 * dt);
        let last = (t_peak / dt).ceil() as i64 + 2 * w as i64;
        let (apex, height) = (-(w as i64)..=last)
            .map(|j| (j, n * (big_f(j - half + w as i64) - big_f(j - half)) / w as f64))
            .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });

        let cell = ((t_peak / (160.0 * dt)).round() as usize).max(1);
        let cells = ((10.0 * t_peak / (cell as f64 * dt)).round() as usize)
            .max(1)
            .div_ceil(COARSE)
            * COARSE;
        // a floor under the density keeps stray counts far from the pulse
        // from dominating the score
        let floor = 0.02 * hitting_rate_unchecked(g, d, t_peak);
        let log_rate = |width: usize, j: usize| {
            let cell_t = width as f64 * dt;
            (hitting_rate_unchecked(g, d, (j as f64 + 0.5) * cell_t) + floor).ln()
        };
        let fine = (0..cells).map(|j| log_rate(cell, j)).collect();
        let coarse = (0..cells / COARSE).map(|j| log_rate(cell * COARSE, j)).collect();
        let reach = ((1.2 * t_peak / dt).round() as i64).max(1);
        PulseModel {
            t_peak,
            height,
            apex,
            cell,
            fine,
            coarse,
            reach,
        }
    }

    /// Release bin near `guess` whose shifted template best explains the
    /// sync counts.
    fn refine(&self, series: &ArrivalSeries, guess: i64, prefix: &mut Vec<f64>) -> i64 {
        let span = (self.fine.len() * self.cell) as i64;
        let step = (COARSE * self.cell) as i64;
        let base = guess - self.reach - step;
        series.prefix_into(
            MoleculeKind::Synchronization,
            base,
            guess + self.reach + step + span,
            prefix,
        );
        let prefix = &prefix[..];
        let score = |template: &[f64], width: usize, i0: i64| -> f64 {
            let off = (i0 - base) as usize;
            let mut s = 0.0;
            let mut lo = prefix[off];
            for (j, g) in template.iter().enumerate() {
                let hi = prefix[off + (j + 1) * width];
                s += g * (hi - lo);
                lo = hi;
            }
            s
        };
        let best_of = |template: &[f64], width: usize, lo: i64, hi: i64, step: i64| -> i64 {
            let mut best = (f64::NEG_INFINITY, lo);
            let mut i = lo;
            while i <= hi {
                let s = score(template, width, i);
                if s > best.0 {
                    best = (s, i);
                }
                i += step;
            }
            best.1
        };
        let coarse = best_of(
            &self.coarse,
            self.cell * COARSE,
            guess - self.reach,
            guess + self.reach,
            step,
        );
        best_of(&self.fine, self.cell, coarse - step, coarse + step, self.cell as i64)
    }
}

/// Locates `K + 1` sync peaks, one per symbol plus the look-ahead.
///
/// A symbol whose window never clears the gate gets `previous + T_s` and is
/// flagged as an erasure. The first symbol searches around a virtual previous
/// peak one nominal duration before the first expected one.
pub fn estimate_sync_peaks(
    series: &ArrivalSeries,
    det: &DetectorConfig,
    reference: &SyncReference,
    t_s_nominal: f64,
    k: usize,
) -> Result<SyncEstimate> {
    det.validate()?;
    reference.validate()?;
    if !(t_s_nominal.is_finite() && t_s_nominal > 0.0) {
        return Err(Error::invalid(format!("T_s must be > 0, got {t_s_nominal}")));
    }
    if k == 0 {
        return Err(Error::invalid("symbol count K must be >= 1"));
    }
    let dt = series.bin_width();
    let w = det.smooth_window;
    let half = (w / 2) as i64;
    let model = PulseModel::new(reference, dt, w);
    let gate = det.gate_fraction * model.height * w as f64;
    let lobe = ((det.lobe_fraction * t_s_nominal / dt).round() as usize).max(1);

    let mut peaks = Vec::with_capacity(k + 1);
    let mut erasures = Vec::with_capacity(k + 1);
    let mut prev = series.t0() + model.t_peak - t_s_nominal;
    let (mut prefix, mut scratch) = (Vec::new(), Vec::new());

    for idx in 0..=k {
        let lo = series.bin_at(prev + det.refractory_fraction * t_s_nominal);
        if lo >= series.n_bins() {
            return Err(Error::SeriesTooShort(format!(
                "search for sync peak {idx} starts after the series ends at {:.4} s",
                series.t0() + series.duration()
            )));
        }
        let hi = series.bin_at(prev + det.search_horizon * t_s_nominal).max(lo + 1);
        series.prefix_into(
            MoleculeKind::Synchronization,
            lo as i64 - half,
            (hi + w) as i64 - half,
            &mut prefix,
        );
        // window sums rather than averages; the gate is scaled to match
        let boxed = |i: usize| prefix[i - lo + w] - prefix[i - lo];

        let found = (lo..hi).find(|&i| boxed(i) > gate).map(|c| {
            let end = (c + lobe).min(hi);
            (c..end)
                .map(|i| (i, boxed(i)))
                .fold((c, f64::MIN), |m, x| if x.1 > m.1 { x } else { m })
                .0
        });
        let peak = match found {
            Some(m) => {
                let guess = m as i64 - model.apex;
                let release = if det.refine {
                    model.refine(series, guess, &mut scratch)
                } else {
                    guess
                };
                erasures.push(false);
                series.t0() + release as f64 * dt + model.t_peak
            }
            None => {
                erasures.push(true);
                prev + t_s_nominal
            }
        };
        // refinement may not step back past the search start
        let peak = peak.max(prev + f64::EPSILON * prev.abs().max(1.0));
        peaks.push(peak);
        prev = peak;
    }
    SyncEstimate::new(peaks, erasures)
}

/// Adds independent zero-mean Gaussian errors with mean magnitude
/// `e_bar_target·T_s` to every peak, then restores ordering.
pub fn inject_sync_error(est: &SyncEstimate, e_bar_target: f64, t_s: f64, seed: u64) -> Result<SyncEstimate> {
    if !(e_bar_target.is_finite() && e_bar_target >= 0.0) {
        return Err(Error::invalid(format!("e_bar_target must be >= 0, got {e_bar_target}")));
    }
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::invalid(format!("T_s must be > 0, got {t_s}")));
    }
    if e_bar_target == 0.0 {
        return Ok(est.clone());
    }
    // E|X| = σ·√(2/π) for X ~ N(0, σ²)
    let sigma = e_bar_target * t_s * (std::f64::consts::PI / 2.0).sqrt();
    let mut rng = stream_rng(seed, 0);
    let mut peaks: Vec<f64> = est
        .peaks
        .iter()
        .map(|p| p + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let reordered = peaks.windows(2).any(|w| w[1] < w[0]);
    if reordered {
        peaks.sort_by(f64::total_cmp);
    }
    let mut out = SyncEstimate::new(peaks, est.erasures.clone())?;
    out.reordered = reordered || est.reordered;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::MoleculePair;
    use crate::rx::arrivals::synthesize_arrivals;
    use crate::tx::{build_emission_schedule, generate_symbols, TxConfig};

    fn reference() -> SyncReference {
        SyncReference {
            geom: ChannelGeometry::new(2.0, 4.0).unwrap(),
            d_sync: 158.8,
            n_sync: 1000,
        }
    }

    #[test]
    fn all_zero_series_is_all_erasures() {
        let s = ArrivalSeries::zeros(1e-5, 500_000).unwrap();
        let est = estimate_sync_peaks(&s, &DetectorConfig::default(), &reference(), 0.38, 5).unwrap();
        assert!(est.erasures().iter().all(|&e| e));
        assert_eq!(est.erasure_rate(), 1.0);
        for t in est.t_hat() {
            assert!((t - 0.38).abs() < 1e-12);
        }
        assert!((est.all_peaks()[0] - reference().peak_time()).abs() < 1e-12);
    }

    #[test]
    fn too_short_series_is_an_error() {
        let s = ArrivalSeries::zeros(1e-5, 50_000).unwrap();
        let err = estimate_sync_peaks(&s, &DetectorConfig::default(), &reference(), 0.38, 5).unwrap_err();
        assert!(matches!(err, Error::SeriesTooShort(_)));
    }

    #[test]
    fn noise_free_peaks_are_accurate_and_increasing() {
        let cfg = TxConfig {
            k: 200,
            seed: 17,
            ..TxConfig::default()
        };
        let bits = generate_symbols(&cfg).unwrap();
        let durations = vec![cfg.t_s; cfg.k];
        let sched = build_emission_schedule(&bits, &durations, &cfg).unwrap();
        let pair = MoleculePair::new(79.4, 158.8).unwrap();
        let horizon = sched.end_time() + 2.0 * cfg.t_s;
        let series = synthesize_arrivals(&sched, &reference().geom, &pair, 1e-5, horizon, 3).unwrap();
        let est = estimate_sync_peaks(&series, &DetectorConfig::default(), &reference(), cfg.t_s, cfg.k).unwrap();
        let tp = reference().peak_time();
        let mean_err = est
            .t_sync_peak_hat()
            .iter()
            .zip(&sched.symbol_starts)
            .map(|(p, s)| (p - s - tp).abs())
            .sum::<f64>()
            / cfg.k as f64;
        assert!(mean_err < 3e-3, "{mean_err}");
        assert!(est.all_peaks().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(est.erasure_rate(), 0.0);
        // no symbol slips to a neighbouring pulse
        let bound = 0.02;
        for (p, s) in est.t_sync_peak_hat().iter().zip(&sched.symbol_starts) {
            assert!((p - s - tp).abs() < bound, "peak {p} for start {s}");
        }
    }

    #[test]
    fn injected_error_has_requested_mean_magnitude() {
        let peaks: Vec<f64> = (0..=100_000).map(|k| k as f64 * 0.38).collect();
        let est = SyncEstimate::new(peaks.clone(), vec![false; peaks.len()]).unwrap();
        assert_eq!(inject_sync_error(&est, 0.0, 0.38, 1).unwrap(), est);
        let out = inject_sync_error(&est, 0.05, 0.38, 1).unwrap();
        let mean: f64 = out
            .t_sync_peak_hat()
            .iter()
            .zip(&peaks)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 100_000.0
            / 0.38;
        assert!((mean - 0.05).abs() < 0.02 * 0.05, "{mean}");
        assert!(!out.reordered());
        let wild = inject_sync_error(&est, 2.0, 0.38, 1).unwrap();
        assert!(wild.reordered());
        assert!(wild.all_peaks().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn estimate_invariants() {
        assert!(SyncEstimate::new(vec![0.0], vec![false]).is_err());
        assert!(SyncEstimate::new(vec![1.0, 0.5], vec![false; 2]).is_err());
        let e = SyncEstimate::new(vec![0.1, 0.5, 0.8], vec![false, true, false]).unwrap();
        assert_eq!(e.k(), 2);
        assert_eq!(e.t_info_start_hat(), e.t_sync_peak_hat());
        let t = e.t_hat();
        assert!((t[0] - 0.4).abs() < 1e-12 && (t[1] - 0.3).abs() < 1e-12);
        assert_eq!(e.erasure_rate(), 0.5);
    }

    #[test]
    fn detector_config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            gate_fraction: 1.0,
            ..DetectorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            smooth_window: 0,
            ..DetectorConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
