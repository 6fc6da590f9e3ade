//! End-to-end runs and parameter sweeps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParam};
use crate::channel::{peak_time, ChannelGeometry, MoleculeKind, MoleculePair};
use crate::error::{Error, Result};
use crate::metrics::{eye_diagram, normalized_sync_error, symbol_error_rate, EyeDiagram, EyeOptions, MetricsReport};
use crate::rng::{derive_seed, TAG_CHANNEL, TAG_NOISE, TAG_SYNC_ERROR};
use crate::rx::{
    add_counting_noise, detect_symbols_fixed, detect_symbols_synced, estimate_sync_peaks, inject_sync_error,
    synthesize, ArrivalSeries, SyncEstimate,
};
use crate::tx::{build_emission_schedule, draw_symbol_durations, generate_symbols, EmissionSchedule, SymbolSequence};

/// Metrics of one run for both receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_index: usize,
    pub proposed: MetricsReport,
    pub baseline: MetricsReport,
    /// Injected sync errors had to be re-sorted.
    pub sync_reordered: bool,
}

/// One transmitted and received realisation, kept so several receiver
/// settings can be scored on the same channel draw.
#[derive(Debug, Clone)]
pub struct Trial {
    pub run_index: usize,
    pub run_seed: u64,
    pub bits: SymbolSequence,
    pub schedule: EmissionSchedule,
    /// Noisy counts of both molecule types.
    pub series: ArrivalSeries,
    pub estimate: SyncEstimate,
    geom: ChannelGeometry,
    molecules: MoleculePair,
    t_s: f64,
    n_info: u32,
    threshold: f64,
}

impl Trial {
    /// Transmits, propagates, adds noise and estimates the sync peaks.
    pub fn prepare(cfg: &ExperimentConfig, run_index: usize) -> Result<Self> {
        cfg.validate()?;
        let run_seed = derive_seed(cfg.seed_base, run_index as u64);
        let geom = cfg.geometry()?;
        let molecules = cfg.molecules()?;
        let tx = cfg.tx_config(run_seed);
        let bits = generate_symbols(&tx)?;
        let durations = draw_symbol_durations(&tx)?;
        let schedule = build_emission_schedule(&bits, &durations, &tx)?;
        // the fixed-clock receiver reads up to K·T_s whatever the real durations
        let horizon = schedule.end_time().max(cfg.k as f64 * cfg.t_s) + cfg.tail_symbols * cfg.t_s;
        let clean = synthesize(
            cfg.backend,
            &schedule,
            &geom,
            &molecules,
            cfg.delta_t,
            horizon,
            derive_seed(run_seed, TAG_CHANNEL),
        )?;
        let noise = cfg.noise_config(derive_seed(run_seed, TAG_NOISE));
        let series = add_counting_noise(&clean, &geom, &molecules.info, cfg.n_info, &noise)?;
        let series = add_counting_noise(&series, &geom, &molecules.sync, cfg.n_sync, &noise)?;
        let estimate = estimate_sync_peaks(&series, &cfg.detector_config(), &cfg.sync_reference()?, cfg.t_s, cfg.k)?;
        Ok(Trial {
            run_index,
            run_seed,
            bits,
            schedule,
            series,
            estimate,
            geom,
            molecules,
            t_s: cfg.t_s,
            n_info: cfg.n_info,
            threshold: cfg.threshold_count()?,
        })
    }

    /// Decision threshold in molecules.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Sync estimate with injected error of mean magnitude
    /// `e_bar_target·T_s`.
    pub fn perturbed_estimate(&self, e_bar_target: f64) -> Result<SyncEstimate> {
        inject_sync_error(
            &self.estimate,
            e_bar_target,
            self.t_s,
            derive_seed(self.run_seed, TAG_SYNC_ERROR),
        )
    }

    /// Scores both receivers, with `e_bar_target` injected into the
    /// proposed receiver's peaks.
    pub fn evaluate(&self, e_bar_target: f64) -> Result<RunReport> {
        let est = self.perturbed_estimate(e_bar_target)?;
        let k = self.bits.len();
        let starts = &self.schedule.symbol_starts;
        let durations = &self.schedule.durations;
        let d_sync = self.molecules.sync.diffusion;

        let synced = detect_symbols_synced(&self.series, &est, self.threshold);
        let proposed = MetricsReport::new(
            symbol_error_rate(&self.bits, &synced)?,
            normalized_sync_error(&est, starts, &self.geom, d_sync, durations)?,
            est.erasure_rate(),
            k,
        );

        let fixed = detect_symbols_fixed(&self.series, self.t_s, k, self.threshold)?;
        let clock = self.fixed_clock_estimate()?;
        let baseline = MetricsReport::new(
            symbol_error_rate(&self.bits, &fixed)?,
            normalized_sync_error(&clock, starts, &self.geom, d_sync, durations)?,
            0.0,
            k,
        );
        Ok(RunReport {
            run_index: self.run_index,
            proposed,
            baseline,
            sync_reordered: est.reordered(),
        })
    }

    /// Where a receiver on the nominal clock assumes the sync peaks are.
    fn fixed_clock_estimate(&self) -> Result<SyncEstimate> {
        let tp = peak_time(&self.geom, self.molecules.sync.diffusion);
        let k = self.bits.len();
        SyncEstimate::new((0..=k).map(|i| i as f64 * self.t_s + tp).collect(), vec![false; k + 1])
    }

    /// Eye diagrams under peak-synchronized and fixed-clock alignment.
    pub fn eyes(&self, span: f64, sample_fraction: f64) -> Result<(EyeDiagram, EyeDiagram)> {
        let mut opts = EyeOptions::new(span, self.n_info);
        opts.sample_fraction = sample_fraction;
        let proposed = eye_diagram(&self.series, self.estimate.t_info_start_hat(), &self.bits, &opts)?;
        let clock: Vec<f64> = (0..self.bits.len()).map(|i| i as f64 * self.t_s).collect();
        let fixed = eye_diagram(&self.series, &clock, &self.bits, &opts)?;
        Ok((proposed, fixed))
    }

    pub fn total_info_arrivals(&self) -> f64 {
        self.series.total(MoleculeKind::Information)
    }
}

/// Runs the full pipeline once; deterministic in `(seed_base, run_index)`.
pub fn run_single(cfg: &ExperimentConfig, run_index: usize) -> Result<RunReport> {
    Trial::prepare(cfg, run_index)?.evaluate(cfg.e_bar_target)
}

/// Averaged results of one configuration point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub ser_proposed: f64,
    pub ser_baseline: f64,
    pub e_bar: f64,
    pub erasure_rate: f64,
    pub runs: usize,
    pub total_symbols: usize,
    pub threshold_mode: String,
    pub fingerprint: String,
}

pub const RESULT_HEADER: &str =
    "sweep_param,sweep_value,ser_proposed,ser_baseline,e_bar,erasure_rate,runs,total_symbols,threshold_mode,fingerprint";

impl ResultRow {
    /// Averages per-run reports (sorted by run index first).
    pub fn aggregate(cfg: &ExperimentConfig, param: &str, value: f64, reports: &mut [RunReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("no runs to aggregate"));
        }
        reports.sort_by_key(|r| r.run_index);
        let n = reports.len() as f64;
        let mean = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(ResultRow {
            sweep_param: param.to_string(),
            sweep_value: value,
            ser_proposed: mean(&|r| r.proposed.ser),
            ser_baseline: mean(&|r| r.baseline.ser),
            e_bar: mean(&|r| r.proposed.e_bar),
            erasure_rate: mean(&|r| r.proposed.erasure_rate),
            runs: reports.len(),
            total_symbols: reports.iter().map(|r| r.proposed.n_symbols).sum(),
            threshold_mode: cfg.threshold.label(),
            fingerprint: cfg.fingerprint(),
        })
    }

    fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            self.sweep_param,
            self.sweep_value,
            self.ser_proposed,
            self.ser_baseline,
            self.e_bar,
            self.erasure_rate,
            self.runs,
            self.total_symbols,
            self.threshold_mode,
            self.fingerprint
        )
    }
}

pub fn write_rows_csv_to(rows: &[ResultRow], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{RESULT_HEADER}")?;
    rows.iter().try_for_each(|r| r.write_to(w))
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    crate::io::write_atomic(path, |w| write_rows_csv_to(rows, w))
}

/// A sweep's rows plus every per-run report, grouped by sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<Vec<RunReport>>,
}

/// Averages `cfg.runs` runs at one configuration point.
pub fn run_point(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut reports = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_single(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let row = ResultRow::aggregate(cfg, "none", f64::NAN, &mut reports)?;
    Ok(SweepOutcome {
        rows: vec![row],
        runs: vec![reports],
    })
}

/// Runs every sweep value with `cfg.runs` replicas and optionally writes
/// the rows to `out`.
///
/// Every sweep value reuses the same run seeds, so neighbouring points
/// differ only in the swept parameter. An `e_bar_target` sweep also reuses
/// each run's channel draw and peak estimate.
pub fn run_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutcome> {
    cfg.validate()?;
    let param = cfg
        .sweep_param
        .ok_or_else(|| Error::Config("sweep needs sweep_param and sweep_values".into()))?;
    let values = &cfg.sweep_values;

    let mut grid: Vec<Vec<RunReport>> = vec![Vec::with_capacity(cfg.runs); values.len()];
    if param == SweepParam::EBarTarget {
        let per_run = (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let trial = Trial::prepare(cfg, i)?;
                values.iter().map(|&v| trial.evaluate(v)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for reports in per_run {
            for (slot, r) in grid.iter_mut().zip(reports) {
                slot.push(r);
            }
        }
    } else {
        let jobs: Vec<(usize, usize)> = (0..values.len())
            .flat_map(|v| (0..cfg.runs).map(move |i| (v, i)))
            .collect();
        let done = jobs
            .par_iter()
            .map(|&(v, i)| run_single(&cfg.at(param, values[v]), i).map(|r| (v, r)))
            .collect::<Result<Vec<_>>>()?;
        for (v, r) in done {
            grid[v].push(r);
        }
    }

    let mut rows = Vec::with_capacity(values.len());
    for (&v, reports) in values.iter().zip(grid.iter_mut()) {
        rows.push(ResultRow::aggregate(&cfg.at(param, v), param.as_str(), v, reports)?);
    }
    if let Some(path) = out {
        write_rows_csv(path, &rows)?;
    }
    Ok(SweepOutcome { rows, runs: grid })
}
