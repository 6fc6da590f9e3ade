//! Symbol error rate, normalized synchronization error and eye diagrams.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{peak_time, ChannelGeometry, MoleculeKind};
use crate::error::{Error, Result};
use crate::rx::{ArrivalSeries, SyncEstimate};
use crate::tx::SymbolSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ser: f64,
    pub e_bar: f64,
    pub erasure_rate: f64,
    /// Only filled in when an eye diagram was extracted.
    pub eye_height: Option<f64>,
    pub eye_width: Option<f64>,
    pub n_symbols: usize,
    /// `e_bar` exceeds 1, which only happens under injected error.
    pub e_bar_flagged: bool,
}

impl MetricsReport {
    pub fn new(ser: f64, e_bar: f64, erasure_rate: f64, n_symbols: usize) -> Self {
        MetricsReport {
            ser,
            e_bar,
            erasure_rate,
            eye_height: None,
            eye_width: None,
            n_symbols,
            e_bar_flagged: e_bar > 1.0,
        }
    }
}

/// Fraction of positions where the two sequences differ.
pub fn symbol_error_rate(tx_bits: &SymbolSequence, rx_bits: &SymbolSequence) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::invalid(format!(
            "sequence lengths differ: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(Error::invalid("cannot score an empty sequence"));
    }
    let errors = tx_bits
        .bits()
        .iter()
        .zip(rx_bits.bits())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// `ē = mean |t̂(k) − t(k)| / mean T(k)` with the analytic reference
/// `t(k) = start(k) + d²/(6·D_sync)`.
pub fn normalized_sync_error(
    est: &SyncEstimate,
    truth_starts: &[f64],
    geom: &ChannelGeometry,
    d_sync: f64,
    durations: &[f64],
) -> Result<f64> {
    let k = est.k();
    if truth_starts.len() != k || durations.len() != k {
        return Err(Error::invalid(format!(
            "estimate covers {k} symbols but got {} starts and {} durations",
            truth_starts.len(),
            durations.len()
        )));
    }
    let tp = peak_time(geom, d_sync);
    let abs_err: f64 = est
        .t_sync_peak_hat()
        .iter()
        .zip(truth_starts)
        .map(|(e, s)| (e - s - tp).abs())
        .sum();
    let total: f64 = durations.iter().sum();
    Ok(abs_err / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeOptions {
    /// Trace length in seconds.
    pub span: f64,
    /// Sampling instant as a fraction of `span`.
    pub sample_fraction: f64,
    /// Normalization of the cumulative counts.
    pub n_info: u32,
    /// Traces kept for export; the eye metrics always use every symbol.
    pub max_traces: usize,
    /// Points per exported trace.
    pub export_points: usize,
}

impl EyeOptions {
    pub fn new(span: f64, n_info: u32) -> Self {
        EyeOptions {
            span,
            sample_fraction: 1.0,
            n_info,
            max_traces: 200,
            export_points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeTrace {
    pub symbol_index: usize,
    pub bit: u8,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeDiagram {
    /// Offsets of the exported trace points.
    pub t_offsets: Vec<f64>,
    pub traces: Vec<EyeTrace>,
    /// Lowest '1' trace minus highest '0' trace at the sampling instant.
    pub eye_height: f64,
    /// Longest stretch of offsets over which the eye is open, in seconds.
    pub eye_width: f64,
    /// Per-offset opening `min₁ − max₀` at bin resolution.
    pub opening: Vec<f64>,
}

impl EyeDiagram {
    /// CSV with columns `symbol_index,bit,t_offset_s,normalized_cumulative_count`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, |w| self.write_csv_to(w))
    }

    pub fn write_csv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "symbol_index,bit,t_offset_s,normalized_cumulative_count")?;
        for tr in &self.traces {
            for (t, v) in self.t_offsets.iter().zip(&tr.values) {
                writeln!(w, "{},{},{},{}", tr.symbol_index, tr.bit, t, v)?;
            }
        }
        Ok(())
    }
}

/// Overlays the cumulative information count of every symbol, started at
/// `starts[k]` and normalized by `n_info`.
///
/// Traces are expected to fit inside their symbol (`span` no longer than the
/// shortest duration); longer spans simply run into the next symbol.
pub fn eye_diagram(
    series: &ArrivalSeries,
    starts: &[f64],
    bits: &SymbolSequence,
    opts: &EyeOptions,
) -> Result<EyeDiagram> {
    if starts.len() != bits.len() {
        return Err(Error::invalid(format!(
            "{} starts for {} symbols",
            starts.len(),
            bits.len()
        )));
    }
    if !(opts.span.is_finite() && opts.span > 0.0) {
        return Err(Error::invalid(format!("eye span must be > 0, got {}", opts.span)));
    }
    if !(0.0..=1.0).contains(&opts.sample_fraction) {
        return Err(Error::invalid(format!(
            "sample_fraction must lie in [0, 1], got {}",
            opts.sample_fraction
        )));
    }
    if opts.n_info == 0 {
        return Err(Error::invalid("n_info must be >= 1"));
    }
    let ones = bits.ones();
    if ones == 0 || ones == bits.len() {
        return Err(Error::UndefinedEye(format!(
            "need both bit values, got {ones} ones in {} symbols",
            bits.len()
        )));
    }

    let dt = series.bin_width();
    let n = ((opts.span / dt).round() as usize).max(1);
    let norm = 1.0 / opts.n_info as f64;
    let stride = n.div_ceil(opts.export_points.max(1)).max(1);
    let export_idx: Vec<usize> = (0..=n).step_by(stride).collect();
    // point j is the count over the first j bins
    let mut min_one = vec![f64::INFINITY; n + 1];
    let mut max_zero = vec![f64::NEG_INFINITY; n + 1];
    let mut traces = Vec::new();
    let mut bins = Vec::with_capacity(n);
    let mut cum = vec![0.0; n + 1];

    for (k, (&s, &b)) in starts.iter().zip(bits.bits()).enumerate() {
        let i0 = series.bin_at(s);
        series.read_into(MoleculeKind::Information, i0, i0 + n, &mut bins);
        for (j, v) in bins.iter().enumerate() {
            cum[j + 1] = cum[j] + v * norm;
        }
        if b == 1 {
            min_one.iter_mut().zip(&cum).for_each(|(m, c)| *m = m.min(*c));
        } else {
            max_zero.iter_mut().zip(&cum).for_each(|(m, c)| *m = m.max(*c));
        }
        if traces.len() < opts.max_traces {
            traces.push(EyeTrace {
                symbol_index: k,
                bit: b,
                values: export_idx.iter().map(|&j| cum[j]).collect(),
            });
        }
    }

    let opening: Vec<f64> = min_one.iter().zip(&max_zero).map(|(a, b)| a - b).collect();
    let j_star = (opts.sample_fraction * n as f64).round() as usize;
    let mut longest = 0;
    let mut run = 0;
    for &o in &opening {
        run = if o > 0.0 { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    Ok(EyeDiagram {
        t_offsets: export_idx.iter().map(|&j| j as f64 * dt).collect(),
        traces,
        eye_height: opening[j_star],
        eye_width: (longest.min(n) as f64 * dt).min(opts.span),
        opening,
    })
}
