//! Hitting-rate curves for several diffusion coefficients on one time grid.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{check_diffusion, hitting_rate_unchecked, ChannelGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCurves {
    pub diffusions: Vec<f64>,
    pub t: Vec<f64>,
    /// `rates[i][j]` is `f(t[j])` for `diffusions[i]`.
    pub rates: Vec<Vec<f64>>,
}

impl ChannelCurves {
    /// Grid time of each curve's maximum.
    pub fn argmax_times(&self) -> Vec<f64> {
        self.rates
            .iter()
            .map(|row| {
                let j = row
                    .iter()
                    .enumerate()
                    .fold(0, |best, (j, v)| if *v > row[best] { j } else { best });
                self.t[j]
            })
            .collect()
    }

    /// CSV with a `t_s` column and one `f_<D>` column per coefficient.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, |w| self.write_csv_to(w))
    }

    pub fn write_csv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        write!(w, "t_s")?;
        for d in &self.diffusions {
            write!(w, ",f_{d}")?;
        }
        writeln!(w)?;
        for (j, t) in self.t.iter().enumerate() {
            write!(w, "{t}")?;
            for row in &self.rates {
                write!(w, ",{}", row[j])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Evaluates `f(t)` on `t = j·dt` for `j = 0..=t_max/dt`.
pub fn emit_channel_curves(geom: &ChannelGeometry, diffusions: &[f64], t_max: f64, dt: f64) -> Result<ChannelCurves> {
    geom.validate()?;
    if diffusions.is_empty() {
        return Err(Error::invalid("need at least one diffusion coefficient"));
    }
    for &d in diffusions {
        check_diffusion(d)?;
    }
    if !(dt.is_finite() && dt > 0.0 && t_max.is_finite() && t_max >= dt) {
        return Err(Error::invalid(format!(
            "need 0 < dt <= t_max, got dt={dt}, t_max={t_max}"
        )));
    }
    let n = (t_max / dt * (1.0 + 1e-12)).floor() as usize;
    let t: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
    let rates = diffusions
        .iter()
        .map(|&d| t.iter().map(|&x| hitting_rate_unchecked(geom, d, x)).collect())
        .collect();
    Ok(ChannelCurves {
        diffusions: diffusions.to_vec(),
        t,
        rates,
    })
}
