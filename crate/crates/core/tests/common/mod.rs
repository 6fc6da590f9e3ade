#![allow(dead_code)]

use molsync::channel::hitting_fraction_inverse;
use molsync::experiment::ExperimentConfig;
use molsync::{hitting_fraction, ChannelGeometry, HitRecord};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const D_INFO: f64 = 79.4;
pub const D_SYNC: f64 = 158.8;
pub const T_S: f64 = 0.38;
pub const DT: f64 = 1e-5;

pub fn table_geometry() -> ChannelGeometry {
    ChannelGeometry::new(2.0, 4.0).unwrap()
}

/// Composite Simpson rule with step close to `h`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let mut n = ((b - a) / h).ceil() as usize;
    n += n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Pearson statistic and p-value of recorded hit times against the
/// conditional hitting distribution on `[0, t_max]`, using `bins`
/// equal-probability bins whose edges are snapped to the `dt` grid.
pub fn hit_time_chi_square(
    rec: &HitRecord,
    geom: &ChannelGeometry,
    d: f64,
    t_max: f64,
    dt: f64,
    bins: usize,
) -> (f64, f64) {
    let big_f = |t: f64| hitting_fraction(geom, d, t).unwrap();
    let total = big_f(t_max);
    let n = rec.hit_times.len() as f64;
    let mut edges = vec![0.0];
    for k in 1..bins {
        let t = hitting_fraction_inverse(geom, d, total * k as f64 / bins as f64)
            .unwrap()
            .unwrap();
        edges.push((t / dt).round() * dt);
    }
    edges.push(t_max);
    let mut times = rec.hit_times.clone();
    times.sort_by(f64::total_cmp);
    let below = |t: f64| times.partition_point(|&x| x <= t + 0.5 * dt) as f64;
    let stat: f64 = edges
        .windows(2)
        .map(|w| {
            let expected = n * (big_f(w[1]) - big_f(w[0])) / total;
            let observed = below(w[1]) - below(w[0]);
            (observed - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    (stat, p)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Small, fast configuration for pipeline tests.
pub fn quick_config(extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!("K = 40\nruns = 3\nthreshold = \"calibrated\"\n{extra}")).unwrap()
}
