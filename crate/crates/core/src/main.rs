use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use molsync::experiment::{
    emit_channel_curves, run_point, run_sweep, write_rows_csv, ExperimentConfig, RunSummary, SweepParam, Trial,
};
use molsync::{peak_time, Backend, ChannelGeometry, Error, Result};

#[derive(Parser)]
#[command(
    name = "molsync",
    version,
    about = "Per-symbol synchronization test-bench for diffusion-based molecular communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hitting-rate curves f(t) for several diffusion coefficients.
    Curves(CurvesArgs),
    /// One configuration point averaged over `runs` replicas.
    Run(Common),
    /// Sweep snr_db, sigma2_symbol or e_bar_target.
    Sweep(SweepArgs),
    /// Eye diagrams under peak-synchronized and fixed-clock alignment.
    Eye(EyeArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    backend: Option<Backend>,
    /// Overrides seed_base.
    #[arg(long)]
    seed: Option<u64>,
    /// Full scale: 100 runs of 10^5 symbols.
    #[arg(long)]
    full_scale: bool,
    /// Overrides runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the symbol count K.
    #[arg(long)]
    symbols: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(s) = self.seed {
            cfg.seed_base = s;
        }
        if self.full_scale {
            cfg = cfg.full_scale();
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(k) = self.symbols {
            cfg.k = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    r: f64,
    #[arg(long, default_value_t = 4.0)]
    d: f64,
    /// Comma-separated diffusion coefficients (µm²/s).
    #[arg(long, value_delimiter = ',', default_values_t = vec![79.4, 158.8, 520.0])]
    diffusion: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-5)]
    dt: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides sweep_param.
    #[arg(long)]
    param: Option<String>,
    /// Overrides sweep_values (comma-separated).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct EyeArgs {
    #[command(flatten)]
    common: Common,
    /// Trace length as a fraction of T_s.
    #[arg(long, default_value_t = 0.5)]
    span_fraction: f64,
    /// Sampling instant as a fraction of the trace length.
    #[arg(long, default_value_t = 1.0)]
    sample_fraction: f64,
    #[arg(long, default_value_t = 0)]
    run_index: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::Curves(a) => curves(&a, started),
        Command::Run(a) => run(&a, started),
        Command::Sweep(a) => sweep(&a, started),
        Command::Eye(a) => eye(&a, started),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn finish<T: Serialize>(
    command: &str,
    cfg: Option<&ExperimentConfig>,
    out: &Path,
    started: Instant,
    outputs: Vec<PathBuf>,
    results: T,
) -> Result<()> {
    let names = outputs.iter().map(|p| p.display().to_string()).collect();
    let summary_path = out.join(format!("summary_{command}.json"));
    RunSummary::new(command, cfg, started.elapsed().as_secs_f64(), names, results)?.write(&summary_path)?;
    for p in outputs.iter().chain(std::iter::once(&summary_path)) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct CurvePeak {
    diffusion: f64,
    argmax_t_s: f64,
    peak_time_s: f64,
}

fn curves(a: &CurvesArgs, started: Instant) -> Result<()> {
    let geom = ChannelGeometry::new(a.r, a.d)?;
    let c = emit_channel_curves(&geom, &a.diffusion, a.t_max, a.dt)?;
    let path = a.out.join("channel_curves.csv");
    c.write_csv(&path)?;
    let peaks: Vec<CurvePeak> = c
        .diffusions
        .iter()
        .zip(c.argmax_times())
        .map(|(&d, t)| CurvePeak {
            diffusion: d,
            argmax_t_s: t,
            peak_time_s: peak_time(&geom, d),
        })
        .collect();
    for p in &peaks {
        println!(
            "D = {:>7}  argmax f = {:.5} s  d^2/(6D) = {:.6} s",
            p.diffusion, p.argmax_t_s, p.peak_time_s
        );
    }
    finish("curves", None, &a.out, started, vec![path], peaks)
}

fn run(a: &Common, started: Instant) -> Result<()> {
    let cfg = a.load()?;
    let outcome = run_point(&cfg)?;
    let path = a.out.join("run.csv");
    write_rows_csv(&path, &outcome.rows)?;
    let row = &outcome.rows[0];
    println!(
        "SER proposed {:.5}  baseline {:.5}  e_bar {:.5}  erasures {:.5}  ({} runs x {} symbols, threshold {})",
        row.ser_proposed, row.ser_baseline, row.e_bar, row.erasure_rate, row.runs, cfg.k, row.threshold_mode
    );
    finish("run", Some(&cfg), &a.out, started, vec![path], &outcome)
}

fn sweep(a: &SweepArgs, started: Instant) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(p) = &a.param {
        cfg.sweep_param = Some(p.parse::<SweepParam>()?);
    }
    if let Some(v) = &a.values {
        cfg.sweep_values = v.clone();
    }
    cfg.validate()?;
    let param = cfg
        .sweep_param
        .ok_or_else(|| Error::Config("no sweep parameter: set sweep_param or pass --param".into()))?;
    let path = a.common.out.join(format!("sweep_{param}.csv"));
    let outcome = run_sweep(&cfg, Some(&path))?;
    println!(
        "{:>14} {:>12} {:>12} {:>10} {:>10}",
        param.as_str(),
        "SER_prop",
        "SER_base",
        "e_bar",
        "erasures"
    );
    for r in &outcome.rows {
        println!(
            "{:>14} {:>12.5} {:>12.5} {:>10.5} {:>10.5}",
            r.sweep_value, r.ser_proposed, r.ser_baseline, r.e_bar, r.erasure_rate
        );
    }
    finish("sweep", Some(&cfg), &a.common.out, started, vec![path], &outcome)
}

#[derive(Serialize)]
struct EyeResult {
    alignment: &'static str,
    eye_height: f64,
    eye_width_s: f64,
}

fn eye(a: &EyeArgs, started: Instant) -> Result<()> {
    let cfg = a.common.load()?;
    let trial = Trial::prepare(&cfg, a.run_index)?;
    let (proposed, fixed) = trial.eyes(a.span_fraction * cfg.t_s, a.sample_fraction)?;
    let p_path = a.common.out.join("eye_proposed.csv");
    let f_path = a.common.out.join("eye_fixed.csv");
    proposed.write_csv(&p_path)?;
    fixed.write_csv(&f_path)?;
    let results = vec![
        EyeResult {
            alignment: "proposed",
            eye_height: proposed.eye_height,
            eye_width_s: proposed.eye_width,
        },
        EyeResult {
            alignment: "fixed",
            eye_height: fixed.eye_height,
            eye_width_s: fixed.eye_width,
        },
    ];
    for r in &results {
        println!(
            "{:>8}: eye height {:+.4}  eye width {:.4} s",
            r.alignment, r.eye_height, r.eye_width_s
        );
    }
    finish("eye", Some(&cfg), &a.common.out, started, vec![p_path, f_path], results)
}
