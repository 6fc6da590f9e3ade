mod common;

use common::{mean, table_geometry, variance, DT, D_INFO, D_SYNC, T_S};
use molsync::experiment::{ExperimentConfig, Trial};
use molsync::rng::derive_seed;
use molsync::rx::{noise_sigma, ClampMode};
use molsync::{
    add_counting_noise, build_emission_schedule, detect_symbols_fixed, estimate_sync_peaks, hitting_fraction,
    synthesize_arrivals, ArrivalSeries, Backend, DetectorConfig, EmissionSchedule, MoleculeKind, MoleculePair,
    NoiseConfig, SymbolSequence, SyncReference, TxConfig,
};

const N: f64 = 1000.0;

fn two_ones() -> EmissionSchedule {
    let c = TxConfig {
        k: 2,
        ..TxConfig::default()
    };
    build_emission_schedule(&SymbolSequence::new(vec![1, 1]).unwrap(), &[T_S, T_S], &c).unwrap()
}

fn replicas(n: usize) -> Vec<ArrivalSeries> {
    let g = table_geometry();
    let pair = MoleculePair::new(D_INFO, D_SYNC).unwrap();
    let sched = two_ones();
    (0..n)
        .map(|i| synthesize_arrivals(&sched, &g, &pair, DT, 1.0, derive_seed(31, i as u64)).unwrap())
        .collect()
}

fn big_f(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        hitting_fraction(&table_geometry(), D_INFO, t).unwrap()
    }
}

#[test]
fn arrivals_superpose_every_earlier_release() {
    let reps = replicas(1000);
    let r = reps.len() as f64;
    for t in [0.01, 0.03, 0.1, 0.2, 0.37, 0.39, 0.41, 0.5, 0.7, 0.9] {
        let (a, b) = (t, t + 0.01);
        let p1 = big_f(b) - big_f(a);
        let p2 = big_f(b - T_S) - big_f(a - T_S);
        let expected = N * (p1 + p2);
        let sd = (N * p1 * (1.0 - p1) + N * p2 * (1.0 - p2)).sqrt() / r.sqrt();
        let got = mean(
            &reps
                .iter()
                .map(|s| s.time_window_sum(MoleculeKind::Information, a, b))
                .collect::<Vec<_>>(),
        );
        assert!(
            (got - expected).abs() <= 3.0 * sd,
            "[{a}, {b}): {got} vs {expected} ± {sd}"
        );
    }
}

#[test]
fn cumulative_counts_have_binomial_variance() {
    let reps = replicas(1000);
    for t in [T_S / 4.0, T_S] {
        let counts: Vec<f64> = reps
            .iter()
            .map(|s| s.time_window_sum(MoleculeKind::Information, 0.0, t))
            .collect();
        let f = big_f(t);
        let ratio = variance(&counts) / (N * f * (1.0 - f));
        assert!((1.0 / 1.25..=1.25).contains(&ratio), "t={t}: ratio {ratio}");
        assert!((mean(&counts) - N * f).abs() < 4.0 * (N * f * (1.0 - f) / 1000.0).sqrt());
    }
}

#[test]
fn literal_threshold_misses_a_lone_symbol() {
    let g = table_geometry();
    let pair = MoleculePair::new(D_INFO, D_SYNC).unwrap();
    let c = TxConfig {
        k: 1,
        ..TxConfig::default()
    };
    let sched = build_emission_schedule(&SymbolSequence::new(vec![1]).unwrap(), &[T_S], &c).unwrap();
    let sums: Vec<f64> = (0..200)
        .map(|i| {
            let s = synthesize_arrivals(&sched, &g, &pair, DT, 1.0, i).unwrap();
            let bits = detect_symbols_fixed(&s, T_S, 1, 500.0).unwrap();
            assert_eq!(bits.bits(), &[0]);
            s.time_window_sum(MoleculeKind::Information, 0.0, T_S)
        })
        .collect();
    let f = big_f(T_S);
    assert!((N * f - 202.2).abs() < 0.1);
    assert!((mean(&sums) - N * f).abs() < 4.0 * (N * f * (1.0 - f) / 200.0).sqrt());
}

#[test]
fn noisy_bins_are_never_negative() {
    let g = table_geometry();
    let pair = MoleculePair::new(D_INFO, D_SYNC).unwrap();
    let clean = &replicas(1)[0];
    for clamp in [ClampMode::CarryDeficit, ClampMode::PerBin] {
        let noise = NoiseConfig {
            clamp,
            ..NoiseConfig::new(0.0, 5)
        };
        let s = add_counting_noise(clean, &g, &pair.info, 1000, &noise).unwrap();
        let s = add_counting_noise(&s, &g, &pair.sync, 1000, &noise).unwrap();
        for kind in [MoleculeKind::Information, MoleculeKind::Synchronization] {
            let counts = s.counts(kind);
            assert!(counts.iter().all(|&c| c >= 0.0), "{clamp:?}");
        }
    }
    // the carried deficit keeps window sums unbiased
    let sigma = noise_sigma(&g, D_INFO, 1000, DT, 0.0).unwrap();
    let carry = add_counting_noise(clean, &g, &pair.info, 1000, &NoiseConfig::new(0.0, 8)).unwrap();
    let drift = carry.total(MoleculeKind::Information) - clean.total(MoleculeKind::Information);
    assert!(drift.abs() < 6.0 * sigma * (clean.n_bins() as f64).sqrt(), "{drift}");
}

#[test]
fn noise_free_peaks_land_within_three_ms() {
    let c = TxConfig {
        k: 1000,
        seed: 99,
        ..TxConfig::default()
    };
    let bits = molsync::generate_symbols(&c).unwrap();
    let sched = build_emission_schedule(&bits, &vec![T_S; c.k], &c).unwrap();
    let g = table_geometry();
    let pair = MoleculePair::new(D_INFO, D_SYNC).unwrap();
    let series = synthesize_arrivals(&sched, &g, &pair, DT, sched.end_time() + 2.0 * T_S, 4).unwrap();
    let reference = SyncReference {
        geom: g,
        d_sync: D_SYNC,
        n_sync: 1000,
    };
    let est = estimate_sync_peaks(&series, &DetectorConfig::default(), &reference, T_S, c.k).unwrap();
    let tp = reference.peak_time();
    let errors: Vec<f64> = est
        .t_sync_peak_hat()
        .iter()
        .zip(&sched.symbol_starts)
        .map(|(p, s)| (p - s - tp).abs())
        .collect();
    assert!(mean(&errors) <= 3e-3, "mean error {}", mean(&errors));
    assert!(est.all_peaks().windows(2).all(|w| w[1] > w[0]));
    let bound = 2.0 * DetectorConfig::default().smooth_window as f64 * DT;
    assert!(errors.iter().all(|&e| e < bound));
}

#[test]
fn backends_share_one_receiver() {
    let text = "K = 20\nruns = 1\nthreshold = \"calibrated\"\nsnr_db = 8.0\n";
    let mut results = Vec::new();
    for backend in [Backend::AnalyticSample, Backend::Particle] {
        let mut cfg = ExperimentConfig::from_toml_str(text).unwrap();
        cfg.backend = backend;
        let trial = Trial::prepare(&cfg, 0).unwrap();
        let report = trial.evaluate(0.0).unwrap();
        assert_eq!(report.proposed.n_symbols, 20);
        assert!(report.proposed.e_bar < 0.02, "{backend}: {}", report.proposed.e_bar);
        assert!(report.proposed.ser <= 0.15, "{backend}: {}", report.proposed.ser);
        results.push(trial.bits.clone());
    }
    // same seeds, same transmitted bits
    assert_eq!(results[0], results[1]);
}
