//! Simulator and test-bench for per-symbol synchronization in diffusion-based
//! molecular communication.
//!
//! A point transmitter releases information molecules (on-off keyed) and
//! faster synchronization molecules (every symbol) towards a fully absorbing
//! spherical receiver. The receiver locates each sync arrival peak and counts
//! information molecules from one peak to the next, which tolerates symbol
//! durations that drift around the nominal `T_s`.

pub mod brownian;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod rx;
pub mod special;
pub mod tx;

pub use brownian::{empirical_fraction, simulate_first_hits, HitRecord, ParticleSimConfig};
pub use channel::{
    hitting_fraction, hitting_rate, peak_time, sample_hit_time, ChannelGeometry, MoleculeKind, MoleculePair,
    MoleculeSpec,
};
pub use error::{Error, Result};
pub use metrics::{eye_diagram, normalized_sync_error, symbol_error_rate, EyeDiagram, MetricsReport};
pub use rx::{
    add_counting_noise, detect_symbols_fixed, detect_symbols_synced, estimate_sync_peaks, inject_sync_error,
    synthesize_arrivals, synthesize_arrivals_particle, ArrivalSeries, Backend, DetectorConfig, NoiseConfig,
    SyncEstimate, SyncReference, ThresholdRule,
};
pub use tx::{
    build_emission_schedule, draw_symbol_durations, generate_symbols, EmissionSchedule, SymbolSequence, TxConfig,
};
