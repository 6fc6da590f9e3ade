//! Receiver: channel application, counting noise, sync-peak estimation and
//! the two threshold detectors.

pub mod arrivals;
pub mod detect;
pub mod noise;
pub mod series;
pub mod sync;

pub use arrivals::{synthesize, synthesize_arrivals, synthesize_arrivals_particle, Backend, ParticleOverrides};
pub use detect::{detect_symbols_fixed, detect_symbols_synced, ThresholdRule};
pub use noise::{add_counting_noise, noise_sigma, peak_bin_count, NoiseConfig};
pub use series::{ArrivalSeries, ClampMode, BLOCK_BINS};
pub use sync::{estimate_sync_peaks, inject_sync_error, DetectorConfig, SyncEstimate, SyncReference};
