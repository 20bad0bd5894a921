//! Calibration toolkit for reproducing binaural soundscape recordings over
//! headphones at their original in-situ levels.
//!
//! Two calibration strategies are modeled end to end:
//!
//! * **Open-circuit-voltage (OCV) calibration** — compute, from the
//!   headphone's rated sensitivity, the RMS voltage a reference tone must
//!   present at the headphone terminals ([`sensitivity`]), set the analog
//!   gain once, and play every track at a fixed digital gain.
//! * **Measurement-based calibration** — drive a simulated
//!   playback-and-measurement chain ([`rig`]) and search per track for the
//!   digital gain that reproduces the target A-weighted level within
//!   tolerance ([`calibrate`]), over multiple runs with simulated headphone
//!   re-seating.
//!
//! Level metrology (A-weighting, equivalent levels, energetic channel
//! averaging, WAV ingestion) lives in [`dsp`]; deviation tables and summary
//! statistics in [`report`]; JSON/CSV persistence in [`manifest`];
//! deterministic synthesis of the bundled demo dataset in [`synth`].
//!
//! All level math is double-precision and deterministic: identical inputs
//! (including RNG seeds) produce identical outputs, byte for byte, which the
//! session file format relies on.
//!
//! # Example
//!
//! ```
//! use phoncal::sensitivity::{HeadphoneSpec, ReferenceTone, required_voltage};
//!
//! // 94 dB SPL at 1 kHz from a headphone rated 99.14 dB SPL per volt.
//! let spec = HeadphoneSpec::flat_db_per_volt(99.14, 250.0);
//! let tone = ReferenceTone::default();
//! let volts = required_voltage(&tone, &spec).unwrap();
//! assert!((volts - 0.5534).abs() < 5e-4);
//! ```

// Validation guards are written in the negated form (`!(x > 0.0)`) on
// purpose: unlike `x <= 0.0`, it also rejects NaN input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod dsp;
pub mod manifest;
pub mod report;
pub mod rig;
pub mod sensitivity;
pub mod synth;

use std::path::PathBuf;

/// Crate-wide error type.
///
/// Domain violations (non-positive impedance, out-of-range frequencies,
/// malformed tracks) are reported eagerly at the call that detects them;
/// calibration *failures* (below the noise floor, iteration cap) are not
/// errors but recorded outcomes — see [`calibrate::CalibrationRun`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("impedance must be positive, got {0} ohm")]
    NonPositiveImpedance(f64),
    #[error("power must be positive, got {0} mW")]
    NonPositivePower(f64),
    #[error("voltage must be positive, got {0} V")]
    NonPositiveVoltage(f64),
    #[error(
        "frequency {frequency_hz} Hz outside the tabulated range \
         {min_hz}..={max_hz} Hz (no extrapolation)"
    )]
    CurveDomain {
        frequency_hz: f64,
        min_hz: f64,
        max_hz: f64,
    },
    #[error("invalid frequency curve: {0}")]
    InvalidCurve(String),
    #[error("unsupported sample rate {0} Hz (supported: 44100, 48000)")]
    UnsupportedSampleRate(u32),
    #[error("signal is empty")]
    EmptySignal,
    #[error("invalid track {track_id}: {reason}")]
    InvalidTrack { track_id: String, reason: String },
    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),
    #[error(
        "insufficient output headroom: calibration needs {required_vrms:.4} V RMS \
         but the soundcard delivers at most {available_vrms:.4} V RMS"
    )]
    InsufficientHeadroom {
        required_vrms: f64,
        available_vrms: f64,
    },
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("report has no rows: {0}")]
    EmptyReport(String),
    #[error("unsupported schema_version {found} (this build reads version {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("levels CSV line {line}: {message}")]
    LevelsParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Maps `f` over `items`, using the rayon thread pool when the `parallel`
/// feature is enabled and `parallel` is true; otherwise sequentially.
///
/// Output order always matches input order, so results are deterministic
/// regardless of execution mode.
pub(crate) fn map_maybe_parallel<T, U, F>(items: &[T], parallel: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}
