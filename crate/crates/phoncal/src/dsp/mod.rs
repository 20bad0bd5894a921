//! Level metrology: A-weighting, equivalent levels, energetic channel
//! averaging, and calibrated WAV ingestion.
//!
//! The measurement quantity throughout is L_A,eq — the A-weighted
//! equivalent continuous level over a track's full duration, one number per
//! channel, combined across channels by energetic averaging.
//!
//! Digital samples carry no absolute level of their own, so every track has
//! a calibration constant: the dB SPL that a 0 dBFS *sine* would produce
//! through the same chain. Since a full-scale sine has RMS 1/√2, mapping
//! mean-square sample power to SPL adds `20·log10(√2) ≈ 3.0103 dB` on top
//! of that constant:
//!
//! ```text
//! L_A,eq = 10·log10(mean(y²)) + cal_constant_db + 20·log10(√2),
//!          y = a_weight(x)
//! ```
//!
//! Filtering uses cyclic (periodic steady-state) semantics — see
//! [`a_weight`] — which makes levels exactly invariant to circular time
//! shifts and free of startup transients.

pub mod aweight;
pub(crate) mod spectrum;
mod wav;

use std::path::Path;

pub use aweight::{analytic_a_weight_db, AWeighting, SUPPORTED_RATES};
use rustfft::num_complex::Complex64;
pub use wav::write_stereo_wav_f32;

use crate::{Error, Result};

/// A stereo track with the sidecar metadata needed to interpret its levels:
/// the calibration constant (dB SPL of a 0 dBFS sine) and the nominal
/// in-situ level it should be reproduced at.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedTrack {
    pub track_id: String,
    pub sample_rate: u32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// dB SPL produced by a 0 dBFS sine through the recording chain.
    pub cal_constant_db: f64,
    /// Target reproduction level, dB(A).
    pub nominal_laeq_db: f64,
}

impl CalibratedTrack {
    /// Validates and assembles a track: exactly two equal-length non-empty
    /// channels, a supported sample rate, and samples within [−1, 1].
    pub fn new(
        track_id: impl Into<String>,
        sample_rate: u32,
        left: Vec<f64>,
        right: Vec<f64>,
        cal_constant_db: f64,
        nominal_laeq_db: f64,
    ) -> Result<Self> {
        let track_id = track_id.into();
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(Error::UnsupportedSampleRate(sample_rate));
        }
        let invalid = |reason: String| Error::InvalidTrack {
            track_id: track_id.clone(),
            reason,
        };
        if left.is_empty() {
            return Err(invalid("track has no samples".into()));
        }
        if left.len() != right.len() {
            return Err(invalid(format!(
                "channel lengths differ: left {}, right {}",
                left.len(),
                right.len()
            )));
        }
        for (name, channel) in [("left", &left), ("right", &right)] {
            for (i, &v) in channel.iter().enumerate() {
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(invalid(format!(
                        "{name} sample {i} is {v}, outside [-1, 1]"
                    )));
                }
            }
        }
        if !cal_constant_db.is_finite() || !nominal_laeq_db.is_finite() {
            return Err(invalid("calibration metadata must be finite".into()));
        }
        Ok(CalibratedTrack {
            track_id,
            sample_rate,
            left,
            right,
            cal_constant_db,
            nominal_laeq_db,
        })
    }

    /// Loads a stereo WAV (PCM 16/24-bit or float 32-bit) and attaches the
    /// sidecar metadata.
    pub fn from_wav(
        path: &Path,
        track_id: impl Into<String>,
        cal_constant_db: f64,
        nominal_laeq_db: f64,
    ) -> Result<Self> {
        let (sample_rate, left, right) = wav::read_stereo_wav(path)?;
        CalibratedTrack::new(
            track_id,
            sample_rate,
            left,
            right,
            cal_constant_db,
            nominal_laeq_db,
        )
    }

    /// Frames per channel.
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    /// Largest absolute sample value across both channels.
    pub fn peak(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }
}

/// A left/right pair of channel levels in dB. Measurement paths guarantee
/// finiteness (the noise floor bounds levels from below); analysis paths
/// may carry the −∞ silent sentinel and say so where they do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPair {
    pub left_db: f64,
    pub right_db: f64,
}

/// Applies the A-weighting filter to a mono signal.
///
/// The signal is treated as one period of a periodic waveform (cyclic
/// steady-state filtering): the returned samples carry no startup
/// transient, and any level computed from them is exactly invariant to
/// circular time shifts of the input.
pub fn a_weight(samples: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok(AWeighting::new(sample_rate)?.filter_cyclic(samples))
}

/// `10·log10(mean(y²))` of the A-weighted signal, optionally including an
/// extra per-bin response (the rig's electrical/transduction path).
/// Returns −∞ for silent input.
pub(crate) fn weighted_ms_db(
    samples: &[f64],
    weighting: &AWeighting,
    extra_bins: Option<&[Complex64]>,
) -> f64 {
    let y = match extra_bins {
        None => weighting.filter_cyclic(samples),
        Some(bins) => {
            debug_assert_eq!(bins.len(), samples.len());
            spectrum::cyclic_filter(samples, |k, omega| {
                weighting.response_at_omega(omega) * bins[k]
            })
        }
    };
    let ms = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    10.0 * ms.log10()
}

/// A-weighted equivalent level of one channel, in dB(A):
/// `10·log10(mean(y²)) + cal_constant_db + 20·log10(√2)` with
/// `y = a_weight(samples)`.
///
/// An all-zero channel yields the −∞ sentinel ("silent"), which
/// participates in [`energetic_average`] as zero power.
pub fn laeq(samples: &[f64], sample_rate: u32, cal_constant_db: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    let weighting = AWeighting::new(sample_rate)?;
    Ok(weighted_ms_db(samples, &weighting, None)
        + cal_constant_db
        + 20.0 * std::f64::consts::SQRT_2.log10())
}

/// Energetic average of two levels:
/// `10·log10((10^(L/10) + 10^(R/10)) / 2)`.
///
/// −∞ inputs contribute zero power, so a silent channel halves the power of
/// the other (−3.0103 dB). The result always lies within
/// `[min(L, R), max(L, R)]`.
pub fn energetic_average(left_db: f64, right_db: f64) -> f64 {
    let power = (10f64.powf(left_db / 10.0) + 10f64.powf(right_db / 10.0)) / 2.0;
    10.0 * power.log10()
}

/// Per-channel A-weighted equivalent levels `(left, right)` of a track.
pub fn channel_laeq(track: &CalibratedTrack) -> Result<(f64, f64)> {
    let weighting = AWeighting::new(track.sample_rate)?;
    let offset = track.cal_constant_db + 20.0 * std::f64::consts::SQRT_2.log10();
    Ok((
        weighted_ms_db(&track.left, &weighting, None) + offset,
        weighted_ms_db(&track.right, &weighting, None) + offset,
    ))
}

/// A-weighted equivalent level of a stereo track: the energetic average of
/// the per-channel levels.
pub fn track_laeq(track: &CalibratedTrack) -> Result<f64> {
    let (left, right) = channel_laeq(track)?;
    Ok(energetic_average(left, right))
}

/// [`track_laeq`] over a batch, parallel across tracks when the `parallel`
/// feature is enabled. Output order matches input order.
pub fn batch_track_laeq(tracks: &[CalibratedTrack]) -> Vec<Result<f64>> {
    crate::map_maybe_parallel(tracks, true, track_laeq)
}

/// Sequential fallback of [`batch_track_laeq`]; the only difference is the
/// execution strategy, never the values.
pub fn batch_track_laeq_seq(tracks: &[CalibratedTrack]) -> Vec<Result<f64>> {
    crate::map_maybe_parallel(tracks, false, track_laeq)
}
