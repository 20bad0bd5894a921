//! Stereo WAV ingestion (PCM 16/24-bit integer and 32-bit float) and the
//! float writer used by the synthetic demo dataset.

use std::path::Path;

use crate::{Error, Result};

/// Reads a stereo WAV file, returning `(sample_rate, left, right)` with
/// samples normalized to [−1, 1].
///
/// Accepted encodings: PCM integer at 16 or 24 bits, and IEEE float at 32
/// bits. Anything else — including mono or multichannel layouts — is
/// rejected with a descriptive error; sample-rate policy is enforced later
/// by [`super::CalibratedTrack::new`].
pub(crate) fn read_stereo_wav(path: &Path) -> Result<(u32, Vec<f64>, Vec<f64>)> {
    let track_id = path.display().to_string();
    let invalid = |reason: String| Error::InvalidTrack {
        track_id: track_id.clone(),
        reason,
    };

    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 2 {
        return Err(invalid(format!(
            "expected 2 channels, file has {}",
            spec.channels
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| f64::from(v) / 8388608.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => {
            let samples: Vec<f64> = reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?;
            for (i, &v) in samples.iter().enumerate() {
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(invalid(format!(
                        "float sample {i} is {v}, outside [-1, 1]"
                    )));
                }
            }
            samples
        }
        (format, bits) => {
            return Err(invalid(format!(
                "unsupported encoding {format:?} at {bits} bits \
                 (supported: 16/24-bit PCM, 32-bit float)"
            )));
        }
    };

    let frames = interleaved.len() / 2;
    let mut left = Vec::with_capacity(frames);
    let mut right = Vec::with_capacity(frames);
    for frame in interleaved.chunks_exact(2) {
        left.push(frame[0]);
        right.push(frame[1]);
    }
    Ok((spec.sample_rate, left, right))
}

/// Writes a stereo 32-bit float WAV. Sample values must already be within
/// [−1, 1]; the demo synthesizer guarantees that by construction.
pub fn write_stereo_wav_f32(
    path: &Path,
    sample_rate: u32,
    left: &[f64],
    right: &[f64],
) -> Result<()> {
    assert_eq!(left.len(), right.len(), "channel lengths must match");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for (l, r) in left.iter().zip(right) {
        writer.write_sample(*l as f32)?;
        writer.write_sample(*r as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_wav() -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        (dir, path)
    }

    #[test]
    fn float_round_trip_is_f32_exact() {
        let (_dir, path) = temp_wav();
        let left = [0.5, -0.25, 0.0, 1.0];
        let right = [-1.0, 0.125, 0.75, -0.5];
        write_stereo_wav_f32(&path, 48000, &left, &right).unwrap();
        let (rate, l, r) = read_stereo_wav(&path).unwrap();
        assert_eq!(rate, 48000);
        assert_eq!(l, left);
        assert_eq!(r, right);
    }

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let (_dir, path) = temp_wav();
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        let values = [0.5f64, -0.5, 0.999, -1.0];
        for v in values {
            let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(q).unwrap(); // L
            w.write_sample(0i16).unwrap(); // R
        }
        w.finalize().unwrap();
        let (rate, l, r) = read_stereo_wav(&path).unwrap();
        assert_eq!(rate, 44100);
        for (got, want) in l.iter().zip(values) {
            assert!((got - want).abs() <= 1.0 / 32768.0);
        }
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pcm24_round_trip_within_one_lsb() {
        let (_dir, path) = temp_wav();
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 48000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        let values = [0.25f64, -0.125, 0.8125];
        for v in values {
            let q = (v * 8388607.0).round() as i32;
            w.write_sample(q).unwrap();
            w.write_sample(-q).unwrap();
        }
        w.finalize().unwrap();
        let (_, l, r) = read_stereo_wav(&path).unwrap();
        for ((got_l, got_r), want) in l.iter().zip(&r).zip(values) {
            assert!((got_l - want).abs() <= 1.0 / 8388608.0);
            assert!((got_r + want).abs() <= 1.0 / 8388608.0);
        }
    }

    #[test]
    fn rejects_mono_files() {
        let (_dir, path) = temp_wav();
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_stereo_wav(&path),
            Err(Error::InvalidTrack { .. })
        ));
    }

    #[test]
    fn rejects_float_samples_beyond_full_scale() {
        let (_dir, path) = temp_wav();
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(1.5f32).unwrap();
        w.write_sample(0.0f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_stereo_wav(&path),
            Err(Error::InvalidTrack { .. })
        ));
    }
}
