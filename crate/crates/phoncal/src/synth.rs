//! Deterministic synthesis of the bundled demo dataset: soundscape stand-in
//! tracks, narrowband probes, and a family of demonstration rigs.
//!
//! The demo tracks are not recordings — they are seeded multitone signals
//! whose one property of interest is exact: each track's A-weighted
//! equivalent level, interpreted through its calibration constant, equals
//! the nominal level of the corresponding row in the reference deviation
//! table ([`crate::report::REFERENCE_LEVELS_CSV`]). That makes the demo
//! dataset a self-checking fixture: an ideal playback rig must reproduce
//! every nominal level almost exactly, and any deviation a calibration
//! report shows is attributable to the rig under test, not the source
//! material.
//!
//! Synthesis choices, all in service of determinism and headroom:
//!
//! * Four sine partials at distinct integer frequencies drawn from
//!   800–4000 Hz. Integer frequencies are exactly periodic over the 1 s
//!   duration, so cyclic filtering sees them leak-free; the band keeps
//!   A-weighting within about ±1 dB, which bounds the crest needed to hit
//!   even the loudest nominal level well below digital full scale.
//! * A descending power profile with seeded jitter, seeded phases, and a
//!   small seeded left/right imbalance per partial (binaural recordings
//!   are never symmetric).
//! * A final exact rescale to the nominal level, measured with the same
//!   metrology the rest of the crate uses.
//!
//! Everything is seeded per track from fixed constants: two calls produce
//! bit-identical samples, and the WAV files written by
//! [`write_demo_dataset`] are byte-identical across runs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{self, write_stereo_wav_f32, CalibratedTrack};
use crate::manifest::{save_manifest, save_rig_file, Manifest, RigFile, TrackEntry};
use crate::report;
use crate::rig::{RigModel, SoundcardSpec, DEFAULT_NOISE_FLOOR_DBA};
use crate::sensitivity::{FrequencyCurve, HeadphoneSpec};
use crate::{Error, Result};

/// Sample rate of all synthesized material.
pub const DEMO_SAMPLE_RATE: u32 = 44100;

/// Calibration constant of every demo track: digital full scale maps to
/// 94 dB SPL, the reference-tone level. Under that convention an exact
/// voltage-calibrated rig reproduces nominal levels with zero error, so
/// any reported deviation isolates the rig.
pub const DEMO_CAL_CONSTANT_DB: f64 = 94.0;

/// Rated sensitivity of the demo headphones, dB SPL per volt.
pub const DEMO_SENSITIVITY_DBV: f64 = 99.14;

/// Nominal impedance of the demo headphones, ohms.
pub const DEMO_IMPEDANCE_OHMS: f64 = 250.0;

/// Open-circuit full-scale voltage of the demo soundcard, V RMS.
pub const DEMO_FULL_SCALE_VRMS: f64 = 2.0;

/// Noise floor of the near-ideal rig, dB(A): far below the quietest demo
/// track, so floor power never biases a measurement visibly.
pub const IDEAL_NOISE_FLOOR_DBA: f64 = 20.0;

/// Base of the per-track RNG seed stream (arbitrary but frozen — changing
/// it changes every demo WAV).
const DEMO_SEED_BASE: u64 = 0x70686f_6e63616c;

/// Partial frequency band, Hz. See the module docs for why it is narrow.
const PARTIAL_BAND_HZ: (u32, u32) = (800, 4000);

/// Descending power split across the four partials before jitter.
const BASE_POWERS: [f64; 4] = [0.55, 0.25, 0.12, 0.08];

/// RMS of the raw (pre-rescale) mixture, comfortably inside full scale.
const RAW_RMS: f64 = 0.25;

/// Identity and target level of one demo track.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrackSpec {
    pub track_id: String,
    /// Nominal in-situ level, dB(A) — the `L_nom` column of the reference
    /// deviation table.
    pub nominal_laeq_db: f64,
}

/// The demo track list: one entry per row of the embedded reference
/// deviation table, in table order.
pub fn demo_track_specs() -> Vec<DemoTrackSpec> {
    report::parse_levels_csv(report::REFERENCE_LEVELS_CSV)
        .expect("embedded reference table parses")
        .into_iter()
        .map(|row| DemoTrackSpec {
            track_id: row.track_id,
            nominal_laeq_db: row.nominal_dba,
        })
        .collect()
}

/// Synthesizes one demo track: four seeded partials, slightly unbalanced
/// channels, scaled so the track's A-weighted level equals
/// `nominal_laeq_db` exactly under the demo calibration constant.
///
/// `seed_index` individualizes the RNG stream; [`demo_tracks`] passes each
/// track's position in the table. Errors if `nominal_laeq_db` is so high
/// the rescaled waveform would leave [−1, 1] (the reference table's levels
/// all fit with a wide margin).
pub fn demo_track(
    track_id: &str,
    nominal_laeq_db: f64,
    seed_index: u64,
) -> Result<CalibratedTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEMO_SEED_BASE.wrapping_add(seed_index));

    // Four distinct integer partial frequencies.
    let mut freqs: Vec<u32> = Vec::with_capacity(4);
    while freqs.len() < 4 {
        let f = rng.gen_range(PARTIAL_BAND_HZ.0..=PARTIAL_BAND_HZ.1);
        if !freqs.contains(&f) {
            freqs.push(f);
        }
    }

    // Jittered power split, renormalized to unit total.
    let mut powers: Vec<f64> = BASE_POWERS
        .iter()
        .map(|p| p * (0.75 + 0.5 * rng.gen::<f64>()))
        .collect();
    let total: f64 = powers.iter().sum();
    for p in &mut powers {
        *p /= total;
    }

    let phases: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
    // Per-partial right-channel scale within ±6 %, a plausible ear-to-ear
    // asymmetry.
    let balance: Vec<f64> = (0..4).map(|_| 1.0 + (rng.gen::<f64>() - 0.5) * 0.12).collect();

    let n = DEMO_SAMPLE_RATE as usize; // exactly one second
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for k in 0..4 {
        let amplitude = (2.0 * powers[k]).sqrt() * RAW_RMS;
        let omega = std::f64::consts::TAU * f64::from(freqs[k]) / f64::from(DEMO_SAMPLE_RATE);
        for (i, (l, r)) in left.iter_mut().zip(&mut right).enumerate() {
            let s = (omega * i as f64 + phases[k]).sin();
            *l += amplitude * s;
            *r += amplitude * balance[k] * s;
        }
    }

    let raw = CalibratedTrack::new(
        track_id,
        DEMO_SAMPLE_RATE,
        left,
        right,
        DEMO_CAL_CONSTANT_DB,
        nominal_laeq_db,
    )?;
    let measured = dsp::track_laeq(&raw)?;
    let scale = 10f64.powf((nominal_laeq_db - measured) / 20.0);
    CalibratedTrack::new(
        track_id,
        DEMO_SAMPLE_RATE,
        raw.left.iter().map(|v| v * scale).collect(),
        raw.right.iter().map(|v| v * scale).collect(),
        DEMO_CAL_CONSTANT_DB,
        nominal_laeq_db,
    )
}

/// All demo tracks, in reference-table order.
pub fn demo_tracks() -> Result<Vec<CalibratedTrack>> {
    demo_track_specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| demo_track(&spec.track_id, spec.nominal_laeq_db, i as u64))
        .collect()
}

/// A one-second stereo sine probe: both channels `amplitude · sin` at the
/// integer frequency `frequency_hz` (exactly periodic, hence leak-free
/// under cyclic filtering). Carries the demo calibration constant;
/// `nominal_laeq_db` is whatever target the caller wants on record.
pub fn sine_track(
    track_id: &str,
    frequency_hz: u32,
    amplitude: f64,
    nominal_laeq_db: f64,
) -> Result<CalibratedTrack> {
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sine amplitude must be in (0, 1], got {amplitude}"
        )));
    }
    if frequency_hz == 0 || frequency_hz * 2 >= DEMO_SAMPLE_RATE {
        return Err(Error::InvalidConfig(format!(
            "sine frequency must be in (0, {}) Hz, got {frequency_hz}",
            DEMO_SAMPLE_RATE / 2
        )));
    }
    let n = DEMO_SAMPLE_RATE as usize;
    let omega = std::f64::consts::TAU * f64::from(frequency_hz) / f64::from(DEMO_SAMPLE_RATE);
    let samples: Vec<f64> = (0..n).map(|i| amplitude * (omega * i as f64).sin()).collect();
    CalibratedTrack::new(
        track_id,
        DEMO_SAMPLE_RATE,
        samples.clone(),
        samples,
        DEMO_CAL_CONSTANT_DB,
        nominal_laeq_db,
    )
}

fn demo_headphones() -> HeadphoneSpec {
    HeadphoneSpec::flat_db_per_volt(DEMO_SENSITIVITY_DBV, DEMO_IMPEDANCE_OHMS)
}

fn rig(output_impedance_ohms: f64, noise_floor_dba: f64) -> RigModel {
    RigModel::new(
        SoundcardSpec::new(DEMO_FULL_SCALE_VRMS, output_impedance_ohms)
            .expect("demo soundcard parameters are valid"),
        demo_headphones(),
        noise_floor_dba,
    )
    .expect("demo rig parameters are valid")
}

/// Near-ideal playback rig: flat demo headphones, zero source impedance,
/// negligible noise floor. Voltage calibration on this rig reproduces
/// every demo nominal almost exactly.
pub fn ideal_rig() -> RigModel {
    rig(0.0, IDEAL_NOISE_FLOOR_DBA)
}

/// The same chain with a realistic measurement noise floor
/// ([`DEFAULT_NOISE_FLOOR_DBA`]): quiet targets near the floor become
/// unreachable, exactly as on a real measurement rig.
pub fn floor_rig() -> RigModel {
    rig(0.0, DEFAULT_NOISE_FLOOR_DBA)
}

/// Worst-case source loading: output impedance equal to the headphone
/// impedance. The voltage divider halves the terminal voltage, dropping
/// every level by 20·log10(2) ≈ 6.02 dB.
pub fn bridged_rig() -> RigModel {
    rig(DEMO_IMPEDANCE_OHMS, IDEAL_NOISE_FLOOR_DBA)
}

/// A rig whose sensitivity tilts by `db_per_octave` around a 1 kHz pivot:
/// the response is `DEMO_SENSITIVITY_DBV + db_per_octave · log2(f / 1 kHz)`
/// over 20 Hz – 16 kHz. Two tabulated points suffice — the curve
/// interpolates linearly in log-frequency, so every query lands exactly on
/// that line, and 1 kHz is exactly the flat rating.
pub fn tilted_rig(db_per_octave: f64) -> Result<RigModel> {
    let value_at = |f_hz: f64| DEMO_SENSITIVITY_DBV + db_per_octave * (f_hz / 1000.0).log2();
    let curve = FrequencyCurve::new(vec![(20.0, value_at(20.0)), (16000.0, value_at(16000.0))])?;
    let mut headphones = demo_headphones();
    headphones.frequency_response = Some(curve);
    RigModel::new(
        SoundcardSpec::new(DEMO_FULL_SCALE_VRMS, 0.0)?,
        headphones,
        IDEAL_NOISE_FLOOR_DBA,
    )
}

/// What [`write_demo_dataset`] produced.
#[derive(Debug, Clone)]
pub struct DemoDataset {
    /// The track manifest, wired to the written WAV files.
    pub manifest_path: PathBuf,
    /// Written rig files as `(name, path)`.
    pub rigs: Vec<(&'static str, PathBuf)>,
    pub track_count: usize,
}

/// Materializes the bundled demo dataset under `dir`: every demo track as
/// a 32-bit float stereo WAV in `tracks/`, a track manifest referencing
/// them, and one rig file per demonstration rig. Deterministic: re-running
/// rewrites byte-identical files.
pub fn write_demo_dataset(dir: &Path) -> Result<DemoDataset> {
    let tracks_dir = dir.join("tracks");
    std::fs::create_dir_all(&tracks_dir)?;

    let specs = demo_track_specs();
    let mut entries = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let track = demo_track(&spec.track_id, spec.nominal_laeq_db, i as u64)?;
        let file = format!("tracks/{}.wav", spec.track_id);
        write_stereo_wav_f32(&dir.join(&file), track.sample_rate, &track.left, &track.right)?;
        entries.push(TrackEntry {
            track_id: spec.track_id.clone(),
            path: PathBuf::from(file),
            cal_constant_db: DEMO_CAL_CONSTANT_DB,
            nominal_laeq_db: spec.nominal_laeq_db,
        });
    }

    let manifest = Manifest::new(entries);
    let manifest_path = dir.join("manifest.json");
    save_manifest(&manifest_path, &manifest)?;

    let rig_files: [(&'static str, RigModel); 5] = [
        ("ideal", ideal_rig()),
        ("floor41", floor_rig()),
        ("bridged", bridged_rig()),
        ("tilt_up", tilted_rig(6.0)?),
        ("tilt_down", tilted_rig(-6.0)?),
    ];
    let mut rigs = Vec::with_capacity(rig_files.len());
    for (name, model) in rig_files {
        let path = dir.join(format!("rig_{name}.json"));
        save_rig_file(&path, &RigFile::from_rig(&model))?;
        rigs.push((name, path));
    }

    Ok(DemoDataset {
        manifest_path,
        rigs,
        track_count: specs.len(),
    })
}
