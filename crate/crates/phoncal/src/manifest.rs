//! Schema-versioned JSON persistence: rig descriptions, track manifests,
//! and calibration-session files.
//!
//! Three document kinds, all JSON, all carrying a `schema_version` field
//! that is checked before anything else is interpreted:
//!
//! * **Rig file** ([`RigFile`]) — the playback chain: soundcard output
//!   stage, headphone ratings (with optional tabulated curves), noise
//!   floor, analog gain, free-text caveat.
//! * **Track manifest** ([`Manifest`]) — the work list: per-track audio
//!   paths with calibration constants and nominal levels, the reference
//!   tone, and session parameters (tolerance, run count, seed,
//!   re-seating half-width).
//! * **Session file** — a serialized [`CalibrationSession`], written after
//!   a calibration run and re-validated on load.
//!
//! Manifests are validated **on load**, before any audio is decoded or any
//! level computed: duplicate track ids, dangling audio paths, and
//! non-positive tolerances are rejected up front so a long batch never
//! fails halfway through on an error that was visible in the manifest all
//! along. Relative audio paths resolve against the manifest's own
//! directory, so a dataset directory can be moved wholesale.
//!
//! All writes go through [`write_atomic`]: the bytes land in a temporary
//! sibling file which is then renamed over the destination, so an
//! interrupted write can never leave a truncated JSON file behind.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationSession, SearchConfig, SessionConfig};
use crate::dsp::CalibratedTrack;
use crate::rig::{RigModel, SoundcardSpec, DEFAULT_NOISE_FLOOR_DBA};
use crate::sensitivity::{HeadphoneSpec, ReferenceTone};
use crate::{Error, Result};

/// Rig-file schema version this build writes and reads.
pub const RIG_SCHEMA_VERSION: u32 = 1;
/// Track-manifest schema version this build writes and reads.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// On-disk description of a playback rig.
///
/// This is the persistent form of [`RigModel`]: everything that defines
/// the chain's physics, minus transient per-run state (seating offsets are
/// drawn per session run, never stored in the rig file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub schema_version: u32,
    pub soundcard: SoundcardSpec,
    pub headphones: HeadphoneSpec,
    /// Self-noise of the measurement chain, dB(A).
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dba: f64,
    /// Fixed analog gain, linear in (0, 1]. 1.0 plays the soundcard wide
    /// open; OCV calibration typically writes the value it solved for.
    #[serde(default = "default_analog_gain")]
    pub analog_gain: f64,
    /// Free-text caution about the rig (for example, an amplifier that
    /// current-limits into low-impedance loads).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR_DBA
}

fn default_analog_gain() -> f64 {
    1.0
}

impl RigFile {
    /// A rig file at the default noise floor and full analog gain.
    pub fn new(soundcard: SoundcardSpec, headphones: HeadphoneSpec) -> Self {
        RigFile {
            schema_version: RIG_SCHEMA_VERSION,
            soundcard,
            headphones,
            noise_floor_dba: DEFAULT_NOISE_FLOOR_DBA,
            analog_gain: 1.0,
            caveat: None,
        }
    }

    /// Captures a live [`RigModel`] for persistence (seating offsets are
    /// deliberately not carried over — they are per-run state).
    pub fn from_rig(rig: &RigModel) -> Self {
        RigFile {
            schema_version: RIG_SCHEMA_VERSION,
            soundcard: rig.soundcard.clone(),
            headphones: rig.headphones.clone(),
            noise_floor_dba: rig.noise_floor_dba,
            analog_gain: rig.analog_gain,
            caveat: rig.caveat.clone(),
        }
    }

    /// Instantiates the simulated rig this file describes, validating every
    /// physical parameter on the way.
    pub fn to_rig(&self) -> Result<RigModel> {
        if self.schema_version != RIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                supported: RIG_SCHEMA_VERSION,
            });
        }
        let mut rig = RigModel::new(
            self.soundcard.clone(),
            self.headphones.clone(),
            self.noise_floor_dba,
        )?
        .with_analog_gain(self.analog_gain)?;
        rig.caveat = self.caveat.clone();
        Ok(rig)
    }
}

/// One audio file in a track manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    /// Unique identifier used in reports and session files.
    pub track_id: String,
    /// Audio file path; relative paths resolve against the manifest's
    /// directory.
    pub path: PathBuf,
    /// Offset mapping digital full-scale to dB SPL for this recording.
    pub cal_constant_db: f64,
    /// The in-situ A-weighted level the track should reproduce, dB(A).
    pub nominal_laeq_db: f64,
}

impl TrackEntry {
    /// The audio path with relative paths resolved against `base_dir`.
    pub fn resolved_path(&self, base_dir: &Path) -> PathBuf {
        if self.path.is_absolute() {
            self.path.clone()
        } else {
            base_dir.join(&self.path)
        }
    }

    /// Decodes the referenced audio file into a calibrated track.
    pub fn load(&self, base_dir: &Path) -> Result<CalibratedTrack> {
        CalibratedTrack::from_wav(
            &self.resolved_path(base_dir),
            self.track_id.clone(),
            self.cal_constant_db,
            self.nominal_laeq_db,
        )
    }
}

/// Session parameters carried in a manifest. Every field has a default so
/// a minimal manifest can omit the whole block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    /// Convergence half-width in dB. Must be positive.
    pub tolerance_db: f64,
    /// Calibration passes over all tracks (the first is unperturbed).
    pub runs: u32,
    /// Seed of the re-seating perturbation stream.
    pub seed: u64,
    /// Half-width of the uniform per-channel re-seating offset, dB.
    pub reposition_db: f64,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            tolerance_db: 0.5,
            runs: 3,
            seed: 0,
            reposition_db: 0.5,
        }
    }
}

/// The work list for a calibration or analysis batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Reference tone for OCV voltage computation.
    #[serde(default)]
    pub reference_tone: ReferenceTone,
    #[serde(default)]
    pub session: SessionParams,
    pub tracks: Vec<TrackEntry>,
}

impl Manifest {
    /// A manifest over `tracks` with default tone and session parameters.
    pub fn new(tracks: Vec<TrackEntry>) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            reference_tone: ReferenceTone::default(),
            session: SessionParams::default(),
            tracks,
        }
    }

    /// Checks every manifest invariant. `base_dir` anchors relative audio
    /// paths (normally the manifest file's directory).
    ///
    /// Rejected: wrong schema version, an empty track list, duplicate
    /// track ids, audio paths that do not exist, non-positive tolerance,
    /// zero runs, negative re-seating half-width, and non-finite level
    /// constants. All of this runs before any audio is opened.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                supported: MANIFEST_SCHEMA_VERSION,
            });
        }
        self.reference_tone.validate()?;
        if !(self.session.tolerance_db > 0.0) {
            return Err(Error::InvalidManifest(format!(
                "tolerance must be positive, got {} dB",
                self.session.tolerance_db
            )));
        }
        if self.session.runs == 0 {
            return Err(Error::InvalidManifest("session must have at least one run".into()));
        }
        if !(self.session.reposition_db >= 0.0) || !self.session.reposition_db.is_finite() {
            return Err(Error::InvalidManifest(format!(
                "re-seating half-width must be non-negative, got {} dB",
                self.session.reposition_db
            )));
        }
        if self.tracks.is_empty() {
            return Err(Error::InvalidManifest("manifest lists no tracks".into()));
        }
        let mut seen = HashSet::new();
        for entry in &self.tracks {
            if entry.track_id.is_empty() {
                return Err(Error::InvalidManifest("track id is empty".into()));
            }
            if !seen.insert(entry.track_id.as_str()) {
                return Err(Error::InvalidManifest(format!(
                    "duplicate track id {:?}",
                    entry.track_id
                )));
            }
            if !entry.cal_constant_db.is_finite() || !entry.nominal_laeq_db.is_finite() {
                return Err(Error::InvalidManifest(format!(
                    "track {:?} has non-finite level constants",
                    entry.track_id
                )));
            }
            let resolved = entry.resolved_path(base_dir);
            if !resolved.is_file() {
                return Err(Error::MissingFile(resolved));
            }
        }
        Ok(())
    }

    /// The session configuration this manifest requests (search fields not
    /// expressed in manifests — iteration budget, initial gain — take
    /// their defaults).
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            search: SearchConfig {
                tolerance_db: self.session.tolerance_db,
                ..SearchConfig::default()
            },
            run_count: self.session.runs,
            seed: self.session.seed,
            reposition_db: self.session.reposition_db,
        }
    }

    /// Per-track calibration targets: the nominal in-situ levels, in
    /// manifest order.
    pub fn targets_dba(&self) -> Vec<f64> {
        self.tracks.iter().map(|t| t.nominal_laeq_db).collect()
    }

    /// Decodes every referenced audio file, in manifest order, failing on
    /// the first unreadable one. Callers that need per-track error
    /// reporting iterate [`TrackEntry::load`] themselves.
    pub fn load_tracks(&self, base_dir: &Path) -> Result<Vec<CalibratedTrack>> {
        self.tracks.iter().map(|entry| entry.load(base_dir)).collect()
    }
}

/// Serial number for temp-file names, so concurrent writers in one process
/// never collide.
static WRITE_SERIAL: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to `path` atomically: the data goes to a temporary file
/// in the same directory, which is then renamed over the destination.
/// Readers see either the old complete file or the new complete file,
/// never a prefix.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a writable path: {}", path.display())))?;
    let serial = WRITE_SERIAL.fetch_add(1, Ordering::Relaxed);
    let tmp_name = format!(
        ".{}.{}.{}.tmp",
        file_name.to_string_lossy(),
        std::process::id(),
        serial
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => PathBuf::from(&tmp_name),
    };
    fs::write(&tmp_path, bytes)?;
    match fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            // Don't leave the temp file behind on a failed rename.
            let _ = fs::remove_file(&tmp_path);
            Err(e.into())
        }
    }
}

/// Pretty-printed JSON with a trailing newline — the one serialization
/// used for every document this module writes, so identical values always
/// produce identical bytes.
fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Reads a file into a string, wrapping the not-found case in
/// [`Error::MissingFile`] so messages name the path.
fn read_text(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

/// First-pass look at a JSON document: just the version stamp.
#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u32>,
}

/// Checks a document's `schema_version` before the full parse, so a file
/// from a different version fails with a version error rather than a
/// shape error from some unrelated field.
fn check_schema_version(text: &str, kind: &str, supported: u32) -> Result<()> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    match probe.schema_version {
        Some(v) if v == supported => Ok(()),
        Some(found) => Err(Error::SchemaVersion { found, supported }),
        None => Err(Error::InvalidManifest(format!(
            "{kind} has no schema_version field"
        ))),
    }
}

/// Loads and fully validates a rig file.
pub fn load_rig_file(path: &Path) -> Result<RigFile> {
    let text = read_text(path)?;
    check_schema_version(&text, "rig file", RIG_SCHEMA_VERSION)?;
    let rig_file: RigFile = serde_json::from_str(&text)?;
    // Instantiating checks every physical parameter; the model is dropped.
    rig_file.to_rig()?;
    Ok(rig_file)
}

/// Loads a rig file and instantiates the simulated rig it describes.
pub fn load_rig(path: &Path) -> Result<RigModel> {
    let text = read_text(path)?;
    check_schema_version(&text, "rig file", RIG_SCHEMA_VERSION)?;
    let rig_file: RigFile = serde_json::from_str(&text)?;
    rig_file.to_rig()
}

/// Writes a rig file atomically as pretty JSON.
pub fn save_rig_file(path: &Path, rig_file: &RigFile) -> Result<()> {
    write_atomic(path, &to_json_bytes(rig_file)?)
}

/// Loads a track manifest and validates every invariant, resolving
/// relative audio paths against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    check_schema_version(&text, "track manifest", MANIFEST_SCHEMA_VERSION)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest.validate(manifest_base_dir(path))?;
    Ok(manifest)
}

/// The directory a manifest's relative paths resolve against.
pub fn manifest_base_dir(manifest_path: &Path) -> &Path {
    match manifest_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes a track manifest atomically as pretty JSON.
pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_atomic(path, &to_json_bytes(manifest)?)
}

/// Loads a calibration-session file and re-runs its structural validation.
pub fn load_session(path: &Path) -> Result<CalibrationSession> {
    let text = read_text(path)?;
    check_schema_version(
        &text,
        "session file",
        crate::calibrate::SESSION_SCHEMA_VERSION,
    )?;
    let session: CalibrationSession = serde_json::from_str(&text)?;
    session.validate()?;
    Ok(session)
}

/// Writes a calibration session atomically as pretty JSON. Because every
/// level in the session is a deterministic function of the inputs and the
/// seed, re-running a session and re-saving it produces byte-identical
/// files.
pub fn save_session(path: &Path, session: &CalibrationSession) -> Result<()> {
    write_atomic(path, &to_json_bytes(session)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::run_session;
    use crate::dsp::write_stereo_wav_f32;
    use crate::sensitivity::FrequencyCurve;

    fn demo_headphones() -> HeadphoneSpec {
        HeadphoneSpec::flat_db_per_volt(99.14, 250.0)
    }

    fn demo_rig_file() -> RigFile {
        RigFile::new(SoundcardSpec::new(2.0, 0.5).unwrap(), demo_headphones())
    }

    /// Writes a quiet two-partial stereo WAV and returns its entry.
    fn write_track(dir: &Path, track_id: &str, file: &str) -> TrackEntry {
        let rate = 44100;
        let n = rate as usize; // one second
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / rate as f64;
            let x = 0.05 * (2.0 * std::f64::consts::PI * 500.0 * t).sin();
            let y = 0.04 * (2.0 * std::f64::consts::PI * 997.0 * t).sin();
            left.push(x + y);
            right.push(x - y);
        }
        let path = dir.join(file);
        write_stereo_wav_f32(&path, rate, &left, &right).unwrap();
        TrackEntry {
            track_id: track_id.into(),
            path: PathBuf::from(file),
            cal_constant_db: 94.0,
            nominal_laeq_db: 65.0,
        }
    }

    #[test]
    fn rig_file_round_trips_through_json() {
        let mut rig_file = demo_rig_file();
        rig_file.headphones.frequency_response =
            Some(FrequencyCurve::new(vec![(20.0, 96.0), (1000.0, 99.14), (16000.0, 101.0)]).unwrap());
        rig_file.headphones.impedance_curve =
            Some(FrequencyCurve::new(vec![(20.0, 260.0), (16000.0, 240.0)]).unwrap());
        rig_file.noise_floor_dba = 38.5;
        rig_file.analog_gain = 0.25;
        rig_file.caveat = Some("amplifier current-limits below 32 ohm".into());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.json");
        save_rig_file(&path, &rig_file).unwrap();
        let loaded = load_rig_file(&path).unwrap();
        assert_eq!(loaded, rig_file);

        let rig = load_rig(&path).unwrap();
        assert_eq!(rig.analog_gain, 0.25);
        assert_eq!(rig.noise_floor_dba, 38.5);
        assert_eq!(rig.caveat.as_deref(), Some("amplifier current-limits below 32 ohm"));
        assert_eq!(rig.seating_offset_db(), (0.0, 0.0));
    }

    #[test]
    fn rig_file_defaults_fill_in_omitted_fields() {
        let text = r#"{
            "schema_version": 1,
            "soundcard": { "full_scale_voltage_vrms": 2.0, "output_impedance_ohms": 0.0 },
            "headphones": {
                "sensitivity_db": 99.14,
                "sensitivity_unit": "db_per_volt",
                "impedance_ohms": 250.0
            }
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(&path, text).unwrap();
        let rig_file = load_rig_file(&path).unwrap();
        assert_eq!(rig_file.noise_floor_dba, DEFAULT_NOISE_FLOOR_DBA);
        assert_eq!(rig_file.analog_gain, 1.0);
        assert_eq!(rig_file.caveat, None);
        assert_eq!(rig_file.headphones.frequency_response, None);
    }

    #[test]
    fn from_rig_drops_seating_state() {
        let rig = demo_rig_file().to_rig().unwrap().with_seating_offset(0.3, -0.2);
        let captured = RigFile::from_rig(&rig);
        let revived = captured.to_rig().unwrap();
        assert_eq!(revived.seating_offset_db(), (0.0, 0.0));
        assert_eq!(revived.soundcard, rig.soundcard);
        assert_eq!(revived.headphones, rig.headphones);
    }

    #[test]
    fn rig_file_rejects_unphysical_parameters_on_load() {
        let mut rig_file = demo_rig_file();
        rig_file.analog_gain = 1.5;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.json");
        // Bypass save-side validation deliberately: the file is hand-editable.
        fs::write(&path, serde_json::to_string(&rig_file).unwrap()).unwrap();
        assert!(matches!(load_rig(&path), Err(Error::InvalidRig(_))));
    }

    #[test]
    fn curve_with_unsorted_points_is_rejected_at_parse_time() {
        let text = r#"{
            "schema_version": 1,
            "soundcard": { "full_scale_voltage_vrms": 2.0, "output_impedance_ohms": 0.0 },
            "headphones": {
                "sensitivity_db": 99.14,
                "sensitivity_unit": "db_per_volt",
                "impedance_ohms": 250.0,
                "frequency_response": [[1000.0, 99.0], [20.0, 96.0]]
            }
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_rig_file(&path), Err(Error::Json(_))));
    }

    #[test]
    fn manifest_round_trips_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("audio")).unwrap();
        let entry = write_track(dir.path(), "T1", "audio/t1.wav");
        let manifest = Manifest::new(vec![entry]);
        let path = dir.path().join("manifest.json");
        save_manifest(&path, &manifest).unwrap();

        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded, manifest);
        let tracks = loaded.load_tracks(manifest_base_dir(&path)).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].track_id, "T1");
        assert_eq!(tracks[0].sample_rate, 44100);
    }

    #[test]
    fn minimal_manifest_takes_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write_track(dir.path(), "T1", "t1.wav");
        let text = r#"{
            "schema_version": 1,
            "tracks": [
                { "track_id": "T1", "path": "t1.wav",
                  "cal_constant_db": 94.0, "nominal_laeq_db": 65.0 }
            ]
        }"#;
        let path = dir.path().join("manifest.json");
        fs::write(&path, text).unwrap();
        let manifest = load_manifest(&path).unwrap();
        assert_eq!(manifest.reference_tone, ReferenceTone::default());
        assert_eq!(manifest.session, SessionParams::default());
        let config = manifest.session_config();
        assert_eq!(config.search.tolerance_db, 0.5);
        assert_eq!(config.run_count, 3);
        assert_eq!(config.seed, 0);
        assert_eq!(config.reposition_db, 0.5);
        assert_eq!(manifest.targets_dba(), vec![65.0]);
    }

    #[test]
    fn duplicate_track_ids_are_rejected_before_any_audio_loads() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_track(dir.path(), "T1", "a.wav");
        let mut b = write_track(dir.path(), "T1", "b.wav");
        b.track_id = "T1".into();
        let manifest = Manifest::new(vec![a, b]);
        let err = manifest.validate(dir.path()).unwrap_err();
        match err {
            Error::InvalidManifest(msg) => assert!(msg.contains("T1"), "message: {msg}"),
            other => panic!("expected InvalidManifest, got {other:?}"),
        }
    }

    #[test]
    fn dangling_audio_path_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let mut entry = write_track(dir.path(), "T1", "t1.wav");
        entry.path = PathBuf::from("missing.wav");
        let manifest = Manifest::new(vec![entry]);
        let err = manifest.validate(dir.path()).unwrap_err();
        match err {
            Error::MissingFile(p) => assert!(p.ends_with("missing.wav"), "path: {p:?}"),
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn bad_session_parameters_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let entry = write_track(dir.path(), "T1", "t1.wav");
        let mut manifest = Manifest::new(vec![entry]);

        manifest.session.tolerance_db = 0.0;
        assert!(matches!(
            manifest.validate(dir.path()),
            Err(Error::InvalidManifest(_))
        ));

        manifest.session.tolerance_db = 0.5;
        manifest.session.runs = 0;
        assert!(matches!(
            manifest.validate(dir.path()),
            Err(Error::InvalidManifest(_))
        ));

        manifest.session.runs = 3;
        manifest.session.reposition_db = -0.1;
        assert!(matches!(
            manifest.validate(dir.path()),
            Err(Error::InvalidManifest(_))
        ));

        manifest.session.reposition_db = 0.5;
        manifest.tracks.clear();
        assert!(matches!(
            manifest.validate(dir.path()),
            Err(Error::InvalidManifest(_))
        ));
    }

    #[test]
    fn wrong_schema_versions_name_both_versions() {
        let dir = tempfile::tempdir().unwrap();

        let mut rig_file = demo_rig_file();
        rig_file.schema_version = 99;
        let rig_path = dir.path().join("rig.json");
        fs::write(&rig_path, serde_json::to_string(&rig_file).unwrap()).unwrap();
        assert!(matches!(
            load_rig(&rig_path),
            Err(Error::SchemaVersion { found: 99, supported: RIG_SCHEMA_VERSION })
        ));

        let entry = write_track(dir.path(), "T1", "t1.wav");
        let mut manifest = Manifest::new(vec![entry]);
        manifest.schema_version = 7;
        let man_path = dir.path().join("manifest.json");
        fs::write(&man_path, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            load_manifest(&man_path),
            Err(Error::SchemaVersion { found: 7, supported: MANIFEST_SCHEMA_VERSION })
        ));

        let missing_version = r#"{ "tracks": [] }"#;
        fs::write(&man_path, missing_version).unwrap();
        assert!(matches!(
            load_manifest(&man_path),
            Err(Error::InvalidManifest(_))
        ));
    }

    #[test]
    fn missing_files_error_with_their_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.json");
        assert!(matches!(load_manifest(&path), Err(Error::MissingFile(p)) if p == path));
        assert!(matches!(load_rig(&path), Err(Error::MissingFile(_))));
        assert!(matches!(load_session(&path), Err(Error::MissingFile(_))));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        fs::write(&path, b"old contents").unwrap();
        write_atomic(&path, b"new contents").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"new contents");
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|name| name.to_string_lossy() != "out.json")
            .collect();
        assert!(leftovers.is_empty(), "stray files: {leftovers:?}");
    }

    #[test]
    fn session_files_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let entry = write_track(dir.path(), "T1", "t1.wav");
        let manifest = Manifest::new(vec![entry]);
        manifest.validate(dir.path()).unwrap();

        let rig = demo_rig_file().to_rig().unwrap();
        let tracks = manifest.load_tracks(dir.path()).unwrap();
        let session = run_session(
            &rig,
            &tracks,
            &manifest.targets_dba(),
            &manifest.session_config(),
        )
        .unwrap();

        let path = dir.path().join("session.json");
        save_session(&path, &session).unwrap();
        let loaded = load_session(&path).unwrap();
        assert_eq!(loaded, session);

        // Saving the loaded session again produces byte-identical output.
        let again = dir.path().join("session2.json");
        save_session(&again, &loaded).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn session_file_with_wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.json");
        fs::write(&path, r#"{ "schema_version": 42 }"#).unwrap();
        assert!(matches!(
            load_session(&path),
            Err(Error::SchemaVersion { found: 42, .. })
        ));
    }
}
