//! Measurement-based (in-ear style) level calibration: per-track search for
//! the digital gain that reproduces a target L_A,eq within tolerance, and
//! multi-run sessions with simulated headphone re-seating between runs.
//!
//! The search exploits that the playback chain is affine in dB — away from
//! the noise floor, raising the digital gain by x dB raises the measured
//! level by exactly x dB — so the fixed-point update
//! `g ← g + (target − measured)` lands in one correction and only needs
//! extra iterations where the noise floor bends the response. Every
//! reported gain is backed by an actual measurement at that gain; the
//! recorded `measured_dba` is never extrapolated.
//!
//! Failures are classified, not just timed out: a target below what the
//! measurement chain can resolve is reported as `below_noise_floor` (the
//! level every candidate measures is floor-dominated), and a target that
//! would require driving samples past digital full scale is
//! `headroom_exceeded`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::CalibratedTrack;
use crate::rig::{PreparedMeasurement, RigModel};
use crate::{Error, Result};

/// Version stamp written into session files; readers reject other versions.
pub const SESSION_SCHEMA_VERSION: u32 = 1;

/// Knobs of a single gain search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Convergence half-width: the run converges when
    /// |measured − target| ≤ this. Must be positive.
    pub tolerance_db: f64,
    /// Measurement budget per track (each iteration is one measurement).
    pub max_iterations: u32,
    /// Digital gain of the first probe measurement.
    pub initial_gain_db: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            tolerance_db: 0.5,
            max_iterations: 10,
            initial_gain_db: 0.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_db > 0.0) || !self.tolerance_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {} dB",
                self.tolerance_db
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "iteration budget must be at least 1".into(),
            ));
        }
        if !self.initial_gain_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "initial gain must be finite, got {} dB",
                self.initial_gain_db
            )));
        }
        Ok(())
    }
}

/// Why a search gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The target sits below what the measurement chain resolves: the floor
    /// flag was raised while the target is under `floor + tolerance`.
    BelowNoiseFloor,
    /// The measurement budget ran out before convergence.
    MaxIterations,
    /// Reaching the target needs more digital gain than full scale allows —
    /// still measuring under the target at the largest unclipped gain.
    HeadroomExceeded,
}

impl std::fmt::Display for FailureReason {
    /// Matches the snake_case spelling used in session files.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureReason::BelowNoiseFloor => "below_noise_floor",
            FailureReason::MaxIterations => "max_iterations",
            FailureReason::HeadroomExceeded => "headroom_exceeded",
        })
    }
}

/// Outcome of one gain search for one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub track_id: String,
    pub target_dba: f64,
    /// Digital gain of the last (reported) measurement.
    pub final_gain_db: f64,
    /// Level actually measured at `final_gain_db` — never extrapolated.
    pub measured_dba: f64,
    /// Measurements taken, probe included.
    pub iterations: u32,
    /// True exactly when |measured_dba − target_dba| ≤ tolerance.
    pub converged: bool,
    /// Present exactly when not converged.
    pub failure_reason: Option<FailureReason>,
}

/// Searches for the digital gain that reproduces `target_dba` for `track`
/// on `rig`, within `config.tolerance_db`.
///
/// The probe measures at `config.initial_gain_db`; each further candidate
/// applies the dB correction `target − measured`. Candidates are clamped to
/// the largest gain that keeps every sample within digital full scale, so a
/// converged run is always playable as recorded — a target still out of
/// reach at that ceiling fails as `headroom_exceeded`. On a chain that is
/// linear in gain (well above the floor) the search converges by the second
/// measurement from any starting gain.
pub fn search_gain(
    rig: &RigModel,
    track: &CalibratedTrack,
    target_dba: f64,
    config: &SearchConfig,
) -> Result<CalibrationRun> {
    config.validate()?;
    Ok(search_prepared(
        &PreparedMeasurement::new(rig, track)?,
        target_dba,
        config,
    ))
}

/// [`search_gain`] on an already-prepared measurement (used by sessions to
/// avoid refiltering the track for every run).
fn search_prepared(
    prepared: &PreparedMeasurement,
    target_dba: f64,
    config: &SearchConfig,
) -> CalibrationRun {
    let gain_ceiling_db = prepared.max_unclipped_gain_db();
    let mut gain_db = config.initial_gain_db.min(gain_ceiling_db);
    let mut iterations = 0u32;
    loop {
        let m = prepared.measure(gain_db);
        iterations += 1;

        let done = |converged: bool, failure_reason: Option<FailureReason>| CalibrationRun {
            track_id: prepared.track_id().to_string(),
            target_dba,
            final_gain_db: gain_db,
            measured_dba: m.measured_laeq_dba,
            iterations,
            converged,
            failure_reason,
        };

        if (m.measured_laeq_dba - target_dba).abs() <= config.tolerance_db {
            return done(true, None);
        }
        if m.noise_floor_limited
            && target_dba < prepared.noise_floor_dba() + config.tolerance_db
        {
            // Every level this quiet measures as the floor; no gain brings
            // the measurement within tolerance of the target.
            return done(false, Some(FailureReason::BelowNoiseFloor));
        }
        if target_dba > m.measured_laeq_dba && gain_db >= gain_ceiling_db {
            // Short of the target with the samples already touching full
            // scale: more gain would only clip.
            return done(false, Some(FailureReason::HeadroomExceeded));
        }
        if iterations >= config.max_iterations {
            return done(false, Some(FailureReason::MaxIterations));
        }
        gain_db = (gain_db + target_dba - m.measured_laeq_dba).min(gain_ceiling_db);
    }
}

/// Parameters of a multi-run calibration session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub search: SearchConfig,
    /// Full calibration passes over all tracks. The first run uses the rig
    /// exactly as seated; later runs re-seat it.
    pub run_count: u32,
    /// Seed of the re-seating perturbation stream.
    pub seed: u64,
    /// Half-width of the uniform per-channel re-seating offset, dB.
    pub reposition_db: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            search: SearchConfig::default(),
            run_count: 3,
            seed: 0,
            reposition_db: 0.5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.run_count == 0 {
            return Err(Error::InvalidConfig("run count must be at least 1".into()));
        }
        if !(self.reposition_db >= 0.0) || !self.reposition_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "reposition half-width must be non-negative, got {} dB",
                self.reposition_db
            )));
        }
        Ok(())
    }
}

/// One full pass over all tracks at a fixed seating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRun {
    pub run_index: u32,
    /// (left, right) flat offsets modeling how the headphone sat this run.
    pub seating_offset_db: (f64, f64),
    pub results: Vec<CalibrationRun>,
}

/// A complete calibration session: configuration echo plus every run's
/// results, in execution order. Serialized form is deterministic — equal
/// inputs and seed produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSession {
    pub schema_version: u32,
    pub tolerance_db: f64,
    pub run_count: u32,
    pub seed: u64,
    pub reposition_db: f64,
    pub runs: Vec<SessionRun>,
}

impl CalibrationSession {
    /// Structural checks applied after deserialization: supported schema,
    /// declared run count, and every run covering the same tracks in the
    /// same order.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SESSION_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                supported: SESSION_SCHEMA_VERSION,
            });
        }
        if self.runs.len() != self.run_count as usize || self.runs.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "session declares {} runs but contains {}",
                self.run_count,
                self.runs.len()
            )));
        }
        let reference: Vec<&str> = self.runs[0]
            .results
            .iter()
            .map(|r| r.track_id.as_str())
            .collect();
        for run in &self.runs[1..] {
            let ids: Vec<&str> = run.results.iter().map(|r| r.track_id.as_str()).collect();
            if ids != reference {
                return Err(Error::InvalidConfig(format!(
                    "run {} covers a different track set than run 0",
                    run.run_index
                )));
            }
        }
        Ok(())
    }
}

/// Runs `config.run_count` calibration passes of every track against its
/// target, re-seating the rig between passes.
///
/// `targets` aligns with `tracks` by position. Run 0 measures the rig
/// exactly as given; each later run draws one uniform offset per channel
/// from `±config.reposition_db` (seeded, so sessions are reproducible).
/// Within a run, per-track searches are independent and run in parallel
/// when the `parallel` feature is enabled; runs themselves are sequential
/// because each consumes the perturbation stream in order.
pub fn run_session(
    rig: &RigModel,
    tracks: &[CalibratedTrack],
    targets: &[f64],
    config: &SessionConfig,
) -> Result<CalibrationSession> {
    run_session_impl(rig, tracks, targets, config, true)
}

/// Sequential twin of [`run_session`]; same values, no thread pool.
pub fn run_session_seq(
    rig: &RigModel,
    tracks: &[CalibratedTrack],
    targets: &[f64],
    config: &SessionConfig,
) -> Result<CalibrationSession> {
    run_session_impl(rig, tracks, targets, config, false)
}

fn run_session_impl(
    rig: &RigModel,
    tracks: &[CalibratedTrack],
    targets: &[f64],
    config: &SessionConfig,
    parallel: bool,
) -> Result<CalibrationSession> {
    config.validate()?;
    rig.validate()?;
    if tracks.len() != targets.len() {
        return Err(Error::InvalidConfig(format!(
            "{} tracks but {} targets",
            tracks.len(),
            targets.len()
        )));
    }
    if tracks.is_empty() {
        return Err(Error::InvalidConfig("session has no tracks".into()));
    }
    for (track, &target) in tracks.iter().zip(targets) {
        if !target.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "target for {} must be finite, got {target}",
                track.track_id
            )));
        }
    }

    // Filter every track once; runs only shift the prepared levels.
    let prepared: Vec<Result<PreparedMeasurement>> =
        crate::map_maybe_parallel(tracks, parallel, |t| PreparedMeasurement::new(rig, t));
    let prepared: Vec<PreparedMeasurement> = prepared.into_iter().collect::<Result<_>>()?;
    let jobs: Vec<(PreparedMeasurement, f64)> = prepared
        .into_iter()
        .zip(targets.iter().copied())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |half_width: f64| {
        let unit: f64 = rng.gen(); // [0, 1)
        (2.0 * unit - 1.0) * half_width
    };

    let mut runs = Vec::with_capacity(config.run_count as usize);
    for run_index in 0..config.run_count {
        let seating_offset_db = if run_index == 0 {
            (0.0, 0.0)
        } else {
            (draw(config.reposition_db), draw(config.reposition_db))
        };
        let results = crate::map_maybe_parallel(&jobs, parallel, |(prep, target)| {
            search_prepared(
                &prep.with_seating_offset(seating_offset_db.0, seating_offset_db.1),
                *target,
                &config.search,
            )
        });
        runs.push(SessionRun {
            run_index,
            seating_offset_db,
            results,
        });
    }

    Ok(CalibrationSession {
        schema_version: SESSION_SCHEMA_VERSION,
        tolerance_db: config.search.tolerance_db,
        run_count: config.run_count,
        seed: config.seed,
        reposition_db: config.reposition_db,
        runs,
    })
}

/// A failed run of one track, for the per-track summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_index: u32,
    pub reason: FailureReason,
}

/// Per-track gain statistics over a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackGainSummary {
    pub track_id: String,
    /// Mean of `final_gain_db` over the converged runs; absent when no run
    /// converged.
    pub mean_gain_db: Option<f64>,
    /// Max − min of `final_gain_db` over the converged runs; absent when no
    /// run converged.
    pub spread_db: Option<f64>,
    pub converged_runs: u32,
    pub total_runs: u32,
    /// Runs that did not converge, with their classifications. Tracks with
    /// a clean session have this empty.
    pub failures: Vec<RunFailure>,
}

impl TrackGainSummary {
    pub fn fully_converged(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Summarizes a session per track: mean and spread of the converged gains,
/// with non-converged runs listed separately. Track order follows the
/// session's run order.
pub fn session_gains(session: &CalibrationSession) -> Result<Vec<TrackGainSummary>> {
    session.validate()?;
    let track_count = session.runs[0].results.len();
    let mut summaries = Vec::with_capacity(track_count);
    for i in 0..track_count {
        let track_runs: Vec<(&SessionRun, &CalibrationRun)> = session
            .runs
            .iter()
            .map(|run| (run, &run.results[i]))
            .collect();
        let gains: Vec<f64> = track_runs
            .iter()
            .filter(|(_, r)| r.converged)
            .map(|(_, r)| r.final_gain_db)
            .collect();
        let failures: Vec<RunFailure> = track_runs
            .iter()
            .filter_map(|(run, r)| {
                r.failure_reason.map(|reason| RunFailure {
                    run_index: run.run_index,
                    reason,
                })
            })
            .collect();
        let (mean, spread) = if gains.is_empty() {
            (None, None)
        } else {
            let mean = gains.iter().sum::<f64>() / gains.len() as f64;
            let spread = gains.iter().fold(f64::NEG_INFINITY, |a, &g| a.max(g))
                - gains.iter().fold(f64::INFINITY, |a, &g| a.min(g));
            (Some(mean), Some(spread))
        };
        summaries.push(TrackGainSummary {
            track_id: track_runs[0].1.track_id.clone(),
            mean_gain_db: mean,
            spread_db: spread,
            converged_runs: gains.len() as u32,
            total_runs: session.run_count,
            failures,
        });
    }
    Ok(summaries)
}
