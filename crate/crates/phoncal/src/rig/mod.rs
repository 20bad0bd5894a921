//! Virtual playback-and-measurement chain: soundcard output stage,
//! electrical loading of the headphone, transduction via sensitivity, and a
//! measurement noise floor.
//!
//! This is the simulated stand-in for a head-and-torso measurement setup.
//! The signal path per channel is
//!
//! ```text
//! digital samples ──·g_digital──·g_analog··V_fs──▶ open-circuit voltage
//!   ──loading(f)──▶ terminal voltage ──S_V(f)──▶ SPL ──A-weight──▶ L_A,eq
//! ```
//!
//! with the measurement-chain noise floor added energetically at the end.
//! Digital full scale maps to `full_scale_voltage_vrms`: a 0 dBFS sine
//! (amplitude 1.0) at `analog_gain` 1 presents that RMS voltage open
//! circuit. All gains are ideal and the chain is linear; clipping
//! (|sample| > 1 after digital gain) is *flagged*, never saturated, so
//! flagged measurements can still be reasoned about.
//!
//! Frequency-dependent sensitivity or impedance turns the electrical path
//! into a filter, realized as a minimum-phase FIR fitted to the combined
//! magnitude curve (see [`fir`]); flat specs reduce to scalar gains.

mod fir;

use crate::dsp::{
    self, spectrum, AWeighting, CalibratedTrack, LevelPair,
};
use crate::sensitivity::{required_voltage, HeadphoneSpec, ReferenceTone};
use crate::{Error, Result};

/// Measurement-chain noise floor assumed when a rig file doesn't state one,
/// in dB(A).
pub const DEFAULT_NOISE_FLOOR_DBA: f64 = 41.0;

/// Headroom slack on the clipping comparison: one part in 10⁹, so a sine
/// that reaches full scale exactly is not flagged over rounding.
const CLIP_EPS: f64 = 1e-9;

/// Output stage of the playback soundcard or amplifier.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SoundcardSpec {
    /// Open-circuit RMS voltage of a 0 dBFS sine at full analog gain.
    pub full_scale_voltage_vrms: f64,
    /// Source impedance Z_out in ohms.
    pub output_impedance_ohms: f64,
}

impl SoundcardSpec {
    pub fn new(full_scale_voltage_vrms: f64, output_impedance_ohms: f64) -> Result<Self> {
        let card = SoundcardSpec {
            full_scale_voltage_vrms,
            output_impedance_ohms,
        };
        card.validate()?;
        Ok(card)
    }

    fn validate(&self) -> Result<()> {
        if !(self.full_scale_voltage_vrms > 0.0) || !self.full_scale_voltage_vrms.is_finite() {
            return Err(Error::InvalidRig(format!(
                "full-scale voltage must be positive, got {} V",
                self.full_scale_voltage_vrms
            )));
        }
        if !(self.output_impedance_ohms >= 0.0) || !self.output_impedance_ohms.is_finite() {
            return Err(Error::InvalidRig(format!(
                "output impedance must be non-negative, got {} ohm",
                self.output_impedance_ohms
            )));
        }
        Ok(())
    }
}

/// The complete simulated rig. Immutable: operations that "change" the rig
/// ([`RigModel::with_analog_gain`], [`RigModel::with_seating_offset`])
/// return a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct RigModel {
    pub soundcard: SoundcardSpec,
    pub headphones: HeadphoneSpec,
    /// Self-noise of the measurement chain, dB(A).
    pub noise_floor_dba: f64,
    /// Analog gain, linear in (0, 1]; fixed once per session.
    pub analog_gain: f64,
    /// Per-channel flat gain offset in dB modeling how the headphone is
    /// seated for this run; (0, 0) unless a session perturbs it.
    seating_offset_db: (f64, f64),
    /// Free-text caution carried through from the rig file (for example,
    /// undisclosed current limiting into low-impedance loads).
    pub caveat: Option<String>,
}

impl RigModel {
    pub fn new(
        soundcard: SoundcardSpec,
        headphones: HeadphoneSpec,
        noise_floor_dba: f64,
    ) -> Result<Self> {
        let rig = RigModel {
            soundcard,
            headphones,
            noise_floor_dba,
            analog_gain: 1.0,
            seating_offset_db: (0.0, 0.0),
            caveat: None,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        self.soundcard.validate()?;
        self.headphones.validate()?;
        if !self.noise_floor_dba.is_finite() {
            return Err(Error::InvalidRig(format!(
                "noise floor must be finite, got {}",
                self.noise_floor_dba
            )));
        }
        if !(self.analog_gain > 0.0 && self.analog_gain <= 1.0) {
            return Err(Error::InvalidRig(format!(
                "analog gain must be in (0, 1], got {}",
                self.analog_gain
            )));
        }
        let (l, r) = self.seating_offset_db;
        if !l.is_finite() || !r.is_finite() {
            return Err(Error::InvalidRig("seating offset must be finite".into()));
        }
        Ok(())
    }

    /// A copy with the analog gain fixed to `gain` (linear, in (0, 1]).
    pub fn with_analog_gain(&self, gain: f64) -> Result<RigModel> {
        let mut rig = self.clone();
        rig.analog_gain = gain;
        rig.validate()?;
        Ok(rig)
    }

    /// A copy seated with the given per-channel dB offsets.
    pub fn with_seating_offset(&self, left_db: f64, right_db: f64) -> RigModel {
        let mut rig = self.clone();
        rig.seating_offset_db = (left_db, right_db);
        rig
    }

    pub fn seating_offset_db(&self) -> (f64, f64) {
        self.seating_offset_db
    }

    /// Voltage-divider attenuation of the open-circuit voltage at the
    /// headphone terminals, at `frequency_hz`. Always ≤ 0 dB; 0 exactly
    /// when the source impedance is zero (ideal bridging).
    pub fn loading_loss_at(&self, frequency_hz: f64) -> Result<f64> {
        loading_loss_db(
            self.headphones.impedance_at(frequency_hz)?,
            self.soundcard.output_impedance_ohms,
        )
    }

    /// True when the electrical path is frequency-independent.
    fn is_flat(&self) -> bool {
        self.headphones.is_flat()
    }

    /// Combined electrical + transduction path in dB SPL per (open-circuit)
    /// volt at `frequency_hz`, holding curve endpoints outside their
    /// domains (simulation grid use only).
    fn path_db_clamped(&self, frequency_hz: f64) -> f64 {
        let sens = self
            .headphones
            .sensitivity_dbv_at_clamped(frequency_hz)
            .expect("rig validated: sensitivity conversion is total");
        let z_in = self.headphones.impedance_at_clamped(frequency_hz);
        let loading = loading_loss_db(z_in, self.soundcard.output_impedance_ohms)
            .expect("rig validated: impedances in range");
        sens + loading
    }
}

/// `20·log10(Z_in / (Z_in + Z_out))` — the voltage divider formed by the
/// source impedance and the headphone load.
///
/// With Z_out ≪ Z_in (voltage bridging) the loss is negligible
/// (250 Ω from 1 Ω: −0.035 dB); with Z_out = Z_in it is −6.02 dB.
pub fn loading_loss_db(z_in_ohms: f64, z_out_ohms: f64) -> Result<f64> {
    if !(z_in_ohms > 0.0) {
        return Err(Error::NonPositiveImpedance(z_in_ohms));
    }
    if !(z_out_ohms >= 0.0) {
        return Err(Error::InvalidRig(format!(
            "output impedance must be non-negative, got {z_out_ohms} ohm"
        )));
    }
    Ok(20.0 * (z_in_ohms / (z_in_ohms + z_out_ohms)).log10())
}

/// One simulated level measurement of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementResult {
    pub track_id: String,
    /// Energetic average of the per-channel measured levels, dB(A).
    pub measured_laeq_dba: f64,
    pub per_channel: LevelPair,
    pub digital_gain_db: f64,
    /// The signal reaching the measurement chain was below its noise floor;
    /// `measured_laeq_dba` is floor-dominated.
    pub noise_floor_limited: bool,
    /// Some sample exceeded digital full scale after gain. The chain stays
    /// linear (nothing is saturated), but the level is not trustworthy.
    pub clipped: bool,
}

/// A track pushed once through the gain-independent part of the chain
/// (filters and fixed gains), ready to be measured cheaply at any digital
/// gain.
///
/// `prepared.measure(g)` equals `simulate_measurement(rig, track, g)`
/// exactly — digital gain is a scalar on a linear chain, so it commutes
/// with the filters and enters the level as `+g` dB. The gain search
/// leans on this to avoid refiltering per iteration.
#[derive(Debug, Clone)]
pub struct PreparedMeasurement {
    track_id: String,
    /// Per-channel signal level at 0 dB digital gain, dB(A); −∞ if silent.
    base_left_db: f64,
    base_right_db: f64,
    peak: f64,
    noise_floor_dba: f64,
}

impl PreparedMeasurement {
    pub fn new(rig: &RigModel, track: &CalibratedTrack) -> Result<Self> {
        rig.validate()?;
        let weighting = AWeighting::new(track.sample_rate)?;

        // Instantaneous volts per digital unit: full scale (amplitude 1.0)
        // spans √2 · V_fs · analog_gain.
        let drive_db = 20.0
            * (std::f64::consts::SQRT_2
                * rig.soundcard.full_scale_voltage_vrms
                * rig.analog_gain)
                .log10();

        let (ms_left, ms_right, flat_path_db) = if rig.is_flat() {
            let path = rig.path_db_clamped(1000.0); // frequency-independent
            (
                dsp::weighted_ms_db(&track.left, &weighting, None),
                dsp::weighted_ms_db(&track.right, &weighting, None),
                path,
            )
        } else {
            let fir = fir::design_min_phase(
                |f| rig.path_db_clamped(f),
                f64::from(track.sample_rate),
            );
            let bins = spectrum::fir_bin_responses(&fir.taps, track.len());
            (
                dsp::weighted_ms_db(&track.left, &weighting, Some(&bins)),
                dsp::weighted_ms_db(&track.right, &weighting, Some(&bins)),
                0.0,
            )
        };

        let (seat_left, seat_right) = rig.seating_offset_db;
        Ok(PreparedMeasurement {
            track_id: track.track_id.clone(),
            base_left_db: ms_left + drive_db + flat_path_db + seat_left,
            base_right_db: ms_right + drive_db + flat_path_db + seat_right,
            peak: track.peak(),
            noise_floor_dba: rig.noise_floor_dba,
        })
    }

    /// A copy with additional per-channel seating offsets folded into the
    /// prepared bases. Equals [`PreparedMeasurement::new`] on
    /// `rig.with_seating_offset(left_db, right_db)` exactly — the offsets
    /// are flat dB scalars on a linear chain — without refiltering.
    pub fn with_seating_offset(&self, left_db: f64, right_db: f64) -> PreparedMeasurement {
        PreparedMeasurement {
            track_id: self.track_id.clone(),
            base_left_db: self.base_left_db + left_db,
            base_right_db: self.base_right_db + right_db,
            peak: self.peak,
            noise_floor_dba: self.noise_floor_dba,
        }
    }

    pub fn track_id(&self) -> &str {
        &self.track_id
    }

    pub fn noise_floor_dba(&self) -> f64 {
        self.noise_floor_dba
    }

    /// The largest digital gain at which no sample exceeds full scale —
    /// the gain search never candidates above this. +∞ for silent tracks.
    pub fn max_unclipped_gain_db(&self) -> f64 {
        -20.0 * self.peak.log10()
    }

    /// Measures at `digital_gain_db`. Pure and cheap: one dB shift plus the
    /// energetic floor addition.
    pub fn measure(&self, digital_gain_db: f64) -> MeasurementResult {
        let clipped = self.peak * 10f64.powf(digital_gain_db / 20.0) > 1.0 + CLIP_EPS;
        let sig_left = self.base_left_db + digital_gain_db;
        let sig_right = self.base_right_db + digital_gain_db;
        let floor = self.noise_floor_dba;
        let add_floor = |sig: f64| {
            10.0 * (10f64.powf(sig / 10.0) + 10f64.powf(floor / 10.0)).log10()
        };
        let left_db = add_floor(sig_left);
        let right_db = add_floor(sig_right);
        MeasurementResult {
            track_id: self.track_id.clone(),
            measured_laeq_dba: dsp::energetic_average(left_db, right_db),
            per_channel: LevelPair { left_db, right_db },
            digital_gain_db,
            noise_floor_limited: dsp::energetic_average(sig_left, sig_right) < floor,
            clipped,
        }
    }
}

/// Simulates one level measurement of `track` at `digital_gain_db` on
/// `rig`.
pub fn simulate_measurement(
    rig: &RigModel,
    track: &CalibratedTrack,
    digital_gain_db: f64,
) -> Result<MeasurementResult> {
    Ok(PreparedMeasurement::new(rig, track)?.measure(digital_gain_db))
}

/// Result of a simulated open-circuit-voltage calibration session.
#[derive(Debug, Clone)]
pub struct OcvSession {
    /// The rig with its analog gain fixed by the voltage calibration.
    pub rig: RigModel,
    /// Open-circuit RMS voltage the reference tone was set to.
    pub required_voltage_vrms: f64,
    /// One fixed-gain measurement per track, in input order.
    pub measurements: Vec<MeasurementResult>,
}

/// Simulates the OCV calibration procedure: fix the analog gain so a
/// 0 dBFS reference tone presents [`required_voltage`] open circuit, then
/// measure every track at 0 dB digital gain.
///
/// Fails with [`Error::InsufficientHeadroom`] when the required voltage
/// exceeds the soundcard's full-scale output.
pub fn simulate_ocv_session(
    rig: &RigModel,
    tracks: &[CalibratedTrack],
    tone: &ReferenceTone,
) -> Result<OcvSession> {
    rig.validate()?;
    let volts = required_voltage(tone, &rig.headphones)?;
    let gain = volts / rig.soundcard.full_scale_voltage_vrms;
    if gain > 1.0 + 1e-12 {
        return Err(Error::InsufficientHeadroom {
            required_vrms: volts,
            available_vrms: rig.soundcard.full_scale_voltage_vrms,
        });
    }
    let fixed = rig.with_analog_gain(gain.min(1.0))?;
    let measurements: Vec<MeasurementResult> =
        crate::map_maybe_parallel(tracks, true, |t| simulate_measurement(&fixed, t, 0.0))
            .into_iter()
            .collect::<Result<_>>()?;
    Ok(OcvSession {
        rig: fixed,
        required_voltage_vrms: volts,
        measurements,
    })
}
