//! Headphone sensitivity algebra: unit conversion, required drive voltage,
//! and frequency-tabulated sensitivity/impedance curves.
//!
//! Sensitivity is the SPL a headphone produces for a stated electrical
//! input. Two rating conventions circulate on spec sheets: dB SPL per 1 V
//! RMS (dB/V) and dB SPL per 1 mW (dB/mW). All internal math works in dB/V;
//! dB/mW ratings are converted through the nominal impedance:
//!
//! ```text
//! S_V = S_mW − 10·log10(Z / 1000)
//! ```
//!
//! The open-circuit-voltage calibration question — "what RMS voltage must
//! the reference tone present at the terminals to reach the target SPL?" —
//! is then a pure dB inversion: `V = 10^((S₀ − S_V) / 20)`.

use crate::{Error, Result};

/// The calibration reference tone: a sine at `frequency_hz` whose target
/// level is `spl_db` dB SPL. Defaults to 94 dB SPL at 1 kHz, the common
/// acoustic calibrator convention.
///
/// Some headphone manufacturers recommend calibrating at 250 Hz instead;
/// the frequency is configurable for exactly that reason.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReferenceTone {
    /// Target level S₀ in dB SPL.
    pub spl_db: f64,
    /// Tone frequency f₀ in Hz.
    pub frequency_hz: f64,
}

impl Default for ReferenceTone {
    fn default() -> Self {
        ReferenceTone {
            spl_db: 94.0,
            frequency_hz: 1000.0,
        }
    }
}

impl ReferenceTone {
    pub fn new(spl_db: f64, frequency_hz: f64) -> Result<Self> {
        let tone = ReferenceTone { spl_db, frequency_hz };
        tone.validate()?;
        Ok(tone)
    }

    /// Checks the tone is physically meaningful; deserialized values go
    /// through here since serde bypasses [`ReferenceTone::new`].
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reference frequency must be positive, got {} Hz",
                self.frequency_hz
            )));
        }
        if !self.spl_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "reference SPL must be finite, got {}",
                self.spl_db
            )));
        }
        Ok(())
    }
}

/// Unit in which a flat sensitivity figure is stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityUnit {
    /// dB SPL produced by 1 V RMS.
    DbPerVolt,
    /// dB SPL produced by 1 mW.
    DbPerMilliwatt,
}

/// A tabulated response: `(frequency_hz, value)` points, strictly increasing
/// in frequency, interpolated linearly in value against log10(frequency).
///
/// Queries outside the tabulated domain are refused — extrapolating a
/// frequency response invents data, so [`FrequencyCurve::value_at`] returns
/// a domain error instead. Simulation code that needs *some* value outside
/// the domain uses [`FrequencyCurve::value_at_clamped`], which holds the
/// endpoint values, and says so explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCurve {
    points: Vec<(f64, f64)>,
}

impl FrequencyCurve {
    /// Builds a curve from `(frequency_hz, value)` points.
    ///
    /// Frequencies must be positive and strictly increasing; values must be
    /// finite; at least one point is required.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCurve("curve has no points".into()));
        }
        for &(f, v) in &points {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::InvalidCurve(format!(
                    "frequency must be positive and finite, got {f} Hz"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidCurve(format!(
                    "value at {f} Hz must be finite, got {v}"
                )));
            }
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidCurve(format!(
                    "frequencies must be strictly increasing, got {} Hz after {} Hz",
                    pair[1].0, pair[0].0
                )));
            }
        }
        Ok(FrequencyCurve { points })
    }

    /// Tabulated domain as `(min_hz, max_hz)`.
    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Value at `frequency_hz`, linear in value over log10(frequency).
    /// Errors outside the tabulated domain.
    pub fn value_at(&self, frequency_hz: f64) -> Result<f64> {
        let (min_hz, max_hz) = self.domain();
        if !(frequency_hz >= min_hz && frequency_hz <= max_hz) {
            return Err(Error::CurveDomain {
                frequency_hz,
                min_hz,
                max_hz,
            });
        }
        Ok(self.interpolate(frequency_hz))
    }

    /// Value at `frequency_hz`, holding endpoint values outside the domain.
    pub fn value_at_clamped(&self, frequency_hz: f64) -> f64 {
        let (min_hz, max_hz) = self.domain();
        if frequency_hz <= min_hz {
            return self.points[0].1;
        }
        if frequency_hz >= max_hz {
            return self.points[self.points.len() - 1].1;
        }
        self.interpolate(frequency_hz)
    }

    fn interpolate(&self, frequency_hz: f64) -> f64 {
        // Binary search for the bracketing segment, then interpolate in
        // log-frequency. Exact hits return the tabulated value.
        let idx = match self
            .points
            .binary_search_by(|&(f, _)| f.partial_cmp(&frequency_hz).unwrap())
        {
            Ok(i) => return self.points[i].1,
            Err(i) => i,
        };
        let (f0, v0) = self.points[idx - 1];
        let (f1, v1) = self.points[idx];
        let t = (frequency_hz.log10() - f0.log10()) / (f1.log10() - f0.log10());
        v0 + t * (v1 - v0)
    }
}

// On disk a curve is just its point list; deserialization funnels through
// `FrequencyCurve::new` so a hand-edited file with unsorted or non-finite
// points is rejected at parse time rather than panicking mid-query.
impl serde::Serialize for FrequencyCurve {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for FrequencyCurve {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<(f64, f64)>::deserialize(deserializer)?;
        FrequencyCurve::new(points).map_err(serde::de::Error::custom)
    }
}

/// Electrical and transduction ratings of a headphone, as found on a spec
/// sheet or a measurement report.
///
/// The flat `sensitivity_db`/`sensitivity_unit` pair describes the rated
/// figure; an optional `frequency_response` curve (always dB/V) overrides it
/// when present. Impedance is a nominal scalar, optionally refined by a
/// tabulated `impedance_curve` in ohms.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HeadphoneSpec {
    /// Rated sensitivity in `sensitivity_unit`.
    pub sensitivity_db: f64,
    pub sensitivity_unit: SensitivityUnit,
    /// Nominal impedance in ohms (used for dB/mW conversion and loading
    /// when no impedance curve is given).
    pub impedance_ohms: f64,
    /// Tabulated sensitivity in dB SPL per volt, overriding the flat rating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_response: Option<FrequencyCurve>,
    /// Tabulated impedance in ohms, overriding the nominal scalar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impedance_curve: Option<FrequencyCurve>,
}

impl HeadphoneSpec {
    /// A flat spec rated in dB SPL per volt.
    pub fn flat_db_per_volt(sensitivity_db: f64, impedance_ohms: f64) -> Self {
        HeadphoneSpec {
            sensitivity_db,
            sensitivity_unit: SensitivityUnit::DbPerVolt,
            impedance_ohms,
            frequency_response: None,
            impedance_curve: None,
        }
    }

    /// A flat spec rated in dB SPL per milliwatt.
    pub fn flat_db_per_milliwatt(sensitivity_db: f64, impedance_ohms: f64) -> Self {
        HeadphoneSpec {
            sensitivity_db,
            sensitivity_unit: SensitivityUnit::DbPerMilliwatt,
            impedance_ohms,
            frequency_response: None,
            impedance_curve: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.impedance_ohms > 0.0) {
            return Err(Error::NonPositiveImpedance(self.impedance_ohms));
        }
        if !self.sensitivity_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sensitivity must be finite, got {}",
                self.sensitivity_db
            )));
        }
        if let Some(zc) = &self.impedance_curve {
            for &(f, z) in zc.points() {
                if !(z > 0.0) {
                    return Err(Error::InvalidCurve(format!(
                        "impedance at {f} Hz must be positive, got {z} ohm"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Impedance in ohms at `frequency_hz` (curve when present, nominal
    /// scalar otherwise). Errors outside the curve domain.
    pub fn impedance_at(&self, frequency_hz: f64) -> Result<f64> {
        match &self.impedance_curve {
            Some(curve) => curve.value_at(frequency_hz),
            None => Ok(self.impedance_ohms),
        }
    }

    /// Like [`impedance_at`](Self::impedance_at) but holding endpoints
    /// outside the curve domain (simulation grids only).
    pub fn impedance_at_clamped(&self, frequency_hz: f64) -> f64 {
        match &self.impedance_curve {
            Some(curve) => curve.value_at_clamped(frequency_hz),
            None => self.impedance_ohms,
        }
    }

    /// Sensitivity in dB SPL per volt at `frequency_hz`.
    ///
    /// Resolution order: the tabulated `frequency_response` when present
    /// (already dB/V); otherwise the flat rating, converted from dB/mW via
    /// the impedance at `frequency_hz` when necessary.
    pub fn sensitivity_dbv_at(&self, frequency_hz: f64) -> Result<f64> {
        if let Some(curve) = &self.frequency_response {
            return curve.value_at(frequency_hz);
        }
        match self.sensitivity_unit {
            SensitivityUnit::DbPerVolt => Ok(self.sensitivity_db),
            SensitivityUnit::DbPerMilliwatt => {
                convert_mw_to_v(self.sensitivity_db, self.impedance_at(frequency_hz)?)
            }
        }
    }

    /// Like [`sensitivity_dbv_at`](Self::sensitivity_dbv_at) but holding
    /// curve endpoints outside the domain (simulation grids only).
    pub fn sensitivity_dbv_at_clamped(&self, frequency_hz: f64) -> Result<f64> {
        if let Some(curve) = &self.frequency_response {
            return Ok(curve.value_at_clamped(frequency_hz));
        }
        match self.sensitivity_unit {
            SensitivityUnit::DbPerVolt => Ok(self.sensitivity_db),
            SensitivityUnit::DbPerMilliwatt => {
                convert_mw_to_v(self.sensitivity_db, self.impedance_at_clamped(frequency_hz))
            }
        }
    }

    /// True when neither sensitivity nor impedance is frequency-dependent.
    pub fn is_flat(&self) -> bool {
        self.frequency_response.is_none() && self.impedance_curve.is_none()
    }
}

/// Converts a dB/mW sensitivity rating to dB/V through the impedance:
/// `S_V = S_mW − 10·log10(Z / 1000)`.
///
/// At 1000 Ω the two scales coincide (1 V RMS into 1 kΩ is 1 mW); lower
/// impedances draw more power per volt, so dB/V exceeds dB/mW.
pub fn convert_mw_to_v(s_mw_db: f64, impedance_ohms: f64) -> Result<f64> {
    if !(impedance_ohms > 0.0) {
        return Err(Error::NonPositiveImpedance(impedance_ohms));
    }
    Ok(s_mw_db - 10.0 * (impedance_ohms / 1000.0).log10())
}

/// Inverse of [`convert_mw_to_v`]: `S_mW = S_V + 10·log10(Z / 1000)`.
pub fn convert_v_to_mw(s_v_db: f64, impedance_ohms: f64) -> Result<f64> {
    if !(impedance_ohms > 0.0) {
        return Err(Error::NonPositiveImpedance(impedance_ohms));
    }
    Ok(s_v_db + 10.0 * (impedance_ohms / 1000.0).log10())
}

/// SPL produced at `power_mw` milliwatts by a headphone rated `s_mw_db`
/// dB/mW: `S_mW + 10·log10(P / 1 mW)`.
pub fn spl_from_power(s_mw_db: f64, power_mw: f64) -> Result<f64> {
    if !(power_mw > 0.0) {
        return Err(Error::NonPositivePower(power_mw));
    }
    Ok(s_mw_db + 10.0 * power_mw.log10())
}

/// RMS voltage the reference tone must present at the headphone terminals
/// to reach `tone.spl_db`: `V = 10^((S₀ − S_V(f₀)) / 20)`.
///
/// With a tabulated frequency response, the sensitivity is interpolated at
/// the tone frequency; a tone outside the tabulated domain is an error.
pub fn required_voltage(tone: &ReferenceTone, spec: &HeadphoneSpec) -> Result<f64> {
    spec.validate()?;
    let s_v = spec.sensitivity_dbv_at(tone.frequency_hz)?;
    Ok(10f64.powf((tone.spl_db - s_v) / 20.0))
}

/// SPL produced by `voltage_vrms` at `frequency_hz`:
/// `S_V(f) + 20·log10(V)`. Inverse of [`required_voltage`].
pub fn spl_from_voltage(
    voltage_vrms: f64,
    spec: &HeadphoneSpec,
    frequency_hz: f64,
) -> Result<f64> {
    if !(voltage_vrms > 0.0) {
        return Err(Error::NonPositiveVoltage(voltage_vrms));
    }
    spec.validate()?;
    let s_v = spec.sensitivity_dbv_at(frequency_hz)?;
    Ok(s_v + 20.0 * voltage_vrms.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_dbv(s: f64) -> HeadphoneSpec {
        HeadphoneSpec::flat_db_per_volt(s, 250.0)
    }

    #[test]
    fn mw_to_v_is_identity_at_1000_ohm() {
        assert_eq!(convert_mw_to_v(96.0, 1000.0).unwrap(), 96.0);
    }

    #[test]
    fn mw_to_v_at_250_ohm() {
        // 96 − 10·log10(0.25), evaluated with arbitrary precision.
        let s_v = convert_mw_to_v(96.0, 250.0).unwrap();
        assert!((s_v - 102.02059991327962).abs() < 1e-12, "got {s_v}");
    }

    #[test]
    fn mw_v_round_trip() {
        for &(s, z) in &[(96.0, 250.0), (102.0, 32.0), (88.5, 600.0), (110.0, 8.0)] {
            let back = convert_v_to_mw(convert_mw_to_v(s, z).unwrap(), z).unwrap();
            assert!((back - s).abs() < 1e-12);
        }
    }

    #[test]
    fn mw_to_v_gains_3db_per_impedance_halving() {
        let hi = convert_mw_to_v(96.0, 125.0).unwrap();
        let lo = convert_mw_to_v(96.0, 250.0).unwrap();
        assert!((hi - lo - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn mw_to_v_rejects_non_positive_impedance() {
        assert!(matches!(
            convert_mw_to_v(96.0, 0.0),
            Err(Error::NonPositiveImpedance(_))
        ));
        assert!(matches!(
            convert_mw_to_v(96.0, -250.0),
            Err(Error::NonPositiveImpedance(_))
        ));
    }

    #[test]
    fn spl_from_power_at_one_milliwatt_is_the_rating() {
        assert_eq!(spl_from_power(96.0, 1.0).unwrap(), 96.0);
    }

    #[test]
    fn spl_from_power_doubling_adds_3db() {
        let spl = spl_from_power(96.0, 2.0).unwrap();
        assert!((spl - 99.01029995663981).abs() < 1e-12, "got {spl}");
        let spl = spl_from_power(96.0, 0.5).unwrap();
        assert!((spl - 92.98970004336019).abs() < 1e-12, "got {spl}");
    }

    #[test]
    fn spl_from_power_rejects_non_positive_power() {
        assert!(matches!(
            spl_from_power(96.0, 0.0),
            Err(Error::NonPositivePower(_))
        ));
    }

    #[test]
    fn required_voltage_worked_example() {
        // 94 dB SPL target against 99.14 dB/V.
        let v = required_voltage(&ReferenceTone::default(), &flat_dbv(99.14)).unwrap();
        assert!((v - 0.5533501092157367).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn required_voltage_is_unity_when_target_equals_sensitivity() {
        let v = required_voltage(&ReferenceTone::default(), &flat_dbv(94.0)).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn required_voltage_one_db_short() {
        let v = required_voltage(&ReferenceTone::default(), &flat_dbv(93.0)).unwrap();
        assert!((v - 1.1220184543019634).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn required_voltage_through_milliwatt_rating() {
        // 96 dB/mW at 1000 ohm is 96 dB/V, so 94 dB needs 10^(−2/20) V.
        let spec = HeadphoneSpec::flat_db_per_milliwatt(96.0, 1000.0);
        let v = required_voltage(&ReferenceTone::default(), &spec).unwrap();
        assert!((v - 10f64.powf(-0.1)).abs() < 1e-12);
    }

    #[test]
    fn spl_from_voltage_round_trips_the_worked_example() {
        let spec = flat_dbv(99.14);
        let spl = spl_from_voltage(0.553, &spec, 1000.0).unwrap();
        assert!((spl - 94.0).abs() < 0.01, "got {spl}");
        let spl = spl_from_voltage(1.0, &spec, 1000.0).unwrap();
        assert_eq!(spl, 99.14);
    }

    #[test]
    fn spl_from_voltage_rejects_non_positive_voltage() {
        assert!(matches!(
            spl_from_voltage(0.0, &flat_dbv(99.14), 1000.0),
            Err(Error::NonPositiveVoltage(_))
        ));
    }

    #[test]
    fn voltage_spl_inverse_identity() {
        let tone = ReferenceTone::default();
        for s in [80.0, 94.0, 99.14, 110.0] {
            let spec = flat_dbv(s);
            let v = required_voltage(&tone, &spec).unwrap();
            let spl = spl_from_voltage(v, &spec, tone.frequency_hz).unwrap();
            assert!((spl - tone.spl_db).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_interpolates_linearly_in_log_frequency() {
        let curve = FrequencyCurve::new(vec![(100.0, 90.0), (1000.0, 100.0)]).unwrap();
        // Geometric midpoint of the segment maps to the value midpoint.
        let mid = curve.value_at(10f64.powf(2.5)).unwrap();
        assert!((mid - 95.0).abs() < 1e-12, "got {mid}");
        assert_eq!(curve.value_at(100.0).unwrap(), 90.0);
        assert_eq!(curve.value_at(1000.0).unwrap(), 100.0);
    }

    #[test]
    fn curve_refuses_extrapolation_but_clamps_on_request() {
        let curve = FrequencyCurve::new(vec![(100.0, 90.0), (1000.0, 100.0)]).unwrap();
        assert!(matches!(
            curve.value_at(99.9),
            Err(Error::CurveDomain { .. })
        ));
        assert!(matches!(
            curve.value_at(1000.1),
            Err(Error::CurveDomain { .. })
        ));
        assert_eq!(curve.value_at_clamped(20.0), 90.0);
        assert_eq!(curve.value_at_clamped(16000.0), 100.0);
    }

    #[test]
    fn curve_rejects_malformed_points() {
        assert!(FrequencyCurve::new(vec![]).is_err());
        assert!(FrequencyCurve::new(vec![(100.0, 1.0), (100.0, 2.0)]).is_err());
        assert!(FrequencyCurve::new(vec![(200.0, 1.0), (100.0, 2.0)]).is_err());
        assert!(FrequencyCurve::new(vec![(0.0, 1.0)]).is_err());
        assert!(FrequencyCurve::new(vec![(100.0, f64::NAN)]).is_err());
    }

    #[test]
    fn required_voltage_uses_curve_at_tone_frequency() {
        let spec = HeadphoneSpec {
            sensitivity_db: 0.0, // ignored: curve takes precedence
            sensitivity_unit: SensitivityUnit::DbPerVolt,
            impedance_ohms: 250.0,
            frequency_response: Some(
                FrequencyCurve::new(vec![(250.0, 92.0), (1000.0, 94.0), (4000.0, 96.0)])
                    .unwrap(),
            ),
            impedance_curve: None,
        };
        let v = required_voltage(&ReferenceTone::default(), &spec).unwrap();
        assert_eq!(v, 1.0);
        // 250 Hz tone: sensitivity is 92 dB/V there, so 94 dB needs more drive.
        let tone = ReferenceTone::new(94.0, 250.0).unwrap();
        let v = required_voltage(&tone, &spec).unwrap();
        assert!((v - 10f64.powf(2.0 / 20.0)).abs() < 1e-12);
        // Out of tabulated range: refuse rather than extrapolate.
        let tone = ReferenceTone::new(94.0, 100.0).unwrap();
        assert!(matches!(
            required_voltage(&tone, &spec),
            Err(Error::CurveDomain { .. })
        ));
    }
}
