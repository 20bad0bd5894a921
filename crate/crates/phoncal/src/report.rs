//! Deviation reporting: per-track differences between measured and nominal
//! reproduction levels, summary statistics over their magnitudes, and
//! rendering to CSV or Markdown.
//!
//! A deviation is always `measured − nominal`, signed; magnitudes are taken
//! at presentation and statistics time only. Statistics are recomputed from
//! the rows on every call — the report never caches them, so a report can't
//! disagree with its own data.
//!
//! The crate ships a versioned reference dataset
//! ([`REFERENCE_LEVELS_CSV`]): 27 soundscape tracks with nominal,
//! voltage-calibrated (OCV), and measurement-calibrated (HATS) levels. Its
//! deviation columns are the authored values; the level columns are derived
//! as `nominal + deviation`, so recomputing any deviation from the file
//! reproduces the authored value exactly. It doubles as a demo input for
//! the report pipeline.

use std::collections::HashSet;

use crate::calibrate::CalibrationSession;
use crate::dsp::CalibratedTrack;
use crate::rig::OcvSession;
use crate::{Error, Result};

/// Reference dataset: 27 tracks, both calibration methods, ascending
/// |D_ocv| order. See the module docs for its self-consistency convention.
pub const REFERENCE_LEVELS_CSV: &str = include_str!("../assets/reference_levels_v1.csv");

/// Signed deviation of a measured level from its nominal target, in dB.
pub fn delta(measured_dba: f64, nominal_dba: f64) -> f64 {
    measured_dba - nominal_dba
}

/// Per-track levels feeding a report: the nominal target plus whichever
/// measured levels exist. At least one measured level must be present.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackLevels {
    pub track_id: String,
    pub nominal_dba: f64,
    /// Level reproduced under voltage (OCV) calibration, if measured.
    pub ocv_dba: Option<f64>,
    /// Level reproduced under measurement-based calibration, if measured.
    pub hats_dba: Option<f64>,
}

impl TrackLevels {
    pub fn validate(&self) -> Result<()> {
        if self.track_id.is_empty() {
            return Err(Error::InvalidConfig("track id must be non-empty".into()));
        }
        if !self.nominal_dba.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "{}: nominal level must be finite, got {}",
                self.track_id, self.nominal_dba
            )));
        }
        if self.ocv_dba.is_none() && self.hats_dba.is_none() {
            return Err(Error::InvalidConfig(format!(
                "{}: at least one measured level is required",
                self.track_id
            )));
        }
        for (name, level) in [("ocv", self.ocv_dba), ("hats", self.hats_dba)] {
            if let Some(v) = level {
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "{}: {name} level must be finite, got {v}",
                        self.track_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ocv − nominal`, when the OCV level was measured.
    pub fn delta_ocv(&self) -> Option<f64> {
        self.ocv_dba.map(|v| delta(v, self.nominal_dba))
    }

    /// `hats − nominal`, when the measurement-calibrated level exists.
    pub fn delta_hats(&self) -> Option<f64> {
        self.hats_dba.map(|v| delta(v, self.nominal_dba))
    }
}

/// Which calibration method a statistic ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ocv,
    Hats,
}

impl Method {
    fn delta_of(self, row: &TrackLevels) -> Option<f64> {
        match self {
            Method::Ocv => row.delta_ocv(),
            Method::Hats => row.delta_hats(),
        }
    }
}

/// A track set aside from the filtered statistics, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub track_id: String,
    pub reason: String,
}

/// Summary of |deviation| over a set of rows. `std_abs_db` uses the sample
/// (n−1) denominator and is absent for fewer than two values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStats {
    pub count: usize,
    pub min_abs_db: f64,
    pub max_abs_db: f64,
    pub mean_abs_db: f64,
    pub std_abs_db: Option<f64>,
}

fn stats_of(deltas: &[f64]) -> Option<DeltaStats> {
    if deltas.is_empty() {
        return None;
    }
    let abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let count = abs.len();
    let mean = abs.iter().sum::<f64>() / count as f64;
    let std = if count >= 2 {
        let ss = abs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        Some((ss / (count - 1) as f64).sqrt())
    } else {
        None
    };
    Some(DeltaStats {
        count,
        min_abs_db: abs.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_db: abs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_abs_db: mean,
        std_abs_db: std,
    })
}

/// Rounds to the two decimals every rendered value is shown at, with
/// negative zero normalized away.
fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// The deviation a reader of the rendered table would compute: difference
/// of the two-decimal displayed levels. Presentation (sorting, delta
/// columns, sign markers) uses this; statistics use full precision.
fn displayed_delta(level: Option<f64>, nominal_dba: f64) -> Option<f64> {
    level.map(|v| round2(round2(v) - round2(nominal_dba)))
}

/// A validated, ordered deviation report. Rows are sorted ascending by
/// displayed |Δ_ocv| — the two-decimal magnitude a reader sees — with ties
/// broken by track id and rows without an OCV level last, by id.
/// Statistics are recomputed from the rows on each call.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    rows: Vec<TrackLevels>,
    exclusions: Vec<Exclusion>,
}

/// Builds a [`DeltaReport`] from per-track levels and an exclusion list.
///
/// Every exclusion must name a present track, rows must be non-empty with
/// unique ids, and at least one row must survive the exclusions.
pub fn summarize(rows: &[TrackLevels], exclusions: &[Exclusion]) -> Result<DeltaReport> {
    if rows.is_empty() {
        return Err(Error::EmptyReport("no rows to report".into()));
    }
    let mut seen = HashSet::new();
    for row in rows {
        row.validate()?;
        if !seen.insert(row.track_id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate track id {}",
                row.track_id
            )));
        }
    }
    let mut excluded = HashSet::new();
    for exclusion in exclusions {
        if !seen.contains(exclusion.track_id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "exclusion names unknown track {}",
                exclusion.track_id
            )));
        }
        excluded.insert(exclusion.track_id.as_str());
    }
    if rows.iter().all(|r| excluded.contains(r.track_id.as_str())) {
        return Err(Error::EmptyReport(
            "every row is excluded; nothing to report".into(),
        ));
    }

    let mut rows = rows.to_vec();
    // Ordering key: the displayed magnitude in hundredths, so rows that
    // print the same |Δ_ocv| are true ties and fall back to the id.
    let key = |row: &TrackLevels| {
        displayed_delta(row.ocv_dba, row.nominal_dba).map(|d| (d.abs() * 100.0).round() as i64)
    };
    rows.sort_by(|a, b| match (key(a), key(b)) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.track_id.cmp(&b.track_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.track_id.cmp(&b.track_id),
    });
    Ok(DeltaReport {
        rows,
        exclusions: exclusions.to_vec(),
    })
}

impl DeltaReport {
    /// Rows in presentation order (ascending |Δ_ocv|).
    pub fn rows(&self) -> &[TrackLevels] {
        &self.rows
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.exclusions
    }

    /// |Δ| statistics for `method` over all rows that carry it. `None`
    /// when no row does.
    pub fn stats_all(&self, method: Method) -> Option<DeltaStats> {
        let deltas: Vec<f64> = self.rows.iter().filter_map(|r| method.delta_of(r)).collect();
        stats_of(&deltas)
    }

    /// |Δ| statistics for `method` with the excluded tracks removed.
    pub fn stats_retained(&self, method: Method) -> Option<DeltaStats> {
        let excluded: HashSet<&str> = self
            .exclusions
            .iter()
            .map(|e| e.track_id.as_str())
            .collect();
        let deltas: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| !excluded.contains(r.track_id.as_str()))
            .filter_map(|r| method.delta_of(r))
            .collect();
        stats_of(&deltas)
    }
}

/// Output formats of [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{:.2}", round2(v))).unwrap_or_default()
}

/// Renders the report's rows, two-decimal fixed point.
///
/// CSV (`track_id,L_nom,L_ocv,L_hats,D_ocv,D_hats`) is the interchange
/// form: LF line endings, quoting only where needed, empty cells for
/// missing levels; parsing it back and re-rendering is the identity.
/// Markdown is the presentation form: it additionally tags each track with
/// "(+)" or "(−)" after the sign of its OCV deviation, and shows missing
/// values as "—".
pub fn render(report: &DeltaReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn render_csv(report: &DeltaReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["track_id", "L_nom", "L_ocv", "L_hats", "D_ocv", "D_hats"])
        .expect("writing to memory cannot fail");
    for row in &report.rows {
        writer
            .write_record([
                row.track_id.as_str(),
                &format!("{:.2}", round2(row.nominal_dba)),
                &fmt_opt(row.ocv_dba),
                &fmt_opt(row.hats_dba),
                &fmt_opt(displayed_delta(row.ocv_dba, row.nominal_dba)),
                &fmt_opt(displayed_delta(row.hats_dba, row.nominal_dba)),
            ])
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("memory writer never errors"))
        .expect("rendered CSV is UTF-8")
}

fn render_markdown(report: &DeltaReport) -> String {
    let mut out = String::new();
    out.push_str("| Track | L_nom | L_ocv | L_hats | Δ_ocv | Δ_hats |\n");
    out.push_str("|:--|--:|--:|--:|--:|--:|\n");
    let cell =
        |value: Option<f64>| value.map_or("—".to_string(), |v| format!("{:.2}", round2(v)));
    for row in &report.rows {
        let marker = match displayed_delta(row.ocv_dba, row.nominal_dba) {
            Some(d) if d > 0.0 => " (+)",
            Some(d) if d < 0.0 => " (−)",
            _ => "",
        };
        out.push_str(&format!(
            "| {}{} | {:.2} | {} | {} | {} | {} |\n",
            row.track_id,
            marker,
            round2(row.nominal_dba),
            cell(row.ocv_dba),
            cell(row.hats_dba),
            cell(displayed_delta(row.ocv_dba, row.nominal_dba)),
            cell(displayed_delta(row.hats_dba, row.nominal_dba)),
        ));
    }
    out
}

/// One parsed line of a levels CSV: the levels plus any deviation values
/// the file stated alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelsRecord {
    pub levels: TrackLevels,
    pub stated_delta_ocv: Option<f64>,
    pub stated_delta_hats: Option<f64>,
}

/// Largest allowed disagreement between a stated deviation column and the
/// deviation recomputed from the level columns: half of the last printed
/// decimal place.
const STATED_DELTA_TOLERANCE_DB: f64 = 0.005 + 1e-9;

/// Parses a levels CSV in either accepted dialect:
/// `track_id,L_nom,L_ocv,L_hats` (raw levels) or the rendered
/// `track_id,L_nom,L_ocv,L_hats,D_ocv,D_hats`.
///
/// Deviation columns are never trusted as data — deviations are always
/// recomputed from the levels — but when present they must agree with the
/// recomputation to within ±0.005 dB, or the file is rejected as
/// internally inconsistent.
pub fn parse_levels_records(text: &str) -> Result<Vec<LevelsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::LevelsParse {
        line: 1,
        message: e.to_string(),
    })?;
    let header_row: Vec<&str> = headers.iter().collect();
    let with_deltas = match header_row.as_slice() {
        ["track_id", "L_nom", "L_ocv", "L_hats"] => false,
        ["track_id", "L_nom", "L_ocv", "L_hats", "D_ocv", "D_hats"] => true,
        other => {
            return Err(Error::LevelsParse {
                line: 1,
                message: format!(
                    "unrecognized header {:?}; expected track_id,L_nom,L_ocv,L_hats \
                     optionally followed by D_ocv,D_hats",
                    other.join(",")
                ),
            })
        }
    };

    let parse_cell = |line: u64, name: &str, cell: &str| -> Result<Option<f64>> {
        let cell = cell.trim();
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<f64>().map(Some).map_err(|_| Error::LevelsParse {
            line: line as usize,
            message: format!("{name} is not a number: {cell:?}"),
        })
    };

    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::LevelsParse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let levels = TrackLevels {
            track_id: record[0].trim().to_string(),
            nominal_dba: parse_cell(line, "L_nom", &record[1])?.ok_or_else(|| {
                Error::LevelsParse {
                    line: line as usize,
                    message: "L_nom must not be empty".into(),
                }
            })?,
            ocv_dba: parse_cell(line, "L_ocv", &record[2])?,
            hats_dba: parse_cell(line, "L_hats", &record[3])?,
        };
        levels.validate()?;
        let (stated_delta_ocv, stated_delta_hats) = if with_deltas {
            (
                parse_cell(line, "D_ocv", &record[4])?,
                parse_cell(line, "D_hats", &record[5])?,
            )
        } else {
            (None, None)
        };
        for (name, stated, derived) in [
            ("D_ocv", stated_delta_ocv, levels.delta_ocv()),
            ("D_hats", stated_delta_hats, levels.delta_hats()),
        ] {
            match (stated, derived) {
                (Some(s), Some(d)) if (s - d).abs() > STATED_DELTA_TOLERANCE_DB => {
                    return Err(Error::LevelsParse {
                        line: line as usize,
                        message: format!(
                            "{}: stated {name} {s} disagrees with the level columns \
                             ({d:.4} recomputed)",
                            levels.track_id
                        ),
                    });
                }
                (Some(_), None) => {
                    return Err(Error::LevelsParse {
                        line: line as usize,
                        message: format!(
                            "{}: {name} stated but the matching level column is empty",
                            levels.track_id
                        ),
                    });
                }
                _ => {}
            }
        }
        records.push(LevelsRecord {
            levels,
            stated_delta_ocv,
            stated_delta_hats,
        });
    }
    Ok(records)
}

/// [`parse_levels_records`], keeping only the levels.
pub fn parse_levels_csv(text: &str) -> Result<Vec<TrackLevels>> {
    Ok(parse_levels_records(text)?
        .into_iter()
        .map(|r| r.levels)
        .collect())
}

/// Extracts per-track levels from a calibration session: the nominal is
/// each track's target, the measured level comes from the session's first
/// run (the unperturbed seating). Non-converged tracks are included with
/// whatever their final measurement read — the report stays honest about
/// what the chain produced.
pub fn levels_from_session(session: &CalibrationSession) -> Result<Vec<TrackLevels>> {
    session.validate()?;
    Ok(session.runs[0]
        .results
        .iter()
        .map(|run| TrackLevels {
            track_id: run.track_id.clone(),
            nominal_dba: run.target_dba,
            ocv_dba: None,
            hats_dba: Some(run.measured_dba),
        })
        .collect())
}

/// Extracts per-track levels from a voltage-calibration session, pairing
/// each measurement with its track's nominal level. Clipped measurements
/// become rows too, but are returned with an exclusion naming them so
/// statistics can drop them.
pub fn levels_from_ocv_session(
    session: &OcvSession,
    tracks: &[CalibratedTrack],
) -> Result<(Vec<TrackLevels>, Vec<Exclusion>)> {
    if session.measurements.len() != tracks.len() {
        return Err(Error::InvalidConfig(format!(
            "session holds {} measurements but {} tracks were given",
            session.measurements.len(),
            tracks.len()
        )));
    }
    let mut rows = Vec::with_capacity(tracks.len());
    let mut exclusions = Vec::new();
    for (measurement, track) in session.measurements.iter().zip(tracks) {
        if measurement.track_id != track.track_id {
            return Err(Error::InvalidConfig(format!(
                "measurement for {} does not line up with track {}",
                measurement.track_id, track.track_id
            )));
        }
        rows.push(TrackLevels {
            track_id: track.track_id.clone(),
            nominal_dba: track.nominal_laeq_db,
            ocv_dba: Some(measurement.measured_laeq_dba),
            hats_dba: None,
        });
        if measurement.clipped {
            exclusions.push(Exclusion {
                track_id: track.track_id.clone(),
                reason: "clipped at the calibrated gain".into(),
            });
        }
    }
    Ok((rows, exclusions))
}

/// Merges two level sets by track id. Overlay fields win where present
/// (a fresh measurement supersedes file data); tracks only in the overlay
/// are appended. Nominal levels must agree to the hundredth wherever a
/// track appears in both.
pub fn merge_levels(
    base: Vec<TrackLevels>,
    overlay: Vec<TrackLevels>,
) -> Result<Vec<TrackLevels>> {
    let mut merged = base;
    for over in overlay {
        match merged.iter_mut().find(|b| b.track_id == over.track_id) {
            Some(row) => {
                if (row.nominal_dba - over.nominal_dba).abs() > 0.005 + 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "{}: nominal levels disagree between inputs ({} vs {})",
                        row.track_id, row.nominal_dba, over.nominal_dba
                    )));
                }
                if over.ocv_dba.is_some() {
                    row.ocv_dba = over.ocv_dba;
                }
                if over.hats_dba.is_some() {
                    row.hats_dba = over.hats_dba;
                }
            }
            None => merged.push(over),
        }
    }
    Ok(merged)
}
