//! `phoncal` — headphone playback calibration from the command line.
//!
//! Subcommands cover the full workflow: computing the open-circuit drive
//! voltage for a reference tone (`ocv-voltage`), measuring A-weighted
//! levels of manifest audio (`analyze`), running a simulated
//! measurement-based calibration session (`calibrate`), simulating
//! voltage-calibrated playback into a deviation report (`simulate-ocv`),
//! re-rendering reports from session files or level tables (`report`),
//! and materializing the synthetic demo dataset (`make-demo`).
//!
//! Every command is deterministic given identical inputs and seed. All
//! file outputs are written atomically (write-then-rename). Exit codes:
//! `0` success, `1` hard error, `2` usage error, `3` completed with
//! per-track failures (unreadable audio, non-converged calibration, or a
//! measurement flagged clipped / noise-floor-limited).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use phoncal::calibrate::{self, CalibrationSession, TrackGainSummary};
use phoncal::dsp;
use phoncal::manifest::{self, Manifest};
use phoncal::report::{self, DeltaReport, Exclusion, Method, ReportFormat, TrackLevels};
use phoncal::rig;
use phoncal::sensitivity::{required_voltage, HeadphoneSpec, ReferenceTone};
use phoncal::synth;

/// Environment variable naming the default data directory. Relative input
/// paths that do not resolve from the working directory are retried under
/// it, and `make-demo` writes there when `--out` is omitted.
const ENV_DIR: &str = "PHONCAL_DIR";

/// Exit code for "the command ran, but some tracks carry failure flags".
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "phoncal",
    version,
    about = "Calibrated headphone reproduction of binaural soundscape recordings",
    after_help = "Exit codes: 0 success; 1 error; 2 usage; 3 completed with per-track failures.\n\
                  PHONCAL_DIR names a default data directory for inputs and `make-demo`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Required open-circuit RMS voltage for the reference tone
    OcvVoltage(OcvVoltageArgs),
    /// Per-track A-weighted levels of the manifest's audio, as CSV
    Analyze(AnalyzeArgs),
    /// Simulated measurement-based calibration; writes a session file
    Calibrate(CalibrateArgs),
    /// Simulated voltage-calibrated playback, rendered as a deviation report
    SimulateOcv(SimulateOcvArgs),
    /// Render a deviation report from a session file or a levels CSV
    Report(ReportArgs),
    /// Write the synthetic demo dataset (tracks, manifest, rig files)
    MakeDemo(MakeDemoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    /// dB SPL per volt
    Dbv,
    /// dB SPL per milliwatt (needs --impedance)
    Dbmw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Md => ReportFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct OcvVoltageArgs {
    /// Rated sensitivity, in the unit given by --unit
    #[arg(long)]
    sensitivity: f64,
    /// Unit the sensitivity is stated in
    #[arg(long, value_enum, default_value_t = Unit::Dbv)]
    unit: Unit,
    /// Nominal impedance in ohms (required with --unit dbmw)
    #[arg(long)]
    impedance: Option<f64>,
    /// Reference tone level S₀, dB SPL
    #[arg(long, default_value_t = 94.0)]
    ref_spl: f64,
    /// Reference tone frequency f₀, Hz
    #[arg(long, default_value_t = 1000.0)]
    ref_freq: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Track manifest (JSON)
    manifest: PathBuf,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Track manifest (JSON)
    manifest: PathBuf,
    /// Rig description (JSON)
    #[arg(long)]
    rig: PathBuf,
    /// Where to write the session file
    #[arg(long)]
    out: PathBuf,
    /// Convergence half-width in dB (default: the manifest's value)
    #[arg(long)]
    tolerance: Option<f64>,
    /// Calibration passes over all tracks (default: the manifest's value)
    #[arg(long)]
    runs: Option<u32>,
    /// Re-seating perturbation seed (default: the manifest's value)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateOcvArgs {
    /// Track manifest (JSON)
    manifest: PathBuf,
    /// Rig description (JSON)
    #[arg(long)]
    rig: PathBuf,
    /// Table format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Session file (JSON) or levels table (CSV)
    input: PathBuf,
    /// Table format
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
    /// Track id to exclude from the retained statistics (repeatable)
    #[arg(long)]
    exclude: Vec<String>,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MakeDemoArgs {
    /// Output directory (default: $PHONCAL_DIR, else ./phoncal-demo)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::OcvVoltage(args) => cmd_ocv_voltage(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::SimulateOcv(args) => cmd_simulate_ocv(args),
        Command::Report(args) => cmd_report(args),
        Command::MakeDemo(args) => cmd_make_demo(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

/// Resolves an input path: as given when absolute or present; otherwise
/// retried under `$PHONCAL_DIR`. Falls back to the original so error
/// messages name the path the user typed.
fn resolve_input(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(ENV_DIR) {
        let candidate = Path::new(&dir).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}

/// Prints to stdout, exiting quietly when the consumer closed the pipe —
/// `phoncal ... | head` must truncate, not panic.
fn print_stdout(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout();
    let outcome = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush());
    if let Err(err) = outcome {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {err}");
        std::process::exit(1);
    }
}

/// Writes `text` to `out` atomically, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            manifest::write_atomic(path, text.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print_stdout(text),
    }
    Ok(())
}

fn load_manifest_and_base(path: &Path) -> anyhow::Result<(Manifest, PathBuf)> {
    let resolved = resolve_input(path);
    let man = manifest::load_manifest(&resolved)
        .with_context(|| format!("loading manifest {}", resolved.display()))?;
    let base = manifest::manifest_base_dir(&resolved).to_path_buf();
    Ok((man, base))
}

fn load_rig(path: &Path) -> anyhow::Result<rig::RigModel> {
    let resolved = resolve_input(path);
    manifest::load_rig(&resolved).with_context(|| format!("loading rig {}", resolved.display()))
}

fn cmd_ocv_voltage(args: OcvVoltageArgs) -> anyhow::Result<ExitCode> {
    let tone = ReferenceTone::new(args.ref_spl, args.ref_freq)?;
    let spec = match args.unit {
        // The impedance is irrelevant to a dB/V rating; a placeholder
        // satisfies HeadphoneSpec validation without affecting the voltage.
        Unit::Dbv => HeadphoneSpec::flat_db_per_volt(args.sensitivity, args.impedance.unwrap_or(1.0)),
        Unit::Dbmw => {
            let Some(impedance) = args.impedance else {
                Cli::command()
                    .error(
                        clap::error::ErrorKind::MissingRequiredArgument,
                        "--impedance is required with --unit dbmw \
                         (a dB/mW rating converts to dB/V through the nominal impedance)",
                    )
                    .exit();
            };
            HeadphoneSpec::flat_db_per_milliwatt(args.sensitivity, impedance)
        }
    };
    let volts = required_voltage(&tone, &spec)?;
    print_stdout(&format!("{volts:.4} V\n"));
    Ok(ExitCode::SUCCESS)
}

/// Signed two-decimal delta with negative zero normalized away, so a
/// vanishing deviation always prints `+0.00`.
fn fmt_delta(value: f64) -> String {
    let rounded = (value * 100.0).round() / 100.0;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:+.2}")
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let (man, base) = load_manifest_and_base(&args.manifest)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "track_id",
        "left_dba",
        "right_dba",
        "track_dba",
        "nominal_dba",
        "delta_db",
        "error",
    ])?;
    let mut failures = 0usize;
    for entry in &man.tracks {
        let measured = entry.load(&base).and_then(|track| {
            let (left, right) = dsp::channel_laeq(&track)?;
            Ok((left, right, dsp::track_laeq(&track)?))
        });
        match measured {
            Ok((left, right, track_db)) => writer.write_record([
                entry.track_id.as_str(),
                &format!("{left:.2}"),
                &format!("{right:.2}"),
                &format!("{track_db:.2}"),
                &format!("{:.2}", entry.nominal_laeq_db),
                &fmt_delta(track_db - entry.nominal_laeq_db),
                "",
            ])?,
            Err(err) => {
                failures += 1;
                writer.write_record([entry.track_id.as_str(), "", "", "", "", "", &err.to_string()])?
            }
        }
    }
    let csv_text = String::from_utf8(writer.into_inner()?)?;
    emit(args.out.as_deref(), &csv_text)?;

    if failures > 0 {
        eprintln!("{failures} of {} tracks could not be analyzed", man.tracks.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

/// One human-readable line per track of a session summary.
fn describe_track(summary: &TrackGainSummary) -> String {
    if summary.fully_converged() {
        let mean = summary.mean_gain_db.expect("converged track has a mean gain");
        let spread = summary.spread_db.expect("converged track has a spread");
        format!(
            "  {}: converged {}/{} runs, gain {mean:+.2} dB (spread {spread:.2} dB)",
            summary.track_id, summary.converged_runs, summary.total_runs
        )
    } else {
        let reasons = summary
            .failures
            .iter()
            .map(|f| format!("run {} {}", f.run_index, f.reason))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "  {}: FAILED — converged {}/{} runs ({reasons})",
            summary.track_id, summary.converged_runs, summary.total_runs
        )
    }
}

fn cmd_calibrate(args: CalibrateArgs) -> anyhow::Result<ExitCode> {
    let (man, base) = load_manifest_and_base(&args.manifest)?;
    let rig = load_rig(&args.rig)?;
    let tracks = man
        .load_tracks(&base)
        .context("decoding manifest audio")?;

    let mut config = man.session_config();
    if let Some(tolerance) = args.tolerance {
        config.search.tolerance_db = tolerance;
    }
    if let Some(runs) = args.runs {
        config.run_count = runs;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let session = calibrate::run_session(&rig, &tracks, &man.targets_dba(), &config)?;
    manifest::save_session(&args.out, &session)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let summaries = calibrate::session_gains(&session)?;
    let clean = summaries.iter().filter(|s| s.fully_converged()).count();
    let mut text = format!(
        "session: {} runs × {} tracks, tolerance ±{} dB, seed {}\n",
        session.run_count,
        summaries.len(),
        session.tolerance_db,
        session.seed
    );
    for summary in &summaries {
        text.push_str(&describe_track(summary));
        text.push('\n');
    }
    text.push_str(&format!(
        "{clean}/{} tracks converged in every run; session written to {}\n",
        summaries.len(),
        args.out.display()
    ));
    print_stdout(&text);

    if clean < summaries.len() {
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

/// Prints |Δ| statistics for every method the report carries, to stderr so
/// table output stays pipeable.
fn print_stats(report: &DeltaReport) {
    for (label, method) in [("|Δ_ocv|", Method::Ocv), ("|Δ_hats|", Method::Hats)] {
        let Some(all) = report.stats_all(method) else {
            continue;
        };
        let std = all
            .std_abs_db
            .map(|s| format!("{s:.2}"))
            .unwrap_or_else(|| "n/a".into());
        eprintln!(
            "{label}: n={} mean={:.2} std={std} min={:.2} max={:.2}",
            all.count, all.mean_abs_db, all.min_abs_db, all.max_abs_db
        );
        if !report.exclusions().is_empty() {
            if let Some(kept) = report.stats_retained(method) {
                let std = kept
                    .std_abs_db
                    .map(|s| format!("{s:.2}"))
                    .unwrap_or_else(|| "n/a".into());
                eprintln!(
                    "{label} (retained): n={} mean={:.2} std={std} min={:.2} max={:.2}",
                    kept.count, kept.mean_abs_db, kept.min_abs_db, kept.max_abs_db
                );
            }
        }
    }
    for exclusion in report.exclusions() {
        eprintln!("excluded {}: {}", exclusion.track_id, exclusion.reason);
    }
}

fn cmd_simulate_ocv(args: SimulateOcvArgs) -> anyhow::Result<ExitCode> {
    let (man, base) = load_manifest_and_base(&args.manifest)?;
    let rig_model = load_rig(&args.rig)?;
    let tracks = man.load_tracks(&base).context("decoding manifest audio")?;

    let session = rig::simulate_ocv_session(&rig_model, &tracks, &man.reference_tone)?;
    eprintln!(
        "reference tone {:.1} dB SPL at {:.0} Hz → {:.4} V RMS open circuit \
         (analog gain {:.4})",
        man.reference_tone.spl_db,
        man.reference_tone.frequency_hz,
        session.required_voltage_vrms,
        session.rig.analog_gain
    );

    let (rows, exclusions) = report::levels_from_ocv_session(&session, &tracks)?;
    let delta_report = report::summarize(&rows, &exclusions)?;
    emit(args.out.as_deref(), &report::render(&delta_report, args.format.into()))?;
    print_stats(&delta_report);

    let flagged = session
        .measurements
        .iter()
        .filter(|m| m.clipped || m.noise_floor_limited)
        .count();
    if flagged > 0 {
        eprintln!("{flagged} of {} measurements carry failure flags", tracks.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads report input rows from a session file (JSON) or a levels CSV,
/// deciding by extension and falling back to content sniffing.
fn load_report_rows(path: &Path) -> anyhow::Result<Vec<TrackLevels>> {
    let resolved = resolve_input(path);
    let extension = resolved
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase());
    let as_session = match extension.as_deref() {
        Some("json") => true,
        Some("csv") => false,
        _ => {
            let text = std::fs::read_to_string(&resolved)
                .with_context(|| format!("reading {}", resolved.display()))?;
            text.trim_start().starts_with('{')
        }
    };
    if as_session {
        let session: CalibrationSession = manifest::load_session(&resolved)
            .with_context(|| format!("loading session {}", resolved.display()))?;
        Ok(report::levels_from_session(&session)?)
    } else {
        let text = std::fs::read_to_string(&resolved)
            .with_context(|| format!("reading {}", resolved.display()))?;
        Ok(report::parse_levels_csv(&text)?)
    }
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<ExitCode> {
    let rows = load_report_rows(&args.input)?;
    let exclusions: Vec<Exclusion> = args
        .exclude
        .iter()
        .map(|track_id| Exclusion {
            track_id: track_id.clone(),
            reason: "excluded on the command line".into(),
        })
        .collect();
    let delta_report = report::summarize(&rows, &exclusions)?;
    emit(args.out.as_deref(), &report::render(&delta_report, args.format.into()))?;
    print_stats(&delta_report);
    Ok(ExitCode::SUCCESS)
}

fn cmd_make_demo(args: MakeDemoArgs) -> anyhow::Result<ExitCode> {
    let dir = args
        .out
        .or_else(|| std::env::var_os(ENV_DIR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("phoncal-demo"));
    let dataset = synth::write_demo_dataset(&dir)
        .with_context(|| format!("writing demo dataset under {}", dir.display()))?;
    let mut text = format!(
        "wrote {} tracks and {}\n",
        dataset.track_count,
        dataset.manifest_path.display()
    );
    for (name, path) in &dataset.rigs {
        text.push_str(&format!("  rig {name}: {}\n", path.display()));
    }
    print_stdout(&text);
    Ok(ExitCode::SUCCESS)
}
