//! Command-line interface. Every command writes `<command>.run.json` next
//! to its outputs with the fully resolved parameters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use leyes_core::gaze::{fit_calibration, precision_report, Aggregate, CalibrationModel, Signal, Trial};
use leyes_core::pcr::{decide_crop, select_best_two_crs_with};
use leyes_core::scenario::{resolve, ScenarioId, Stage};
use leyes_core::stream::SampleStream;
use leyes_core::vision::{
    analyze_frame, best_scored, centers_at, detector_report, score_centers, SweepTarget, ThresholdConfig, ThresholdMode,
    ThresholdSweep,
};
use leyes_core::GrayImage;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{export_dataset, ExportOptions};
use crate::frames::{list_frames, load_frame};
use crate::maps::{read_maps, MAPS_EXTENSION};
use crate::merge::resolve_with_patch;
use crate::records::{
    read_csv, read_pcr_vectors, write_csv, AnalyzeRow, GazeRow, PcrRow, ANALYZE_HEADER, CR_VALID, GAZE_HEADER,
    PCR_HEADER, PUPIL_VALID,
};
use crate::session::{Session, TargetRole};

#[derive(Debug, Parser)]
#[command(name = "leyes", version, about = "Synthetic eye images, classical pupil/CR analysis and gaze metrics")]
pub struct Cli {
    /// Output directory; relative output names resolve against it.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a dataset of images, labels and optional heatmaps.
    Generate(GenerateArgs),
    /// Classical pupil and CR centers for every frame in a directory.
    Analyze(AnalyzeArgs),
    /// Adaptive crop plus best-two CR selection from feature maps.
    Pcr(PcrArgs),
    /// Fit the P-CR to gaze calibration from a session's targets.
    Calibrate(CalibrateArgs),
    /// Turn P-CR vectors into calibrated gaze samples.
    Apply(ApplyArgs),
    /// RMS-S2S, STD precision and accuracy per trial.
    Metrics(MetricsArgs),
    /// Print the resolved built-in scenario presets as JSON.
    Presets(PresetsArgs),
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = ScenarioId::ALL.iter().map(|id| id.as_str()).collect();
        format!("unknown scenario `{s}` (expected one of: {})", names.join(", "))
    })
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo = parse_unit(lo)?;
    let hi = parse_unit(hi)?;
    if lo > hi {
        return Err(format!("{lo} > {hi}"));
    }
    Ok((lo, hi))
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    let n: u8 = s.parse().map_err(|e| format!("{e}"))?;
    Stage::try_from(n).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_parser = parse_scenario)]
    pub scenario: ScenarioId,
    #[arg(long, default_value = "1", value_parser = parse_stage)]
    pub stage: Stage,
    #[arg(long, default_value_t = 100)]
    pub count: u64,
    /// Master seed; drawn from the OS (and recorded) when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write per-feature heatmaps in the map file format.
    #[arg(long)]
    pub heatmaps: bool,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub map_sigma: f64,
    /// Peak value of written heatmaps.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub map_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// JSON tree merged onto the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub frames_dir: PathBuf,
    /// Threshold configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "analysis.csv")]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Search fixed pupil thresholds in LO:HI for the most precise signal.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub sweep_pupil: Option<(f64, f64)>,
    /// Search fixed CR thresholds in LO:HI for the most precise signal.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub sweep_cr: Option<(f64, f64)>,
    /// Threshold step of the searches.
    #[arg(long, default_value_t = ThresholdSweep::DEFAULT_STEP)]
    pub sweep_step: f64,
    /// Samples per RMS-S2S window when scoring a threshold.
    #[arg(long, default_value_t = 20)]
    pub sweep_window: usize,
}

#[derive(Debug, Args)]
pub struct PcrArgs {
    pub frames_dir: PathBuf,
    pub maps_dir: PathBuf,
    /// Detector confidence needed to center the crop on the detection.
    #[arg(long, default_value_t = 0.90, value_parser = parse_unit)]
    pub cth: f64,
    /// Threshold configuration for the classical pupil detector (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Refine peak positions to subpixel precision.
    #[arg(long)]
    pub subpixel: bool,
    #[arg(long, default_value = "pcr.csv")]
    pub csv: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Output of `analyze` or `pcr`.
    pub pcr_csv: PathBuf,
    pub session: PathBuf,
    #[arg(long, default_value = "calibration.json")]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    pub model: PathBuf,
    pub pcr_csv: PathBuf,
    pub session: PathBuf,
    #[arg(long, default_value = "gaze.csv")]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateArg {
    Mean,
    Median,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub gaze_csv: PathBuf,
    pub session: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
    /// How per-trial medians combine across trials.
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    #[arg(long, default_value = "1", value_parser = parse_stage)]
    pub stage: Stage,
}

fn out_path(out: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_snapshot(out: &Path, command: &str, params: Value) -> Result<()> {
    let snap = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "params": params,
    });
    write_json(&out.join(format!("{command}.run.json")), &snap)
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_path();
    if !matches!(cli.command, Command::Presets(_)) {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(out, a),
        Command::Analyze(a) => cmd_analyze(out, a),
        Command::Pcr(a) => cmd_pcr(out, a),
        Command::Calibrate(a) => cmd_calibrate(out, a),
        Command::Apply(a) => cmd_apply(out, a),
        Command::Metrics(a) => cmd_metrics(out, a),
        Command::Presets(a) => cmd_presets(a),
    }
}

pub fn cmd_generate(out: &Path, a: &GenerateArgs) -> Result<()> {
    let patch: Option<Value> = a.config.as_deref().map(read_json).transpose()?;
    let cfg = resolve_with_patch(a.scenario, a.stage, patch)?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let opts = ExportOptions {
        include_heatmaps: a.heatmaps,
        map_sigma: a.map_sigma,
        map_scale: a.map_scale,
        threads: a.threads,
    };
    write_snapshot(
        out,
        "generate",
        json!({
            "scenario": a.scenario,
            "stage": a.stage,
            "count": a.count,
            "seed": seed,
            "heatmaps": a.heatmaps,
            "map_sigma": a.map_sigma,
            "map_scale": a.map_scale,
            "threads": a.threads,
            "config": cfg,
        }),
    )?;
    let stream = SampleStream::from_config(cfg, seed)?;
    let manifest = export_dataset(&stream, a.count, out, &opts)?;
    info!("wrote {} samples to {}", manifest.count, out.display());
    print_stdout(&format!("{} {}", manifest.count, manifest.content_hash))
}

/// Prints a line, treating a closed pipe as success.
fn print_stdout(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn threshold_config(path: Option<&Path>) -> Result<ThresholdConfig> {
    let cfg: ThresholdConfig = match path {
        Some(p) => read_json(p)?,
        None => ThresholdConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Replaces the configured thresholds with the most precise ones found by
/// the requested searches.
fn sweep_thresholds(
    pool: &rayon::ThreadPool,
    images: &[GrayImage],
    cfg: &mut ThresholdConfig,
    a: &AnalyzeArgs,
) -> Result<Value> {
    let mut found = serde_json::Map::new();
    for (target, range) in [(SweepTarget::Pupil, a.sweep_pupil), (SweepTarget::Cr, a.sweep_cr)] {
        let Some((lo, hi)) = range else { continue };
        let sweep = ThresholdSweep {
            step: a.sweep_step,
            window_samples: a.sweep_window,
            ..ThresholdSweep::new(lo, hi)
        };
        sweep.validate()?;
        let base = *cfg;
        let scored: Vec<_> = pool.install(|| {
            sweep
                .candidates()
                .into_par_iter()
                .map(|t| score_centers(&centers_at(images, &base, target, t), &sweep, t))
                .collect()
        });
        let name = match target {
            SweepTarget::Pupil => "pupil",
            SweepTarget::Cr => "cr",
        };
        match best_scored(scored) {
            Some(best) => {
                info!("{name} threshold {:.4} (rms-s2s {:.4} px)", best.threshold, best.rms_s2s);
                match target {
                    SweepTarget::Pupil => cfg.pupil_threshold = ThresholdMode::Fixed(best.threshold),
                    SweepTarget::Cr => cfg.cr_threshold = ThresholdMode::Fixed(best.threshold),
                }
                found.insert(name.into(), serde_json::to_value(best)?);
            }
            None => {
                warn!("no {name} threshold in {lo}..{hi} detected the feature often enough; keeping the configured one");
                found.insert(name.into(), Value::Null);
            }
        }
    }
    Ok(Value::Object(found))
}

pub fn cmd_analyze(out: &Path, a: &AnalyzeArgs) -> Result<()> {
    let mut cfg = threshold_config(a.config.as_deref())?;
    let csv = out_path(out, &a.csv);
    let (frames, raw) = list_frames(&a.frames_dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.threads.max(1)).build()?;
    let load = |f: &crate::frames::FrameRef| match load_frame(f, raw) {
        Ok(img) => Some(img),
        Err(e) => {
            warn!("frame {} ({}) unreadable: {e}", f.index, f.path.display());
            None
        }
    };
    // Searching needs every frame per candidate, so frames are kept in
    // memory only then.
    let sweeping = a.sweep_pupil.is_some() || a.sweep_cr.is_some();
    let preloaded: Option<Vec<Option<GrayImage>>> =
        sweeping.then(|| pool.install(|| frames.par_iter().map(load).collect()));
    let sweep = match &preloaded {
        Some(imgs) => {
            let readable: Vec<GrayImage> = imgs.iter().flatten().cloned().collect();
            sweep_thresholds(&pool, &readable, &mut cfg, a)?
        }
        None => Value::Null,
    };
    write_snapshot(
        out,
        "analyze",
        json!({
            "frames_dir": a.frames_dir,
            "csv": csv,
            "config": cfg,
            "threads": a.threads,
            "sweep": {
                "pupil": a.sweep_pupil,
                "cr": a.sweep_cr,
                "step": a.sweep_step,
                "window_samples": a.sweep_window,
                "chosen": sweep,
            },
        }),
    )?;
    let rows: Vec<AnalyzeRow> = pool.install(|| {
        frames
            .par_iter()
            .enumerate()
            .map(|(k, f)| {
                let img = match &preloaded {
                    Some(imgs) => imgs[k].clone(),
                    None => load(f),
                };
                let est = img.map(|img| analyze_frame(&img, &cfg)).unwrap_or_default();
                let pupil = est.pupil.map(|p| p.center);
                let cr = est.cr.map(|c| c.center);
                AnalyzeRow {
                    frame_index: f.index,
                    pupil_x: pupil.map(|p| p.0),
                    pupil_y: pupil.map(|p| p.1),
                    cr_x: cr.map(|c| c.0),
                    cr_y: cr.map(|c| c.1),
                    valid_flags: pupil.map_or(0, |_| PUPIL_VALID) | cr.map_or(0, |_| CR_VALID),
                }
            })
            .collect()
    });
    write_csv(&csv, &ANALYZE_HEADER, &rows)?;
    info!("analyzed {} frames into {}", rows.len(), csv.display());
    Ok(())
}

pub fn cmd_pcr(out: &Path, a: &PcrArgs) -> Result<()> {
    let cfg = threshold_config(a.config.as_deref())?;
    let csv = out_path(out, &a.csv);
    write_snapshot(
        out,
        "pcr",
        json!({
            "frames_dir": a.frames_dir,
            "maps_dir": a.maps_dir,
            "cth": a.cth,
            "subpixel": a.subpixel,
            "csv": csv,
            "config": cfg,
        }),
    )?;
    let (frames, raw) = list_frames(&a.frames_dir)?;
    let mut rows = Vec::new();
    for f in &frames {
        let maps_path = a.maps_dir.join(format!("{}.{MAPS_EXTENSION}", f.stem));
        if !maps_path.exists() {
            warn!("frame {} ({}): no maps file, skipped", f.index, f.stem);
            continue;
        }
        let mut maps = match read_maps(&maps_path) {
            Ok(m) => m,
            Err(e) => {
                warn!("frame {}: {e}; skipped", f.index);
                continue;
            }
        };
        let img = match load_frame(f, raw) {
            Ok(img) => img,
            Err(e) => {
                warn!("frame {} unreadable: {e}; skipped", f.index);
                continue;
            }
        };
        if maps.width() != maps.height() {
            warn!("frame {}: maps are {}x{}, expected a square crop; skipped", f.index, maps.width(), maps.height());
            continue;
        }
        let report = detector_report(&img, &cfg);
        let decision = match decide_crop(&report, a.cth, img.width(), img.height(), maps.width()) {
            Ok(d) => d,
            Err(e) => {
                warn!("frame {}: {e}; skipped", f.index);
                continue;
            }
        };
        info!(
            "frame {}: confidence {:.3}, crop {:?} at {:?}",
            f.index, report.confidence, decision.branch, decision.origin
        );
        maps.crop_origin = decision.origin;
        rows.push(PcrRow::from_result(f.index, &select_best_two_crs_with(&maps, a.subpixel)));
    }
    write_csv(&csv, &PCR_HEADER, &rows)?;
    Ok(())
}

/// Mean of the valid P-CR vectors inside each calibration target's
/// settled interval.
fn target_means(session: &Session, vectors: &[(usize, Option<(f64, f64)>)]) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let use_all = !session.targets.iter().any(|t| t.role == TargetRole::Calibration);
    let mut pcr = Vec::new();
    let mut targets = Vec::new();
    for (i, t) in session.targets.iter().enumerate() {
        if !use_all && t.role != TargetRole::Calibration {
            continue;
        }
        let start = t.t_on_ms + session.settle_ms;
        let inside: Vec<(f64, f64)> = vectors
            .iter()
            .filter_map(|&(frame, v)| {
                let ts = session.frame_time_ms(frame);
                (ts >= start && ts <= t.t_off_ms).then_some(v).flatten()
            })
            .collect();
        if inside.is_empty() {
            bail!("calibration target {i} has no valid samples");
        }
        let n = inside.len() as f64;
        pcr.push((
            inside.iter().map(|p| p.0).sum::<f64>() / n,
            inside.iter().map(|p| p.1).sum::<f64>() / n,
        ));
        targets.push((t.x_deg, t.y_deg));
    }
    Ok((pcr, targets))
}

pub fn cmd_calibrate(out: &Path, a: &CalibrateArgs) -> Result<()> {
    let session: Session = read_json(&a.session)?;
    let model_path = out_path(out, &a.model);
    write_snapshot(
        out,
        "calibrate",
        json!({"pcr_csv": a.pcr_csv, "session": session, "model": model_path}),
    )?;
    let vectors = read_pcr_vectors(&a.pcr_csv)?;
    let (pcr, targets) = target_means(&session, &vectors)?;
    let model = fit_calibration(&pcr, &targets)?;
    write_json(&model_path, &model)?;
    Ok(())
}

pub fn cmd_apply(out: &Path, a: &ApplyArgs) -> Result<()> {
    let model: CalibrationModel = read_json(&a.model)?;
    if !model.is_finite() {
        bail!("calibration model has non-finite coefficients");
    }
    let session: Session = read_json(&a.session)?;
    let csv = out_path(out, &a.csv);
    write_snapshot(
        out,
        "apply",
        json!({"model": model, "pcr_csv": a.pcr_csv, "rate_hz": session.rate_hz, "csv": csv}),
    )?;
    let rows: Vec<GazeRow> = read_pcr_vectors(&a.pcr_csv)?
        .into_iter()
        .map(|(frame, v)| {
            let g = v.map(|(u, w)| model.apply(u, w));
            GazeRow {
                frame,
                t_ms: session.frame_time_ms(frame),
                x: g.map(|g| g.0),
                y: g.map(|g| g.1),
                valid: g.is_some(),
            }
        })
        .collect();
    write_csv(&csv, &GAZE_HEADER, &rows)?;
    Ok(())
}

/// Gaze samples of each trial: everything between its first target onset
/// and last target offset.
fn trials_from_rows(session: &Session, rows: &[GazeRow]) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    for trial in session.trials() {
        let targets: Vec<_> = session.targets.iter().filter(|t| t.trial == trial).collect();
        let start = targets.iter().map(|t| t.t_on_ms).fold(f64::INFINITY, f64::min);
        let end = targets.iter().map(|t| t.t_off_ms).fold(f64::NEG_INFINITY, f64::max);
        let picked: Vec<&GazeRow> = rows.iter().filter(|r| r.t_ms >= start && r.t_ms <= end).collect();
        let gaze = Signal::new(
            picked.iter().map(|r| r.t_ms).collect(),
            picked
                .iter()
                .map(|r| (r.x.unwrap_or(0.0), r.y.unwrap_or(0.0)))
                .collect(),
            picked.iter().map(|r| r.valid && r.x.is_some() && r.y.is_some()).collect(),
            session.rate_hz,
        )
        .with_context(|| format!("trial {trial}"))?;
        trials.push(Trial {
            gaze,
            targets: targets.iter().map(|t| t.fixation()).collect(),
        });
    }
    Ok(trials)
}

pub fn cmd_metrics(out: &Path, a: &MetricsArgs) -> Result<()> {
    let session: Session = read_json(&a.session)?;
    let report_path = out_path(out, &a.report);
    let aggregate = match a.aggregate {
        AggregateArg::Mean => Aggregate::Mean,
        AggregateArg::Median => Aggregate::Median,
    };
    write_snapshot(
        out,
        "metrics",
        json!({"gaze_csv": a.gaze_csv, "session": session, "aggregate": aggregate, "report": report_path}),
    )?;
    let rows: Vec<GazeRow> = read_csv(&a.gaze_csv)?;
    let trials = trials_from_rows(&session, &rows)?;
    let report = precision_report(
        &trials,
        session.window_ms,
        session.settle_ms,
        aggregate,
        session.screen.deg_per_unit,
    )?;
    write_json(&report_path, &report)?;
    Ok(())
}

pub fn cmd_presets(a: &PresetsArgs) -> Result<()> {
    let mut all = serde_json::Map::new();
    for id in ScenarioId::ALL {
        match resolve(id, a.stage) {
            Ok(cfg) => {
                all.insert(id.to_string(), serde_json::to_value(cfg)?);
            }
            Err(e) => warn!("{id}: {e}"),
        }
    }
    print_stdout(&serde_json::to_string_pretty(&Value::Object(all))?)
}
