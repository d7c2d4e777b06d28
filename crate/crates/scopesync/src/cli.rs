//! Command-line front end: simulate → characterize → align → lag → stats →
//! validate. The binary in `src/main.rs` is a thin shell over [`run`].
//!
//! Exit codes are a stable scripting contract: 0 success, 2 usage error,
//! 3 low-confidence estimate, 4 data/format error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    dataset_stats, read_episode, validate_dataset, write_episode, EpisodeMeta, StatsOptions,
    TaskKind, TaskLabel,
};
use crate::error::{Error, Result};
use crate::sim::bundle::{read_bundle, write_bundle, GroundTruth, ProfileSpec};
use crate::sim::{emit_streams, Axis, ChannelLatenciesMs, SimConfig, TransmissionConfig};
use crate::sync::{
    align_episode, characterize_latency, minmax_normalize, residual_lag, velocity_norm,
    LagEstimate, OffsetCalibration,
};
use crate::types::Modality;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LOW_CONFIDENCE: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Parser)]
#[command(
    name = "scopesync",
    version,
    about = "Simulate a motorized scope rig, characterize cross-modal latency, and build aligned episode datasets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the four sensor streams and write a raw bundle.
    Simulate(SimulateArgs),
    /// Estimate per-channel offsets from a sinusoid-excitation bundle.
    Characterize(CharacterizeArgs),
    /// Resample a bundle onto the video grid and store it as an episode.
    Align(AlignArgs),
    /// Residual-lag analysis of an aligned episode pair.
    Lag(LagArgs),
    /// Aggregate dataset statistics and histograms.
    Stats(StatsArgs),
    /// Validate a dataset root; exit 0 only when clean.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Command profile: "sinusoid", "teleop", or a path to a JSON knot file.
    #[arg(long, default_value = "sinusoid")]
    profile: String,
    /// Excitation frequency for the sinusoid profile, Hz.
    #[arg(long, default_value_t = 0.2)]
    freq: f64,
    /// Excitation amplitude in [-1, 1].
    #[arg(long, default_value_t = 0.5)]
    amp: f64,
    /// Excited axis for the sinusoid profile.
    #[arg(long, value_enum, default_value_t = Axis::BendX)]
    axis: Axis,
    /// Run length in seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Injected per-channel latencies, e.g. "state=102,pose=435,frame=412".
    #[arg(long, default_value = "")]
    latency: String,
    /// Timestamp jitter standard deviation, ms.
    #[arg(long, default_value_t = 0.0)]
    jitter_std_ms: f64,
    /// Pose position noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    /// Per-sample dropout probability in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// RNG seed; identical seeds give byte-identical bundles.
    #[arg(long)]
    seed: u64,
    /// Motor-side full-scale speed, deg/s (output shaft = this / gear
    /// ratio). The default reaches 45 deg/s at the bend output.
    #[arg(long, default_value_t = TransmissionConfig::fast_actuation().max_motor_speed_dps)]
    max_motor_dps: f64,
    /// Pose channel rate, Hz.
    #[arg(long, default_value_t = 40.0)]
    pose_rate_hz: f64,
    /// Texture translation per output-shaft degree, px.
    #[arg(long, default_value_t = 1.25)]
    px_per_deg: f64,
    /// Compliance low-pass time constant between motor and tip, seconds.
    #[arg(long, default_value_t = 0.0)]
    compliance_tau_s: f64,
    #[arg(long, default_value_t = crate::types::DEFAULT_FRAME_WIDTH)]
    frame_width: u32,
    #[arg(long, default_value_t = crate::types::DEFAULT_FRAME_HEIGHT)]
    frame_height: u32,
    /// Output bundle directory.
    #[arg(long, default_value = "bundle")]
    out: PathBuf,
}

#[derive(Args)]
struct CharacterizeArgs {
    /// Bundle directory produced by `simulate`.
    #[arg(long)]
    bundle: PathBuf,
    /// Excitation frequency, Hz; defaults to the bundle's own profile.
    #[arg(long)]
    freq: Option<f64>,
    /// Calibration JSON output path (default: <bundle>/calibration.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Calibration JSON from `characterize`.
    #[arg(long)]
    calibration: PathBuf,
    /// Dataset root to write into.
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    episode_id: String,
    /// Task id (0-11) or name, e.g. "insertion_lumen".
    #[arg(long, default_value = "4")]
    task: String,
    /// Natural-language instruction; defaults to the task's canonical one.
    #[arg(long)]
    instruction: Option<String>,
}

#[derive(Args)]
struct LagArgs {
    /// Episode directory (root/episodes/<id>).
    #[arg(long)]
    episode: PathBuf,
    /// Channel pair: "action-state" or "state-pose".
    #[arg(long)]
    pair: String,
    #[arg(long, default_value_t = 1000.0)]
    tau_max_ms: f64,
    /// Directory for the correlation-curve CSV.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    root: PathBuf,
    /// Directory for the histogram CSVs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    root: PathBuf,
}

/// Entry point used by the binary and by tests. The first element of
/// `args` is the program name.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful terminations in clap terms.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Characterize(a) => cmd_characterize(a),
        Cmd::Align(a) => cmd_align(a),
        Cmd::Lag(a) => cmd_lag(a),
        Cmd::Stats(a) => cmd_stats(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => EXIT_USAGE,
                Error::LowConfidence(_) => EXIT_LOW_CONFIDENCE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn parse_latency_spec(spec: &str) -> Result<ChannelLatenciesMs> {
    let mut lat = ChannelLatenciesMs::default();
    if spec.trim().is_empty() {
        return Ok(lat);
    }
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("latency entry {part:?} is not channel=ms"))
        })?;
        let ms: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad latency value {value:?}")))?;
        if !(ms.is_finite() && ms >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "latency must be non-negative, got {ms}"
            )));
        }
        match key.trim() {
            "action" => lat.action = ms,
            "state" => lat.state = ms,
            "pose" => lat.pose = ms,
            "frame" => lat.frame = ms,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown latency channel {other:?}"
                )))
            }
        }
    }
    Ok(lat)
}

fn parse_task(spec: &str) -> Result<TaskKind> {
    if let Ok(id) = spec.parse::<u8>() {
        return TaskKind::from_id(id);
    }
    TaskKind::from_name(spec)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "--duration must be strictly positive, got {}",
            a.duration
        )));
    }
    let profile_spec = match a.profile.as_str() {
        "sinusoid" => ProfileSpec::Sinusoid {
            freq_hz: a.freq,
            amplitude: a.amp,
            axis: a.axis,
        },
        "teleop" => ProfileSpec::Teleop { seed: a.seed },
        path => ProfileSpec::File {
            path: path.to_string(),
        },
    };
    let profile = profile_spec.build(a.duration)?;

    let mut cfg = SimConfig::default();
    cfg.transmission.max_motor_speed_dps = a.max_motor_dps;
    cfg.rates.pose_hz = a.pose_rate_hz;
    cfg.scope.px_per_deg = a.px_per_deg;
    cfg.scope.compliance_tau_s = a.compliance_tau_s;
    cfg.scope.frame_width = a.frame_width;
    cfg.scope.frame_height = a.frame_height;
    cfg.latency = crate::sim::LatencyConfig {
        latency_ms: parse_latency_spec(&a.latency)?,
        jitter_std_ms: a.jitter_std_ms,
        pose_noise_std_m: a.noise_std,
        dropout_prob: a.dropout,
        seed: a.seed,
    };
    cfg.validate()?;

    let bundle = emit_streams(&profile, a.duration, &cfg)?;
    let truth = GroundTruth {
        duration_s: a.duration,
        profile: profile_spec,
        config: cfg,
    };
    write_bundle(&a.out, &bundle, &truth)?;
    println!(
        "wrote bundle to {} ({} action / {} state / {} pose / {} frame samples)",
        a.out.display(),
        bundle.action.len(),
        bundle.state.len(),
        bundle.pose.len(),
        bundle.frame.len()
    );
    Ok(EXIT_OK)
}

fn cmd_characterize(a: CharacterizeArgs) -> Result<i32> {
    let (bundle, truth) = read_bundle(&a.bundle)?;
    let freq = match a.freq.or_else(|| truth.profile.freq_hz()) {
        Some(f) => f,
        None => {
            return Err(Error::InvalidArgument(
                "bundle has no excitation frequency; pass --freq".into(),
            ))
        }
    };
    let cal = characterize_latency(&bundle, freq)?;
    let out = a
        .out
        .unwrap_or_else(|| a.bundle.join("calibration.json"));
    std::fs::write(&out, serde_json::to_string_pretty(&cal)?)?;
    println!("reference: frame");
    for m in [Modality::Action, Modality::State, Modality::Pose] {
        println!("offset_ms {m}: {:+.3}", cal.offset_ms(m));
    }
    for m in [Modality::State, Modality::Pose, Modality::Frame] {
        println!(
            "lag behind action {m}: {:+.3} ms",
            cal.lag_behind_action_ms(m)
        );
    }
    println!("wrote calibration to {}", out.display());
    Ok(EXIT_OK)
}

fn cmd_align(a: AlignArgs) -> Result<i32> {
    let (bundle, _truth) = read_bundle(&a.bundle)?;
    let cal: OffsetCalibration =
        serde_json::from_str(&std::fs::read_to_string(&a.calibration)?)
            .map_err(|e| Error::format(&a.calibration, 1, e.to_string()))?;
    let episode = align_episode(&bundle, &cal)?;
    let kind = parse_task(&a.task)?;
    let task = match &a.instruction {
        Some(instruction) => TaskLabel::new(kind, instruction.clone()),
        None => TaskLabel::with_default_instruction(kind),
    };
    let meta = EpisodeMeta::for_episode(a.episode_id.clone(), task, &episode, cal)?;
    let dir = write_episode(&episode, &meta, &a.root)?;
    println!(
        "wrote episode {} ({} records, {:.1} s) to {}",
        meta.episode_id,
        meta.n_frames,
        meta.duration_s,
        dir.display()
    );
    Ok(EXIT_OK)
}

/// Velocity-norm pair for a named episode modality pair.
fn lag_for_pair(episode_dir: &Path, pair: &str, tau_max_ms: f64) -> Result<LagEstimate> {
    let (episode, _meta) = read_episode(episode_dir)?;
    let rate = episode.rate_hz;
    let rows_action: Vec<Vec<f64>> = episode.records.iter().map(|r| r.action.to_vec()).collect();
    let rows_state: Vec<Vec<f64>> = episode
        .records
        .iter()
        .map(|r| r.state_deg.to_vec())
        .collect();
    let rows_pose: Vec<Vec<f64>> = episode
        .records
        .iter()
        .map(|r| vec![r.position_m.x, r.position_m.y, r.position_m.z])
        .collect();
    let (x_rows, y_rows) = match pair {
        "action-state" => (rows_action, rows_state),
        "state-pose" => (rows_state, rows_pose),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown pair {other:?}; use action-state or state-pose"
            )))
        }
    };
    let x = minmax_normalize(&velocity_norm(&x_rows, rate)?);
    let y = minmax_normalize(&velocity_norm(&y_rows, rate)?);
    residual_lag(&x, &y, tau_max_ms)
}

fn cmd_lag(a: LagArgs) -> Result<i32> {
    let est = lag_for_pair(&a.episode, &a.pair, a.tau_max_ms)?;
    println!(
        "pair {}: tau_star = {} samples = {:.1} ms, rho_max = {:.4}",
        a.pair, est.tau_star_samples, est.tau_star_ms, est.rho_max
    );
    std::fs::create_dir_all(&a.out)?;
    let curve_path = a.out.join(format!("lag_curve_{}.csv", a.pair));
    let mut text = String::from("tau_samples,tau_ms,rho\n");
    for l in &est.curve {
        match l.rho {
            Some(r) => text.push_str(&format!("{},{},{}\n", l.tau_samples, l.tau_ms, r)),
            None => text.push_str(&format!("{},{},\n", l.tau_samples, l.tau_ms)),
        }
    }
    std::fs::write(&curve_path, text)?;
    println!("wrote correlation curve to {}", curve_path.display());
    Ok(EXIT_OK)
}

fn cmd_stats(a: StatsArgs) -> Result<i32> {
    let opts = StatsOptions::default();
    let stats = dataset_stats(&a.root, &opts)?;
    println!(
        "{} episodes, {:.1} s total ({:.2} h)",
        stats.episode_count, stats.total_duration_s, stats.total_hours
    );
    for (task_id, count) in &stats.task_counts {
        let name = task_id
            .parse::<u8>()
            .ok()
            .and_then(|id| TaskKind::from_id(id).ok())
            .map(|k| k.name())
            .unwrap_or("?");
        println!("task {task_id} ({name}): {count}");
    }
    std::fs::create_dir_all(&a.out)?;

    let hist_csv = |h: &crate::dataset::Histogram| {
        let mut text = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in h.counts.iter().enumerate() {
            text.push_str(&format!("{},{},{}\n", h.edges[i], h.edges[i + 1], c));
        }
        text.push_str(&format!("underflow,,{}\n", h.underflow));
        text.push_str(&format!("overflow,,{}\n", h.overflow));
        text
    };
    let duration_path = a.out.join("duration_hist.csv");
    std::fs::write(&duration_path, hist_csv(&stats.duration_hist))?;
    let length_path = a.out.join("length_hist.csv");
    std::fs::write(&length_path, hist_csv(&stats.length_hist))?;
    let tasks_path = a.out.join("task_counts.csv");
    let mut text = String::from("task_id,count\n");
    for (task_id, count) in &stats.task_counts {
        text.push_str(&format!("{task_id},{count}\n"));
    }
    std::fs::write(&tasks_path, text)?;
    println!(
        "wrote {}, {}, {}",
        duration_path.display(),
        length_path.display(),
        tasks_path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_validate(a: ValidateArgs) -> Result<i32> {
    let report = validate_dataset(&a.root);
    println!(
        "checked {} episodes: {}",
        report.episodes_checked,
        if report.is_clean() {
            "clean".to_string()
        } else {
            format!("{} issues", report.issues.len())
        }
    );
    for issue in &report.issues {
        let line = issue
            .line
            .map(|l| format!(":{l}"))
            .unwrap_or_default();
        println!(
            "[{}] {}{}: {}",
            issue.episode.as_deref().unwrap_or("-"),
            issue.file,
            line,
            issue.message
        );
    }
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_DATA })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_spec_parsing() {
        let lat = parse_latency_spec("state=102,pose=435,frame=412").unwrap();
        assert_eq!((lat.action, lat.state, lat.pose, lat.frame), (0.0, 102.0, 435.0, 412.0));
        assert!(parse_latency_spec("bogus=1").is_err());
        assert!(parse_latency_spec("state:1").is_err());
        assert!(parse_latency_spec("state=-5").is_err());
        assert_eq!(parse_latency_spec("").unwrap(), ChannelLatenciesMs::default());
    }

    #[test]
    fn task_spec_parsing() {
        assert_eq!(parse_task("4").unwrap(), TaskKind::InsertionLumen);
        assert_eq!(parse_task("failure").unwrap(), TaskKind::Failure);
        assert!(parse_task("12").is_err());
        assert!(parse_task("nope").is_err());
    }
}
