use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imucap_core::calibration::{
    calibrate_frame, calibrate_recording, straight_pose_bones, uncalibrate_frame, CalibrationState,
};
use imucap_core::evaluation::{
    evaluate, score, window_sweep, EvalMode, EvalReport, SequencePrediction, DEFAULT_BIN_WIDTH,
};
use imucap_core::inference::{measure_throughput, predict_offline, StreamState, WindowConfig};
use imucap_core::io::dataset::{
    list_names, load_samples, save_sequence, sequence_paths, POSE_EXTENSION,
};
use imucap_core::io::server::{Server, SessionContext};
use imucap_core::io::{
    load_calibration, load_checkpoint, load_imu, load_poses, save_calibration, save_checkpoint,
    save_imu, save_poses, RunConfig,
};
use imucap_core::kinematics::{default_sensors, Pose};
use imucap_core::normalization::{normalize_sequence, NormalizationScheme};
use imucap_core::synthesis::{
    generate_procedural_motions, synthesize, Dataset, MotionCatalog, PoseFrame, PoseSequence,
    SyntheticImuSequence,
};
use imucap_core::training::{
    finetune, fit_standardizer_on, train, train_with_standardizer, TrainReport,
};
use imucap_core::{CalibratedFrame, Checkpoint, KinematicTree, Rotation, Standardizer, Vec3};

#[derive(Parser)]
#[command(name = "imucap", version, about = "Full-body pose from six IMUs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate procedural motions and their virtual IMU readings.
    Synthesize(SynthesizeArgs),
    /// Compute a calibration from a still straight-pose recording.
    Calibrate(CalibrateArgs),
    /// Fit input/target statistics on a sequence directory.
    FitStats(FitStatsArgs),
    /// Train a model from scratch.
    Train(TrainArgs),
    /// Continue training an existing model on new data.
    Finetune(FinetuneArgs),
    /// Score a model (or saved predictions) against ground truth.
    Eval(EvalArgs),
    /// Mean angle error over a grid of past/future window sizes.
    Sweep(SweepArgs),
    /// Predict poses for one readings file.
    Infer(InferArgs),
    /// Serve streaming pose estimation over TCP.
    Serve(ServeArgs),
    /// Measure end-to-end streaming throughput.
    Throughput(ThroughputArgs),
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Comma-separated motion families.
    #[arg(long, value_delimiter = ',', required = true)]
    motions: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    frames: usize,
    #[arg(long, default_value_t = 60)]
    fps: u32,
    /// Sequences per family.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also write uncalibrated recordings under OUT/raw, using a random
    /// calibration drawn from this seed.
    #[arg(long)]
    raw_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Raw recording whose first frame is the straight pose with the head
    /// sensor aligned to the body.
    #[arg(long = "in")]
    input: PathBuf,
    /// Leading frames used for gravity estimation (default: all).
    #[arg(long)]
    still_frames: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitStatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "per_frame_root")]
    scheme: NormalizationScheme,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file (falls back to $IMUCAP_CONFIG).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Sequence directory to train on.
    #[arg(long)]
    data: PathBuf,
    /// Validation directory (default: the training data).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Per-epoch CSV report (default: standard output).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Statistics from `fit-stats` instead of fitting on the training data.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "pred")]
    model: Option<PathBuf>,
    /// Sequence directory with readings and ground truth.
    #[arg(long, conflicts_with_all = ["pred", "truth"], required_unless_present = "pred")]
    data: Option<PathBuf>,
    /// Directory of predicted `.dips` files, scored against `--truth`.
    #[arg(long, requires = "truth", conflicts_with = "model")]
    pred: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `offline` or `online:P,F`.
    #[arg(long, default_value = "offline")]
    mode: EvalMode,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    /// Summary CSV (default: standard output).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-frame errors CSV.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Angle error histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20,50")]
    past: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,3,5,10")]
    future: Vec<usize>,
    /// Grid CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `offline` or `online:P,F`.
    #[arg(long, default_value = "offline")]
    mode: EvalMode,
    /// Treat the input as raw readings and calibrate them first.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    calibration: PathBuf,
    /// Past and future frames, `P,F`.
    #[arg(long, default_value = "20,5")]
    window: WindowConfig,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 7878)]
    port: u16,
}

#[derive(Args)]
struct ThroughputArgs {
    #[arg(long)]
    model: PathBuf,
    /// Readings to stream (default: a synthesized walk).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value = "20,5")]
    window: WindowConfig,
    #[arg(long, default_value_t = 3.0)]
    seconds: f64,
}

struct Failure(String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<imucap_core::Error> for Failure {
    fn from(e: imucap_core::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Adds the path to errors from loading or saving it.
fn at<T>(path: &Path, r: imucap_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            log::info!("wrote {}", p.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", line.join(" "));
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.0.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::FitStats(a) => cmd_fit_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Throughput(a) => cmd_throughput(a),
    }
}

fn random_calibration(seed: u64, sensors: usize) -> CalibrationState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inertial_to_body = Rotation::random(&mut rng);
    let mut bone_offsets: Vec<Rotation> =
        (0..sensors).map(|_| Rotation::random(&mut rng)).collect();
    // The head sensor defines the body frame during calibration.
    bone_offsets[imucap_core::kinematics::HEAD_SENSOR] = Rotation::identity();
    let g = 9.81 + rng.random_range(-0.05..0.05);
    CalibrationState {
        gravity: inertial_to_body.inverse().rotate(&Vec3::new(0.0, g, 0.0)),
        inertial_to_body,
        bone_offsets,
    }
}

fn uncalibrate_all(
    frames: &[CalibratedFrame],
    cal: &CalibrationState,
) -> CliResult<Vec<CalibratedFrame>> {
    Ok(frames
        .iter()
        .map(|f| uncalibrate_frame(f, cal))
        .collect::<imucap_core::Result<_>>()?)
}

fn cmd_synthesize(a: SynthesizeArgs) -> CliResult {
    let names: Vec<&str> = a.motions.iter().map(String::as_str).collect();
    let catalog = MotionCatalog::from_names(&names, a.repeats, a.frames, a.fps)?;
    let tree = KinematicTree::default_skeleton();
    let sensors = default_sensors();
    let sequences = generate_procedural_motions(&catalog, a.seed)?;
    let raw = a.raw_seed.map(|s| random_calibration(s, sensors.len()));
    let raw_dir = a.out.join("raw");
    std::fs::create_dir_all(&a.out)?;
    for (k, (spec, seq)) in catalog.entries.iter().zip(&sequences).enumerate() {
        let name = if a.repeats == 1 {
            spec.family.to_string()
        } else {
            format!("{}_{}", spec.family, k / names.len())
        };
        let (imu, poses) = synthesize(seq, &tree, &sensors)?;
        save_sequence(&a.out, &name, &imu, &poses)?;
        if let Some(cal) = &raw {
            let frames = uncalibrate_all(&imu.frames, cal)?;
            save_imu(
                raw_dir.join(format!("{name}.dipi")),
                &SyntheticImuSequence {
                    fps: imu.fps,
                    frames,
                },
            )?;
        }
        log::info!("{name}: {} frames", imu.frames.len());
    }
    if let Some(cal) = &raw {
        let bones = straight_pose_bones(&tree, &sensors)?;
        let still = CalibratedFrame {
            orientations: bones,
            accelerations: vec![Vec3::zeros(); sensors.len()],
        };
        let frames = uncalibrate_all(&vec![still; a.fps as usize], cal)?;
        save_imu(
            raw_dir.join("still.dipi"),
            &SyntheticImuSequence { fps: a.fps, frames },
        )?;
        save_calibration(raw_dir.join("truth.dipc"), cal)?;
        log::info!("raw recordings in {}", raw_dir.display());
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> CliResult {
    let recording = at(&a.input, load_imu(&a.input))?;
    let bones = straight_pose_bones(&KinematicTree::default_skeleton(), &default_sensors())?;
    let still = a.still_frames.unwrap_or(recording.frames.len());
    let cal = calibrate_recording(&recording.frames, &bones, still)?;
    at(&a.out, save_calibration(&a.out, &cal))?;
    log::info!("gravity {:.4} m/s²", cal.gravity.norm());
    Ok(())
}

fn cmd_fit_stats(a: FitStatsArgs) -> CliResult {
    let samples = at(&a.data, load_samples(&a.data, a.scheme))?;
    let refs: Vec<_> = samples.iter().collect();
    write_text(Some(&a.out), &fit_standardizer_on(&refs)?.to_csv())
}

fn run_config(run: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::resolve(run.config.as_deref())?;
    for o in &run.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure(format!("override {o:?} is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Training samples followed by validation samples, with split indices.
fn dataset(run: &RunArgs, scheme: NormalizationScheme) -> CliResult<Dataset> {
    let mut samples = at(&run.data, load_samples(&run.data, scheme))?;
    let train: Vec<usize> = (0..samples.len()).collect();
    let validation = match &run.val {
        Some(dir) => {
            let val = at(dir, load_samples(dir, scheme))?;
            let start = samples.len();
            samples.extend(val);
            (start..samples.len()).collect()
        }
        None => train.clone(),
    };
    Ok(Dataset::with_splits(
        samples,
        train,
        validation,
        Vec::new(),
    )?)
}

fn finish_training(run: &RunArgs, checkpoint: &Checkpoint, report: &TrainReport) -> CliResult {
    at(&run.out, save_checkpoint(&run.out, checkpoint))?;
    log::info!(
        "best epoch {:?}, validation NLL {:?}, {:.1}s",
        report.best_epoch,
        report.best_val_nll,
        report.seconds
    );
    write_text(run.report.as_deref(), &report.to_csv())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let cfg = run_config(&a.run)?;
    let data = dataset(&a.run, cfg.model.scheme)?;
    let (checkpoint, report) = match &a.stats {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            let stats = at(p, Standardizer::from_csv(&text))?;
            train_with_standardizer(&cfg.model, &cfg.train, &data, stats)?
        }
        None => train(&cfg.model, &cfg.train, &data)?,
    };
    finish_training(&a.run, &checkpoint, &report)
}

fn cmd_finetune(a: FinetuneArgs) -> CliResult {
    let checkpoint = at(&a.model, load_checkpoint(&a.model))?;
    let cfg = run_config(&a.run)?;
    let data = dataset(&a.run, checkpoint.config.scheme)?;
    let (tuned, report) = finetune(&checkpoint, &data, &cfg.train)?;
    finish_training(&a.run, &tuned, &report)
}

fn write_report(a: &EvalArgs, report: &EvalReport) -> CliResult {
    if let Some(p) = &a.frames {
        write_text(Some(p), &report.frames_csv())?;
    }
    if let Some(p) = &a.histogram {
        write_text(Some(p), &report.histogram.to_csv())?;
    }
    write_text(a.summary.as_deref(), &report.summary_csv())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let tree = KinematicTree::default_skeleton();
    let report = match (&a.model, &a.data, &a.pred, &a.truth) {
        (Some(model), Some(data), None, _) => {
            let checkpoint = at(model, load_checkpoint(model))?;
            let samples = at(data, load_samples(data, checkpoint.config.scheme))?;
            let refs: Vec<_> = samples.iter().collect();
            let mut report = evaluate(&checkpoint, &refs, a.mode, &tree)?;
            if a.bin_width != DEFAULT_BIN_WIDTH {
                let mut h =
                    imucap_core::evaluation::Histogram::new(a.bin_width, report.histogram.range)?;
                report.frames.iter().for_each(|f| h.add(f.angle_deg));
                report.histogram = h;
            }
            report
        }
        (None, None, Some(pred), Some(truth)) => {
            let names = at(truth, list_names(truth, POSE_EXTENSION))?;
            if names.is_empty() {
                return Err(Failure(format!("no .dips files in {}", truth.display())));
            }
            let mut predictions = Vec::new();
            let mut truths = Vec::new();
            for name in &names {
                let (_, truth_path) = sequence_paths(truth, name);
                let (_, pred_path) = sequence_paths(pred, name);
                let t = at(&truth_path, load_poses(&truth_path))?;
                let p = at(&pred_path, load_poses(&pred_path))?;
                if p.frames.len() > t.frames.len() {
                    return Err(Failure(format!(
                        "{name}: more predicted frames than ground truth"
                    )));
                }
                predictions.push(SequencePrediction {
                    name: name.clone(),
                    frames: p.frames.into_iter().map(|f| f.pose).enumerate().collect(),
                });
                truths.push(t.frames.into_iter().map(|f| f.pose).collect::<Vec<Pose>>());
            }
            let refs: Vec<&[Pose]> = truths.iter().map(Vec::as_slice).collect();
            score(&predictions, &refs, &tree, a.mode, a.bin_width)?
        }
        _ => {
            return Err(Failure(
                "give either --model and --data, or --pred and --truth".into(),
            ))
        }
    };
    write_report(&a, &report)
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let checkpoint = at(&a.model, load_checkpoint(&a.model))?;
    let samples = at(&a.data, load_samples(&a.data, checkpoint.config.scheme))?;
    let refs: Vec<_> = samples.iter().collect();
    let grid = window_sweep(
        &checkpoint,
        &refs,
        &a.past,
        &a.future,
        &KinematicTree::default_skeleton(),
    )?;
    write_text(a.out.as_deref(), &grid.to_csv())
}

/// Readings from `input`, calibrated with `calibration` when given.
fn load_frames(input: &Path, calibration: Option<&Path>) -> CliResult<SyntheticImuSequence> {
    let mut imu = at(input, load_imu(input))?;
    if let Some(p) = calibration {
        let cal = at(p, load_calibration(p))?;
        imu.frames = imu
            .frames
            .iter()
            .map(|f| calibrate_frame(f, &cal))
            .collect::<imucap_core::Result<_>>()?;
    }
    Ok(imu)
}

fn cmd_infer(a: InferArgs) -> CliResult {
    let checkpoint = at(&a.model, load_checkpoint(&a.model))?;
    let imu = load_frames(&a.input, a.calibration.as_deref())?;
    let poses: Vec<Pose> = match a.mode {
        EvalMode::Offline => {
            let inputs = normalize_sequence(&imu.frames, checkpoint.config.scheme)?;
            predict_offline(&checkpoint, &inputs)?
        }
        EvalMode::Online(window) => {
            // Same per-frame path as the server.
            let mut state = StreamState::new(window);
            let mut out = Vec::with_capacity(imu.frames.len());
            for f in &imu.frames {
                if let Some(e) = state.push_calibrated(&checkpoint, f)? {
                    out.push(e.pose);
                }
            }
            out
        }
    };
    let seq = PoseSequence {
        fps: imu.fps,
        frames: poses
            .into_iter()
            .map(|pose| PoseFrame {
                pose,
                root_rotation: Rotation::identity(),
                root_position: Vec3::zeros(),
            })
            .collect(),
    };
    at(&a.out, save_poses(&a.out, &seq))?;
    log::info!(
        "{} poses from {} frames",
        seq.frames.len(),
        imu.frames.len()
    );
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> CliResult {
    let checkpoint = at(&a.model, load_checkpoint(&a.model))?;
    let calibration = at(&a.calibration, load_calibration(&a.calibration))?;
    let context = SessionContext::new(checkpoint, calibration, a.window)?;
    let server = Server::bind((a.host.as_str(), a.port), context)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "listening on {}", server.local_addr()?)?;
    out.flush()?;
    drop(out);
    server.run()?;
    Ok(())
}

fn cmd_throughput(a: ThroughputArgs) -> CliResult {
    let checkpoint = at(&a.model, load_checkpoint(&a.model))?;
    let frames = match &a.input {
        Some(p) => load_frames(p, a.calibration.as_deref())?.frames,
        None => {
            let catalog = MotionCatalog::from_names(&["walk"], 1, 600, 60)?;
            let seq = &generate_procedural_motions(&catalog, 0)?[0];
            synthesize(seq, &KinematicTree::default_skeleton(), &default_sensors())?
                .0
                .frames
        }
    };
    if !(a.seconds > 0.0 && a.seconds.is_finite()) {
        return Err(Failure("--seconds must be positive".into()));
    }
    let r = measure_throughput(
        &checkpoint,
        a.window,
        &frames,
        Duration::from_secs_f64(a.seconds),
    )?;
    write_text(
        None,
        &format!(
            "frames,seconds,fps,mean_latency_ms,p50_latency_ms,p95_latency_ms,max_latency_ms\n{},{:.3},{:.1},{:.3},{:.3},{:.3},{:.3}\n",
            r.frames, r.seconds, r.fps, r.mean_latency_ms, r.p50_latency_ms, r.p95_latency_ms, r.max_latency_ms
        ),
    )
}
