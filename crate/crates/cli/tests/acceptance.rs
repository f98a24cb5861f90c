//! Acceptance criteria, one PASS/FAIL line each.
//!
//! The toy model is trained once through the `imucap` binary and shared by
//! the criteria that need it. Lines are written straight to the stderr
//! handle so they show without `--nocapture`.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use imucap_core::calibration::{
    calibrate_frame, compute_bone_offsets, compute_inertial_to_body, estimate_gravity,
    CalibrationState,
};
use imucap_core::evaluation::{EvalSummary, Histogram, SweepGrid};
use imucap_core::inference::{outputs_to_pose, predict_offline, stream_sequence, WindowConfig};
use imucap_core::io::config::RunConfig;
use imucap_core::io::dataset::load_samples;
use imucap_core::io::formats::{
    decode_calibration, decode_checkpoint, decode_imu, decode_poses, encode_calibration,
    encode_checkpoint, encode_imu, encode_poses,
};
use imucap_core::io::server::replay_frames;
use imucap_core::io::wire::{encode_frame, pose_len, Handshake, WirePose};
use imucap_core::io::{load_checkpoint, load_imu, load_poses};
use imucap_core::kinematics::{default_sensors, JOINT_COUNT, SENSOR_COUNT};
use imucap_core::network::{
    backward, dropout_mask, forward, nll_loss, Frames, GaussianSequence, Mode,
};
use imucap_core::normalization::normalize_frame;
use imucap_core::synthesis::{
    synthesize, synthesize_accelerations, PoseFrame, PoseSequence, SyntheticImuSequence,
};
use imucap_core::training::{clip_by_global_norm, lr_schedule, TrainConfig, TrainReport};
use imucap_core::{
    CalibratedFrame, Checkpoint, Error, KinematicTree, ModelConfig, NormalizationScheme, Params,
    Pose, RawSensorFrame, Rotation, Standardizer, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

const MOTIONS: &str = "arm_raise,arm_swing,leg_raise,squat,walk";
const TOY_CONFIG: &str = "\
hidden_units = 32
dense_units = 32
input_keep_prob = 0.8
initial_lr = 0.003
window_frames = 60
window_stride = 30
batch_size = 4
max_epochs = 300
early_stop_patience = 300
seed = 0
";
const ABLATION_EPOCHS: usize = 60;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn imucap(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_imucap"))
        .args(args)
        .env_remove("IMUCAP_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawn imucap: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "imucap {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    train: PathBuf,
    held: PathBuf,
    model: PathBuf,
    config: PathBuf,
    calibration: PathBuf,
    report: TrainReport,
    train_seconds: f64,
}

impl Fixture {
    fn build() -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = dir.path().to_path_buf();
        let train = root.join("train");
        let held = root.join("held");
        imucap(&[
            "synthesize",
            "--motions",
            MOTIONS,
            "--seed",
            "0",
            "--out",
            p(&train),
        ])?;
        imucap(&[
            "synthesize",
            "--motions",
            MOTIONS,
            "--seed",
            "99",
            "--raw-seed",
            "7",
            "--out",
            p(&held),
        ])?;
        let config = root.join("toy.cfg");
        std::fs::write(&config, TOY_CONFIG).map_err(|e| e.to_string())?;
        let model = root.join("toy.dipm");
        let report_path = root.join("toy.csv");
        let started = Instant::now();
        imucap(&[
            "train",
            "--config",
            p(&config),
            "--data",
            p(&train),
            "--out",
            p(&model),
            "--report",
            p(&report_path),
        ])?;
        let train_seconds = started.elapsed().as_secs_f64();
        let text = std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?;
        let epochs = TrainReport::epochs_from_csv(&text).map_err(|e| e.to_string())?;
        let calibration = root.join("held.dipc");
        let still = held.join("raw").join("still.dipi");
        imucap(&["calibrate", "--in", p(&still), "--out", p(&calibration)])?;
        Ok(Self {
            _dir: dir,
            root,
            train,
            held,
            model,
            config,
            calibration,
            report: TrainReport {
                epochs,
                ..TrainReport::default()
            },
            train_seconds,
        })
    }

    fn checkpoint(&self) -> Result<Checkpoint, String> {
        load_checkpoint(&self.model).map_err(|e| e.to_string())
    }
}

fn fixture() -> Result<&'static Fixture, String> {
    static FIXTURE: OnceLock<Result<Fixture, String>> = OnceLock::new();
    FIXTURE
        .get_or_init(Fixture::build)
        .as_ref()
        .map_err(|e| format!("toy fixture unavailable: {e}"))
}

fn eval_summary(model: &Path, data: &Path, mode: &str) -> Result<EvalSummary, String> {
    let text = imucap(&[
        "eval",
        "--model",
        p(model),
        "--data",
        p(data),
        "--mode",
        mode,
    ])?;
    EvalSummary::from_csv(&text).map_err(|e| e.to_string())
}

fn random_frames(len: usize, dim: usize, rng: &mut ChaCha8Rng) -> Frames {
    let data = (0..len * dim)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    Frames::from_flat(dim, data).unwrap()
}

/// Per-entry NLL terms without the constant; summing their differences is
/// the central difference of the loss with far less cancellation.
fn nll_terms(
    params: &Params,
    cfg: &ModelConfig,
    x: &Frames,
    mask: &Frames,
    pose: &Frames,
    acc: &Frames,
) -> Vec<f64> {
    let (out, _) = forward(params, cfg, x, Some(mask), Mode::Inference).unwrap();
    let mut terms = Vec::new();
    for (y, m, s) in [
        (pose, &out.pose_mu, &out.pose_sigma),
        (acc, &out.acc_mu, &out.acc_sigma),
    ] {
        for ((y, m), s) in y.as_slice().iter().zip(m.as_slice()).zip(s.as_slice()) {
            let z = (y - m) / s;
            terms.push(s.ln() + 0.5 * z * z);
        }
    }
    terms
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let cfg = ModelConfig::toy(8);
    assert!(cfg.bidirectional && cfg.num_layers == 2 && cfg.use_acc_loss);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = Params::init(&cfg, &mut rng).unwrap();
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    }
    let len = 7;
    let x = random_frames(len, cfg.input_dim, &mut rng);
    let mask = dropout_mask(len, cfg.input_dim, cfg.input_keep_prob, &mut rng);
    let pose = random_frames(len, cfg.pose_dim, &mut rng);
    let acc = random_frames(len, cfg.acc_dim, &mut rng);
    let (out, cache) = forward(&params, &cfg, &x, Some(&mask), Mode::Training).unwrap();
    let grad = backward(&params, &cfg, &out, cache.as_ref(), &pose, &acc, 1.0).unwrap();
    let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(|t| t.2.to_vec()).collect();
    let sizes: Vec<usize> = analytic.iter().map(Vec::len).collect();

    let h = 1e-5;
    let samples = 300;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let ti = rng.random_range(0..sizes.len());
        let k = rng.random_range(0..sizes[ti]);
        let mut plus = params.clone();
        plus.tensors_mut()[ti][k] += h;
        let mut minus = params.clone();
        minus.tensors_mut()[ti][k] -= h;
        let up = nll_terms(&plus, &cfg, &x, &mask, &pose, &acc);
        let down = nll_terms(&minus, &cfg, &x, &mask, &pose, &acc);
        let numeric =
            up.iter().zip(&down).map(|(a, b)| a - b).sum::<f64>() / (2.0 * h * len as f64);
        let a = analytic[ti][k];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
    }
    let seconds = started.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && seconds < 30.0,
        format!("{samples} parameters, T = {len}, worst relative error {worst:.2e}, {seconds:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_r: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for _ in 0..20 {
        let r_ti = Rotation::random(&mut rng);
        let r_it = r_ti.inverse();
        let offsets: Vec<Rotation> = (0..SENSOR_COUNT)
            .map(|_| Rotation::random(&mut rng))
            .collect();
        let up = Vec3::new(0.0, rng.random_range(9.7..9.9), 0.0);
        let g_inertial = r_it.rotate(&up);
        // Raw reading of a body-frame orientation and acceleration.
        let raw = |r_tb: &Rotation, r_bs: &Rotation, a_t: &Vec3| {
            let r_is = r_it * *r_tb * *r_bs;
            (
                r_is,
                r_is.inverse().rotate(&(r_it.rotate(a_t) + g_inertial)),
            )
        };
        let bones: Vec<Rotation> = (0..SENSOR_COUNT)
            .map(|_| Rotation::random(&mut rng))
            .collect();
        let straight: Vec<(Rotation, Vec3)> = bones
            .iter()
            .zip(&offsets)
            .map(|(b, o)| raw(b, o, &Vec3::zeros()))
            .collect();
        let straight_frame = RawSensorFrame {
            orientations: straight.iter().map(|s| s.0).collect(),
            accelerations: straight.iter().map(|s| s.1).collect(),
        };
        // Head sensor held aligned with the body frame.
        let head = r_it;
        let cal_r_ti = compute_inertial_to_body(&head);
        let body: Vec<Rotation> = straight_frame
            .orientations
            .iter()
            .map(|r| cal_r_ti * *r)
            .collect();
        let cal = CalibrationState {
            inertial_to_body: cal_r_ti,
            bone_offsets: compute_bone_offsets(&bones, &body).unwrap(),
            gravity: estimate_gravity(&vec![straight_frame.clone(); 40]).unwrap(),
        };
        for _ in 0..50 {
            let truth = CalibratedFrame {
                orientations: (0..SENSOR_COUNT)
                    .map(|_| Rotation::random(&mut rng))
                    .collect(),
                accelerations: (0..SENSOR_COUNT)
                    .map(|_| Vec3::from_fn(|_, _| rng.random_range(-30.0..30.0)))
                    .collect(),
            };
            let readings: Vec<(Rotation, Vec3)> = truth
                .orientations
                .iter()
                .zip(&offsets)
                .zip(&truth.accelerations)
                .map(|((r, o), a)| raw(r, o, a))
                .collect();
            let frame = RawSensorFrame {
                orientations: readings.iter().map(|s| s.0).collect(),
                accelerations: readings.iter().map(|s| s.1).collect(),
            };
            let got = calibrate_frame(&frame, &cal).unwrap();
            for (a, b) in got.orientations.iter().zip(&truth.orientations) {
                worst_r = worst_r.max(a.max_abs_diff(b));
            }
            for (a, b) in got.accelerations.iter().zip(&truth.accelerations) {
                worst_a = worst_a.max((a - b).amax());
            }
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    ensure(
        worst_r < 1e-9 && worst_a < 1e-9 && seconds < 1.0,
        format!("1000 frames over 20 sessions, max entry error {worst_r:.1e}, max acc error {worst_a:.1e} m/s², {seconds:.3}s"),
    )
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let frame = CalibratedFrame {
            orientations: (0..SENSOR_COUNT)
                .map(|_| Rotation::random(&mut rng))
                .collect(),
            accelerations: (0..SENSOR_COUNT)
                .map(|_| Vec3::from_fn(|_, _| rng.random_range(-20.0..20.0)))
                .collect(),
        };
        let g = Rotation::random(&mut rng);
        let turned = CalibratedFrame {
            orientations: frame.orientations.iter().map(|r| g * *r).collect(),
            accelerations: frame.accelerations.iter().map(|a| g.rotate(a)).collect(),
        };
        let a = normalize_frame(&frame, NormalizationScheme::PerFrameRoot, None).unwrap();
        let b = normalize_frame(&turned, NormalizationScheme::PerFrameRoot, None).unwrap();
        worst = a
            .iter()
            .zip(&b)
            .fold(worst, |w, (x, y)| w.max((x - y).abs()));
    }
    let seconds = started.elapsed().as_secs_f64();
    ensure(
        worst < 1e-9 && seconds < 5.0,
        format!("1000 trials, max component change {worst:.1e}, {seconds:.3}s"),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dt = 1.0 / 60.0;
    let mut worst_quad: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    for _ in 0..20 {
        let rand3 = |rng: &mut ChaCha8Rng, s: f64| Vec3::from_fn(|_, _| rng.random_range(-s..s));
        let tracks: Vec<(Vec3, Vec3, Vec3)> = (0..SENSOR_COUNT)
            .map(|_| {
                (
                    rand3(&mut rng, 1.0),
                    rand3(&mut rng, 2.0),
                    rand3(&mut rng, 5.0),
                )
            })
            .collect();
        let quadratic: Vec<Vec<Vec3>> = (0..120)
            .map(|k| {
                let t = k as f64 * dt;
                tracks
                    .iter()
                    .map(|(p0, v, a)| p0 + v * t + a * (0.5 * t * t))
                    .collect()
            })
            .collect();
        let linear: Vec<Vec<Vec3>> = (0..120)
            .map(|k| {
                tracks
                    .iter()
                    .map(|(p0, v, _)| p0 + v * (k as f64 * dt))
                    .collect()
            })
            .collect();
        for frame in synthesize_accelerations(&quadratic, dt).unwrap() {
            for (got, (_, _, a)) in frame.iter().zip(&tracks) {
                worst_quad = worst_quad.max((got - a).amax());
            }
        }
        for frame in synthesize_accelerations(&linear, dt).unwrap() {
            worst_lin = frame.iter().fold(worst_lin, |w, a| w.max(a.amax()));
        }
    }
    // Whole pipeline: a rigid body on a quadratic root path.
    let accel = Vec3::new(0.8, -0.3, 1.7);
    let frames = (0..60)
        .map(|k| {
            let t = k as f64 * dt;
            PoseFrame {
                pose: Pose::identity(JOINT_COUNT),
                root_rotation: Rotation::about_y(0.4),
                root_position: Vec3::new(0.1, 0.9, -0.2)
                    + Vec3::new(0.5, 0.0, 0.2) * t
                    + accel * (0.5 * t * t),
            }
        })
        .collect();
    let seq = PoseSequence::new(60, frames).unwrap();
    let (imu, _) =
        synthesize(&seq, &KinematicTree::default_skeleton(), &default_sensors()).unwrap();
    let worst_rigid = imu
        .frames
        .iter()
        .flat_map(|f| f.accelerations.iter())
        .fold(0.0f64, |w, a| w.max((a - accel).amax()));
    let seconds = started.elapsed().as_secs_f64();
    ensure(
        worst_quad < 1e-9 && worst_lin < 1e-9 && worst_rigid < 1e-9 && seconds < 1.0,
        format!(
            "quadratic error {worst_quad:.1e}, linear residual {worst_lin:.1e}, rigid-body error {worst_rigid:.1e}, {seconds:.3}s"
        ),
    )
}

fn criterion_5() -> Outcome {
    let f = fixture()?;
    let summary = eval_summary(&f.model, &f.train, "offline")?;
    let first = f.report.epochs.first().ok_or("empty training report")?;
    let last = f.report.epochs.last().ok_or("empty training report")?;
    ensure(
        summary.mean_angle_deg < 5.0 && last.train_nll < first.train_nll && f.train_seconds < 600.0,
        format!(
            "training-set mean angle error {:.2}°, train NLL {:.2} → {:.2} over {} epochs, {:.0}s",
            summary.mean_angle_deg,
            first.train_nll,
            last.train_nll,
            f.report.epochs.len(),
            f.train_seconds
        ),
    )
}

fn criterion_6() -> Outcome {
    let f = fixture()?;
    let ckpt = f.checkpoint()?;
    let samples = load_samples(&f.held, ckpt.config.scheme).map_err(|e| e.to_string())?;
    let inputs = &samples[0].inputs[..40];
    let offline = predict_offline(&ckpt, inputs).map_err(|e| e.to_string())?;
    let mut identical = 0;
    for (t, expected) in offline.iter().enumerate() {
        let window = WindowConfig::new(t, inputs.len() - 1 - t);
        let emissions = stream_sequence(&ckpt, window, inputs).map_err(|e| e.to_string())?;
        let e = emissions.last().ok_or("no emission")?;
        if e.frame == t && &e.pose == expected {
            identical += 1;
        }
    }
    let off = eval_summary(&f.model, &f.held, "offline")?;
    let on = eval_summary(&f.model, &f.held, "online:20,5")?;
    let rel = (on.mean_angle_deg - off.mean_angle_deg).abs() / off.mean_angle_deg;
    ensure(
        identical == inputs.len() && rel <= 0.25,
        format!(
            "{identical}/{} full-window emissions bit-identical; held-out offline {:.2}°, online(20,5) {:.2}° ({:.1}% apart)",
            inputs.len(),
            off.mean_angle_deg,
            on.mean_angle_deg,
            rel * 100.0
        ),
    )
}

fn criterion_7() -> Outcome {
    let f = fixture()?;
    let out = f.root.join("sweep.csv");
    imucap(&[
        "sweep",
        "--model",
        p(&f.model),
        "--data",
        p(&f.held),
        "--past",
        "20",
        "--future",
        "0,5",
        "--out",
        p(&out),
    ])?;
    let grid = SweepGrid::from_csv(&std::fs::read_to_string(&out).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let with_future = grid.get(20, 5).ok_or("missing (20, 5)")?;
    let without = grid.get(20, 0).ok_or("missing (20, 0)")?;
    ensure(
        with_future <= without + 0.5,
        format!("held-out μ_ang (20,5) {with_future:.2}° vs (20,0) {without:.2}°"),
    )
}

fn criterion_8() -> Outcome {
    let f = fixture()?;
    let epochs = format!("max_epochs={ABLATION_EPOCHS}");
    let report = f.root.join("ablation.csv");
    let mut parts = Vec::new();
    for (label, set) in [
        ("full", None),
        ("no acc inputs", Some("use_acc_inputs=false")),
        ("no acc loss", Some("use_acc_loss=false")),
    ] {
        let model = f
            .root
            .join(format!("ablation_{}.dipm", label.replace(' ', "_")));
        let mut args = vec![
            "train",
            "--config",
            p(&f.config),
            "--data",
            p(&f.train),
            "--out",
            p(&model),
            "--set",
            &epochs,
            "--report",
            p(&report),
        ];
        if let Some(s) = set {
            args.extend(["--set", s]);
        }
        imucap(&args)?;
        let s = eval_summary(&model, &f.held, "offline")?;
        if !s.mean_angle_deg.is_finite() {
            return Err(format!("{label}: non-finite error"));
        }
        parts.push(format!("{label} {:.2}°", s.mean_angle_deg));
    }
    Ok(format!(
        "held-out μ_ang after {ABLATION_EPOCHS} epochs: {}",
        parts.join(", ")
    ))
}

fn criterion_9() -> Outcome {
    let f = fixture()?;
    let standardizer: Standardizer = f.checkpoint()?.standardizer;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut emitted = 0usize;
    let mut degenerate = 0usize;
    let mut worst_orth: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for _ in 0..100_000 {
        let y: Vec<f64> = (0..JOINT_COUNT * 9)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 3.0)
            .collect();
        match outputs_to_pose(&y, &standardizer) {
            Ok(pose) => {
                for r in &pose.joint_rotations {
                    let m = r.matrix();
                    worst_orth =
                        worst_orth.max((m.transpose() * m - Rotation::identity().matrix()).amax());
                    worst_det = worst_det.max((m.determinant() - 1.0).abs());
                    emitted += 1;
                }
            }
            Err(Error::DegenerateOutput { .. }) => degenerate += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    ensure(
        worst_orth < 1e-6 && worst_det < 1e-6 && emitted > 0,
        format!(
            "{emitted} rotations from 100000 outputs ({degenerate} degenerate), max |RᵀR − I| {worst_orth:.1e}, max |det − 1| {worst_det:.1e}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = ModelConfig::toy(4);
    let len = 5;
    let zeros = |dim| Frames::zeros(len, dim);
    let ones = |dim: usize| Frames::from_flat(dim, vec![1.0; len * dim]).unwrap();
    let out = GaussianSequence {
        pose_mu: zeros(cfg.pose_dim),
        pose_sigma: ones(cfg.pose_dim),
        acc_mu: zeros(cfg.acc_dim),
        acc_sigma: ones(cfg.acc_dim),
    };
    let nll = nll_loss(&out, &zeros(cfg.pose_dim), &zeros(cfg.acc_dim), &cfg).unwrap();
    let d = (cfg.pose_dim + cfg.acc_dim) as f64;
    let closed = d / 2.0 * (2.0 * std::f64::consts::PI).ln();
    let lr = lr_schedule(2000, &TrainConfig::default());
    let mut g = vec![3.0, 4.0];
    clip_by_global_norm(&mut [&mut g], 1.0).unwrap();
    ensure(
        (nll - closed).abs() < 1e-12 && lr == 0.00096 && g == [0.6, 0.8],
        format!(
            "NLL {nll} vs (d/2)·log 2π = {closed}, lr(2000) = {lr}, clip(3,4) = ({}, {})",
            g[0], g[1]
        ),
    )
}

struct ServerProcess(Child);

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

struct PacedSession {
    indices: Vec<u64>,
    arrivals: Vec<Instant>,
    sent: Vec<Instant>,
}

/// Sends frames at `rate` Hz and records when each pose arrives.
fn paced_session(addr: &str, frames: &[RawSensorFrame], rate: f64) -> Result<PacedSession, String> {
    let mut stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    stream.set_nodelay(true).map_err(|e| e.to_string())?;
    stream
        .write_all(&Handshake::new(SENSOR_COUNT as u8, false).encode())
        .map_err(|e| e.to_string())?;
    let mut reply = [0u8; 2];
    stream.read_exact(&mut reply).map_err(|e| e.to_string())?;
    if reply[0] != 1 {
        return Err("handshake rejected".into());
    }
    let expected = frames.len().saturating_sub(reply[1] as usize);
    let mut reader = stream.try_clone().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let collector = thread::spawn(move || {
        let mut buf = vec![0u8; pose_len(false)];
        let mut got = Vec::new();
        while got.len() < expected && reader.read_exact(&mut buf).is_ok() {
            got.push((
                WirePose::decode(&buf, false).map(|p| p.index),
                Instant::now(),
            ));
        }
        got
    });
    let mut sent = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let due = Duration::from_secs_f64(i as f64 / rate);
        if let Some(wait) = due.checked_sub(start.elapsed()) {
            thread::sleep(wait);
        }
        stream
            .write_all(&encode_frame(i as u64, f))
            .map_err(|e| e.to_string())?;
        sent.push(Instant::now());
    }
    let got = collector.join().map_err(|_| "reader panicked")?;
    let _ = stream.shutdown(std::net::Shutdown::Both);
    let mut indices = Vec::with_capacity(got.len());
    let mut arrivals = Vec::with_capacity(got.len());
    for (index, at) in got {
        indices.push(index.map_err(|e| e.to_string())?);
        arrivals.push(at);
    }
    Ok(PacedSession {
        indices,
        arrivals,
        sent,
    })
}

fn criterion_11() -> Outcome {
    let f = fixture()?;
    let mut child = Command::new(env!("CARGO_BIN_EXE_imucap"))
        .args([
            "serve",
            "--model",
            p(&f.model),
            "--calibration",
            p(&f.calibration),
            "--window",
            "20,5",
            "--port",
            "0",
        ])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().ok_or("no server stdout")?;
    let server = ServerProcess(child);
    let mut line = String::new();
    BufReader::new(stdout)
        .read_line(&mut line)
        .map_err(|e| e.to_string())?;
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or(format!("unexpected banner {line:?}"))?
        .to_string();

    let raw_path = f.held.join("raw").join("walk.dipi");
    let raw = load_imu(&raw_path).map_err(|e| e.to_string())?;

    // 100 frames at 60 Hz.
    let PacedSession {
        indices,
        arrivals,
        sent,
    } = paced_session(&addr, &raw.frames[..100], 60.0)?;
    let in_order = indices.iter().enumerate().all(|(i, &k)| k == i as u64);
    let causal = arrivals.iter().enumerate().all(|(k, a)| *a >= sent[k + 5]);
    let mean_delay_ms = arrivals
        .iter()
        .enumerate()
        .map(|(k, a)| a.duration_since(sent[k]).as_secs_f64() * 1e3)
        .sum::<f64>()
        / arrivals.len().max(1) as f64;

    // Whole-file replay against `infer`.
    let started = Instant::now();
    let served = replay_frames(addr.as_str(), &raw.frames, false).map_err(|e| e.to_string())?;
    let replay_fps = raw.frames.len() as f64 / started.elapsed().as_secs_f64();
    drop(server);
    let inferred = f.root.join("walk_online.dips");
    imucap(&[
        "infer",
        "--model",
        p(&f.model),
        "--in",
        p(&raw_path),
        "--calibration",
        p(&f.calibration),
        "--mode",
        "online:20,5",
        "--out",
        p(&inferred),
    ])?;
    let offline_side = load_poses(&inferred).map_err(|e| e.to_string())?;
    let identical = served.len() == offline_side.frames.len()
        && served
            .iter()
            .zip(&offline_side.frames)
            .enumerate()
            .all(|(i, (w, pf))| {
                let flat: Vec<f32> = pf
                    .pose
                    .joint_rotations
                    .iter()
                    .flat_map(|r| r.to_row_major())
                    .map(|v| v as f32)
                    .collect();
                w.index == i as u64 && w.rotations == flat
            });

    let text = imucap(&[
        "throughput",
        "--model",
        p(&f.model),
        "--window",
        "20,5",
        "--seconds",
        "2",
    ])?;
    let fps: f64 = text
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(2))
        .and_then(|v| v.parse().ok())
        .ok_or(format!("bad throughput output {text:?}"))?;
    ensure(
        indices.len() == 95 && in_order && causal && identical && fps >= 60.0 && replay_fps >= 60.0,
        format!(
            "{} poses for 100 frames (indices in order: {in_order}, after frame t+5: {causal}), mean input→pose delay {mean_delay_ms:.0} ms; \
             replay of {} frames bit-identical to infer: {identical}; {fps:.0} FPS in-process, {replay_fps:.0} FPS over TCP",
            indices.len(),
            raw.frames.len()
        ),
    )
}

/// Every strict prefix of `bytes` must fail to decode without panicking.
fn truncations<T>(
    bytes: &[u8],
    decode: fn(&[u8]) -> imucap_core::Result<T>,
) -> Result<usize, String> {
    let mut truncated = 0;
    for k in 0..bytes.len() {
        match panic::catch_unwind(AssertUnwindSafe(|| decode(&bytes[..k]))) {
            Ok(Ok(_)) => return Err(format!("prefix of {k} bytes decoded")),
            Ok(Err(Error::Truncated { .. })) => truncated += 1,
            Ok(Err(_)) => {}
            Err(_) => return Err(format!("decoder panicked on a {k}-byte prefix")),
        }
    }
    Ok(truncated)
}

const HEX_DIPI: &str = "\
44495049 01000000 3c000000 02000000 01000000
0000803f 00000000 00000000 00000000 0000803f 00000000 00000000 00000000 0000803f
0000c03f 000000c0 0000803e
00000000 000080bf 00000000 0000803f 00000000 00000000 00000000 00000000 0000803f
00000000 00000000 000018c1";

fn criterion_12() -> Outcome {
    let f = fixture()?;
    let mut checked = Vec::new();
    let same_bytes = |path: &Path, encoded: imucap_core::Result<Vec<u8>>| -> Result<(), String> {
        let disk = std::fs::read(path).map_err(|e| e.to_string())?;
        if encoded.map_err(|e| e.to_string())? != disk {
            return Err(format!("{} changed on save→load→save", path.display()));
        }
        Ok(())
    };
    let dips = f.train.join("walk.dips");
    let dipi = f.held.join("raw").join("walk.dipi");
    same_bytes(
        &dips,
        decode_poses(&std::fs::read(&dips).unwrap()).and_then(|s| encode_poses(&s)),
    )?;
    same_bytes(
        &dipi,
        decode_imu(&std::fs::read(&dipi).unwrap()).and_then(|s| encode_imu(&s)),
    )?;
    same_bytes(
        &f.calibration,
        decode_calibration(&std::fs::read(&f.calibration).unwrap())
            .and_then(|c| encode_calibration(&c)),
    )?;
    same_bytes(
        &f.model,
        decode_checkpoint(&std::fs::read(&f.model).unwrap()).and_then(|c| encode_checkpoint(&c)),
    )?;
    checked.push("DIPS, DIPI, DIPC, DIPM");

    // CSV reports written by the CLI.
    let r = &f.root;
    let (summary, frames, hist, stats) = (
        r.join("s.csv"),
        r.join("f.csv"),
        r.join("h.csv"),
        r.join("stats.csv"),
    );
    imucap(&[
        "eval",
        "--model",
        p(&f.model),
        "--data",
        p(&f.held),
        "--mode",
        "online:20,5",
        "--summary",
        p(&summary),
        "--frames",
        p(&frames),
        "--histogram",
        p(&hist),
    ])?;
    imucap(&["fit-stats", "--data", p(&f.train), "--out", p(&stats)])?;
    let read = |path: &Path| std::fs::read_to_string(path).map_err(|e| e.to_string());
    let csv_cases: Vec<(String, String)> = vec![
        (
            read(&summary)?,
            EvalSummary::from_csv(&read(&summary)?)
                .map_err(|e| e.to_string())?
                .to_csv(),
        ),
        (
            read(&hist)?,
            Histogram::from_csv(&read(&hist)?)
                .map_err(|e| e.to_string())?
                .to_csv(),
        ),
        (
            read(&stats)?,
            Standardizer::from_csv(&read(&stats)?)
                .map_err(|e| e.to_string())?
                .to_csv(),
        ),
        (
            read(&r.join("sweep.csv"))?,
            SweepGrid::from_csv(&read(&r.join("sweep.csv"))?)
                .map_err(|e| e.to_string())?
                .to_csv(),
        ),
        (read(&r.join("toy.csv"))?, {
            let epochs = TrainReport::epochs_from_csv(&read(&r.join("toy.csv"))?)
                .map_err(|e| e.to_string())?;
            TrainReport {
                epochs,
                ..TrainReport::default()
            }
            .to_csv()
        }),
        {
            let saved = RunConfig::parse_text(&read(&f.config)?)
                .map_err(|e| e.to_string())?
                .to_text();
            let again = RunConfig::parse_text(&saved)
                .map_err(|e| e.to_string())?
                .to_text();
            (saved, again)
        },
    ];
    let frame_rows =
        imucap_core::evaluation::frames_from_csv(&read(&frames)?).map_err(|e| e.to_string())?;
    if frame_rows.is_empty() {
        return Err("empty per-frame CSV".into());
    }
    if let Some(i) = csv_cases.iter().position(|(a, b)| a != b) {
        return Err(format!("CSV case {i} changed on round trip"));
    }
    checked.push("6 CSV/config formats");

    // Truncation of small fixtures.
    let poses = load_poses(&dips).unwrap();
    let small_poses = encode_poses(&PoseSequence {
        fps: 60,
        frames: poses.frames[..3].to_vec(),
    })
    .unwrap();
    let imu = load_imu(&dipi).unwrap();
    let small_imu = encode_imu(&SyntheticImuSequence {
        fps: 60,
        frames: imu.frames[..2].to_vec(),
    })
    .unwrap();
    let cal = std::fs::read(&f.calibration).unwrap();
    let tiny_cfg = ModelConfig {
        num_layers: 1,
        bidirectional: false,
        ..ModelConfig::toy(2)
    };
    let base = f.checkpoint()?;
    let tiny = Checkpoint {
        params: Params::init(&tiny_cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap(),
        config: tiny_cfg,
        standardizer: base.standardizer,
    };
    let small_model = encode_checkpoint(&tiny).unwrap();
    let mut cut = 0;
    let mut kinds = 0;
    for (bytes, n) in [
        (&small_poses, truncations(&small_poses, decode_poses)?),
        (&small_imu, truncations(&small_imu, decode_imu)?),
        (&cal, truncations(&cal, decode_calibration)?),
        (&small_model, truncations(&small_model, decode_checkpoint)?),
    ] {
        cut += bytes.len();
        kinds += n;
    }
    checked.push("truncation");

    // Hand-written little-endian fixture.
    let hex: String = HEX_DIPI.split_whitespace().collect();
    let fixture_bytes: Vec<u8> = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).unwrap())
        .collect();
    let seq = decode_imu(&fixture_bytes).map_err(|e| e.to_string())?;
    let quarter_turn = Rotation::about_z(std::f64::consts::FRAC_PI_2);
    let hex_ok = seq.fps == 60
        && seq.frames.len() == 2
        && seq.frames[0].orientations[0] == Rotation::identity()
        && seq.frames[0].accelerations[0] == Vec3::new(1.5, -2.0, 0.25)
        && seq.frames[1].orientations[0].max_abs_diff(&quarter_turn) < 1e-15
        && seq.frames[1].accelerations[0] == Vec3::new(0.0, 0.0, -9.5)
        && encode_imu(&seq).unwrap() == fixture_bytes;
    checked.push("hex DIPI fixture");
    ensure(
        hex_ok && kinds == cut,
        format!(
            "{}; {cut} truncated prefixes all rejected ({kinds} as truncation); hex fixture decoded: {hex_ok}",
            checked.join(", ")
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 12] = [
        (1, "gradient correctness", criterion_1),
        (2, "calibration round trip", criterion_2),
        (3, "heading invariance", criterion_3),
        (4, "acceleration synthesis exactness", criterion_4),
        (5, "toy overfit", criterion_5),
        (6, "online/offline consistency", criterion_6),
        (7, "window-sweep direction", criterion_7),
        (8, "ablation hooks run", criterion_8),
        (9, "SO(3) output guarantee", criterion_9),
        (10, "loss closed forms", criterion_10),
        (11, "streaming contract", criterion_11),
        (12, "format robustness", criterion_12),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let line = format!(
            "acceptance {n:>2} {status} {name} [{:.1}s]: {detail}\n",
            started.elapsed().as_secs_f64()
        );
        let _ = std::io::stderr().write_all(line.as_bytes());
        if outcome.is_err() {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
