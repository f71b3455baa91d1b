use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use timeconv::arch::{load_checkpoint, save_checkpoint};
use timeconv::bench::{bench_inference, stream_simulate};
use timeconv::data::{
    build_archive, center_box, generate_synthetic, synthetic_clip, BuildConfig, DatasetArchive, Emotion, FaceBox,
    GrayFrame, Manifest, SynthConfig, WindowSpec,
};
use timeconv::gradcheck::{check_random_layer, LayerKind};
use timeconv::train::{
    deterministic_mode, evaluate, split_dataset, train, write_metrics_csv, AugmentConfig, TrainConfig,
    DETERMINISTIC_ENV,
};
use timeconv::{build_network, ArchId, Network, Rng};

#[derive(Parser)]
#[command(name = "timeconv", version, about = "Windowed spatiotemporal CNNs for facial expression clips")]
struct Cli {
    /// Seed for every random choice the subcommand makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Also write the JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a TCVX archive from a JSON clip manifest.
    BuildDataset {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 0.1)]
        box_extension: f64,
        /// Override every clip's window stride.
        #[arg(long)]
        stride: Option<usize>,
        /// Override every clip's skipped head frames.
        #[arg(long)]
        skip_head: Option<usize>,
    },
    /// Write a synthetic paired-trajectory archive.
    Synth {
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
    },
    /// Train an architecture and keep the best-validation checkpoint.
    Train {
        #[arg(long)]
        arch: ArchId,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long)]
        no_augment: bool,
        /// Metrics CSV; defaults to the checkpoint path with a `.csv` extension.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of a checkpoint on one split. Use the
    /// training seed to recover the training split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
    },
    /// Batch-1 single-threaded inference latency.
    Bench {
        /// Checkpoint to time; mutually exclusive with --arch.
        #[arg(long, conflicts_with = "arch", required_unless_present = "arch")]
        model: Option<PathBuf>,
        /// Time a freshly initialized network instead.
        #[arg(long)]
        arch: Option<ArchId>,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
    },
    /// Replay frames through the ring-buffer streaming pipeline.
    Stream {
        #[arg(long)]
        model: PathBuf,
        /// Directory of frame images, read in filename order.
        #[arg(long, conflicts_with = "synthetic")]
        frames_dir: Option<PathBuf>,
        /// Generate this many synthetic frames instead.
        #[arg(long, default_value_t = 100)]
        synthetic: usize,
        /// Label of the synthetic clip.
        #[arg(long, default_value = "happy")]
        label: String,
        /// Face box `x,y,w,h` applied to every frame; whole frame by default.
        #[arg(long = "box", value_parser = parse_box)]
        face: Option<FaceBox>,
        #[arg(long, default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
    },
    /// Finite-difference gradient check of every layer type.
    GradCheck {
        /// Random instances per layer type.
        #[arg(long, default_value_t = 20)]
        instances: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Val,
    Test,
    All,
}

fn parse_box(s: &str) -> std::result::Result<FaceBox, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(FaceBox { x, y, w, h }),
        _ => Err(format!("expected x,y,w,h, got {s:?}")),
    }
}

fn emit(report: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    println!("{text}");
    if let Some(p) = path {
        fs::write(p, text + "\n").with_context(|| format!("writing report {}", p.display()))?;
    }
    Ok(())
}

fn list_frames(dir: &Path) -> Result<Vec<GrayFrame>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| GrayFrame::open(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let report_path = cli.report.as_deref();
    match cli.command {
        Command::BuildDataset {
            manifest,
            out,
            width,
            box_extension,
            stride,
            skip_head,
        } => {
            let config = BuildConfig {
                width,
                box_extension,
                stride,
                skip_head,
            };
            let m = Manifest::load(&manifest)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let (archive, stats) = build_archive(&m, base, &config)?;
            archive.save(&out)?;
            emit(&json!({ "out": out, "seed": seed, "config": config, "stats": stats }), report_path)
        }
        Command::Synth { per_class, out, noise } => {
            if per_class == 0 {
                bail!("--per-class must be positive");
            }
            let config = SynthConfig {
                noise,
                ..SynthConfig::new(per_class)
            };
            let archive = generate_synthetic(&config, seed);
            archive.save(&out)?;
            emit(
                &json!({ "out": out, "seed": seed, "config": config, "samples": archive.len(), "class_counts": archive.class_counts() }),
                report_path,
            )
        }
        Command::Train {
            arch,
            data,
            out,
            epochs,
            batch_size,
            lr,
            no_augment,
            metrics,
        } => {
            let archive = DatasetArchive::load(&data)?;
            let config = TrainConfig {
                epochs,
                batch_size,
                initial_lr: lr,
                augment: if no_augment { AugmentConfig::none() } else { AugmentConfig::default() },
                seed,
                ..TrainConfig::default()
            };
            let outcome = train(arch, &archive, &config)?;
            save_checkpoint(&outcome.best, &out)?;
            let metrics_path = metrics.unwrap_or_else(|| out.with_extension("csv"));
            write_metrics_csv(&metrics_path, &outcome.metrics)?;
            let test = if outcome.split.test.is_empty() {
                None
            } else {
                Some(evaluate(&outcome.best, &archive, &outcome.split.test, batch_size)?)
            };
            emit(
                &json!({
                    "arch": arch,
                    "checkpoint": out,
                    "metrics": metrics_path,
                    "config": config,
                    "deterministic": deterministic_mode(),
                    "best_epoch": outcome.best_epoch,
                    "split_sizes": [outcome.split.train.len(), outcome.split.val.len(), outcome.split.test.len()],
                    "final": outcome.metrics.last(),
                    "test": test,
                }),
                report_path,
            )
        }
        Command::Eval {
            model,
            data,
            split,
            batch_size,
        } => {
            let net = load_checkpoint(&model)?;
            let archive = DatasetArchive::load(&data)?;
            let s = split_dataset(archive.len(), TrainConfig::default().split, seed)?;
            let (name, indices) = match split {
                SplitName::Train => ("train", s.train),
                SplitName::Val => ("val", s.val),
                SplitName::Test => ("test", s.test),
                SplitName::All => ("all", (0..archive.len()).collect()),
            };
            let r = evaluate(&net, &archive, &indices, batch_size)?;
            let per_class: Vec<_> = Emotion::ALL
                .iter()
                .zip(r.per_class_accuracy())
                .map(|(e, a)| json!({ "label": e.as_str(), "accuracy": a }))
                .collect();
            emit(
                &json!({ "arch": net.arch(), "split": name, "seed": seed, "evaluation": r, "per_class": per_class }),
                report_path,
            )
        }
        Command::Bench {
            model,
            arch,
            runs,
            warmup,
        } => {
            let net: Network = match (&model, arch) {
                (Some(p), _) => load_checkpoint(p)?,
                (None, Some(a)) => build_network(a, &mut Rng::new(seed)),
                (None, None) => bail!("either --model or --arch is required"),
            };
            let report = bench_inference(&net, runs, warmup)?;
            let default_path = match &model {
                Some(p) => p.with_extension("bench.json"),
                None => PathBuf::from(format!("bench_{}.json", net.arch())),
            };
            let path = report_path.map(Path::to_path_buf).unwrap_or(default_path);
            let summary = json!({
                "arch": report.arch,
                "runs": report.runs,
                "warmup": report.warmup,
                "mean_ms": report.mean_ms,
                "median_ms": report.median_ms,
                "p95_ms": report.p95_ms,
                "p99_ms": report.p99_ms,
                "hardware": report.hardware,
                "report": path,
            });
            fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            emit(&summary, None)
        }
        Command::Stream {
            model,
            frames_dir,
            synthetic,
            label,
            face,
            width,
            fps,
        } => {
            let net = load_checkpoint(&model)?;
            let (frames, face) = match frames_dir {
                Some(dir) => (list_frames(&dir)?, face),
                None => {
                    let e: Emotion = label.parse().map_err(anyhow::Error::msg)?;
                    let (w, h) = (96, 80);
                    (synthetic_clip(e, synthetic, w, h, 0.03, seed), Some(face.unwrap_or(center_box(w, h))))
                }
            };
            let window = WindowSpec::new(width, 1, 0)?;
            let report = stream_simulate(frames, &net, window, face, Some(fps), |_| {})?;
            let predicted: Vec<&str> = report
                .predictions
                .iter()
                .map(|&p| Emotion::from_index(p).map_or("?", Emotion::as_str))
                .collect();
            let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            emit(
                &json!({
                    "arch": report.arch,
                    "frames": report.frames,
                    "predictions": report.predictions.len(),
                    "mean_preprocess_ms": mean(&report.preprocess_ms),
                    "mean_inference_ms": mean(&report.inference_ms),
                    "mean_latency_ms": mean(&report.latency_ms),
                    "fps": report.fps,
                    "frames_over_budget": report.frames_over_budget,
                    "predicted_labels": predicted,
                    "report": report,
                }),
                report_path,
            )
        }
        Command::GradCheck { instances, tolerance } => {
            let mut rows = Vec::new();
            let mut failures = 0;
            for kind in LayerKind::ALL {
                let mut worst: f64 = 0.0;
                for i in 0..instances {
                    let c = check_random_layer(kind, seed.wrapping_add(i))?;
                    worst = worst.max(c.report.max_rel_error);
                }
                if worst >= tolerance {
                    failures += 1;
                }
                rows.push(json!({ "layer": kind, "instances": instances, "max_rel_error": worst, "pass": worst < tolerance }));
            }
            emit(&json!({ "seed": seed, "tolerance": tolerance, "layers": rows }), report_path)?;
            if failures > 0 {
                bail!("{failures} layer types exceed relative error {tolerance}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    log::debug!("{DETERMINISTIC_ENV} deterministic mode: {}", deterministic_mode());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
