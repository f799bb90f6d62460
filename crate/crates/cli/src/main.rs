//! `ringdepth` — scale-aware surround-view depth estimation on synthetic
//! camera rigs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ringdepth_core::harness::{
    evaluate, flops_estimate, load_depth_network, write_report, Dtype, EvalArtifacts, EvalMode,
    EvalReport, HarnessError, TrainConfig, TrainSession,
};
use ringdepth_core::scalar::Scalar;
use ringdepth_core::scene::{default_scene_with, SceneSpec};

#[derive(Parser)]
#[command(name = "ringdepth", version, about = "Self-supervised scale-aware depth for surround camera rigs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoundArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    #[value(name = "scale-aware")]
    ScaleAware,
    #[value(name = "median-scaled")]
    MedianScaled,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ScaleAware => EvalMode::ScaleAware,
            ModeArg::MedianScaled => EvalMode::MedianScaled,
        }
    }
}

#[derive(Args)]
struct CommonRunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config value, then $RINGDEPTH_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene description.
    GenScene {
        /// Output path of the scene JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value_t = 6)]
        cameras: usize,
        #[arg(long, default_value_t = 96)]
        height: usize,
        #[arg(long, default_value_t = 160)]
        width: usize,
        /// Omit the box primitives (smooth surfaces only).
        #[arg(long)]
        no_boxes: bool,
    },
    /// Run the progressive training pipeline.
    Train {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Which round(s) to run; round 2 resumes from round1.ckpt.
        #[arg(long, value_enum, default_value = "both")]
        round: RoundArg,
        /// Override the step count of each selected round.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint against exact ground truth.
    Eval {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Checkpoint to evaluate (default: <out>/final.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Metric mode printed to stdout; the report always carries both.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Render report files (metric tables, maps, loss curves).
    Report {
        /// Evaluation report JSON (default: <out>/eval_report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory with the evaluation map dumps.
        #[arg(long)]
        maps: Option<PathBuf>,
        /// Training log CSV to re-emit as loss curves.
        #[arg(long)]
        train_log: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic operation counts of the configured network.
    Flops {
        #[command(flatten)]
        common: CommonRunArgs,
    },
}

fn load_config(common: &CommonRunArgs) -> Result<TrainConfig, HarnessError> {
    let mut cfg = TrainConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn run_train<S: Scalar>(
    cfg: TrainConfig,
    round: RoundArg,
    steps: Option<u64>,
) -> Result<(), HarnessError> {
    let mut cfg = cfg;
    if let Some(n) = steps {
        match round {
            RoundArg::One => cfg.train.rounds[0].steps = n,
            RoundArg::Two => {
                if cfg.train.rounds.len() > 1 {
                    cfg.train.rounds[1].steps = n;
                }
            }
            RoundArg::Both => {
                for r in &mut cfg.train.rounds {
                    r.steps = n;
                }
            }
        }
    }
    if round == RoundArg::One {
        cfg.train.rounds.truncate(1);
    }
    let out_dir = cfg.resolve_out_dir();
    let mut session = match round {
        RoundArg::Two => {
            let ckpt = out_dir.join("round1.ckpt");
            if !ckpt.exists() {
                return Err(HarnessError::Config(format!(
                    "--round 2 needs {} from a round-1 run",
                    ckpt.display()
                )));
            }
            TrainSession::<S>::resume(cfg, &out_dir, &ckpt)?
        }
        _ => TrainSession::<S>::new(cfg, &out_dir)?,
    };
    let outcome = session.run_all()?;
    println!(
        "trained {} steps, final loss {:.6}, checkpoint {}",
        outcome.steps_run,
        outcome.final_loss,
        outcome.final_checkpoint.display()
    );
    Ok(())
}

fn run_eval<S: Scalar>(
    cfg: TrainConfig,
    checkpoint: Option<PathBuf>,
    mode: Option<ModeArg>,
) -> Result<(), HarnessError> {
    let mut cfg = cfg;
    if let Some(m) = mode {
        cfg.eval.mode = m.into();
    }
    let out_dir = cfg.resolve_out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let ckpt = checkpoint.unwrap_or_else(|| out_dir.join("final.ckpt"));
    let spec = SceneSpec::load(&cfg.scene)?;
    let depth_net = load_depth_network::<S>(&cfg, &spec, &ckpt)?;
    let artifacts = EvalArtifacts { dir: out_dir.join("eval_maps") };
    let report = evaluate(&depth_net, &spec, &cfg.eval, Some(&artifacts))?;
    report.save(&out_dir.join("eval_report.json"))?;
    let m = report.primary();
    println!(
        "mode {:?}: abs_rel {:.4}  sq_rel {:.4}  rmse {:.4}  rmse_log {:.4}  d1 {:.4}  d2 {:.4}  d3 {:.4}",
        report.mode,
        m.abs_rel,
        m.sq_rel,
        m.rmse,
        m.rmse_log,
        m.delta1,
        m.delta2,
        m.delta3
    );
    println!("median(pred)/median(gt) = {:.4}", report.median_pred_over_gt);
    println!("report: {}", out_dir.join("eval_report.json").display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::GenScene { out, seed, frames, cameras, height, width, no_boxes } => {
            if height % 32 != 0 || width % 32 != 0 {
                return Err(HarnessError::Config(format!(
                    "image size {height}x{width} must be divisible by 32"
                )));
            }
            if cameras < 2 {
                return Err(HarnessError::Config("need at least 2 cameras".into()));
            }
            let mut spec = default_scene_with(seed, cameras, height, width, !no_boxes);
            spec.n_frames = frames;
            spec.validate::<f64>()?;
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            spec.save(&out)?;
            println!("scene written to {}", out.display());
            Ok(())
        }
        Command::Train { common, round, steps } => {
            let cfg = load_config(&common)?;
            match cfg.dtype {
                Dtype::F64 => run_train::<f64>(cfg, round, steps),
                Dtype::F32 => run_train::<f32>(cfg, round, steps),
            }
        }
        Command::Eval { common, checkpoint, mode } => {
            let cfg = load_config(&common)?;
            match cfg.dtype {
                Dtype::F64 => run_eval::<f64>(cfg, checkpoint, mode),
                Dtype::F32 => run_eval::<f32>(cfg, checkpoint, mode),
            }
        }
        Command::Report { report, maps, train_log, out } => {
            let out_dir = out
                .or_else(|| std::env::var("RINGDEPTH_OUT").ok().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let report_path = report.unwrap_or_else(|| out_dir.join("eval_report.json"));
            let eval_report = EvalReport::load(&report_path)?;
            let maps_dir = maps.unwrap_or_else(|| out_dir.join("eval_maps"));
            let log = train_log.unwrap_or_else(|| out_dir.join("train_log.csv"));
            let files = write_report(
                &eval_report,
                maps_dir.exists().then_some(maps_dir.as_path()),
                Some(log.as_path()),
                &out_dir.join("report"),
            )?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Flops { common } => {
            let cfg = load_config(&common)?;
            let spec = SceneSpec::load(&cfg.scene)?;
            let [h, w] = spec.rig.image_size;
            let report = flops_estimate(&cfg, spec.rig.cameras.len(), h, w);
            print!("{}", report.to_text());
            let out_dir = cfg.resolve_out_dir();
            std::fs::create_dir_all(&out_dir)?;
            let json_path = out_dir.join("flops.json");
            std::fs::write(
                &json_path,
                serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Io(e.to_string()))?,
            )?;
            println!("written to {}", json_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
