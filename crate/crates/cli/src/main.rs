use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dorsalkit::pipeline::fixture::{write_fixture, FixtureConfig};
use dorsalkit::pipeline::{run_clicks, run_delta, ClickInputs, Overrides, Pipeline, RunOutcome};
use dorsalkit::stats::{ClickConfig, TieBreak, CLICK_THRESHOLD};

const EXIT_PARTIAL: u8 = 1;
const EXIT_FATAL: u8 = 2;

#[derive(Parser)]
#[command(name = "dorsalkit", version, about = "Hand occlusion audits, pose fitting and evaluation reports")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Report directory; defaults to the manifest's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for per-frame work.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Square Z-buffer resolution in pixels.
    #[arg(long)]
    raster: Option<usize>,
    /// Scaled finger visibility at or below which a finger is fully occluded.
    #[arg(long = "occl-threshold")]
    occluded_threshold: Option<f64>,
    /// Scaled finger visibility above which a finger is fully visible.
    #[arg(long = "visible-threshold")]
    visible_threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Positive,
    Negative,
}

#[derive(Subcommand)]
enum Command {
    /// Per-frame per-part visibility and dataset occlusion statistics.
    Audit(RunArgs),
    /// Fit hand states to keypoints or markers.
    Fit(RunArgs),
    /// Join predictions with ground truth and report errors.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Predictions JSON-lines; defaults to the manifest's `predictions`.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Reference-to-frame homographies and dorsal crops.
    Align {
        #[command(flatten)]
        run: RunArgs,
        /// Reference frame id; the first frame by default.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Feature delta, fused tensor and similarity map of two FGRID files.
    Delta {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label clicks in a force trace and score frame predictions against them.
    Clicks {
        /// CSV with timestamp_s and reading columns.
        #[arg(long)]
        trace: PathBuf,
        /// CSV with a 0/1 prediction column, one row per trace sample.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CLICK_THRESHOLD)]
        threshold: f64,
        /// Shortest above-threshold run that counts as a click.
        #[arg(long, default_value_t = 1)]
        min_len: usize,
        /// Per-click vote when predictions split evenly.
        #[arg(long, value_enum, default_value = "positive")]
        tie: Tie,
    },
    /// Write a synthetic dataset with a manifest.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frames that also get a rendered image.
        #[arg(long, default_value_t = 2)]
        images: usize,
    },
}

fn load(args: &RunArgs, predictions: Option<PathBuf>) -> anyhow::Result<Pipeline> {
    let overrides = Overrides {
        output: args.out.clone(),
        seed: args.seed,
        raster: args.raster,
        occluded_threshold: args.occluded_threshold,
        visible_threshold: args.visible_threshold,
        predictions,
    };
    let p = Pipeline::load(&args.manifest, &overrides)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    Ok(p.with_workers(args.workers))
}

fn run(cmd: Command) -> anyhow::Result<(String, RunOutcome, PathBuf)> {
    Ok(match cmd {
        Command::Audit(a) => {
            let p = load(&a, None)?;
            ("audit".into(), p.run_audit()?, p.output.clone())
        }
        Command::Fit(a) => {
            let p = load(&a, None)?;
            ("fit".into(), p.run_fit()?, p.output.clone())
        }
        Command::Eval { run, predictions } => {
            let p = load(&run, predictions)?;
            ("eval".into(), p.run_eval()?, p.output.clone())
        }
        Command::Align { run, reference } => {
            let p = load(&run, None)?;
            ("align".into(), p.run_align(reference.as_deref())?, p.output.clone())
        }
        Command::Delta { reference, target, out } => ("delta".into(), run_delta(&reference, &target, &out)?, out),
        Command::Clicks {
            trace,
            predictions,
            out,
            threshold,
            min_len,
            tie,
        } => {
            let inputs = ClickInputs {
                trace,
                predictions,
                config: ClickConfig { threshold, min_len },
                tie: match tie {
                    Tie::Positive => TieBreak::Positive,
                    Tie::Negative => TieBreak::Negative,
                },
            };
            ("clicks".into(), run_clicks(&inputs, &out)?, out)
        }
        Command::Fixture {
            out,
            frames,
            subjects,
            seed,
            images,
        } => {
            let cfg = FixtureConfig {
                frames,
                subjects,
                seed,
                images,
                ..FixtureConfig::default()
            };
            let truth = write_fixture(&out, &cfg)?;
            let outcome = RunOutcome {
                frames_ok: truth.frames,
                frames_failed: 0,
                files: Vec::new(),
            };
            ("fixture".into(), outcome, out)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok((name, outcome, dir)) => {
            println!(
                "{name}: {} ok, {} failed -> {}",
                outcome.frames_ok,
                outcome.frames_failed,
                dir.display()
            );
            if outcome.partial() {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
