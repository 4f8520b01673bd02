mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Active stereo simulation and next-best-view planning for reflective parts.
#[derive(Parser, Debug)]
#[command(name = "specula", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recover a camera response curve from an exposure stack manifest.
    CalibrateResponse {
        /// TOML with `[[exposure]]` entries (`image`, `time_ms`).
        manifest: PathBuf,
        /// Output curve (256 lines of `z g`).
        #[arg(short, long, default_value = "response.txt")]
        out: PathBuf,
        /// Smoothness weight.
        #[arg(long, default_value_t = 100.0)]
        lambda: f64,
        /// Pixels sampled from the stack.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Fit Phong parameters from a white-pattern capture with known geometry.
    CalibrateMaterial {
        /// TOML naming image, exposure, depth, normals, mask, response and rig.
        manifest: PathBuf,
        /// Write the fitted material here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Render one active stereo capture of a configured scene.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Candidate viewpoint id; the reference view when omitted.
        #[arg(long)]
        view: Option<usize>,
        /// Dropout seed (overrides `sensing.seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "capture")]
        out: PathBuf,
    },
    /// Score every candidate viewpoint after the reference capture.
    Plan {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every policy for every seed and write results.
    Run {
        /// Experiment config (TOML).
        #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Re-run exactly what a previous manifest.json describes.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Depth completion and pose accuracy from saved maps.
    Eval(EvalArgs),
    /// Write a built-in scene as an experiment config plus its mesh.
    GenScene {
        /// One of plate, sphere, bent-plate.
        scene: String,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        /// Number of seeds in the generated config (0..N).
        #[arg(long)]
        seeds: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Experiment config (TOML).
    config: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth depth PNG (16-bit, mm).
    #[arg(long)]
    gt: PathBuf,
    /// Depth before completion.
    #[arg(long)]
    before: PathBuf,
    /// Depth after completion.
    #[arg(long)]
    after: PathBuf,
    /// Object mask PNG (nonzero = object); ground-truth coverage when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// TOML with `[[object]]` entries (`id`, `mesh`, `gt`, `estimate`, optional `mask`).
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Depth error under which a pixel counts as recovered.
    #[arg(long, default_value_t = specula::metrics::COMPLETION_TOLERANCE_MM)]
    tolerance_mm: f64,
    /// CSV destination; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| e.downcast_ref::<specula::Error>().is_some_and(specula::Error::is_validation))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
