use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use occlabel::pipeline::{
    cmd_autolabel, cmd_depth, cmd_eval, cmd_fov_mask, cmd_synth, parse_frame_range, DepthMode, PipelineConfig,
};
use occlabel::Result;

#[derive(Parser)]
#[command(
    name = "occlabel",
    version,
    about = "Semantic occupancy labels from lidar sequences, radar/camera depth preparation and occupancy evaluation"
)]
struct Cli {
    /// JSON pipeline configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate occupancy grids for the key frames of a scene.
    Autolabel {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inclusive frame-id range `a..b`.
        #[arg(long)]
        frames: Option<String>,
    },
    /// Compare predicted grids against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// FOVM file, or a directory of per-frame `.fovm` files.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce depth maps, depth bins, radar pseudo-depth or RGB-D images.
    Depth {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        frame: u64,
        /// lidar-gt | pseudo | rgbd | bins
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in synthetic scene.
    Synth {
        /// static-street | moving-box | crossing-pedestrian
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the camera field-of-view mask over the label grid.
    FovMask {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, threads: Option<usize>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref(), cli.threads)?;
    match cli.command {
        Command::Autolabel { manifest, out, frames } => {
            let range = frames.as_deref().map(parse_frame_range).transpose()?;
            let labeled = cmd_autolabel(&manifest, &cfg, &out, range.as_ref())?;
            info!("wrote {} grids to {}", labeled.len(), out.display());
        }
        Command::Eval { pred, gt, mask, out } => {
            let report = cmd_eval(&pred, &gt, mask.as_deref(), &cfg, out.as_deref())?;
            println!("{}", report.to_table());
        }
        Command::Depth { manifest, frame, mode, out } => {
            let mode: DepthMode = mode.parse()?;
            for p in cmd_depth(&manifest, frame, mode, &cfg, &out)? {
                info!("wrote {}", p.display());
            }
        }
        Command::Synth { scenario, seed, out } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = cmd_synth(&scenario, cfg.seed, &cfg, &out)?;
            info!("wrote scenario {} with {} frames to {}", m.name, m.frames.len(), out.display());
        }
        Command::FovMask { manifest, out } => {
            let mask = cmd_fov_mask(&manifest, &cfg, &out)?;
            info!("{} of {} voxels in view", mask.count(), mask.as_slice().len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
