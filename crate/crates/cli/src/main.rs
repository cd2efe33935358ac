use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gaze3d_cli::commands;
use gaze3d_cli::config::{Overrides, PipelineConfig};
use gaze3d_cli::manifest::StudyManifest;

/// Reproject eye-tracking fixations onto 3D surfaces and analyse them.
#[derive(Debug, Parser)]
#[command(name = "gaze3d", version)]
struct Cli {
    /// Pipeline configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path or prefix; for `pipeline`, replaces the manifest's output
    /// directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to standard error.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render one coordinate map per animation frame.
    Rasterize {
        /// Triangle mesh (PLY).
        mesh: PathBuf,
    },
    /// Rebuild the visible surface of one frame from its coordinate map.
    Reconstruct {
        /// Coordinate-map sequence prefix.
        maps: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: u32,
        /// Write the decoded points instead of a triangulated mesh.
        #[arg(long)]
        points: bool,
    },
    /// Reproject a fixation log into a 3D fixation cloud.
    Project {
        /// Fixation log (CSV).
        fixations: PathBuf,
        /// Coordinate-map sequence prefix.
        maps: PathBuf,
    },
    /// Build the 3D saliency grid and a colored mesh from a fixation cloud.
    Saliency {
        /// Fixation cloud (PLY).
        cloud: PathBuf,
        /// Triangle mesh (PLY).
        mesh: PathBuf,
    },
    /// Compute the distribution and similarity report for a study manifest.
    Metrics {
        /// Study manifest (TOML).
        manifest: PathBuf,
    },
    /// Run every stage for a study manifest.
    Pipeline {
        /// Study manifest (TOML).
        manifest: PathBuf,
    },
}

fn effective_config(cli: &Cli, fallback: Option<&Path>) -> Result<PipelineConfig> {
    let mut config = match cli.config.as_deref().or(fallback) {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    config.apply(&cli.overrides);
    config.validate().context("invalid configuration after overrides")?;
    Ok(config)
}

fn required_out(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: &Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Rasterize { mesh } => {
            let config = effective_config(cli, None)?;
            commands::rasterize(mesh, &config, &required_out(cli, "maps/frame"), &mut out)?;
        }
        Command::Reconstruct { maps, frame, points } => {
            let config = effective_config(cli, None)?;
            commands::reconstruct(maps, *frame, *points, &config, &required_out(cli, "surface.ply"), &mut out)?;
        }
        Command::Project { fixations, maps } => {
            let config = effective_config(cli, None)?;
            commands::project(fixations, maps, &config, &required_out(cli, "fixations.cloud.ply"), &mut out)?;
        }
        Command::Saliency { cloud, mesh } => {
            let config = effective_config(cli, None)?;
            commands::saliency(cloud, mesh, &config, &required_out(cli, "saliency"), &mut out)?;
        }
        Command::Metrics { manifest } => {
            let m = StudyManifest::load(manifest)?;
            let config = effective_config(cli, m.config.as_deref())?;
            let target = cli.out.clone().unwrap_or_else(|| m.output.join("report.json"));
            commands::metrics(&m, &config, &target, &mut out)?;
        }
        Command::Pipeline { manifest } => {
            let mut m = StudyManifest::load(manifest)?;
            if let Some(dir) = &cli.out {
                m.output = dir.clone();
            }
            let config = effective_config(cli, m.config.as_deref())?;
            commands::pipeline(&m, &config, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<gaze3d::Error>())
        .map_or("cli", gaze3d::Error::kind)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "kind": error_kind(&err),
                "message": format!("{err:#}"),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
