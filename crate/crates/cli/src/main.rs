//! `gic`: filling, simulation, rendering, identification and evaluation
//! from a scene document.

mod commands;
mod scene;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gic_core::GicError;

const EXIT_INPUT: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "gic", version, about = "Gaussian-informed continuum toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill one frame into a density field, continuum points and GIC particles.
    Fill {
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scene's fill seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll out a material from the filled first frame.
    Simulate {
        scene: PathBuf,
        /// Material JSON; defaults to the scene's ground truth.
        #[arg(long)]
        params: Option<PathBuf>,
        /// GIC particle PLY to start from instead of filling frame 0.
        #[arg(long)]
        particles: Option<PathBuf>,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render color, mask and depth of a point set from one scene camera.
    Render {
        /// Gaussian or GIC particle PLY.
        points: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        camera_index: usize,
        /// Output prefix; `.ppm`, `.pgm` and `.pfm` are appended.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the physical parameters of the scene's material.
    Identify {
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-frame chamfer distance and EMD between two trajectory dumps.
    Eval {
        traj: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scene whose declared units select the report scale.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GIC_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| scene::input_error(format!("GIC_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(scene::input_error("GIC_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let diverged = err
        .chain()
        .filter_map(|e| e.downcast_ref::<GicError>())
        .any(GicError::is_divergence);
    if diverged {
        EXIT_DIVERGED
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Fill { scene, frame, out, seed } => commands::fill(&scene, frame, &out, seed),
        Command::Simulate {
            scene,
            params,
            particles,
            frames,
            out,
            seed,
        } => commands::simulate(&scene, params.as_deref(), particles.as_deref(), frames, &out, seed),
        Command::Render {
            points,
            scene,
            camera_index,
            out,
        } => commands::render(&points, &scene, camera_index, &out),
        Command::Identify { scene, seed, out } => commands::identify(&scene, seed, &out),
        Command::Eval {
            traj,
            reference,
            out,
            scene,
        } => commands::eval(&traj, &reference, out.as_deref(), scene.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
