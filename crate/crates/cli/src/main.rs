use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use polyfuse_cli::bench::{benchmark, parse_resolution};
use polyfuse_cli::config::{DepthFill, PipelineConfig};
use polyfuse_cli::dataset::{write_dataset, Preset};
use polyfuse_cli::pipeline::{run_pipeline, unwrap_file};
use polyfuse_cli::{CliError, CliResult};
use polyfuse_core::{DemosaicMode, Interpolation, SceneSpec};

#[derive(Parser)]
#[command(name = "polyfuse", version, about = "Stereo depth, polarization and panoramic fusion pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemosaicArg {
    Superpixel,
    Bilinear,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Nearest,
    Bilinear,
}

impl From<DemosaicArg> for DemosaicMode {
    fn from(a: DemosaicArg) -> Self {
        match a {
            DemosaicArg::Superpixel => DemosaicMode::Superpixel,
            DemosaicArg::Bilinear => DemosaicMode::Bilinear,
        }
    }
}

impl From<InterpArg> for Interpolation {
    fn from(a: InterpArg) -> Self {
        match a {
            InterpArg::Nearest => Interpolation::Nearest,
            InterpArg::Bilinear => Interpolation::Bilinear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the enabled stages on every frame in a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Water-hazard DoLP threshold.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_enum)]
        demosaic: Option<DemosaicArg>,
        /// DoLP lookup used by fusion.
        #[arg(long, value_enum)]
        lookup: Option<InterpArg>,
        /// Fill invalid depth before fusion, e.g. `median:5`.
        #[arg(long)]
        fill_depth: Option<DepthFill>,
        /// Frames processed concurrently; defaults to the core count.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Time the pipeline on in-memory synthetic frames.
    Bench {
        #[arg(long, default_value = "320x240")]
        resolution: String,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        /// Take stage toggles and parameters from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Render a synthetic scene into a ready-to-run dataset.
    Synth {
        /// Scene description JSON.
        #[arg(long, conflicts_with = "preset")]
        scene: Option<PathBuf>,
        /// Built-in scene: `street` or `fronto`.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value = "640x480")]
        resolution: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unwrap one annular image to a panorama.
    Unwrap {
        #[arg(long)]
        calib: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, value_enum, default_value = "bilinear")]
        interp: InterpArg,
    },
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run {
            config,
            delta,
            demosaic,
            lookup,
            fill_depth,
            jobs,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(d) = delta {
                cfg.params.delta = d;
            }
            if let Some(m) = demosaic {
                cfg.params.demosaic = m.into();
            }
            if let Some(l) = lookup {
                cfg.params.lookup = l.into();
            }
            if fill_depth.is_some() {
                cfg.params.fill_depth = fill_depth;
            }
            if jobs == Some(0) {
                return Err(CliError::config("--jobs must be at least 1"));
            }
            let reports = run_pipeline(&cfg, jobs)?;
            info!("processed {} frame(s) into {}", reports.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::Bench {
            resolution,
            frames,
            config,
            json,
        } => {
            let (w, h) = parse_resolution(&resolution)?;
            let (params, stages) = match config {
                Some(p) => {
                    let cfg = PipelineConfig::load(&p)?;
                    (Some(cfg.params), cfg.stages)
                }
                None => (None, Default::default()),
            };
            let report = benchmark(params, stages, frames, w, h)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                println!("resolution {}x{}, {} frames", report.width, report.height, report.frames);
                for s in &report.stages {
                    println!(
                        "  {:<8} mean {:>8.2} ms  median {:>8.2} ms  p95 {:>8.2} ms",
                        s.name, s.stats.mean_ms, s.stats.median_ms, s.stats.p95_ms
                    );
                }
                let e = &report.end_to_end;
                println!(
                    "  {:<8} mean {:>8.2} ms  median {:>8.2} ms  p95 {:>8.2} ms",
                    "total", e.mean_ms, e.median_ms, e.p95_ms
                );
                println!("fps {:.2}", report.fps);
            }
            Ok(())
        }
        Command::Synth {
            scene,
            preset,
            resolution,
            seed,
            out,
        } => {
            let spec = match (scene, preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    serde_json::from_str::<SceneSpec>(&text)
                        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
                }
                (None, preset) => {
                    let (w, h) = parse_resolution(&resolution)?;
                    preset.unwrap_or(Preset::Street).scene(w, h, seed)
                }
            };
            let ds = write_dataset(&spec, &out)?;
            info!("wrote dataset to {}; run it with --config {}", ds.dir.display(), ds.config.display());
            Ok(())
        }
        Command::Unwrap {
            calib,
            input,
            out,
            width,
            interp,
        } => {
            let (w, h) = unwrap_file(&calib, &input, &out, width, interp.into())?;
            info!("wrote {w}x{h} panorama to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLYFUSE_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyfuse: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
