// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvinr_cli::commands::{self, BenchOptions, RenderJob};
use tvinr_cli::config::{JobConfig, Overrides, CHECKPOINT_FILE};
use tvinr_cli::error::{read, CliError, Result};
use tvinr_cli::scene::{CameraSpec, RenderRequest, Scene, TfChoice};
use tvinr_cli::service::{self, parse_request, Limits};

/// Feature-restricted hash-encoded INRs for time-varying volumes.
#[derive(Parser)]
#[command(name = "tvinr", version)]
struct Cli {
    /// Override the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Record the run as deterministic in the manifest.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobArgs {
    /// JSON job configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.max_epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the feature coreset, occupancy grids and manifest.
    Extract(JobArgs),
    /// Train the INR on the extracted coreset.
    Train {
        #[command(flatten)]
        job: JobArgs,
        /// Continue from the existing checkpoint up to `train.max_epochs` in total.
        #[arg(long)]
        resume: bool,
    },
    /// Render a frame or a time sweep from a checkpoint.
    Render(RenderArgs),
    /// Race F-Hash against parameter-matched baselines and time the renderer.
    Bench {
        #[command(flatten)]
        job: JobArgs,
        /// Seeds to train each method with.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        render_repeats: usize,
    },
    /// Serve the render API for the viewer.
    Serve {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = tvinr_cli::scene::DEFAULT_MAX_PIXELS)]
        max_pixels: u64,
        /// Accept times outside the key range (clamped to the nearest key).
        #[arg(long)]
        extrapolate: bool,
    },
}

#[derive(Args)]
struct RenderArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// JSON render request; flags below are ignored when given.
    #[arg(long)]
    request: Option<PathBuf>,
    /// Normalized time.
    #[arg(long, short, default_value_t = 0.0, allow_negative_numbers = true)]
    t: f64,
    /// Sweep `start:end:step` (inclusive); writes `<stem>_000.png`, ...
    #[arg(long, allow_hyphen_values = true)]
    times: Option<String>,
    /// Transfer function id.
    #[arg(long, default_value = "hot")]
    tf: String,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, num_args = 3, value_delimiter = ',', allow_negative_numbers = true)]
    eye: Option<Vec<f64>>,
    #[arg(long, short, default_value = "render.png")]
    out: PathBuf,
    /// Accept times outside the key range (clamped to the nearest key).
    #[arg(long)]
    extrapolate: bool,
    /// Also write a raw RGBA `f32` dump next to each image.
    #[arg(long)]
    raw: bool,
}

fn load_job(job: &JobArgs, cli: &Cli) -> Result<JobConfig> {
    let overrides = Overrides { set: job.set.clone(), seed: cli.seed, deterministic: cli.deterministic };
    JobConfig::load(job.config.as_deref(), &overrides)
}

fn render_request(args: &RenderArgs) -> Result<RenderRequest> {
    if let Some(path) = &args.request {
        return parse_request(&read(path)?).map_err(|e| CliError { path: Some(path.clone()), ..e });
    }
    let mut camera = CameraSpec::default();
    if let Some(eye) = &args.eye {
        camera.eye = [eye[0], eye[1], eye[2]];
    }
    Ok(RenderRequest {
        camera,
        transfer_function: TfChoice::Id(args.tf.clone()),
        width: args.width,
        height: args.height,
        ..RenderRequest::at(args.t)
    })
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Extract(job) => {
            let cfg = load_job(job, cli)?;
            let m = commands::extract(&cfg)?;
            println!(
                "extracted {} samples from {} key frames into {}",
                m.coreset_samples,
                m.key_frames.len(),
                cfg.output_dir.display()
            );
        }
        Command::Train { job, resume } => {
            let cfg = load_job(job, cli)?;
            let summary = commands::train_model(&cfg, *resume, |r| match r.psnr {
                Some(p) => println!("epoch {} loss {:.6e} psnr {p:.3}", r.epoch, r.loss),
                None => println!("epoch {} loss {:.6e}", r.epoch, r.loss),
            })?;
            println!(
                "trained {} epochs ({} total); checkpoint {}",
                summary.epochs_run,
                summary.total_epochs,
                summary.checkpoint.display()
            );
        }
        Command::Render(args) => {
            let times = args.times.as_deref().map(commands::parse_times).transpose()?;
            let job = RenderJob {
                checkpoint: args.checkpoint.clone(),
                request: render_request(args)?,
                times,
                out: args.out.clone(),
                extrapolate: args.extrapolate,
                raw: args.raw,
            };
            for path in commands::render_images(&job)? {
                println!("{}", path.display());
            }
        }
        Command::Bench { job, seeds, render_repeats } => {
            let cfg = load_job(job, cli)?;
            let seeds = match cli.seed {
                Some(s) if seeds == &[0] => vec![s],
                _ => seeds.clone(),
            };
            let opts = BenchOptions { seeds, render_repeats: *render_repeats, ..BenchOptions::default() };
            let report = commands::bench(&cfg, &opts, |line| println!("{line}"))?;
            for e in &report.encoders {
                println!("{}: {} parameters, {} collisions", e.method, e.param_count, e.collision_count);
            }
            println!(
                "wrote bench_encoders.csv, bench_convergence.csv, bench_render.csv to {}",
                cfg.output_dir.display()
            );
        }
        Command::Serve { checkpoint, addr, max_pixels, extrapolate } => {
            let path = if checkpoint.is_dir() { checkpoint.join(CHECKPOINT_FILE) } else { checkpoint.clone() };
            let scene = Scene::load(&path)?;
            let limits = Limits { max_pixels: *max_pixels, extrapolate: *extrapolate, ..Limits::default() };
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(service::serve(scene, limits, addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
