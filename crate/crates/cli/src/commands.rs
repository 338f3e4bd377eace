//! The pipeline commands. Every command is a function of its inputs, so
//! re-running with the same config and seed rewrites identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tvinr_core::encoding::{encoding_stats, EncoderConfig};
use tvinr_core::feature::{build_coreset, Coreset};
use tvinr_core::inr::{
    dataset_fingerprint, init_model, load_checkpoint, save_checkpoint, train, volume_psnr, CheckpointMeta, EpochRecord,
    InrModel, TrainConfig,
};
use tvinr_core::render::{render, ArmConfig, Camera, InrField, TransferFunction};
use tvinr_core::volume::{KeyFrameSet, Volume4D};

use crate::config::{
    EncoderKind, EncoderSpec, JobConfig, Manifest, CHECKPOINT_FILE, CORESET_FILE, LOSS_FILE, MANIFEST_FILE,
};
use crate::error::{io_error, write, CliError, Result};
use crate::scene::{RenderRequest, Scene, DEFAULT_MAX_PIXELS};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write(path, text)
}

pub fn occupancy_file(k: usize) -> String {
    format!("occupancy_{k:03}.occ")
}

/// Feature extraction: writes the coreset, one occupancy grid per key frame
/// and the manifest into the output directory.
pub fn extract(cfg: &JobConfig) -> Result<Manifest> {
    let vol = cfg.load_dataset()?;
    let keys = cfg.key_frames(&vol)?;
    let sel = build_coreset(&vol, &keys, &cfg.feature)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;

    let coreset_path = dir.join(CORESET_FILE);
    let mut w = create(&coreset_path)?;
    sel.coreset.write_to(&mut w)?;
    w.flush().map_err(|e| io_error(&coreset_path, e))?;

    let mut occupancy_files = Vec::new();
    for (k, grid) in sel.occupancy.iter().enumerate() {
        let name = occupancy_file(k);
        let path = dir.join(&name);
        let mut w = create(&path)?;
        grid.write_to(&mut w)?;
        w.flush().map_err(|e| io_error(&path, e))?;
        occupancy_files.push(name);
    }

    let manifest = Manifest {
        version: Manifest::VERSION,
        dataset_hash: dataset_fingerprint(&vol),
        dims: vol.dims(),
        num_frames: vol.num_frames(),
        key_frames: keys.indices().to_vec(),
        key_times: keys.times(),
        feature: cfg.feature.clone(),
        fbb: sel.fbb.clone(),
        coreset_file: CORESET_FILE.into(),
        coreset_samples: sel.coreset.len(),
        occupancy_files,
        deterministic: cfg.deterministic,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_coreset(path: &Path) -> Result<Coreset> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    Ok(Coreset::read_from(BufReader::new(file))?)
}

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub epochs_run: usize,
    pub total_epochs: usize,
    pub final_loss: Option<f64>,
    pub final_psnr: Option<f64>,
}

/// Fits the model to the extracted coreset. With `resume` and an existing
/// checkpoint, training continues from its epoch counter up to
/// `train.max_epochs` epochs in total (optimizer moments restart).
pub fn train_model(cfg: &JobConfig, resume: bool, mut log: impl FnMut(&EpochRecord)) -> Result<TrainSummary> {
    let dir = &cfg.output_dir;
    let manifest = Manifest::load(dir)?;
    let coreset = read_coreset(&dir.join(&manifest.coreset_file))?;
    let keys = KeyFrameSet::new(manifest.key_frames.clone(), manifest.num_frames)?;
    let ckpt_path = dir.join(CHECKPOINT_FILE);

    let (mut model, mut meta) = if resume && ckpt_path.exists() {
        let ckpt = load_checkpoint::<f32>(&ckpt_path)?;
        if ckpt.meta.dataset_hash != manifest.dataset_hash {
            return Err(CliError::config("checkpoint was trained on a different dataset than the manifest describes"));
        }
        (ckpt.model, ckpt.meta)
    } else {
        let enc = cfg.encoder.build(&manifest.fbb, manifest.key_times.clone())?;
        let model = init_model::<f32>(enc, &cfg.mlp, cfg.train.seed)?;
        let meta = CheckpointMeta {
            dataset_hash: manifest.dataset_hash.clone(),
            dims: manifest.dims,
            num_frames: manifest.num_frames,
            fbb: Some(manifest.fbb.clone()),
            key_frames: manifest.key_frames.clone(),
            key_times: manifest.key_times.clone(),
            occupancy_files: manifest.occupancy_files.clone(),
            seed: cfg.train.seed,
            mlp: cfg.mlp.clone(),
            ..Default::default()
        };
        (model, meta)
    };

    let volume = if cfg.evaluate_psnr { Some(cfg.load_dataset()?) } else { None };
    let remaining = cfg.train.max_epochs.saturating_sub(meta.epoch);
    let tc = TrainConfig { max_epochs: remaining, start_epoch: meta.epoch, seed: meta.seed, ..cfg.train.clone() };
    let fbb = manifest.fbb.clone();
    let mut observer = |r: &mut EpochRecord, m: &InrModel<f32>| {
        if let Some(vol) = &volume {
            r.psnr = volume_psnr(m, vol, &keys, &fbb).ok();
        }
        log(r);
        ControlFlow::Continue(())
    };
    let report = train(&mut model, &coreset, &tc, &mut observer)?;
    for r in &report.records {
        meta.loss_history.push(r.loss);
        meta.psnr_history.push(r.psnr);
    }
    meta.epoch += report.records.len();
    save_checkpoint(&model, &meta, &ckpt_path)?;
    write_loss_csv(&dir.join(LOSS_FILE), &meta)?;
    Ok(TrainSummary {
        checkpoint: ckpt_path,
        epochs_run: report.records.len(),
        total_epochs: meta.epoch,
        final_loss: meta.loss_history.last().copied(),
        final_psnr: meta.psnr_history.last().copied().flatten(),
    })
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
    psnr: Option<f64>,
}

/// The complete loss history of a checkpoint as `epoch,loss,psnr`.
pub fn write_loss_csv(path: &Path, meta: &CheckpointMeta) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (epoch, (&loss, &psnr)) in meta.loss_history.iter().zip(&meta.psnr_history).enumerate() {
        w.serialize(LossRow { epoch, loss, psnr })?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Parses `a:b:step` into the inclusive list of times `a, a+step, ...`.
pub fn parse_times(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::argument(format!("--times {spec:?} must be a:b:step")))?;
    let [a, b, step] = nums[..] else {
        return Err(CliError::argument(format!("--times {spec:?} must be a:b:step")));
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(CliError::argument(format!("--times {spec:?} needs a <= b and a positive step")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(CliError::argument(format!("--times {spec:?} expands to {n} frames")));
    }
    Ok((0..n).map(|i| a + step * i as f64).collect())
}

/// File names of a sweep: `stem_000.png`, `stem_001.png`, ... next to `out`,
/// with at least three digits.
pub fn sweep_paths(out: &Path, count: usize) -> Vec<PathBuf> {
    let width = count.saturating_sub(1).to_string().len().max(3);
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "frame".into());
    let ext = out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "png".into());
    (0..count).map(|i| out.with_file_name(format!("{stem}_{i:0width$}.{ext}"))).collect()
}

pub struct RenderJob {
    pub checkpoint: PathBuf,
    pub request: RenderRequest,
    /// Sweep of times; overrides `request.t` when present.
    pub times: Option<Vec<f64>>,
    pub out: PathBuf,
    pub extrapolate: bool,
    /// Also write a full-precision `.rgba32f` dump next to each PNG.
    pub raw: bool,
}

/// Renders one frame or a time sweep and returns the written PNG paths.
pub fn render_images(job: &RenderJob) -> Result<Vec<PathBuf>> {
    let scene = Scene::load(&job.checkpoint)?;
    let frames: Vec<(f64, PathBuf)> = match &job.times {
        None => vec![(job.request.t, job.out.clone())],
        Some(ts) => ts.iter().copied().zip(sweep_paths(&job.out, ts.len())).collect(),
    };
    for (t, _) in &frames {
        let req = RenderRequest { t: *t, ..job.request.clone() };
        scene.check(&req, DEFAULT_MAX_PIXELS, job.extrapolate)?;
    }
    if let Some(parent) = job.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut written = Vec::new();
    for (t, path) in frames {
        let req = RenderRequest { t, ..job.request.clone() };
        let out = scene.render(&req)?;
        write(&path, out.image.encode_png()?)?;
        if job.raw {
            let raw_path = path.with_extension("rgba32f");
            let mut w = create(&raw_path)?;
            out.image.write_raw(&mut w)?;
            w.flush().map_err(|e| io_error(&raw_path, e))?;
        }
        written.push(path);
    }
    Ok(written)
}

/// Options of the comparison benchmark.
#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub seeds: Vec<u64>,
    pub kinds: Vec<EncoderKind>,
    /// Timed repeats of each render mode.
    pub render_repeats: usize,
    pub render_size: u32,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seeds: vec![0],
            kinds: vec![EncoderKind::Fhash, EncoderKind::DenseSingle, EncoderKind::DenseMulti, EncoderKind::Mhe],
            render_repeats: 5,
            render_size: 128,
        }
    }
}

pub fn kind_name(kind: EncoderKind) -> &'static str {
    match kind {
        EncoderKind::Fhash => "fhash",
        EncoderKind::DenseSingle => "dense_single",
        EncoderKind::DenseMulti => "dense_multi",
        EncoderKind::Mhe => "mhe",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EncoderRow {
    pub method: &'static str,
    pub param_count: usize,
    pub collision_count: usize,
    pub bucket_utilization: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub method: &'static str,
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    pub psnr: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RenderRow {
    pub repeat: usize,
    pub fixed_ms: f64,
    pub arm_ms: f64,
    pub fixed_inference_calls: usize,
    pub arm_inference_calls: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub encoders: Vec<EncoderRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub render: Vec<RenderRow>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Convergence race of F-Hash against parameter-matched baselines on the
/// configured dataset, plus encoder statistics and render timings with and
/// without adaptive pacing. Writes `bench_*.csv` into the output directory.
pub fn bench(cfg: &JobConfig, opts: &BenchOptions, mut log: impl FnMut(&str)) -> Result<BenchReport> {
    let vol: Volume4D = cfg.load_dataset()?;
    let keys = cfg.key_frames(&vol)?;
    let sel = build_coreset(&vol, &keys, &cfg.feature)?;
    let mut report = BenchReport::default();
    let mut fhash_model = None;

    for &kind in &opts.kinds {
        let spec = EncoderSpec { kind, ..cfg.encoder.clone() };
        let enc: EncoderConfig = spec.build(&sel.fbb, keys.times())?;
        let stats = encoding_stats(&enc);
        report.encoders.push(EncoderRow {
            method: kind_name(kind),
            param_count: stats.param_count,
            collision_count: stats.collision_count,
            bucket_utilization: stats.bucket_utilization,
        });
        for &seed in &opts.seeds {
            let mut model = init_model::<f32>(enc.clone(), &cfg.mlp, seed)?;
            let tc = TrainConfig { seed, ..cfg.train.clone() };
            let start = Instant::now();
            let mut rows = Vec::new();
            let mut observer = |r: &mut EpochRecord, m: &InrModel<f32>| {
                let p = volume_psnr(m, &vol, &keys, &sel.fbb).unwrap_or(f64::NAN);
                r.psnr = Some(p);
                rows.push(ConvergenceRow {
                    method: kind_name(kind),
                    seed,
                    epoch: r.epoch,
                    loss: r.loss,
                    psnr: p,
                    seconds: start.elapsed().as_secs_f64(),
                });
                ControlFlow::Continue(())
            };
            train(&mut model, &sel.coreset, &tc, &mut observer)?;
            if let Some(last) = rows.last() {
                log(&format!("{} seed {seed}: {} epochs, final PSNR {:.2} dB", kind_name(kind), rows.len(), last.psnr));
            }
            report.convergence.extend(rows);
            if kind == EncoderKind::Fhash && fhash_model.is_none() {
                fhash_model = Some(model);
            }
        }
    }

    if let Some(model) = &fhash_model {
        let field = InrField { model, fbb: &sel.fbb };
        let cam = Camera::front(4.0, opts.render_size, opts.render_size);
        let tf = TransferFunction::hot();
        let t = keys.time(0);
        let occ = &sel.occupancy[0];
        for repeat in 0..opts.render_repeats {
            let s = Instant::now();
            let fixed = render(&field, t, &cam, &tf, &ArmConfig::fixed_pace(), Some(occ), [0.0, 0.0, 0.0, 1.0])?;
            let fixed_ms = s.elapsed().as_secs_f64() * 1e3;
            let s = Instant::now();
            let arm = render(&field, t, &cam, &tf, &ArmConfig::default(), Some(occ), [0.0, 0.0, 0.0, 1.0])?;
            let arm_ms = s.elapsed().as_secs_f64() * 1e3;
            report.render.push(RenderRow {
                repeat,
                fixed_ms,
                arm_ms,
                fixed_inference_calls: fixed.stats.inference_calls,
                arm_inference_calls: arm.stats.inference_calls,
            });
        }
    }

    create_dir(&cfg.output_dir)?;
    write_csv(&cfg.output_dir.join("bench_encoders.csv"), &report.encoders)?;
    write_csv(&cfg.output_dir.join("bench_convergence.csv"), &report.convergence)?;
    write_csv(&cfg.output_dir.join("bench_render.csv"), &report.render)?;
    Ok(report)
}
