#![allow(dead_code)]

use std::path::Path;

use serde_json::{json, Value};
use tvinr_cli::commands::{extract, train_model};
use tvinr_cli::config::{from_value_with_path, JobConfig, CHECKPOINT_FILE};
use tvinr_cli::scene::Scene;

/// A small synthetic job writing into `out`.
pub fn job_json(out: &Path, epochs: usize) -> Value {
    json!({
        "dataset": {"kind": "synthetic", "dims": [12, 12, 12], "frames": 5,
                    "trajectory": {"from": [-0.4, -0.3, -0.2], "to": [0.4, 0.3, 0.2], "sigma": 0.2}},
        "feature": {"kind": "interval", "lo": 0.001, "hi": 1.0},
        "key_frames": {"indices": [0, 2, 4]},
        "mlp": {"hidden_layers": 1, "neurons": 16},
        "train": {"batch_size": 256, "max_epochs": epochs, "seed": 3},
        "output_dir": out,
    })
}

pub fn write_job(dir: &Path, epochs: usize) -> std::path::PathBuf {
    let path = dir.join("job.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&job_json(&dir.join("out"), epochs)).unwrap()).unwrap();
    path
}

/// Extracts and trains the small job in-process and loads the result.
pub fn trained_scene(dir: &Path) -> Scene {
    let cfg: JobConfig = from_value_with_path(job_json(&dir.join("out"), 2), "test job").unwrap();
    extract(&cfg).unwrap();
    train_model(&cfg, false, |_| {}).unwrap();
    Scene::load(&dir.join("out").join(CHECKPOINT_FILE)).unwrap()
}
