#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyfuse_cli::config::PipelineConfig;
use polyfuse_cli::dataset::{write_dataset, Dataset, Preset};

pub const BIN: &str = env!("CARGO_BIN_EXE_polyfuse");

pub fn polyfuse(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("POLYFUSE_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn street(dir: &Path, width: usize, height: usize, seed: u64) -> Dataset {
    write_dataset(&Preset::Street.scene(width, height, seed), dir).expect("dataset renders")
}

pub fn load_config(path: &Path) -> PipelineConfig {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn save_config(cfg: &PipelineConfig, path: &Path) {
    std::fs::write(path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
}

pub fn run(config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    polyfuse(&args)
}

pub fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

pub fn frame_dir(ds: &Dataset) -> PathBuf {
    ds.dir.join("out").join("frame0")
}
