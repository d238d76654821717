#![allow(dead_code)]

use std::path::PathBuf;

use calm::config::FleetConfig;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn load(name: &str) -> FleetConfig {
    FleetConfig::load(&configs_dir().join(name)).unwrap()
}

pub fn grid(name: &str) -> calm::experiment::Grid {
    let text = std::fs::read_to_string(configs_dir().join("grids").join(name)).unwrap();
    calm::experiment::Grid::from_json(&text).unwrap()
}

pub const CONFIGS: [&str; 4] = ["reference.json", "bursty.json", "baseline-llm.json", "inter-domain.json"];
