#![allow(dead_code)]

pub mod oracles;

use lta::eval::Scenario;
use std::path::{Path, PathBuf};

pub fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn scenario(rel: &str) -> Scenario {
    Scenario::load(&scenario_dir().join(rel)).unwrap()
}

/// The ten experiment analogs, in file-name order.
pub fn suite() -> Vec<Scenario> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|f| Scenario::load(f).unwrap()).collect()
}
