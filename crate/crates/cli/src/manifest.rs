use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use scanmask::{OptimConfig, ReconKind, ReconParams};
use serde::{Deserialize, Serialize};

use crate::failure;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub optim: OptimConfig,
    pub recon_kind: ReconKind,
    pub grid: Vec<ReconParams>,
    pub vdrs_seed: u64,
    pub density_power: f64,
    pub crop: Option<f64>,
    pub normalize_features: bool,
    pub population: bool,
    pub data_dir: String,
    pub data_seed: u64,
    pub train_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub timings: Vec<StageTiming>,
    /// Artifact name to path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(run: &Path) -> Result<Self> {
        let path = run.join(RUN_MANIFEST);
        if !path.is_file() {
            return Err(failure::data(format!("{} is not a training run (no {RUN_MANIFEST})", run.display())));
        }
        crate::io::read_json(&path)
    }

    /// Every listed artifact exists below `run`.
    pub fn missing_artifacts(&self, run: &Path) -> Vec<String> {
        self.artifacts.values().filter(|p| !run.join(p).exists()).cloned().collect()
    }
}

/// Wall-clock stopwatch for named stages.
pub struct Timer {
    start: Instant,
    pub timings: Vec<StageTiming>,
}

impl Timer {
    pub fn new() -> Self {
        Self { start: Instant::now(), timings: Vec::new() }
    }

    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let seconds = (now - self.start).as_secs_f64();
        eprintln!("{stage}: {seconds:.2} s");
        self.timings.push(StageTiming { stage: stage.into(), seconds });
        self.start = now;
    }
}
