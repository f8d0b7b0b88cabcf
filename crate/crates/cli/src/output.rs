//! Output directory handling and `meta.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use pmlmodes::experiments::LevelTimings;
use pmlmodes::{ExperimentConfig, LevelSolution};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    /// Path below the root; parent directories are created.
    pub fn file(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }
}

#[derive(Debug, Serialize)]
pub struct LevelMeta {
    pub hmax: f64,
    pub n_dofs: usize,
    pub n_eigenpairs: usize,
    pub n_propagating: usize,
    pub timings: LevelTimings,
}

pub fn level_meta(l: &LevelSolution) -> LevelMeta {
    LevelMeta {
        hmax: l.hmax,
        n_dofs: l.dofs.n_dofs,
        n_eigenpairs: l.pairs.len(),
        n_propagating: l.filtered.len(),
        timings: l.timings,
    }
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub command: String,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub threads: usize,
    pub seed: u64,
    pub levels: Vec<LevelMeta>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
    pub total_seconds: f64,
}

impl Meta {
    pub fn new(command: &str, cfg: &ExperimentConfig, threads: usize) -> Result<Self> {
        let canonical = serde_json::to_vec(cfg)?;
        let versions = BTreeMap::from([("pmlmodes", pmlmodes::VERSION), ("pmlmodes-cli", env!("CARGO_PKG_VERSION"))]);
        Ok(Self {
            command: command.to_string(),
            config: cfg.clone(),
            config_sha256: hex::encode(Sha256::digest(&canonical)),
            versions,
            threads,
            seed: cfg.solver_config().seed,
            levels: Vec::new(),
            extra: BTreeMap::new(),
            total_seconds: 0.0,
        })
    }

    pub fn finish(mut self, started: Instant, out: &OutDir) -> Result<()> {
        self.total_seconds = started.elapsed().as_secs_f64();
        let path = out.file("meta.json")?;
        std::fs::write(&path, serde_json::to_string_pretty(&self)?).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", out.root.display());
        Ok(())
    }
}
