//! Per-run manifest. The manifest holds only deterministic content, so two
//! runs with identical inputs and seed write identical manifests; wall-clock
//! timings go to a `timings.json` sidecar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// File name -> SHA-256 of every input.
    pub inputs: BTreeMap<String, String>,
    /// Every output, relative to the output directory.
    pub outputs: Vec<String>,
    /// SHA-256 of the outputs whose bytes depend only on inputs and seed.
    /// Outputs carrying wall-clock measurements are listed but not hashed.
    pub output_sha256: BTreeMap<String, String>,
    pub timings: &'static str,
}

/// Collects inputs, outputs and stage timings while a subcommand runs.
pub struct Run {
    command: String,
    output_dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(String, bool)>,
    stages: Vec<(String, f64)>,
    stage_start: Instant,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Run {
    pub fn start(command: &str, output_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(output_dir)
            .with_context(|| format!("creating output directory {}", output_dir.display()))?;
        Ok(Self {
            command: command.into(),
            output_dir: output_dir.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
            stage_start: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    /// Path for output `name`, recorded for the manifest.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push((name.into(), true));
        self.output_dir.join(name)
    }

    /// Like [`Run::output`] for files that contain timings.
    pub fn timed_output(&mut self, name: &str) -> PathBuf {
        self.outputs.push((name.into(), false));
        self.output_dir.join(name)
    }

    /// Closes the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        self.stages
            .push((name.into(), self.stage_start.elapsed().as_secs_f64()));
        self.stage_start = Instant::now();
    }

    pub fn finish(mut self, seed: u64, config: serde_json::Value) -> Result<()> {
        self.stage("finish");
        let mut output_sha256 = BTreeMap::new();
        for (name, hashed) in &self.outputs {
            if *hashed {
                output_sha256.insert(name.clone(), sha256_file(&self.output_dir.join(name))?);
            }
        }
        let outputs = self.outputs.iter().map(|(n, _)| n.clone()).collect();
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION,
            command: self.command.clone(),
            seed,
            config,
            inputs: std::mem::take(&mut self.inputs),
            outputs,
            output_sha256,
            timings: "timings.json",
        };
        let timings: BTreeMap<&str, f64> =
            self.stages.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        write_json(
            &self.output_dir.join("timings.json"),
            &serde_json::json!({ "stage_seconds": timings }),
        )?;
        write_json(&self.output_dir.join("manifest.json"), &manifest)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
