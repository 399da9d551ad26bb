//! Write-once output directories and their manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Snapshot of the effective config; reruns can pass it to `--config`.
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FORMAT: &str = "mfg-run-manifest";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub versions: BTreeMap<String, String>,
    /// The effective config after command-line overrides.
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRecord>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// The only writer of one command's output directory. The directory must not
/// exist beforehand, and every file written is recorded in the manifest.
pub struct RunDir {
    root: PathBuf,
    command: String,
    config: ExperimentConfig,
    artifacts: Vec<ArtifactRecord>,
    timings: BTreeMap<String, f64>,
}

impl RunDir {
    pub fn create(root: PathBuf, command: &str, config: &ExperimentConfig) -> Result<Self> {
        if root.exists() {
            bail!(
                "{} already exists; outputs are write-once, choose a fresh --out",
                root.display()
            );
        }
        if let Some(parent) = root.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::create_dir(&root).with_context(|| format!("creating {}", root.display()))?;
        let mut run = Self {
            root,
            command: command.into(),
            config: config.clone(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
        };
        run.write(CONFIG_FILE, config.to_toml()?)?;
        Ok(run)
    }

    fn record(&mut self, rel: &str) -> Result<()> {
        let (bytes, sha256) = sha256_file(&self.root.join(rel))?;
        self.artifacts.push(ArtifactRecord {
            path: rel.into(),
            bytes,
            sha256,
        });
        Ok(())
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(rel);
        if path.exists() {
            bail!("{} written twice", path.display());
        }
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.record(rel)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.write(rel, serde_json::to_string_pretty(value)?)
    }

    /// Lets `save` fill the fresh subdirectory `rel`, then records every file
    /// it wrote.
    pub fn write_dir(&mut self, rel: &str, save: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let dir = self.root.join(rel);
        if dir.exists() {
            bail!("{} written twice", dir.display());
        }
        save(&dir)?;
        let mut names: Vec<String> = std::fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        for name in names {
            self.record(&format!("{rel}/{name}"))?;
        }
        Ok(())
    }

    /// Runs `f` and records its duration under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.insert(stage.into(), start.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn finish(self) -> Result<RunManifest> {
        let versions = BTreeMap::from([
            ("mfg-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("mfg-core".to_string(), mfg_core::VERSION.to_string()),
        ]);
        let manifest = RunManifest {
            format: MANIFEST_FORMAT.into(),
            command: self.command,
            versions,
            config: self.config,
            artifacts: self.artifacts,
            timings: self.timings,
        };
        std::fs::write(self.root.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

/// Checks every artifact listed in the manifest of `root`.
pub fn verify_manifest(root: &Path) -> Result<RunManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    for a in &manifest.artifacts {
        let (bytes, sha256) = sha256_file(&root.join(&a.path))?;
        if bytes != a.bytes || sha256 != a.sha256 {
            bail!("{} does not match its manifest checksum", a.path);
        }
    }
    Ok(manifest)
}
