//! Run manifests: the argument vector, working directory, seeds and SHA-256
//! digests of every config, input and output file. No timestamps, so equal
//! runs produce equal manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

pub const MANIFEST_FORMAT: &str = "priorsynth-manifest/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(FileDigest {
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        })
    }

    /// Compares the file currently at `self.path` against the recorded digest.
    pub fn verify(&self) -> anyhow::Result<bool> {
        Ok(FileDigest::of(Path::new(&self.path))? == *self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub cwd: String,
    pub config: Option<FileDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// What a command read and wrote, collected for its manifest.
#[derive(Debug, Default, Clone)]
pub struct RunRecord {
    pub config: Option<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(mut self, p: impl Into<PathBuf>) -> Self {
        self.inputs.push(p.into());
        self
    }

    pub fn output(mut self, p: impl Into<PathBuf>) -> Self {
        self.outputs.push(p.into());
        self
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl Manifest {
    pub fn build(command: &str, argv: &[String], record: &RunRecord) -> anyhow::Result<Self> {
        let cwd = std::env::current_dir().context("reading the working directory")?;
        let digests = |ps: &[PathBuf]| ps.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<Vec<_>>>();
        Ok(Manifest {
            format: MANIFEST_FORMAT.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv: argv.to_vec(),
            cwd: cwd.to_string_lossy().into_owned(),
            config: record.config.as_deref().map(FileDigest::of).transpose()?,
            seeds: record.seeds.clone(),
            inputs: digests(&record.inputs)?,
            outputs: digests(&record.outputs)?,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let m: Manifest = serde_path_to_error::deserialize(de)
            .map_err(|e| anyhow::anyhow!("{}: invalid manifest at {}: {}", path.display(), e.path(), e.inner()))?;
        if m.format != MANIFEST_FORMAT {
            bail!("{}: unsupported manifest format {:?}", path.display(), m.format);
        }
        Ok(m)
    }
}
