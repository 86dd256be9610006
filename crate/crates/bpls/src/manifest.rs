//! The JSON record every run leaves in its output directory.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub version: String,
    pub config_paths: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub chain: Option<ChainSettings>,
    pub workers: Option<usize>,
    /// Files written by the run, relative to the run directory.
    pub outputs: Vec<PathBuf>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_paths: Vec::new(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            chain: None,
            workers: None,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(PathBuf::from(name));
    }

    /// Runs `f`, recording its wall-clock time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(phase.to_string(), start.elapsed().as_secs_f64());
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
