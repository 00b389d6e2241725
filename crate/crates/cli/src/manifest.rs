use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub const FILE_NAME: &str = "manifest.toml";

/// Record of one command run, stored next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

pub struct Run {
    command: String,
    seed: u64,
    config: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn start(command: &str, seed: u64) -> Self {
        Run {
            command: command.to_string(),
            seed,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, path: Option<&Path>) {
        self.config = path.map(Path::to_path_buf);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    /// Writes the manifest via a temporary file and rename.
    pub fn finish(self, out_dir: &Path) -> std::io::Result<()> {
        let m = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let text = toml::to_string(&m).expect("manifest serializes");
        let tmp = out_dir.join(format!(".{FILE_NAME}.tmp"));
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, out_dir.join(FILE_NAME))
    }
}
