//! Run manifests: one `<output>.manifest` per command, recording the
//! command, effective configuration, seed, paths, wall-clock duration,
//! and a sha256 checksum of every artifact written.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct Manifest {
    command: &'static str,
    started: Instant,
    entries: Vec<(String, String)>,
    artifacts: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            started: Instant::now(),
            entries: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Register an artifact written by the command; its checksum lands in
    /// the manifest.
    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Write `<primary>.manifest` next to the primary output.
    pub fn write(self, primary: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        for (key, value) in &self.entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        for path in &self.artifacts {
            let bytes = std::fs::read(path)?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            let _ = writeln!(out, "checksum.{name} = {hex}");
        }
        let _ = writeln!(out, "duration_ms = {}", self.started.elapsed().as_millis());
        let mut manifest_path = primary.as_os_str().to_owned();
        manifest_path.push(".manifest");
        std::fs::write(PathBuf::from(manifest_path), out)
    }
}
