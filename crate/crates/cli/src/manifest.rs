use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.txt";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub inputs: Vec<(PathBuf, String)>,
    pub settings: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, config: String) -> Self {
        RunManifest { command: command.to_string(), config, inputs: Vec::new(), settings: Vec::new() }
    }

    pub fn setting(mut self, key: &str, value: impl ToString) -> Self {
        self.settings.push((key.to_string(), value.to_string()));
        self
    }

    /// Records the SHA-256 of a file, or of every file under a directory.
    pub fn input(mut self, path: &Path) -> Result<Self> {
        let digest = hash_path(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(self)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut text = String::new();
        writeln!(text, "command = {}", self.command)?;
        writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(text, "timestamp = {stamp}")?;
        for (k, v) in &self.settings {
            writeln!(text, "{k} = {v}")?;
        }
        for (p, d) in &self.inputs {
            writeln!(text, "input {} sha256 {d}", p.display())?;
        }
        writeln!(text, "[config]")?;
        text.push_str(&self.config);
        fs::create_dir_all(dir)?;
        fs::write(dir.join(FILE_NAME), text).with_context(|| format!("writing manifest in {}", dir.display()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Files hash their contents; directories hash the sorted list of
/// `relative path, file hash` pairs beneath them.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_file() {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(hash_bytes(&bytes));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let digest = hash_path(&path.join(&rel))?;
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update([b'\n']);
    }
    Ok(hex(&h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}
