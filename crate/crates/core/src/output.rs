//! Atomic file output, input digests and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever any on-disk format changes incompatibly.
pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to a temporary sibling and renames it over `path`, so
/// readers never observe a partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Versioned container for trained weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format_version: u32,
    pub kind: String,
    pub seed: u64,
    pub model: M,
}

pub fn save_checkpoint<M: Serialize>(path: &Path, kind: &str, seed: u64, model: &M) -> Result<()> {
    write_json(
        path,
        &Checkpoint {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            seed,
            model,
        },
    )
}

/// Loads a checkpoint of the given kind, rejecting other format versions.
pub fn load_checkpoint<M: DeserializeOwned>(path: &Path, kind: &str) -> Result<Checkpoint<M>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64);
    if version != Some(FORMAT_VERSION as u64) {
        return Err(Error::Schema(format!(
            "checkpoint format version {version:?}, expected {FORMAT_VERSION}"
        )));
    }
    if value.get("kind").and_then(serde_json::Value::as_str) != Some(kind) {
        return Err(Error::Schema(format!("checkpoint is not a {kind} model")));
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(format!("checkpoint: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command invocation, written as `manifest.json` in the
/// output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub tool_version: String,
    pub format_version: u32,
    pub started_unix_ms: u128,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub fn start(command: impl Into<String>, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            config,
            seed,
            inputs: Vec::new(),
            tool_version: TOOL_VERSION.to_string(),
            format_version: FORMAT_VERSION,
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            wall_clock_secs: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    pub fn finish(mut self, out_dir: &Path, started: std::time::Instant) -> Result<()> {
        self.wall_clock_secs = started.elapsed().as_secs_f64();
        write_json(&out_dir.join("manifest.json"), &self)
    }
}
