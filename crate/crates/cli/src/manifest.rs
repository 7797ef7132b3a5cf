//! `manifest.json`: configuration echo, input hash, versions, seeds and timing.

use crate::commands::Outcome;
use crate::config::RunConfig;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

/// Git-style content hash: SHA-256 of `"blob <len>\0" ++ bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Top-level keys that cannot change any artifact and are left out of the input hash.
pub const UNHASHED_KEYS: &[&str] = &["out", "threads"];

/// Canonical config text with [`UNHASHED_KEYS`] removed.
pub fn hashed_config_text(cfg: &RunConfig) -> String {
    let mut map = cfg.map.clone();
    if let Some(top) = map.sections.get_mut(crate::config::TOP) {
        top.retain(|k, _| !UNHASHED_KEYS.contains(&k.as_str()));
    }
    map.emit()
}

pub struct Manifest(Value);

impl Manifest {
    pub fn new(
        cfg: &RunConfig,
        threads: Option<usize>,
        wall_seconds: f64,
        status: i32,
        outcome: Option<&Outcome>,
        error: Option<String>,
    ) -> Self {
        let text = cfg.map.emit();
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64() - wall_seconds).unwrap_or(0.0);
        let config: Value = cfg
            .map
            .sections
            .iter()
            .map(|(s, kv)| (s.clone(), kv.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect()))
            .collect::<serde_json::Map<String, Value>>()
            .into();
        Manifest(json!({
            "manifest_format": MANIFEST_FORMAT,
            "command": cfg.command.name(),
            "config": config,
            "config_text": text,
            "input_hash": content_hash(hashed_config_text(cfg).as_bytes()),
            "input_hash_excludes": UNHASHED_KEYS,
            "seed": cfg.seed,
            "seed_scheme": "replication r of stream k draws from split_seed(split_seed(seed, k), r)",
            "streams": outcome.map(|o| o.streams.clone()).unwrap_or_default(),
            "versions": {
                "critfield": critfield_version(),
                "critfield_cli": env!("CARGO_PKG_VERSION"),
            },
            "threads": threads,
            "started_unix": started,
            "wall_time_seconds": wall_seconds,
            "exit_status": status,
            "error": error,
            "outputs": outcome.map(|o| o.files.clone()).unwrap_or_default(),
            "summary": outcome.map(|o| o.summary.clone()).unwrap_or(Value::Null),
        }))
    }

    pub fn value(&self) -> &Value {
        &self.0
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.0).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
    }
}

fn critfield_version() -> &'static str {
    critfield::VERSION
}
