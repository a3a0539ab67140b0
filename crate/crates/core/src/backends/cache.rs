//! Append-only response cache, one JSONL file per backend.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::nfc;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub operation: String,
    pub input: String,
    pub value: String,
    pub created_at: u64,
}

/// NFC + trim, applied before hashing and before sending.
pub fn normalize_input(text: &str) -> String {
    nfc(text.trim())
}

/// SHA-256 over the unit-separated triple, hex encoded.
pub fn cache_key(backend_id: &str, operation: &str, normalized_input: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(backend_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(operation.as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalized_input.as_bytes());
    hex::encode(hasher.finalize())
}

pub fn cache_path(dir: &Path, backend_id: &str) -> PathBuf {
    dir.join(format!("{backend_id}.jsonl"))
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache {path}:{line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Opens (creating if needed) `dir/<backend_id>.jsonl` and loads every
    /// entry in it. With `create == false` a missing file stays missing and
    /// the cache is read-only.
    pub fn open(dir: &Path, backend_id: &str, create: bool) -> Result<Self, CacheError> {
        let path = cache_path(dir, backend_id);
        let io_err = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for (index, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                    path: path.display().to_string(),
                    line: index + 1,
                    message: e.to_string(),
                })?;
                // first write wins
                entries.entry(entry.key.clone()).or_insert(entry);
            }
        }
        let writer = if create {
            fs::create_dir_all(dir).map_err(io_err)?;
            Some(OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?)
        } else {
            None
        };
        Ok(ResponseCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `entry` unless its key is already present; returns the entry
    /// that ends up cached.
    pub fn insert(&self, entry: CacheEntry) -> Result<CacheEntry, CacheError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(existing) = self.get(&entry.key) {
            return Ok(existing);
        }
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("cache entries serialize");
            line.push('\n');
            let path = self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| CacheError::Io { path, source })?;
        }
        self.entries.write().unwrap().insert(entry.key.clone(), entry.clone());
        Ok(entry)
    }
}
