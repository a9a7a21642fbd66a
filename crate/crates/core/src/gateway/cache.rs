use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{now_rfc3339, publish_atomically, CacheKey, CompletionRequest, GatewayError};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    backend_id: String,
    request: CompletionRequest,
    text: String,
    created_at: String,
}

/// Completion cache laid out as `<dir>/<aa>/<digest>.json`.
#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.root.join(key.relative_path())
    }

    /// `Ok(None)` on a miss, `CacheCorrupt` when the stored entry fails validation.
    pub fn get(&self, key: &CacheKey) -> Result<Option<String>, GatewayError> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| GatewayError::CacheCorrupt {
            path: path.display().to_string(),
            reason,
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if entry.key != key.as_str() {
            return Err(corrupt(format!("stored key {} does not match", entry.key)));
        }
        if CacheKey::new(&entry.backend_id, &entry.request) != *key {
            return Err(corrupt("request does not hash to its key".into()));
        }
        Ok(Some(entry.text))
    }

    pub fn put(
        &self,
        key: &CacheKey,
        backend_id: &str,
        request: &CompletionRequest,
        text: &str,
    ) -> Result<(), GatewayError> {
        let entry = CacheEntry {
            key: key.as_str().to_string(),
            backend_id: backend_id.to_string(),
            request: request.clone(),
            text: text.to_string(),
            created_at: now_rfc3339(),
        };
        let bytes = serde_json::to_vec_pretty(&entry).map_err(|e| GatewayError::Io(e.to_string()))?;
        publish_atomically(&self.path(key), &bytes)?;
        Ok(())
    }

    pub fn remove(&self, key: &CacheKey) {
        let _ = std::fs::remove_file(self.path(key));
    }

    /// Number of published entries.
    pub fn len(&self) -> usize {
        walk_json(&self.root).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Deletes every entry; returns how many were removed.
    pub fn clear(&self) -> std::io::Result<usize> {
        let files = walk_json(&self.root);
        for f in &files {
            std::fs::remove_file(f)?;
        }
        Ok(files.len())
    }
}

/// `*.json` files one level below `root`'s shard directories.
pub(crate) fn walk_json(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let Ok(shards) = std::fs::read_dir(root) else {
        return out;
    };
    for shard in shards.flatten() {
        if !shard.path().is_dir() {
            continue;
        }
        if let Ok(files) = std::fs::read_dir(shard.path()) {
            out.extend(
                files
                    .flatten()
                    .map(|f| f.path())
                    .filter(|p| p.extension().is_some_and(|e| e == "json")),
            );
        }
    }
    out.sort();
    out
}
