use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cache::walk_json;
use super::{now_rfc3339, publish_atomically, CacheKey, CompletionBackend, CompletionRequest, GatewayError};

/// One recorded exchange. Hand-editing `response` is supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: CompletionRequest,
    pub response: String,
    pub recorded_at: String,
}

/// Directory of recorded exchanges keyed by [`CacheKey::fixture`].
#[derive(Debug, Clone)]
pub struct FixtureStore {
    root: PathBuf,
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, req: &CompletionRequest) -> PathBuf {
        self.root.join(CacheKey::fixture(req).relative_path())
    }

    pub fn write(&self, req: &CompletionRequest, response: &str) -> Result<(), GatewayError> {
        let entry = FixtureEntry {
            request: req.clone(),
            response: response.to_string(),
            recorded_at: now_rfc3339(),
        };
        let bytes = serde_json::to_vec_pretty(&entry).map_err(|e| GatewayError::Io(e.to_string()))?;
        publish_atomically(&self.path_for(req), &bytes)?;
        Ok(())
    }

    pub fn read(&self, req: &CompletionRequest) -> Result<Option<FixtureEntry>, GatewayError> {
        let path = self.path_for(req);
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| {
                GatewayError::CacheCorrupt {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                }
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// All fixtures in path order.
    pub fn entries(&self) -> Result<Vec<FixtureEntry>, GatewayError> {
        walk_json(&self.root)
            .into_iter()
            .map(|p| {
                let bytes = std::fs::read(&p)?;
                serde_json::from_slice(&bytes).map_err(|e| GatewayError::CacheCorrupt {
                    path: p.display().to_string(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

/// Answers only from recorded fixtures.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: FixtureStore,
}

impl ReplayBackend {
    pub fn new(store: FixtureStore) -> Self {
        ReplayBackend { store }
    }
}

impl CompletionBackend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        match self.store.read(req)? {
            Some(entry) => Ok(entry.response),
            None => Err(GatewayError::FixtureMiss {
                digest: CacheKey::fixture(req).as_str().to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ScriptedBackend};
    use std::sync::Arc;

    #[test]
    fn replay_returns_recorded_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let text = "java.lang.StringBuffer is used to build strings.\n  trailing  ";
        let recorder = Gateway::new(Arc::new(ScriptedBackend::from_pairs([("*", text)])))
            .with_recorder(store.clone());
        let req = CompletionRequest::new("What is the primary usage of java.lang.StringBuffer?");
        recorder.complete(&req).unwrap();

        let digest = CacheKey::fixture(&req);
        let expected_path = dir.path().join(&digest.as_str()[..2]).join(format!("{digest}.json"));
        assert!(expected_path.exists());

        let replay = Gateway::new(Arc::new(ReplayBackend::new(store)));
        let res = replay.complete(&req).unwrap();
        assert_eq!(res.text, text);
        assert!(!res.cached);
    }

    #[test]
    fn missing_fixture_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ReplayBackend::new(FixtureStore::new(dir.path()));
        let err = backend.complete(&CompletionRequest::new("never recorded")).unwrap_err();
        assert!(matches!(err, GatewayError::FixtureMiss { .. }));
    }
}
