//! Content-addressed response store: one JSON file per cache key.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::{BackendError, CompletionResponse};

pub struct ResponseCache {
    dir: PathBuf,
    // One lock per key so concurrent writers of the same entry serialize.
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ResponseCache { dir, locks: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lock_for(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("cache lock map poisoned");
        locks.entry(key.to_string()).or_default().clone()
    }

    pub async fn get(&self, key: &str) -> Result<Option<CompletionResponse>, BackendError> {
        let lock = self.lock_for(key);
        let _guard = lock.lock().await;
        match tokio::fs::read(self.path(key)).await {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| BackendError::Cache(format!("corrupt entry {key}: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(BackendError::Cache(e.to_string())),
        }
    }

    pub async fn put(&self, key: &str, response: &CompletionResponse) -> Result<(), BackendError> {
        let lock = self.lock_for(key);
        let _guard = lock.lock().await;
        let mut stored = response.clone();
        stored.cache_hit = false;
        let bytes = serde_json::to_vec_pretty(&stored).expect("serializable response");
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        tokio::fs::write(&tmp, bytes)
            .await
            .map_err(|e| BackendError::Cache(e.to_string()))?;
        tokio::fs::rename(&tmp, self.path(key))
            .await
            .map_err(|e| BackendError::Cache(e.to_string()))
    }
}
