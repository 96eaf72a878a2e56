use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::audit::AuditEntry;
use super::state::{State, Write};
use crate::domain::ContentHash;
use crate::error::{Error, Result};

/// One durable unit in a backend's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Commit { entry: AuditEntry, writes: Vec<Write> },
    /// Full state, written when a store is restored from an archive.
    Checkpoint { state: Box<State>, audit: Vec<AuditEntry> },
}

/// Durable medium underneath a [`super::Store`].
///
/// A backend only has to persist log records in order and keep blobs; the
/// store owns validation, versioning and the in-memory view.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Every record committed so far, oldest first. Torn trailing records
    /// left by an interrupted append are discarded.
    fn load(&self) -> Result<Vec<LogRecord>>;

    /// Persists `record`. Returns only once the record is durable.
    fn append(&self, record: &LogRecord) -> Result<()>;

    /// Stores `bytes` under `hash`. Returns `false` if already present.
    fn put_blob(&self, hash: &ContentHash, bytes: &[u8]) -> Result<bool>;

    fn get_blob(&self, hash: &ContentHash) -> Result<Option<Vec<u8>>>;

    fn blob_hashes(&self) -> Result<Vec<ContentHash>>;

    fn health(&self) -> Result<()>;
}

/// Lets a caller keep a handle on a backend it has given to a store.
impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn load(&self) -> Result<Vec<LogRecord>> {
        (**self).load()
    }

    fn append(&self, record: &LogRecord) -> Result<()> {
        (**self).append(record)
    }

    fn put_blob(&self, hash: &ContentHash, bytes: &[u8]) -> Result<bool> {
        (**self).put_blob(hash, bytes)
    }

    fn get_blob(&self, hash: &ContentHash) -> Result<Option<Vec<u8>>> {
        (**self).get_blob(hash)
    }

    fn blob_hashes(&self) -> Result<Vec<ContentHash>> {
        (**self).blob_hashes()
    }

    fn health(&self) -> Result<()> {
        (**self).health()
    }
}

#[derive(Debug, Clone, Default)]
pub struct BackendConfig {
    pub data_dir: Option<PathBuf>,
}

type Factory = fn(&BackendConfig) -> Result<Box<dyn Backend>>;

/// Backends available by name, e.g. from a config file's `storage` key.
pub struct BackendRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, config: &BackendConfig) -> Result<Box<dyn Backend>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "storage backend",
            name: name.to_string(),
        })?;
        factory(config)
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut registry = BackendRegistry::empty();
        registry.register("memory", |_| Ok(Box::new(MemoryBackend::default())));
        registry.register("file", |config| {
            let dir = config
                .data_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("file storage needs a data directory".into()))?;
            Ok(Box::new(super::file::FileBackend::open(dir)?))
        });
        registry
    }
}

/// Volatile backend for tests and throwaway stores.
#[derive(Default)]
pub struct MemoryBackend {
    log: Mutex<Vec<LogRecord>>,
    blobs: Mutex<BTreeMap<ContentHash, Vec<u8>>>,
}

impl Backend for MemoryBackend {
    fn name(&self) -> &'static str {
        "memory"
    }

    fn load(&self) -> Result<Vec<LogRecord>> {
        Ok(self.log.lock().unwrap().clone())
    }

    fn append(&self, record: &LogRecord) -> Result<()> {
        self.log.lock().unwrap().push(record.clone());
        Ok(())
    }

    fn put_blob(&self, hash: &ContentHash, bytes: &[u8]) -> Result<bool> {
        let mut blobs = self.blobs.lock().unwrap();
        if blobs.contains_key(hash) {
            return Ok(false);
        }
        blobs.insert(hash.clone(), bytes.to_vec());
        Ok(true)
    }

    fn get_blob(&self, hash: &ContentHash) -> Result<Option<Vec<u8>>> {
        Ok(self.blobs.lock().unwrap().get(hash).cloned())
    }

    fn blob_hashes(&self) -> Result<Vec<ContentHash>> {
        Ok(self.blobs.lock().unwrap().keys().cloned().collect())
    }

    fn health(&self) -> Result<()> {
        Ok(())
    }
}
