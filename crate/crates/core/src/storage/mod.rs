//! Transactional persistence.
//!
//! [`Store`] keeps the committed [`State`] in memory behind a read/write lock
//! and funnels every mutation through [`Store::commit`]: expectations are
//! checked, writes applied with constraint validation, the audit entry built,
//! and the record made durable by the [`Backend`] before the write lock is
//! released. Readers therefore only ever see whole changesets.

pub mod audit;
pub mod backend;
pub mod file;
mod state;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use audit::{AuditDraft, AuditEntry, Overflow, MAX_SNAPSHOT_BYTES, SYSTEM_ACTOR};
pub use backend::{Backend, BackendConfig, BackendRegistry, LogRecord, MemoryBackend};
pub use file::{Fault, FileBackend};
pub use state::{Entity, EntityKey, EntityKind, State, Write};

use crate::clock::Clock;
use crate::domain::ContentHash;
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &str = "FACMON-ARCHIVE";
pub const ARCHIVE_FORMAT_MAJOR: u32 = 1;
pub const ARCHIVE_FORMAT_MINOR: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    /// The entity must not exist yet.
    Absent,
    /// The entity must still be at this version (0 = never written).
    Version(u64),
}

/// A set of writes that commit together with exactly one audit entry.
#[derive(Debug, Clone)]
pub struct Changeset {
    pub writes: Vec<Write>,
    pub expect: Vec<(EntityKey, Expect)>,
    pub audit: AuditDraft,
}

impl Changeset {
    pub fn new(audit: AuditDraft) -> Self {
        Changeset {
            writes: Vec::new(),
            expect: Vec::new(),
            audit,
        }
    }

    pub fn put(mut self, entity: Entity) -> Self {
        self.writes.push(Write::put(entity));
        self
    }

    pub fn delete(mut self, key: EntityKey) -> Self {
        self.writes.push(Write::Delete { key });
        self
    }

    pub fn expect(mut self, key: EntityKey, expect: Expect) -> Self {
        self.expect.push((key, expect));
        self
    }
}

#[derive(Default)]
struct Inner {
    state: State,
    audit: Vec<AuditEntry>,
}

pub struct Store {
    inner: RwLock<Inner>,
    backend: Box<dyn Backend>,
    clock: Arc<dyn Clock>,
}

#[derive(Serialize, Deserialize)]
struct Archive {
    state: State,
    audit: Vec<AuditEntry>,
    blobs: BTreeMap<ContentHash, String>,
}

impl Store {
    /// Opens a store over `backend`, replaying everything it has persisted.
    pub fn open(backend: Box<dyn Backend>, clock: Arc<dyn Clock>) -> Result<Self> {
        let mut inner = Inner::default();
        for record in backend.load()? {
            match record {
                LogRecord::Checkpoint { state, audit } => {
                    inner.state = *state;
                    inner.state.reindex();
                    inner.audit = audit;
                }
                LogRecord::Commit { entry, writes } => {
                    let expected = inner.audit.last().map_or(1, |e| e.seq + 1);
                    if entry.seq != expected {
                        return Err(Error::Corrupt(format!(
                            "audit sequence jumps from {} to {}",
                            expected - 1,
                            entry.seq
                        )));
                    }
                    for write in &writes {
                        inner
                            .state
                            .apply(write)
                            .map_err(|e| Error::Corrupt(format!("replaying seq {}: {e}", entry.seq)))?;
                    }
                    inner.audit.push(entry);
                }
            }
        }
        Ok(Store {
            inner: RwLock::new(inner),
            backend,
            clock,
        })
    }

    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Store::open(Box::new(MemoryBackend::default()), clock).expect("empty memory backend opens")
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Runs `f` against one consistent committed state.
    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        let inner = self.inner.read().unwrap();
        f(&inner.state)
    }

    /// Atomically applies `changeset`; returns the audit sequence number,
    /// which doubles as the commit id.
    pub fn commit(&self, changeset: Changeset) -> Result<u64> {
        let mut guard = self.inner.write().unwrap();
        let inner = &mut *guard;

        for (key, expect) in &changeset.expect {
            let ok = match expect {
                Expect::Absent => inner.state.get(key).is_none(),
                Expect::Version(v) => inner.state.version(key) == *v,
            };
            if !ok {
                return Err(Error::Conflict(key.to_string()));
            }
        }

        let mut undo = Vec::with_capacity(changeset.writes.len());
        for write in &changeset.writes {
            match inner.state.apply(write) {
                Ok(u) => undo.push(u),
                Err(e) => {
                    undo.into_iter().rev().for_each(|u| inner.state.undo(u));
                    return Err(e);
                }
            }
        }

        let result = self.audit_entry(inner, &changeset, &undo).and_then(|entry| {
            let record = LogRecord::Commit {
                entry,
                writes: changeset.writes.clone(),
            };
            self.backend.append(&record)?;
            Ok(record)
        });
        match result {
            Ok(LogRecord::Commit { entry, .. }) => {
                let seq = entry.seq;
                inner.audit.push(entry);
                Ok(seq)
            }
            Ok(LogRecord::Checkpoint { .. }) => unreachable!(),
            Err(e) => {
                undo.into_iter().rev().for_each(|u| inner.state.undo(u));
                Err(e)
            }
        }
    }

    fn audit_entry(&self, inner: &Inner, changeset: &Changeset, undo: &[state::Undo]) -> Result<AuditEntry> {
        let before: Vec<Value> = undo
            .iter()
            .map(|u| serde_json::to_value(&u.previous))
            .collect::<Result<_, _>>()?;
        let before = if before.iter().all(Value::is_null) {
            None
        } else {
            Some(self.bounded(Value::Array(before))?)
        };
        let after = Some(self.bounded(serde_json::to_value(&changeset.writes)?)?);
        let draft = &changeset.audit;
        Ok(AuditEntry {
            seq: inner.audit.last().map_or(1, |e| e.seq + 1),
            timestamp: self.clock.now(),
            actor: draft.actor.clone(),
            action: draft.action.clone(),
            entity_kind: draft.entity_kind,
            entity_id: draft.entity_id.clone(),
            before,
            after,
        })
    }

    fn bounded(&self, snapshot: Value) -> Result<Value> {
        let bytes = serde_json::to_vec(&snapshot)?;
        if bytes.len() <= MAX_SNAPSHOT_BYTES {
            return Ok(snapshot);
        }
        let hash = self.put_blob(&bytes)?;
        Ok(serde_json::to_value(Overflow {
            overflow_blob: hash.to_string(),
            byte_length: bytes.len(),
        })?)
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<ContentHash> {
        if bytes.is_empty() {
            return Err(Error::EmptyPayload);
        }
        let hash = ContentHash::of(bytes);
        self.backend.put_blob(&hash, bytes)?;
        Ok(hash)
    }

    pub fn get_blob(&self, hash: &ContentHash) -> Result<Vec<u8>> {
        self.backend
            .get_blob(hash)?
            .ok_or_else(|| Error::UnknownBlob(hash.to_string()))
    }

    pub fn last_seq(&self) -> u64 {
        self.inner.read().unwrap().audit.last().map_or(0, |e| e.seq)
    }

    /// Audit entries with `from <= seq <= to`, in order.
    pub fn audit_range(&self, from: u64, to: u64) -> Result<Vec<AuditEntry>> {
        if from > to {
            return Err(Error::InvalidRange { from, to });
        }
        let inner = self.inner.read().unwrap();
        Ok(inner
            .audit
            .iter()
            .filter(|e| e.seq >= from && e.seq <= to)
            .cloned()
            .collect())
    }

    /// Rebuilds state purely from the audit log's after-snapshots.
    pub fn replay_audit(&self) -> Result<State> {
        let entries = self.audit_range(1, u64::MAX)?;
        let mut state = State::default();
        for entry in entries {
            let Some(after) = entry.after else { continue };
            let after = self.expand(after)?;
            let writes: Vec<Write> = serde_json::from_value(after)?;
            for write in &writes {
                state.apply(write)?;
            }
        }
        Ok(state)
    }

    /// Resolves an [`Overflow`] stand-in back to the full snapshot.
    pub fn expand(&self, snapshot: Value) -> Result<Value> {
        match serde_json::from_value::<Overflow>(snapshot.clone()) {
            Ok(overflow) => {
                let bytes = self.get_blob(&overflow.overflow_blob.parse()?)?;
                Ok(serde_json::from_slice(&bytes)?)
            }
            Err(_) => Ok(snapshot),
        }
    }

    /// Deterministic full-state archive: a one-line format header followed
    /// by JSON holding state, audit log and every blob.
    pub fn snapshot_export(&self) -> Result<Vec<u8>> {
        let inner = self.inner.read().unwrap();
        let mut blobs = BTreeMap::new();
        for hash in self.backend.blob_hashes()? {
            let bytes = self.get_blob(&hash)?;
            blobs.insert(hash, BASE64.encode(bytes));
        }
        let archive = Archive {
            state: inner.state.clone(),
            audit: inner.audit.clone(),
            blobs,
        };
        let mut out = format!("{ARCHIVE_MAGIC} {ARCHIVE_FORMAT_MAJOR}.{ARCHIVE_FORMAT_MINOR}\n").into_bytes();
        serde_json::to_writer(&mut out, &archive)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Creates a store on an empty `backend` from a [`Store::snapshot_export`] archive.
    pub fn restore(backend: Box<dyn Backend>, clock: Arc<dyn Clock>, archive: &[u8]) -> Result<Self> {
        let newline = archive
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::InvalidArchive("missing header".into()))?;
        let header = std::str::from_utf8(&archive[..newline])
            .map_err(|_| Error::InvalidArchive("header is not text".into()))?;
        let version = match header.split_once(' ') {
            Some((ARCHIVE_MAGIC, version)) => version,
            _ => return Err(Error::InvalidArchive(format!("unrecognized header {header:?}"))),
        };
        let major = version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u32>().ok())
            .ok_or_else(|| Error::InvalidArchive(format!("malformed version {version:?}")))?;
        if major != ARCHIVE_FORMAT_MAJOR {
            return Err(Error::InvalidArchive(format!(
                "format version {version} is not compatible with {ARCHIVE_FORMAT_MAJOR}.x"
            )));
        }
        let archive: Archive = serde_json::from_slice(&archive[newline + 1..])
            .map_err(|e| Error::InvalidArchive(e.to_string()))?;
        if !backend.load()?.is_empty() {
            return Err(Error::InvalidArchive("target store is not empty".into()));
        }
        for (hash, encoded) in &archive.blobs {
            let bytes = BASE64
                .decode(encoded)
                .map_err(|e| Error::InvalidArchive(format!("blob {hash}: {e}")))?;
            if ContentHash::of(&bytes) != *hash {
                return Err(Error::InvalidArchive(format!("blob {hash} does not match its hash")));
            }
            backend.put_blob(hash, &bytes)?;
        }
        backend.append(&LogRecord::Checkpoint {
            state: Box::new(archive.state),
            audit: archive.audit,
        })?;
        Store::open(backend, clock)
    }

    pub fn health(&self) -> Result<()> {
        self.backend.health()
    }
}
