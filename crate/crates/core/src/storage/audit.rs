use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EntityKind;

/// Snapshots larger than this are moved into the blob store and replaced by
/// an [`Overflow`] reference.
pub const MAX_SNAPSHOT_BYTES: usize = 64 * 1024;

/// Actor string recorded for operations not attributable to a user.
pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub action: String,
    pub entity_kind: EntityKind,
    pub entity_id: String,
    pub before: Option<Value>,
    pub after: Option<Value>,
}

/// What a caller supplies when committing; the store assigns sequence,
/// timestamp and snapshots.
#[derive(Debug, Clone)]
pub struct AuditDraft {
    pub actor: String,
    pub action: String,
    pub entity_kind: EntityKind,
    pub entity_id: String,
}

impl AuditDraft {
    pub fn new(
        actor: impl Into<String>,
        action: impl Into<String>,
        entity_kind: EntityKind,
        entity_id: impl ToString,
    ) -> Self {
        AuditDraft {
            actor: actor.into(),
            action: action.into(),
            entity_kind,
            entity_id: entity_id.to_string(),
        }
    }
}

/// Stand-in for a snapshot that exceeded [`MAX_SNAPSHOT_BYTES`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overflow {
    pub overflow_blob: String,
    pub byte_length: usize,
}
