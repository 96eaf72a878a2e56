use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::auth::{Session, User};
use crate::domain::{
    next_condition, Barcode, Campus, CampusId, Item, ItemId, Location, LocationId, RecordId,
    RepairId, StatusChangeId, TaxonomyId, TaxonomyKind, TaxonomyRef, TransferId, UserId,
};
use crate::error::{Error, Result};
use crate::lifecycle::{RepairRecord, StatusChange, TransferRecord};
use crate::monitoring::{FindingStatus, MonitoringRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Campus,
    Location,
    Taxonomy,
    Item,
    Transfer,
    Repair,
    StatusChange,
    Finding,
    User,
    Session,
    /// Bulk operations that touch many entities of mixed kinds.
    Batch,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Campus => "campus",
            EntityKind::Location => "location",
            EntityKind::Taxonomy => "taxonomy",
            EntityKind::Item => "item",
            EntityKind::Transfer => "transfer",
            EntityKind::Repair => "repair",
            EntityKind::StatusChange => "status_change",
            EntityKind::Finding => "finding",
            EntityKind::User => "user",
            EntityKind::Session => "session",
            EntityKind::Batch => "batch",
        }
    }

    const ALL: [EntityKind; 11] = [
        EntityKind::Campus,
        EntityKind::Location,
        EntityKind::Taxonomy,
        EntityKind::Item,
        EntityKind::Transfer,
        EntityKind::Repair,
        EntityKind::StatusChange,
        EntityKind::Finding,
        EntityKind::User,
        EntityKind::Session,
        EntityKind::Batch,
    ];
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `kind:id`, used for version tracking and optimistic-concurrency checks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct EntityKey {
    pub kind: EntityKind,
    pub id: String,
}

impl EntityKey {
    pub fn new(kind: EntityKind, id: impl ToString) -> Self {
        EntityKey {
            kind,
            id: id.to_string(),
        }
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

impl FromStr for EntityKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, id) = s
            .split_once(':')
            .ok_or_else(|| Error::Corrupt(format!("malformed entity key {s:?}")))?;
        let kind = EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == kind)
            .ok_or_else(|| Error::Corrupt(format!("unknown entity kind {kind:?}")))?;
        Ok(EntityKey::new(kind, id))
    }
}

impl From<EntityKey> for String {
    fn from(value: EntityKey) -> Self {
        value.to_string()
    }
}

impl TryFrom<String> for EntityKey {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Entity {
    Campus(Campus),
    Location(Location),
    Taxonomy(TaxonomyRef),
    Item(Item),
    Transfer(TransferRecord),
    Repair(RepairRecord),
    StatusChange(StatusChange),
    Finding(MonitoringRecord),
    User(User),
    Session(Session),
}

impl Entity {
    pub fn key(&self) -> EntityKey {
        match self {
            Entity::Campus(v) => EntityKey::new(EntityKind::Campus, v.id),
            Entity::Location(v) => EntityKey::new(EntityKind::Location, v.id),
            Entity::Taxonomy(v) => EntityKey::new(EntityKind::Taxonomy, v.id),
            Entity::Item(v) => EntityKey::new(EntityKind::Item, v.id),
            Entity::Transfer(v) => EntityKey::new(EntityKind::Transfer, v.id),
            Entity::Repair(v) => EntityKey::new(EntityKind::Repair, v.id),
            Entity::StatusChange(v) => EntityKey::new(EntityKind::StatusChange, v.id),
            Entity::Finding(v) => EntityKey::new(EntityKind::Finding, v.id),
            Entity::User(v) => EntityKey::new(EntityKind::User, v.id),
            Entity::Session(v) => EntityKey::new(EntityKind::Session, &v.token_digest),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Write {
    Put { entity: Entity },
    Delete { key: EntityKey },
}

impl Write {
    pub fn put(entity: Entity) -> Self {
        Write::Put { entity }
    }

    pub fn key(&self) -> EntityKey {
        match self {
            Write::Put { entity } => entity.key(),
            Write::Delete { key } => key.clone(),
        }
    }
}

pub(crate) struct Undo {
    key: EntityKey,
    pub(crate) previous: Option<Entity>,
    version: Option<u64>,
}

/// Every committed entity, keyed for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub campuses: BTreeMap<CampusId, Campus>,
    pub locations: BTreeMap<LocationId, Location>,
    pub taxonomy: BTreeMap<TaxonomyId, TaxonomyRef>,
    pub items: BTreeMap<ItemId, Item>,
    pub transfers: BTreeMap<TransferId, TransferRecord>,
    pub repairs: BTreeMap<RepairId, RepairRecord>,
    pub status_changes: BTreeMap<StatusChangeId, StatusChange>,
    pub findings: BTreeMap<RecordId, MonitoringRecord>,
    pub users: BTreeMap<UserId, User>,
    pub sessions: BTreeMap<String, Session>,
    versions: BTreeMap<EntityKey, u64>,
    #[serde(skip)]
    barcodes: BTreeMap<Barcode, ItemId>,
}

fn parse_id<T: FromStr<Err = Error>>(key: &EntityKey) -> Result<T> {
    key.id
        .parse()
        .map_err(|_| Error::Corrupt(format!("malformed id in {key}")))
}

impl State {
    /// Rebuilds derived indexes after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.barcodes = self
            .items
            .values()
            .map(|item| (item.barcode.clone(), item.id))
            .collect();
    }

    pub fn version(&self, key: &EntityKey) -> u64 {
        self.versions.get(key).copied().unwrap_or(0)
    }

    pub fn item_by_barcode(&self, barcode: &Barcode) -> Option<&Item> {
        self.barcodes.get(barcode).and_then(|id| self.items.get(id))
    }

    pub fn campus_by_code(&self, code: &str) -> Option<&Campus> {
        self.campuses.values().find(|c| c.code == code)
    }

    pub fn location_by_code(&self, campus_id: CampusId, code: &str) -> Option<&Location> {
        self.locations
            .values()
            .find(|l| l.campus_id == campus_id && l.code == code)
    }

    pub fn taxonomy_by_code(&self, kind: TaxonomyKind, code: &str) -> Option<&TaxonomyRef> {
        self.taxonomy
            .values()
            .find(|t| t.kind == kind && t.code == code)
    }

    pub fn user_by_username(&self, username: &str) -> Option<&User> {
        self.users.values().find(|u| u.username == username)
    }

    pub fn get(&self, key: &EntityKey) -> Option<Entity> {
        let entity = match key.kind {
            EntityKind::Campus => Entity::Campus(self.campuses.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Location => Entity::Location(self.locations.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Taxonomy => Entity::Taxonomy(self.taxonomy.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Item => Entity::Item(self.items.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Transfer => Entity::Transfer(self.transfers.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Repair => Entity::Repair(self.repairs.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::StatusChange => {
                Entity::StatusChange(self.status_changes.get(&parse_id(key).ok()?)?.clone())
            }
            EntityKind::Finding => Entity::Finding(self.findings.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::User => Entity::User(self.users.get(&parse_id(key).ok()?)?.clone()),
            EntityKind::Session => Entity::Session(self.sessions.get(&key.id)?.clone()),
            EntityKind::Batch => return None,
        };
        Some(entity)
    }

    /// Applies one write after checking every store-level constraint.
    /// The returned [`Undo`] reverts it.
    pub(crate) fn apply(&mut self, write: &Write) -> Result<Undo> {
        let key = write.key();
        let version = self.versions.get(&key).copied();
        let previous = match write {
            Write::Put { entity } => {
                self.check_put(entity)?;
                self.raw_put(entity.clone())
            }
            Write::Delete { key } => {
                self.check_delete(key)?;
                self.raw_remove(key)?
            }
        };
        if previous.is_some() || matches!(write, Write::Put { .. }) {
            *self.versions.entry(key.clone()).or_insert(0) += 1;
        }
        Ok(Undo {
            key,
            previous,
            version,
        })
    }

    pub(crate) fn undo(&mut self, undo: Undo) {
        match undo.previous {
            Some(entity) => {
                self.raw_put(entity);
            }
            None => {
                let _ = self.raw_remove(&undo.key);
            }
        }
        match undo.version {
            Some(v) => {
                self.versions.insert(undo.key, v);
            }
            None => {
                self.versions.remove(&undo.key);
            }
        }
    }

    fn raw_put(&mut self, entity: Entity) -> Option<Entity> {
        match entity {
            Entity::Campus(v) => self.campuses.insert(v.id, v).map(Entity::Campus),
            Entity::Location(v) => self.locations.insert(v.id, v).map(Entity::Location),
            Entity::Taxonomy(v) => self.taxonomy.insert(v.id, v).map(Entity::Taxonomy),
            Entity::Item(v) => {
                let previous = self.items.insert(v.id, v.clone());
                if let Some(old) = &previous {
                    self.barcodes.remove(&old.barcode);
                }
                self.barcodes.insert(v.barcode.clone(), v.id);
                previous.map(Entity::Item)
            }
            Entity::Transfer(v) => self.transfers.insert(v.id, v).map(Entity::Transfer),
            Entity::Repair(v) => self.repairs.insert(v.id, v).map(Entity::Repair),
            Entity::StatusChange(v) => self.status_changes.insert(v.id, v).map(Entity::StatusChange),
            Entity::Finding(v) => self.findings.insert(v.id, v).map(Entity::Finding),
            Entity::User(v) => self.users.insert(v.id, v).map(Entity::User),
            Entity::Session(v) => self.sessions.insert(v.token_digest.clone(), v).map(Entity::Session),
        }
    }

    fn raw_remove(&mut self, key: &EntityKey) -> Result<Option<Entity>> {
        let removed = match key.kind {
            EntityKind::Campus => self.campuses.remove(&parse_id(key)?).map(Entity::Campus),
            EntityKind::Location => self.locations.remove(&parse_id(key)?).map(Entity::Location),
            EntityKind::Taxonomy => self.taxonomy.remove(&parse_id(key)?).map(Entity::Taxonomy),
            EntityKind::Item => {
                let removed = self.items.remove(&parse_id(key)?);
                if let Some(item) = &removed {
                    self.barcodes.remove(&item.barcode);
                }
                removed.map(Entity::Item)
            }
            EntityKind::Transfer => self.transfers.remove(&parse_id(key)?).map(Entity::Transfer),
            EntityKind::Repair => self.repairs.remove(&parse_id(key)?).map(Entity::Repair),
            EntityKind::StatusChange => self.status_changes.remove(&parse_id(key)?).map(Entity::StatusChange),
            EntityKind::Finding => self.findings.remove(&parse_id(key)?).map(Entity::Finding),
            EntityKind::User => self.users.remove(&parse_id(key)?).map(Entity::User),
            EntityKind::Session => self.sessions.remove(&key.id).map(Entity::Session),
            EntityKind::Batch => None,
        };
        Ok(removed)
    }

    fn check_put(&self, entity: &Entity) -> Result<()> {
        let violation = |msg: String| Err(Error::ConstraintViolation(msg));
        match entity {
            Entity::Campus(c) => {
                if c.code.trim().is_empty() {
                    return violation("campus code is empty".into());
                }
                if self.campuses.values().any(|o| o.id != c.id && o.code == c.code) {
                    return violation(format!("campus code {} is not unique", c.code));
                }
            }
            Entity::Location(l) => {
                if l.floor < 1 {
                    return violation("floor must be at least 1".into());
                }
                if !self.campuses.contains_key(&l.campus_id) {
                    return violation(format!("location {} names a missing campus", l.code));
                }
                if self
                    .locations
                    .values()
                    .any(|o| o.id != l.id && o.campus_id == l.campus_id && o.code == l.code)
                {
                    return violation(format!("location code {} is not unique in its campus", l.code));
                }
            }
            Entity::Taxonomy(t) => {
                if self
                    .taxonomy
                    .values()
                    .any(|o| o.id != t.id && o.kind == t.kind && o.code == t.code)
                {
                    return violation(format!("{} code {} is not unique", t.kind, t.code));
                }
            }
            Entity::Item(item) => {
                if let Some(other) = self.barcodes.get(&item.barcode) {
                    if *other != item.id {
                        return violation(format!("barcode {} is not unique", item.barcode));
                    }
                }
                if !self.locations.contains_key(&item.location_id) {
                    return violation(format!("item {} has an unresolved location", item.barcode));
                }
                let kinds = [
                    TaxonomyKind::Category,
                    TaxonomyKind::Type,
                    TaxonomyKind::Brand,
                    TaxonomyKind::Source,
                ];
                for (id, kind) in item.taxonomy_ids().into_iter().zip(kinds) {
                    match self.taxonomy.get(&id) {
                        Some(t) if t.kind == kind => {}
                        _ => return violation(format!("item {} has an unresolved {kind}", item.barcode)),
                    }
                }
                if let Some(end) = item.warranty_end_date {
                    if end < item.purchase_date {
                        return violation(format!("item {} warranty ends before purchase", item.barcode));
                    }
                }
            }
            Entity::Transfer(t) => {
                if t.from_location_id == t.to_location_id {
                    return violation("transfer source equals target".into());
                }
                if !self.items.contains_key(&t.item_id)
                    || !self.locations.contains_key(&t.from_location_id)
                    || !self.locations.contains_key(&t.to_location_id)
                {
                    return violation("transfer references a missing item or location".into());
                }
            }
            Entity::Repair(r) => {
                if !self.items.contains_key(&r.item_id) {
                    return violation("repair references a missing item".into());
                }
                if let Some(done) = r.completed_date {
                    if done < r.opened_date {
                        return violation("repair completed before it was opened".into());
                    }
                }
                if r.completed_date.is_none()
                    && self
                        .repairs
                        .values()
                        .any(|o| o.id != r.id && o.item_id == r.item_id && o.completed_date.is_none())
                {
                    return violation(format!("item {} already has an open repair", r.barcode));
                }
            }
            Entity::StatusChange(s) => {
                if !self.items.contains_key(&s.item_id) {
                    return violation("status change references a missing item".into());
                }
                match next_condition(s.from, s.event) {
                    Ok(to) if to == s.to => {}
                    _ => return violation(format!("status change {} -> {} via {} is illegal", s.from, s.to, s.event)),
                }
            }
            Entity::Finding(f) => {
                if f.finding.trim().is_empty() {
                    return violation("finding text is empty".into());
                }
                if !self.locations.contains_key(&f.location_id) {
                    return violation("finding references a missing location".into());
                }
                if let Some(item_id) = f.item_id {
                    if !self.items.contains_key(&item_id) {
                        return violation("finding references a missing item".into());
                    }
                }
                match (f.status, f.resolution_date) {
                    (FindingStatus::Resolved, Some(done)) if done >= f.date => {}
                    (FindingStatus::Resolved, _) => {
                        return violation("resolved finding needs a resolution date on or after its date".into())
                    }
                    (_, Some(_)) => return violation("only resolved findings carry a resolution date".into()),
                    (_, None) => {}
                }
            }
            Entity::User(u) => {
                if self.users.values().any(|o| o.id != u.id && o.username == u.username) {
                    return violation(format!("username {} is not unique", u.username));
                }
                if let Some(missing) = u.assigned_locations.iter().find(|l| !self.locations.contains_key(l)) {
                    return violation(format!("user {} is assigned to missing location {missing}", u.username));
                }
            }
            Entity::Session(s) => {
                if !self.users.contains_key(&s.user_id) {
                    return violation("session for a missing user".into());
                }
                if s.expires_at <= s.issued_at {
                    return violation("session expires before it is issued".into());
                }
            }
        }
        Ok(())
    }

    fn check_delete(&self, key: &EntityKey) -> Result<()> {
        let in_use = |what: &str| Err(Error::ConstraintViolation(format!("{key} is still cited by {what}")));
        match key.kind {
            EntityKind::Campus => {
                let id: CampusId = parse_id(key)?;
                if self.locations.values().any(|l| l.campus_id == id) {
                    return in_use("a location");
                }
            }
            EntityKind::Location => {
                let id: LocationId = parse_id(key)?;
                if self.items.values().any(|i| i.location_id == id) {
                    return in_use("an item");
                }
                if self.findings.values().any(|f| f.location_id == id) {
                    return in_use("a monitoring record");
                }
                if self
                    .transfers
                    .values()
                    .any(|t| t.from_location_id == id || t.to_location_id == id)
                {
                    return in_use("a transfer");
                }
                if self.users.values().any(|u| u.assigned_locations.contains(&id)) {
                    return in_use("a user");
                }
            }
            EntityKind::Taxonomy => {
                let id: TaxonomyId = parse_id(key)?;
                if self.items.values().any(|i| i.taxonomy_ids().contains(&id)) {
                    return in_use("an item");
                }
            }
            EntityKind::Session => {}
            _ => {
                return Err(Error::ConstraintViolation(format!(
                    "{} entities are never deleted",
                    key.kind
                )))
            }
        }
        Ok(())
    }
}
