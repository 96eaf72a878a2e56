//! Findings: submission, follow-up, resolution and filtered listing.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::auth::{allows, Actor, Permission};
use crate::domain::{
    link_photo, required_text, Barcode, Condition, ItemId, LocationId, Period, PhotoRef, PhotoView, RecordId,
};
use crate::error::{Error, Result};
use crate::registry::LocationAddress;
use crate::service::Facilities;
use crate::storage::{AuditDraft, Changeset, Entity, EntityKey, EntityKind, Expect, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingStatus {
    Open,
    FollowUp,
    Resolved,
}

impl FindingStatus {
    pub const ALL: [FindingStatus; 3] = [FindingStatus::Open, FindingStatus::FollowUp, FindingStatus::Resolved];

    pub fn as_str(self) -> &'static str {
        match self {
            FindingStatus::Open => "OPEN",
            FindingStatus::FollowUp => "FOLLOW_UP",
            FindingStatus::Resolved => "RESOLVED",
        }
    }
}

impl fmt::Display for FindingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FindingStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        FindingStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown finding status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringRecord {
    pub id: RecordId,
    pub barcode: Option<Barcode>,
    pub item_id: Option<ItemId>,
    pub object_name: String,
    pub object_description: Option<String>,
    pub date: NaiveDate,
    pub location_id: LocationId,
    pub finding: String,
    pub recommendation: String,
    /// User id of the submitter, or `system`.
    pub reporter: String,
    pub status: FindingStatus,
    pub follow_up_note: Option<String>,
    pub resolution_date: Option<NaiveDate>,
    #[serde(default)]
    pub photos: Vec<PhotoRef>,
}

/// A photo supplied with a submission.
#[derive(Debug, Clone)]
pub struct PhotoUpload {
    pub view: PhotoView,
    pub bytes: Vec<u8>,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingInput {
    #[serde(default)]
    pub barcode: Option<String>,
    #[serde(default)]
    pub object_name: Option<String>,
    #[serde(default)]
    pub object_description: Option<String>,
    pub date: NaiveDate,
    /// Required for global findings; defaults to the item's room otherwise.
    #[serde(default)]
    pub location: Option<LocationAddress>,
    pub finding: String,
    #[serde(default)]
    pub recommendation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub status: Option<FindingStatus>,
    /// Room code, e.g. `B.201`.
    pub location: Option<String>,
    pub condition_of_item: Option<Condition>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub reporter: Option<String>,
}

impl RecordFilter {
    pub fn period(&self) -> Result<Option<Period>> {
        match (self.from, self.to) {
            (Some(from), Some(to)) => Period::new(from, to).map(Some),
            (Some(from), None) => Ok(Some(Period { from, to: NaiveDate::MAX })),
            (None, Some(to)) => Ok(Some(Period { from: NaiveDate::MIN, to })),
            (None, None) => Ok(None),
        }
    }

    fn matches(&self, state: &State, period: Option<Period>, record: &MonitoringRecord) -> bool {
        if self.status.is_some_and(|s| s != record.status) {
            return false;
        }
        if let Some(code) = &self.location {
            if state.locations.get(&record.location_id).map(|l| l.code.as_str()) != Some(code.trim()) {
                return false;
            }
        }
        if let Some(condition) = self.condition_of_item {
            let current = record.item_id.and_then(|id| state.items.get(&id)).map(|i| i.condition);
            if current != Some(condition) {
                return false;
            }
        }
        if period.is_some_and(|p| !p.contains(record.date)) {
            return false;
        }
        if let Some(reporter) = &self.reporter {
            if record.reporter != reporter.trim() {
                return false;
            }
        }
        true
    }
}

/// Whether `actor` may see `record`. Work units see their own submissions and
/// anything filed at a room they are assigned to.
pub fn visible_to(actor: &Actor, record: &MonitoringRecord) -> bool {
    let role = actor.role();
    if allows(role, Permission::FindingRead) {
        return true;
    }
    if !allows(role, Permission::FindingReadOwn) {
        return false;
    }
    actor.principal().is_some_and(|p| {
        record.reporter == p.id.to_string() || p.assigned_locations.contains(&record.location_id)
    })
}

fn can_read(actor: &Actor) -> Result<()> {
    let role = actor.role();
    if allows(role, Permission::FindingRead) || allows(role, Permission::FindingReadOwn) {
        Ok(())
    } else {
        Err(Error::Forbidden(role.to_string()))
    }
}

/// Filtered records, newest first, ties broken by id.
pub(crate) fn list_records_in(state: &State, filter: &RecordFilter, actor: &Actor) -> Result<Vec<MonitoringRecord>> {
    let period = filter.period()?;
    let mut records: Vec<MonitoringRecord> = state
        .findings
        .values()
        .filter(|r| visible_to(actor, r) && filter.matches(state, period, r))
        .cloned()
        .collect();
    records.sort_by(|a, b| b.date.cmp(&a.date).then_with(|| a.id.cmp(&b.id)));
    Ok(records)
}

fn optional_text(value: Option<String>) -> Option<String> {
    value.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

impl Facilities {
    pub fn submit_finding(
        &self,
        input: FindingInput,
        photos: Vec<PhotoUpload>,
        actor: &Actor,
    ) -> Result<MonitoringRecord> {
        actor.require(Permission::FindingSubmit)?;
        if input.finding.trim().is_empty() {
            return Err(Error::EmptyFinding);
        }
        let item = match optional_text(input.barcode.clone()) {
            Some(code) => Some(self.get_item(&code)?),
            None => None,
        };
        let location_id = self.store.read(|s| match (&input.location, &item) {
            (Some(address), _) => address.resolve(s).map(|l| l.id),
            (None, Some(item)) => Ok(item.location_id),
            (None, None) => Err(Error::UnknownLocation("location is required".into())),
        })?;
        let object_name = match (optional_text(input.object_name), &item) {
            (Some(name), _) => name,
            (None, Some(item)) => item.name.clone(),
            (None, None) => required_text("", "object_name")?,
        };
        let mut stored = Vec::with_capacity(photos.len());
        for upload in &photos {
            stored.push(self.store_photo(upload.view, &upload.bytes, &upload.media_type)?);
        }
        let mut record = MonitoringRecord {
            id: RecordId::new(),
            barcode: item.as_ref().map(|i| i.barcode.clone()),
            item_id: item.as_ref().map(|i| i.id),
            object_name,
            object_description: optional_text(input.object_description),
            date: input.date,
            location_id,
            finding: input.finding.trim().to_string(),
            recommendation: input.recommendation.trim().to_string(),
            reporter: actor.audit_id(),
            status: FindingStatus::Open,
            follow_up_note: None,
            resolution_date: None,
            photos: Vec::new(),
        };
        for photo in stored {
            link_photo(&mut record.photos, photo);
        }
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::FindingSubmit.key(),
                EntityKind::Finding,
                record.id,
            ))
            .expect(EntityKey::new(EntityKind::Finding, record.id), Expect::Absent)
            .put(Entity::Finding(record.clone())),
        )?;
        Ok(record)
    }

    fn record_with_version(&self, id: RecordId) -> Result<(MonitoringRecord, u64)> {
        self.store.read(|s| {
            let record = s
                .findings
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::UnknownRecord(id.to_string()))?;
            let version = s.version(&EntityKey::new(EntityKind::Finding, id));
            Ok((record, version))
        })
    }

    fn save_record(&self, record: &MonitoringRecord, version: u64, action: Permission, actor: &Actor) -> Result<()> {
        self.store.commit(
            Changeset::new(AuditDraft::new(actor.audit_id(), action.key(), EntityKind::Finding, record.id))
                .expect(EntityKey::new(EntityKind::Finding, record.id), Expect::Version(version))
                .put(Entity::Finding(record.clone())),
        )?;
        Ok(())
    }

    pub fn follow_up(&self, id: RecordId, note: &str, actor: &Actor) -> Result<MonitoringRecord> {
        actor.require(Permission::FindingFollowUp)?;
        let (mut record, version) = self.record_with_version(id)?;
        if record.status != FindingStatus::Open {
            return Err(Error::WrongState(record.status.to_string()));
        }
        record.status = FindingStatus::FollowUp;
        record.follow_up_note = Some(required_text(note, "note")?);
        self.save_record(&record, version, Permission::FindingFollowUp, actor)?;
        Ok(record)
    }

    pub fn resolve(&self, id: RecordId, resolution_date: NaiveDate, actor: &Actor) -> Result<MonitoringRecord> {
        actor.require(Permission::FindingResolve)?;
        let (mut record, version) = self.record_with_version(id)?;
        if record.status == FindingStatus::Resolved {
            return Err(Error::WrongState(record.status.to_string()));
        }
        if resolution_date < record.date {
            return Err(Error::InvalidDateOrder);
        }
        record.status = FindingStatus::Resolved;
        record.resolution_date = Some(resolution_date);
        self.save_record(&record, version, Permission::FindingResolve, actor)?;
        Ok(record)
    }

    pub fn get_record(&self, id: RecordId, actor: &Actor) -> Result<MonitoringRecord> {
        can_read(actor)?;
        let (record, _) = self.record_with_version(id)?;
        if !visible_to(actor, &record) {
            // Indistinguishable from a missing record.
            return Err(Error::UnknownRecord(id.to_string()));
        }
        Ok(record)
    }

    pub fn list_records(&self, filter: &RecordFilter, actor: &Actor) -> Result<Vec<MonitoringRecord>> {
        can_read(actor)?;
        self.store.read(|s| list_records_in(s, filter, actor))
    }

    /// Adds a photo to a finding. Work units may only add to records they can see.
    pub fn attach_finding_photo(
        &self,
        id: RecordId,
        view: PhotoView,
        bytes: &[u8],
        media_type: &str,
        actor: &Actor,
    ) -> Result<PhotoRef> {
        actor.require(Permission::PhotoUpload)?;
        let (mut record, version) = self.record_with_version(id)?;
        if !visible_to(actor, &record) {
            return Err(Error::UnknownRecord(id.to_string()));
        }
        let photo = self.store_photo(view, bytes, media_type)?;
        link_photo(&mut record.photos, photo.clone());
        self.save_record(&record, version, Permission::PhotoUpload, actor)?;
        Ok(photo)
    }
}
