//! Transfers, condition changes, repairs, and warranty/maintenance queries.

use chrono::{Duration, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::auth::{Actor, Permission};
use crate::domain::{
    next_condition, warranty_status, Barcode, Condition, Item, ItemId, LifecycleEvent, LocationId,
    RepairId, StatusChangeId, TransferId, WarrantyStatus,
};
use crate::error::{Error, Result};
use crate::registry::LocationAddress;
use crate::service::Facilities;
use crate::storage::{AuditDraft, Changeset, Entity, EntityKey, EntityKind, Expect, State};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub id: TransferId,
    pub barcode: Barcode,
    pub item_id: ItemId,
    pub from_location_id: LocationId,
    pub to_location_id: LocationId,
    pub date: NaiveDate,
    pub actor: String,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub id: RepairId,
    pub barcode: Barcode,
    pub item_id: ItemId,
    pub opened_date: NaiveDate,
    pub completed_date: Option<NaiveDate>,
    pub description: String,
    pub cost: Option<Decimal>,
    pub actor: String,
    pub completed_by: Option<String>,
}

impl RepairRecord {
    pub fn is_open(&self) -> bool {
        self.completed_date.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub id: StatusChangeId,
    pub barcode: Barcode,
    pub item_id: ItemId,
    pub event: LifecycleEvent,
    pub from: Condition,
    pub to: Condition,
    pub date: NaiveDate,
    pub actor: String,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarrantyEntry {
    pub item: Item,
    pub status: WarrantyStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarrantyReport {
    pub as_of: Option<NaiveDate>,
    pub in_warranty: Vec<InWarranty>,
    pub expired: Vec<Expired>,
    pub none: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InWarranty {
    pub item: Item,
    pub days_remaining: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expired {
    pub item: Item,
    pub days_since: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaintenanceDue {
    pub item: Item,
    pub due_date: NaiveDate,
    pub days_overdue: u32,
}

fn note(text: Option<String>) -> Option<String> {
    text.map(|t| t.trim().to_string()).filter(|t| !t.is_empty())
}

/// Last date an item was serviced: its latest completed repair, else its purchase.
pub fn maintenance_anchor(state: &State, item: &Item) -> NaiveDate {
    state
        .repairs
        .values()
        .filter(|r| r.item_id == item.id)
        .filter_map(|r| r.completed_date)
        .max()
        .unwrap_or(item.purchase_date)
}

pub(crate) fn warranty_report_in(state: &State, as_of: NaiveDate) -> WarrantyReport {
    let mut report = WarrantyReport {
        as_of: Some(as_of),
        ..Default::default()
    };
    let mut items: Vec<&Item> = state.items.values().filter(|i| !i.condition.is_terminal()).collect();
    items.sort_by(|a, b| a.barcode.cmp(&b.barcode));
    for item in items {
        match warranty_status(item.warranty_end_date, as_of) {
            WarrantyStatus::None => report.none.push(item.clone()),
            WarrantyStatus::InWarranty { days_remaining } => report.in_warranty.push(InWarranty {
                item: item.clone(),
                days_remaining,
            }),
            WarrantyStatus::Expired { days_since } => report.expired.push(Expired {
                item: item.clone(),
                days_since,
            }),
        }
    }
    report
}

pub(crate) fn maintenance_due_in(state: &State, as_of: NaiveDate) -> Vec<MaintenanceDue> {
    let mut due: Vec<MaintenanceDue> = state
        .items
        .values()
        .filter(|i| !i.condition.is_terminal())
        .filter_map(|item| {
            let interval = item.maintenance_interval_days?;
            let due_date = maintenance_anchor(state, item) + Duration::days(interval.into());
            (due_date <= as_of).then(|| MaintenanceDue {
                item: item.clone(),
                due_date,
                days_overdue: (as_of - due_date).num_days() as u32,
            })
        })
        .collect();
    due.sort_by(|a, b| {
        b.days_overdue
            .cmp(&a.days_overdue)
            .then_with(|| a.item.barcode.cmp(&b.item.barcode))
    });
    due
}

fn check_version(item: &Item, current: u64, expected: Option<u64>) -> Result<u64> {
    match expected {
        Some(v) if v != current => Err(Error::Conflict(format!("item {} is at version {current}, not {v}", item.barcode))),
        Some(v) => Ok(v),
        None => Ok(current),
    }
}

impl Facilities {
    fn operable_item(&self, barcode: &str) -> Result<(Item, u64)> {
        let (item, version) = self.item_with_version(barcode)?;
        if item.condition.is_terminal() {
            return Err(Error::TerminalItem(item.barcode.to_string()));
        }
        Ok((item, version))
    }

    /// Moves an item to another room.
    pub fn transfer_item(
        &self,
        barcode: &str,
        to: &LocationAddress,
        date: NaiveDate,
        note_text: Option<String>,
        actor: &Actor,
    ) -> Result<TransferRecord> {
        self.transfer_item_if(barcode, to, date, note_text, None, actor)
    }

    /// [`Facilities::transfer_item`], failing with `CONFLICT` unless the item
    /// is still at version `expected`.
    pub fn transfer_item_if(
        &self,
        barcode: &str,
        to: &LocationAddress,
        date: NaiveDate,
        note_text: Option<String>,
        expected: Option<u64>,
        actor: &Actor,
    ) -> Result<TransferRecord> {
        actor.require(Permission::ItemTransfer)?;
        let (mut item, version) = self.operable_item(barcode)?;
        let version = check_version(&item, version, expected)?;
        let target = self.store.read(|s| to.resolve(s).map(|l| l.id))?;
        if target == item.location_id {
            return Err(Error::SameLocation);
        }
        let record = TransferRecord {
            id: TransferId::new(),
            barcode: item.barcode.clone(),
            item_id: item.id,
            from_location_id: item.location_id,
            to_location_id: target,
            date,
            actor: actor.audit_id(),
            note: note(note_text),
        };
        item.location_id = target;
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::ItemTransfer.key(),
                EntityKind::Item,
                item.id,
            ))
            .expect(EntityKey::new(EntityKind::Item, item.id), Expect::Version(version))
            .put(Entity::Item(item))
            .put(Entity::Transfer(record.clone())),
        )?;
        Ok(record)
    }

    /// Applies a lifecycle event to an item's condition.
    pub fn change_status(
        &self,
        barcode: &str,
        event: LifecycleEvent,
        date: NaiveDate,
        note_text: Option<String>,
        actor: &Actor,
    ) -> Result<StatusChange> {
        self.change_status_if(barcode, event, date, note_text, None, actor)
    }

    pub fn change_status_if(
        &self,
        barcode: &str,
        event: LifecycleEvent,
        date: NaiveDate,
        note_text: Option<String>,
        expected: Option<u64>,
        actor: &Actor,
    ) -> Result<StatusChange> {
        actor.require(Permission::ItemStatus)?;
        let (mut item, version) = self.item_with_version(barcode)?;
        let version = check_version(&item, version, expected)?;
        let to = next_condition(item.condition, event)?;
        let change = StatusChange {
            id: StatusChangeId::new(),
            barcode: item.barcode.clone(),
            item_id: item.id,
            event,
            from: item.condition,
            to,
            date,
            actor: actor.audit_id(),
            note: note(note_text),
        };
        item.condition = to;
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::ItemStatus.key(),
                EntityKind::Item,
                item.id,
            ))
            .expect(EntityKey::new(EntityKind::Item, item.id), Expect::Version(version))
            .put(Entity::Item(item))
            .put(Entity::StatusChange(change.clone())),
        )?;
        Ok(change)
    }

    pub fn open_repair(
        &self,
        barcode: &str,
        opened: NaiveDate,
        description: &str,
        actor: &Actor,
    ) -> Result<RepairRecord> {
        actor.require(Permission::ItemRepair)?;
        let (item, version) = self.operable_item(barcode)?;
        if !item.condition.is_damaged() {
            return Err(Error::NotDamaged(item.barcode.to_string()));
        }
        let already_open = self
            .store
            .read(|s| s.repairs.values().any(|r| r.item_id == item.id && r.is_open()));
        if already_open {
            return Err(Error::RepairAlreadyOpen(item.barcode.to_string()));
        }
        let repair = RepairRecord {
            id: RepairId::new(),
            barcode: item.barcode.clone(),
            item_id: item.id,
            opened_date: opened,
            completed_date: None,
            description: crate::domain::required_text(description, "description")?,
            cost: None,
            actor: actor.audit_id(),
            completed_by: None,
        };
        // The item version guards against a concurrent second open.
        self.store
            .commit(
                Changeset::new(AuditDraft::new(
                    actor.audit_id(),
                    Permission::ItemRepair.key(),
                    EntityKind::Repair,
                    repair.id,
                ))
                .expect(EntityKey::new(EntityKind::Item, item.id), Expect::Version(version))
                .put(Entity::Item(item.clone()))
                .put(Entity::Repair(repair.clone())),
            )
            .map_err(|e| match e {
                Error::ConstraintViolation(msg) if msg.contains("open repair") => {
                    Error::RepairAlreadyOpen(item.barcode.to_string())
                }
                other => other,
            })?;
        Ok(repair)
    }

    /// Closes a repair and returns the item to GOOD in the same commit.
    pub fn complete_repair(
        &self,
        repair_id: RepairId,
        completed: NaiveDate,
        cost: Option<Decimal>,
        actor: &Actor,
    ) -> Result<RepairRecord> {
        actor.require(Permission::ItemRepair)?;
        if cost.is_some_and(|c| c.is_sign_negative()) {
            return Err(Error::InvalidInput("cost must not be negative".into()));
        }
        let (mut repair, mut item, repair_version, item_version) = self.store.read(|s| {
            let repair = s
                .repairs
                .get(&repair_id)
                .cloned()
                .ok_or_else(|| Error::UnknownRepair(repair_id.to_string()))?;
            let item = s
                .items
                .get(&repair.item_id)
                .cloned()
                .ok_or_else(|| Error::UnknownItem(repair.barcode.to_string()))?;
            let rv = s.version(&EntityKey::new(EntityKind::Repair, repair.id));
            let iv = s.version(&EntityKey::new(EntityKind::Item, item.id));
            Ok::<_, Error>((repair, item, rv, iv))
        })?;
        if !repair.is_open() {
            return Err(Error::AlreadyCompleted(repair_id.to_string()));
        }
        if completed < repair.opened_date {
            return Err(Error::InvalidDateOrder);
        }
        let to = next_condition(item.condition, LifecycleEvent::RepairComplete)?;
        let change = StatusChange {
            id: StatusChangeId::new(),
            barcode: item.barcode.clone(),
            item_id: item.id,
            event: LifecycleEvent::RepairComplete,
            from: item.condition,
            to,
            date: completed,
            actor: actor.audit_id(),
            note: Some(format!("repair {} completed", repair.id)),
        };
        repair.completed_date = Some(completed);
        repair.cost = cost;
        repair.completed_by = Some(actor.audit_id());
        item.condition = to;
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::ItemRepair.key(),
                EntityKind::Repair,
                repair.id,
            ))
            .expect(EntityKey::new(EntityKind::Repair, repair.id), Expect::Version(repair_version))
            .expect(EntityKey::new(EntityKind::Item, item.id), Expect::Version(item_version))
            .put(Entity::Repair(repair.clone()))
            .put(Entity::Item(item))
            .put(Entity::StatusChange(change)),
        )?;
        Ok(repair)
    }

    pub fn repairs_for(&self, barcode: &str) -> Result<Vec<RepairRecord>> {
        let item = self.get_item(barcode)?;
        Ok(self.store.read(|s| {
            let mut v: Vec<_> = s.repairs.values().filter(|r| r.item_id == item.id).cloned().collect();
            v.sort_by_key(|r| (r.opened_date, r.id));
            v
        }))
    }

    pub fn transfers_for(&self, barcode: &str) -> Result<Vec<TransferRecord>> {
        let item = self.get_item(barcode)?;
        Ok(self.store.read(|s| {
            s.transfers
                .values()
                .filter(|t| t.item_id == item.id)
                .cloned()
                .collect()
        }))
    }

    pub fn status_history(&self, barcode: &str) -> Result<Vec<StatusChange>> {
        let item = self.get_item(barcode)?;
        Ok(self.store.read(|s| {
            s.status_changes
                .values()
                .filter(|c| c.item_id == item.id)
                .cloned()
                .collect()
        }))
    }

    /// Non-terminal items bucketed by warranty standing on `as_of`.
    pub fn warranty_report(&self, as_of: NaiveDate) -> WarrantyReport {
        self.store.read(|s| warranty_report_in(s, as_of))
    }

    /// Items whose maintenance interval has elapsed by `as_of`, most overdue first.
    pub fn maintenance_due(&self, as_of: NaiveDate) -> Vec<MaintenanceDue> {
        self.store.read(|s| maintenance_due_in(s, as_of))
    }
}
