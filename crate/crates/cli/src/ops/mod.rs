//! What a command can ask of the system, independent of where it runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde_json::Value;

use facmon_core::auth::NewUser;
use facmon_core::domain::{Condition, LifecycleEvent};
use facmon_core::monitoring::{FindingInput, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt, LocationAddress};
use facmon_core::reporting::Dataset;

use crate::error::CliError;

pub mod embedded;
pub mod remote;

pub type Outcome = Result<Value, CliError>;

/// Connection settings shared by every mode.
#[derive(Debug, Clone, Default)]
pub struct Target {
    pub data_dir: PathBuf,
    pub remote: Option<String>,
    pub token: Option<String>,
    pub username: Option<String>,
    pub password: Option<String>,
}

/// Export parameters; the period applies to the summary sheet and the
/// monitoring date filter.
#[derive(Debug, Clone, Default)]
pub struct ExportArgs {
    pub items: ItemFilter,
    pub records: RecordFilter,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub as_of: Option<NaiveDate>,
}

pub trait Ops {
    fn seed(&self) -> Outcome;
    fn add_user(&self, user: NewUser) -> Outcome;
    fn list_users(&self) -> Outcome;
    fn set_user_active(&self, username: &str, active: bool) -> Outcome;

    fn import_items(&self, csv: Vec<u8>) -> Outcome;
    fn export(&self, dataset: Dataset, args: &ExportArgs) -> Result<Vec<u8>, CliError>;

    fn register_item(&self, receipt: ItemReceipt) -> Outcome;
    fn next_barcode(&self, campus: &str, category: &str) -> Result<String, CliError>;
    fn get_item(&self, barcode: &str) -> Outcome;
    fn list_items(&self, filter: &ItemFilter) -> Outcome;
    fn transfer(&self, barcode: &str, to: &LocationAddress, date: Option<NaiveDate>, note: Option<String>) -> Outcome;
    fn change_status(&self, barcode: &str, event: LifecycleEvent, date: Option<NaiveDate>, note: Option<String>) -> Outcome;
    fn open_repair(&self, barcode: &str, opened: Option<NaiveDate>, description: &str) -> Outcome;
    fn complete_repair(&self, id: &str, completed: Option<NaiveDate>, cost: Option<Decimal>) -> Outcome;

    fn submit_finding(&self, input: FindingInput) -> Outcome;
    fn follow_up(&self, id: &str, note: &str) -> Outcome;
    fn resolve(&self, id: &str, date: NaiveDate) -> Outcome;
    fn list_findings(&self, filter: &RecordFilter) -> Outcome;

    fn summary(&self, from: NaiveDate, to: NaiveDate, as_of: Option<NaiveDate>) -> Outcome;
    fn by_condition(&self, condition: Condition) -> Outcome;
    fn by_location(&self, location: &LocationAddress) -> Outcome;
    fn warranty(&self, as_of: Option<NaiveDate>) -> Outcome;
    fn maintenance_due(&self, as_of: Option<NaiveDate>) -> Outcome;
}

type Connect = fn(&Target) -> Result<Box<dyn Ops>, CliError>;

/// Ways to reach the system, by name.
pub struct ModeRegistry {
    modes: BTreeMap<&'static str, Connect>,
}

impl ModeRegistry {
    pub fn empty() -> Self {
        ModeRegistry { modes: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, connect: Connect) {
        self.modes.insert(name, connect);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.modes.keys().copied().collect()
    }

    pub fn connect(&self, name: &str, target: &Target) -> Result<Box<dyn Ops>, CliError> {
        let connect = self
            .modes
            .get(name)
            .ok_or_else(|| CliError::usage(format!("unknown mode {name:?}")))?;
        connect(target)
    }
}

impl Default for ModeRegistry {
    fn default() -> Self {
        let mut registry = ModeRegistry::empty();
        registry.register("embedded", |t| Ok(Box::new(embedded::Embedded::open(&t.data_dir)?)));
        registry.register("remote", |t| Ok(Box::new(remote::Remote::connect(t)?)));
        registry
    }
}

/// `CAMPUS/ROOM`, or just `ROOM` when the room code starts with its campus
/// code followed by a dot.
pub fn parse_location(raw: &str) -> Result<LocationAddress, CliError> {
    let raw = raw.trim();
    if let Some((campus, room)) = raw.split_once('/') {
        return Ok(LocationAddress::new(campus, room));
    }
    match raw.split_once('.') {
        Some((campus, _)) if !campus.is_empty() => Ok(LocationAddress::new(campus, raw)),
        _ => Err(CliError::usage(format!("location {raw:?} should be CAMPUS/ROOM"))),
    }
}
