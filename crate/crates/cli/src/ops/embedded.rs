use std::path::Path;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::Serialize;
use serde_json::json;

use facmon_api::{open_service, Config};
use facmon_core::auth::NewUser;
use facmon_core::domain::{Condition, LifecycleEvent, Period};
use facmon_core::monitoring::{FindingInput, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt, LocationAddress};
use facmon_core::reporting::{Dataset, ExportRequest};
use facmon_core::{Actor, Facilities};

use super::{ExportArgs, Ops, Outcome};
use crate::error::CliError;

/// Runs against the data directory in-process, as the local operator.
/// Holds the directory's exclusive lock for its lifetime.
pub struct Embedded {
    svc: Facilities,
    actor: Actor,
}

fn value<T: Serialize>(result: facmon_core::Result<T>) -> Outcome {
    Ok(serde_json::to_value(result?)?)
}

fn parse<T: std::str::FromStr<Err = facmon_core::Error>>(raw: &str) -> Result<T, CliError> {
    Ok(raw.parse()?)
}

impl Embedded {
    pub fn open(data_dir: &Path) -> Result<Embedded, CliError> {
        let config = Config {
            data_dir: data_dir.to_path_buf(),
            ..Config::default()
        };
        Ok(Embedded {
            svc: open_service(&config)?,
            actor: Actor::System,
        })
    }

    fn today(&self) -> NaiveDate {
        self.svc.clock().today()
    }
}

impl Ops for Embedded {
    fn seed(&self) -> Outcome {
        let categories = self.svc.seed_default_categories(&self.actor)?;
        let references = self.svc.seed_demo_references(&self.actor)?;
        Ok(json!({ "categories": categories.len(), "demo_references": references }))
    }

    fn add_user(&self, user: NewUser) -> Outcome {
        value(self.svc.add_user(user, &self.actor))
    }

    fn list_users(&self) -> Outcome {
        value(Ok(self.svc.list_users()))
    }

    fn set_user_active(&self, username: &str, active: bool) -> Outcome {
        value(self.svc.set_user_active(username, active, &self.actor))
    }

    fn import_items(&self, csv: Vec<u8>) -> Outcome {
        let imported = self.svc.import_items_csv(csv.as_slice(), &self.actor)?;
        Ok(json!({ "imported": imported }))
    }

    fn export(&self, dataset: Dataset, args: &ExportArgs) -> Result<Vec<u8>, CliError> {
        let mut request = ExportRequest::new(dataset);
        request.items = args.items.clone();
        request.records = args.records.clone();
        request.as_of = args.as_of;
        if let (Some(from), Some(to)) = (args.from, args.to) {
            request.period = Some(Period::new(from, to)?);
        }
        Ok(self.svc.export_csv(&request, &self.actor)?)
    }

    fn register_item(&self, receipt: ItemReceipt) -> Outcome {
        value(self.svc.register_item(receipt, &self.actor))
    }

    fn next_barcode(&self, campus: &str, category: &str) -> Result<String, CliError> {
        Ok(self.svc.generate_barcode(campus, category)?)
    }

    fn get_item(&self, barcode: &str) -> Outcome {
        value(self.svc.item_for(barcode, &self.actor))
    }

    fn list_items(&self, filter: &ItemFilter) -> Outcome {
        value(self.svc.items_for(filter, &self.actor))
    }

    fn transfer(&self, barcode: &str, to: &LocationAddress, date: Option<NaiveDate>, note: Option<String>) -> Outcome {
        let date = date.unwrap_or_else(|| self.today());
        value(self.svc.transfer_item(barcode, to, date, note, &self.actor))
    }

    fn change_status(&self, barcode: &str, event: LifecycleEvent, date: Option<NaiveDate>, note: Option<String>) -> Outcome {
        let date = date.unwrap_or_else(|| self.today());
        value(self.svc.change_status(barcode, event, date, note, &self.actor))
    }

    fn open_repair(&self, barcode: &str, opened: Option<NaiveDate>, description: &str) -> Outcome {
        let opened = opened.unwrap_or_else(|| self.today());
        value(self.svc.open_repair(barcode, opened, description, &self.actor))
    }

    fn complete_repair(&self, id: &str, completed: Option<NaiveDate>, cost: Option<Decimal>) -> Outcome {
        let completed = completed.unwrap_or_else(|| self.today());
        value(self.svc.complete_repair(parse(id)?, completed, cost, &self.actor))
    }

    fn submit_finding(&self, input: FindingInput) -> Outcome {
        value(self.svc.submit_finding(input, Vec::new(), &self.actor))
    }

    fn follow_up(&self, id: &str, note: &str) -> Outcome {
        value(self.svc.follow_up(parse(id)?, note, &self.actor))
    }

    fn resolve(&self, id: &str, date: NaiveDate) -> Outcome {
        value(self.svc.resolve(parse(id)?, date, &self.actor))
    }

    fn list_findings(&self, filter: &RecordFilter) -> Outcome {
        value(self.svc.list_records(filter, &self.actor))
    }

    fn summary(&self, from: NaiveDate, to: NaiveDate, as_of: Option<NaiveDate>) -> Outcome {
        let period = Period::new(from, to)?;
        value(self.svc.summary(period, as_of.unwrap_or(to), &self.actor))
    }

    fn by_condition(&self, condition: Condition) -> Outcome {
        value(self.svc.condition_view(condition, &self.actor))
    }

    fn by_location(&self, location: &LocationAddress) -> Outcome {
        value(self.svc.location_view(location, &self.actor))
    }

    fn warranty(&self, as_of: Option<NaiveDate>) -> Outcome {
        value(Ok(self.svc.warranty_report(as_of.unwrap_or_else(|| self.today()))))
    }

    fn maintenance_due(&self, as_of: Option<NaiveDate>) -> Outcome {
        value(Ok(self.svc.maintenance_due(as_of.unwrap_or_else(|| self.today()))))
    }
}
