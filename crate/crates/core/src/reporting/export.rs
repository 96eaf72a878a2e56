use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::summary_in;
use crate::auth::{Actor, Permission};
use crate::domain::Period;
use crate::error::{Error, Result};
use crate::monitoring::{list_records_in, RecordFilter};
use crate::registry::{item_row, list_items_in, ItemFilter, ITEM_CSV_HEADER};
use crate::storage::State;

pub const MONITORING_CSV_HEADER: [&str; 10] = [
    "id",
    "barcode",
    "object_name",
    "date",
    "location_code",
    "finding",
    "recommendation",
    "status",
    "resolution_date",
    "reporter",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Items,
    Monitoring,
    Summary,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Items, Dataset::Monitoring, Dataset::Summary];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Items => "items",
            Dataset::Monitoring => "monitoring",
            Dataset::Summary => "summary",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown dataset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportRequest {
    pub dataset: Dataset,
    pub items: ItemFilter,
    pub records: RecordFilter,
    /// Required for the summary sheet.
    pub period: Option<Period>,
    pub as_of: Option<NaiveDate>,
}

impl ExportRequest {
    pub fn new(dataset: Dataset) -> Self {
        ExportRequest {
            dataset,
            items: ItemFilter::default(),
            records: RecordFilter::default(),
            period: None,
            as_of: None,
        }
    }
}

/// One CSV rendering of committed state.
pub trait Exporter: Send + Sync {
    fn name(&self) -> &'static str;
    fn permission(&self) -> Permission;
    fn export(&self, state: &State, request: &ExportRequest, actor: &Actor) -> Result<Vec<u8>>;
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

struct ItemsCsv;

impl Exporter for ItemsCsv {
    fn name(&self) -> &'static str {
        "items"
    }

    fn permission(&self) -> Permission {
        Permission::ItemRead
    }

    fn export(&self, state: &State, request: &ExportRequest, actor: &Actor) -> Result<Vec<u8>> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(ITEM_CSV_HEADER)?;
        for item in list_items_in(state, &request.items) {
            if !actor.sees_location(item.location_id) {
                continue;
            }
            out.write_record(item_row(state, &item))?;
        }
        finish(out)
    }
}

struct MonitoringCsv;

impl Exporter for MonitoringCsv {
    fn name(&self) -> &'static str {
        "monitoring"
    }

    fn permission(&self) -> Permission {
        Permission::FindingReadOwn
    }

    fn export(&self, state: &State, request: &ExportRequest, actor: &Actor) -> Result<Vec<u8>> {
        let mut records = list_records_in(state, &request.records, actor)?;
        records.sort_by_key(|r| r.id);
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(MONITORING_CSV_HEADER)?;
        for r in records {
            let location = state.locations.get(&r.location_id).map(|l| l.code.clone()).unwrap_or_default();
            out.write_record([
                r.id.to_string(),
                r.barcode.map(|b| b.to_string()).unwrap_or_default(),
                r.object_name,
                r.date.to_string(),
                location,
                r.finding,
                r.recommendation,
                r.status.to_string(),
                r.resolution_date.map(|d| d.to_string()).unwrap_or_default(),
                r.reporter,
            ])?;
        }
        finish(out)
    }
}

struct SummaryCsv;

impl Exporter for SummaryCsv {
    fn name(&self) -> &'static str {
        "summary"
    }

    fn permission(&self) -> Permission {
        Permission::ReportRead
    }

    fn export(&self, state: &State, request: &ExportRequest, _actor: &Actor) -> Result<Vec<u8>> {
        let period = request
            .period
            .ok_or_else(|| Error::InvalidInput("summary export needs a period".into()))?;
        let report = summary_in(state, period, request.as_of.unwrap_or(period.to))?;
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["metric", "value"])?;
        for (metric, value) in report.metrics() {
            out.write_record([metric, value])?;
        }
        finish(out)
    }
}

/// Exporters by dataset name.
pub struct ExporterRegistry {
    exporters: BTreeMap<&'static str, Box<dyn Exporter>>,
}

impl ExporterRegistry {
    pub fn empty() -> Self {
        ExporterRegistry {
            exporters: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, exporter: Box<dyn Exporter>) {
        self.exporters.insert(exporter.name(), exporter);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.exporters.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Exporter> {
        self.exporters
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "exporter",
                name: name.to_string(),
            })
    }
}

impl Default for ExporterRegistry {
    fn default() -> Self {
        let mut registry = ExporterRegistry::empty();
        registry.register(Box::new(ItemsCsv));
        registry.register(Box::new(MonitoringCsv));
        registry.register(Box::new(SummaryCsv));
        registry
    }
}
