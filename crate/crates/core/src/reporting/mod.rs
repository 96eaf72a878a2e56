//! Aggregated views and the periodic summary.

mod export;

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

pub use export::{Dataset, ExportRequest, Exporter, ExporterRegistry, MONITORING_CSV_HEADER};

use crate::auth::{Actor, Permission};
use crate::domain::{Condition, Item, Period, TaxonomyKind};
use crate::error::{Error, Result};
use crate::monitoring::{list_records_in, FindingStatus, MonitoringRecord, RecordFilter};
use crate::registry::LocationAddress;
use crate::service::Facilities;
use crate::storage::State;

pub const WARRANTY_HORIZON_DAYS: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub period: Period,
    pub as_of: NaiveDate,
    pub items_total: u64,
    pub items_by_condition: BTreeMap<Condition, u64>,
    pub items_by_campus: BTreeMap<String, u64>,
    pub items_by_category: BTreeMap<String, u64>,
    pub findings_opened: u64,
    pub findings_resolved: u64,
    pub findings_open_at_end: u64,
    #[serde(with = "rust_decimal::serde::float_option")]
    pub mean_resolution_days: Option<Decimal>,
    pub warranty_expiring_within_30_days: u64,
}

impl SummaryReport {
    /// `metric,value` rows in a fixed order.
    pub fn metrics(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("period_from".to_string(), self.period.from.to_string()),
            ("period_to".to_string(), self.period.to.to_string()),
            ("as_of".to_string(), self.as_of.to_string()),
            ("items_total".to_string(), self.items_total.to_string()),
        ];
        rows.extend(
            self.items_by_condition
                .iter()
                .map(|(c, n)| (format!("items_by_condition.{c}"), n.to_string())),
        );
        rows.extend(
            self.items_by_campus
                .iter()
                .map(|(c, n)| (format!("items_by_campus.{c}"), n.to_string())),
        );
        rows.extend(
            self.items_by_category
                .iter()
                .map(|(c, n)| (format!("items_by_category.{c}"), n.to_string())),
        );
        rows.extend([
            ("findings_opened".to_string(), self.findings_opened.to_string()),
            ("findings_resolved".to_string(), self.findings_resolved.to_string()),
            ("findings_open_at_end".to_string(), self.findings_open_at_end.to_string()),
            (
                "mean_resolution_days".to_string(),
                self.mean_resolution_days.map(|d| d.to_string()).unwrap_or_default(),
            ),
            (
                "warranty_expiring_within_30_days".to_string(),
                self.warranty_expiring_within_30_days.to_string(),
            ),
        ]);
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationView {
    pub location: LocationAddress,
    pub items: Vec<Item>,
    pub open_findings: Vec<MonitoringRecord>,
}

pub(crate) fn summary_in(state: &State, period: Period, as_of: NaiveDate) -> Result<SummaryReport> {
    if as_of < period.to {
        return Err(Error::InvalidPeriod);
    }
    let mut by_condition: BTreeMap<Condition, u64> = Condition::ALL.iter().map(|c| (*c, 0)).collect();
    let mut by_campus: BTreeMap<String, u64> = state.campuses.values().map(|c| (c.code.clone(), 0)).collect();
    let mut by_category: BTreeMap<String, u64> = state
        .taxonomy
        .values()
        .filter(|t| t.kind == TaxonomyKind::Category)
        .map(|t| (t.code.clone(), 0))
        .collect();
    let horizon = as_of + Duration::days(WARRANTY_HORIZON_DAYS);
    let mut expiring = 0;
    for item in state.items.values() {
        *by_condition.entry(item.condition).or_default() += 1;
        if let Some(campus) = state
            .locations
            .get(&item.location_id)
            .and_then(|l| state.campuses.get(&l.campus_id))
        {
            *by_campus.entry(campus.code.clone()).or_default() += 1;
        }
        if let Some(category) = state.taxonomy.get(&item.category_id) {
            *by_category.entry(category.code.clone()).or_default() += 1;
        }
        if !item.condition.is_terminal() && item.warranty_end_date.is_some_and(|end| as_of <= end && end <= horizon) {
            expiring += 1;
        }
    }

    let mut opened = 0;
    let mut resolved = 0;
    let mut opened_by_end = 0u64;
    let mut resolved_by_end = 0u64;
    let mut latency_total = 0i64;
    for record in state.findings.values() {
        if period.contains(record.date) {
            opened += 1;
        }
        if record.date <= period.to {
            opened_by_end += 1;
        }
        if let (FindingStatus::Resolved, Some(done)) = (record.status, record.resolution_date) {
            if done <= period.to {
                resolved_by_end += 1;
            }
            if period.contains(done) {
                resolved += 1;
                latency_total += (done - record.date).num_days();
            }
        }
    }
    let mean = (resolved > 0).then(|| (Decimal::from(latency_total) / Decimal::from(resolved)).round_dp(2));

    Ok(SummaryReport {
        period,
        as_of,
        items_total: state.items.len() as u64,
        items_by_condition: by_condition,
        items_by_campus: by_campus,
        items_by_category: by_category,
        findings_opened: opened,
        findings_resolved: resolved,
        findings_open_at_end: opened_by_end.saturating_sub(resolved_by_end),
        mean_resolution_days: mean,
        warranty_expiring_within_30_days: expiring,
    })
}

pub(crate) fn condition_view_in(state: &State, condition: Condition) -> Vec<Item> {
    let mut items: Vec<Item> = state.items.values().filter(|i| i.condition == condition).cloned().collect();
    items.sort_by(|a, b| a.barcode.cmp(&b.barcode));
    items
}

impl Facilities {
    pub fn summary(&self, period: Period, as_of: NaiveDate, actor: &Actor) -> Result<SummaryReport> {
        actor.require(Permission::ReportRead)?;
        self.store.read(|s| summary_in(s, period, as_of))
    }

    /// Items currently in `condition`, by barcode.
    pub fn condition_view(&self, condition: Condition, actor: &Actor) -> Result<Vec<Item>> {
        actor.require(Permission::ItemRead)?;
        let mut items = self.store.read(|s| condition_view_in(s, condition));
        items.retain(|i| actor.sees_location(i.location_id));
        Ok(items)
    }

    /// What is in a room now, and which of its findings are still unresolved.
    pub fn location_view(&self, location: &LocationAddress, actor: &Actor) -> Result<LocationView> {
        actor.require(Permission::ItemRead)?;
        self.store.read(|s| {
            let room = location.resolve(s)?;
            if !actor.sees_location(room.id) {
                return Err(Error::Forbidden(actor.role().to_string()));
            }
            let mut items: Vec<Item> = s.items.values().filter(|i| i.location_id == room.id).cloned().collect();
            items.sort_by(|a, b| a.barcode.cmp(&b.barcode));
            let visible = list_records_in(s, &RecordFilter::default(), actor).unwrap_or_default();
            let open_findings = visible
                .into_iter()
                .filter(|r| r.location_id == room.id && r.status != FindingStatus::Resolved)
                .collect();
            let campus = s.campuses.get(&room.campus_id).map(|c| c.code.clone()).unwrap_or_default();
            Ok(LocationView {
                location: LocationAddress::new(campus, room.code.clone()),
                items,
                open_findings,
            })
        })
    }

    /// Renders `request` with the exporter registered under its dataset name.
    pub fn export_csv(&self, request: &ExportRequest, actor: &Actor) -> Result<Vec<u8>> {
        self.export_with(&ExporterRegistry::default(), request, actor)
    }

    pub fn export_with(&self, registry: &ExporterRegistry, request: &ExportRequest, actor: &Actor) -> Result<Vec<u8>> {
        let exporter = registry.get(request.dataset.as_str())?;
        actor.require(exporter.permission())?;
        self.store.read(|s| exporter.export(s, request, actor))
    }
}
