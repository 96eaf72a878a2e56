//! Renders command results for stdout.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::CliError;

pub trait Formatter {
    fn name(&self) -> &'static str;
    fn render(&self, value: &Value) -> Result<String, CliError>;
}

fn cell(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(_) | Value::Number(_) => value.to_string(),
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            items.iter().map(cell).collect::<Vec<_>>().join(";")
        }
        other => other.to_string(),
    }
}

/// Header and rows for a value: a list of objects becomes one row each, a
/// single object becomes `field,value` pairs.
fn tabulate(value: &Value) -> (Vec<String>, Vec<Vec<String>>) {
    match value {
        Value::Array(rows) if rows.iter().all(Value::is_object) && !rows.is_empty() => {
            let mut header: Vec<String> = Vec::new();
            for row in rows {
                for key in row.as_object().into_iter().flat_map(|o| o.keys()) {
                    if !header.contains(key) {
                        header.push(key.clone());
                    }
                }
            }
            let body = rows
                .iter()
                .map(|row| header.iter().map(|k| cell(&row[k])).collect())
                .collect();
            (header, body)
        }
        Value::Array(rows) => (vec!["value".into()], rows.iter().map(|v| vec![cell(v)]).collect()),
        Value::Object(fields) => (
            vec!["field".into(), "value".into()],
            fields.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
        ),
        scalar => (vec!["value".into()], vec![vec![cell(scalar)]]),
    }
}

struct Json;

impl Formatter for Json {
    fn name(&self) -> &'static str {
        "json"
    }

    fn render(&self, value: &Value) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(value)? + "\n")
    }
}

struct Table;

impl Formatter for Table {
    fn name(&self) -> &'static str {
        "table"
    }

    fn render(&self, value: &Value) -> Result<String, CliError> {
        let (header, rows) = tabulate(value);
        if rows.is_empty() {
            return Ok("(none)\n".into());
        }
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}", w = *w))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&header);
        out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
        for row in &rows {
            out += &line(row);
        }
        Ok(out)
    }
}

struct Csv;

impl Formatter for Csv {
    fn name(&self) -> &'static str {
        "csv"
    }

    fn render(&self, value: &Value) -> Result<String, CliError> {
        let (header, rows) = tabulate(value);
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::new("SERIALIZATION_ERROR", e.to_string());
        writer.write_record(&header).map_err(csv_err)?;
        for row in rows {
            writer.write_record(&row).map_err(csv_err)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::new("SERIALIZATION_ERROR", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::new("SERIALIZATION_ERROR", e.to_string()))
    }
}

pub struct FormatterRegistry {
    formatters: BTreeMap<&'static str, Box<dyn Formatter>>,
}

impl FormatterRegistry {
    pub fn empty() -> Self {
        FormatterRegistry {
            formatters: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, formatter: Box<dyn Formatter>) {
        self.formatters.insert(formatter.name(), formatter);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.formatters.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Formatter, CliError> {
        self.formatters
            .get(name)
            .map(|f| f.as_ref())
            .ok_or_else(|| CliError::usage(format!("unknown output format {name:?}; expected one of {:?}", self.names())))
    }
}

impl Default for FormatterRegistry {
    fn default() -> Self {
        let mut registry = FormatterRegistry::empty();
        registry.register(Box::new(Table));
        registry.register(Box::new(Json));
        registry.register(Box::new(Csv));
        registry
    }
}
