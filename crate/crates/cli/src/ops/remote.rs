use chrono::NaiveDate;
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::Method;
use rust_decimal::Decimal;
use serde::Serialize;
use serde_json::{json, Value};

use facmon_api::ApiError;
use facmon_core::auth::NewUser;
use facmon_core::domain::{Condition, LifecycleEvent};
use facmon_core::monitoring::{FindingInput, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt, LocationAddress};
use facmon_core::reporting::Dataset;

use super::{ExportArgs, Ops, Outcome, Target};
use crate::error::CliError;

/// Talks to a running server over its HTTP API.
pub struct Remote {
    base: String,
    http: Client,
    token: String,
}

type Query = Vec<(&'static str, String)>;

fn push<T: ToString>(query: &mut Query, key: &'static str, value: &Option<T>) {
    if let Some(v) = value {
        query.push((key, v.to_string()));
    }
}

fn enum_text<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn item_query(filter: &ItemFilter) -> Query {
    let mut q = Query::new();
    push(&mut q, "campus", &filter.campus);
    push(&mut q, "location", &filter.location);
    push(&mut q, "category", &filter.category);
    push(&mut q, "condition", &filter.condition.as_ref().map(enum_text));
    push(&mut q, "q", &filter.text);
    q
}

fn record_query(filter: &RecordFilter) -> Query {
    let mut q = Query::new();
    push(&mut q, "status", &filter.status.as_ref().map(enum_text));
    push(&mut q, "location", &filter.location);
    push(&mut q, "condition_of_item", &filter.condition_of_item.as_ref().map(enum_text));
    push(&mut q, "from", &filter.from);
    push(&mut q, "to", &filter.to);
    push(&mut q, "reporter", &filter.reporter);
    q
}

fn check(request: RequestBuilder) -> Result<reqwest::blocking::Response, CliError> {
    let response = request.send()?;
    if response.status().is_success() {
        return Ok(response);
    }
    let status = response.status();
    let body = response.bytes()?;
    Err(match serde_json::from_slice::<ApiError>(&body) {
        Ok(e) => e.into(),
        Err(_) => CliError::new("REMOTE_ERROR", format!("{status}: {}", String::from_utf8_lossy(&body))),
    })
}

impl Remote {
    pub fn connect(target: &Target) -> Result<Remote, CliError> {
        let base = target
            .remote
            .as_deref()
            .ok_or_else(|| CliError::usage("remote mode needs --remote <url>"))?
            .trim_end_matches('/')
            .to_string();
        let http = Client::new();
        let token = match (&target.token, &target.username, &target.password) {
            (Some(token), _, _) => token.clone(),
            (None, Some(username), Some(password)) => {
                let response = check(
                    http.post(format!("{base}/api/login"))
                        .json(&json!({ "username": username, "password": password })),
                )?;
                let session: Value = response.json()?;
                session["token"]
                    .as_str()
                    .ok_or_else(|| CliError::new("REMOTE_ERROR", "login response has no token"))?
                    .to_string()
            }
            _ => return Err(CliError::usage("remote mode needs --token or --user with a password")),
        };
        Ok(Remote { base, http, token })
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{}", self.base, path))
            .bearer_auth(&self.token)
    }

    fn json(&self, request: RequestBuilder) -> Outcome {
        let response = check(request)?;
        let bytes = response.bytes()?;
        if bytes.is_empty() {
            return Ok(Value::Null);
        }
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn get(&self, path: &str, query: &Query) -> Outcome {
        self.json(self.request(Method::GET, path).query(query))
    }

    /// Every page of a paginated list.
    fn get_all(&self, path: &str, query: &Query) -> Outcome {
        const PAGE: usize = 500;
        let mut all = Vec::new();
        loop {
            let mut q = query.clone();
            q.push(("limit", PAGE.to_string()));
            q.push(("offset", all.len().to_string()));
            let page = self.get(path, &q)?;
            let rows = page.as_array().cloned().unwrap_or_default();
            let done = rows.len() < PAGE;
            all.extend(rows);
            if done {
                return Ok(Value::Array(all));
            }
        }
    }

    fn post(&self, path: &str, body: &impl Serialize) -> Outcome {
        self.json(self.request(Method::POST, path).json(body))
    }
}

fn date_field(date: Option<NaiveDate>) -> Value {
    date.map(|d| json!(d)).unwrap_or(Value::Null)
}

impl Ops for Remote {
    fn seed(&self) -> Outcome {
        Err(CliError::usage("seed runs against a local data directory only"))
    }

    fn add_user(&self, user: NewUser) -> Outcome {
        self.post("/api/users", &user)
    }

    fn list_users(&self) -> Outcome {
        self.get_all("/api/users", &Query::new())
    }

    fn set_user_active(&self, username: &str, active: bool) -> Outcome {
        let action = if active { "activate" } else { "deactivate" };
        self.post(&format!("/api/users/{username}/{action}"), &Value::Null)
    }

    fn import_items(&self, csv: Vec<u8>) -> Outcome {
        self.json(
            self.request(Method::POST, "/api/import/items")
                .header("content-type", "text/csv")
                .body(csv),
        )
    }

    fn export(&self, dataset: Dataset, args: &ExportArgs) -> Result<Vec<u8>, CliError> {
        let mut query = match dataset {
            Dataset::Items => item_query(&args.items),
            Dataset::Monitoring => record_query(&args.records),
            Dataset::Summary => Query::new(),
        };
        if dataset == Dataset::Summary {
            push(&mut query, "from", &args.from);
            push(&mut query, "to", &args.to);
            push(&mut query, "as_of", &args.as_of);
        }
        let response = check(self.request(Method::GET, &format!("/api/export/{dataset}.csv")).query(&query))?;
        Ok(response.bytes()?.to_vec())
    }

    fn register_item(&self, receipt: ItemReceipt) -> Outcome {
        self.post("/api/items", &receipt)
    }

    fn next_barcode(&self, campus: &str, category: &str) -> Result<String, CliError> {
        let query = vec![("campus", campus.to_string()), ("category", category.to_string())];
        let body = self.get("/api/barcodes/next", &query)?;
        Ok(body["barcode"].as_str().unwrap_or_default().to_string())
    }

    fn get_item(&self, barcode: &str) -> Outcome {
        self.get(&format!("/api/items/{barcode}"), &Query::new())
    }

    fn list_items(&self, filter: &ItemFilter) -> Outcome {
        self.get_all("/api/items", &item_query(filter))
    }

    fn transfer(&self, barcode: &str, to: &LocationAddress, date: Option<NaiveDate>, note: Option<String>) -> Outcome {
        self.post(
            &format!("/api/items/{barcode}/transfer"),
            &json!({ "to": to, "date": date_field(date), "note": note }),
        )
    }

    fn change_status(&self, barcode: &str, event: LifecycleEvent, date: Option<NaiveDate>, note: Option<String>) -> Outcome {
        self.post(
            &format!("/api/items/{barcode}/status"),
            &json!({ "event": event, "date": date_field(date), "note": note }),
        )
    }

    fn open_repair(&self, barcode: &str, opened: Option<NaiveDate>, description: &str) -> Outcome {
        self.post(
            &format!("/api/items/{barcode}/repairs"),
            &json!({ "opened_date": date_field(opened), "description": description }),
        )
    }

    fn complete_repair(&self, id: &str, completed: Option<NaiveDate>, cost: Option<Decimal>) -> Outcome {
        self.post(
            &format!("/api/repairs/{id}/complete"),
            &json!({ "completed_date": date_field(completed), "cost": cost }),
        )
    }

    fn submit_finding(&self, input: FindingInput) -> Outcome {
        self.post("/api/monitoring", &input)
    }

    fn follow_up(&self, id: &str, note: &str) -> Outcome {
        self.post(&format!("/api/monitoring/{id}/follow-up"), &json!({ "note": note }))
    }

    fn resolve(&self, id: &str, date: NaiveDate) -> Outcome {
        self.post(&format!("/api/monitoring/{id}/resolve"), &json!({ "resolution_date": date }))
    }

    fn list_findings(&self, filter: &RecordFilter) -> Outcome {
        self.get_all("/api/monitoring", &record_query(filter))
    }

    fn summary(&self, from: NaiveDate, to: NaiveDate, as_of: Option<NaiveDate>) -> Outcome {
        let mut query = vec![("from", from.to_string()), ("to", to.to_string())];
        push(&mut query, "as_of", &as_of);
        self.get("/api/reports/summary", &query)
    }

    fn by_condition(&self, condition: Condition) -> Outcome {
        self.get_all("/api/reports/by-condition", &vec![("condition", enum_text(&condition))])
    }

    fn by_location(&self, location: &LocationAddress) -> Outcome {
        let query = vec![
            ("campus", location.campus_code.clone()),
            ("location", location.location_code.clone()),
        ];
        self.get("/api/reports/by-location", &query)
    }

    fn warranty(&self, as_of: Option<NaiveDate>) -> Outcome {
        let mut query = Query::new();
        push(&mut query, "as_of", &as_of);
        self.get("/api/reports/warranty", &query)
    }

    fn maintenance_due(&self, as_of: Option<NaiveDate>) -> Outcome {
        let mut query = Query::new();
        push(&mut query, "as_of", &as_of);
        self.get("/api/reports/maintenance-due", &query)
    }
}
