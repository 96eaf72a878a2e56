use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Multipart, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Extension;
use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use facmon_core::auth::{granted, NewUser, Principal};
use facmon_core::domain::{Condition, LifecycleEvent, Period, PhotoView, RecordId, RepairId};
use facmon_core::monitoring::{FindingInput, FindingStatus, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt, LocationAddress, ReferenceKind, ReferencePayload};
use facmon_core::reporting::{Dataset, ExportRequest};
use facmon_core::{Error, Facilities, Permission};

use crate::error::{ApiError, ApiResult};
use crate::routes::{AppState, Caller};

pub const DEFAULT_LIMIT: usize = 100;

/// JSON body extractor whose rejections use the API error shape.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Json<T>(pub T);

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct Q<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct P<T>(pub T);

/// Runs a service call off the async executor; hashing and fsync block.
async fn call<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Facilities) -> facmon_core::Result<T> + Send + 'static,
{
    let svc: Arc<Facilities> = state.svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::new("SERVER_ERROR", e.to_string()))?
        .map_err(ApiError::from)
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, axum::Json(value)).into_response()
}

#[derive(Debug, Default, Deserialize)]
pub struct Page {
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

/// One page of `all`, with the unpaged total in `X-Total-Count`.
fn paged<T: Serialize>(all: Vec<T>, limit: Option<usize>, offset: Option<usize>) -> Response {
    let total = all.len();
    let offset = offset.unwrap_or(0);
    let limit = limit.unwrap_or(DEFAULT_LIMIT);
    let page: Vec<T> = all.into_iter().skip(offset).take(limit).collect();
    let mut response = axum::Json(page).into_response();
    response
        .headers_mut()
        .insert("x-total-count", HeaderValue::from(total as u64));
    response
}

fn today(state: &AppState) -> NaiveDate {
    state.svc.clock().today()
}

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> ApiResult<T> {
    raw.parse()
        .map_err(|_| ApiError::new(&format!("UNKNOWN_{}", what.to_uppercase()), format!("no {what} {raw}")))
}

// --- session ---------------------------------------------------------------

pub async fn health(State(state): State<AppState>) -> Response {
    match state.svc.store().health() {
        Ok(()) => Json(json!({ "status": "ok" })).into_response(),
        Err(e) => (
            StatusCode::SERVICE_UNAVAILABLE,
            axum::Json(json!({ "status": "unavailable", "message": e.to_string() })),
        )
            .into_response(),
    }
}

#[derive(Deserialize)]
pub struct LoginBody {
    pub username: String,
    pub password: String,
}

pub async fn login(State(state): State<AppState>, Json(body): Json<LoginBody>) -> ApiResult<Response> {
    let session = call(&state, move |svc| svc.authenticate(&body.username, &body.password)).await?;
    Ok(Json(session).into_response())
}

pub async fn logout(State(state): State<AppState>, Extension(caller): Extension<Caller>) -> ApiResult<StatusCode> {
    call(&state, move |svc| svc.end_session(&caller.token)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Serialize, Deserialize)]
pub struct Me {
    #[serde(flatten)]
    pub principal: Principal,
    pub permissions: Vec<Permission>,
}

pub async fn me(Extension(caller): Extension<Caller>) -> ApiResult<Json<Me>> {
    let principal = caller
        .actor
        .principal()
        .cloned()
        .ok_or_else(|| ApiError::new("UNAUTHENTICATED", "no user session"))?;
    Ok(Json(Me {
        permissions: granted(principal.role),
        principal,
    }))
}

// --- references ------------------------------------------------------------

fn collection(segment: &str) -> ApiResult<ReferenceKind> {
    ReferenceKind::from_collection(segment)
        .ok_or_else(|| ApiError::new("NOT_FOUND", format!("no reference collection {segment:?}")))
}

/// Builds a payload for `kind`, filling the discriminator from the path.
fn reference_payload(kind: ReferenceKind, mut body: Value) -> ApiResult<ReferencePayload> {
    let tag = match kind.taxonomy() {
        Some(t) => t.as_str().to_string(),
        None => serde_json::to_value(kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    };
    let Some(fields) = body.as_object_mut() else {
        return Err(ApiError::invalid("expected a JSON object"));
    };
    match fields.get("kind").and_then(Value::as_str) {
        Some(given) if given != tag => {
            return Err(ApiError::invalid(format!("kind {given:?} does not belong in {}", kind.collection())))
        }
        _ => {
            fields.insert("kind".into(), Value::String(tag));
        }
    }
    serde_json::from_value(body).map_err(|e| ApiError::invalid(e.to_string()))
}

pub async fn list_references(
    State(state): State<AppState>,
    P(segment): P<String>,
    Q(page): Q<Page>,
) -> ApiResult<Response> {
    let kind = collection(&segment)?;
    let all = call(&state, move |svc| Ok(svc.list_references(kind))).await?;
    Ok(paged(all, page.limit, page.offset))
}

pub async fn create_reference(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(segment): P<String>,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let payload = reference_payload(collection(&segment)?, body)?;
    let reference = call(&state, move |svc| svc.create_reference(payload, &caller.actor)).await?;
    Ok(created(reference))
}

pub async fn upsert_reference(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(segment): P<String>,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let payload = reference_payload(collection(&segment)?, body)?;
    let reference = call(&state, move |svc| svc.upsert_reference(payload, &caller.actor)).await?;
    Ok(Json(reference).into_response())
}

pub async fn remove_reference(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P((segment, code)): P<(String, String)>,
) -> ApiResult<Response> {
    let kind = collection(&segment)?;
    let code = code.trim_start_matches('/').to_string();
    let outcome = call(&state, move |svc| svc.remove_reference(kind, &code, &caller.actor)).await?;
    Ok(Json(json!({ "outcome": outcome })).into_response())
}

// --- users -----------------------------------------------------------------

pub async fn list_users(State(state): State<AppState>, Q(page): Q<Page>) -> ApiResult<Response> {
    let users = call(&state, |svc| Ok(svc.list_users())).await?;
    Ok(paged(users, page.limit, page.offset))
}

pub async fn add_user(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Json(body): Json<NewUser>,
) -> ApiResult<Response> {
    let user = call(&state, move |svc| svc.add_user(body, &caller.actor)).await?;
    Ok(created(user))
}

async fn set_active(state: AppState, caller: Caller, username: String, active: bool) -> ApiResult<Response> {
    let user = call(&state, move |svc| svc.set_user_active(&username, active, &caller.actor)).await?;
    Ok(Json(user).into_response())
}

pub async fn deactivate_user(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(username): P<String>,
) -> ApiResult<Response> {
    set_active(state, caller, username, false).await
}

pub async fn activate_user(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(username): P<String>,
) -> ApiResult<Response> {
    set_active(state, caller, username, true).await
}

// --- items -----------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
pub struct ItemQuery {
    pub campus: Option<String>,
    pub location: Option<String>,
    pub category: Option<String>,
    pub condition: Option<Condition>,
    pub q: Option<String>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

impl ItemQuery {
    fn filter(&self) -> ItemFilter {
        ItemFilter {
            campus: self.campus.clone(),
            location: self.location.clone(),
            category: self.category.clone(),
            condition: self.condition,
            text: self.q.clone(),
        }
    }
}

pub async fn list_items(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<ItemQuery>,
) -> ApiResult<Response> {
    let filter = query.filter();
    let items = call(&state, move |svc| svc.items_for(&filter, &caller.actor)).await?;
    Ok(paged(items, query.limit, query.offset))
}

pub async fn register_item(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Json(receipt): Json<ItemReceipt>,
) -> ApiResult<Response> {
    let item = call(&state, move |svc| svc.register_item(receipt, &caller.actor)).await?;
    Ok(created(item))
}

pub async fn import_items(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    body: Bytes,
) -> ApiResult<Response> {
    let imported = call(&state, move |svc| svc.import_items_csv(body.as_ref(), &caller.actor)).await?;
    Ok(Json(json!({ "imported": imported })).into_response())
}

#[derive(Deserialize)]
pub struct BarcodeQuery {
    pub campus: String,
    pub category: String,
}

pub async fn next_barcode(State(state): State<AppState>, Q(query): Q<BarcodeQuery>) -> ApiResult<Response> {
    let barcode = call(&state, move |svc| svc.generate_barcode(&query.campus, &query.category)).await?;
    Ok(Json(json!({ "barcode": barcode })).into_response())
}

pub async fn get_item(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
) -> ApiResult<Response> {
    let (item, version) = call(&state, move |svc| svc.versioned_item_for(&barcode, &caller.actor)).await?;
    let mut response = Json(item).into_response();
    if let Ok(etag) = HeaderValue::from_str(&format!("\"{version}\"")) {
        response.headers_mut().insert(header::ETAG, etag);
    }
    Ok(response)
}

/// The entity version named by an `If-Match` header, if any.
fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    raw.to_str()
        .ok()
        .map(|v| v.trim().trim_start_matches("W/").trim_matches('"'))
        .and_then(|v| v.parse().ok())
        .map(Some)
        .ok_or_else(|| ApiError::invalid("If-Match must be an item version"))
}

pub async fn item_history(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
) -> ApiResult<Response> {
    let history = call(&state, move |svc| {
        svc.item_for(&barcode, &caller.actor)?;
        Ok(json!({
            "transfers": svc.transfers_for(&barcode)?,
            "status_changes": svc.status_history(&barcode)?,
            "repairs": svc.repairs_for(&barcode)?,
        }))
    })
    .await?;
    Ok(Json(history).into_response())
}

#[derive(Deserialize)]
pub struct TransferBody {
    pub to: LocationAddress,
    pub date: Option<NaiveDate>,
    pub note: Option<String>,
}

pub async fn transfer_item(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
    headers: HeaderMap,
    Json(body): Json<TransferBody>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let date = body.date.unwrap_or_else(|| today(&state));
    let record = call(&state, move |svc| {
        svc.transfer_item_if(&barcode, &body.to, date, body.note, expected, &caller.actor)
    })
    .await?;
    Ok(created(record))
}

#[derive(Deserialize)]
pub struct StatusBody {
    pub event: LifecycleEvent,
    pub date: Option<NaiveDate>,
    pub note: Option<String>,
}

pub async fn change_status(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
    headers: HeaderMap,
    Json(body): Json<StatusBody>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let date = body.date.unwrap_or_else(|| today(&state));
    let change = call(&state, move |svc| {
        svc.change_status_if(&barcode, body.event, date, body.note, expected, &caller.actor)
    })
    .await?;
    Ok(created(change))
}

struct Upload {
    view: PhotoView,
    bytes: Vec<u8>,
    media_type: String,
}

async fn read_upload(state: &AppState, mut multipart: Multipart) -> ApiResult<Upload> {
    let mut view = None;
    let mut file = None;
    let mut too_large = false;
    while let Some(mut field) = multipart.next_field().await? {
        match field.name() {
            Some("view") => {
                let text = field.text().await?;
                view = Some(text.parse::<PhotoView>().map_err(ApiError::from)?);
            }
            Some("file") => {
                let media_type = field.content_type().unwrap_or("application/octet-stream").to_string();
                let mut bytes = Vec::new();
                while let Some(chunk) = field.chunk().await? {
                    if bytes.len() + chunk.len() > state.max_upload_bytes {
                        too_large = true;
                        continue;
                    }
                    bytes.extend_from_slice(&chunk);
                }
                file = Some((bytes, media_type));
            }
            _ => {}
        }
    }
    // The body is read to the end first so the client sees the 413.
    if too_large {
        return Err(ApiError::too_large(state.max_upload_bytes));
    }
    let view = view.ok_or_else(|| ApiError::invalid("multipart field `view` is required"))?;
    let (bytes, media_type) = file.ok_or_else(|| ApiError::new("EMPTY_PAYLOAD", "multipart field `file` is required"))?;
    Ok(Upload { view, bytes, media_type })
}

pub async fn upload_item_photo(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
    multipart: Multipart,
) -> ApiResult<Response> {
    let upload = read_upload(&state, multipart).await?;
    let photo = call(&state, move |svc| {
        svc.attach_photo(&barcode, upload.view, &upload.bytes, &upload.media_type, &caller.actor)
    })
    .await?;
    Ok(created(photo))
}

pub async fn list_repairs(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
) -> ApiResult<Response> {
    let repairs = call(&state, move |svc| {
        svc.item_for(&barcode, &caller.actor)?;
        svc.repairs_for(&barcode)
    })
    .await?;
    Ok(Json(repairs).into_response())
}

#[derive(Deserialize)]
pub struct OpenRepairBody {
    pub opened_date: Option<NaiveDate>,
    pub description: String,
}

pub async fn open_repair(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(barcode): P<String>,
    Json(body): Json<OpenRepairBody>,
) -> ApiResult<Response> {
    let opened = body.opened_date.unwrap_or_else(|| today(&state));
    let repair = call(&state, move |svc| svc.open_repair(&barcode, opened, &body.description, &caller.actor)).await?;
    Ok(created(repair))
}

#[derive(Deserialize)]
pub struct CompleteRepairBody {
    pub completed_date: Option<NaiveDate>,
    #[serde(default)]
    pub cost: Option<Decimal>,
}

pub async fn complete_repair(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(id): P<String>,
    Json(body): Json<CompleteRepairBody>,
) -> ApiResult<Response> {
    let id: RepairId = parse_id(&id, "repair")?;
    let completed = body.completed_date.unwrap_or_else(|| today(&state));
    let repair = call(&state, move |svc| svc.complete_repair(id, completed, body.cost, &caller.actor)).await?;
    Ok(Json(repair).into_response())
}

// --- monitoring ------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
pub struct RecordQuery {
    pub status: Option<FindingStatus>,
    pub location: Option<String>,
    pub condition_of_item: Option<Condition>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub reporter: Option<String>,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

impl RecordQuery {
    fn filter(&self) -> RecordFilter {
        RecordFilter {
            status: self.status,
            location: self.location.clone(),
            condition_of_item: self.condition_of_item,
            from: self.from,
            to: self.to,
            reporter: self.reporter.clone(),
        }
    }
}

pub async fn list_records(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<RecordQuery>,
) -> ApiResult<Response> {
    let filter = query.filter();
    let records = call(&state, move |svc| svc.list_records(&filter, &caller.actor)).await?;
    Ok(paged(records, query.limit, query.offset))
}

pub async fn submit_finding(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Json(input): Json<FindingInput>,
) -> ApiResult<Response> {
    let record = call(&state, move |svc| svc.submit_finding(input, Vec::new(), &caller.actor)).await?;
    Ok(created(record))
}

pub async fn get_record(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(id): P<String>,
) -> ApiResult<Response> {
    let id: RecordId = parse_id(&id, "record")?;
    let record = call(&state, move |svc| svc.get_record(id, &caller.actor)).await?;
    Ok(Json(record).into_response())
}

#[derive(Deserialize)]
pub struct FollowUpBody {
    pub note: String,
}

pub async fn follow_up(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(id): P<String>,
    Json(body): Json<FollowUpBody>,
) -> ApiResult<Response> {
    let id: RecordId = parse_id(&id, "record")?;
    let record = call(&state, move |svc| svc.follow_up(id, &body.note, &caller.actor)).await?;
    Ok(Json(record).into_response())
}

#[derive(Deserialize)]
pub struct ResolveBody {
    pub resolution_date: NaiveDate,
}

pub async fn resolve(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(id): P<String>,
    Json(body): Json<ResolveBody>,
) -> ApiResult<Response> {
    let id: RecordId = parse_id(&id, "record")?;
    let record = call(&state, move |svc| svc.resolve(id, body.resolution_date, &caller.actor)).await?;
    Ok(Json(record).into_response())
}

pub async fn upload_record_photo(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    P(id): P<String>,
    multipart: Multipart,
) -> ApiResult<Response> {
    let id: RecordId = parse_id(&id, "record")?;
    let upload = read_upload(&state, multipart).await?;
    let photo = call(&state, move |svc| {
        svc.attach_finding_photo(id, upload.view, &upload.bytes, &upload.media_type, &caller.actor)
    })
    .await?;
    Ok(created(photo))
}

// --- reports ---------------------------------------------------------------

#[derive(Deserialize)]
pub struct SummaryQuery {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub as_of: Option<NaiveDate>,
}

fn period(from: NaiveDate, to: NaiveDate) -> ApiResult<Period> {
    Period::new(from, to).map_err(ApiError::from)
}

pub async fn summary(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<SummaryQuery>,
) -> ApiResult<Response> {
    let period = period(query.from, query.to)?;
    let as_of = query.as_of.unwrap_or(query.to);
    let report = call(&state, move |svc| svc.summary(period, as_of, &caller.actor)).await?;
    Ok(Json(report).into_response())
}

#[derive(Deserialize)]
pub struct ConditionQuery {
    pub condition: Condition,
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

pub async fn by_condition(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<ConditionQuery>,
) -> ApiResult<Response> {
    let condition = query.condition;
    let items = call(&state, move |svc| svc.condition_view(condition, &caller.actor)).await?;
    Ok(paged(items, query.limit, query.offset))
}

#[derive(Deserialize)]
pub struct LocationQuery {
    pub campus: String,
    pub location: String,
}

pub async fn by_location(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<LocationQuery>,
) -> ApiResult<Response> {
    let address = LocationAddress::new(query.campus, query.location);
    let view = call(&state, move |svc| svc.location_view(&address, &caller.actor)).await?;
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
pub struct AsOfQuery {
    pub as_of: Option<NaiveDate>,
}

pub async fn warranty(State(state): State<AppState>, Q(query): Q<AsOfQuery>) -> ApiResult<Response> {
    let as_of = query.as_of.unwrap_or_else(|| today(&state));
    let report = call(&state, move |svc| Ok(svc.warranty_report(as_of))).await?;
    Ok(Json(report).into_response())
}

pub async fn maintenance_due(State(state): State<AppState>, Q(query): Q<AsOfQuery>) -> ApiResult<Response> {
    let as_of = query.as_of.unwrap_or_else(|| today(&state));
    let due = call(&state, move |svc| Ok(svc.maintenance_due(as_of))).await?;
    Ok(Json(due).into_response())
}

// --- exports ---------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
pub struct ExportQuery {
    pub campus: Option<String>,
    pub location: Option<String>,
    pub category: Option<String>,
    pub condition: Option<Condition>,
    pub q: Option<String>,
    pub status: Option<FindingStatus>,
    pub condition_of_item: Option<Condition>,
    pub reporter: Option<String>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub as_of: Option<NaiveDate>,
}

async fn export(state: AppState, caller: Caller, dataset: Dataset, query: ExportQuery) -> ApiResult<Response> {
    let mut request = ExportRequest::new(dataset);
    match dataset {
        Dataset::Items => {
            request.items = ItemFilter {
                campus: query.campus,
                location: query.location,
                category: query.category,
                condition: query.condition,
                text: query.q,
            }
        }
        Dataset::Monitoring => {
            request.records = RecordFilter {
                status: query.status,
                location: query.location,
                condition_of_item: query.condition_of_item,
                from: query.from,
                to: query.to,
                reporter: query.reporter,
            }
        }
        Dataset::Summary => {
            let (Some(from), Some(to)) = (query.from, query.to) else {
                return Err(ApiError::invalid("summary export needs `from` and `to`"));
            };
            request.period = Some(period(from, to)?);
            request.as_of = query.as_of;
        }
    }
    let bytes = call(&state, move |svc| svc.export_csv(&request, &caller.actor)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8"));
    let disposition = format!("attachment; filename=\"{dataset}.csv\"");
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        headers.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok((headers, bytes).into_response())
}

pub async fn export_items(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<ExportQuery>,
) -> ApiResult<Response> {
    export(state, caller, Dataset::Items, query).await
}

pub async fn export_monitoring(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<ExportQuery>,
) -> ApiResult<Response> {
    export(state, caller, Dataset::Monitoring, query).await
}

pub async fn export_summary(
    State(state): State<AppState>,
    Extension(caller): Extension<Caller>,
    Q(query): Q<ExportQuery>,
) -> ApiResult<Response> {
    export(state, caller, Dataset::Summary, query).await
}

// --- photos and audit ------------------------------------------------------

pub async fn get_photo(State(state): State<AppState>, P(hash): P<String>) -> ApiResult<Response> {
    let (bytes, media_type) = call(&state, move |svc| {
        svc.get_photo(&hash).map_err(|e| match e {
            Error::InvalidInput(_) => Error::UnknownBlob(hash.clone()),
            other => other,
        })
    })
    .await?;
    let media_type = media_type.unwrap_or_else(|| "application/octet-stream".into());
    let value = HeaderValue::from_str(&media_type).unwrap_or(HeaderValue::from_static("application/octet-stream"));
    Ok(([(header::CONTENT_TYPE, value)], bytes).into_response())
}

#[derive(Deserialize)]
pub struct AuditQuery {
    pub from: Option<u64>,
    pub to: Option<u64>,
}

pub async fn audit(State(state): State<AppState>, Q(query): Q<AuditQuery>) -> ApiResult<Response> {
    let entries = call(&state, move |svc| {
        let store = svc.store();
        store.audit_range(query.from.unwrap_or(1), query.to.unwrap_or_else(|| store.last_seq().max(1)))
    })
    .await?;
    Ok(Json(entries).into_response())
}

/// Decodes a JSON response body; used by clients and tests.
pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> serde_json::Result<T> {
    serde_json::from_slice(bytes)
}

