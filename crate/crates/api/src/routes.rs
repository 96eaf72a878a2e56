//! The route table and the guard that enforces it.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, MatchedPath, Request, State};
use axum::http::{header, Method};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::Router;

use facmon_core::auth::allows;
use facmon_core::domain::Role;
use facmon_core::{Actor, Facilities, Permission};

use crate::error::ApiError;
use crate::handlers as h;

/// Who may call a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    /// Any signed-in user.
    Session,
    /// A signed-in user whose role holds at least one of these.
    AnyOf(&'static [Permission]),
}

impl Access {
    pub fn allows(self, role: Role) -> bool {
        match self {
            Access::Public | Access::Session => true,
            Access::AnyOf(perms) => perms.iter().any(|p| allows(role, *p)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RouteSpec {
    pub method: &'static str,
    pub path: &'static str,
    pub access: Access,
}

const fn route(method: &'static str, path: &'static str, access: Access) -> RouteSpec {
    RouteSpec { method, path, access }
}

const fn perm(p: &'static [Permission]) -> Access {
    Access::AnyOf(p)
}

use Permission as P;

const READ_FINDINGS: &[Permission] = &[P::FindingRead, P::FindingReadOwn];

pub const ROUTES: &[RouteSpec] = &[
    route("GET", "/healthz", Access::Public),
    route("POST", "/api/login", Access::Public),
    route("POST", "/api/logout", Access::Session),
    route("GET", "/api/me", Access::Session),
    route("GET", "/api/references/:collection", perm(&[P::ItemRead])),
    route("POST", "/api/references/:collection", perm(&[P::ReferenceWrite])),
    route("PUT", "/api/references/:collection", perm(&[P::ReferenceWrite])),
    route("DELETE", "/api/references/:collection/*code", perm(&[P::ReferenceWrite])),
    route("GET", "/api/users", perm(&[P::UserManage])),
    route("POST", "/api/users", perm(&[P::UserManage])),
    route("POST", "/api/users/:username/deactivate", perm(&[P::UserManage])),
    route("POST", "/api/users/:username/activate", perm(&[P::UserManage])),
    route("GET", "/api/items", perm(&[P::ItemRead])),
    route("POST", "/api/items", perm(&[P::ItemRegister])),
    route("POST", "/api/import/items", perm(&[P::ItemRegister])),
    route("GET", "/api/barcodes/next", perm(&[P::ItemRegister])),
    route("GET", "/api/items/:barcode", perm(&[P::ItemRead])),
    route("GET", "/api/items/:barcode/history", perm(&[P::ItemRead])),
    route("POST", "/api/items/:barcode/transfer", perm(&[P::ItemTransfer])),
    route("POST", "/api/items/:barcode/status", perm(&[P::ItemStatus])),
    route("POST", "/api/items/:barcode/photos", perm(&[P::PhotoUpload])),
    route("GET", "/api/items/:barcode/repairs", perm(&[P::ItemRead])),
    route("POST", "/api/items/:barcode/repairs", perm(&[P::ItemRepair])),
    route("POST", "/api/repairs/:id/complete", perm(&[P::ItemRepair])),
    route("GET", "/api/monitoring", perm(READ_FINDINGS)),
    route("POST", "/api/monitoring", perm(&[P::FindingSubmit])),
    route("GET", "/api/monitoring/:id", perm(READ_FINDINGS)),
    route("POST", "/api/monitoring/:id/follow-up", perm(&[P::FindingFollowUp])),
    route("POST", "/api/monitoring/:id/resolve", perm(&[P::FindingResolve])),
    route("POST", "/api/monitoring/:id/photos", perm(&[P::PhotoUpload])),
    route("GET", "/api/reports/summary", perm(&[P::ReportRead])),
    route("GET", "/api/reports/by-condition", perm(&[P::ItemRead])),
    route("GET", "/api/reports/by-location", perm(&[P::ItemRead])),
    route("GET", "/api/reports/warranty", perm(&[P::ReportRead])),
    route("GET", "/api/reports/maintenance-due", perm(&[P::ReportRead])),
    route("GET", "/api/export/items.csv", perm(&[P::ItemRead])),
    route("GET", "/api/export/monitoring.csv", perm(READ_FINDINGS)),
    route("GET", "/api/export/summary.csv", perm(&[P::ReportRead])),
    route("GET", "/api/photos/:hash", perm(&[P::ItemRead])),
    route("GET", "/api/audit", perm(&[P::UserManage])),
];

pub fn route_table() -> &'static [RouteSpec] {
    ROUTES
}

fn lookup(method: &Method, path: &str) -> Option<&'static RouteSpec> {
    ROUTES.iter().find(|r| r.method == method.as_str() && r.path == path)
}

#[derive(Clone)]
pub struct AppState {
    pub svc: Arc<Facilities>,
    pub max_upload_bytes: usize,
}

/// The authenticated caller, placed in request extensions by the guard.
#[derive(Debug, Clone)]
pub struct Caller {
    pub actor: Actor,
    pub token: String,
}

fn bearer(req: &Request) -> Option<String> {
    let value = req.headers().get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim().to_string())
}

async fn guard(State(state): State<AppState>, mut req: Request, next: Next) -> Response {
    let matched = req.extensions().get::<MatchedPath>().map(|m| m.as_str().to_owned());
    // A route missing from the table is refused rather than left open.
    let Some(spec) = matched.as_deref().and_then(|p| lookup(req.method(), p)) else {
        return ApiError::new("FORBIDDEN", "route has no access rule").into_response();
    };
    if spec.access == Access::Public {
        return next.run(req).await;
    }
    let Some(token) = bearer(&req) else {
        return ApiError::new("UNAUTHENTICATED", "missing bearer token").into_response();
    };
    let principal = match state.svc.resolve_session(&token) {
        Ok(p) => p,
        Err(e) => return ApiError::from(e).into_response(),
    };
    if !spec.access.allows(principal.role) {
        let mut denied = ApiError::new("FORBIDDEN", format!("{} may not {} {}", principal.role, spec.method, spec.path));
        denied.details = Some(serde_json::json!({ "method": spec.method, "route": spec.path }));
        return denied.into_response();
    }
    tracing::debug!(method = spec.method, route = spec.path, user = %principal.username, "authorized");
    req.extensions_mut().insert(Caller {
        actor: Actor::User(principal),
        token,
    });
    next.run(req).await
}

async fn not_found() -> ApiError {
    ApiError::new("NOT_FOUND", "no such route")
}

pub fn router(state: AppState) -> Router {
    // Oversized files are drained and refused by the handler up to twice the
    // limit; beyond that the connection is cut.
    let upload_limit = DefaultBodyLimit::max(state.max_upload_bytes.saturating_mul(2).saturating_add(64 * 1024));
    Router::new()
        .route("/healthz", get(h::health))
        .route("/api/login", post(h::login))
        .route("/api/logout", post(h::logout))
        .route("/api/me", get(h::me))
        .route(
            "/api/references/:collection",
            get(h::list_references).post(h::create_reference).put(h::upsert_reference),
        )
        .route("/api/references/:collection/*code", delete(h::remove_reference))
        .route("/api/users", get(h::list_users).post(h::add_user))
        .route("/api/users/:username/deactivate", post(h::deactivate_user))
        .route("/api/users/:username/activate", post(h::activate_user))
        .route("/api/items", get(h::list_items).post(h::register_item))
        .route("/api/import/items", post(h::import_items))
        .route("/api/barcodes/next", get(h::next_barcode))
        .route("/api/items/:barcode", get(h::get_item))
        .route("/api/items/:barcode/history", get(h::item_history))
        .route("/api/items/:barcode/transfer", post(h::transfer_item))
        .route("/api/items/:barcode/status", post(h::change_status))
        .route("/api/items/:barcode/photos", post(h::upload_item_photo).layer(upload_limit))
        .route("/api/items/:barcode/repairs", get(h::list_repairs).post(h::open_repair))
        .route("/api/repairs/:id/complete", post(h::complete_repair))
        .route("/api/monitoring", get(h::list_records).post(h::submit_finding))
        .route("/api/monitoring/:id", get(h::get_record))
        .route("/api/monitoring/:id/follow-up", post(h::follow_up))
        .route("/api/monitoring/:id/resolve", post(h::resolve))
        .route("/api/monitoring/:id/photos", post(h::upload_record_photo).layer(upload_limit))
        .route("/api/reports/summary", get(h::summary))
        .route("/api/reports/by-condition", get(h::by_condition))
        .route("/api/reports/by-location", get(h::by_location))
        .route("/api/reports/warranty", get(h::warranty))
        .route("/api/reports/maintenance-due", get(h::maintenance_due))
        .route("/api/export/items.csv", get(h::export_items))
        .route("/api/export/monitoring.csv", get(h::export_monitoring))
        .route("/api/export/summary.csv", get(h::export_summary))
        .route("/api/photos/:hash", get(h::get_photo))
        .route("/api/audit", get(h::audit))
        .route_layer(middleware::from_fn_with_state(state.clone(), guard))
        .fallback(not_found)
        .with_state(state)
}
