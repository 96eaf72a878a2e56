//! HTTP interface over the facilities service.

pub mod config;
pub mod error;
pub mod handlers;
pub mod routes;
pub mod server;

pub use config::{Config, ServeError};
pub use error::{status_for, ApiError, ApiResult};
pub use routes::{route_table, router, Access, AppState, Caller, RouteSpec, ROUTES};
pub use server::{app_state, open_service, serve, serve_on};

#[doc(hidden)]
pub mod testing;
