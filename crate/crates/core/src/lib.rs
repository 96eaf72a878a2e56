//! Campus facilities monitoring: reference data, item registry, condition
//! lifecycle, findings workflow, reports, and the durable store underneath.

pub mod auth;
pub mod clock;
pub mod domain;
pub mod error;
pub mod lifecycle;
pub mod monitoring;
pub mod registry;
pub mod reporting;
pub mod service;
pub mod storage;

#[doc(hidden)]
pub mod testing;

pub use auth::{Actor, Permission, Principal};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Error, Result};
pub use service::{Facilities, Settings};
pub use storage::Store;
