//! Fixtures shared by unit tests here and integration tests in other crates.

use std::sync::Arc;

use chrono::{NaiveDate, TimeZone, Utc};

use crate::auth::password::PasswordConfig;
use crate::auth::Actor;
use crate::clock::{ManualClock, SystemClock};
use crate::registry::ItemReceipt;
use crate::service::{Facilities, Settings};
use crate::storage::Store;

/// Settings with cheap password hashing.
pub fn fast_settings() -> Settings {
    Settings {
        passwords: PasswordConfig::fast(),
        ..Settings::default()
    }
}

pub fn empty_service() -> Facilities {
    Facilities::new(Arc::new(Store::in_memory(Arc::new(SystemClock))), fast_settings()).unwrap()
}

/// Seeds the default categories and the demo campuses, rooms and taxonomies.
pub fn seed(svc: &Facilities) {
    svc.seed_default_categories(&Actor::System).unwrap();
    svc.seed_demo_references(&Actor::System).unwrap();
}

pub fn fixture_service() -> Facilities {
    let svc = empty_service();
    seed(&svc);
    svc
}

/// A seeded service whose clock starts at 2018-05-01 08:00 UTC.
pub fn manual_clock_service() -> (Facilities, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2018, 5, 1, 8, 0, 0).unwrap()));
    let svc = Facilities::new(Arc::new(Store::in_memory(clock.clone())), fast_settings()).unwrap();
    seed(&svc);
    (svc, clock)
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// A valid receipt for a laptop in `room`; the campus is the room's prefix.
pub fn receipt(barcode: &str, room: &str) -> ItemReceipt {
    ItemReceipt {
        barcode: barcode.into(),
        name: "Laptop".into(),
        specification: "Core i5, 8GB".into(),
        category_code: "C11".into(),
        type_code: "KMP".into(),
        brand_code: "LENOVO".into(),
        source_code: "BELI".into(),
        purchase_date: date("2018-01-01"),
        warranty_end_date: None,
        maintenance_interval_days: None,
        campus_code: room.split('.').next().unwrap_or(room).into(),
        location_code: room.into(),
        custodian: "Biro Umum".into(),
    }
}
