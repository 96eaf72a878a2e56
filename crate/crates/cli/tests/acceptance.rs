//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed or the whole run took too long.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::time::{Duration as Elapsed, Instant};

use chrono::{Datelike, Duration, NaiveDate};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reqwest::blocking::multipart::{Form, Part};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::{Method, StatusCode};
use rust_decimal::Decimal;
use serde_json::{json, Value};
use tracing_subscriber::filter::LevelFilter;

use facmon_api::testing::TestServer;
use facmon_api::{open_service, Access, Config, ROUTES};
use facmon_core::auth::password::PasswordConfig;
use facmon_core::auth::NewUser;
use facmon_core::domain::{next_condition, Condition, Item, LifecycleEvent, Period, RecordId, RepairId, Role};
use facmon_core::monitoring::{FindingInput, FindingStatus, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt, LocationAddress, Reference, ReferenceKind};
use facmon_core::reporting::SummaryReport;
use facmon_core::storage::{Fault, FileBackend};
use facmon_core::testing::{date, fast_settings, fixture_service, receipt, seed};
use facmon_core::{Actor, Facilities, Store, SystemClock};

const PASSWORD: &str = "kata-sandi-rahasia-9";

const ROOMS: [(&str, &str); 5] = [("A", "A.101"), ("A", "A.102"), ("B", "B.201"), ("B", "B.202"), ("B", "B.301")];

const CATEGORIES: [&str; 20] = [
    "Mesin ketik dan Hitung",
    "Alat Reproduksi (Pengganda)",
    "Peralatan Penyimpanan Peralatan Ktr",
    "Alat Kantor Lainnya",
    "Peralatan Rumah Tangga",
    "Alat Pembersih",
    "Perangkat Pendingin",
    "Peralatan Dapur",
    "Peralatan Rumah Berlangganan Lainnya",
    "Alat Pemadam Kebakaran",
    "Komputer",
    "Komputer Pribadi",
    "Peralatan Komputer Mainframe",
    "Peralatan Komputer Mini",
    "Peralatan Komputer Pribadi",
    "Peralatan Jaringan",
    "Peralatan Studio dan Peralatan Komunikasi",
    "Peralatan Video dan Film Studio",
    "Peralatan Video dan Film Studio A",
    "Peralatan Percetakan",
];

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Transition table, written out from the design rather than the code.
fn table(from: Condition, event: LifecycleEvent) -> Option<Condition> {
    use Condition::*;
    use LifecycleEvent::*;
    Some(match (from, event) {
        (Good, ReportLightDamage) => LightDamage,
        (Good, ReportHeavyDamage) => HeavyDamage,
        (Good, ReportLost) => Lost,
        (Good, Donate) => Donated,
        (LightDamage, RepairComplete) => Good,
        (LightDamage, ReportHeavyDamage) => HeavyDamage,
        (LightDamage, ReportLost) => Lost,
        (HeavyDamage, RepairComplete) => Good,
        (HeavyDamage, ReportLost) => Lost,
        (HeavyDamage, Donate) => Donated,
        (Lost, Recover) => Good,
        _ => return None,
    })
}

fn terminal(c: Condition) -> bool {
    matches!(c, Condition::Lost | Condition::Donated)
}

/// Days since 1970-01-01 by the civil-calendar formula, independent of chrono's arithmetic.
fn day_number(d: NaiveDate) -> i64 {
    let (y, m, d) = (i64::from(d.year()), i64::from(d.month()), i64::from(d.day()));
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let doy = (153 * ((m + 9) % 12) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

#[derive(Debug, Clone)]
struct ShadowItem {
    barcode: String,
    name: String,
    specification: String,
    custodian: String,
    category: String,
    room: usize,
    condition: Condition,
    purchase: NaiveDate,
    warranty_end: Option<NaiveDate>,
    interval: Option<u32>,
    last_repair: Option<NaiveDate>,
    open_repair: Option<(RepairId, NaiveDate)>,
}

#[derive(Debug, Clone)]
struct ShadowRecord {
    id: RecordId,
    item: Option<usize>,
    room: usize,
    date: NaiveDate,
    reporter: String,
    status: FindingStatus,
    resolved_on: Option<NaiveDate>,
}

struct Fixture {
    svc: Facilities,
    items: Vec<ShadowItem>,
    records: Vec<ShadowRecord>,
    reporters: Vec<String>,
}

fn room_address(room: usize) -> LocationAddress {
    LocationAddress::new(ROOMS[room].0, ROOMS[room].1)
}

fn add_user(svc: &Facilities, name: &str, role: Role, rooms: &[usize]) -> Actor {
    svc.add_user(
        NewUser {
            username: name.into(),
            password: PASSWORD.into(),
            role,
            work_unit_name: (role == Role::WorkUnit).then(|| "Fakultas Teknik".to_string()),
            locations: rooms.iter().map(|r| room_address(*r)).collect(),
        },
        &Actor::System,
    )
    .unwrap();
    Actor::User(svc.principal_for(name).unwrap())
}

/// A seeded store driven through random operations, with a model of what
/// every entity should look like kept alongside.
fn fixture(seed: u64, item_count: usize, min_records: usize) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let svc = fixture_service();
    let actors = vec![
        Actor::System,
        add_user(&svc, "unit_a", Role::WorkUnit, &[0]),
        add_user(&svc, "unit_b", Role::WorkUnit, &[2]),
        add_user(&svc, "bpm_admin", Role::FacilitiesAdmin, &[]),
    ];
    let reporters: Vec<String> = actors
        .iter()
        .map(|a| match a {
            Actor::System => "system".to_string(),
            Actor::User(p) => p.id.to_string(),
        })
        .collect();

    let names = ["Laptop", "AC Split", "Meja Rapat", "Kursi Lipat", "Proyektor", "Printer"];
    let custodians = ["Biro Umum", "BPM", "Fakultas Teknik", "Perpustakaan"];
    let types = ["ELK", "MBL", "KMP"];
    let brands = ["DAIKIN", "LENOVO", "EPSON", "OLYMPIC"];
    let mut items = Vec::new();
    for n in 0..item_count {
        let purchase = date("2015-01-01") + Duration::days(rng.gen_range(0..1500));
        let item = ShadowItem {
            barcode: format!("IT-{n:04}"),
            name: names[rng.gen_range(0..names.len())].to_string(),
            specification: format!("Seri {}", rng.gen_range(1..40)),
            custodian: custodians[rng.gen_range(0..custodians.len())].to_string(),
            // C13..C20 stay empty so the reports see zero rows too.
            category: format!("C{:02}", rng.gen_range(1..=12)),
            room: rng.gen_range(0..ROOMS.len()),
            condition: Condition::Good,
            purchase,
            warranty_end: rng.gen_bool(0.7).then(|| purchase + Duration::days(rng.gen_range(0..1500))),
            interval: rng.gen_bool(0.5).then(|| rng.gen_range(30..400)),
            last_repair: None,
            open_repair: None,
        };
        svc.register_item(
            ItemReceipt {
                barcode: item.barcode.clone(),
                name: item.name.clone(),
                specification: item.specification.clone(),
                category_code: item.category.clone(),
                type_code: types[n % types.len()].into(),
                brand_code: brands[n % brands.len()].into(),
                source_code: if n % 3 == 0 { "HIBAH" } else { "BELI" }.into(),
                purchase_date: item.purchase,
                warranty_end_date: item.warranty_end,
                maintenance_interval_days: item.interval,
                campus_code: ROOMS[item.room].0.into(),
                location_code: ROOMS[item.room].1.into(),
                custodian: item.custodian.clone(),
            },
            &actors[3],
        )
        .unwrap();
        items.push(item);
    }

    let mut records: Vec<ShadowRecord> = Vec::new();
    let steps = item_count * 12;
    let mut step = 0;
    while step < steps || records.len() < min_records {
        step += 1;
        let i = rng.gen_range(0..items.len());
        let on = date("2017-01-01") + Duration::days(rng.gen_range(0..700));
        let barcode = items[i].barcode.clone();
        let choice = if step > steps { 7 } else { rng.gen_range(0..10) };
        match choice {
            0..=2 => {
                if items[i].open_repair.is_some() {
                    continue;
                }
                let event = LifecycleEvent::ALL[rng.gen_range(0..LifecycleEvent::ALL.len())];
                let got = svc.change_status(&barcode, event, on, None, &actors[3]);
                let want = table(items[i].condition, event);
                assert_eq!(got.as_ref().ok().map(|c| c.to), want, "{barcode} {:?} {event:?}", items[i].condition);
                if let Some(to) = want {
                    items[i].condition = to;
                }
            }
            3 | 4 => {
                let to = rng.gen_range(0..ROOMS.len());
                let got = svc.transfer_item(&barcode, &room_address(to), on, None, &actors[3]);
                let legal = to != items[i].room && !terminal(items[i].condition);
                assert_eq!(got.is_ok(), legal, "transfer {barcode}: {got:?}");
                if legal {
                    items[i].room = to;
                }
            }
            5 => {
                if items[i].open_repair.is_some() {
                    continue;
                }
                let got = svc.open_repair(&barcode, on, "perbaikan rutin", &actors[3]);
                let legal = matches!(items[i].condition, Condition::LightDamage | Condition::HeavyDamage);
                assert_eq!(got.is_ok(), legal, "open repair {barcode}: {got:?}");
                if let Ok(repair) = got {
                    items[i].open_repair = Some((repair.id, on));
                }
            }
            6 => {
                let Some((id, opened)) = items[i].open_repair.take() else {
                    continue;
                };
                let done = opened + Duration::days(rng.gen_range(0..30));
                let cost = Decimal::new(rng.gen_range(0..5_000_000), 0);
                svc.complete_repair(id, done, Some(cost), &actors[3]).unwrap();
                items[i].condition = Condition::Good;
                items[i].last_repair = items[i].last_repair.max(Some(done));
            }
            7 => {
                let who = rng.gen_range(0..actors.len());
                let linked = rng.gen_bool(0.8);
                let room = if linked { items[i].room } else { rng.gen_range(0..ROOMS.len()) };
                let input = FindingInput {
                    barcode: linked.then(|| barcode.clone()),
                    object_name: (!linked).then(|| "Plafon koridor".to_string()),
                    object_description: None,
                    date: on,
                    location: (!linked).then(|| room_address(room)),
                    finding: "kondisi tidak layak".into(),
                    recommendation: "perlu ditinjau".into(),
                };
                let record = svc.submit_finding(input, vec![], &actors[who]).unwrap();
                records.push(ShadowRecord {
                    id: record.id,
                    item: linked.then_some(i),
                    room,
                    date: on,
                    reporter: reporters[who].clone(),
                    status: FindingStatus::Open,
                    resolved_on: None,
                });
            }
            8 => {
                if records.is_empty() {
                    continue;
                }
                let k = rng.gen_range(0..records.len());
                let r = &mut records[k];
                let got = svc.follow_up(r.id, "surat dikirim ke biro", &actors[3]);
                assert_eq!(got.is_ok(), r.status == FindingStatus::Open, "follow up: {got:?}");
                if got.is_ok() {
                    r.status = FindingStatus::FollowUp;
                }
            }
            _ => {
                if records.is_empty() {
                    continue;
                }
                let k = rng.gen_range(0..records.len());
                let r = &mut records[k];
                let done = r.date + Duration::days(rng.gen_range(-5..60));
                let got = svc.resolve(r.id, done, &actors[3]);
                let legal = r.status != FindingStatus::Resolved && done >= r.date;
                assert_eq!(got.is_ok(), legal, "resolve: {got:?}");
                if legal {
                    r.status = FindingStatus::Resolved;
                    r.resolved_on = Some(done);
                }
            }
        }
    }
    Fixture {
        svc,
        items,
        records,
        reporters,
    }
}

fn room_codes(svc: &Facilities) -> HashMap<String, String> {
    svc.list_references(ReferenceKind::Location)
        .into_iter()
        .filter_map(|r| match r {
            Reference::Location(l) => Some((l.id.to_string(), l.code)),
            _ => None,
        })
        .collect()
}

type ItemKey = (String, Condition, String);

fn service_keys(rooms: &HashMap<String, String>, items: &[Item]) -> Vec<ItemKey> {
    items
        .iter()
        .map(|i| (i.barcode.to_string(), i.condition, rooms[&i.location_id.to_string()].clone()))
        .collect()
}

fn shadow_key(i: &ShadowItem) -> ItemKey {
    (i.barcode.clone(), i.condition, ROOMS[i.room].1.to_string())
}

fn oracle_items(fx: &Fixture, f: &ItemFilter) -> Vec<ItemKey> {
    let mut keep: Vec<&ShadowItem> = fx
        .items
        .iter()
        .filter(|i| f.campus.as_deref().map_or(true, |c| ROOMS[i.room].0 == c))
        .filter(|i| f.location.as_deref().map_or(true, |l| ROOMS[i.room].1 == l))
        .filter(|i| f.category.as_deref().map_or(true, |c| i.category == c))
        .filter(|i| f.condition.map_or(true, |c| i.condition == c))
        .filter(|i| {
            f.text.as_deref().map_or(true, |t| {
                let needle = t.to_lowercase();
                [&i.barcode, &i.name, &i.specification, &i.custodian]
                    .iter()
                    .any(|field| field.to_lowercase().contains(&needle))
            })
        })
        .collect();
    keep.sort_by(|a, b| a.barcode.cmp(&b.barcode));
    keep.into_iter().map(shadow_key).collect()
}

fn oracle_records(fx: &Fixture, f: &RecordFilter) -> Vec<RecordId> {
    let mut keep: Vec<&ShadowRecord> = fx
        .records
        .iter()
        .filter(|r| f.status.map_or(true, |s| r.status == s))
        .filter(|r| f.location.as_deref().map_or(true, |l| ROOMS[r.room].1 == l))
        .filter(|r| {
            f.condition_of_item
                .map_or(true, |c| r.item.map(|i| fx.items[i].condition) == Some(c))
        })
        .filter(|r| f.from.map_or(true, |from| r.date >= from))
        .filter(|r| f.to.map_or(true, |to| r.date <= to))
        .filter(|r| f.reporter.as_deref().map_or(true, |who| r.reporter == who))
        .collect();
    keep.sort_by_key(|r| (Reverse(r.date), r.id));
    keep.into_iter().map(|r| r.id).collect()
}

fn oracle_summary(fx: &Fixture, from: NaiveDate, to: NaiveDate, as_of: NaiveDate) -> SummaryReport {
    let mut by_condition: BTreeMap<Condition, u64> = Condition::ALL.iter().map(|c| (*c, 0)).collect();
    let mut by_campus: BTreeMap<String, u64> = [("A".to_string(), 0), ("B".to_string(), 0)].into();
    let mut by_category: BTreeMap<String, u64> = (1..=20).map(|n| (format!("C{n:02}"), 0)).collect();
    let mut expiring = 0;
    for i in &fx.items {
        *by_condition.get_mut(&i.condition).unwrap() += 1;
        *by_campus.get_mut(ROOMS[i.room].0).unwrap() += 1;
        *by_category.get_mut(&i.category).unwrap() += 1;
        if let (false, Some(end)) = (terminal(i.condition), i.warranty_end) {
            let left = day_number(end) - day_number(as_of);
            if (0..=30).contains(&left) {
                expiring += 1;
            }
        }
    }
    let inside = |d: NaiveDate| from <= d && d <= to;
    let opened = fx.records.iter().filter(|r| inside(r.date)).count() as u64;
    let resolved: Vec<&ShadowRecord> = fx.records.iter().filter(|r| r.resolved_on.is_some_and(inside)).collect();
    let opened_by_end = fx.records.iter().filter(|r| r.date <= to).count() as u64;
    let resolved_by_end = fx.records.iter().filter(|r| r.resolved_on.is_some_and(|d| d <= to)).count() as u64;
    let latency: i64 = resolved
        .iter()
        .map(|r| day_number(r.resolved_on.unwrap()) - day_number(r.date))
        .sum();
    SummaryReport {
        period: Period { from, to },
        as_of,
        items_total: fx.items.len() as u64,
        items_by_condition: by_condition,
        items_by_campus: by_campus,
        items_by_category: by_category,
        findings_opened: opened,
        findings_resolved: resolved.len() as u64,
        findings_open_at_end: opened_by_end.saturating_sub(resolved_by_end),
        mean_resolution_days: (!resolved.is_empty())
            .then(|| (Decimal::from(latency) / Decimal::from(resolved.len())).round_dp(2)),
        warranty_expiring_within_30_days: expiring,
    }
}

// ---------------------------------------------------------------------------
// HTTP helpers
// ---------------------------------------------------------------------------

struct Api {
    server: TestServer,
    http: Client,
}

impl Api {
    fn start(svc: Facilities) -> Api {
        Api {
            server: TestServer::start(Arc::new(svc)),
            http: Client::new(),
        }
    }

    fn send(&self, request: RequestBuilder) -> (StatusCode, Value) {
        let response = request.send().expect("request failed");
        let status = response.status();
        let bytes = response.bytes().unwrap();
        let body = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, body)
    }

    fn login(&self, user: &str) -> String {
        let (status, body) = self.send(
            self.http
                .post(self.server.url("/api/login"))
                .json(&json!({ "username": user, "password": PASSWORD })),
        );
        assert_eq!(status, StatusCode::OK, "login {user}: {body}");
        body["token"].as_str().unwrap().to_string()
    }

    fn get(&self, token: &str, path: &str) -> (StatusCode, Value) {
        self.send(self.http.get(self.server.url(path)).bearer_auth(token))
    }

    fn post(&self, token: &str, path: &str, body: Value) -> (StatusCode, Value) {
        self.send(self.http.post(self.server.url(path)).bearer_auth(token).json(&body))
    }
}

fn expect(got: (StatusCode, Value), status: StatusCode, what: &str) -> Result<Value, String> {
    if got.0 == status {
        Ok(got.1)
    } else {
        Err(format!("{what}: expected {status}, got {} {}", got.0, got.1))
    }
}

fn item_body(barcode: &str, room: &str) -> Value {
    serde_json::to_value(receipt(barcode, room)).unwrap()
}

fn barcodes(list: &Value) -> Vec<String> {
    list.as_array()
        .map(|a| a.iter().filter_map(|i| i["barcode"].as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

fn seeded_api() -> Api {
    let svc = fixture_service();
    add_user(&svc, "bpm_admin", Role::FacilitiesAdmin, &[]);
    add_user(&svc, "unit_b", Role::WorkUnit, &[2]);
    add_user(&svc, "pimpinan", Role::Leadership, &[]);
    Api::start(svc)
}

fn facmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facmon"))
        .args(args)
        .env_remove("DATA_DIR")
        .env_remove("FACMON_REMOTE")
        .output()
        .expect("running facmon")
}

fn facmon_ok(args: &[&str]) -> Result<String, String> {
    let out = facmon(args);
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    if out.status.success() {
        Ok(stdout)
    } else {
        Err(format!("facmon {args:?}: {}{}", stdout, String::from_utf8_lossy(&out.stderr)))
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn state_machine() -> Check {
    let mut pairs = 0;
    for from in Condition::ALL {
        for event in LifecycleEvent::ALL {
            let got = next_condition(from, event);
            ensure!(got.as_ref().ok().copied() == table(from, event), "{from:?} x {event:?}: {got:?}");
            if let Err(e) = &got {
                ensure!(e.code() == "ILLEGAL_TRANSITION", "{from:?} x {event:?}: {}", e.code());
            }
            ensure!(next_condition(from, event).ok() == got.ok(), "{from:?} x {event:?} is not deterministic");
            pairs += 1;
        }
    }
    ensure!(pairs == 30, "{pairs} pairs");

    for event in LifecycleEvent::ALL {
        ensure!(next_condition(Condition::Donated, event).is_err(), "DONATED accepts {event:?}");
        let lost = next_condition(Condition::Lost, event);
        ensure!(lost.is_ok() == (event == LifecycleEvent::Recover), "LOST x {event:?}: {lost:?}");
    }

    // Breadth-first search over the implementation, keeping the shortest event path to each state.
    let mut paths: BTreeMap<Condition, Vec<LifecycleEvent>> = BTreeMap::from([(Condition::Good, vec![])]);
    let mut queue = VecDeque::from([Condition::Good]);
    while let Some(c) = queue.pop_front() {
        for event in LifecycleEvent::ALL {
            if let Ok(next) = next_condition(c, event) {
                if !paths.contains_key(&next) {
                    let mut path = paths[&c].clone();
                    path.push(event);
                    paths.insert(next, path);
                    queue.push_back(next);
                }
            }
        }
    }
    ensure!(paths.len() == Condition::ALL.len(), "reachable from GOOD: {:?}", paths.keys());

    // The same 30 pairs against stored items.
    let svc = fixture_service();
    let on = date("2018-05-01");
    for (n, (from, path)) in paths.iter().enumerate() {
        for (m, event) in LifecycleEvent::ALL.into_iter().enumerate() {
            let barcode = format!("SM-{n}-{m}");
            svc.register_item(receipt(&barcode, "B.201"), &Actor::System).unwrap();
            for step in path {
                svc.change_status(&barcode, *step, on, None, &Actor::System).unwrap();
            }
            let got = svc.change_status(&barcode, event, on, None, &Actor::System);
            let stored = svc.get_item(&barcode).unwrap().condition;
            match table(*from, event) {
                Some(to) => ensure!(got.is_ok() && stored == to, "stored {from:?} x {event:?}: {got:?}"),
                None => ensure!(
                    got.as_ref().is_err_and(|e| e.code() == "ILLEGAL_TRANSITION") && stored == *from,
                    "stored {from:?} x {event:?}: {got:?}"
                ),
            }
        }
    }
    Ok(())
}

fn workflow() -> Check {
    let api = seeded_api();
    let admin = api.login("bpm_admin");
    let unit = api.login("unit_b");
    let mut conditions = Vec::new();
    let mut statuses = Vec::new();
    let condition = |conditions: &mut Vec<String>| -> Check {
        let item = expect(api.get(&unit, "/api/items/AC-201"), StatusCode::OK, "get item")?;
        conditions.push(item["condition"].as_str().unwrap_or_default().to_string());
        Ok(())
    };

    expect(api.post(&admin, "/api/items", item_body("AC-201", "B.201")), StatusCode::CREATED, "register")?;
    condition(&mut conditions)?;
    expect(
        api.post(&admin, "/api/items/AC-201/status", json!({ "event": "REPORT_LIGHT_DAMAGE", "date": "2018-05-02" })),
        StatusCode::CREATED,
        "report damage",
    )?;
    condition(&mut conditions)?;

    let record = expect(
        api.post(
            &unit,
            "/api/monitoring",
            json!({ "barcode": "AC-201", "date": "2018-05-03", "finding": "AC tidak dingin", "recommendation": "servis unit" }),
        ),
        StatusCode::CREATED,
        "submit finding",
    )?;
    let id = record["id"].as_str().unwrap().to_string();
    statuses.push(record["status"].clone());
    ensure!(record["resolution_date"].is_null(), "new record has a resolution date");
    condition(&mut conditions)?;

    let followed = expect(
        api.post(&admin, &format!("/api/monitoring/{id}/follow-up"), json!({ "note": "surat dikirim ke biro" })),
        StatusCode::OK,
        "follow up",
    )?;
    statuses.push(followed["status"].clone());

    let repair = expect(
        api.post(
            &admin,
            "/api/items/AC-201/repairs",
            json!({ "opened_date": "2018-05-05", "description": "ganti kapasitor" }),
        ),
        StatusCode::CREATED,
        "open repair",
    )?;
    condition(&mut conditions)?;
    let repair_id = repair["id"].as_str().unwrap().to_string();
    let done = expect(
        api.post(
            &admin,
            &format!("/api/repairs/{repair_id}/complete"),
            json!({ "completed_date": "2018-05-09", "cost": 350000 }),
        ),
        StatusCode::OK,
        "complete repair",
    )?;
    ensure!(done["completed_date"] == "2018-05-09", "repair record {done}");
    condition(&mut conditions)?;

    let resolved = expect(
        api.post(&admin, &format!("/api/monitoring/{id}/resolve"), json!({ "resolution_date": "2018-05-10" })),
        StatusCode::OK,
        "resolve",
    )?;
    statuses.push(resolved["status"].clone());
    ensure!(resolved["resolution_date"] == "2018-05-10", "resolution date {resolved}");
    condition(&mut conditions)?;

    let seen = expect(api.get(&unit, &format!("/api/monitoring/{id}")), StatusCode::OK, "reporter reads record")?;
    ensure!(seen["status"] == "RESOLVED", "reporter sees {}", seen["status"]);

    ensure!(statuses == [json!("OPEN"), json!("FOLLOW_UP"), json!("RESOLVED")], "record trajectory {statuses:?}");
    let want = ["GOOD", "LIGHT_DAMAGE", "LIGHT_DAMAGE", "LIGHT_DAMAGE", "GOOD", "GOOD"];
    ensure!(conditions == want, "item trajectory {conditions:?}");

    let history = expect(api.get(&admin, "/api/items/AC-201/history"), StatusCode::OK, "history")?;
    let changes: Vec<(String, String)> = history["status_changes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["from"].as_str().unwrap().to_string(), c["to"].as_str().unwrap().to_string()))
        .collect();
    let want = [("GOOD", "LIGHT_DAMAGE"), ("LIGHT_DAMAGE", "GOOD")].map(|(a, b)| (a.to_string(), b.to_string()));
    ensure!(changes == want, "status history {changes:?}");
    Ok(())
}

fn menu_coverage() -> Check {
    let api = seeded_api();
    let t = api.login("bpm_admin");
    let unit = api.login("unit_b");
    let t = t.as_str();

    let reference = |collection: &str, body: Value, code: &str| -> Check {
        expect(api.post(t, &format!("/api/references/{collection}"), body), StatusCode::CREATED, collection)?;
        let list = expect(api.get(t, &format!("/api/references/{collection}")), StatusCode::OK, collection)?;
        ensure!(
            list.as_array().unwrap().iter().any(|r| r["code"] == code),
            "{collection} does not list {code}"
        );
        Ok(())
    };
    let status = |barcode: &str, event: &str| -> Check {
        expect(
            api.post(t, &format!("/api/items/{barcode}/status"), json!({ "event": event, "date": "2018-05-02" })),
            StatusCode::CREATED,
            event,
        )
        .map(drop)
    };
    let condition_view = |barcode: &str, event: &str, condition: &str| -> Check {
        expect(api.post(t, "/api/items", item_body(barcode, "B.202")), StatusCode::CREATED, barcode)?;
        status(barcode, event)?;
        let list = expect(
            api.get(t, &format!("/api/reports/by-condition?condition={condition}")),
            StatusCode::OK,
            condition,
        )?;
        ensure!(barcodes(&list) == [barcode], "{condition} view: {:?}", barcodes(&list));
        Ok(())
    };

    let checklist: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        (
            "reference/campus",
            Box::new(|| reference("campuses", json!({ "code": "C", "name": "Kampus C", "address": "Jl. C" }), "C")),
        ),
        (
            "reference/location",
            Box::new(|| {
                reference(
                    "locations",
                    json!({ "campus_code": "B", "code": "B.401", "name": "Gudang", "floor": 4 }),
                    "B.401",
                )
            }),
        ),
        (
            "reference/item type",
            Box::new(|| reference("types", json!({ "code": "PDG", "name": "Pendingin" }), "PDG")),
        ),
        (
            "reference/item category",
            Box::new(|| {
                let list = expect(api.get(t, "/api/references/categories"), StatusCode::OK, "categories")?;
                ensure!(list.as_array().unwrap().len() == 20, "{} categories", list.as_array().unwrap().len());
                reference("categories", json!({ "code": "C21", "name": "Peralatan Laboratorium" }), "C21")
            }),
        ),
        (
            "reference/brand",
            Box::new(|| reference("brands", json!({ "code": "SHARP", "name": "Sharp" }), "SHARP")),
        ),
        (
            "reference/source",
            Box::new(|| reference("sources", json!({ "code": "ALUMNI", "name": "Donasi Alumni" }), "ALUMNI")),
        ),
        (
            "reference/users",
            Box::new(|| {
                expect(
                    api.post(
                        t,
                        "/api/users",
                        json!({ "username": "staf_bpm", "password": PASSWORD, "role": "FACILITIES_ADMIN" }),
                    ),
                    StatusCode::CREATED,
                    "add user",
                )?;
                let users = expect(api.get(t, "/api/users"), StatusCode::OK, "users")?;
                ensure!(
                    users.as_array().unwrap().iter().any(|u| u["username"] == "staf_bpm"),
                    "user list {users}"
                );
                Ok(())
            }),
        ),
        (
            "processing/goods receipt",
            Box::new(|| {
                let item = expect(api.post(t, "/api/items", item_body("AC-100", "B.201")), StatusCode::CREATED, "receipt")?;
                ensure!(item["condition"] == "GOOD", "new item {item}");
                let form = Form::new().text("view", "FRONT").part(
                    "file",
                    Part::bytes(b"\x89PNG\r\n\x1a\nfoto".to_vec()).file_name("depan.png").mime_str("image/png").unwrap(),
                );
                let (code, photo) =
                    api.send(api.http.post(api.server.url("/api/items/AC-100/photos")).bearer_auth(t).multipart(form));
                ensure!(code == StatusCode::CREATED, "photo upload {code} {photo}");
                Ok(())
            }),
        ),
        (
            "processing/item collection",
            Box::new(|| {
                let list = expect(api.get(t, "/api/items?location=B.201"), StatusCode::OK, "collection")?;
                ensure!(barcodes(&list).contains(&"AC-100".to_string()), "collection {list}");
                Ok(())
            }),
        ),
        (
            "processing/transfer",
            Box::new(|| {
                expect(
                    api.post(
                        t,
                        "/api/items/AC-100/transfer",
                        json!({ "to": { "campus_code": "B", "location_code": "B.301" }, "date": "2018-05-03" }),
                    ),
                    StatusCode::CREATED,
                    "transfer",
                )?;
                let item = expect(api.get(t, "/api/items?location=B.301"), StatusCode::OK, "moved")?;
                ensure!(barcodes(&item) == ["AC-100"], "B.301 holds {item}");
                Ok(())
            }),
        ),
        ("processing/status change", Box::new(|| status("AC-100", "REPORT_HEAVY_DAMAGE"))),
        (
            "processing/repair",
            Box::new(|| {
                let repair = expect(
                    api.post(
                        t,
                        "/api/items/AC-100/repairs",
                        json!({ "opened_date": "2018-05-04", "description": "ganti kompresor" }),
                    ),
                    StatusCode::CREATED,
                    "open repair",
                )?;
                let id = repair["id"].as_str().unwrap_or_default();
                expect(
                    api.post(t, &format!("/api/repairs/{id}/complete"), json!({ "completed_date": "2018-05-08" })),
                    StatusCode::OK,
                    "complete repair",
                )?;
                let item = expect(api.get(t, "/api/items/AC-100"), StatusCode::OK, "item")?;
                ensure!(item["condition"] == "GOOD", "after repair {item}");
                Ok(())
            }),
        ),
        (
            "monitoring/monitoring records",
            Box::new(|| {
                let record = expect(
                    api.post(
                        &unit,
                        "/api/monitoring",
                        json!({ "barcode": "AC-100", "date": "2018-05-09", "finding": "bocor" }),
                    ),
                    StatusCode::CREATED,
                    "submit",
                )?;
                let list = expect(api.get(t, "/api/monitoring"), StatusCode::OK, "records")?;
                ensure!(list.as_array().unwrap().iter().any(|r| r["id"] == record["id"]), "records {list}");
                Ok(())
            }),
        ),
        (
            "monitoring/global monitoring",
            Box::new(|| {
                let body = json!({
                    "object_name": "Plafon koridor",
                    "location": { "campus_code": "B", "location_code": "B.201" },
                    "date": "2018-05-09",
                    "finding": "retak",
                });
                let record = expect(api.post(&unit, "/api/monitoring", body), StatusCode::CREATED, "global finding")?;
                ensure!(record["barcode"].is_null(), "global finding linked to {}", record["barcode"]);
                let list = expect(api.get(t, "/api/monitoring?location=B.201"), StatusCode::OK, "records")?;
                ensure!(list.as_array().unwrap().iter().any(|r| r["id"] == record["id"]), "records {list}");
                Ok(())
            }),
        ),
        (
            "monitoring/light damage",
            Box::new(|| condition_view("LD-1", "REPORT_LIGHT_DAMAGE", "LIGHT_DAMAGE")),
        ),
        (
            "monitoring/heavy damage",
            Box::new(|| condition_view("HD-1", "REPORT_HEAVY_DAMAGE", "HEAVY_DAMAGE")),
        ),
        ("monitoring/lost", Box::new(|| condition_view("LS-1", "REPORT_LOST", "LOST"))),
        ("monitoring/donated", Box::new(|| condition_view("DN-1", "DONATE", "DONATED"))),
        (
            "monitoring/by location",
            Box::new(|| {
                let view = expect(
                    api.get(t, "/api/reports/by-location?campus=B&location=B.201"),
                    StatusCode::OK,
                    "by location",
                )?;
                let open = view["open_findings"].as_array().map_or(0, Vec::len);
                ensure!(open == 1, "B.201 open findings {view}");
                let view = expect(
                    api.get(t, "/api/reports/by-location?campus=B&location=B.301"),
                    StatusCode::OK,
                    "by location",
                )?;
                ensure!(barcodes(&view["items"]) == ["AC-100"], "B.301 items {view}");
                Ok(())
            }),
        ),
    ];

    let groups = ["reference/", "processing/", "monitoring/"].map(|g| checklist.iter().filter(|(n, _)| n.starts_with(g)).count());
    ensure!(groups == [7, 5, 7], "checklist shape {groups:?}");
    let failed: Vec<String> = checklist
        .iter()
        .filter_map(|(name, run)| run().err().map(|e| format!("{name}: {e}")))
        .collect();
    ensure!(failed.is_empty(), "{}", failed.join("; "));
    Ok(())
}

fn seed_taxonomy() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data = data.to_str().unwrap();
    let out = facmon_ok(&["--data-dir", data, "seed"])?;
    ensure!(out.contains("20 categories"), "seed printed {out:?}");

    let svc = open_service(&Config {
        data_dir: data.into(),
        ..Config::default()
    })
    .map_err(|e| e.to_string())?;
    let stored: Vec<(String, String)> = svc
        .list_references(ReferenceKind::Category)
        .into_iter()
        .filter_map(|r| match r {
            Reference::Taxonomy(t) => Some((t.code, t.name)),
            _ => None,
        })
        .collect();
    let want: Vec<(String, String)> = CATEGORIES
        .iter()
        .enumerate()
        .map(|(n, name)| (format!("C{:02}", n + 1), name.to_string()))
        .collect();
    ensure!(stored == want, "categories {stored:?}");
    Ok(())
}

fn oracle_equivalence() -> Check {
    let fx = fixture(20180501, 150, 120);
    let svc = &fx.svc;
    ensure!(fx.items.len() >= 100 && fx.records.len() >= 100, "fixture too small");
    ensure!(
        Condition::ALL.iter().all(|c| fx.items.iter().any(|i| i.condition == *c))
            && FindingStatus::ALL.iter().all(|s| fx.records.iter().any(|r| r.status == *s))
            && fx.items.iter().any(|i| i.last_repair.is_some())
            && fx.records.iter().any(|r| r.item.is_none()),
        "fixture does not exercise every state"
    );
    let rooms = room_codes(svc);
    let mut rng = StdRng::seed_from_u64(7);

    let mut filters = vec![ItemFilter::default()];
    for (campus, room) in ROOMS {
        filters.push(ItemFilter {
            campus: Some(campus.into()),
            ..Default::default()
        });
        filters.push(ItemFilter {
            location: Some(room.into()),
            ..Default::default()
        });
    }
    for n in 1..=20 {
        filters.push(ItemFilter {
            category: Some(format!("C{n:02}")),
            ..Default::default()
        });
    }
    for c in Condition::ALL {
        filters.push(ItemFilter {
            condition: Some(c),
            ..Default::default()
        });
        filters.push(ItemFilter {
            campus: Some("B".into()),
            condition: Some(c),
            ..Default::default()
        });
    }
    for text in ["lap", "SERI 1", "biro", "it-00", "ac split", "tidak ada"] {
        filters.push(ItemFilter {
            text: Some(text.into()),
            ..Default::default()
        });
    }
    for _ in 0..30 {
        filters.push(ItemFilter {
            location: rng.gen_bool(0.5).then(|| ROOMS[rng.gen_range(0..5)].1.to_string()),
            category: rng.gen_bool(0.5).then(|| format!("C{:02}", rng.gen_range(1..=12))),
            condition: rng.gen_bool(0.5).then(|| Condition::ALL[rng.gen_range(0..5)]),
            text: rng.gen_bool(0.3).then(|| "seri".to_string()),
            ..Default::default()
        });
    }
    for f in &filters {
        let got = service_keys(&rooms, &svc.list_items(f));
        ensure!(got == oracle_items(&fx, f), "list_items {f:?}");
    }

    for c in Condition::ALL {
        let got = service_keys(&rooms, &svc.condition_view(c, &Actor::System).unwrap());
        let want = oracle_items(&fx, &ItemFilter { condition: Some(c), ..Default::default() });
        ensure!(got == want, "condition_view {c:?}");
    }

    for (n, (campus, room)) in ROOMS.iter().enumerate() {
        let view = svc.location_view(&LocationAddress::new(*campus, *room), &Actor::System).unwrap();
        let want = oracle_items(&fx, &ItemFilter { location: Some(room.to_string()), ..Default::default() });
        ensure!(service_keys(&rooms, &view.items) == want, "location_view items {room}");
        let mut open: Vec<&ShadowRecord> = fx
            .records
            .iter()
            .filter(|r| r.room == n && r.status != FindingStatus::Resolved)
            .collect();
        open.sort_by_key(|r| (Reverse(r.date), r.id));
        let got: Vec<RecordId> = view.open_findings.iter().map(|r| r.id).collect();
        ensure!(got == open.iter().map(|r| r.id).collect::<Vec<_>>(), "location_view findings {room}");
    }

    let mut record_filters = vec![RecordFilter::default()];
    for s in FindingStatus::ALL {
        record_filters.push(RecordFilter { status: Some(s), ..Default::default() });
    }
    for (_, room) in ROOMS {
        record_filters.push(RecordFilter { location: Some(room.into()), ..Default::default() });
    }
    for c in Condition::ALL {
        record_filters.push(RecordFilter { condition_of_item: Some(c), ..Default::default() });
    }
    for who in &fx.reporters {
        record_filters.push(RecordFilter { reporter: Some(who.clone()), ..Default::default() });
    }
    for _ in 0..40 {
        let a = date("2016-12-01") + Duration::days(rng.gen_range(0..760));
        let b = a + Duration::days(rng.gen_range(0..200));
        record_filters.push(RecordFilter {
            status: rng.gen_bool(0.4).then(|| FindingStatus::ALL[rng.gen_range(0..3)]),
            location: rng.gen_bool(0.4).then(|| ROOMS[rng.gen_range(0..5)].1.to_string()),
            condition_of_item: rng.gen_bool(0.3).then(|| Condition::ALL[rng.gen_range(0..5)]),
            from: rng.gen_bool(0.7).then_some(a),
            to: rng.gen_bool(0.7).then_some(b),
            reporter: rng.gen_bool(0.3).then(|| fx.reporters[rng.gen_range(0..fx.reporters.len())].clone()),
        });
    }
    for f in &record_filters {
        let got: Vec<RecordId> = svc.list_records(f, &Actor::System).unwrap().iter().map(|r| r.id).collect();
        ensure!(got == oracle_records(&fx, f), "list_records {f:?}");
    }
    let backwards = RecordFilter {
        from: Some(date("2018-02-01")),
        to: Some(date("2018-01-01")),
        ..Default::default()
    };
    let err = svc.list_records(&backwards, &Actor::System).unwrap_err();
    ensure!(err.code() == "INVALID_PERIOD", "reversed period gave {}", err.code());

    for _ in 0..25 {
        let from = date("2016-12-01") + Duration::days(rng.gen_range(0..760));
        let to = from + Duration::days(rng.gen_range(0..365));
        let as_of = to + Duration::days(rng.gen_range(0..90));
        let got = svc.summary(Period::new(from, to).unwrap(), as_of, &Actor::System).unwrap();
        ensure!(got == oracle_summary(&fx, from, to, as_of), "summary {from}..{to} as of {as_of}: {got:?}");
        let sum: u64 = got.items_by_condition.values().sum();
        ensure!(sum == got.items_total, "condition counts sum to {sum}");
    }
    let early = svc.summary(Period::new(date("2018-01-01"), date("2018-02-01")).unwrap(), date("2018-01-15"), &Actor::System);
    ensure!(early.is_err_and(|e| e.code() == "INVALID_PERIOD"), "as_of before period end accepted");

    let mut as_of_dates: Vec<NaiveDate> = (0..10)
        .map(|_| date("2015-01-01") + Duration::days(rng.gen_range(0..3000)))
        .collect();
    // Boundaries: one day before, on and after a real warranty end.
    if let Some(end) = fx.items.iter().find_map(|i| i.warranty_end) {
        as_of_dates.extend([end - Duration::days(1), end, end + Duration::days(1)]);
    }
    for as_of in as_of_dates {
        let report = svc.warranty_report(as_of);
        let mut live: Vec<&ShadowItem> = fx.items.iter().filter(|i| !terminal(i.condition)).collect();
        live.sort_by(|a, b| a.barcode.cmp(&b.barcode));
        let mut in_warranty = Vec::new();
        let mut expired = Vec::new();
        let mut none = Vec::new();
        for i in live {
            match i.warranty_end {
                None => none.push(i.barcode.clone()),
                Some(end) => {
                    let left = day_number(end) - day_number(as_of);
                    if left >= 0 {
                        in_warranty.push((i.barcode.clone(), left));
                    } else {
                        expired.push((i.barcode.clone(), -left));
                    }
                }
            }
        }
        let got_in: Vec<(String, i64)> = report
            .in_warranty
            .iter()
            .map(|e| (e.item.barcode.to_string(), i64::from(e.days_remaining)))
            .collect();
        let got_expired: Vec<(String, i64)> = report
            .expired
            .iter()
            .map(|e| (e.item.barcode.to_string(), i64::from(e.days_since)))
            .collect();
        let got_none: Vec<String> = report.none.iter().map(|i| i.barcode.to_string()).collect();
        ensure!(got_in == in_warranty, "in warranty as of {as_of}");
        ensure!(got_expired == expired, "expired as of {as_of}");
        ensure!(got_none == none, "no warranty as of {as_of}");
    }

    for _ in 0..12 {
        let as_of = date("2015-06-01") + Duration::days(rng.gen_range(0..3000));
        let mut want: Vec<(String, i64, i64)> = fx
            .items
            .iter()
            .filter(|i| !terminal(i.condition))
            .filter_map(|i| {
                let anchor = i.last_repair.unwrap_or(i.purchase);
                let due = day_number(anchor) + i64::from(i.interval?);
                let overdue = day_number(as_of) - due;
                (overdue >= 0).then(|| (i.barcode.clone(), due, overdue))
            })
            .collect();
        want.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let got: Vec<(String, i64, i64)> = svc
            .maintenance_due(as_of)
            .iter()
            .map(|m| (m.item.barcode.to_string(), day_number(m.due_date), i64::from(m.days_overdue)))
            .collect();
        ensure!(got == want, "maintenance due as of {as_of}");
    }
    let boundary = fixture_service();
    let mut r = receipt("AC-090", "B.201");
    r.maintenance_interval_days = Some(90);
    boundary.register_item(r, &Actor::System).unwrap();
    ensure!(boundary.maintenance_due(date("2018-03-31")).is_empty(), "due on day 89");
    let due = boundary.maintenance_due(date("2018-04-01"));
    ensure!(due.len() == 1 && due[0].days_overdue == 0, "not due on day 90: {due:?}");
    Ok(())
}

fn invariants() -> Check {
    let fx = fixture(77, 120, 110);
    let svc = &fx.svc;
    let all = svc.list_items(&ItemFilter::default());
    ensure!(all.len() == fx.items.len(), "{} items listed", all.len());

    let mut seen = BTreeSet::new();
    for c in Condition::ALL {
        for item in svc.condition_view(c, &Actor::System).unwrap() {
            ensure!(item.condition == c, "{} in the {c:?} view", item.barcode);
            ensure!(seen.insert(item.barcode.to_string()), "{} in two condition views", item.barcode);
        }
    }
    ensure!(seen.len() == all.len(), "condition views cover {} of {}", seen.len(), all.len());

    let records = svc.list_records(&RecordFilter::default(), &Actor::System).unwrap();
    ensure!(records.len() == fx.records.len(), "{} records listed", records.len());
    let by_status: usize = FindingStatus::ALL
        .iter()
        .map(|s| svc.list_records(&RecordFilter { status: Some(*s), ..Default::default() }, &Actor::System).unwrap().len())
        .sum();
    ensure!(by_status == records.len(), "status counts sum to {by_status}");
    for r in &records {
        ensure!(
            r.resolution_date.is_some() == (r.status == FindingStatus::Resolved),
            "record {} {:?} with resolution {:?}",
            r.id,
            r.status,
            r.resolution_date
        );
        ensure!(r.resolution_date.map_or(true, |d| d >= r.date), "record {} resolved before filing", r.id);
    }

    let rooms = room_codes(svc);
    let mut placed: BTreeMap<String, usize> = BTreeMap::new();
    for (campus, room) in ROOMS {
        for item in svc.location_view(&LocationAddress::new(campus, room), &Actor::System).unwrap().items {
            *placed.entry(item.barcode.to_string()).or_default() += 1;
        }
    }
    for (item, shadow) in all.iter().zip(&fx.items) {
        ensure!(item.barcode.as_str() == shadow.barcode, "listing order");
        let room = rooms.get(&item.location_id.to_string());
        ensure!(room.map(String::as_str) == Some(ROOMS[shadow.room].1), "{} is in {room:?}", item.barcode);
        ensure!(placed.get(item.barcode.as_str()) == Some(&1), "{} appears in {:?} rooms", item.barcode, placed.get(item.barcode.as_str()));
    }

    let report = svc
        .summary(Period::new(date("2000-01-01"), date("2030-12-31")).unwrap(), date("2030-12-31"), &Actor::System)
        .unwrap();
    ensure!(report.items_by_condition.values().sum::<u64>() == report.items_total, "condition sum");
    ensure!(report.items_by_campus.values().sum::<u64>() == report.items_total, "campus sum");
    ensure!(report.items_by_category.values().sum::<u64>() == report.items_total, "category sum");
    ensure!(
        report.findings_open_at_end as usize == fx.records.iter().filter(|r| r.status != FindingStatus::Resolved).count(),
        "open at end {}",
        report.findings_open_at_end
    );

    let live = svc.store().read(|s| s.clone());
    let replayed = svc.store().replay_audit().map_err(|e| e.to_string())?;
    ensure!(replayed == live, "audit replay differs from live state");
    Ok(())
}

/// Permission keys per role, written out independently of the core matrix.
fn granted(role: Role) -> &'static [&'static str] {
    match role {
        Role::FacilitiesAdmin => &[
            "reference.write",
            "item.register",
            "item.read",
            "item.transfer",
            "item.status",
            "item.repair",
            "photo.upload",
            "finding.submit",
            "finding.read",
            "finding.read.own",
            "finding.follow_up",
            "finding.resolve",
            "report.read",
            "user.manage",
        ],
        Role::WorkUnit => &["finding.submit", "finding.read.own", "item.read", "photo.upload"],
        Role::Leadership => &["report.read", "item.read", "finding.read"],
    }
}

fn concrete(path: &str) -> String {
    path.split('/')
        .map(|seg| match seg {
            ":collection" => "brands",
            "*code" => "NOPE",
            ":barcode" => "NOPE-1",
            ":id" => "00000000-0000-7000-8000-000000000000",
            ":hash" => "0000000000000000000000000000000000000000000000000000000000000000",
            ":username" => "nobody",
            other => other,
        })
        .collect::<Vec<_>>()
        .join("/")
}

fn rbac_matrix() -> Check {
    let api = seeded_api();
    let users = [
        (Role::FacilitiesAdmin, "bpm_admin"),
        (Role::WorkUnit, "unit_b"),
        (Role::Leadership, "pimpinan"),
    ];
    let mut pairs = 0;
    for spec in ROUTES {
        let method = Method::from_bytes(spec.method.as_bytes()).unwrap();
        let url = api.server.url(&concrete(spec.path));
        let public = matches!(spec.path, "/api/login" | "/healthz");
        ensure!((spec.access == Access::Public) == public, "{} {} public={public}", spec.method, spec.path);
        if !public {
            let (status, _) = api.send(api.http.request(method.clone(), &url));
            ensure!(status == StatusCode::UNAUTHORIZED, "{} {} without a token: {status}", spec.method, spec.path);
        }
        for (role, user) in users {
            let allowed = match spec.access {
                Access::Public | Access::Session => true,
                Access::AnyOf(perms) => perms.iter().any(|p| granted(role).contains(&p.key())),
            };
            let token = api.login(user);
            let mut request = api.http.request(method.clone(), &url).bearer_auth(&token);
            if matches!(spec.method, "POST" | "PUT") {
                request = request.json(&json!({}));
            }
            let (status, body) = api.send(request);
            let denied = status == StatusCode::FORBIDDEN && body["details"]["route"] == spec.path;
            ensure!(status != StatusCode::UNAUTHORIZED, "{} {} as {role}: {body}", spec.method, spec.path);
            ensure!(denied != allowed, "{} {} as {role}: {status} {body}", spec.method, spec.path);
            pairs += 1;
        }
    }
    ensure!(pairs == ROUTES.len() * 3, "{pairs} pairs");
    Ok(())
}

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<u8>>>);

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn files_under(dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files_under(&path, out);
        } else {
            out.push((path.display().to_string(), std::fs::read(&path).unwrap()));
        }
    }
}

fn no_clear_text_passwords(logs: &Capture) -> Check {
    let secrets = [PASSWORD, "second-secret-phrase", "wrong-guess-1234", "operator-typed-secret"];
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let config = Config {
        data_dir: data.clone(),
        passwords: PasswordConfig::fast(),
        ..Config::default()
    };
    let mut artifacts: Vec<(String, Vec<u8>)> = Vec::new();
    {
        let svc = open_service(&config).map_err(|e| e.to_string())?;
        seed(&svc);
        add_user(&svc, "bpm_admin", Role::FacilitiesAdmin, &[]);
        let api = Api {
            server: TestServer::start(Arc::new(svc)),
            http: Client::new(),
        };
        let token = api.login("bpm_admin");
        let new_user = json!({ "username": "auditor", "password": secrets[1], "role": "LEADERSHIP" });
        for _ in 0..2 {
            let (_, body) = api.post(&token, "/api/users", new_user.clone());
            artifacts.push(("create user response".into(), body.to_string().into_bytes()));
        }
        for (user, password) in [("auditor", secrets[1]), ("auditor", secrets[2]), ("ghost", secrets[2])] {
            let (_, body) = api.send(
                api.http
                    .post(api.server.url("/api/login"))
                    .json(&json!({ "username": user, "password": password })),
            );
            artifacts.push((format!("login {user}"), body.to_string().into_bytes()));
        }
        for path in ["/api/users", "/api/audit", "/api/me"] {
            let (_, body) = api.get(&token, path);
            artifacts.push((path.into(), body.to_string().into_bytes()));
        }
        let store = api.server.svc.store();
        let audit = serde_json::to_vec(&store.audit_range(1, store.last_seq()).unwrap()).unwrap();
        artifacts.push(("audit".into(), audit));
    }

    let data = data.to_str().unwrap();
    let add = facmon(&[
        "--data-dir",
        data,
        "user",
        "add",
        "clerk",
        "--role",
        "work-unit",
        "--work-unit",
        "Fakultas Teknik",
        "--location",
        "B/B.201",
        "--new-password",
        secrets[3],
    ]);
    ensure!(add.status.success(), "user add: {}", String::from_utf8_lossy(&add.stderr));
    let list = facmon(&["--data-dir", data, "-o", "json", "user", "list"]);
    ensure!(list.status.success(), "user list: {}", String::from_utf8_lossy(&list.stderr));
    for (name, out) in [("cli add", add), ("cli list", list)] {
        artifacts.push((format!("{name} stdout"), out.stdout));
        artifacts.push((format!("{name} stderr"), out.stderr));
    }

    files_under(dir.path(), &mut artifacts);
    let log = logs.0.lock().unwrap().clone();
    ensure!(!log.is_empty(), "nothing was logged");
    artifacts.push(("log".into(), log));
    for secret in secrets {
        for (name, blob) in &artifacts {
            let leaked = blob.windows(secret.len()).any(|w| w == secret.as_bytes());
            ensure!(!leaked, "{name} contains a clear-text password");
        }
    }
    Ok(())
}

fn durability() -> Check {
    let open = |dir: &Path| {
        let backend = Arc::new(FileBackend::open(dir).unwrap());
        let store = Store::open(Box::new(backend.clone()), Arc::new(SystemClock)).unwrap();
        (Facilities::new(Arc::new(store), fast_settings()).unwrap(), backend)
    };
    for fault in [Fault::BeforeWrite, Fault::TornWrite] {
        let dir = tempfile::tempdir().unwrap();
        let before = {
            let (svc, backend) = open(dir.path());
            seed(&svc);
            svc.register_item(receipt("AC-001", "B.201"), &Actor::System).unwrap();
            let before = svc.store().read(|s| s.clone());
            backend.inject_fault(fault);
            // One commit carrying the item and its status-change record.
            let crashed = svc.change_status("AC-001", LifecycleEvent::ReportLightDamage, date("2018-05-01"), None, &Actor::System);
            ensure!(crashed.is_err(), "{fault:?}: commit reported success");
            ensure!(svc.store().read(|s| s.clone()) == before, "{fault:?}: partial commit visible");
            before
        };
        let (svc, _) = open(dir.path());
        ensure!(svc.store().read(|s| s.clone()) == before, "{fault:?}: recovered state differs");
        ensure!(svc.status_history("AC-001").unwrap().is_empty(), "{fault:?}: orphan status record");
        ensure!(svc.store().replay_audit().unwrap() == before, "{fault:?}: audit replay differs");
        svc.change_status("AC-001", LifecycleEvent::ReportLightDamage, date("2018-05-01"), None, &Actor::System)
            .map_err(|e| format!("{fault:?}: store not writable after recovery: {e}"))?;
    }

    // Export, import into a fresh data dir, export again.
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("source");
    let target = dir.path().join("target");
    {
        let svc = open_service(&Config {
            data_dir: source.clone(),
            ..Config::default()
        })
        .map_err(|e| e.to_string())?;
        seed(&svc);
        for n in 0..30 {
            let mut r = receipt(&format!("RT-{n:03}"), ROOMS[n % ROOMS.len()].1);
            r.name = match n % 3 {
                0 => format!("Kursi \"ergonomis\", hitam {n}"),
                1 => format!("Lemari arsip – {n}"),
                _ => format!("Meja {n}"),
            };
            r.custodian = "Biro Umum, Lt. 2".into();
            if n % 2 == 0 {
                r.warranty_end_date = Some(date("2020-01-31"));
                r.maintenance_interval_days = Some(90 + n as u32);
            }
            svc.register_item(r, &Actor::System).unwrap();
        }
    }
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let (source, target) = (source.to_str().unwrap(), target.to_str().unwrap());
    facmon_ok(&["--data-dir", source, "export", "items", first.to_str().unwrap()])?;
    facmon_ok(&["--data-dir", target, "seed"])?;
    facmon_ok(&["--data-dir", target, "import", "items", first.to_str().unwrap()])?;
    facmon_ok(&["--data-dir", target, "export", "items", second.to_str().unwrap()])?;
    let (a, b) = (std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    ensure!(a.iter().filter(|c| **c == b'\n').count() == 31, "first export has the wrong row count");
    ensure!(a == b, "round trip changed the export");
    Ok(())
}

// ---------------------------------------------------------------------------

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let logs = Capture::default();
    let sink = logs.clone();
    tracing_subscriber::fmt()
        .with_max_level(LevelFilter::TRACE)
        .with_writer(move || sink.clone())
        .with_ansi(false)
        .init();

    type Criterion<'a> = (&'a str, Option<Elapsed>, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("state machine: 30 condition x event pairs", Some(Elapsed::from_secs(1)), Box::new(state_machine)),
        ("workflow: finding to repair to resolution over HTTP", None, Box::new(workflow)),
        ("menu coverage: 7 reference, 5 processing, 7 monitoring entries", None, Box::new(menu_coverage)),
        ("seed: 20 categories in order", None, Box::new(seed_taxonomy)),
        ("oracle equivalence: filters, reports, warranty, maintenance", Some(Elapsed::from_secs(30)), Box::new(oracle_equivalence)),
        ("invariants: partition, conservation, one location, audit replay", None, Box::new(invariants)),
        ("rbac: every role x route against the matrix", None, Box::new(rbac_matrix)),
        ("rbac: no clear-text password in storage, logs or output", None, Box::new(|| no_clear_text_passwords(&logs))),
        ("durability: crash atomicity and CSV round trip", None, Box::new(durability)),
    ];

    let started = Instant::now();
    let mut failed = 0;
    for (name, budget, run) in &criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| Err(panic_text(p)));
        let took = t0.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(()), Some(limit)) if took > *limit => Err(format!("took {took:?}, budget {limit:?}")),
            (other, _) => other,
        };
        match outcome {
            Ok(()) => println!("PASS  {name}  ({:.2}s)", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}  ({:.2}s): {why}", took.as_secs_f64());
            }
        }
    }
    let total = started.elapsed();
    let in_time = total < Elapsed::from_secs(60);
    println!(
        "{}  total run under 60s  ({:.2}s)",
        if in_time { "PASS" } else { "FAIL" },
        total.as_secs_f64()
    );
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    std::io::stdout().flush().unwrap();
    if failed > 0 || !in_time {
        std::process::exit(1);
    }
}
