#![allow(dead_code)]

use std::sync::Arc;

use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

use facmon_api::testing::TestServer;
use facmon_core::auth::NewUser;
use facmon_core::domain::Role;
use facmon_core::registry::LocationAddress;
use facmon_core::{Actor, Facilities};

pub const PASSWORD: &str = "kata-sandi-rahasia-9";

/// (username, role) of the fixture accounts; the work unit sits in B.201.
pub const USERS: [(&str, Role); 3] = [
    ("bpm_admin", Role::FacilitiesAdmin),
    ("unit_b", Role::WorkUnit),
    ("pimpinan", Role::Leadership),
];

pub fn username(role: Role) -> &'static str {
    USERS.iter().find(|(_, r)| *r == role).unwrap().0
}

pub fn add_users(svc: &Facilities) {
    for (name, role) in USERS {
        let work_unit = (role == Role::WorkUnit).then(|| "Fakultas Teknik".to_string());
        let locations = if role == Role::WorkUnit {
            vec![LocationAddress::new("B", "B.201")]
        } else {
            Vec::new()
        };
        svc.add_user(
            NewUser {
                username: name.into(),
                password: PASSWORD.into(),
                role,
                work_unit_name: work_unit,
                locations,
            },
            &Actor::System,
        )
        .unwrap();
    }
}

pub struct Harness {
    pub server: TestServer,
    pub http: Client,
}

impl Harness {
    pub fn new(svc: Facilities) -> Harness {
        Harness::on(TestServer::start(Arc::new(svc)))
    }

    pub fn on(server: TestServer) -> Harness {
        Harness {
            server,
            http: Client::new(),
        }
    }

    /// Seeded references plus the three fixture accounts.
    pub fn seeded() -> Harness {
        let svc = facmon_core::testing::fixture_service();
        add_users(&svc);
        Harness::new(svc)
    }

    pub fn svc(&self) -> &Facilities {
        &self.server.svc
    }

    pub fn login(&self, user: &str) -> String {
        let (status, body) = self.send(
            self.http
                .post(self.server.url("/api/login"))
                .json(&json!({ "username": user, "password": PASSWORD })),
        );
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_string()
    }

    pub fn send(&self, request: RequestBuilder) -> (StatusCode, Value) {
        let response = request.send().expect("request failed");
        decode(response)
    }

    pub fn get(&self, token: &str, path: &str) -> (StatusCode, Value) {
        self.send(self.http.get(self.server.url(path)).bearer_auth(token))
    }

    pub fn post(&self, token: &str, path: &str, body: Value) -> (StatusCode, Value) {
        self.send(self.http.post(self.server.url(path)).bearer_auth(token).json(&body))
    }

    pub fn raw_get(&self, token: &str, path: &str) -> Response {
        self.http.get(self.server.url(path)).bearer_auth(token).send().unwrap()
    }
}

pub fn decode(response: Response) -> (StatusCode, Value) {
    let status = response.status();
    let bytes = response.bytes().unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub fn item_body(barcode: &str, room: &str) -> Value {
    serde_json::to_value(facmon_core::testing::receipt(barcode, room)).unwrap()
}
