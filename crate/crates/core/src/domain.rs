//! Value types shared by every module: identifiers, the condition state
//! machine, warranty arithmetic and input normalization. Nothing here touches
//! storage or performs I/O.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Uuid);

        impl $name {
            pub fn new() -> Self {
                Self(Uuid::now_v7())
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::new()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Uuid::parse_str(s.trim())
                    .map(Self)
                    .map_err(|_| Error::InvalidInput(format!("malformed identifier {s:?}")))
            }
        }
    };
}

id_type!(CampusId);
id_type!(LocationId);
id_type!(TaxonomyId);
id_type!(ItemId);
id_type!(TransferId);
id_type!(RepairId);
id_type!(StatusChangeId);
id_type!(
    /// Identifier of a monitoring record (a finding).
    RecordId
);
id_type!(UserId);

/// A barcode that passed [`normalize_barcode`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Barcode(String);

impl Barcode {
    pub fn parse(raw: &str) -> Result<Self> {
        normalize_barcode(raw).map(Barcode)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Barcode {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Barcode::parse(&value)
    }
}

impl From<Barcode> for String {
    fn from(value: Barcode) -> Self {
        value.0
    }
}

impl fmt::Display for Barcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const MAX_BARCODE_LEN: usize = 64;

/// Trims, uppercases and validates a raw barcode.
pub fn normalize_barcode(raw: &str) -> Result<String> {
    let normalized = raw.trim().to_uppercase();
    if normalized.is_empty() {
        return Err(Error::EmptyBarcode);
    }
    if !normalized
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
    {
        return Err(Error::InvalidChars);
    }
    if normalized.chars().count() > MAX_BARCODE_LEN {
        return Err(Error::TooLong);
    }
    Ok(normalized)
}

/// Campus codes: trimmed, uppercased, 1 to 8 letters/digits/'-'/'_'.
pub fn normalize_campus_code(raw: &str) -> Result<String> {
    normalize_code(raw, 8, "campus code")
}

/// Taxonomy codes share the campus rules with a 16 character ceiling.
pub fn normalize_taxonomy_code(raw: &str) -> Result<String> {
    normalize_code(raw, 16, "taxonomy code")
}

fn normalize_code(raw: &str, max: usize, what: &str) -> Result<String> {
    let code = raw.trim().to_uppercase();
    if code.is_empty() {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if code.len() > max {
        return Err(Error::InvalidInput(format!("{what} {code:?} exceeds {max} characters")));
    }
    if !code
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    {
        return Err(Error::InvalidInput(format!("{what} {code:?} has invalid characters")));
    }
    Ok(code)
}

/// Room codes such as `B.201`. Case is preserved; only surrounding space is removed.
pub fn normalize_location_code(raw: &str) -> Result<String> {
    let code = raw.trim();
    if code.is_empty() {
        return Err(Error::InvalidInput("location code is empty".into()));
    }
    if code.len() > 32 || code.chars().any(|c| c.is_whitespace() || c == ',') {
        return Err(Error::InvalidInput(format!("location code {code:?} is malformed")));
    }
    Ok(code.to_string())
}

pub(crate) fn required_text(value: &str, field: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        Err(Error::InvalidInput(format!("{field} is required")))
    } else {
        Ok(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Campus {
    pub id: CampusId,
    pub code: String,
    pub name: String,
    pub address: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    pub code: String,
    pub name: String,
    pub floor: u32,
    pub campus_id: CampusId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaxonomyKind {
    Category,
    Type,
    Brand,
    Source,
}

impl TaxonomyKind {
    pub const ALL: [TaxonomyKind; 4] = [
        TaxonomyKind::Category,
        TaxonomyKind::Type,
        TaxonomyKind::Brand,
        TaxonomyKind::Source,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaxonomyKind::Category => "CATEGORY",
            TaxonomyKind::Type => "TYPE",
            TaxonomyKind::Brand => "BRAND",
            TaxonomyKind::Source => "SOURCE",
        }
    }
}

impl fmt::Display for TaxonomyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyRef {
    pub id: TaxonomyId,
    pub kind: TaxonomyKind,
    pub code: String,
    pub name: String,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Good,
    LightDamage,
    HeavyDamage,
    Lost,
    Donated,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Good,
        Condition::LightDamage,
        Condition::HeavyDamage,
        Condition::Lost,
        Condition::Donated,
    ];

    /// Lost and donated items are no longer operable assets.
    pub fn is_terminal(self) -> bool {
        matches!(self, Condition::Lost | Condition::Donated)
    }

    pub fn is_damaged(self) -> bool {
        matches!(self, Condition::LightDamage | Condition::HeavyDamage)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Good => "GOOD",
            Condition::LightDamage => "LIGHT_DAMAGE",
            Condition::HeavyDamage => "HEAVY_DAMAGE",
            Condition::Lost => "LOST",
            Condition::Donated => "DONATED",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_uppercase().replace('-', "_");
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown condition {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LifecycleEvent {
    ReportLightDamage,
    ReportHeavyDamage,
    ReportLost,
    Donate,
    RepairComplete,
    Recover,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 6] = [
        LifecycleEvent::ReportLightDamage,
        LifecycleEvent::ReportHeavyDamage,
        LifecycleEvent::ReportLost,
        LifecycleEvent::Donate,
        LifecycleEvent::RepairComplete,
        LifecycleEvent::Recover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleEvent::ReportLightDamage => "REPORT_LIGHT_DAMAGE",
            LifecycleEvent::ReportHeavyDamage => "REPORT_HEAVY_DAMAGE",
            LifecycleEvent::ReportLost => "REPORT_LOST",
            LifecycleEvent::Donate => "DONATE",
            LifecycleEvent::RepairComplete => "REPAIR_COMPLETE",
            LifecycleEvent::Recover => "RECOVER",
        }
    }
}

impl fmt::Display for LifecycleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LifecycleEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_uppercase().replace('-', "_");
        LifecycleEvent::ALL
            .into_iter()
            .find(|e| e.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown lifecycle event {s:?}")))
    }
}

/// The condition transition table.
///
/// ```text
/// GOOD         --REPORT_LIGHT_DAMAGE--> LIGHT_DAMAGE
/// GOOD         --REPORT_HEAVY_DAMAGE--> HEAVY_DAMAGE
/// GOOD         --REPORT_LOST----------> LOST
/// GOOD         --DONATE---------------> DONATED
/// LIGHT_DAMAGE --REPAIR_COMPLETE------> GOOD
/// LIGHT_DAMAGE --REPORT_HEAVY_DAMAGE--> HEAVY_DAMAGE
/// LIGHT_DAMAGE --REPORT_LOST----------> LOST
/// HEAVY_DAMAGE --REPAIR_COMPLETE------> GOOD
/// HEAVY_DAMAGE --REPORT_LOST----------> LOST
/// HEAVY_DAMAGE --DONATE---------------> DONATED
/// LOST         --RECOVER--------------> GOOD
/// ```
///
/// DONATED accepts no event.
pub fn next_condition(current: Condition, event: LifecycleEvent) -> Result<Condition> {
    use Condition::*;
    use LifecycleEvent::*;
    let next = match (current, event) {
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
        (from, event) => return Err(Error::IllegalTransition { from, event }),
    };
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhotoView {
    Front,
    Side,
    Back,
    Serial,
}

impl PhotoView {
    pub const ALL: [PhotoView; 4] = [PhotoView::Front, PhotoView::Side, PhotoView::Back, PhotoView::Serial];

    pub fn as_str(self) -> &'static str {
        match self {
            PhotoView::Front => "FRONT",
            PhotoView::Side => "SIDE",
            PhotoView::Back => "BACK",
            PhotoView::Serial => "SERIAL",
        }
    }
}

impl FromStr for PhotoView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_uppercase();
        PhotoView::ALL
            .into_iter()
            .find(|v| v.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown photo view {s:?}")))
    }
}

/// Lowercase hex SHA-256 of stored bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContentHash(String);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        ContentHash(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for ContentHash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s.len() == 64 && s.chars().all(|c| c.is_ascii_hexdigit()) {
            Ok(ContentHash(s))
        } else {
            Err(Error::UnknownBlob(s))
        }
    }
}

impl TryFrom<String> for ContentHash {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<ContentHash> for String {
    fn from(value: ContentHash) -> Self {
        value.0
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotoRef {
    pub id: ContentHash,
    pub view: PhotoView,
    pub media_type: String,
    pub byte_length: u64,
}

pub const SUPPORTED_MEDIA_TYPES: [&str; 2] = ["image/jpeg", "image/png"];

/// Links `photo` into `photos`, replacing any photo with the same view.
pub(crate) fn link_photo(photos: &mut Vec<PhotoRef>, photo: PhotoRef) {
    photos.retain(|p| p.view != photo.view);
    photos.push(photo);
    photos.sort_by_key(|p| p.view);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub barcode: Barcode,
    pub name: String,
    pub specification: String,
    pub category_id: TaxonomyId,
    pub type_id: TaxonomyId,
    pub brand_id: TaxonomyId,
    pub source_id: TaxonomyId,
    pub purchase_date: NaiveDate,
    pub warranty_end_date: Option<NaiveDate>,
    pub maintenance_interval_days: Option<u32>,
    pub condition: Condition,
    pub location_id: LocationId,
    pub custodian: String,
    #[serde(default)]
    pub photos: Vec<PhotoRef>,
}

impl Item {
    pub fn taxonomy_ids(&self) -> [TaxonomyId; 4] {
        [self.category_id, self.type_id, self.brand_id, self.source_id]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    FacilitiesAdmin,
    WorkUnit,
    Leadership,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::FacilitiesAdmin, Role::WorkUnit, Role::Leadership];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::FacilitiesAdmin => "FACILITIES_ADMIN",
            Role::WorkUnit => "WORK_UNIT",
            Role::Leadership => "LEADERSHIP",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_uppercase().replace('-', "_");
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == wanted)
            .ok_or_else(|| Error::InvalidInput(format!("unknown role {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarrantyStatus {
    None,
    InWarranty { days_remaining: u32 },
    Expired { days_since: u32 },
}

/// Warranty standing on `as_of`. The end date itself still counts as covered.
pub fn warranty_status(warranty_end: Option<NaiveDate>, as_of: NaiveDate) -> WarrantyStatus {
    match warranty_end {
        None => WarrantyStatus::None,
        Some(end) => {
            let days = (end - as_of).num_days();
            if days >= 0 {
                WarrantyStatus::InWarranty {
                    days_remaining: days as u32,
                }
            } else {
                WarrantyStatus::Expired {
                    days_since: (-days) as u32,
                }
            }
        }
    }
}

/// Inclusive calendar period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl Period {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(Error::InvalidPeriod);
        }
        Ok(Period { from, to })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from <= date && date <= self.to
    }
}
