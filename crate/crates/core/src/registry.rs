//! Reference data (campuses, locations, the four taxonomies), goods receipt
//! and item photos.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::auth::{Actor, Permission};
use crate::domain::{
    link_photo, normalize_campus_code, normalize_location_code, normalize_taxonomy_code,
    required_text, Barcode, Campus, CampusId, Condition, ContentHash, Item, ItemId, Location,
    LocationId, PhotoRef, PhotoView, TaxonomyId, TaxonomyKind, TaxonomyRef, SUPPORTED_MEDIA_TYPES,
};
use crate::error::{Error, Result};
use crate::service::Facilities;
use crate::storage::{AuditDraft, Changeset, Entity, EntityKey, EntityKind, Expect, State};

/// The twenty default item categories, inserted as `C01`..`C20` in this order.
pub const DEFAULT_CATEGORIES: [&str; 20] = [
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

/// Header of the item CSV format, shared by import and export.
pub const ITEM_CSV_HEADER: [&str; 13] = [
    "barcode",
    "name",
    "specification",
    "category_code",
    "type_code",
    "brand_code",
    "source_code",
    "purchase_date",
    "warranty_end_date",
    "maintenance_interval_days",
    "campus_code",
    "location_code",
    "custodian",
];

/// A room addressed by codes, the way operators write it: campus `B`, room `B.201`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationAddress {
    pub campus_code: String,
    pub location_code: String,
}

impl LocationAddress {
    pub fn new(campus_code: impl Into<String>, location_code: impl Into<String>) -> Self {
        LocationAddress {
            campus_code: campus_code.into(),
            location_code: location_code.into(),
        }
    }

    pub fn resolve<'s>(&self, state: &'s State) -> Result<&'s Location> {
        let missing = || Error::UnknownLocation(self.to_string());
        let campus_code = normalize_campus_code(&self.campus_code).map_err(|_| missing())?;
        let code = normalize_location_code(&self.location_code).map_err(|_| missing())?;
        let campus = state.campus_by_code(&campus_code).ok_or_else(missing)?;
        state.location_by_code(campus.id, &code).ok_or_else(missing)
    }
}

impl std::fmt::Display for LocationAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.campus_code, self.location_code)
    }
}

/// Parses `CAMPUS/ROOM`, e.g. `B/B.201`.
impl std::str::FromStr for LocationAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (campus, room) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidInput(format!("location {s:?} must look like CAMPUS/ROOM")))?;
        Ok(LocationAddress::new(campus.trim(), room.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReferenceKind {
    Campus,
    Location,
    Category,
    Type,
    Brand,
    Source,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 6] = [
        ReferenceKind::Campus,
        ReferenceKind::Location,
        ReferenceKind::Category,
        ReferenceKind::Type,
        ReferenceKind::Brand,
        ReferenceKind::Source,
    ];

    pub fn taxonomy(self) -> Option<TaxonomyKind> {
        match self {
            ReferenceKind::Category => Some(TaxonomyKind::Category),
            ReferenceKind::Type => Some(TaxonomyKind::Type),
            ReferenceKind::Brand => Some(TaxonomyKind::Brand),
            ReferenceKind::Source => Some(TaxonomyKind::Source),
            ReferenceKind::Campus | ReferenceKind::Location => None,
        }
    }

    /// Plural path segment used by the HTTP API.
    pub fn collection(self) -> &'static str {
        match self {
            ReferenceKind::Campus => "campuses",
            ReferenceKind::Location => "locations",
            ReferenceKind::Category => "categories",
            ReferenceKind::Type => "types",
            ReferenceKind::Brand => "brands",
            ReferenceKind::Source => "sources",
        }
    }

    pub fn from_collection(segment: &str) -> Option<Self> {
        ReferenceKind::ALL.into_iter().find(|k| k.collection() == segment)
    }
}

/// Kind-specific fields for creating or updating a reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReferencePayload {
    Campus {
        code: String,
        name: String,
        #[serde(default)]
        address: String,
    },
    Location {
        campus_code: String,
        code: String,
        name: String,
        floor: u32,
    },
    #[serde(untagged)]
    Taxonomy {
        kind: TaxonomyKind,
        code: String,
        name: String,
        #[serde(default)]
        active: Option<bool>,
    },
}

impl ReferencePayload {
    pub fn taxonomy(kind: TaxonomyKind, code: &str, name: &str) -> Self {
        ReferencePayload::Taxonomy {
            kind,
            code: code.into(),
            name: name.into(),
            active: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Campus(Campus),
    Location(Location),
    Taxonomy(TaxonomyRef),
}

impl Reference {
    fn entity(&self) -> Entity {
        match self {
            Reference::Campus(c) => Entity::Campus(c.clone()),
            Reference::Location(l) => Entity::Location(l.clone()),
            Reference::Taxonomy(t) => Entity::Taxonomy(t.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Removal {
    Deleted,
    /// Cited by items; kept resolvable but hidden from new registrations.
    Deactivated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemReceipt {
    pub barcode: String,
    pub name: String,
    #[serde(default)]
    pub specification: String,
    pub category_code: String,
    pub type_code: String,
    pub brand_code: String,
    pub source_code: String,
    pub purchase_date: NaiveDate,
    #[serde(default)]
    pub warranty_end_date: Option<NaiveDate>,
    #[serde(default)]
    pub maintenance_interval_days: Option<u32>,
    pub campus_code: String,
    pub location_code: String,
    #[serde(default)]
    pub custodian: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFilter {
    pub campus: Option<String>,
    pub location: Option<String>,
    pub category: Option<String>,
    pub condition: Option<Condition>,
    pub text: Option<String>,
}

impl ItemFilter {
    pub fn matches(&self, state: &State, item: &Item) -> bool {
        let location = state.locations.get(&item.location_id);
        if let Some(campus) = &self.campus {
            let code = location.and_then(|l| state.campuses.get(&l.campus_id)).map(|c| c.code.as_str());
            if code != Some(campus.trim().to_uppercase().as_str()) {
                return false;
            }
        }
        if let Some(wanted) = &self.location {
            if location.map(|l| l.code.as_str()) != Some(wanted.trim()) {
                return false;
            }
        }
        if let Some(category) = &self.category {
            let code = state.taxonomy.get(&item.category_id).map(|t| t.code.as_str());
            if code != Some(category.trim().to_uppercase().as_str()) {
                return false;
            }
        }
        if let Some(condition) = self.condition {
            if item.condition != condition {
                return false;
            }
        }
        if let Some(text) = &self.text {
            let needle = text.trim().to_lowercase();
            let hit = [
                item.barcode.as_str(),
                &item.name,
                &item.specification,
                &item.custodian,
            ]
            .iter()
            .any(|field| field.to_lowercase().contains(&needle));
            if !hit {
                return false;
            }
        }
        true
    }
}

fn reference_in_use(code: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::ConstraintViolation(_) => Error::ReferenceInUse(code.to_string()),
        other => other,
    }
}

impl Facilities {
    /// Builds the reference a payload describes, reusing the id of an
    /// existing reference with the same code. Returns whether it exists.
    fn prepare_reference(&self, state: &State, payload: &ReferencePayload) -> Result<(Reference, bool)> {
        match payload {
            ReferencePayload::Campus { code, name, address } => {
                let code = normalize_campus_code(code)?;
                let existing = state.campus_by_code(&code);
                Ok((
                    Reference::Campus(Campus {
                        id: existing.map_or_else(CampusId::new, |c| c.id),
                        code,
                        name: required_text(name, "name")?,
                        address: address.trim().to_string(),
                    }),
                    existing.is_some(),
                ))
            }
            ReferencePayload::Location {
                campus_code,
                code,
                name,
                floor,
            } => {
                let campus_code = normalize_campus_code(campus_code)?;
                let campus = state
                    .campus_by_code(&campus_code)
                    .ok_or_else(|| Error::UnknownParent(campus_code.clone()))?;
                let code = normalize_location_code(code)?;
                if *floor < 1 {
                    return Err(Error::InvalidInput("floor must be at least 1".into()));
                }
                let existing = state.location_by_code(campus.id, &code);
                Ok((
                    Reference::Location(Location {
                        id: existing.map_or_else(LocationId::new, |l| l.id),
                        code,
                        name: required_text(name, "name")?,
                        floor: *floor,
                        campus_id: campus.id,
                    }),
                    existing.is_some(),
                ))
            }
            ReferencePayload::Taxonomy {
                kind,
                code,
                name,
                active,
            } => {
                let code = normalize_taxonomy_code(code)?;
                let existing = state.taxonomy_by_code(*kind, &code);
                Ok((
                    Reference::Taxonomy(TaxonomyRef {
                        id: existing.map_or_else(TaxonomyId::new, |t| t.id),
                        kind: *kind,
                        code,
                        name: required_text(name, "name")?,
                        active: active.unwrap_or_else(|| existing.map_or(true, |t| t.active)),
                    }),
                    existing.is_some(),
                ))
            }
        }
    }

    fn write_reference(&self, reference: Reference, version: Expect, actor: &Actor) -> Result<Reference> {
        let entity = reference.entity();
        let key = entity.key();
        self.store
            .commit(
                Changeset::new(AuditDraft::new(
                    actor.audit_id(),
                    Permission::ReferenceWrite.key(),
                    key.kind,
                    &key.id,
                ))
                .expect(key, version)
                .put(entity),
            )
            .map_err(|e| match e {
                Error::ConstraintViolation(msg) => Error::DuplicateCode(msg),
                other => other,
            })?;
        Ok(reference)
    }

    /// Creates a reference; fails with `DUPLICATE_CODE` if the code is taken.
    pub fn create_reference(&self, payload: ReferencePayload, actor: &Actor) -> Result<Reference> {
        actor.require(Permission::ReferenceWrite)?;
        let (reference, exists) = self.store.read(|s| self.prepare_reference(s, &payload))?;
        if exists {
            let code = match &reference {
                Reference::Campus(c) => c.code.clone(),
                Reference::Location(l) => l.code.clone(),
                Reference::Taxonomy(t) => t.code.clone(),
            };
            return Err(Error::DuplicateCode(code));
        }
        self.write_reference(reference, Expect::Absent, actor)
    }

    /// Creates the reference or updates the one with the same code.
    pub fn upsert_reference(&self, payload: ReferencePayload, actor: &Actor) -> Result<Reference> {
        actor.require(Permission::ReferenceWrite)?;
        let (reference, exists, version) = self.store.read(|s| {
            let (reference, exists) = self.prepare_reference(s, &payload)?;
            let version = s.version(&reference.entity().key());
            Ok::<_, Error>((reference, exists, version))
        })?;
        let expect = if exists { Expect::Version(version) } else { Expect::Absent };
        self.write_reference(reference, expect, actor)
    }

    pub fn list_references(&self, kind: ReferenceKind) -> Vec<Reference> {
        self.store.read(|s| match kind {
            ReferenceKind::Campus => {
                let mut v: Vec<_> = s.campuses.values().cloned().collect();
                v.sort_by(|a, b| a.code.cmp(&b.code));
                v.into_iter().map(Reference::Campus).collect()
            }
            ReferenceKind::Location => {
                let mut v: Vec<_> = s.locations.values().cloned().collect();
                let campus_code = |l: &Location| s.campuses.get(&l.campus_id).map(|c| c.code.clone());
                v.sort_by(|a, b| (campus_code(a), &a.code).cmp(&(campus_code(b), &b.code)));
                v.into_iter().map(Reference::Location).collect()
            }
            other => {
                let kind = other.taxonomy().expect("taxonomy kind");
                let mut v: Vec<_> = s.taxonomy.values().filter(|t| t.kind == kind).cloned().collect();
                v.sort_by(|a, b| a.code.cmp(&b.code));
                v.into_iter().map(Reference::Taxonomy).collect()
            }
        })
    }

    /// Removes an uncited reference. Cited taxonomy entries are deactivated
    /// instead; cited campuses and locations are refused.
    ///
    /// `code` is `CAMPUS/ROOM` for locations.
    pub fn remove_reference(&self, kind: ReferenceKind, code: &str, actor: &Actor) -> Result<Removal> {
        actor.require(Permission::ReferenceWrite)?;
        let unknown = || Error::UnknownReference(format!("{} {code}", kind.collection()));
        let (key, version, taxonomy) = self.store.read(|s| {
            let (key, taxonomy) = match kind {
                ReferenceKind::Campus => {
                    let c = s.campus_by_code(&normalize_campus_code(code)?).ok_or_else(unknown)?;
                    (EntityKey::new(EntityKind::Campus, c.id), None)
                }
                ReferenceKind::Location => {
                    let l = code
                        .parse::<LocationAddress>()?
                        .resolve(s)
                        .map_err(|_| unknown())?;
                    (EntityKey::new(EntityKind::Location, l.id), None)
                }
                other => {
                    let kind = other.taxonomy().expect("taxonomy kind");
                    let t = s
                        .taxonomy_by_code(kind, &normalize_taxonomy_code(code)?)
                        .ok_or_else(unknown)?;
                    let cited = s.items.values().any(|i| i.taxonomy_ids().contains(&t.id));
                    (EntityKey::new(EntityKind::Taxonomy, t.id), cited.then(|| t.clone()))
                }
            };
            let version = s.version(&key);
            Ok::<_, Error>((key, version, taxonomy))
        })?;
        let audit = AuditDraft::new(actor.audit_id(), Permission::ReferenceWrite.key(), key.kind, &key.id);
        match taxonomy {
            Some(mut t) => {
                t.active = false;
                self.store.commit(
                    Changeset::new(audit)
                        .expect(key, Expect::Version(version))
                        .put(Entity::Taxonomy(t)),
                )?;
                Ok(Removal::Deactivated)
            }
            None => {
                self.store
                    .commit(Changeset::new(audit).expect(key.clone(), Expect::Version(version)).delete(key))
                    .map_err(reference_in_use(code))?;
                Ok(Removal::Deleted)
            }
        }
    }

    /// Inserts the twenty default categories as `C01`..`C20`.
    pub fn seed_default_categories(&self, actor: &Actor) -> Result<Vec<TaxonomyRef>> {
        actor.require(Permission::ReferenceWrite)?;
        let categories: Vec<TaxonomyRef> = DEFAULT_CATEGORIES
            .iter()
            .enumerate()
            .map(|(i, name)| TaxonomyRef {
                id: TaxonomyId::new(),
                kind: TaxonomyKind::Category,
                code: format!("C{:02}", i + 1),
                name: name.to_string(),
                active: true,
            })
            .collect();
        if let Some(collision) = self.store.read(|s| {
            categories
                .iter()
                .find(|c| s.taxonomy_by_code(TaxonomyKind::Category, &c.code).is_some())
                .map(|c| c.code.clone())
        }) {
            return Err(Error::AlreadySeeded(collision));
        }
        let mut changeset = Changeset::new(AuditDraft::new(
            actor.audit_id(),
            "reference.seed",
            EntityKind::Batch,
            "categories",
        ));
        for c in &categories {
            changeset = changeset.put(Entity::Taxonomy(c.clone()));
        }
        self.store.commit(changeset).map_err(|e| match e {
            Error::ConstraintViolation(msg) => Error::AlreadySeeded(msg),
            other => other,
        })?;
        Ok(categories)
    }

    /// Demonstration campuses, rooms, item types, brands and sources.
    /// Existing codes are left untouched.
    pub fn seed_demo_references(&self, actor: &Actor) -> Result<usize> {
        actor.require(Permission::ReferenceWrite)?;
        let campus = |code: &str, name: &str, address: &str| ReferencePayload::Campus {
            code: code.into(),
            name: name.into(),
            address: address.into(),
        };
        let room = |campus: &str, code: &str, name: &str, floor: u32| ReferencePayload::Location {
            campus_code: campus.into(),
            code: code.into(),
            name: name.into(),
            floor,
        };
        let tax = ReferencePayload::taxonomy;
        let payloads = vec![
            campus("A", "Kampus A", "Jl. Kampus A No. 1"),
            campus("B", "Kampus B", "Jl. Kampus B No. 2"),
            room("A", "A.101", "Ruang Kuliah A.101", 1),
            room("A", "A.102", "Laboratorium Komputer A.102", 1),
            room("B", "B.201", "Ruang Admin B.201", 2),
            room("B", "B.202", "Ruang Rapat B.202", 2),
            room("B", "B.301", "Ruang Dosen B.301", 3),
            tax(TaxonomyKind::Type, "ELK", "Elektronik"),
            tax(TaxonomyKind::Type, "MBL", "Mebel"),
            tax(TaxonomyKind::Type, "KMP", "Perangkat Komputer"),
            tax(TaxonomyKind::Brand, "DAIKIN", "Daikin"),
            tax(TaxonomyKind::Brand, "LENOVO", "Lenovo"),
            tax(TaxonomyKind::Brand, "EPSON", "Epson"),
            tax(TaxonomyKind::Brand, "OLYMPIC", "Olympic"),
            tax(TaxonomyKind::Source, "BELI", "Pembelian"),
            tax(TaxonomyKind::Source, "HIBAH", "Hibah Yayasan"),
        ];
        let mut created = 0;
        for payload in payloads {
            match self.create_reference(payload, actor) {
                Ok(_) => created += 1,
                Err(Error::DuplicateCode(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(created)
    }

    fn build_item(&self, state: &State, receipt: &ItemReceipt) -> Result<Item> {
        let barcode = Barcode::parse(&receipt.barcode)?;
        if state.item_by_barcode(&barcode).is_some() {
            return Err(Error::DuplicateBarcode(barcode.to_string()));
        }
        if let Some(end) = receipt.warranty_end_date {
            if end < receipt.purchase_date {
                return Err(Error::InvalidWarrantyRange);
            }
        }
        if receipt.maintenance_interval_days == Some(0) {
            return Err(Error::InvalidInput("maintenance interval must be positive".into()));
        }
        let active_ref = |kind: TaxonomyKind, code: &str| {
            let unknown = || Error::UnknownReference(format!("{} {}", kind.as_str().to_lowercase(), code.trim()));
            let code = normalize_taxonomy_code(code).map_err(|_| unknown())?;
            match state.taxonomy_by_code(kind, &code) {
                Some(t) if t.active => Ok(t.id),
                _ => Err(unknown()),
            }
        };
        let category_id = active_ref(TaxonomyKind::Category, &receipt.category_code)?;
        let type_id = active_ref(TaxonomyKind::Type, &receipt.type_code)?;
        let brand_id = active_ref(TaxonomyKind::Brand, &receipt.brand_code)?;
        let source_id = active_ref(TaxonomyKind::Source, &receipt.source_code)?;
        let location = LocationAddress::new(&receipt.campus_code, &receipt.location_code)
            .resolve(state)
            .map_err(|e| Error::UnknownReference(e.to_string()))?;
        Ok(Item {
            id: ItemId::new(),
            barcode,
            name: required_text(&receipt.name, "name")?,
            specification: receipt.specification.trim().to_string(),
            category_id,
            type_id,
            brand_id,
            source_id,
            purchase_date: receipt.purchase_date,
            warranty_end_date: receipt.warranty_end_date,
            maintenance_interval_days: receipt.maintenance_interval_days,
            condition: Condition::Good,
            location_id: location.id,
            custodian: receipt.custodian.trim().to_string(),
            photos: Vec::new(),
        })
    }

    /// Goods receipt: validates and stores a new item in condition GOOD.
    pub fn register_item(&self, receipt: ItemReceipt, actor: &Actor) -> Result<Item> {
        actor.require(Permission::ItemRegister)?;
        let item = self.store.read(|s| self.build_item(s, &receipt))?;
        let barcode = item.barcode.to_string();
        self.store
            .commit(
                Changeset::new(AuditDraft::new(
                    actor.audit_id(),
                    Permission::ItemRegister.key(),
                    EntityKind::Item,
                    item.id,
                ))
                .put(Entity::Item(item.clone())),
            )
            .map_err(|e| match e {
                Error::ConstraintViolation(msg) if msg.contains("barcode") => Error::DuplicateBarcode(barcode),
                other => other,
            })?;
        Ok(item)
    }

    /// Registers every receipt in one commit, or none of them. Errors carry
    /// the 1-based position of the offending receipt plus `row_offset`.
    pub fn register_items(&self, receipts: &[ItemReceipt], row_offset: usize, actor: &Actor) -> Result<Vec<Item>> {
        actor.require(Permission::ItemRegister)?;
        let items = self.store.read(|s| {
            let mut seen = BTreeMap::new();
            receipts
                .iter()
                .enumerate()
                .map(|(i, receipt)| {
                    let row = i + 1 + row_offset;
                    let item = self
                        .build_item(s, receipt)
                        .map_err(|e| Error::ImportRow { row, source: Box::new(e) })?;
                    if let Some(first) = seen.insert(item.barcode.clone(), row) {
                        return Err(Error::ImportRow {
                            row,
                            source: Box::new(Error::DuplicateBarcode(format!(
                                "{} (also on row {first})",
                                item.barcode
                            ))),
                        });
                    }
                    Ok(item)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        if items.is_empty() {
            return Ok(items);
        }
        let mut changeset = Changeset::new(AuditDraft::new(
            actor.audit_id(),
            "item.import",
            EntityKind::Batch,
            format!("{} items", items.len()),
        ));
        for item in &items {
            changeset = changeset.put(Entity::Item(item.clone()));
        }
        self.store.commit(changeset)?;
        Ok(items)
    }

    /// Reads the item CSV format and registers all rows atomically.
    pub fn import_items_csv(&self, input: impl Read, actor: &Actor) -> Result<usize> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().ne(ITEM_CSV_HEADER.iter().copied()) {
            return Err(Error::HeaderMismatch);
        }
        let mut receipts = Vec::new();
        for (i, record) in reader.records().enumerate() {
            // Header is line 1; data rows are reported by file line.
            let row = i + 2;
            let wrap = |e: Error| Error::ImportRow { row, source: Box::new(e) };
            let record = record.map_err(|e| wrap(e.into()))?;
            receipts.push(receipt_from_row(&record).map_err(wrap)?);
        }
        // register_items numbers from 1; shift so rows match file lines.
        Ok(self.register_items(&receipts, 1, actor)?.len())
    }

    /// Next free `{campus}-{category}-{NNNNN}` barcode.
    pub fn generate_barcode(&self, campus_code: &str, category_code: &str) -> Result<String> {
        let campus = normalize_campus_code(campus_code)?;
        let category = normalize_taxonomy_code(category_code)?;
        self.store.read(|s| {
            if s.campus_by_code(&campus).is_none() {
                return Err(Error::UnknownReference(format!("campus {campus}")));
            }
            if s.taxonomy_by_code(TaxonomyKind::Category, &category).is_none() {
                return Err(Error::UnknownReference(format!("category {category}")));
            }
            let prefix = format!("{campus}-{category}-");
            let next = s
                .items
                .values()
                .filter_map(|i| i.barcode.as_str().strip_prefix(&prefix))
                .filter_map(|rest| rest.parse::<u32>().ok())
                .max()
                .unwrap_or(0)
                + 1;
            Ok(format!("{prefix}{next:05}"))
        })
    }

    pub fn get_item(&self, barcode: &str) -> Result<Item> {
        let barcode = Barcode::parse(barcode).map_err(|_| Error::UnknownItem(barcode.trim().to_string()))?;
        self.store.read(|s| {
            s.item_by_barcode(&barcode)
                .cloned()
                .ok_or_else(|| Error::UnknownItem(barcode.to_string()))
        })
    }

    /// [`Facilities::get_item`] as seen by `actor`. Items outside a work
    /// unit's rooms look missing.
    pub fn item_for(&self, barcode: &str, actor: &Actor) -> Result<Item> {
        self.versioned_item_for(barcode, actor).map(|(item, _)| item)
    }

    /// The item with its entity version, for optimistic writes.
    pub fn versioned_item_for(&self, barcode: &str, actor: &Actor) -> Result<(Item, u64)> {
        actor.require(Permission::ItemRead)?;
        let (item, version) = self.item_with_version(barcode)?;
        if !actor.sees_location(item.location_id) {
            return Err(Error::UnknownItem(item.barcode.to_string()));
        }
        Ok((item, version))
    }

    /// [`Facilities::list_items`] restricted to what `actor` may see.
    pub fn items_for(&self, filter: &ItemFilter, actor: &Actor) -> Result<Vec<Item>> {
        actor.require(Permission::ItemRead)?;
        let mut items = self.list_items(filter);
        items.retain(|i| actor.sees_location(i.location_id));
        Ok(items)
    }

    /// Items matching every given filter field, by barcode ascending.
    pub fn list_items(&self, filter: &ItemFilter) -> Vec<Item> {
        self.store.read(|s| list_items_in(s, filter))
    }

    /// Stores a photo and links it to the item under `view`, replacing any
    /// earlier photo for that view. Old bytes stay in the blob store.
    pub fn attach_photo(
        &self,
        barcode: &str,
        view: PhotoView,
        bytes: &[u8],
        media_type: &str,
        actor: &Actor,
    ) -> Result<PhotoRef> {
        actor.require(Permission::PhotoUpload)?;
        let (mut item, version) = self.item_with_version(barcode)?;
        if !actor.sees_location(item.location_id) {
            return Err(Error::Forbidden(actor.role().to_string()));
        }
        let photo = self.store_photo(view, bytes, media_type)?;
        let key = EntityKey::new(EntityKind::Item, item.id);
        link_photo(&mut item.photos, photo.clone());
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::PhotoUpload.key(),
                EntityKind::Item,
                item.id,
            ))
            .expect(key, Expect::Version(version))
            .put(Entity::Item(item)),
        )?;
        Ok(photo)
    }

    pub(crate) fn item_with_version(&self, barcode: &str) -> Result<(Item, u64)> {
        let parsed = Barcode::parse(barcode).map_err(|_| Error::UnknownItem(barcode.trim().to_string()))?;
        self.store.read(|s| {
            let item = s
                .item_by_barcode(&parsed)
                .ok_or_else(|| Error::UnknownItem(parsed.to_string()))?;
            Ok((item.clone(), s.version(&EntityKey::new(EntityKind::Item, item.id))))
        })
    }

    pub(crate) fn store_photo(&self, view: PhotoView, bytes: &[u8], media_type: &str) -> Result<PhotoRef> {
        if bytes.is_empty() {
            return Err(Error::EmptyPayload);
        }
        let media_type = media_type.trim().to_ascii_lowercase();
        if !SUPPORTED_MEDIA_TYPES.contains(&media_type.as_str()) {
            return Err(Error::UnsupportedMediaType(media_type));
        }
        let id = self.store.put_blob(bytes)?;
        Ok(PhotoRef {
            id,
            view,
            media_type,
            byte_length: bytes.len() as u64,
        })
    }

    pub fn get_photo(&self, hash: &str) -> Result<(Vec<u8>, Option<String>)> {
        let hash: ContentHash = hash.parse()?;
        let bytes = self.store.get_blob(&hash)?;
        let media_type = self.store.read(|s| {
            s.items
                .values()
                .flat_map(|i| i.photos.iter())
                .chain(s.findings.values().flat_map(|f| f.photos.iter()))
                .find(|p| p.id == hash)
                .map(|p| p.media_type.clone())
        });
        Ok((bytes, media_type))
    }
}

pub(crate) fn list_items_in(state: &State, filter: &ItemFilter) -> Vec<Item> {
    let mut items: Vec<Item> = state
        .items
        .values()
        .filter(|i| filter.matches(state, i))
        .cloned()
        .collect();
    items.sort_by(|a, b| a.barcode.cmp(&b.barcode));
    items
}

fn optional_cell(cell: &str) -> Option<&str> {
    let cell = cell.trim();
    (!cell.is_empty()).then_some(cell)
}

fn parse_date(cell: &str, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(cell.trim(), "%Y-%m-%d")
        .map_err(|_| Error::InvalidInput(format!("{field} {cell:?} is not a YYYY-MM-DD date")))
}

fn receipt_from_row(record: &csv::StringRecord) -> Result<ItemReceipt> {
    let cell = |i: usize| record.get(i).unwrap_or("");
    Ok(ItemReceipt {
        barcode: cell(0).to_string(),
        name: cell(1).to_string(),
        specification: cell(2).to_string(),
        category_code: cell(3).to_string(),
        type_code: cell(4).to_string(),
        brand_code: cell(5).to_string(),
        source_code: cell(6).to_string(),
        purchase_date: parse_date(cell(7), "purchase_date")?,
        warranty_end_date: optional_cell(cell(8))
            .map(|c| parse_date(c, "warranty_end_date"))
            .transpose()?,
        maintenance_interval_days: optional_cell(cell(9))
            .map(|c| {
                c.parse::<u32>()
                    .map_err(|_| Error::InvalidInput(format!("maintenance_interval_days {c:?} is not a number")))
            })
            .transpose()?,
        campus_code: cell(10).to_string(),
        location_code: cell(11).to_string(),
        custodian: cell(12).to_string(),
    })
}

/// One CSV row for `item`, in [`ITEM_CSV_HEADER`] order.
pub(crate) fn item_row(state: &State, item: &Item) -> [String; 13] {
    let code = |id: &TaxonomyId| state.taxonomy.get(id).map(|t| t.code.clone()).unwrap_or_default();
    let location = state.locations.get(&item.location_id);
    let campus = location.and_then(|l| state.campuses.get(&l.campus_id));
    [
        item.barcode.to_string(),
        item.name.clone(),
        item.specification.clone(),
        code(&item.category_id),
        code(&item.type_id),
        code(&item.brand_id),
        code(&item.source_id),
        item.purchase_date.format("%Y-%m-%d").to_string(),
        item.warranty_end_date
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default(),
        item.maintenance_interval_days.map(|d| d.to_string()).unwrap_or_default(),
        campus.map(|c| c.code.clone()).unwrap_or_default(),
        location.map(|l| l.code.clone()).unwrap_or_default(),
        item.custodian.clone(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{empty_service, fixture_service, receipt};

    #[test]
    fn reference_examples() {
        let svc = empty_service();
        let campus = svc
            .create_reference(
                ReferencePayload::Campus {
                    code: "B".into(),
                    name: "Kampus B".into(),
                    address: "...".into(),
                },
                &Actor::System,
            )
            .unwrap();
        let Reference::Campus(campus) = campus else { panic!() };
        let room = svc
            .create_reference(
                ReferencePayload::Location {
                    campus_code: "B".into(),
                    code: "B.201".into(),
                    name: "Ruang Admin".into(),
                    floor: 2,
                },
                &Actor::System,
            )
            .unwrap();
        let Reference::Location(room) = room else { panic!() };
        assert_eq!(room.campus_id, campus.id);
        assert_eq!(room.floor, 2);

        let dup = svc.create_reference(
            ReferencePayload::Campus {
                code: "b".into(),
                name: "Again".into(),
                address: String::new(),
            },
            &Actor::System,
        );
        assert!(matches!(dup, Err(Error::DuplicateCode(_))));

        let orphan = svc.create_reference(
            ReferencePayload::Location {
                campus_code: "Z".into(),
                code: "Z.1".into(),
                name: "Nowhere".into(),
                floor: 1,
            },
            &Actor::System,
        );
        assert!(matches!(orphan, Err(Error::UnknownParent(_))));

        let ground = svc.create_reference(
            ReferencePayload::Location {
                campus_code: "B".into(),
                code: "B.001".into(),
                name: "Basement".into(),
                floor: 0,
            },
            &Actor::System,
        );
        assert!(matches!(ground, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn upsert_updates_in_place() {
        let svc = empty_service();
        let payload = |name: &str| ReferencePayload::taxonomy(TaxonomyKind::Brand, "daikin", name);
        let Reference::Taxonomy(first) = svc.upsert_reference(payload("Daikin"), &Actor::System).unwrap() else {
            panic!()
        };
        let Reference::Taxonomy(second) = svc.upsert_reference(payload("Daikin Industries"), &Actor::System).unwrap()
        else {
            panic!()
        };
        assert_eq!(first.id, second.id);
        assert_eq!(second.code, "DAIKIN");
        assert_eq!(svc.list_references(ReferenceKind::Brand).len(), 1);
        assert_eq!(svc.store().last_seq(), 2);
    }

    #[test]
    fn seeding_categories() {
        let svc = empty_service();
        let seeded = svc.seed_default_categories(&Actor::System).unwrap();
        assert_eq!(seeded.len(), 20);
        assert_eq!(seeded[0].code, "C01");
        assert_eq!(seeded[0].name, "Mesin ketik dan Hitung");
        assert_eq!(seeded[19].code, "C20");
        assert_eq!(seeded[19].name, "Peralatan Percetakan");
        assert_eq!(svc.list_references(ReferenceKind::Category).len(), 20);
        assert!(matches!(
            svc.seed_default_categories(&Actor::System),
            Err(Error::AlreadySeeded(_))
        ));
        assert_eq!(svc.list_references(ReferenceKind::Category).len(), 20);
    }

    #[test]
    fn register_item_examples() {
        let svc = fixture_service();
        let mut ac = receipt("AC-001", "B.201");
        ac.name = "AC Split 1 PK".into();
        ac.category_code = "C07".into();
        ac.maintenance_interval_days = Some(90);
        let item = svc.register_item(ac.clone(), &Actor::System).unwrap();
        assert_eq!(item.condition, Condition::Good);
        assert_eq!(item.maintenance_interval_days, Some(90));

        assert!(matches!(
            svc.register_item(ac.clone(), &Actor::System),
            Err(Error::DuplicateBarcode(_))
        ));
        let mut lower = ac.clone();
        lower.barcode = " ac-001 ".into();
        assert!(matches!(svc.register_item(lower, &Actor::System), Err(Error::DuplicateBarcode(_))));

        let mut bad = receipt("AC-002", "B.201");
        bad.warranty_end_date = Some(bad.purchase_date.pred_opt().unwrap());
        assert!(matches!(svc.register_item(bad, &Actor::System), Err(Error::InvalidWarrantyRange)));

        let mut unknown = receipt("AC-003", "B.201");
        unknown.brand_code = "NOPE".into();
        let err = svc.register_item(unknown, &Actor::System).unwrap_err();
        assert!(matches!(err, Error::UnknownReference(ref w) if w.contains("NOPE")), "{err}");

        let mut nowhere = receipt("AC-004", "Z.999");
        nowhere.campus_code = "B".into();
        assert!(matches!(svc.register_item(nowhere, &Actor::System), Err(Error::UnknownReference(_))));
    }

    #[test]
    fn deactivated_taxonomy_stays_resolvable_but_blocks_new_receipts() {
        let svc = fixture_service();
        let item = svc.register_item(receipt("P-1", "B.201"), &Actor::System).unwrap();
        let outcome = svc.remove_reference(ReferenceKind::Brand, "LENOVO", &Actor::System).unwrap();
        assert_eq!(outcome, Removal::Deactivated);
        svc.store().read(|s| assert!(!s.taxonomy[&item.brand_id].active));
        assert!(matches!(
            svc.register_item(receipt("P-2", "B.201"), &Actor::System),
            Err(Error::UnknownReference(_))
        ));
        assert_eq!(svc.get_item("P-1").unwrap().brand_id, item.brand_id);

        assert_eq!(
            svc.remove_reference(ReferenceKind::Brand, "OLYMPIC", &Actor::System).unwrap(),
            Removal::Deleted
        );
        assert!(matches!(
            svc.remove_reference(ReferenceKind::Location, "B/B.201", &Actor::System),
            Err(Error::ReferenceInUse(_))
        ));
        assert_eq!(
            svc.remove_reference(ReferenceKind::Location, "B/B.301", &Actor::System).unwrap(),
            Removal::Deleted
        );
    }

    #[test]
    fn photos_are_content_addressed() {
        let svc = fixture_service();
        svc.register_item(receipt("AC-001", "B.201"), &Actor::System).unwrap();
        svc.register_item(receipt("AC-002", "B.202"), &Actor::System).unwrap();
        let jpeg = vec![0xFFu8; 10 * 1024];
        let a = svc.attach_photo("AC-001", PhotoView::Front, &jpeg, "image/jpeg", &Actor::System).unwrap();
        let b = svc.attach_photo("AC-002", PhotoView::Front, &jpeg, "image/jpeg", &Actor::System).unwrap();
        assert_eq!(a.id, ContentHash::of(&jpeg));
        assert_eq!(a.id, b.id);
        assert_eq!(a.byte_length, 10 * 1024);
        assert_eq!(svc.get_item("AC-001").unwrap().photos, vec![a.clone()]);
        assert_eq!(svc.get_item("AC-002").unwrap().photos, vec![b]);

        let replacement = svc
            .attach_photo("AC-001", PhotoView::Front, b"png bytes", "image/png", &Actor::System)
            .unwrap();
        let photos = svc.get_item("AC-001").unwrap().photos;
        assert_eq!(photos, vec![replacement]);
        assert_eq!(svc.store().get_blob(&a.id).unwrap(), jpeg, "old bytes retained");

        assert!(matches!(
            svc.attach_photo("NOPE", PhotoView::Side, b"x", "image/png", &Actor::System),
            Err(Error::UnknownItem(_))
        ));
        assert!(matches!(
            svc.attach_photo("AC-001", PhotoView::Side, b"", "image/png", &Actor::System),
            Err(Error::EmptyPayload)
        ));
        assert!(matches!(
            svc.attach_photo("AC-001", PhotoView::Side, b"x", "image/gif", &Actor::System),
            Err(Error::UnsupportedMediaType(_))
        ));
    }

    #[test]
    fn list_items_filters_and_orders() {
        let svc = fixture_service();
        assert!(svc.list_items(&ItemFilter::default()).is_empty());
        for (code, room) in [("Z-3", "B.201"), ("A-1", "B.202"), ("M-2", "B.201")] {
            svc.register_item(receipt(code, room), &Actor::System).unwrap();
        }
        let all: Vec<_> = svc
            .list_items(&ItemFilter::default())
            .into_iter()
            .map(|i| i.barcode.to_string())
            .collect();
        assert_eq!(all, ["A-1", "M-2", "Z-3"]);
        let at_201 = svc.list_items(&ItemFilter {
            location: Some("B.201".into()),
            ..Default::default()
        });
        assert_eq!(at_201.len(), 2);
        let text = svc.list_items(&ItemFilter {
            text: Some("m-2".into()),
            ..Default::default()
        });
        assert_eq!(text.len(), 1);
        assert!(matches!(svc.get_item("missing"), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn generated_barcodes_count_up() {
        let svc = fixture_service();
        assert_eq!(svc.generate_barcode("B", "C07").unwrap(), "B-C07-00001");
        svc.register_item(receipt("B-C07-00001", "B.201"), &Actor::System).unwrap();
        assert_eq!(svc.generate_barcode("b", "c07").unwrap(), "B-C07-00002");
        assert!(svc.generate_barcode("Q", "C07").is_err());
    }

    #[test]
    fn csv_import_is_all_or_nothing() {
        let svc = fixture_service();
        let header = ITEM_CSV_HEADER.join(",");
        let good = "AC-1,AC Split,1 PK,C07,ELK,DAIKIN,BELI,2018-01-01,2019-01-01,90,B,B.201,Pak Budi";
        let dup = "AC-1,AC Split,1 PK,C07,ELK,DAIKIN,BELI,2018-01-01,,,B,B.201,Pak Budi";
        let err = svc
            .import_items_csv(format!("{header}\n{good}\n{dup}\n").as_bytes(), &Actor::System)
            .unwrap_err();
        assert!(matches!(err, Error::ImportRow { row: 3, .. }), "{err}");
        assert!(svc.list_items(&ItemFilter::default()).is_empty());

        assert_eq!(svc.import_items_csv(format!("{header}\n").as_bytes(), &Actor::System).unwrap(), 0);
        assert!(matches!(
            svc.import_items_csv("barcode,name\n".as_bytes(), &Actor::System),
            Err(Error::HeaderMismatch)
        ));
        assert_eq!(svc.import_items_csv(format!("{header}\n{good}\n").as_bytes(), &Actor::System).unwrap(), 1);
        let item = svc.get_item("AC-1").unwrap();
        assert_eq!(item.maintenance_interval_days, Some(90));
    }
}
