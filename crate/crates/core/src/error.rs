use thiserror::Error;

use crate::domain::{Condition, LifecycleEvent};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure a domain operation can report.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// that the HTTP layer maps onto a status and the CLI prints on stderr.
#[derive(Debug, Error)]
pub enum Error {
    #[error("barcode is empty")]
    EmptyBarcode,
    #[error("barcode contains characters other than letters, digits, '-' and '.'")]
    InvalidChars,
    #[error("barcode is longer than 64 characters")]
    TooLong,
    #[error("illegal transition: {event} is not allowed from {from}")]
    IllegalTransition {
        from: Condition,
        event: LifecycleEvent,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("code {0} already exists")]
    DuplicateCode(String),
    #[error("unknown parent campus {0}")]
    UnknownParent(String),
    #[error("categories already seeded ({0} collides)")]
    AlreadySeeded(String),
    #[error("barcode {0} is already registered")]
    DuplicateBarcode(String),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
    #[error("reference {0} is still cited")]
    ReferenceInUse(String),
    #[error("warranty end date precedes purchase date")]
    InvalidWarrantyRange,
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("unsupported media type {0}")]
    UnsupportedMediaType(String),

    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("item is already at that location")]
    SameLocation,
    #[error("item {0} is lost or donated")]
    TerminalItem(String),
    #[error("item {0} is not damaged")]
    NotDamaged(String),
    #[error("item {0} already has an open repair")]
    RepairAlreadyOpen(String),
    #[error("unknown repair {0}")]
    UnknownRepair(String),
    #[error("repair {0} is already completed")]
    AlreadyCompleted(String),
    #[error("end date precedes start date")]
    InvalidDateOrder,

    #[error("unknown monitoring record {0}")]
    UnknownRecord(String),
    #[error("record is {0}")]
    WrongState(String),
    #[error("finding text is empty")]
    EmptyFinding,
    #[error("period start is after period end")]
    InvalidPeriod,

    #[error("username {0} is taken")]
    DuplicateUsername(String),
    #[error("password must be at least 8 characters")]
    WeakPassword,
    #[error("work unit name is required for WORK_UNIT users and only for them")]
    MissingWorkUnit,
    #[error("invalid username or password")]
    InvalidCredentials,
    #[error("account is inactive")]
    AccountInactive,
    #[error("missing, invalid or expired session")]
    Unauthenticated,
    #[error("role {0} may not perform this action")]
    Forbidden(String),
    #[error("unknown user {0}")]
    UnknownUser(String),

    #[error("concurrent modification of {0}")]
    Conflict(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("unknown blob {0}")]
    UnknownBlob(String),
    #[error("invalid range {from}..={to}")]
    InvalidRange { from: u64, to: u64 },
    #[error("CSV header does not match the expected columns")]
    HeaderMismatch,
    #[error("row {row}: {source}")]
    ImportRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("archive rejected: {0}")]
    InvalidArchive(String),
    #[error("data directory {0} is locked by another process")]
    DataDirLocked(String),
    #[error("storage corrupted: {0}")]
    Corrupt(String),
    #[error("unknown {kind} strategy {name:?}")]
    UnknownStrategy { kind: &'static str, name: String },
    #[error("storage I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyBarcode => "EMPTY_BARCODE",
            Error::InvalidChars => "INVALID_CHARS",
            Error::TooLong => "TOO_LONG",
            Error::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::DuplicateCode(_) => "DUPLICATE_CODE",
            Error::UnknownParent(_) => "UNKNOWN_PARENT",
            Error::AlreadySeeded(_) => "ALREADY_SEEDED",
            Error::DuplicateBarcode(_) => "DUPLICATE_BARCODE",
            Error::UnknownReference(_) => "UNKNOWN_REFERENCE",
            Error::ReferenceInUse(_) => "REFERENCE_IN_USE",
            Error::InvalidWarrantyRange => "INVALID_WARRANTY_RANGE",
            Error::UnknownItem(_) => "UNKNOWN_ITEM",
            Error::EmptyPayload => "EMPTY_PAYLOAD",
            Error::UnsupportedMediaType(_) => "UNSUPPORTED_MEDIA_TYPE",
            Error::UnknownLocation(_) => "UNKNOWN_LOCATION",
            Error::SameLocation => "SAME_LOCATION",
            Error::TerminalItem(_) => "TERMINAL_ITEM",
            Error::NotDamaged(_) => "NOT_DAMAGED",
            Error::RepairAlreadyOpen(_) => "REPAIR_ALREADY_OPEN",
            Error::UnknownRepair(_) => "UNKNOWN_REPAIR",
            Error::AlreadyCompleted(_) => "ALREADY_COMPLETED",
            Error::InvalidDateOrder => "INVALID_DATE_ORDER",
            Error::UnknownRecord(_) => "UNKNOWN_RECORD",
            Error::WrongState(_) => "WRONG_STATE",
            Error::EmptyFinding => "EMPTY_FINDING",
            Error::InvalidPeriod => "INVALID_PERIOD",
            Error::DuplicateUsername(_) => "DUPLICATE_USERNAME",
            Error::WeakPassword => "WEAK_PASSWORD",
            Error::MissingWorkUnit => "MISSING_WORK_UNIT",
            Error::InvalidCredentials => "INVALID_CREDENTIALS",
            Error::AccountInactive => "ACCOUNT_INACTIVE",
            Error::Unauthenticated => "UNAUTHENTICATED",
            Error::Forbidden(_) => "FORBIDDEN",
            Error::UnknownUser(_) => "UNKNOWN_USER",
            Error::Conflict(_) => "CONFLICT",
            Error::ConstraintViolation(_) => "CONSTRAINT_VIOLATION",
            Error::UnknownBlob(_) => "UNKNOWN_BLOB",
            Error::InvalidRange { .. } => "INVALID_RANGE",
            Error::HeaderMismatch => "HEADER_MISMATCH",
            Error::ImportRow { .. } => "INVALID_IMPORT_ROW",
            Error::InvalidArchive(_) => "INVALID_ARCHIVE",
            Error::DataDirLocked(_) => "DATA_DIR_LOCKED",
            Error::Corrupt(_) => "STORAGE_CORRUPT",
            Error::UnknownStrategy { .. } => "CONFIG_ERROR",
            Error::Io(_) => "STORAGE_ERROR",
            Error::Serialization(_) => "STORAGE_ERROR",
            Error::Csv(_) => "INVALID_CSV",
        }
    }

    /// The innermost error, looking through per-row import wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::ImportRow { source, .. } => source.root(),
            other => other,
        }
    }
}
