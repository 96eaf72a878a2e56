use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Role;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum Permission {
    ReferenceWrite,
    ItemRegister,
    ItemRead,
    ItemTransfer,
    ItemStatus,
    ItemRepair,
    PhotoUpload,
    FindingSubmit,
    FindingRead,
    FindingReadOwn,
    FindingFollowUp,
    FindingResolve,
    ReportRead,
    UserManage,
}

impl Permission {
    pub const ALL: [Permission; 14] = [
        Permission::ReferenceWrite,
        Permission::ItemRegister,
        Permission::ItemRead,
        Permission::ItemTransfer,
        Permission::ItemStatus,
        Permission::ItemRepair,
        Permission::PhotoUpload,
        Permission::FindingSubmit,
        Permission::FindingRead,
        Permission::FindingReadOwn,
        Permission::FindingFollowUp,
        Permission::FindingResolve,
        Permission::ReportRead,
        Permission::UserManage,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Permission::ReferenceWrite => "reference.write",
            Permission::ItemRegister => "item.register",
            Permission::ItemRead => "item.read",
            Permission::ItemTransfer => "item.transfer",
            Permission::ItemStatus => "item.status",
            Permission::ItemRepair => "item.repair",
            Permission::PhotoUpload => "photo.upload",
            Permission::FindingSubmit => "finding.submit",
            Permission::FindingRead => "finding.read",
            Permission::FindingReadOwn => "finding.read.own",
            Permission::FindingFollowUp => "finding.follow_up",
            Permission::FindingResolve => "finding.resolve",
            Permission::ReportRead => "report.read",
            Permission::UserManage => "user.manage",
        }
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Permission {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Permission::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown permission {s:?}")))
    }
}

impl From<Permission> for &'static str {
    fn from(value: Permission) -> Self {
        value.key()
    }
}

impl TryFrom<String> for Permission {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

/// The role/permission matrix. Total over `Role::ALL x Permission::ALL`.
pub fn allows(role: Role, permission: Permission) -> bool {
    use Permission::*;
    match role {
        Role::FacilitiesAdmin => true,
        Role::WorkUnit => matches!(permission, FindingSubmit | FindingReadOwn | ItemRead | PhotoUpload),
        Role::Leadership => matches!(permission, ReportRead | ItemRead | FindingRead),
    }
}

/// Permissions granted to `role`, in declaration order.
pub fn granted(role: Role) -> Vec<Permission> {
    Permission::ALL
        .into_iter()
        .filter(|p| allows(role, *p))
        .collect()
}
