//! Accounts, sessions and the role permission matrix.

pub mod password;
pub mod permissions;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use permissions::{allows, granted, Permission};

use crate::domain::{LocationId, Role, UserId};
use crate::error::{Error, Result};
use crate::registry::LocationAddress;
use crate::service::Facilities;
use crate::storage::{AuditDraft, Changeset, Entity, EntityKey, EntityKind, Expect, SYSTEM_ACTOR};

pub const MIN_PASSWORD_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub username: String,
    pub password_digest: String,
    pub role: Role,
    pub work_unit_name: Option<String>,
    pub assigned_locations: BTreeSet<LocationId>,
    pub active: bool,
}

/// A user as shown to clients: everything except the digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub id: UserId,
    pub username: String,
    pub role: Role,
    pub work_unit_name: Option<String>,
    pub assigned_locations: BTreeSet<LocationId>,
    pub active: bool,
}

impl From<&User> for UserView {
    fn from(u: &User) -> Self {
        UserView {
            id: u.id,
            username: u.username.clone(),
            role: u.role,
            work_unit_name: u.work_unit_name.clone(),
            assigned_locations: u.assigned_locations.clone(),
            active: u.active,
        }
    }
}

/// Persisted session. Only the SHA-256 of the bearer token is stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token_digest: String,
    pub user_id: UserId,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Returned once, at login. The token is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginSession {
    pub token: String,
    pub user_id: UserId,
    pub username: String,
    pub role: Role,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// An authenticated user, as resolved from a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: UserId,
    pub username: String,
    pub role: Role,
    pub work_unit_name: Option<String>,
    pub assigned_locations: BTreeSet<LocationId>,
}

impl From<&User> for Principal {
    fn from(u: &User) -> Self {
        Principal {
            id: u.id,
            username: u.username.clone(),
            role: u.role,
            work_unit_name: u.work_unit_name.clone(),
            assigned_locations: u.assigned_locations.clone(),
        }
    }
}

/// Who is performing an operation. `System` is local operator tooling and
/// carries administrator rights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Actor {
    System,
    User(Principal),
}

impl Actor {
    /// Identifier written to audit entries and `reporter` fields.
    pub fn audit_id(&self) -> String {
        match self {
            Actor::System => SYSTEM_ACTOR.to_string(),
            Actor::User(p) => p.id.to_string(),
        }
    }

    pub fn role(&self) -> Role {
        match self {
            Actor::System => Role::FacilitiesAdmin,
            Actor::User(p) => p.role,
        }
    }

    pub fn principal(&self) -> Option<&Principal> {
        match self {
            Actor::System => None,
            Actor::User(p) => Some(p),
        }
    }

    /// Work units only see rooms they are assigned to; other roles see all.
    pub fn sees_location(&self, location: LocationId) -> bool {
        match self {
            Actor::User(p) if p.role == Role::WorkUnit => p.assigned_locations.contains(&location),
            _ => true,
        }
    }

    pub fn require(&self, permission: Permission) -> Result<()> {
        if allows(self.role(), permission) {
            Ok(())
        } else {
            Err(Error::Forbidden(self.role().to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewUser {
    pub username: String,
    pub password: String,
    pub role: Role,
    #[serde(default)]
    pub work_unit_name: Option<String>,
    #[serde(default)]
    pub locations: Vec<LocationAddress>,
}

pub fn validate_username(raw: &str) -> Result<String> {
    let name = raw.trim();
    let ok = (3..=32).contains(&name.len())
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if ok {
        Ok(name.to_string())
    } else {
        Err(Error::InvalidInput(
            "username must be 3-32 characters of lowercase letters, digits or '_'".into(),
        ))
    }
}

pub fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl Facilities {
    pub fn add_user(&self, new: NewUser, actor: &Actor) -> Result<UserView> {
        let username = validate_username(&new.username)?;
        if new.password.chars().count() < MIN_PASSWORD_LEN {
            return Err(Error::WeakPassword);
        }
        let work_unit_name = new
            .work_unit_name
            .as_deref()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        if (new.role == Role::WorkUnit) != work_unit_name.is_some() {
            return Err(Error::MissingWorkUnit);
        }
        let assigned_locations = self.store.read(|state| {
            new.locations
                .iter()
                .map(|addr| addr.resolve(state).map(|l| l.id))
                .collect::<Result<BTreeSet<_>>>()
        })?;
        if self.store.read(|s| s.user_by_username(&username).is_some()) {
            return Err(Error::DuplicateUsername(username));
        }
        let user = User {
            id: UserId::new(),
            username: username.clone(),
            password_digest: self.passwords.hash(&new.password)?,
            role: new.role,
            work_unit_name,
            assigned_locations,
            active: true,
        };
        let view = UserView::from(&user);
        self.store
            .commit(
                Changeset::new(AuditDraft::new(
                    actor.audit_id(),
                    Permission::UserManage.key(),
                    EntityKind::User,
                    user.id,
                ))
                .expect(EntityKey::new(EntityKind::User, user.id), Expect::Absent)
                .put(Entity::User(user)),
            )
            .map_err(|e| match e {
                Error::ConstraintViolation(msg) if msg.contains("username") => Error::DuplicateUsername(username),
                other => other,
            })?;
        Ok(view)
    }

    pub fn list_users(&self) -> Vec<UserView> {
        self.store.read(|s| {
            let mut users: Vec<UserView> = s.users.values().map(UserView::from).collect();
            users.sort_by(|a, b| a.username.cmp(&b.username));
            users
        })
    }

    pub fn set_user_active(&self, username: &str, active: bool, actor: &Actor) -> Result<UserView> {
        let (mut user, version) = self.store.read(|s| {
            s.user_by_username(username.trim())
                .map(|u| (u.clone(), s.version(&EntityKey::new(EntityKind::User, u.id))))
                .ok_or_else(|| Error::UnknownUser(username.to_string()))
        })?;
        user.active = active;
        let view = UserView::from(&user);
        self.store.commit(
            Changeset::new(AuditDraft::new(
                actor.audit_id(),
                Permission::UserManage.key(),
                EntityKind::User,
                user.id,
            ))
            .expect(EntityKey::new(EntityKind::User, user.id), Expect::Version(version))
            .put(Entity::User(user)),
        )?;
        Ok(view)
    }

    /// Acts as `username` without a password; for local operator tooling.
    pub fn principal_for(&self, username: &str) -> Result<Principal> {
        self.store.read(|s| match s.user_by_username(username.trim()) {
            Some(u) if u.active => Ok(Principal::from(u)),
            Some(_) => Err(Error::AccountInactive),
            None => Err(Error::UnknownUser(username.to_string())),
        })
    }

    /// Verifies credentials and opens a session. Unknown users and wrong
    /// passwords produce the same error after the same amount of work.
    pub fn authenticate(&self, username: &str, password: &str) -> Result<LoginSession> {
        let user = self.store.read(|s| s.user_by_username(username.trim()).cloned());
        let Some(user) = user else {
            self.passwords.verify_decoy(password);
            return Err(Error::InvalidCredentials);
        };
        if !self.passwords.verify(password, &user.password_digest) {
            return Err(Error::InvalidCredentials);
        }
        if !user.active {
            return Err(Error::AccountInactive);
        }
        let token = new_token();
        let issued_at = self.clock().now();
        let session = Session {
            token_digest: token_digest(&token),
            user_id: user.id,
            issued_at,
            expires_at: issued_at + self.session_ttl,
        };
        let login = LoginSession {
            token,
            user_id: user.id,
            username: user.username.clone(),
            role: user.role,
            issued_at,
            expires_at: session.expires_at,
        };
        self.store.commit(
            Changeset::new(AuditDraft::new(
                user.id.to_string(),
                "session.create",
                EntityKind::Session,
                &session.token_digest,
            ))
            .put(Entity::Session(session)),
        )?;
        Ok(login)
    }

    /// Resolves a live session and checks `permission` against the matrix.
    pub fn authorize(&self, token: &str, permission: Permission) -> Result<Principal> {
        let principal = self.resolve_session(token)?;
        if !allows(principal.role, permission) {
            return Err(Error::Forbidden(principal.role.to_string()));
        }
        Ok(principal)
    }

    /// Ends the session behind `token`. Unknown or expired tokens are rejected.
    pub fn end_session(&self, token: &str) -> Result<()> {
        let principal = self.resolve_session(token)?;
        let digest = token_digest(token.trim());
        self.store.commit(
            Changeset::new(AuditDraft::new(
                principal.id.to_string(),
                "session.delete",
                EntityKind::Session,
                &digest,
            ))
            .delete(EntityKey::new(EntityKind::Session, &digest)),
        )?;
        Ok(())
    }

    /// Session lookup without a permission check.
    pub fn resolve_session(&self, token: &str) -> Result<Principal> {
        let digest = token_digest(token.trim());
        let now = self.clock().now();
        self.store.read(|s| {
            let session = s.sessions.get(&digest).ok_or(Error::Unauthenticated)?;
            if now >= session.expires_at {
                return Err(Error::Unauthenticated);
            }
            let user = s.users.get(&session.user_id).ok_or(Error::Unauthenticated)?;
            if !user.active {
                return Err(Error::Unauthenticated);
            }
            Ok(Principal::from(user))
        })
    }
}
