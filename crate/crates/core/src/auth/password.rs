use std::collections::BTreeMap;

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hashing parameters. Every scheme emits a PHC string (`$<id>$...`) so a
/// digest always names the scheme that can verify it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PasswordConfig {
    pub scheme: String,
    pub argon2_memory_kib: u32,
    pub argon2_iterations: u32,
    pub argon2_parallelism: u32,
    pub pbkdf2_rounds: u32,
}

impl Default for PasswordConfig {
    fn default() -> Self {
        PasswordConfig {
            scheme: "argon2id".into(),
            argon2_memory_kib: 19 * 1024,
            argon2_iterations: 2,
            argon2_parallelism: 1,
            pbkdf2_rounds: 600_000,
        }
    }
}

impl PasswordConfig {
    /// Cheap parameters for tests and fixtures.
    pub fn fast() -> Self {
        PasswordConfig {
            scheme: "argon2id".into(),
            argon2_memory_kib: 256,
            argon2_iterations: 1,
            argon2_parallelism: 1,
            pbkdf2_rounds: 1_000,
        }
    }
}

pub trait PasswordScheme: Send + Sync {
    /// PHC identifier, e.g. `argon2id`.
    fn id(&self) -> &'static str;

    fn hash(&self, password: &str) -> Result<String>;

    fn verify(&self, password: &str, digest: &PasswordHash<'_>) -> bool;
}

struct Argon2Scheme(argon2::Argon2<'static>);

impl PasswordScheme for Argon2Scheme {
    fn id(&self) -> &'static str {
        "argon2id"
    }

    fn hash(&self, password: &str) -> Result<String> {
        let salt = SaltString::generate(&mut OsRng);
        self.0
            .hash_password(password.as_bytes(), &salt)
            .map(|h| h.to_string())
            .map_err(|e| Error::InvalidInput(format!("argon2: {e}")))
    }

    fn verify(&self, password: &str, digest: &PasswordHash<'_>) -> bool {
        self.0.verify_password(password.as_bytes(), digest).is_ok()
    }
}

struct Pbkdf2Scheme {
    rounds: u32,
}

impl PasswordScheme for Pbkdf2Scheme {
    fn id(&self) -> &'static str {
        "pbkdf2-sha256"
    }

    fn hash(&self, password: &str) -> Result<String> {
        let salt = SaltString::generate(&mut OsRng);
        let params = pbkdf2::Params {
            rounds: self.rounds,
            output_length: 32,
        };
        pbkdf2::Pbkdf2
            .hash_password_customized(
                password.as_bytes(),
                Some(pbkdf2::Algorithm::Pbkdf2Sha256.ident()),
                None,
                params,
                &salt,
            )
            .map(|h| h.to_string())
            .map_err(|e| Error::InvalidInput(format!("pbkdf2: {e}")))
    }

    fn verify(&self, password: &str, digest: &PasswordHash<'_>) -> bool {
        pbkdf2::Pbkdf2.verify_password(password.as_bytes(), digest).is_ok()
    }
}

/// Registered schemes plus the one used for new digests.
pub struct PasswordHashing {
    schemes: BTreeMap<&'static str, Box<dyn PasswordScheme>>,
    active: &'static str,
    decoy: String,
}

impl PasswordHashing {
    pub fn new(config: &PasswordConfig) -> Result<Self> {
        let params = argon2::Params::new(
            config.argon2_memory_kib,
            config.argon2_iterations,
            config.argon2_parallelism,
            None,
        )
        .map_err(|e| Error::InvalidInput(format!("argon2 parameters: {e}")))?;
        let argon2 = argon2::Argon2::new(argon2::Algorithm::Argon2id, argon2::Version::V0x13, params);

        let mut schemes: BTreeMap<&'static str, Box<dyn PasswordScheme>> = BTreeMap::new();
        for scheme in [
            Box::new(Argon2Scheme(argon2)) as Box<dyn PasswordScheme>,
            Box::new(Pbkdf2Scheme {
                rounds: config.pbkdf2_rounds,
            }),
        ] {
            schemes.insert(scheme.id(), scheme);
        }
        let active = schemes
            .keys()
            .copied()
            .find(|id| *id == config.scheme)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "password scheme",
                name: config.scheme.clone(),
            })?;
        let decoy = schemes[active].hash("decoy password for unknown users")?;
        Ok(PasswordHashing { schemes, active, decoy })
    }

    pub fn scheme_ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemes.keys().copied()
    }

    pub fn active(&self) -> &'static str {
        self.active
    }

    pub fn hash(&self, password: &str) -> Result<String> {
        self.schemes[self.active].hash(password)
    }

    /// Digests from unregistered schemes never verify.
    pub fn verify(&self, password: &str, digest: &str) -> bool {
        let Ok(parsed) = PasswordHash::new(digest) else {
            return false;
        };
        match self.schemes.get(parsed.algorithm.as_str()) {
            Some(scheme) => scheme.verify(password, &parsed),
            None => false,
        }
    }

    /// Burns the same work as a real verification, for unknown usernames.
    pub fn verify_decoy(&self, password: &str) {
        let _ = self.verify(password, &self.decoy.clone());
    }
}
