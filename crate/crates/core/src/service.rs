use std::sync::Arc;

use chrono::Duration;

use crate::auth::password::{PasswordConfig, PasswordHashing};
use crate::clock::Clock;
use crate::error::Result;
use crate::storage::Store;

#[derive(Debug, Clone)]
pub struct Settings {
    pub session_ttl: Duration,
    pub passwords: PasswordConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            session_ttl: Duration::hours(8),
            passwords: PasswordConfig::default(),
        }
    }
}

/// Entry point for every domain operation. Cheap to share behind an `Arc`;
/// all mutable state lives in the [`Store`].
pub struct Facilities {
    pub(crate) store: Arc<Store>,
    pub(crate) passwords: PasswordHashing,
    pub(crate) session_ttl: Duration,
}

impl Facilities {
    pub fn new(store: Arc<Store>, settings: Settings) -> Result<Self> {
        Ok(Facilities {
            store,
            passwords: PasswordHashing::new(&settings.passwords)?,
            session_ttl: settings.session_ttl,
        })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        self.store.clock()
    }

    pub fn session_ttl(&self) -> Duration {
        self.session_ttl
    }
}
