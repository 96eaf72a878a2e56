use std::future::Future;
use std::path::Path;
use std::sync::Arc;

use chrono::Duration;
use tokio::net::TcpListener;

use facmon_core::storage::{BackendConfig, BackendRegistry};
use facmon_core::{Facilities, Settings, Store, SystemClock};

use crate::config::{Config, ServeError};
use crate::routes::{router, AppState};

fn probe_writable(dir: &Path) -> Result<(), ServeError> {
    let unwritable = |source| ServeError::DataDirUnwritable {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"ok").map_err(unwritable)?;
    std::fs::remove_file(&probe).map_err(unwritable)?;
    Ok(())
}

/// Opens storage as configured and builds the service over it.
pub fn open_service(config: &Config) -> Result<Facilities, ServeError> {
    config.validate()?;
    if config.backend == "file" {
        probe_writable(&config.data_dir)?;
    }
    let backend = BackendRegistry::default().create(
        &config.backend,
        &BackendConfig {
            data_dir: Some(config.data_dir.clone()),
        },
    )?;
    let store = Store::open(backend, Arc::new(SystemClock))?;
    let settings = Settings {
        session_ttl: Duration::hours(i64::from(config.session_ttl_hours)),
        passwords: config.passwords.clone(),
    };
    Ok(Facilities::new(Arc::new(store), settings)?)
}

pub fn app_state(svc: Arc<Facilities>, config: &Config) -> AppState {
    AppState {
        svc,
        max_upload_bytes: config.max_upload_bytes,
    }
}

pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Binds, opens storage and serves until `shutdown` resolves.
pub async fn serve(config: Config, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let addr = config.validate()?;
    let svc = Arc::new(open_service(&config)?);
    let listener = TcpListener::bind(addr).await.map_err(|source| ServeError::Bind {
        addr: config.bind_addr.clone(),
        source,
    })?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");
    serve_on(listener, app_state(svc, &config), shutdown).await
}
