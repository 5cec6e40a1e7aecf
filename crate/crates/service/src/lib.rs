//! HTTP JSON API over trained checkpoints.
//!
//! Clients open a session against a loaded checkpoint, replace its
//! observation set, and ask for the mean field, sampled fields, or the full
//! predicted distribution at a point. Sessions live in memory only.

mod config;
mod error;
mod routes;
mod session;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::http::{HeaderValue, Method};
use axum::routing::{get, post, put};
use axum::Router;
use sparsefield::training::Checkpoint;
use sparsefield::Model;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use config::{parse_checkpoint_entry, ServeConfig};
pub use error::{ApiError, ServiceError};
pub use session::{Session, SessionStore};

/// A checkpoint ready for inference.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub model: Arc<Model<f32>>,
    /// Native raster of the training data, used when a session omits one.
    pub grid_shape: Option<Vec<usize>>,
}

impl Loaded {
    pub fn new(model: Model<f32>, grid_shape: Option<Vec<usize>>) -> Self {
        Loaded {
            model: Arc::new(model),
            grid_shape,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> sparsefield::Result<Self> {
        Ok(Loaded::new(ckpt.model()?, ckpt.meta.grid_shape.clone()))
    }
}

struct Inner {
    config: ServeConfig,
    checkpoints: HashMap<String, Loaded>,
    sessions: Mutex<SessionStore>,
}

/// Shared by every handler. Model parameters are immutable; the session
/// map is the only mutable state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServeConfig, checkpoints: HashMap<String, Loaded>) -> Self {
        let sessions = Mutex::new(SessionStore::new(config.session_cap));
        AppState(Arc::new(Inner {
            config,
            checkpoints,
            sessions,
        }))
    }

    /// Loads every `id=path` entry of the configuration.
    pub fn load(config: ServeConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let mut checkpoints = HashMap::new();
        for entry in &config.checkpoints {
            let (id, path) = parse_checkpoint_entry(entry)?;
            let loaded = Checkpoint::load(&path)
                .and_then(|c| Loaded::from_checkpoint(&c))
                .map_err(|source| ServiceError::Checkpoint { id: id.clone(), source })?;
            log::info!("loaded checkpoint {id} from {}", path.display());
            if checkpoints.insert(id.clone(), loaded).is_some() {
                return Err(ServiceError::Config(format!("checkpoint id {id:?} given twice")));
            }
        }
        Ok(AppState::new(config, checkpoints))
    }

    pub fn config(&self) -> &ServeConfig {
        &self.0.config
    }

    pub fn checkpoint(&self, id: &str) -> Option<&Loaded> {
        self.0.checkpoints.get(id)
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = (&String, &Loaded)> {
        self.0.checkpoints.iter()
    }

    pub fn model(&self, id: &str) -> Option<Arc<Model<f32>>> {
        self.checkpoint(id).map(|c| c.model.clone())
    }

    /// A panicked handler cannot leave a session half-written (every
    /// mutation is a single assignment), so a poisoned lock is still usable.
    pub fn sessions(&self) -> MutexGuard<'_, SessionStore> {
        self.0.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }
}

fn cors(origin: Option<&str>) -> Result<CorsLayer, ServiceError> {
    let allow = match origin {
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| ServiceError::Config(format!("bad CORS origin {o:?}")))?,
        ),
        None => AllowOrigin::any(),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::PUT])
        .allow_headers(Any))
}

pub fn router(state: AppState) -> Result<Router, ServiceError> {
    let cors = cors(state.config().cors_origin.as_deref())?;
    Ok(Router::new()
        .route("/v1/checkpoints", get(routes::list_checkpoints))
        .route("/v1/sessions", post(routes::create_session))
        .route("/v1/sessions/{id}/observations", put(routes::put_observations))
        .route("/v1/sessions/{id}/mean", get(routes::get_mean))
        .route("/v1/sessions/{id}/samples", post(routes::post_samples))
        .route("/v1/sessions/{id}/query", get(routes::get_query))
        .fallback(routes::fallback)
        .layer(cors)
        .with_state(state))
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        log::warn!("cannot listen for ctrl-c: {e}");
        std::future::pending::<()>().await;
    }
    log::info!("shutting down");
}

pub async fn serve(state: AppState) -> Result<(), ServiceError> {
    let addr = state.config().bind.clone();
    let app = router(state)?;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
    Ok(())
}

/// Loads checkpoints and serves until interrupted.
pub fn run(config: ServeConfig) -> Result<(), ServiceError> {
    let state = AppState::load(config)?;
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(state))
}
