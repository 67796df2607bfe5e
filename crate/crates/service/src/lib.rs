//! HTTP steering service.
//!
//! Routes, all JSON:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/api/session` | `{map?, switching?, gamma?, epsilon_points?}` |
//! | POST | `/api/session/{id}/step` | `{action}` |
//! | POST | `/api/session/{id}/undo` | |
//! | POST | `/api/session/{id}/reset` | |
//! | GET | `/api/session/{id}/report` | |
//! | DELETE | `/api/session/{id}` | |
//!
//! Errors are `{code, message}` with a 4xx status.

mod api;
pub mod session;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use agency_core::verdict::World;
use axum::routing::{delete, get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use api::{ApiError, CreateSession, StepRequest};
pub use session::{GoalCell, Session, SessionDescriptor, SessionStore, StepResult, DEFAULT_IDLE_TIMEOUT};

/// Shared service state: the default world and the session table.
pub struct AppState {
    default_world: Arc<World>,
    sessions: SessionStore,
}

impl AppState {
    pub fn new(default_world: World) -> Self {
        AppState::with_idle_timeout(default_world, DEFAULT_IDLE_TIMEOUT)
    }

    pub fn with_idle_timeout(default_world: World, idle_timeout: Duration) -> Self {
        AppState {
            default_world: Arc::new(default_world),
            sessions: SessionStore::new(idle_timeout),
        }
    }

    pub fn default_world(&self) -> &Arc<World> {
        &self.default_world
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Directory served at `/` for anything outside `/api`.
    pub static_dir: Option<PathBuf>,
}

pub fn router(state: Arc<AppState>, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/api/session", post(api::create_session))
        .route("/api/session/{id}", delete(api::delete_session))
        .route("/api/session/{id}/step", post(api::step_session))
        .route("/api/session/{id}/undo", post(api::undo_session))
        .route("/api/session/{id}/reset", post(api::reset_session))
        .route("/api/session/{id}/report", get(api::report_session));
    let app = match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api::not_found),
    };
    app.with_state(state)
}

/// Serves until the listener fails, sweeping idle sessions once a minute.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>, config: ServiceConfig) -> std::io::Result<()> {
    let sweeper = Arc::clone(&state);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.sessions().expire_idle();
        }
    });
    axum::serve(listener, router(state, &config)).await
}
