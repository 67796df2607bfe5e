use std::sync::{Arc, Mutex};

use agency_core::gridworld::GridMap;
use agency_core::verdict::{AssessConfig, VerdictError, World};
use agency_core::{Action, DEFAULT_EPSILON_POINTS};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::session::Session;
use crate::AppState;

/// Error body returned with every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}"))
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<VerdictError> for ApiError {
    fn from(e: VerdictError) -> Self {
        match e {
            VerdictError::Plan(_) | VerdictError::BadGrid(_) => ApiError::bad_request("invalid_config", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    /// Inline map text; the service's default map when absent.
    pub map: Option<String>,
    pub switching: bool,
    pub gamma: Option<f64>,
    pub epsilon_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRequest {
    /// `U`, `D`, `L`, `R`, or the lowercase action name.
    pub action: String,
}

fn parse_action(s: &str) -> Result<Action, ApiError> {
    let mut chars = s.chars();
    let letter = match (chars.next(), chars.next()) {
        (Some(c), None) => Action::from_letter(c),
        _ => Action::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s)),
    };
    letter.ok_or_else(|| ApiError::bad_request("invalid_action", format!("unknown action {s:?}; expected U, D, L or R")))
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    state.sessions().get(id).ok_or_else(|| ApiError::unknown_session(id))
}

pub(crate) async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<crate::SessionDescriptor>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    state.sessions().expire_idle();
    let world = match (&req.map, req.gamma) {
        (None, None) => Arc::clone(state.default_world()),
        (map, gamma) => {
            let map = match map {
                Some(text) => GridMap::parse(text).map_err(|e| ApiError::bad_request("invalid_map", e.to_string()))?,
                None => state.default_world().map().clone(),
            };
            Arc::new(World::new(map, gamma.unwrap_or(state.default_world().gamma()))?)
        }
    };
    let config = AssessConfig {
        switching: req.switching,
        epsilon_points: req.epsilon_points.unwrap_or(DEFAULT_EPSILON_POINTS),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id, world, config)?;
    let descriptor = session.descriptor();
    state.sessions().insert(session);
    Ok((StatusCode::CREATED, Json(descriptor)))
}

pub(crate) async fn step_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<crate::StepResult> {
    let session = lookup(&state, &id)?;
    let req: StepRequest = parse_body(&body)?;
    let action = parse_action(&req.action)?;
    let result = session.lock().unwrap().step(action);
    Ok(Json(result))
}

pub(crate) async fn undo_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<crate::StepResult> {
    let session = lookup(&state, &id)?;
    let result = session.lock().unwrap().undo();
    result
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "empty_history", "nothing to undo"))
}

pub(crate) async fn reset_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<crate::StepResult> {
    let session = lookup(&state, &id)?;
    let result = session.lock().unwrap().reset();
    Ok(Json(result))
}

pub(crate) async fn report_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<agency_core::VerdictReport> {
    let session = lookup(&state, &id)?;
    let report = session.lock().unwrap().report()?;
    Ok(Json(report))
}

pub(crate) async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.sessions().remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::unknown_session(&id))
    }
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_spellings() {
        assert_eq!(parse_action("U").unwrap(), Action::Up);
        assert_eq!(parse_action("r").unwrap(), Action::Right);
        assert_eq!(parse_action("left").unwrap(), Action::Left);
        assert_eq!(parse_action("Down").unwrap(), Action::Down);
        for bad in ["", "Z", "UU", "north"] {
            assert_eq!(parse_action(bad).unwrap_err().code, "invalid_action");
        }
    }

    #[test]
    fn empty_body_means_defaults() {
        let req: CreateSession = parse_body(&Bytes::from_static(b"  ")).unwrap();
        assert_eq!(req, CreateSession::default());
        let err = parse_body::<CreateSession>(&Bytes::from_static(b"{\"mapp\": 1}")).unwrap_err();
        assert_eq!(err.code, "invalid_json");
    }
}
