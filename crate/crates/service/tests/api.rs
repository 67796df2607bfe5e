use std::sync::Arc;

use agency_core::behavior::{generate_actions, Behavior};
use agency_core::scenario::{scenario_actions, Scenario, ScenarioParams};
use agency_core::{assess_actions, format_actions, AssessConfig, Color, Pos, World};
use agency_service::{router, AppState, ServiceConfig, SessionDescriptor, StepResult};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::new(World::default_world())), &ServiceConfig::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = match body {
        Some(v) => Body::from(v.to_string()),
        None => Body::empty(),
    };
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn create(app: &Router, body: Value) -> SessionDescriptor {
    let (status, v) = call(app, Method::POST, "/api/session", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn step(app: &Router, id: &str, action: &str) -> StepResult {
    let (status, v) = call(app, Method::POST, &format!("/api/session/{id}/step"), Some(json!({ "action": action }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

#[tokio::test]
async fn create_describes_default_map() {
    let app = app();
    let d = create(&app, json!({})).await;
    assert_eq!((d.rows, d.cols), (15, 23));
    assert_eq!(d.cells.len(), 15);
    assert_eq!(d.start, Pos::new(3, 3));
    assert_eq!(d.goals.len(), 4);
    assert_eq!(d.state.t, 0);
    assert!((d.state.posterior_agt - 0.5).abs() < 1e-15);
    assert_eq!(d.state.goal_posteriors, [0.25; 4]);
    assert!(!d.switching);
    assert_eq!(d.epsilon_points, 50);

    let other = create(&app, json!({})).await;
    assert_ne!(d.id, other.id);

    let (status, _) = call(&app, Method::POST, "/api/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn create_rejects_bad_input() {
    let app = app();
    let (status, v) = call(&app, Method::POST, "/api/session", Some(json!({ "map": "###\n#.#\n###" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_map");
    assert!(v["message"].as_str().unwrap().contains("start"));

    let (status, v) = call(&app, Method::POST, "/api/session", Some(json!({ "gamma": 1.5 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_config");

    let (status, v) = call(&app, Method::POST, "/api/session", Some(json!({ "epsilon_points": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_config");

    let (status, v) = call(&app, Method::POST, "/api/session", Some(json!({ "colour": "red" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_json");
}

#[tokio::test]
async fn inline_map_session() {
    let app = app();
    let d = create(&app, json!({ "map": "#######\n#R.A.B#\n#######", "switching": true, "epsilon_points": 11 })).await;
    assert_eq!((d.rows, d.cols), (3, 7));
    assert_eq!(d.goals.len(), 2);
    assert!(d.switching);
    let r = step(&app, &d.id, "R").await;
    assert_eq!(r.position, Pos::new(1, 4));
    // Green and magenta are absent from this map.
    assert_eq!(r.goal_posteriors[Color::Green.index()], 0.0);
    assert_eq!(r.goal_posteriors[Color::Magenta.index()], 0.0);
    assert!(r.goal_posteriors[Color::Blue.index()] > r.goal_posteriors[Color::Red.index()]);
}

#[tokio::test]
async fn steps_and_walls() {
    let app = app();
    let d = create(&app, json!({})).await;
    let r = step(&app, &d.id, "U").await;
    assert_eq!(r.t, 1);
    assert_eq!(r.position, Pos::new(2, 3));
    assert!(r.posterior_agt > 0.0 && r.posterior_agt < 1.0);
    assert!((r.posterior_agt + r.posterior_dev - 1.0).abs() < 1e-12);
    step(&app, &d.id, "up").await;
    let r = step(&app, &d.id, "U").await;
    assert_eq!(r.t, 3);
    assert_eq!(r.position, Pos::new(1, 3));
    let blocked = step(&app, &d.id, "U").await;
    assert_eq!(blocked.t, 4);
    assert_eq!(blocked.position, r.position);
}

#[tokio::test]
async fn step_errors() {
    let app = app();
    let d = create(&app, json!({})).await;
    let (status, v) = call(&app, Method::POST, &format!("/api/session/{}/step", d.id), Some(json!({ "action": "Z" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_action");

    let (status, v) = call(&app, Method::POST, "/api/session/nope/step", Some(json!({ "action": "U" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "session_not_found");

    let (status, v) = call(&app, Method::GET, "/api/elsewhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn undo_and_reset() {
    let app = app();
    let d = create(&app, json!({})).await;
    let undo = format!("/api/session/{}/undo", d.id);

    let (status, v) = call(&app, Method::POST, &undo, None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "empty_history");

    step(&app, &d.id, "D").await;
    let (status, v) = call(&app, Method::POST, &undo, None).await;
    assert_eq!(status, StatusCode::OK);
    let back: StepResult = serde_json::from_value(v).unwrap();
    assert_eq!(back, d.state);

    for a in ["D", "D", "R", "L"] {
        step(&app, &d.id, a).await;
    }
    let (status, v) = call(&app, Method::POST, &format!("/api/session/{}/reset", d.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let reset: StepResult = serde_json::from_value(v).unwrap();
    assert_eq!(reset, d.state);
    assert_eq!(reset.t, 0);
}

#[tokio::test]
async fn report_matches_batch_assessment() {
    let app = app();
    let world = World::default_world();
    for scenario in Scenario::ALL {
        let switching = scenario.uses_switching();
        let actions = scenario_actions(world.map(), scenario, ScenarioParams::default()).unwrap();
        let d = create(&app, json!({ "switching": switching })).await;
        let mut last = d.state;
        for a in &actions {
            last = step(&app, &d.id, &a.letter().to_string()).await;
        }
        let batch = assess_actions(&world, &actions, AssessConfig::switching(switching)).unwrap();
        assert!((last.posterior_agt - batch.posterior_agt).abs() <= 1e-10, "{scenario}");
        assert!((last.nll_dev - batch.nll_dev).abs() <= 1e-9, "{scenario}");

        let (status, v) = call(&app, Method::GET, &format!("/api/session/{}/report", d.id), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["actions"], format_actions(&actions));
        assert_eq!(v["steps"], actions.len());
        assert_eq!(v, serde_json::to_value(&batch).unwrap(), "{scenario}");
    }
}

#[tokio::test]
async fn green_rises_along_its_corridor() {
    let app = app();
    let world = World::default_world();
    let actions = generate_actions(
        world.map(),
        &Behavior::GoalSeeker {
            goal: Color::Green,
            epsilon: 0.0,
            seed: 0,
            steps: None,
        },
    )
    .unwrap();
    for switching in [false, true] {
        let d = create(&app, json!({ "switching": switching })).await;
        let mut green = Vec::new();
        let mut positions = Vec::new();
        for a in &actions {
            let r = step(&app, &d.id, &a.letter().to_string()).await;
            green.push(r.goal_posteriors[Color::Green.index()]);
            positions.push(r.position);
        }
        // The corridor down to green starts below (7, 5).
        let entry = positions.iter().position(|&p| p == Pos::new(8, 5)).unwrap();
        for w in green[entry..].windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "switching={switching}: {green:?}");
        }
        assert!(green.last().unwrap() > &0.9);
    }
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = create(&app, json!({})).await;
    let b = create(&app, json!({})).await;
    let solo = create(&app, json!({})).await;
    for (x, y) in "RRDDLLUU".chars().zip("DDDDRRDD".chars()) {
        step(&app, &a.id, &x.to_string()).await;
        step(&app, &b.id, &y.to_string()).await;
        step(&app, &solo.id, &x.to_string()).await;
    }
    let report = |id: String| {
        let app = app.clone();
        async move { call(&app, Method::GET, &format!("/api/session/{id}/report"), None).await.1 }
    };
    assert_eq!(report(a.id).await, report(solo.id).await);
    assert_eq!(report(b.id).await["actions"], "DDDDRRDD");
}

#[tokio::test]
async fn delete_ends_session() {
    let app = app();
    let d = create(&app, json!({})).await;
    let uri = format!("/api/session/{}", d.id);
    let (status, _) = call(&app, Method::DELETE, &uri, None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::DELETE, &uri, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, &format!("{uri}/report"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_disappear() {
    let state = Arc::new(AppState::with_idle_timeout(World::default_world(), std::time::Duration::ZERO));
    let app = router(state, &ServiceConfig::default());
    let d = create(&app, json!({})).await;
    tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    let (status, _) = call(&app, Method::POST, &format!("/api/session/{}/step", d.id), Some(json!({ "action": "U" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn serves_static_assets() {
    let dir = std::env::temp_dir().join(format!("agency-static-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<!doctype html><title>console</title>").unwrap();
    let config = ServiceConfig {
        static_dir: Some(dir.clone()),
    };
    let app = router(Arc::new(AppState::new(World::default_world())), &config);

    let (status, v) = call(&app, Method::GET, "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v.as_str().unwrap().contains("console"));
    let (status, _) = call(&app, Method::GET, "/missing.js", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    create(&app, json!({})).await;
    std::fs::remove_dir_all(dir).unwrap();
}
