use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use planlens_service::api::{router, AppState, DEFAULT_ASK_WAIT};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn app() -> Router {
    router(AppState::new(DEFAULT_ASK_WAIT))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn driverlog_session() -> Value {
    json!({
        "domain": fixture("driverlog-domain.pddl"),
        "problem": fixture("driverlog-problem.pddl"),
        "plan": fixture("plan-original.txt"),
    })
}

async fn started(app: &Router, body: Value) -> u64 {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["sessionId"].as_u64().unwrap()
}

#[tokio::test]
async fn create_session_returns_the_root_plan() {
    let app = app();
    let (status, v) = call(&app, "POST", "/sessions", Some(driverlog_session())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["rootPlan"]["id"], 1);
    assert_eq!(v["rootPlan"]["metrics"]["makespan"], 62.0);
    assert_eq!(v["rootPlan"]["plan"]["steps"].as_array().unwrap().len(), 8);

    // without a plan the built-in planner provides one
    let body = json!({ "domain": fixture("driverlog-domain.pddl"), "problem": fixture("driverlog-problem.pddl") });
    let (status, v) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["sessionId"], 2);
}

#[tokio::test]
async fn alternatives_offer_the_other_truck() {
    let app = app();
    let id = started(&app, driverlog_session()).await;
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/plans/1/steps/3/alternatives"), None).await;
    assert_eq!(status, StatusCode::OK);
    let list: Vec<&str> = v.as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    assert!(list.contains(&"(load-truck p1 t1 a)"), "{list:?}");
    assert!(!list.contains(&"(load-truck p1 t2 a)"));
}

#[tokio::test]
async fn ask_adds_a_child_and_moves_current() {
    let app = app();
    let id = started(&app, driverlog_session()).await;
    let ask = json!({ "planId": 1, "step": 3, "action": "(load-truck p1 t1 a)", "strategy": "after-action" });
    let (status, node) = call(&app, "POST", &format!("/sessions/{id}/ask"), Some(ask)).await;
    assert_eq!(status, StatusCode::CREATED, "{node}");
    assert_eq!((node["id"].as_u64(), node["parent"].as_u64()), (Some(2), Some(1)));
    assert_eq!(node["behavior"], "new-route");
    assert_eq!(node["replaced"], json!({ "name": "load-truck", "args": ["p1", "t2", "a"] }));

    let (_, overview) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(overview["current"], 2);
    assert_eq!(overview["plans"].as_array().unwrap().len(), 2);
    let (status, _) = call(&app, "PUT", &format!("/sessions/{id}/current"), Some(json!({ "planId": 1 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, node) = call(&app, "GET", &format!("/sessions/{id}/plans/2"), None).await;
    assert_eq!(node["strategy"], "after-action");

    let window = json!({
        "planId": 1, "step": 3, "action": "(load-truck p1 t1 a)", "strategy": "time-window", "window": [10, 20]
    });
    let (status, node) = call(&app, "POST", &format!("/sessions/{id}/ask"), Some(window)).await;
    assert_eq!(status, StatusCode::CREATED, "{node}");
    assert_eq!(node["window"], json!([10.0, 20.0]));
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = app();
    let id = started(&app, driverlog_session()).await;
    let ask = |action: &str, strategy: &str| json!({ "planId": 1, "step": 3, "action": action, "strategy": strategy });
    let uri = format!("/sessions/{id}/ask");

    let (status, v) = call(&app, "POST", &uri, Some(ask("(load-truck p1 t2 a)", "after-action"))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::CONFLICT, Some("stale-suggestion")));
    let (status, v) = call(&app, "POST", &uri, Some(ask("(load-truck p1 t1 a)", "time-window"))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad-window")));
    let (status, v) = call(&app, "POST", &uri, Some(ask("(load-truck p1 t1 a)", "sideways"))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad-request")));
    let (status, v) = call(&app, "POST", &uri, Some(ask("()", "segments"))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad-action")));

    let (status, v) = call(&app, "GET", "/sessions/99/plans/1/steps/0/alternatives", None).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-session")));
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/plans/7/steps/0/alternatives"), None).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-plan")));
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/plans/1/steps/40/alternatives"), None).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("step-out-of-range")));

    let mut bad = driverlog_session();
    bad["plan"] = json!("0: (drive-truck t1 a b d1) [30]");
    let (status, v) = call(&app, "POST", "/sessions", Some(bad)).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid-plan")));
    assert!(v["detail"]["kind"].is_string(), "{v}");

    let failing = json!({
        "domain": fixture("driverlog-domain.pddl"),
        "problem": fixture("driverlog-problem.pddl"),
        "config": { "command": "echo boom >&2; exit 4 # {domain} {problem}" },
    });
    let (status, v) = call(&app, "POST", "/sessions", Some(failing)).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::INTERNAL_SERVER_ERROR, Some("planner-failure")));
    assert_eq!(v["detail"]["stderr"], "boom");
}

#[tokio::test]
async fn slow_ask_is_polled() {
    let app = router(AppState::new(Duration::ZERO));
    let body = json!({
        "domain": fixture("rooms-domain.pddl"),
        "problem": fixture("rooms-problem.pddl"),
        "plan": fixture("rooms-plan.txt"),
        "config": { "command":
            "sleep 0.3; printf '0: (move r5 r3)\\n0.001: (move r3 r4)\\n' > {plan} # {domain} {problem}" },
    });
    let id = started(&app, body).await;
    let ask = json!({ "planId": 1, "step": 1, "action": "(move r2 r5)", "strategy": "after-action" });
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/ask"), Some(ask)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let poll = v["poll"].as_str().unwrap().to_string();
    let node = loop {
        let (status, v) = call(&app, "GET", &poll, None).await;
        match status {
            StatusCode::ACCEPTED => tokio::time::sleep(Duration::from_millis(50)).await,
            StatusCode::CREATED => break v,
            other => panic!("{other}: {v}"),
        }
    };
    assert_eq!(node["behavior"], "rejoins-original");
    let (status, _) = call(&app, "GET", "/jobs/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn metrics_compare_annotations_and_workspace_round_trip() {
    let app = app();
    let id = started(&app, driverlog_session()).await;
    let ask = json!({ "planId": 1, "step": 3, "action": "(load-truck p1 t1 a)", "strategy": "segments" });
    call(&app, "POST", &format!("/sessions/{id}/ask"), Some(ask)).await;

    let metric = json!({ "name": "double", "kind": "pddl", "expression": "minimize (* 2 (total-time))", "direction": "minimize" });
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/metrics"), Some(metric.clone())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v.as_array().unwrap().last().unwrap()["name"], "double");
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/metrics"), Some(metric)).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::CONFLICT, Some("duplicate-metric")));

    let (status, cmp) =
        call(&app, "GET", &format!("/sessions/{id}/compare?plans=1,2&metrics=makespan,double"), None).await;
    assert_eq!(status, StatusCode::OK, "{cmp}");
    assert_eq!(cmp["values"][0], json!([62.0, 124.0]));
    assert_eq!(cmp["best"]["makespan"], 1);
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/compare?metrics=nope"), None).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-metric")));

    let note = json!({ "planId": 2, "step": 0, "text": "one truck does it all" });
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/annotations"), Some(note)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v[0]["text"], "one truck does it all");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ws.json").display().to_string();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/save"), Some(json!({ "path": path }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = call(&app, "POST", "/sessions/load", Some(json!({ "path": path }))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let copy = v["sessionId"].as_u64().unwrap();
    assert_ne!(copy, id);
    let (_, again) = call(&app, "GET", &format!("/sessions/{copy}/compare"), None).await;
    let (_, original) = call(&app, "GET", &format!("/sessions/{id}/compare"), None).await;
    assert_eq!(again, original);

    let (_, ws) = call(&app, "GET", &format!("/sessions/{id}/workspace"), None).await;
    let (status, _) = call(&app, "POST", "/sessions/load", Some(json!({ "workspace": ws }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let mut old = ws.clone();
    old["version"] = json!(0);
    let (status, v) = call(&app, "POST", "/sessions/load", Some(json!({ "workspace": old }))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("workspace-version")));
}

#[tokio::test]
async fn validate_reports_without_a_session() {
    let app = app();
    let body = |plan: &str| json!({ "domain": fixture("driverlog-domain.pddl"), "problem": fixture("driverlog-problem.pddl"), "plan": plan });
    let (status, v) = call(&app, "POST", "/validate", Some(body(&fixture("plan-after-action.txt")))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((v["valid"].as_bool(), v["makespan"].as_f64()), (Some(true), Some(104.0)));
    let (status, v) = call(&app, "POST", "/validate", Some(body("0: (drive-truck t1 a b d1) [30]"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["valid"], false);
    assert!(v["violation"].is_object());
}
