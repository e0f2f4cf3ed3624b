use std::process::Command;

use axum::body::Body;
use axum::http::Request;
use clap::Parser;
use http_body_util::BodyExt;
use planlens_service::api::{router, AppState, DEFAULT_ASK_WAIT};
use planlens_service::cli::{run, Cli, CliError};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_path(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

fn cli(args: &[&str]) -> Result<String, CliError> {
    let parsed = Cli::try_parse_from(std::iter::once("planlens").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run(parsed, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

/// Starts a workspace from the DriverLog fixture plan.
fn workspace(dir: &tempfile::TempDir) -> String {
    let ws = dir.path().join("ws.json").display().to_string();
    cli(&[
        "plan",
        "--domain",
        &fixture_path("driverlog-domain.pddl"),
        "--problem",
        &fixture_path("driverlog-problem.pddl"),
        "--plan",
        &fixture_path("plan-original.txt"),
        "--workspace",
        &ws,
    ])
    .unwrap();
    ws
}

#[test]
fn plan_ask_compare_through_a_workspace_file() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(&dir);

    let alts = cli(&["alternatives", "--workspace", &ws, "--step", "3"]).unwrap();
    assert!(alts.lines().any(|l| l == "(load-truck p1 t1 a)"), "{alts}");

    let answer =
        cli(&["ask", "--workspace", &ws, "--step", "3", "--action", "(load-truck p1 t1 a)", "--strategy", "segments"])
            .unwrap();
    assert!(answer.starts_with("plan 2 (child of 1): (load-truck p1 t1 a) instead of (load-truck p1 t2 a), segments"));
    assert!(answer.contains("behavior: "));

    let tree = cli(&["load", "--workspace", &ws]).unwrap();
    assert_eq!(tree.lines().count(), 2, "{tree}");
    assert!(tree.lines().nth(1).unwrap().starts_with('*'));

    let table = cli(&["compare", "--workspace", &ws, "--metrics", "makespan"]).unwrap();
    let best = table.lines().last().unwrap().split_whitespace().collect::<Vec<_>>();
    assert_eq!(best, ["best", "1"]);

    let copy = dir.path().join("copy.json").display().to_string();
    cli(&["save", "--workspace", &ws, "--output", &copy]).unwrap();
    assert_eq!(std::fs::read_to_string(&copy).unwrap(), std::fs::read_to_string(&ws).unwrap());
}

#[test]
fn window_and_action_errors_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(&dir);
    let ask = |action: &str, window: &str| {
        cli(&[
            "ask",
            "--workspace",
            &ws,
            "--step",
            "3",
            "--action",
            action,
            "--strategy",
            "time-window",
            "--window",
            window,
        ])
    };
    let Err(CliError::Api(e)) = ask("(load-truck p1 t1 a)", "10") else { panic!() };
    assert_eq!(e.code, "bad-window");
    let Err(CliError::Api(e)) = ask("(load-truck p1 t2 a)", "10,20") else { panic!() };
    assert_eq!(e.code, "stale-suggestion");
    let node: Value = serde_json::from_str(
        &cli(&[
            "--json",
            "ask",
            "--workspace",
            &ws,
            "--step",
            "3",
            "--action",
            "(load-truck p1 t1 a)",
            "--strategy",
            "time-window",
            "--window",
            "10,20",
        ])
        .unwrap(),
    )
    .unwrap();
    assert_eq!(node["window"], json!([10.0, 20.0]));
}

#[tokio::test]
async fn cli_and_api_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ws = workspace(&dir);
    let from_cli: Value =
        serde_json::from_str(&cli(&["--json", "alternatives", "--workspace", &ws, "--step", "3"]).unwrap()).unwrap();
    let report_cli: Value = serde_json::from_str(
        &cli(&[
            "--json",
            "validate",
            "--domain",
            &fixture_path("driverlog-domain.pddl"),
            "--problem",
            &fixture_path("driverlog-problem.pddl"),
            "--plan",
            &fixture_path("plan-forced.txt"),
        ])
        .unwrap(),
    )
    .unwrap();

    let app = router(AppState::new(DEFAULT_ASK_WAIT));
    let post = |uri: &str, body: Value| {
        Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
    };
    let body = |resp: axum::response::Response| async move {
        serde_json::from_slice::<Value>(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
    };
    let session = json!({
        "domain": fixture("driverlog-domain.pddl"),
        "problem": fixture("driverlog-problem.pddl"),
        "plan": fixture("plan-original.txt"),
    });
    let created = body(app.clone().oneshot(post("/sessions", session)).await.unwrap()).await;
    let id = created["sessionId"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/plans/1/steps/3/alternatives");
    let from_api = body(app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap()).await;
    assert_eq!(from_cli, from_api);

    let check = json!({
        "domain": fixture("driverlog-domain.pddl"),
        "problem": fixture("driverlog-problem.pddl"),
        "plan": fixture("plan-forced.txt"),
    });
    let report_api = body(app.oneshot(post("/validate", check)).await.unwrap()).await;
    assert_eq!(report_cli, report_api);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_planlens");
    let validate = |plan: &str| {
        Command::new(exe)
            .args(["validate", "--domain", &fixture_path("driverlog-domain.pddl")])
            .args(["--problem", &fixture_path("driverlog-problem.pddl"), "--plan", plan])
            .output()
            .unwrap()
    };
    let ok = validate(&fixture_path("plan-original.txt"));
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout), "valid, makespan 62.0\n");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0: (drive-truck t1 a b d1) [30]\n").unwrap();
    let out = validate(&bad.display().to_string());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("invalid: "));

    let missing = validate("/nonexistent/plan.txt");
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: /nonexistent/plan.txt"));
}
