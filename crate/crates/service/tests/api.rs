use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relaxq_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/testdata")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: impl Into<String>,
) -> (StatusCode, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.into()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

async fn session(app: &Router) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        fixture("running_example.pnml"),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    json(&body)["id"].as_str().unwrap().to_owned()
}

const REMOVE_PQC: &str = r#"{"op": "remove_activity", "a": "PQC"}"#;
const REMOVE_CO: &str = r#"{"op": "remove_activity", "a": "CO"}"#;

#[tokio::test]
async fn create_returns_the_derived_matrix() {
    let app = router(AppState::default());
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        fixture("running_example.pnml"),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let v = json(&body);
    assert_eq!(v["matrix"]["activities"][0], "CPR");
    assert_eq!(v["matrix"]["cells"][0][1], "->");
    assert_eq!(v["matrix"]["cells"][1][0], "<-");
    let id = v["id"].as_str().unwrap();
    let (_, matrix) = call(&app, Method::GET, &format!("/sessions/{id}/matrix"), "").await;
    assert_eq!(json(&matrix), v["matrix"]);
}

#[tokio::test]
async fn malformed_and_unsound_nets_are_rejected() {
    let app = router(AppState::default());
    let (status, body) = call(&app, Method::POST, "/sessions", "<pnml><net").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["code"], "invalid_net");

    let unsound = r#"<pnml><net id="n">
      <place id="i"/><place id="p1"/><place id="p2"/><place id="o"/>
      <transition id="a"><name><text>a</text></name></transition>
      <transition id="b"><name><text>b</text></name></transition>
      <transition id="c"><name><text>c</text></name></transition>
      <arc id="1" source="i" target="a"/><arc id="2" source="i" target="b"/>
      <arc id="3" source="a" target="p1"/><arc id="4" source="b" target="p2"/>
      <arc id="5" source="p1" target="c"/><arc id="6" source="p2" target="c"/>
      <arc id="7" source="c" target="o"/>
    </net></pnml>"#;
    let (status, body) = call(&app, Method::POST, "/sessions", unsound).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let v = json(&body);
    assert_eq!(v["code"], "unsound");
    assert!(v["detail"]["counterexample"]
        .as_str()
        .unwrap()
        .contains("p1"));

    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions?state_limit=3",
        fixture("running_example.pnml"),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["code"], "state_space_exceeded");
}

#[tokio::test]
async fn remove_activity_diff_and_undo() {
    let app = router(AppState::default());
    let id = session(&app).await;
    let (_, base) = call(&app, Method::GET, &format!("/sessions/{id}/matrix"), "").await;

    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/ops"),
        REMOVE_PQC,
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v = json(&body);
    assert_eq!(v["diff"].as_array().unwrap().len(), 17);
    assert!(v["diff"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["new"] == "<>"));

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["matrix"], json(&base));

    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json(&body)["code"], "empty_history");
}

#[tokio::test]
async fn precondition_violation_is_a_conflict() {
    let app = router(AppState::default());
    let id = session(&app).await;
    let op = r#"{"op": "exclusive_to_direct", "a": "CPR", "b": "KPR"}"#;
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/ops"), op).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let v = json(&body);
    assert_eq!(v["code"], "precondition_violated");
    assert_eq!(v["detail"]["cell"], "->");

    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/ops"),
        "{\"op\": 1}",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::GET, "/sessions/nope/matrix", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn constraints_sql_and_check_follow_the_current_matrix() {
    let app = router(AppState::default());
    let id = session(&app).await;

    let (_, body) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/constraints"),
        "",
    )
    .await;
    assert!(json(&body)
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["template"] == "Init" && c["target"] == serde_json::json!(["CPR"])));

    let (status, sql) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/sql?mode=paper"),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(sql.contains("PATTERN (^CPR ANY*)"));
    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/sql?mode=fast"),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/check"), "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/log"),
        fixture("running_example_log.csv"),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["events"], 6);
    let (_, body) = call(&app, Method::POST, &format!("/sessions/{id}/check"), "").await;
    assert_eq!(json(&body)["conformance_rate"], 0.0);

    for op in [REMOVE_PQC, REMOVE_CO] {
        call(&app, Method::POST, &format!("/sessions/{id}/ops"), op).await;
    }
    let (_, body) = call(&app, Method::POST, &format!("/sessions/{id}/check"), "").await;
    assert_eq!(json(&body)["conformance_rate"], 1.0);

    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/log"),
        "case_id,event_name\n1,a\n",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test]
async fn script_replays_to_current_matrix_and_snapshot_restores() {
    let app = router(AppState::default());
    let id = session(&app).await;
    for op in [REMOVE_PQC, REMOVE_CO] {
        call(&app, Method::POST, &format!("/sessions/{id}/ops"), op).await;
    }
    let (_, script) = call(&app, Method::GET, &format!("/sessions/{id}/script"), "").await;
    assert_eq!(script, fixture("relax_pqc_co.json"));
    let (_, current) = call(&app, Method::GET, &format!("/sessions/{id}/matrix"), "").await;

    let base = relaxq::pipeline::derive_from_pnml(&fixture("running_example.pnml"), 100_000)
        .unwrap()
        .matrix;
    let replayed = relaxq::replay(
        &base,
        &relaxq::RelaxationScript::from_json(&script).unwrap(),
    )
    .unwrap();
    assert_eq!(replayed.to_json(), current);

    let (_, snapshot) = call(&app, Method::GET, &format!("/sessions/{id}/snapshot"), "").await;
    let (status, body) = call(&app, Method::POST, "/sessions", snapshot).await;
    assert_eq!(status, StatusCode::CREATED);
    let restored = json(&body)["id"].as_str().unwrap().to_owned();
    let (_, matrix) = call(
        &app,
        Method::GET,
        &format!("/sessions/{restored}/matrix"),
        "",
    )
    .await;
    assert_eq!(matrix, current);

    let bad = serde_json::json!({"pnml": fixture("running_example.pnml"), "script": [{"op": "decouple", "a": "CPR", "b": "ZZZ"}]});
    let (status, body) = call(&app, Method::POST, "/sessions", bad.to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert_eq!(json(&body)["detail"]["index"], 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_ops_are_serialized() {
    let app = router(AppState::default());
    let id = session(&app).await;
    let ops = [
        r#"{"op": "decouple", "a": "CPR", "b": "KPR"}"#,
        r#"{"op": "decouple", "a": "KPR", "b": "CPO"}"#,
        r#"{"op": "decouple", "a": "RG", "b": "PQC"}"#,
        r#"{"op": "direct_to_eventual", "a": "RI", "b": "SP"}"#,
        r#"{"op": "direct_to_eventual", "a": "RI", "b": "SP"}"#,
        r#"{"op": "remove_activity", "a": "RR"}"#,
        r#"{"op": "exclusive_to_direct", "a": "CPR", "b": "RR"}"#,
        r#"{"op": "remove_activity", "a": "CO"}"#,
    ];
    let mut handles = Vec::new();
    for k in 0..40 {
        let app = app.clone();
        let uri = format!("/sessions/{id}/ops");
        let op = ops[k % ops.len()];
        handles.push(tokio::spawn(async move {
            call(&app, Method::POST, &uri, op).await.0
        }));
    }
    let mut ok = 0;
    for h in handles {
        if h.await.unwrap().is_success() {
            ok += 1;
        }
    }
    let (_, script) = call(&app, Method::GET, &format!("/sessions/{id}/script"), "").await;
    let script = relaxq::RelaxationScript::from_json(&script).unwrap();
    assert_eq!(script.ops.len(), ok);
    assert!(ok > 0);
}
