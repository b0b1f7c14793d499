use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use h2atlas::service::fixture::{write_fixture, FixtureOptions};
use h2atlas::service::pipeline::{layer_csv, read_curve_csv};
use h2atlas::service::{router, AppState, Store};

struct Resp {
    status: StatusCode,
    etag: Option<String>,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Resp {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(app: &Router, req: Request<Body>) -> Resp {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let h = |k| resp.headers().get(k).map(|v: &header::HeaderValue| v.to_str().unwrap().to_string());
    let etag = h(header::ETAG);
    let content_type = h(header::CONTENT_TYPE);
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Resp {
        status,
        etag,
        content_type,
        body,
    }
}

async fn get(app: &Router, uri: &str) -> Resp {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: impl Into<Body>) -> Resp {
    call(
        app,
        Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(body.into())
            .unwrap(),
    )
    .await
}

fn fixture_config(dir: &Path) -> Value {
    let path = write_fixture(dir, FixtureOptions::default()).unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["base_dir"] = json!(dir);
    v
}

async fn wait_done(app: &Router, run_id: &str) -> Value {
    for _ in 0..600 {
        let r = get(app, &format!("/api/runs/{run_id}")).await;
        assert_eq!(r.status, StatusCode::OK);
        let m = r.json();
        match m["status"].as_str().unwrap() {
            "done" => return m,
            "failed" => panic!("run failed: {m}"),
            _ => tokio::time::sleep(Duration::from_millis(100)).await,
        }
    }
    panic!("run {run_id} did not finish");
}

/// Submits the fixture run and waits for it; returns (app, store, run id).
async fn finished_run(tmp: &Path) -> (Router, Store, String) {
    let store = Store::open(tmp.join("store")).unwrap();
    let app = router(AppState::new(store.clone(), 1, Some(2)));
    let cfg = fixture_config(&tmp.join("fixture"));
    let r = post(&app, "/api/runs", cfg.to_string()).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&r.body));
    let run_id = r.json()["run_id"].as_str().unwrap().to_string();
    wait_done(&app, &run_id).await;
    (app, store, run_id)
}

fn assert_error(r: &Resp, status: StatusCode) {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["error"]["status"], status.as_u16());
    assert!(v["error"]["code"].is_string());
    assert!(!v["error"]["message"].as_str().unwrap().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn run_lifecycle_accepts_conflicts_then_serves_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let store = Store::open(tmp.path().join("store")).unwrap();
    let app = router(AppState::new(store, 1, Some(2)));
    let cfg = fixture_config(&tmp.path().join("fixture"));

    let first = post(&app, "/api/runs", cfg.to_string()).await;
    assert_eq!(first.status, StatusCode::ACCEPTED);
    let manifest = first.json();
    let run_id = manifest["run_id"].as_str().unwrap().to_string();
    assert_eq!(run_id.len(), 16);

    let dup = post(&app, "/api/runs", cfg.to_string()).await;
    assert_error(&dup, StatusCode::CONFLICT);

    let done = wait_done(&app, &run_id).await;
    assert_eq!(done["regions"].as_array().unwrap().len(), 3);

    let again = post(&app, "/api/runs", cfg.to_string()).await;
    assert_eq!(again.status, StatusCode::OK);
    assert_eq!(again.json()["run_id"], run_id.as_str());

    let list = get(&app, "/api/runs").await;
    assert_eq!(list.status, StatusCode::OK);
    let ids: Vec<Value> = list.json().as_array().unwrap().iter().map(|m| m["run_id"].clone()).collect();
    assert_eq!(ids, vec![json!(run_id)]);
}

#[tokio::test]
async fn schema_violations_are_400() {
    let tmp = tempfile::tempdir().unwrap();
    let app = router(AppState::new(Store::open(tmp.path()).unwrap(), 1, Some(1)));
    assert_error(&post(&app, "/api/runs", "{not json").await, StatusCode::BAD_REQUEST);
    assert_error(&post(&app, "/api/runs", r#"{"scenario": 3}"#).await, StatusCode::BAD_REQUEST);

    let mut cfg = fixture_config(&tmp.path().join("fixture"));
    cfg["no_such_field"] = json!(1);
    assert_error(&post(&app, "/api/runs", cfg.to_string()).await, StatusCode::BAD_REQUEST);

    let mut cfg = fixture_config(&tmp.path().join("fixture"));
    cfg["base_dir"] = json!(tmp.path().join("missing"));
    assert_error(&post(&app, "/api/runs", cfg.to_string()).await, StatusCode::BAD_REQUEST);
    assert!(get(&app, "/api/runs").await.json().as_array().unwrap().is_empty());
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let tmp = tempfile::tempdir().unwrap();
    let app = router(AppState::new(Store::open(tmp.path()).unwrap(), 1, Some(1)));
    assert_error(&get(&app, "/api/runs/0123456789abcdef").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/runs/..%2F..%2Fetc").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/layers/eligibility").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/layers/nonsense").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/regions/BEN.10_1/cost-potential").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/nothing").await, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn done_run_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, store, run_id) = finished_run(tmp.path()).await;

    // manifest is immutable once done
    let m1 = get(&app, &format!("/api/runs/{run_id}")).await;
    let m2 = get(&app, &format!("/api/runs/{run_id}")).await;
    let etag = m1.etag.clone().expect("etag on done run");
    assert_eq!(m2.etag.as_deref(), Some(etag.as_str()));
    let not_modified = call(
        &app,
        Request::get(format!("/api/runs/{run_id}"))
            .header(header::IF_NONE_MATCH, &etag)
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(not_modified.status, StatusCode::NOT_MODIFIED);
    assert!(not_modified.body.is_empty());

    // layers as GeoJSON and CSV
    for name in ["eligibility", "lcoe_wind", "lcoe_pv", "sustainable_yield", "lcoh", "socio_composite"] {
        let r = get(&app, &format!("/api/layers/{name}")).await;
        assert_eq!(r.status, StatusCode::OK, "{name}");
        assert_eq!(r.content_type.as_deref(), Some("application/geo+json"));
        let fc = r.json();
        assert_eq!(fc["type"], "FeatureCollection");
        assert_eq!(fc["features"].as_array().unwrap().len(), 3, "{name}");
        for f in fc["features"].as_array().unwrap() {
            assert!(f["properties"]["gid"].is_string());
        }
        let csv = get(&app, &format!("/api/layers/{name}?format=csv&run={run_id}")).await;
        assert_eq!(csv.status, StatusCode::OK);
        assert_eq!(csv.body, layer_csv(&store, &run_id, name).unwrap().into_bytes());
    }
    let m = m1.json();
    let (year, rcp, case) = (&m["scenario"]["year"], &m["scenario"]["rcp"], &m["scenario"]["case"]);
    let r = get(&app, &format!("/api/layers/lcoh?year={year}&rcp={}&case={}", rcp.as_str().unwrap(), case.as_str().unwrap())).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_error(&get(&app, "/api/layers/lcoh?year=1999").await, StatusCode::NOT_FOUND);
    assert_error(&get(&app, "/api/layers/lcoh?format=xml").await, StatusCode::BAD_REQUEST);
    assert_error(&get(&app, "/api/layers/lcoh?rcp=rcp99").await, StatusCode::BAD_REQUEST);

    // cost-potential curve
    let c = get(&app, "/api/regions/BEN.10_1/cost-potential").await;
    assert_eq!(c.status, StatusCode::OK);
    let v = c.json();
    assert_eq!(v["run_id"], run_id.as_str());
    let steps = v["curve"]["points"].as_array().unwrap();
    assert!(!steps.is_empty());
    let csv = get(&app, &format!("/api/regions/BEN.10_1/cost-potential?format=csv&run={run_id}")).await;
    assert_eq!(csv.status, StatusCode::OK);
    assert_eq!(csv.content_type.as_deref(), Some("text/csv"));
    assert_eq!(csv.body, read_curve_csv(&store, &run_id, "BEN.10_1").unwrap().into_bytes());
    assert_eq!(String::from_utf8(csv.body).unwrap().lines().count(), steps.len() + 1);
    assert_error(&get(&app, "/api/regions/XXX.1_1/cost-potential").await, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn eligibility_and_whatif() {
    let tmp = tempfile::tempdir().unwrap();
    let (app, _store, run_id) = finished_run(tmp.path()).await;

    for tech in ["wind", "pv"] {
        let r = get(&app, &format!("/api/regions/BEN.10_1/eligibility?tech={tech}")).await;
        assert_eq!(r.status, StatusCode::OK);
        let stored = r.json();
        assert_eq!(stored["run_id"], run_id.as_str());
        let grid = stored["grid"].as_str().unwrap();
        assert!(tmp.path().join("store").join(grid).is_file(), "{grid}");
        let f = stored["eligible_fraction"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f));

        // empty body and empty overrides both reproduce the stored result
        for body in [String::new(), json!({"tech": tech, "overrides": {}}).to_string()] {
            let uri = format!("/api/regions/BEN.10_1/eligibility:whatif?tech={tech}");
            let w = post(&app, &uri, body).await;
            assert_eq!(w.status, StatusCode::OK, "{}", String::from_utf8_lossy(&w.body));
            let w = w.json();
            assert_eq!(w["delta"], 0.0);
            for k in ["eligible_fraction", "region_cells", "eligible_cells", "ledger"] {
                assert_eq!(w[k], stored[k], "{k}");
            }
        }

        // raising each buffer never raises the fraction
        let ledger = stored["ledger"].as_object().unwrap();
        for id in ledger.keys() {
            let body = json!({"tech": tech, "overrides": {id.clone(): 1000.0}}).to_string();
            let w = post(&app, "/api/regions/BEN.10_1/eligibility:whatif", body).await;
            assert_eq!(w.status, StatusCode::OK, "{}", String::from_utf8_lossy(&w.body));
            let w = w.json();
            assert!(w["eligible_fraction"].as_f64().unwrap() <= f, "criterion {id}");
            assert!(w["delta"].as_f64().unwrap() <= 0.0);
            assert_eq!(w["baseline_fraction"], stored["eligible_fraction"]);
        }
    }

    // cached GET answers If-None-Match
    let r = get(&app, "/api/regions/BEN.10_1/eligibility").await;
    let etag = r.etag.unwrap();
    let again = call(
        &app,
        Request::get("/api/regions/BEN.10_1/eligibility")
            .header(header::IF_NONE_MATCH, etag)
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(again.status, StatusCode::NOT_MODIFIED);

    let bad = post(&app, "/api/regions/BEN.10_1/eligibility:whatif", r#"{"buffers": {}}"#).await;
    assert_error(&bad, StatusCode::BAD_REQUEST);
    let bad = post(&app, "/api/regions/BEN.10_1/eligibility:whatif", r#"{"overrides": {"1": -5}}"#).await;
    assert_error(&bad, StatusCode::BAD_REQUEST);
    let far = post(&app, "/api/regions/BEN.10_1/eligibility:whatif", r#"{"overrides": {"1": 1e6}}"#).await;
    assert_error(&far, StatusCode::BAD_REQUEST);
    let bad = get(&app, "/api/regions/BEN.10_1/eligibility?tech=hydro").await;
    assert_error(&bad, StatusCode::BAD_REQUEST);
    let missing = post(&app, "/api/regions/NOPE.1_1/eligibility:whatif", "").await;
    assert_error(&missing, StatusCode::NOT_FOUND);
}

#[test]
fn state_is_shareable() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Arc<AppState>>();
}
