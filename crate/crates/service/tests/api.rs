use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use isee_core::case::{CaseContext, Dimension};
use isee_core::retention::{save_case_base, CaseBase, CaseStore, XeqInventory};
use isee_core::{fixtures, Engine};
use serde_json::{json, Value};
use tower::ServiceExt;

const TOKEN: &str = "test-token";

fn engine_with(cb: &CaseBase) -> (tempfile::TempDir, Arc<Engine>) {
    let dir = tempfile::tempdir().unwrap();
    save_case_base(dir.path(), cb).unwrap();
    let (onto, lib) = (fixtures::ontology(), fixtures::library());
    let ids = lib.ids();
    let store = CaseStore::open(dir.path(), &CaseContext { ontology: &onto, explainers: &ids }).unwrap();
    (dir, Arc::new(Engine::new(onto, lib, store)))
}

fn app() -> (tempfile::TempDir, Router) {
    let (dir, engine) = engine_with(&fixtures::case_base());
    (dir, isee_service::router(engine, TOKEN, Some("*")))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn raw(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("authorization", format!("Bearer {TOKEN}"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn radiograph() -> Value {
    serde_json::to_value(fixtures::radiograph_description()).unwrap()
}

#[tokio::test]
async fn health_is_public_and_the_rest_is_not() {
    let (_d, app) = app();
    let (s, v) = call(&app, "GET", "/health", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["cases"], 14);
    let (s, v) = call(&app, "GET", "/taxonomy", None, None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(v["error"]["code"], "Unauthenticated");
    let (s, _) = call(&app, "GET", "/taxonomy", None, Some("wrong")).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, v) = call(&app, "GET", "/taxonomy", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["trees"].as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn explainers_and_inventory() {
    let (_d, app) = app();
    let (_, v) = call(&app, "GET", "/explainers", None, Some(TOKEN)).await;
    assert_eq!(v.as_array().unwrap().len(), fixtures::library().len());
    let (_, v) = call(&app, "GET", "/feedback/inventory", None, Some(TOKEN)).await;
    assert_eq!(v["items"].as_array().unwrap().len(), 16);
}

#[tokio::test]
async fn query_ranks_image_cases() {
    let (_d, app) = app();
    let (s, v) = call(&app, "POST", "/query", Some(json!({"description": radiograph(), "k": 3})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    let ranked = v["ranked"].as_array().unwrap();
    assert_eq!(ranked.len(), 3);
    let scores: Vec<f64> = ranked.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(ranked[0]["local"].as_array().unwrap().len(), 7);
}

#[tokio::test]
async fn malformed_body_names_the_field() {
    let (_d, app) = app();
    let mut d = radiograph();
    d["dataset_type"] = json!("audio");
    let (s, v) = call(&app, "POST", "/query", Some(json!({"description": d, "k": 3})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "SchemaViolation");
    assert_eq!(v["error"]["fields"][0]["field"], "description.dataset_type");
    let (s, v) = raw(&app, "/query", "{not json").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "SchemaViolation");
}

#[tokio::test]
async fn unknown_concept_and_bad_k() {
    let (_d, app) = app();
    let mut d = radiograph();
    d["ai_method"] = json!("Telepathy");
    let (s, v) = call(&app, "POST", "/query", Some(json!({"description": d, "k": 3})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["fields"][0]["field"], "description.ai_method");
    let (s, v) = call(&app, "POST", "/query", Some(json!({"description": radiograph(), "k": 0})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "InvalidK");
}

#[tokio::test]
async fn empty_stratum_is_unprocessable() {
    let (_d, engine) = engine_with(&CaseBase::default());
    let app = isee_service::router(engine, TOKEN, None);
    let (s, v) = call(&app, "POST", "/query", Some(json!({"description": radiograph(), "k": 3})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "EmptyCaseBase");
}

#[tokio::test]
async fn adapt_rebuilds_worked_example() {
    let (_d, app) = app();
    let query: Value = serde_json::from_str(fixtures::ADAPTATION_QUERY_JSON).unwrap();
    let body = json!({"query": query, "case_ids": ["fracture-nn1", "fracture-nn2", "fracture-nn3"], "intent": "transparency"});
    let (s, v) = call(&app, "POST", "/adapt", Some(body), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["residual_unmet"], json!([]));
    assert_eq!(v["matches"][0]["subtree"]["origin_case"], "fracture-nn3");
    assert_eq!(v["matches"][1]["subtree"]["origin_case"], "fracture-nn2");
    let body = json!({"query": query, "case_ids": ["missing"], "intent": "transparency"});
    let (s, _) = call(&app, "POST", "/adapt", Some(body), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn explainer_substitution() {
    let (_d, app) = app();
    let body = json!({"target_id": "GradCAM", "description": radiograph()});
    let (s, v) = call(&app, "POST", "/substitutions/explainer", Some(body), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["metric"], "e_sim");
    let ranked = v["ranked"].as_array().unwrap();
    assert_eq!(ranked.len(), fixtures::library().len() - 1);
    assert!(ranked.iter().all(|r| r["explainer_id"] != "GradCAM"));
    let body = json!({"target_id": "Nope", "description": radiograph()});
    let (s, v) = call(&app, "POST", "/substitutions/explainer", Some(body), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "UnknownExplainer");
}

#[tokio::test]
async fn subtree_substitution() {
    let (_d, app) = app();
    let subtree = json!({"question": "why", "tree": {"kind": "UserQuestion", "question": "why", "children": [{"kind": "Explainer", "explainer": "GradCAM"}]}});
    let (s, v) = call(&app, "POST", "/substitutions/subtree", Some(json!({"subtree": subtree, "k": 2})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["metric"], "edit_distance");
    assert_eq!(v["ranked"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn tree_validation_and_simulation() {
    let (_d, app) = app();
    let tree = serde_json::to_value(fixtures::why_what_tree()).unwrap();
    let (s, v) = call(&app, "POST", "/bt/validate", Some(json!({"tree": tree})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["issues"], json!([]));
    let bad = json!({"kind": "Priority", "children": [{"kind": "Explainer", "explainer": "Nope"}]});
    let (_, v) = call(&app, "POST", "/bt/validate", Some(json!({"tree": bad})), Some(TOKEN)).await;
    assert_eq!(v["issues"][0]["kind"], "UnknownExplainer");
    let (s, v) = call(&app, "POST", "/bt/simulate", Some(json!({"tree": bad, "script": ["why"]})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "InvalidTree");
    let body = json!({"tree": tree, "script": ["why", "variant", "what"]});
    let (_, v) = call(&app, "POST", "/bt/simulate", Some(body), Some(TOKEN)).await;
    let emitted: Vec<&str> = v["steps"].as_array().unwrap().iter().map(|s| s["explainer"].as_str().unwrap()).collect();
    assert_eq!(emitted, ["GradCAM", "NearestNeighbours", "IntegratedGradients"]);
}

#[tokio::test]
async fn feedback_means() {
    let (_d, app) = app();
    let inv = XeqInventory::default();
    let all = |score: i64| inv.response("r", inv.items.iter().map(|i| (i.id.as_str(), score)));
    let body = json!({"case_id": "draft", "responses": [all(4), all(2)]});
    let (s, v) = call(&app, "POST", "/feedback", Some(body), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["case_id"], "draft");
    assert_eq!(v["outcome"]["respondent_count"], 2);
    for d in Dimension::ALL {
        assert_eq!(v["outcome"]["dimension_means"][d.token()], 3.0);
    }
    let (s, v) = call(&app, "POST", "/feedback", Some(json!({"responses": []})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "EmptyFeedback");
}

#[tokio::test]
async fn retain_requires_consent_and_persists() {
    let (dir, app) = app();
    let case = serde_json::to_value(fixtures::retained_radiograph_case()).unwrap();
    let (s, v) = call(&app, "POST", "/cases/retain", Some(json!({"case": case, "consent": false})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "ConsentWithheld");
    let (_, h) = call(&app, "GET", "/health", None, None).await;
    assert_eq!(h["cases"], 14);

    let query = json!({"case": {"description": radiograph()}, "consent": true});
    let (s, v) = call(&app, "POST", "/cases/retain", Some(query), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "IncompleteCase");

    let (s, v) = call(&app, "POST", "/cases/retain", Some(json!({"case": case, "consent": true})), Some(TOKEN)).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = v["id"].as_str().unwrap().to_owned();
    assert!(dir.path().join("cases").join(format!("{id}.json")).exists());
    let (s, got) = call(&app, "GET", &format!("/cases/{id}"), None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(got["anonymised"], true);
    let (s, _) = call(&app, "GET", "/cases/nope", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn coverage_and_stats() {
    let (_d, app) = app();
    let (s, v) = call(&app, "GET", "/casebase/coverage?threshold=0.7", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["cases"].as_array().unwrap().len(), 14);
    assert_eq!(v["strata"]["image"], 6);
    let (s, v) = call(&app, "GET", "/casebase/coverage?threshold=2", None, Some(TOKEN)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "InvalidRequest");
    let (_, v) = call(&app, "GET", "/casebase/stats", None, Some(TOKEN)).await;
    assert_eq!(v["cases"], 14);
}

#[tokio::test]
async fn cors_preflight() {
    let (_d, app) = app();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/query")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert!(res.status().is_success());
    assert_eq!(res.headers()["access-control-allow-origin"], "*");
}

#[test]
fn status_mapping() {
    use isee_core::retention::RetentionError;
    use isee_core::Error;
    assert_eq!(
        isee_service::status_for(&Error::Retention(RetentionError::DuplicateId("x".into()))),
        StatusCode::CONFLICT
    );
    assert_eq!(
        isee_service::status_for(&Error::Retention(RetentionError::ConsentWithheld)),
        StatusCode::BAD_REQUEST
    );
}
