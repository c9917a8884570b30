//! HTTP facade over [`isee_core::Engine`].
//!
//! Every route except `GET /health` needs `Authorization: Bearer <token>`.
//! Bodies are JSON; errors come back as
//! `{"error": {"code", "message", "fields"}}`.

pub mod api;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use isee_core::case::{from_json_str, to_json};
use isee_core::retention::{RetentionError, XeqInventory};
use isee_core::{Engine, Error};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use api::*;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("could not load the data directory: {0}")]
    Load(#[from] Error),
    #[error("could not bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub listen: SocketAddr,
    pub token: String,
    pub data_dir: PathBuf,
    /// Allowed browser origin; `*` allows any.
    pub cors_origin: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub token: Arc<str>,
}

/// Status code for an engine error.
pub fn status_for(e: &Error) -> StatusCode {
    match e.code() {
        "NotFound" | "UnknownExplainer" => StatusCode::NOT_FOUND,
        "DuplicateId" => StatusCode::CONFLICT,
        "EmptyCaseBase" | "EmptyNeighbourhood" | "MissingSolution" | "SizeCapExceeded" => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        "Io" | "CorruptCaseBase" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response()
}

/// Pretty JSON in the engine's canonical form.
pub struct ApiJson<T>(pub T);

impl<T: Serialize> IntoResponse for ApiJson<T> {
    fn into_response(self) -> Response {
        json_response(StatusCode::OK, to_json(&self.0))
    }
}

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError(Error::InvalidRequest(e.body_text())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| ApiError(Error::InvalidRequest(e.to_string())))?;
        Ok(ApiJson(from_json_str(text).map_err(|e| ApiError(e.into()))?))
    }
}

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(status_for(&self.0), to_json(&ErrorBody::from(&self.0)))
    }
}

type ApiResult<T> = Result<ApiJson<T>, ApiError>;

fn unauthenticated() -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            code: "Unauthenticated".into(),
            message: "missing or invalid bearer token".into(),
            fields: Vec::new(),
        },
    };
    json_response(StatusCode::UNAUTHORIZED, to_json(&body))
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == &*state.token);
    if ok || req.method() == Method::OPTIONS {
        next.run(req).await
    } else {
        unauthenticated()
    }
}

async fn health(State(s): State<AppState>) -> ApiJson<Health> {
    let cb = s.engine.snapshot();
    ApiJson(Health {
        status: "ok".into(),
        cases: cb.len(),
        revision: cb.revision(),
    })
}

async fn taxonomy(State(s): State<AppState>) -> Response {
    ApiJson(s.engine.ontology().document()).into_response()
}

async fn explainers(State(s): State<AppState>) -> Response {
    ApiJson(s.engine.library().specs()).into_response()
}

async fn inventory() -> ApiJson<XeqInventory> {
    ApiJson(XeqInventory::default())
}

async fn query(State(s): State<AppState>, ApiJson(r): ApiJson<QueryRequest>) -> ApiResult<isee_core::retrieval::RetrievalResult> {
    Ok(ApiJson(s.engine.query(&r.description, r.k)?))
}

async fn adapt(State(s): State<AppState>, ApiJson(r): ApiJson<AdaptRequest>) -> ApiResult<isee_core::adaptation::AdaptationPlan> {
    Ok(ApiJson(s.engine.adapt(&r.query, &r.case_ids, &r.intent)?))
}

async fn substitute_explainer(
    State(s): State<AppState>,
    ApiJson(r): ApiJson<ExplainerSubstitutionRequest>,
) -> ApiResult<isee_core::revision::ExplainerRanking> {
    Ok(ApiJson(s.engine.substitute_explainer(&r.target_id, &r.description)?))
}

async fn substitute_subtree(
    State(s): State<AppState>,
    ApiJson(r): ApiJson<SubtreeSubstitutionRequest>,
) -> ApiResult<isee_core::revision::SubtreeRanking> {
    let engine = s.engine.clone();
    let ranking = tokio::task::spawn_blocking(move || engine.substitute_subtree(&r.subtree, r.k))
        .await
        .map_err(|e| ApiError(Error::InvalidRequest(e.to_string())))??;
    Ok(ApiJson(ranking))
}

async fn validate(State(s): State<AppState>, ApiJson(r): ApiJson<TreeRequest>) -> ApiJson<isee_core::strategy::ValidationReport> {
    ApiJson(s.engine.validate_tree(&r.tree))
}

async fn simulate(State(s): State<AppState>, ApiJson(r): ApiJson<SimulateRequest>) -> ApiResult<isee_core::strategy::Trace> {
    Ok(ApiJson(s.engine.simulate(&r.tree, &r.script)?))
}

async fn feedback(State(s): State<AppState>, ApiJson(r): ApiJson<FeedbackRequest>) -> ApiResult<FeedbackResult> {
    Ok(ApiJson(FeedbackResult {
        outcome: s.engine.feedback(&r.responses)?,
        case_id: r.case_id,
    }))
}

async fn retain(State(s): State<AppState>, ApiJson(r): ApiJson<RetainRequest>) -> Result<Response, ApiError> {
    if !r.consent {
        return Err(ApiError(RetentionError::ConsentWithheld.into()));
    }
    let engine = s.engine.clone();
    let id = tokio::task::spawn_blocking(move || engine.retain(&r.case, r.consent))
        .await
        .map_err(|e| ApiError(Error::InvalidRequest(e.to_string())))??;
    let body = RetainResult {
        revision: s.engine.snapshot().revision(),
        id,
    };
    Ok(json_response(StatusCode::CREATED, to_json(&body)))
}

async fn get_case(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<isee_core::case::Case> {
    Ok(ApiJson(s.engine.case(&id)?))
}

#[derive(Deserialize)]
struct CoverageParams {
    threshold: Option<f64>,
}

/// Threshold used when a coverage request names none.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.7;

async fn coverage(State(s): State<AppState>, Query(p): Query<CoverageParams>) -> ApiResult<isee_core::retention::CoverageReport> {
    Ok(ApiJson(s.engine.coverage(p.threshold.unwrap_or(DEFAULT_COVERAGE_THRESHOLD))?))
}

async fn stats(State(s): State<AppState>) -> ApiJson<isee_core::retention::CaseBaseStats> {
    ApiJson(s.engine.stats())
}

async fn not_found() -> ApiError {
    ApiError(Error::NotFound {
        kind: "route",
        id: String::new(),
    })
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    match origin {
        Some("*") => layer.allow_origin(AllowOrigin::any()),
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => layer.allow_origin(v),
            Err(_) => layer,
        },
        None => layer,
    }
}

pub fn router(engine: Arc<Engine>, token: &str, cors_origin: Option<&str>) -> Router {
    let state = AppState {
        engine,
        token: token.into(),
    };
    let protected = Router::new()
        .route("/taxonomy", get(taxonomy))
        .route("/explainers", get(explainers))
        .route("/feedback/inventory", get(inventory))
        .route("/query", post(query))
        .route("/adapt", post(adapt))
        .route("/substitutions/explainer", post(substitute_explainer))
        .route("/substitutions/subtree", post(substitute_subtree))
        .route("/bt/validate", post(validate))
        .route("/bt/simulate", post(simulate))
        .route("/feedback", post(feedback))
        .route("/cases/retain", post(retain))
        .route("/cases/{id}", get(get_case))
        .route("/casebase/coverage", get(coverage))
        .route("/casebase/stats", get(stats))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(health))
        .merge(protected)
        .fallback(not_found)
        .layer(cors(cors_origin))
        .with_state(state)
}

/// Loads the data directory and serves until ctrl-c.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let engine = Arc::new(Engine::open(&config.data_dir)?);
    let app = router(engine, &config.token, config.cors_origin.as_deref());
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen,
            source,
        })?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
