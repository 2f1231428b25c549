//! HTTP front end for the labrag query engine.
//!
//! * `POST /api/query` runs one query (see [`QueryRequest`]).
//! * `GET /api/health` reports index statistics and retrieval defaults.
//! * Any other path is served from the static directory, when configured.

mod config;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use labrag::corpus::load_corpus;
use labrag::engine::{Engine, EngineError, ErrorClass, QueryError, QueryRequest};
use labrag::exec::Execution;
use labrag::index::IndexBundle;
use labrag::retrieval::Strategy;
use serde_json::{json, Map, Value};
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

pub use config::{ConfigError, EngineConfig};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Corpus(#[from] labrag::corpus::CorpusError),
    #[error(transparent)]
    Index(#[from] labrag::index::IndexError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    engine: Option<Arc<Engine>>,
    blocking: Arc<Semaphore>,
}

impl AppState {
    pub fn new(engine: Option<Engine>, max_blocking: usize) -> Self {
        Self {
            engine: engine.map(Arc::new),
            blocking: Arc::new(Semaphore::new(max_blocking.max(1))),
        }
    }
}

/// Builds the engine the config describes: a saved index when `index` is set,
/// otherwise an in-memory index over `corpus`, otherwise none.
pub fn load_engine(config: &EngineConfig) -> Result<Option<Engine>, ServiceError> {
    if let Some(dir) = &config.index {
        let (engine, _) = Engine::open(dir, config.embedding.as_ref(), &config.generator, config.retrieval.clone())?;
        return Ok(Some(engine));
    }
    let Some(corpus_path) = &config.corpus else {
        return Ok(None);
    };
    let corpus = load_corpus(corpus_path)?;
    let spec = config.embedding.clone().unwrap_or_default();
    let bundle = IndexBundle::build(corpus, &config.chunking, &spec, Execution::Parallel)?;
    let engine = Engine::new(bundle, spec.build(), config.generator.build(), config.retrieval.clone())?;
    Ok(Some(engine))
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/query", post(handle_query))
        .route("/api/health", get(handle_health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}

fn error(status: StatusCode, message: impl Into<String>, stage: Option<&str>) -> Response {
    let mut body = json!({ "error": message.into() });
    if let Some(stage) = stage {
        body["stage"] = json!(stage);
    }
    (status, Json(body)).into_response()
}

fn status_of(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::BadRequest => StatusCode::BAD_REQUEST,
        ErrorClass::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorClass::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// Parses the request body. Type errors and unknown strategies are bad
/// requests; an integer `k` below 1 is unprocessable.
pub fn parse_query(body: &[u8]) -> Result<QueryRequest, QueryError> {
    let bad = |m: &str| QueryError::BadRequest(m.to_string());
    let value: Value = serde_json::from_slice(body).map_err(|e| QueryError::BadRequest(format!("malformed JSON: {e}")))?;
    let Value::Object(fields) = value else {
        return Err(bad("request body must be a JSON object"));
    };
    let fields: Map<String, Value> = fields;
    for key in fields.keys() {
        if !matches!(key.as_str(), "question" | "strategy" | "k" | "generate") {
            return Err(QueryError::BadRequest(format!("unknown field `{key}`")));
        }
    }
    let question = match fields.get("question") {
        Some(Value::String(q)) => q.clone(),
        Some(_) => return Err(bad("`question` must be a string")),
        None => return Err(bad("missing `question`")),
    };
    let strategy = match fields.get("strategy") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<Strategy>().map_err(|e| QueryError::BadRequest(e.to_string()))?),
        Some(_) => return Err(bad("`strategy` must be a string")),
    };
    let k = match fields.get("k") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => match (n.as_i64(), n.as_u64()) {
            (_, Some(k)) if k >= 1 => Some(k as usize),
            (Some(_), _) | (_, Some(_)) => return Err(QueryError::Unprocessable("k must be at least 1".into())),
            _ => return Err(bad("`k` must be an integer")),
        },
        Some(_) => return Err(bad("`k` must be an integer")),
    };
    let generate = match fields.get("generate") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(bad("`generate` must be a boolean")),
    };
    Ok(QueryRequest {
        question,
        strategy,
        k,
        generate,
    })
}

async fn handle_query(State(state): State<AppState>, body: Bytes) -> Response {
    let request = match parse_query(&body) {
        Ok(r) => r,
        Err(e) => return error(status_of(e.class()), e.to_string(), None),
    };
    let Some(engine) = state.engine.clone() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no index loaded", Some("index"));
    };
    let Ok(_permit) = state.blocking.clone().acquire_owned().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "shutting down", None);
    };
    match tokio::task::spawn_blocking(move || engine.query(&request)).await {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => error(status_of(e.class()), e.to_string(), e.stage()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("query task failed: {e}"), None),
    }
}

/// Health body for an optional engine.
pub fn health_body(engine: Option<&Engine>) -> Value {
    match engine {
        None => json!({ "status": "no_index" }),
        Some(engine) => {
            let stats = engine.stats();
            json!({
                "status": "ok",
                "num_docs": stats.num_docs,
                "num_chunks": stats.num_chunks,
                "provider": stats.provider,
                "defaults": stats.defaults,
            })
        }
    }
}

async fn handle_health(State(state): State<AppState>) -> Json<Value> {
    Json(health_body(state.engine.as_deref()))
}

/// Serves until ctrl-c, then stops accepting and drains in-flight requests.
pub async fn serve(config: EngineConfig, engine: Option<Engine>) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.listen.clone(),
            source,
        })?;
    let addr: SocketAddr = listener.local_addr().map_err(ServiceError::Serve)?;
    eprintln!("listening on http://{addr}");
    let app = router(AppState::new(engine, config.max_blocking), config.static_dir.as_deref());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
