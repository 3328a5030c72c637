//! JSON over HTTP.
//!
//! | method | path                          | body / query                                   |
//! |--------|-------------------------------|------------------------------------------------|
//! | POST   | `/corpora`                    | `{id?, documents: [...], conllu?}`             |
//! | GET    | `/corpora`                    |                                                |
//! | POST   | `/queries`                    | `{text, id?}`                                  |
//! | GET    | `/queries/{id}/matches`       | `k, n, filter, rerank, corpus, model, embeddings` |
//! | GET    | `/queries/{id}/measurement`   | same as matches                                |
//! | POST   | `/ratings`                    | `{rater, query, doc, position, score}`         |
//! | GET    | `/ratings`                    |                                                |
//! | GET    | `/ratings/alpha`              | `query?`                                       |
//! | GET    | `/models`                     |                                                |
//! | POST   | `/jobs/train`                 | `{kind, name, pairs, parses, ...}`             |
//! | GET    | `/jobs/{id}`                  |                                                |
//!
//! Errors come back as `{"error": "..."}` with status 400 (malformed
//! request), 404 (unknown id), 409 (duplicate id) or 422 (the request is
//! well formed but cannot be served with the data at hand).

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use propmatch_core::corpus::{parse_conllu, DocumentRecord};
use propmatch_core::pipeline::RatingRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ServiceError;
use crate::ops::{App, MatchParams, TrainOutcome, TrainRequest};

/// JSON body extractor whose rejections use our error body.
struct Json<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Json<T> {
    type Rejection = ServiceError;
    async fn from_request(req: Request, state: &S) -> Result<Self> {
        let axum::Json(v) = axum::Json::<T>::from_request(req, state).await?;
        Ok(Json(v))
    }
}

struct Query<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Query<T> {
    type Rejection = ServiceError;
    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self> {
        let axum::extract::Query(v) = axum::extract::Query::<T>::from_request_parts(parts, state).await?;
        Ok(Query(v))
    }
}

impl<T: Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError::BadRequest(r.body_text())
    }
}

impl From<QueryRejection> for ServiceError {
    fn from(r: QueryRejection) -> Self {
        ServiceError::BadRequest(r.body_text())
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use propmatch_core::Error as E;
        match self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } | ServiceError::Core(E::DuplicateId(_)) => StatusCode::CONFLICT,
            ServiceError::Unparsed(_)
            | ServiceError::Core(
                E::MissingResource(_)
                | E::DimensionMismatch { .. }
                | E::EmptyCorpus
                | E::InsufficientData(_)
                | E::DegenerateLabels,
            ) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Parser(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Io(_) | ServiceError::Core(E::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), axum::Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "state")]
pub enum JobState {
    Running,
    Done { outcome: TrainOutcome },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub model: String,
    #[serde(flatten)]
    pub state: JobState,
}

#[derive(Clone)]
pub struct AppState {
    app: Arc<App>,
    strict: bool,
    jobs: Arc<Mutex<BTreeMap<String, Job>>>,
}

impl AppState {
    pub fn new(app: Arc<App>) -> Self {
        let strict = app.config.server.strict;
        AppState {
            app,
            strict,
            jobs: Arc::default(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/corpora", post(post_corpus).get(list_corpora))
        .route("/queries", post(post_query).get(list_queries))
        .route("/queries/{id}/matches", get(get_matches))
        .route("/queries/{id}/measurement", get(get_measurement))
        .route("/ratings", post(post_rating).get(list_ratings))
        .route("/ratings/alpha", get(get_alpha))
        .route("/models", get(list_models))
        .route("/jobs/train", post(post_train))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

/// CPU-bound or blocking work goes to the blocking pool.
async fn blocking<T, F>(f: F) -> Result<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewCorpus {
    id: Option<String>,
    documents: Vec<DocumentRecord>,
    /// CoNLL-U parses keyed `docid:position`.
    conllu: Option<String>,
}

async fn post_corpus(State(s): State<AppState>, Json(body): Json<NewCorpus>) -> Result<impl IntoResponse> {
    let entry = blocking(move || {
        let parses = body.conllu.map(|c| parse_conllu(c.as_bytes())).transpose()?;
        s.app.ingest(body.id.as_deref(), body.documents, parses)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(entry)))
}

async fn list_corpora(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.app.store.corpora())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewQuery {
    text: String,
    id: Option<String>,
}

async fn post_query(State(s): State<AppState>, Json(body): Json<NewQuery>) -> Result<impl IntoResponse> {
    let q = blocking(move || s.app.register_query(body.id, body.text)).await?;
    Ok((StatusCode::CREATED, Json(q)))
}

async fn list_queries(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.app.store.queries())
}

async fn get_matches(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<MatchParams>,
) -> Result<impl IntoResponse> {
    let query = s.app.store.query(&id)?;
    Ok(Json(
        blocking(move || s.app.run_match(&query, &params, s.strict)).await?,
    ))
}

async fn get_measurement(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<MatchParams>,
) -> Result<impl IntoResponse> {
    let query = s.app.store.query(&id)?;
    Ok(Json(
        blocking(move || s.app.run_measure(&query, &params, s.strict)).await?,
    ))
}

async fn post_rating(State(s): State<AppState>, Json(rating): Json<RatingRecord>) -> Result<impl IntoResponse> {
    s.app.store.query(&rating.query)?;
    let mut stored = blocking(move || s.app.store.append_ratings(std::slice::from_ref(&rating))).await?;
    Ok((StatusCode::CREATED, Json(stored.pop().expect("one rating"))))
}

async fn list_ratings(State(s): State<AppState>) -> Result<impl IntoResponse> {
    Ok(Json(blocking(move || s.app.store.ratings()).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaParams {
    query: Option<String>,
}

async fn get_alpha(State(s): State<AppState>, Query(p): Query<AlphaParams>) -> Result<impl IntoResponse> {
    let alpha = blocking(move || s.app.alpha(p.query.as_deref())).await?;
    Ok(Json(json!({ "alpha": alpha })))
}

async fn list_models(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.app.store.models())
}

async fn post_train(State(s): State<AppState>, Json(req): Json<TrainRequest>) -> Result<impl IntoResponse> {
    crate::store::check_id("model", &req.name)?;
    let job = {
        let mut jobs = s.jobs.lock().unwrap_or_else(|e| e.into_inner());
        let job = Job {
            id: format!("j{}", jobs.len() + 1),
            model: req.name.clone(),
            state: JobState::Running,
        };
        jobs.insert(job.id.clone(), job.clone());
        job
    };
    let id = job.id.clone();
    let (app, jobs) = (s.app.clone(), s.jobs.clone());
    tokio::task::spawn_blocking(move || {
        let state = match app.train(&req) {
            Ok(outcome) => JobState::Done { outcome },
            Err(e) => JobState::Failed { error: e.to_string() },
        };
        if let Some(j) = jobs.lock().unwrap_or_else(|e| e.into_inner()).get_mut(&id) {
            j.state = state;
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(s): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    let jobs = s.jobs.lock().unwrap_or_else(|e| e.into_inner());
    let job = jobs
        .get(&id)
        .cloned()
        .ok_or_else(|| ServiceError::not_found("job", id))?;
    Ok(Json(job))
}

/// Serves until interrupted.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await
}
