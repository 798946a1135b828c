//! JSON-over-HTTP service for predictions and patent data.
//!
//! Routes live under `/v1`. Every error body is `{status, code, message}`.
//! The store is an immutable snapshot; the model can be swapped atomically
//! through the admin route.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::document::{Claim, DocKind, PatentDocument, PersonName};
use crate::error::Error;
use crate::features::assemble_features;
use crate::model::{Band, Metrics, PredictionResult, TrainedModelBundle, predict_grant_lag};
use crate::store::{EntityKey, EntityKind, GroupBy, PageRequest, PatentFilter, PatentStore, SummaryStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidPayload,
    EntityNotFound,
    NoModelLoaded,
    SchemaMismatch,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, ErrorCode::InvalidPayload, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, ErrorCode::EntityNotFound, message)
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, ErrorCode::NoModelLoaded, "no model loaded")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::EntityNotFound(_) => ApiError::not_found(message),
            Error::SchemaMismatch { .. } => ApiError::new(StatusCode::CONFLICT, ErrorCode::SchemaMismatch, message),
            Error::Document(_)
            | Error::MissingField(_)
            | Error::UnnameableEntity(_)
            | Error::InvalidRange(_)
            | Error::InvalidArgument(_)
            | Error::InvalidBundle(_)
            | Error::Io { .. }
            | Error::Json(_) => ApiError::invalid(message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::Internal, message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// A person given either as `{first_name, last_name}` or as one string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InlinePerson {
    Structured(PersonName),
    Plain(String),
}

impl InlinePerson {
    fn into_name(self) -> PersonName {
        match self {
            InlinePerson::Structured(p) => p,
            InlinePerson::Plain(s) => match s.trim().rsplit_once(' ') {
                Some((first, last)) => PersonName::new(first.trim(), last.trim()),
                None => PersonName::new("", s.trim()),
            },
        }
    }
}

/// A draft or filed application supplied in the request body.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineDocument {
    pub title: String,
    pub abstract_text: String,
    #[serde(default)]
    pub claims: Vec<String>,
    #[serde(default)]
    pub description_text: String,
    pub filing_date: NaiveDate,
    #[serde(default)]
    pub cpc_codes: Vec<String>,
    #[serde(default)]
    pub inventors: Vec<InlinePerson>,
    #[serde(default)]
    pub assignees: Vec<String>,
}

impl InlineDocument {
    /// The equivalent application record, validated like any ingested one.
    pub fn into_document(self) -> crate::error::Result<PatentDocument> {
        let doc = PatentDocument {
            doc_number: "INLINE".into(),
            doc_kind: DocKind::Application,
            kind_code: "A1".into(),
            title: self.title,
            abstract_text: self.abstract_text,
            claims: self.claims.into_iter().enumerate().map(|(i, text)| Claim::new(i as u32 + 1, text)).collect(),
            description_text: self.description_text,
            filing_date: self.filing_date,
            publication_date: self.filing_date,
            grant_date: None,
            inventors: self.inventors.into_iter().map(InlinePerson::into_name).collect(),
            assignees: self.assignees,
            cpc_codes: self.cpc_codes.iter().map(|c| c.trim().to_uppercase()).collect(),
            backward_citation_count: 0,
        };
        doc.validate().map_err(|v| Error::InvalidArgument(v.to_string()))?;
        Ok(doc)
    }
}

/// Exactly one of `doc_number` and `document`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub doc_number: Option<String>,
    /// Inline document, validated as `InlineDocument` once the request
    /// is known to name exactly one source.
    #[serde(default)]
    pub document: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model_id: String,
    pub point_days: f64,
    pub interval_low_days: f64,
    pub interval_high_days: f64,
    pub confidence: f64,
    pub band: Band,
}

/// Confidence as reported over the wire: four decimals, never shown as 0.
pub fn round_confidence(c: f64) -> f64 {
    ((c * 1e4).round() / 1e4).max(1e-4)
}

impl PredictResponse {
    pub fn new(model_id: &str, p: &PredictionResult) -> Self {
        PredictResponse {
            model_id: model_id.to_string(),
            point_days: p.point_days,
            interval_low_days: p.interval_low_days,
            interval_high_days: p.interval_high_days,
            confidence: round_confidence(p.confidence),
            band: p.band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub schema_id: String,
    pub learner: String,
    pub metrics: Metrics,
    pub trained_at: DateTime<Utc>,
}

impl ModelInfo {
    fn of(b: &TrainedModelBundle) -> Self {
        ModelInfo {
            model_id: b.model_id.clone(),
            schema_id: b.schema_id.clone(),
            learner: b.learner.clone(),
            metrics: b.metrics,
            trained_at: b.trained_at,
        }
    }
}

/// One patent row of an entity page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRow {
    pub doc_number: String,
    pub doc_kind: DocKind,
    pub title: String,
    pub filing_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_days: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_low_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_high_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPage {
    #[serde(flatten)]
    pub summary: SummaryStats,
    pub patents: Vec<PatentRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SummaryStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRecords {
    pub doc_number: String,
    pub records: Vec<PatentDocument>,
}

pub struct AppState {
    store: Arc<PatentStore>,
    model: RwLock<Option<Arc<TrainedModelBundle>>>,
}

impl AppState {
    pub fn new(store: PatentStore, model: Option<TrainedModelBundle>) -> Arc<Self> {
        Arc::new(AppState { store: Arc::new(store), model: RwLock::new(model.map(Arc::new)) })
    }

    pub fn store(&self) -> &PatentStore {
        &self.store
    }

    pub fn model(&self) -> Option<Arc<TrainedModelBundle>> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn swap_model(&self, bundle: TrainedModelBundle) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(bundle));
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/patents", get(list_patents))
        .route("/v1/patents/{doc_number}", get(get_patent))
        .route("/v1/inventors/{id}/summary", get(inventor_summary))
        .route("/v1/orgs/summary", get(org_batch))
        .route("/v1/orgs/{id}/summary", get(org_summary))
        .route("/v1/stats/grant-lag", get(grant_lag_stats))
        .route("/v1/models/current", get(model_info))
        .route("/v1/admin/models/load", post(load_model))
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, ErrorCode::InvalidPayload, "method not allowed")
        })
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("invalid JSON body: {e}")))
}

/// Document whose features answer a prediction for `doc_number`:
/// the application record when present, else the grant.
fn stored_document<'a>(store: &'a PatentStore, doc_number: &str) -> Option<&'a PatentDocument> {
    let normalized = crate::document::normalize_doc_number(doc_number);
    let records = store.get_by_number(&normalized);
    records.iter().find(|d| d.doc_kind == DocKind::Application).or_else(|| records.first()).copied()
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<PredictResponse> {
    let req: PredictRequest = parse_body(&body)?;
    let bundle = state.model().ok_or_else(ApiError::no_model)?;
    let owned;
    let doc = match (req.doc_number, req.document) {
        (Some(n), None) => {
            stored_document(&state.store, &n).ok_or_else(|| ApiError::not_found(format!("unknown doc_number {n:?}")))?
        }
        (None, Some(inline)) => {
            let inline: InlineDocument =
                serde_json::from_value(inline).map_err(|e| ApiError::invalid(format!("invalid document: {e}")))?;
            owned = inline.into_document()?;
            &owned
        }
        _ => return Err(ApiError::invalid("provide exactly one of doc_number and document")),
    };
    let features = assemble_features(doc, &bundle.schema);
    let result = predict_grant_lag(&bundle, &features)?;
    Ok(Json(PredictResponse::new(&bundle.model_id, &result)))
}

fn query_usize(q: &HashMap<String, String>, key: &str) -> Result<Option<usize>, ApiError> {
    q.get(key)
        .map(|v| v.parse().map_err(|_| ApiError::invalid(format!("{key} must be a non-negative integer"))))
        .transpose()
}

fn query_i32(q: &HashMap<String, String>, key: &str) -> Result<Option<i32>, ApiError> {
    q.get(key).map(|v| v.parse().map_err(|_| ApiError::invalid(format!("{key} must be an integer")))).transpose()
}

/// `inventor/<id>` or `org/<id>`.
pub fn parse_entity(raw: &str) -> Option<EntityKey> {
    let (kind, id) = raw.split_once('/')?;
    let kind = EntityKind::parse_segment(kind)?;
    (!id.is_empty()).then(|| EntityKey { kind, canonical_id: id.to_string() })
}

async fn list_patents(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<crate::store::PatentPage> {
    const KNOWN: &[&str] = &["doc_kind", "entity", "cpc_section", "year_from", "year_to", "offset", "limit"];
    if let Some(k) = q.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(ApiError::invalid(format!("unknown query parameter {k:?}")));
    }
    let doc_kind = match q.get("doc_kind").map(|s| s.to_ascii_lowercase()) {
        None => None,
        Some(k) if k == "grant" => Some(DocKind::Grant),
        Some(k) if k == "application" => Some(DocKind::Application),
        Some(k) => return Err(ApiError::invalid(format!("unknown doc_kind {k:?}"))),
    };
    let entity = q
        .get("entity")
        .map(|e| parse_entity(e).ok_or_else(|| ApiError::invalid("entity must be inventor/<id> or org/<id>")))
        .transpose()?;
    let cpc_section = match q.get("cpc_section") {
        None => None,
        Some(s) => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
                _ => return Err(ApiError::invalid("cpc_section must be one letter")),
            }
        }
    };
    let year_range = match (query_i32(&q, "year_from")?, query_i32(&q, "year_to")?) {
        (None, None) => None,
        (from, to) => Some((from.unwrap_or(i32::MIN), to.unwrap_or(i32::MAX))),
    };
    let defaults = PageRequest::default();
    let page = PageRequest {
        offset: query_usize(&q, "offset")?.unwrap_or(defaults.offset),
        limit: query_usize(&q, "limit")?.unwrap_or(defaults.limit),
    };
    let filter = PatentFilter { doc_kind, entity, cpc_section, year_range };
    Ok(Json(state.store.query_patents(&filter, page)?))
}

async fn get_patent(State(state): State<Arc<AppState>>, Path(doc_number): Path<String>) -> ApiResult<PatentRecords> {
    let normalized = crate::document::normalize_doc_number(&doc_number);
    let records: Vec<PatentDocument> = state.store.get_by_number(&normalized).into_iter().cloned().collect();
    if records.is_empty() {
        return Err(ApiError::not_found(format!("unknown doc_number {doc_number:?}")));
    }
    Ok(Json(PatentRecords { doc_number: normalized, records }))
}

/// Summary plus patent rows, with retrospective predictions on granted
/// rows when a model is loaded.
pub fn entity_page(
    store: &PatentStore,
    model: Option<&TrainedModelBundle>,
    key: &EntityKey,
) -> crate::error::Result<EntityPage> {
    let summary = store.entity_summary(key)?;
    let mut patents = Vec::new();
    for d in store.entity_documents(key)? {
        let mut row = PatentRow {
            doc_number: d.doc_number.clone(),
            doc_kind: d.doc_kind,
            title: d.title.clone(),
            filing_date: d.filing_date,
            grant_date: d.grant_date,
            actual_days: d.grant_lag_days(),
            predicted_days: None,
            interval_low_days: None,
            interval_high_days: None,
            confidence: None,
            band: None,
        };
        if let (Some(bundle), DocKind::Grant) = (model, d.doc_kind) {
            let p = predict_grant_lag(bundle, &assemble_features(d, &bundle.schema))?;
            row.predicted_days = Some(p.point_days);
            row.interval_low_days = Some(p.interval_low_days);
            row.interval_high_days = Some(p.interval_high_days);
            row.confidence = Some(round_confidence(p.confidence));
            row.band = Some(p.band);
        }
        patents.push(row);
    }
    Ok(EntityPage { summary, patents })
}

async fn inventor_summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<EntityPage> {
    let model = state.model();
    Ok(Json(entity_page(&state.store, model.as_deref(), &EntityKey::inventor(id))?))
}

async fn org_summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SummaryStats> {
    Ok(Json(state.store.entity_summary(&EntityKey::organisation(id))?))
}

async fn org_batch(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Vec<BatchEntry>> {
    let ids: Vec<String> = q
        .get("ids")
        .map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    if ids.is_empty() {
        return Err(ApiError::invalid("ids must list at least one organisation id"));
    }
    let entries = ids
        .iter()
        .zip(state.store.organisation_summaries(&ids))
        .map(|(id, r)| match r {
            Ok(s) => BatchEntry { id: id.clone(), summary: Some(s), error: None },
            Err(e) => BatchEntry { id: id.clone(), summary: None, error: Some(e.into()) },
        })
        .collect();
    Ok(Json(entries))
}

async fn grant_lag_stats(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Vec<crate::store::GrantLagStats>> {
    let raw =
        q.get("group_by").ok_or_else(|| ApiError::invalid("group_by is required (filing_year or cpc_section)"))?;
    let group_by = GroupBy::parse(raw)?;
    Ok(Json(state.store.grant_lag_aggregates(group_by)))
}

async fn model_info(State(state): State<Arc<AppState>>) -> ApiResult<ModelInfo> {
    let bundle = state.model().ok_or_else(ApiError::no_model)?;
    Ok(Json(ModelInfo::of(&bundle)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadRequest {
    path: PathBuf,
}

async fn load_model(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<ModelInfo> {
    let req: LoadRequest = parse_body(&body)?;
    let bundle = tokio::task::spawn_blocking(move || TrainedModelBundle::load(&req.path))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::Internal, e.to_string()))??;
    let info = ModelInfo::of(&bundle);
    state.swap_model(bundle);
    Ok(Json(info))
}
