use std::collections::BTreeMap;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use socproto_core::library::ArtifactKind;
use socproto_core::{
    AbstractSocialProtocol, Engine, Error, Event, Id, ImplementationRequest, ImplementedResource,
    ImplementedSocialProtocol, IndexRecord, InstantiateRequest, MetaOutcome, MetaProcess, Payload, ProcessStatus,
    ProtocolDraft, Relation, RoleAssignment, SocialEnvironment, SocialProcess, Substitute,
};

use crate::error::ApiError;
use crate::events;
use crate::extract::{Collaborator, JsonBody, COLLABORATOR_HEADER};
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;

/// Runs an engine call off the async workers; engine calls may touch disk.
async fn run<T, F>(app: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, Error> + Send + 'static,
{
    let engine = app.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::from(Error::StorageFailure(format!("worker failed: {e}"))))?
        .map_err(ApiError::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/protocols", post(create_protocol).get(list_protocols))
        .route("/protocols/{id}", get(get_protocol))
        .route("/protocols/{id}/implementations", post(implement))
        .route("/implementations", post(register_implemented))
        .route("/implementations/{id}", get(get_implemented))
        .route("/processes", post(instantiate).get(list_processes))
        .route("/processes/{id}", get(get_process))
        .route("/processes/{id}/enabled", get(enabled))
        .route("/processes/{id}/fire", post(fire))
        .route("/processes/{id}/status", post(set_status))
        .route("/processes/{id}/meta", post(start_meta))
        .route("/processes/{id}/events", get(events::events))
        .route("/meta/{id}", get(get_meta))
        .route("/meta/{id}/fire", post(fire_meta))
        .route("/meta/{id}/conclude", post(conclude_meta))
        .route("/meta/{id}/events", get(events::events))
        .route("/environment", get(environment))
        .route("/environment/resources", get(list_resources).post(add_resource))
        .route("/environment/resources/{id}", delete(remove_resource))
        .route("/environment/relations", get(list_relations).post(add_relation))
        .route("/environment/substitutes", get(substitutes))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
struct SearchQuery {
    kind: Option<String>,
    /// Comma-separated; every tag must be present.
    tags: Option<String>,
}

async fn create_protocol(
    State(app): State<AppState>,
    JsonBody(draft): JsonBody<ProtocolDraft>,
) -> ApiResult<(StatusCode, Json<AbstractSocialProtocol>)> {
    let protocol = run(&app, move |e| e.register_protocol(draft)).await?;
    Ok((StatusCode::CREATED, Json((*protocol).clone())))
}

async fn list_protocols(State(app): State<AppState>, Query(q): Query<SearchQuery>) -> ApiResult<Json<Vec<IndexRecord>>> {
    let kind = match q.kind.as_deref() {
        None | Some("") => None,
        Some(raw) => Some(ArtifactKind::parse(raw).ok_or_else(|| ApiError::malformed(format!("unknown kind {raw}")))?),
    };
    let tags: Vec<String> =
        q.tags.unwrap_or_default().split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
    let records = run(&app, move |e| e.search_protocols(kind, &tags)).await?;
    Ok(Json(records.into_iter().filter(|r| matches!(r.kind, ArtifactKind::Abstract | ArtifactKind::Implemented)).collect()))
}

async fn get_protocol(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AbstractSocialProtocol>> {
    Ok(Json((*app.engine.abstract_protocol(&id)?).clone()))
}

async fn implement(
    State(app): State<AppState>,
    Path(id): Path<String>,
    JsonBody(request): JsonBody<ImplementationRequest>,
) -> ApiResult<(StatusCode, Json<ImplementedSocialProtocol>)> {
    let implemented = run(&app, move |e| e.implement(&id, request)).await?;
    Ok((StatusCode::CREATED, Json((*implemented).clone())))
}

async fn register_implemented(
    State(app): State<AppState>,
    JsonBody(protocol): JsonBody<ImplementedSocialProtocol>,
) -> ApiResult<(StatusCode, Json<ImplementedSocialProtocol>)> {
    let implemented = run(&app, move |e| e.register_implemented(protocol)).await?;
    Ok((StatusCode::CREATED, Json((*implemented).clone())))
}

async fn get_implemented(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ImplementedSocialProtocol>> {
    Ok(Json((*app.engine.implemented_protocol(&id)?).clone()))
}

async fn instantiate(
    State(app): State<AppState>,
    JsonBody(request): JsonBody<InstantiateRequest>,
) -> ApiResult<(StatusCode, Json<SocialProcess>)> {
    let process = run(&app, move |e| e.instantiate(request)).await?;
    Ok((StatusCode::CREATED, Json((*process).clone())))
}

async fn list_processes(State(app): State<AppState>) -> ApiResult<Json<Vec<socproto_core::process::ProcessSnapshot>>> {
    let snapshots = app
        .engine
        .process_ids()
        .into_iter()
        .filter_map(|id| app.engine.process(id.as_str()).ok())
        .map(|p| p.snapshot())
        .collect();
    Ok(Json(snapshots))
}

async fn get_process(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SocialProcess>> {
    Ok(Json((*app.engine.process(&id)?).clone()))
}

#[derive(Debug, Deserialize)]
struct EnabledQuery {
    collaborator: Option<String>,
}

async fn enabled(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EnabledQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<Vec<Id>>> {
    let collaborator = q
        .collaborator
        .or_else(|| headers.get(COLLABORATOR_HEADER).and_then(|v| v.to_str().ok()).map(String::from))
        .ok_or_else(|| ApiError::malformed("collaborator query parameter or X-Collaborator header required"))?;
    Ok(Json(app.engine.enabled(&id, &collaborator)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FireRequest {
    pub activity: String,
    #[serde(default)]
    pub payload: Option<Payload>,
}

async fn fire(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Collaborator(who): Collaborator,
    JsonBody(request): JsonBody<FireRequest>,
) -> ApiResult<Json<Event>> {
    let event = run(&app, move |e| e.fire(&id, &who, &request.activity, request.payload)).await?;
    Ok(Json(event))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatusRequest {
    pub status: ProcessStatus,
}

async fn set_status(
    State(app): State<AppState>,
    Path(id): Path<String>,
    JsonBody(request): JsonBody<StatusRequest>,
) -> ApiResult<Json<SocialProcess>> {
    let process = run(&app, move |e| e.set_status(&id, request.status)).await?;
    Ok(Json((*process).clone()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StartMetaRequest {
    #[serde(default)]
    pub id: Option<Id>,
    pub participants: RoleAssignment,
}

async fn start_meta(
    State(app): State<AppState>,
    Path(id): Path<String>,
    JsonBody(request): JsonBody<StartMetaRequest>,
) -> ApiResult<(StatusCode, Json<MetaProcess>)> {
    let meta = run(&app, move |e| e.start_meta(&id, request.participants, request.id)).await?;
    Ok((StatusCode::CREATED, Json((*meta).clone())))
}

async fn get_meta(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MetaProcess>> {
    Ok(Json((*app.engine.meta(&id)?).clone()))
}

async fn fire_meta(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Collaborator(who): Collaborator,
    JsonBody(request): JsonBody<FireRequest>,
) -> ApiResult<Json<Event>> {
    let event = run(&app, move |e| e.fire_meta(&id, &who, &request.activity, request.payload)).await?;
    Ok(Json(event))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Conclusion {
    pub outcome: MetaOutcome,
    pub target: SocialProcess,
}

async fn conclude_meta(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Conclusion>> {
    let (outcome, target) = run(&app, move |e| e.conclude_meta(&id)).await?;
    Ok(Json(Conclusion { outcome, target: (*target).clone() }))
}

async fn environment(State(app): State<AppState>) -> Json<SocialEnvironment> {
    Json((*app.engine.environment()).clone())
}

async fn list_resources(State(app): State<AppState>) -> Json<Vec<ImplementedResource>> {
    Json(app.engine.environment().resources().cloned().collect())
}

async fn add_resource(
    State(app): State<AppState>,
    JsonBody(resource): JsonBody<ImplementedResource>,
) -> ApiResult<(StatusCode, Json<ImplementedResource>)> {
    let created = resource.clone();
    run(&app, move |e| e.add_resource(resource)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn remove_resource(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ImplementedResource>> {
    Ok(Json(run(&app, move |e| e.remove_resource(&id)).await?))
}

async fn list_relations(State(app): State<AppState>) -> Json<Vec<Relation>> {
    Json(app.engine.environment().relations().cloned().collect())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RelationAdded {
    pub added: bool,
}

async fn add_relation(
    State(app): State<AppState>,
    JsonBody(relation): JsonBody<Relation>,
) -> ApiResult<Json<RelationAdded>> {
    let added = run(&app, move |e| e.add_relation(&relation.source, &relation.target, &relation.label)).await?;
    Ok(Json(RelationAdded { added }))
}

async fn substitutes(
    State(app): State<AppState>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Json<Vec<Substitute>>> {
    let field = |name: &str| q.get(name).cloned().ok_or_else(|| ApiError::malformed(format!("missing query parameter {name}")));
    let role = field("role")?;
    let unavailable = field("unavailable")?;
    let process = field("process")?;
    let depth = match q.get("max_depth") {
        Some(raw) => raw.parse().map_err(|_| ApiError::malformed("max_depth must be a non-negative integer"))?,
        None => 3,
    };
    Ok(Json(app.engine.substitutes(&role, &unavailable, &process, depth)?))
}
