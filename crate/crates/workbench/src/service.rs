//! HTTP API over the simulated peers.
//!
//! Each case lives in its own [`World`] behind a mutex, so mutations on one
//! case are serialized while distinct cases progress independently. Every
//! accepted mutation is appended to the case's action log before the
//! response is sent; on start-up the logs are replayed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gmwf_core::engine::{
    configure_peers, EngineError, Event, PeerConfig, ReadyTask, RoutingDecision,
};
use gmwf_core::expansion::{ExpansionError, GuidePolicy};
use gmwf_core::format::SpecDocument;
use gmwf_core::{Address, Artifact, Gmawfp};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::sim::{parse_policy, parse_production, Action, SimError, Step, World};
use crate::store::{Store, StoreError};

pub struct AppState {
    spec: Arc<Gmawfp>,
    configs: Vec<Arc<PeerConfig>>,
    cases: RwLock<BTreeMap<String, Arc<Mutex<World>>>>,
    store: Option<Store>,
    next: AtomicU64,
}

pub type Shared = Arc<AppState>;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("replaying case {case}: {source}")]
    Replay {
        case: String,
        #[source]
        source: SimError,
    },
}

impl AppState {
    pub fn new(spec: &Gmawfp, state_dir: Option<PathBuf>) -> Result<Shared, StartError> {
        let configs: Vec<Arc<PeerConfig>> =
            configure_peers(spec)?.into_iter().map(Arc::new).collect();
        let spec = configs[0].spec.clone();
        let store = state_dir.map(Store::open).transpose()?;
        let mut cases = BTreeMap::new();
        let mut next = 1;
        if let Some(store) = &store {
            for (case, steps) in store.load()? {
                let mut world = World::from_configs(&configs);
                for step in &steps {
                    world.apply(step).map_err(|source| StartError::Replay {
                        case: case.clone(),
                        source,
                    })?;
                }
                if let Some(n) = case
                    .strip_prefix("case-")
                    .and_then(|n| n.parse::<u64>().ok())
                {
                    next = next.max(n + 1);
                }
                cases.insert(case, Arc::new(Mutex::new(world)));
            }
        }
        Ok(Arc::new(AppState {
            spec,
            configs,
            cases: RwLock::new(cases),
            store,
            next: AtomicU64::new(next),
        }))
    }

    pub fn spec(&self) -> &Gmawfp {
        &self.spec
    }

    fn world(&self, case_id: &str) -> Result<Arc<Mutex<World>>, ApiError> {
        self.cases
            .read()
            .expect("case table poisoned")
            .get(case_id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "UnknownCase",
                    format!("unknown case {case_id}"),
                )
            })
    }

    fn config(&self, actor: &str) -> Result<&Arc<PeerConfig>, ApiError> {
        self.configs
            .iter()
            .find(|c| c.actor == actor)
            .ok_or_else(|| ApiError::from(EngineError::UnknownActor(actor.to_string())))
    }

    fn log(&self, case_id: &str, step: &Step) -> Result<(), ApiError> {
        if let Some(store) = &self.store {
            store.append(case_id, step).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Storage", e.to_string())
            })?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Some(extra) = self.extra {
            body["options"] = extra;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use EngineError as E;
        let (status, code) = match &e {
            E::UnknownActor(_) => (StatusCode::NOT_FOUND, "UnknownActor"),
            E::UnknownCase(_) => (StatusCode::NOT_FOUND, "UnknownCase"),
            E::NotInitiator(_) => (StatusCode::FORBIDDEN, "NotInitiator"),
            E::NotAccredited { .. } => (StatusCode::FORBIDDEN, "NotAccredited"),
            E::LockedBud(_) => (StatusCode::BAD_REQUEST, "LockedBud"),
            E::NotABud(_) => (StatusCode::BAD_REQUEST, "NotABud"),
            E::InvalidAddress(_) => (StatusCode::BAD_REQUEST, "InvalidAddress"),
            E::UnknownProduction(_) => (StatusCode::BAD_REQUEST, "UnknownProduction"),
            E::NoReplica(_) => (StatusCode::CONFLICT, "NoReplica"),
            E::ReplicaInFlight(_) => (StatusCode::CONFLICT, "ReplicaInFlight"),
            E::CaseExists(_) => (StatusCode::CONFLICT, "CaseExists"),
            E::Expansion(ExpansionError::GuideChoiceRequired { .. }) => {
                (StatusCode::CONFLICT, "GuideChoiceRequired")
            }
            E::Expansion(ExpansionError::InvalidGuideIndex { .. }) => {
                (StatusCode::BAD_REQUEST, "InvalidGuideIndex")
            }
            E::Expansion(_) => (StatusCode::CONFLICT, "ExpansionFailed"),
            E::NonConformingArtifact | E::JoinConflict => (StatusCode::CONFLICT, "Delivery"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Engine(e) => e.into(),
            SimError::AtStep { source, .. } => (*source).into(),
            SimError::Terminated(_) => {
                ApiError::new(StatusCode::CONFLICT, "Terminated", e.to_string())
            }
            SimError::MissingField(_) | SimError::BadProduction { .. } | SimError::BadPolicy(_) => {
                ApiError::bad_request(e.to_string())
            }
        }
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

#[derive(Debug, Deserialize)]
struct ActorQuery {
    actor: Option<String>,
}

impl ActorQuery {
    fn required(&self) -> Result<&str, ApiError> {
        self.actor
            .as_deref()
            .ok_or_else(|| ApiError::bad_request("missing actor parameter"))
    }
}

#[derive(Debug, Deserialize)]
struct ActorBody {
    actor: String,
}

#[derive(Debug, Default, Deserialize)]
struct NewCaseBody {
    actor: Option<String>,
}

#[derive(Debug, Deserialize)]
struct DevelopBody {
    actor: String,
    addr: Address,
    production: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CommitBody {
    actor: String,
    guide_policy: Option<String>,
}

/// What one actor may see of a case.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseView {
    pub case_id: String,
    pub actor: String,
    pub replica: Option<Artifact>,
    pub ready_tasks: Vec<ReadyTask>,
    pub dirty: bool,
    pub terminated: bool,
    pub log: Vec<Event>,
}

fn case_view(world: &World, case_id: &str, actor: &str) -> Result<CaseView, ApiError> {
    let peer = world.peer(actor)?;
    let case = peer.case(case_id);
    Ok(CaseView {
        case_id: case_id.to_string(),
        actor: actor.to_string(),
        replica: case.and_then(|c| c.replica.clone()),
        ready_tasks: match case {
            Some(c) if c.replica.is_some() => peer.list_ready_tasks(case_id)?,
            _ => Vec::new(),
        },
        dirty: case.is_some_and(|c| c.dirty),
        terminated: world.is_terminated(case_id),
        log: case.map(|c| c.log.clone()).unwrap_or_default(),
    })
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/spec", get(get_spec))
        .route("/api/cases", get(list_cases).post(create_case))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/develop", post(develop))
        .route("/api/cases/{id}/commit", post(commit))
        .route("/api/cases/{id}/discard", post(discard))
        .route("/api/cases/{id}/route-ack", post(route_ack))
        .route("/api/cases/{id}/trace", get(trace))
        .with_state(state)
}

async fn get_spec(
    State(st): State<Shared>,
    Query(q): Query<ActorQuery>,
) -> Result<Json<Value>, ApiError> {
    let Some(actor) = q.actor.as_deref() else {
        return Ok(Json(
            serde_json::to_value(SpecDocument::from_spec(&st.spec)).expect("serializable"),
        ));
    };
    let config = st.config(actor)?;
    let local = &config.local;
    Ok(Json(json!({
        "actor": actor,
        "axioms": local.gmwf.axioms,
        "read": config.accreditation.read,
        "write": config.accreditation.write,
        "sorts": local.gmwf.sort_names().collect::<Vec<_>>(),
        "productions": local.gmwf.productions.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    })))
}

async fn list_cases(
    State(st): State<Shared>,
    Query(q): Query<ActorQuery>,
) -> Result<Json<Value>, ApiError> {
    if let Some(a) = q.actor.as_deref() {
        st.config(a)?;
    }
    let worlds: Vec<(String, Arc<Mutex<World>>)> = st
        .cases
        .read()
        .expect("case table poisoned")
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut out = Vec::new();
    for (id, w) in worlds {
        let w = w.lock().expect("case poisoned");
        let mut entry = json!({"caseId": id, "terminated": w.is_terminated(&id)});
        if let Some(a) = q.actor.as_deref() {
            let peer = w.peer(a)?;
            let holds = peer.case(&id).is_some_and(|c| c.replica.is_some());
            if !holds {
                continue;
            }
            let tasks = peer.list_ready_tasks(&id).map(|t| t.len()).unwrap_or(0);
            entry["readyTasks"] = json!(tasks);
        }
        out.push(entry);
    }
    Ok(Json(Value::Array(out)))
}

async fn create_case(State(st): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: NewCaseBody = if body.is_empty() {
        NewCaseBody::default()
    } else {
        parse_body(&body)?
    };
    let actor = req.actor.unwrap_or_else(|| st.spec.initiator.clone());
    st.config(&actor)?;
    if actor != st.spec.initiator {
        return Err(EngineError::NotInitiator(st.spec.initiator.clone()).into());
    }
    let id = format!("case-{}", st.next.fetch_add(1, Ordering::SeqCst));
    let mut world = World::from_configs(&st.configs);
    let event = world.initiate(&actor, &id)?;
    let mut step = Step::new(&actor, Action::Initiate);
    step.case = Some(id.clone());
    st.log(&id, &step)?;
    let view = case_view(&world, &id, &actor)?;
    st.cases
        .write()
        .expect("case table poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(world)));
    let body = json!({"caseId": id, "event": event, "case": view});
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_case(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ActorQuery>,
) -> Result<Json<CaseView>, ApiError> {
    let actor = q.required()?;
    let w = st.world(&id)?;
    let w = w.lock().expect("case poisoned");
    Ok(Json(case_view(&w, &id, actor)?))
}

async fn develop(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: DevelopBody = parse_body(&body)?;
    let p = parse_production(&req.production)?;
    let w = st.world(&id)?;
    let mut w = w.lock().expect("case poisoned");
    let event = w.develop(&req.actor, &id, &req.addr, &p)?;
    let mut step = Step::new(&req.actor, Action::Develop);
    step.case = Some(id.clone());
    step.addr = Some(req.addr);
    step.production = Some(p.to_string());
    st.log(&id, &step)?;
    Ok(Json(
        json!({"event": event, "case": case_view(&w, &id, &req.actor)?}),
    ))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CommitResponse {
    routing: RoutingDecision,
    guides: usize,
    chosen: usize,
    event: Event,
    case: CaseView,
}

async fn commit(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<CommitResponse>, ApiError> {
    let req: CommitBody = parse_body(&body)?;
    let policy = parse_policy(req.guide_policy.as_deref())?;
    let config = st.config(&req.actor)?.clone();
    let w = st.world(&id)?;
    let mut w = w.lock().expect("case poisoned");
    let out = match w.commit(&req.actor, &id, policy) {
        Ok(out) => out,
        Err(e) => return Err(guide_choice(e, &config)),
    };
    let mut step = Step::new(&req.actor, Action::Commit);
    step.case = Some(id.clone());
    step.guide_policy = (policy != GuidePolicy::First).then(|| policy.to_string());
    st.log(&id, &step)?;
    Ok(Json(CommitResponse {
        routing: out.routing,
        guides: out.guides,
        chosen: out.chosen,
        event: out.event,
        case: case_view(&w, &id, &req.actor)?,
    }))
}

/// Turns a pending guide choice into a 409 listing each option as the
/// committing actor would see it.
fn guide_choice(e: SimError, config: &PeerConfig) -> ApiError {
    if let Some(EngineError::Expansion(ExpansionError::GuideChoiceRequired { options })) =
        e.engine()
    {
        let summaries: Vec<Value> = options
            .iter()
            .map(|o| {
                json!({
                    "index": o.index,
                    "replica": config.local.project(&o.result).ok(),
                })
            })
            .collect();
        let mut err = ApiError::from(e);
        err.extra = Some(Value::Array(summaries));
        return err;
    }
    e.into()
}

async fn discard(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ActorBody = parse_body(&body)?;
    let w = st.world(&id)?;
    let mut w = w.lock().expect("case poisoned");
    let event = w.discard(&req.actor, &id)?;
    let mut step = Step::new(&req.actor, Action::Discard);
    step.case = Some(id.clone());
    st.log(&id, &step)?;
    Ok(Json(
        json!({"event": event, "case": case_view(&w, &id, &req.actor)?}),
    ))
}

async fn route_ack(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ActorBody = parse_body(&body)?;
    let w = st.world(&id)?;
    let mut w = w.lock().expect("case poisoned");
    let event = w.ack(&req.actor, &id)?;
    let mut step = Step::new(&req.actor, Action::Ack);
    step.case = Some(id.clone());
    st.log(&id, &step)?;
    Ok(Json(json!({"event": event})))
}

async fn trace(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ActorQuery>,
) -> Result<Json<Vec<Event>>, ApiError> {
    if let Some(a) = q.actor.as_deref() {
        st.config(a)?;
    }
    let w = st.world(&id)?;
    let w = w.lock().expect("case poisoned");
    Ok(Json(
        w.trace()
            .iter()
            .filter(|e| e.case_id == id)
            .filter(|e| q.actor.as_deref().is_none_or(|a| e.actor == a))
            .cloned()
            .collect(),
    ))
}

/// Final global artifact of a case; for operators, not for actors.
pub fn latest_artifact(st: &AppState, case_id: &str) -> Option<Artifact> {
    let w = st.world(case_id).ok()?;
    let w = w.lock().expect("case poisoned");
    w.latest(case_id).cloned()
}

pub async fn serve(state: Shared, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(state)).await
}
