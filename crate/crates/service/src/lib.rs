//! HTTP session service for live play.
//!
//! Each session owns one [`Engine`]. Requests to the same session are
//! serialized by a per-session lock; different sessions never share mutable
//! state. Trained policies are shared read-only and cached per configuration.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};

use tomdss_core::engine::{ActionReport, ConditionKind, Engine, EngineConfig, EpisodeLog};
use tomdss_core::exec::mix_seed;
use tomdss_core::harness::{write_log, ExperimentConfig};
use tomdss_core::policy::{train_policy, Policy};
use tomdss_core::task::{ActionKind, DistanceBin, Feature, Payoff};
use tomdss_core::Error;

/// Profile label written into session logs.
pub const SESSION_PROFILE: &str = "human";

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub engine: EngineConfig,
    /// Base seed; session `n` plays with `mix_seed(seed, n)` unless overridden.
    pub seed: u64,
    /// Completed session logs are written here as JSONL when set.
    pub log_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn from_experiment(cfg: &ExperimentConfig, log_dir: Option<PathBuf>) -> ServiceConfig {
        ServiceConfig { engine: cfg.engine.clone(), seed: cfg.seed, log_dir }
    }
}

struct Session {
    engine: Engine,
    participant: u32,
}

pub struct AppState {
    config: ServiceConfig,
    default_policy: Arc<Policy>,
    policies: Mutex<HashMap<String, Arc<Policy>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
    salt: u64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> tomdss_core::Result<AppState> {
        config.engine.validate()?;
        let default_policy = Arc::new(train_policy(&config.engine.spec, &config.engine.solver)?);
        Ok(AppState::with_policy(config, default_policy))
    }

    pub fn with_policy(config: ServiceConfig, policy: Arc<Policy>) -> AppState {
        let salt = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
        AppState {
            config,
            default_policy: policy,
            policies: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
            salt,
        }
    }

    async fn policy_for(&self, engine: &EngineConfig) -> Result<Arc<Policy>, ApiError> {
        if engine.spec == self.config.engine.spec && engine.solver == self.config.engine.solver {
            return Ok(self.default_policy.clone());
        }
        let key = format!("{}:{}", engine.spec.hash(), serde_json::to_string(&engine.solver).map_err(ApiError::internal)?);
        let mut cache = self.policies.lock().await;
        if let Some(p) = cache.get(&key) {
            return Ok(p.clone());
        }
        let (spec, solver) = (engine.spec.clone(), engine.solver);
        let policy = tokio::task::spawn_blocking(move || train_policy(&spec, &solver))
            .await
            .map_err(ApiError::internal)?
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let policy = Arc::new(policy);
        cache.insert(key, policy.clone());
        Ok(policy)
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/action", post(post_action))
        .route("/sessions/{id}/log", get(get_log))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError { status, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> ApiError {
        let status = match e {
            Error::Finished => StatusCode::CONFLICT,
            Error::Config(_) | Error::Usage(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub agent: [i32; 2],
    pub teammate: [i32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionView {
    pub recommended: ActionKind,
    pub feature: Feature,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipView {
    pub feature: Feature,
    pub text: String,
}

/// What a player sees. Time costs are deliberately absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub session_id: String,
    pub condition: ConditionKind,
    pub round: u64,
    pub trial: u32,
    pub trials: u32,
    pub training: bool,
    pub finished: bool,
    pub bomb_type: u8,
    pub distance_bin: DistanceBin,
    pub positions: Positions,
    /// Points for each action on the current bomb.
    pub payoff: Payoff,
    pub time_remaining: f64,
    pub score: f64,
    pub total_score: f64,
    pub bombs_remaining: u32,
    pub bombs_handled: u32,
    pub intervention: Option<InterventionView>,
    pub tip: Option<TipView>,
}

impl View {
    fn of(id: &str, engine: &Engine) -> View {
        let s = engine.state();
        let banked: f64 = engine.trial_scores().iter().sum();
        View {
            session_id: id.to_string(),
            condition: engine.condition(),
            round: engine.round(),
            trial: engine.trial(),
            trials: engine.config().trials,
            training: engine.is_training(),
            finished: engine.is_finished(),
            bomb_type: s.bomb_type,
            distance_bin: s.distance_bin,
            positions: Positions { agent: s.agent_pos, teammate: s.team_pos },
            payoff: engine.config().spec.reward[(s.bomb_type - 1) as usize],
            time_remaining: s.time_remaining,
            score: engine.trial_score(),
            total_score: banked + engine.trial_score(),
            bombs_remaining: s.bombs_remaining,
            bombs_handled: engine.bombs_handled(),
            intervention: engine.intervention().map(|iv| InterventionView {
                recommended: iv.recommended,
                feature: iv.feature,
                text: iv.text.clone(),
            }),
            tip: engine.tip().map(|t| TipView { feature: t.feature, text: t.text.clone() }),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub condition: String,
    /// Partial engine configuration merged over the service defaults. A
    /// top-level `seed` fixes the session seed.
    #[serde(default)]
    pub config_overrides: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub view: View,
}

#[derive(Debug, Deserialize)]
pub struct ActionRequest {
    pub action: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActionResponse {
    pub reward: f64,
    pub time_cost: f64,
    pub done: bool,
    pub next_view: View,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, msg)
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<Json<CreateResponse>, ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    let condition: ConditionKind = req.condition.parse().map_err(|e: Error| bad_request(e.to_string()))?;
    let n = app.counter.fetch_add(1, Ordering::Relaxed);
    let mut seed = mix_seed(app.config.seed, n);
    let mut engine_cfg = app.config.engine.clone();
    if let Some(mut overrides) = req.config_overrides {
        let Value::Object(map) = &mut overrides else {
            return Err(bad_request("config_overrides must be an object"));
        };
        if let Some(s) = map.remove("seed") {
            seed = s.as_u64().ok_or_else(|| bad_request("seed must be a nonnegative integer"))?;
        }
        let mut merged = serde_json::to_value(&engine_cfg).map_err(ApiError::internal)?;
        merge(&mut merged, overrides);
        engine_cfg = serde_json::from_value(merged).map_err(|e| bad_request(format!("config_overrides: {e}")))?;
        engine_cfg.validate()?;
    }
    let policy = app.policy_for(&engine_cfg).await?;
    let engine = Engine::new(Arc::new(engine_cfg), policy, condition, seed)?;
    let id = format!("{:016x}", mix_seed(app.salt, n));
    let view = View::of(&id, &engine);
    let session = Session { engine, participant: n as u32 };
    app.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok(Json(CreateResponse { session_id: id, view }))
}

async fn get_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<View>, ApiError> {
    let session = app.session(&id).await?;
    let s = session.lock().await;
    Ok(Json(View::of(&id, &s.engine)))
}

async fn post_action(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<ActionResponse>, ApiError> {
    let session = app.session(&id).await?;
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    let action: ActionKind =
        req.action.parse().map_err(|e: Error| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let mut s = session.lock().await;
    let report: ActionReport = s.engine.apply(action)?;
    if report.finished {
        if let Some(dir) = &app.config.log_dir {
            persist(dir, &id, &s.episode_log()).map_err(ApiError::internal)?;
        }
    }
    Ok(Json(ActionResponse {
        reward: report.reward,
        time_cost: report.time_cost,
        done: report.done,
        next_view: View::of(&id, &s.engine),
    }))
}

impl Session {
    fn episode_log(&self) -> EpisodeLog {
        self.engine.episode_log(self.participant, SESSION_PROFILE)
    }
}

fn persist(dir: &std::path::Path, id: &str, log: &EpisodeLog) -> tomdss_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_log(&dir.join(format!("{id}.jsonl")), log)
}

async fn get_log(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<EpisodeLog>, ApiError> {
    let session = app.session(&id).await?;
    let s = session.lock().await;
    Ok(Json(s.episode_log()))
}

/// Serves on an already bound listener until the process is stopped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
