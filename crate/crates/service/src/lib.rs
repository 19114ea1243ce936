//! Stateless HTTP API over the closed-form calculators and small
//! simulation runs.
//!
//! | method | path               | body                  |
//! |--------|--------------------|-----------------------|
//! | GET    | `/api/health`      |                       |
//! | POST   | `/api/power`       | [`api::PowerRequest`]      |
//! | POST   | `/api/sample-size` | [`api::SampleSizeRequest`] |
//! | POST   | `/api/curve`       | [`api::CurveRequest`]      |
//! | POST   | `/api/simulate`    | [`SimulateRequest`]   |
//!
//! Validation failures answer 400 with `{"error": ..., "fields": [{"field", "message"}]}`.

pub mod api;
pub mod json;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use jmpower_core::experiments::{run_cell, Cell, CellOverride, Estimator};
use jmpower_core::sim::SimConfig;
use jmpower_core::Error as CoreError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;

use api::FieldError;
use json::DecimalJson;

pub const DEFAULT_MAX_SIM_REPS: usize = 200;
pub const MAX_SIM_SUBJECTS: usize = 5000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_sim_reps: usize,
    /// Simulation requests allowed to run at once.
    pub sim_workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_sim_reps: DEFAULT_MAX_SIM_REPS,
            sim_workers: 1,
        }
    }
}

#[derive(Clone)]
struct AppState {
    config: Arc<ServiceConfig>,
    sim_permits: Arc<Semaphore>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    fields: Vec<FieldError>,
}

enum ApiError {
    Invalid(Vec<FieldError>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Invalid(fields) => DecimalJson(
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "validation failed".into(),
                    fields,
                },
            )
            .into_response(),
            ApiError::Internal(message) => DecimalJson(
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    error: message,
                    fields: vec![],
                },
            )
            .into_response(),
        }
    }
}

impl From<Vec<FieldError>> for ApiError {
    fn from(fields: Vec<FieldError>) -> Self {
        ApiError::Invalid(fields)
    }
}

/// Parses a JSON body, turning serde's message into a field-level error.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let message = e.to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.contains("field"))
            .unwrap_or("body")
            .to_string();
        ApiError::Invalid(vec![FieldError::new(field, message)])
    })
}

type ApiResult<T> = Result<DecimalJson<T>, ApiError>;

fn ok<T>(value: T) -> ApiResult<T> {
    Ok(DecimalJson(StatusCode::OK, value))
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

async fn health() -> DecimalJson<Health> {
    DecimalJson(
        StatusCode::OK,
        Health {
            status: "ok",
            version: env!("CARGO_PKG_VERSION"),
        },
    )
}

async fn power(body: Bytes) -> ApiResult<api::PowerResponse> {
    ok(api::power(&parse(&body)?)?)
}

async fn sample_size(body: Bytes) -> ApiResult<api::SampleSizeResponse> {
    ok(api::sample_size(&parse(&body)?)?)
}

async fn curve(body: Bytes) -> ApiResult<api::CurveResponse> {
    ok(api::curve(&parse(&body)?)?)
}

fn default_alpha_levels() -> Vec<f64> {
    vec![0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub sim: SimConfig,
    pub replicates: usize,
    #[serde(default = "default_alpha_levels")]
    pub alpha_levels: Vec<f64>,
    /// Replaces `sim.seed` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedPower {
    pub alpha_level: f64,
    pub empirical: f64,
    pub calculated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateResponse {
    pub d_bar: f64,
    /// Two-stage rejection rate at the first significance level.
    pub empirical_power: f64,
    pub power: Vec<SimulatedPower>,
    pub theta: f64,
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
    pub inputs: SimulateRequest,
}

fn check_simulate(req: &SimulateRequest, cap: usize) -> Result<SimConfig, Vec<FieldError>> {
    let mut check = api::Checker::default();
    if req.replicates == 0 || req.replicates > cap {
        check.fail("replicates", format!("must lie in [1, {cap}], got {}", req.replicates));
    }
    if req.sim.n_subjects > MAX_SIM_SUBJECTS {
        check.fail("sim.n_subjects", format!("must be at most {MAX_SIM_SUBJECTS}, got {}", req.sim.n_subjects));
    }
    if req.alpha_levels.is_empty() || req.alpha_levels.len() > 10 {
        check.fail("alpha_levels", "must hold 1 to 10 levels");
    }
    for &a in &req.alpha_levels {
        check.open_unit("alpha_levels", a);
    }
    if let Err(e) = req.sim.validate() {
        check.errors.push(e.into());
    }
    check.finish()?;
    let mut sim = req.sim.clone();
    if let Some(seed) = req.seed {
        sim.seed = seed;
    }
    Ok(sim)
}

async fn simulate(State(state): State<AppState>, body: Bytes) -> ApiResult<SimulateResponse> {
    let req: SimulateRequest = parse(&body)?;
    let sim = check_simulate(&req, state.config.max_sim_reps)?;
    let _permit = state
        .sim_permits
        .acquire()
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let cell = Cell {
        overrides: CellOverride::default(),
        sim: sim.clone(),
    };
    let (reps, levels) = (req.replicates, req.alpha_levels.clone());
    let result = tokio::task::spawn_blocking(move || run_cell(&cell, reps, &levels, &[Estimator::TwoStage]))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let cell = match result {
        Ok(c) => c,
        Err(e @ CoreError::TooManyFailures { .. }) => return Err(ApiError::Internal(e.to_string())),
        Err(e) => return Err(ApiError::Invalid(vec![e.into()])),
    };
    let power: Vec<SimulatedPower> = cell
        .power
        .iter()
        .map(|p| SimulatedPower {
            alpha_level: p.alpha_level,
            empirical: p.empirical,
            calculated: p.calculated,
        })
        .collect();
    ok(SimulateResponse {
        d_bar: cell.d_bar,
        empirical_power: power[0].empirical,
        power,
        theta: cell.theta,
        replicates: cell.completed,
        failed: cell.failed,
        seed: sim.seed,
        inputs: req,
    })
}

pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        sim_permits: Arc::new(Semaphore::new(config.sim_workers.max(1))),
        config: Arc::new(config),
    };
    Router::new()
        .route("/api/health", get(health))
        .route("/api/power", post(power))
        .route("/api/sample-size", post(sample_size))
        .route("/api/curve", post(curve))
        .route("/api/simulate", post(simulate))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
