use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sparsefield::inference::{infer_mean, query_point, sample_chains, BinSummary, SamplerConfig};
use sparsefield::{Model, SampleSet};

use crate::session::Session;
use crate::{ApiError, AppState};

type ApiResult<T> = Result<T, ApiError>;

const MAX_CHAINS: usize = 8;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(t)| t).map_err(|e| ApiError::bad_request(e.body_text()))
}

/// Copies what a request needs out of the store so inference runs unlocked
/// on a consistent (samples, revision) pair.
fn snapshot(state: &AppState, id: &str) -> ApiResult<(Arc<Model<f32>>, Session)> {
    let mut sessions = state.sessions();
    let session = sessions
        .touch(id)
        .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))?
        .clone();
    let model = state
        .model(&session.checkpoint_id)
        .ok_or_else(|| ApiError::internal(format!("checkpoint {:?} disappeared", session.checkpoint_id)))?;
    Ok((model, session))
}

fn require_observations(session: &Session) -> ApiResult<()> {
    if session.samples.is_empty() {
        return Err(ApiError::conflict(format!(
            "session {:?} has no observations; PUT at least one first",
            session.id
        )));
    }
    Ok(())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> sparsefield::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

fn in_range(x: &[f64]) -> bool {
    x.iter().all(|c| (-1.0..=1.0).contains(c))
}

#[derive(Serialize)]
pub struct CheckpointInfo {
    id: String,
    pos_dim: usize,
    value_dim: usize,
    bins: usize,
    grid_shape: Option<Vec<usize>>,
}

pub async fn list_checkpoints(State(state): State<AppState>) -> Json<Vec<CheckpointInfo>> {
    let mut out: Vec<CheckpointInfo> = state
        .checkpoints()
        .map(|(id, c)| CheckpointInfo {
            id: id.clone(),
            pos_dim: c.model.config().pos_dim,
            value_dim: c.model.config().value_dim,
            bins: c.model.config().bins,
            grid_shape: c.grid_shape.clone(),
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    checkpoint_id: String,
    /// Falls back to the checkpoint's native raster.
    grid_shape: Option<Vec<usize>>,
}

#[derive(Serialize)]
pub struct Created {
    session_id: String,
    grid_shape: Vec<usize>,
    revision: u64,
}

pub async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let req = body(payload)?;
    let ckpt = state
        .checkpoint(&req.checkpoint_id)
        .ok_or_else(|| ApiError::not_found(format!("no checkpoint {:?}", req.checkpoint_id)))?;
    let p = ckpt.model.config().pos_dim;
    let grid_shape = req
        .grid_shape
        .or_else(|| ckpt.grid_shape.clone())
        .ok_or_else(|| ApiError::unprocessable("grid_shape is required for this checkpoint"))?;
    if grid_shape.len() != p || grid_shape.contains(&0) {
        return Err(ApiError::unprocessable(format!(
            "grid_shape {grid_shape:?} must have {p} positive extents"
        )));
    }
    let cells = grid_shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
    let cap = state.config().max_grid_cells;
    if cells.is_none_or(|c| c > cap) {
        return Err(ApiError::unprocessable(format!(
            "grid_shape {grid_shape:?} exceeds the {cap}-cell limit"
        )));
    }

    let session = Session {
        id: uuid::Uuid::new_v4().simple().to_string(),
        checkpoint_id: req.checkpoint_id,
        grid_shape: grid_shape.clone(),
        samples: Arc::new(SampleSet::empty(p, ckpt.model.config().value_dim)),
        revision: 0,
    };
    let created = Created {
        session_id: session.id.clone(),
        grid_shape,
        revision: 0,
    };
    log::info!("session {} on {}", session.id, session.checkpoint_id);
    state.sessions().insert(session);
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    x: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutObservations {
    observations: Vec<Observation>,
}

#[derive(Serialize)]
pub struct Revision {
    revision: u64,
}

pub async fn put_observations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<PutObservations>, JsonRejection>,
) -> ApiResult<Json<Revision>> {
    let req = body(payload)?;
    let (model, _) = snapshot(&state, &id)?;
    let (p, d) = (model.config().pos_dim, model.config().value_dim);

    let mut set = SampleSet::empty(p, d);
    for (k, obs) in req.observations.iter().enumerate() {
        if obs.x.len() != p || obs.v.len() != d {
            return Err(ApiError::unprocessable(format!(
                "observations[{k}]: expected x of length {p} and v of length {d}"
            )));
        }
        if !in_range(&obs.x) {
            return Err(ApiError::unprocessable(format!(
                "observations[{k}]: position {:?} is outside [-1, 1]",
                obs.x
            )));
        }
        if obs.v.iter().any(|v| !v.is_finite()) {
            return Err(ApiError::unprocessable(format!("observations[{k}]: value is not finite")));
        }
        set.push(&obs.x, &obs.v)?;
    }

    let mut sessions = state.sessions();
    let session = sessions
        .touch(&id)
        .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))?;
    session.samples = Arc::new(set);
    session.revision += 1;
    Ok(Json(Revision {
        revision: session.revision,
    }))
}

#[derive(Serialize)]
pub struct Mean {
    revision: u64,
    grid_shape: Vec<usize>,
    values: Vec<f64>,
}

pub async fn get_mean(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Mean>> {
    let (model, session) = snapshot(&state, &id)?;
    require_observations(&session)?;
    let (samples, grid) = (session.samples.clone(), session.grid_shape.clone());
    let signal = blocking(move || infer_mean(&model, &samples, &grid)).await?;
    Ok(Json(Mean {
        revision: session.revision,
        grid_shape: session.grid_shape,
        values: signal.values().to_vec(),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostSamples {
    n: usize,
    seed: Option<u64>,
    n_prime: Option<usize>,
}

#[derive(Serialize)]
pub struct Samples {
    revision: u64,
    /// Seed the chain seeds were derived from; repeat it to reproduce.
    seed: u64,
    n_prime: usize,
    samples: Vec<Vec<f64>>,
}

pub async fn post_samples(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<PostSamples>, JsonRejection>,
) -> ApiResult<Json<Samples>> {
    let req = body(payload)?;
    if !(1..=MAX_CHAINS).contains(&req.n) {
        return Err(ApiError::unprocessable(format!("n must be in 1..={MAX_CHAINS}, got {}", req.n)));
    }
    let (model, session) = snapshot(&state, &id)?;
    require_observations(&session)?;

    let cap = state.config().max_n_prime;
    let n_prime = req.n_prime.unwrap_or(cap).min(cap);
    let seed = req.seed.unwrap_or_else(|| rand::rng().random());
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..req.n).map(|_| seeder.random()).collect();
    let sampler = SamplerConfig {
        n_prime,
        ..SamplerConfig::default()
    };

    let (samples, grid) = (session.samples.clone(), session.grid_shape.clone());
    let chains = blocking(move || sample_chains(&model, &samples, &grid, &sampler, &seeds)).await?;
    Ok(Json(Samples {
        revision: session.revision,
        seed,
        n_prime,
        samples: chains.into_iter().map(|c| c.signal.values().to_vec()).collect(),
    }))
}

#[derive(Deserialize)]
pub struct QueryParams {
    x: String,
}

#[derive(Serialize)]
pub struct PointReply {
    revision: u64,
    expected: Vec<f64>,
    bins: Vec<BinSummary>,
}

pub async fn get_query(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<QueryParams>, QueryRejection>,
) -> ApiResult<Json<PointReply>> {
    let (model, session) = snapshot(&state, &id)?;
    let Query(params) = params.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    let x: Vec<f64> = params
        .x
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::unprocessable(format!("x={:?} is not a comma-separated list of numbers", params.x)))?;
    let p = model.config().pos_dim;
    if x.len() != p || !in_range(&x) {
        return Err(ApiError::unprocessable(format!(
            "x={:?} must have {p} coordinates in [-1, 1]",
            params.x
        )));
    }
    let samples = session.samples.clone();
    let summary = blocking(move || query_point(&model, &x, &samples)).await?;
    Ok(Json(PointReply {
        revision: session.revision,
        expected: summary.expected,
        bins: summary.bins,
    }))
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}
