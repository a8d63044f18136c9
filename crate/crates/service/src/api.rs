use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::rngs::OsRng;
use rand::RngCore;
use rankpromo::arena::{CompetitionSpec, StrategySpec};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::competition::{hash_token, Accepted, Competition, RankingView, Report, Summary};
use crate::error::ApiError;
use crate::log::{Event, EventLog};
use crate::{AppState, Slot, Writer};

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/competitions", post(create))
        .route("/competitions/{id}", get(summary))
        .route("/competitions/{id}/submissions", post(submit))
        .route("/competitions/{id}/ranking", get(ranking))
        .route("/competitions/{id}/advance", post(advance))
        .route("/competitions/{id}/report", get(report));
    let api = match &state.0.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// 128 random bits, hex encoded.
fn random_hex() -> String {
    let mut b = [0u8; 16];
    OsRng.fill_bytes(&mut b);
    hex::encode(b)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn require_admin(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    match bearer(headers) {
        Some(t) if hash_token(t) == state.0.admin_hash => Ok(()),
        _ => Err(ApiError::forbidden("admin credential required")),
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(b)| b)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

#[derive(Serialize)]
struct Created {
    id: String,
    /// Player id to session token; shown once.
    tokens: BTreeMap<String, String>,
    pseudonyms: BTreeMap<String, String>,
}

async fn create(
    State(state): State<AppState>,
    headers: HeaderMap,
    payload: Result<Json<CompetitionSpec>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    require_admin(&state, &headers)?;
    let spec = body(payload)?;
    spec.validate(state.0.resources.model.as_ref())
        .map_err(|e| {
            ApiError::unprocessable("invalid competition config").with_details(vec![e.to_string()])
        })?;

    let id = random_hex()[..12].to_string();
    let mut tokens = BTreeMap::new();
    let mut token_hashes = BTreeMap::new();
    for p in spec
        .players
        .iter()
        .filter(|p| p.strategy == StrategySpec::Human)
    {
        let t = random_hex();
        token_hashes.insert(p.id.clone(), hash_token(&t));
        tokens.insert(p.id.clone(), t);
    }
    let mut order: Vec<usize> = (0..spec.players.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut OsRng);
    let pseudonyms: BTreeMap<String, String> = order
        .iter()
        .enumerate()
        .map(|(k, &i)| (spec.players[i].id.clone(), format!("author-{}", k + 1)))
        .collect();

    let event = Event::Created {
        id: id.clone(),
        spec: spec.clone(),
        token_hashes: token_hashes.clone(),
        pseudonyms: pseudonyms.clone(),
    };
    let mut log = EventLog::create(&state.0.data_dir, &id).map_err(ApiError::internal)?;
    log.append(&event).map_err(ApiError::internal)?;
    let competition = Competition::new(id.clone(), spec, token_hashes, pseudonyms.clone());
    let slot = Arc::new(Slot {
        views: RwLock::new(Arc::new(competition.views())),
        writer: tokio::sync::Mutex::new(Writer { competition, log }),
    });
    state
        .0
        .competitions
        .write()
        .expect("competitions lock")
        .insert(id.clone(), slot);
    tracing::info!("created competition {id}");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id,
            tokens,
            pseudonyms,
        }),
    ))
}

async fn summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Summary>, ApiError> {
    Ok(Json(state.slot(&id)?.views().summary.clone()))
}

#[derive(Deserialize)]
struct Submission {
    token: String,
    text: String,
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<Json<Accepted>, ApiError> {
    let slot = state.slot(&id)?;
    let sub = body(payload)?;
    let mut w = slot.writer.lock().await;
    let (event, accepted) = w.competition.check_submission(&sub.token, &sub.text)?;
    w.log.append(&event).map_err(ApiError::internal)?;
    w.competition.apply_submission(&event);
    slot.publish(&w.competition);
    Ok(Json(accepted))
}

#[derive(Serialize)]
struct RankingResponse {
    #[serde(flatten)]
    ranking: RankingView,
    /// The caller's pseudonym when a session token was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    you: Option<String>,
}

async fn ranking(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<RankingResponse>, ApiError> {
    let views = state.slot(&id)?.views();
    let you = match bearer(&headers) {
        None => None,
        Some(t) => {
            let player = views
                .token_hashes
                .get(&hash_token(t))
                .ok_or_else(|| ApiError::unauthorized("unknown session token"))?;
            views.pseudonyms.get(player).cloned()
        }
    };
    let ranking = views
        .ranking
        .clone()
        .ok_or_else(|| ApiError::not_found("no round has been ranked yet"))?;
    Ok(Json(RankingResponse { ranking, you }))
}

#[derive(Deserialize)]
struct AdvanceParams {
    #[serde(default)]
    force: bool,
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(params): Query<AdvanceParams>,
) -> Result<Json<RankingView>, ApiError> {
    require_admin(&state, &headers)?;
    let slot = state.slot(&id)?;
    let mut w = slot.writer.lock().await;
    let (round, ranking) = w.competition.advance(params.force, &state.0.resources)?;
    w.log
        .append(&Event::Advanced {
            round,
            forced: params.force,
            ranking,
        })
        .map_err(ApiError::internal)?;
    slot.publish(&w.competition);
    tracing::info!("competition {id} ranked round {round}");
    let views = slot.views();
    views
        .ranking
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::internal("ranking missing after advance"))
}

async fn report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Report>, ApiError> {
    Ok(Json(state.slot(&id)?.views().report.clone()))
}
