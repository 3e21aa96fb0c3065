use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use flexmarket_core::api::*;
use flexmarket_core::grid::{build_ptdf, line_flows, max_tradable_quantity_with, DEFAULT_TOLERANCE_KW};
use flexmarket_core::io::NetworkFile;
use flexmarket_core::market::{BidRecord, Conditionality, Market, MatchRecord, TradeLogEntry};
use flexmarket_core::oracle::{audit_trade_log, exhaustive_subset_check};
use serde_json::{json, Value};

use crate::{ApiError, AppState};

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, codes::INTERNAL, e.to_string()))?
}

fn tolerance(t: Option<f64>) -> Result<f64, ApiError> {
    match t {
        None => Ok(DEFAULT_TOLERANCE_KW),
        Some(t) if t.is_finite() && t >= 0.0 => Ok(t),
        Some(t) => Err(ApiError::invalid(format!("invalid tolerance {t}"))),
    }
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

pub async fn ptdf(body: Result<Json<NetworkFile>, JsonRejection>) -> ApiResult<PtdfResponse> {
    let Json(file) = body?;
    blocking(move || {
        let (net, baseline) = file.build(DEFAULT_TOLERANCE_KW)?;
        let ptdf = build_ptdf(&net)?;
        let rows = (0..ptdf.num_lines())
            .map(|l| ptdf.buses().iter().map(|&b| ptdf.entry(l, b).unwrap_or(0.0)).collect())
            .collect();
        Ok(Json(PtdfResponse {
            buses: ptdf.buses().to_vec(),
            slack_bus: net.slack_bus(),
            line_ids: ptdf.line_ids().to_vec(),
            rows,
            baseline_flows_kw: line_flows(&ptdf, &baseline)?,
        }))
    })
    .await
}

pub async fn check(body: Result<Json<CheckRequest>, JsonRejection>) -> ApiResult<CheckResponse> {
    let Json(req) = body?;
    blocking(move || {
        let tol = tolerance(req.tolerance_kw)?;
        let (net, baseline) = req.network.build(tol)?;
        let ptdf = build_ptdf(&net)?;
        let cap = max_tradable_quantity_with(
            &net,
            &ptdf,
            &baseline,
            req.request_bus,
            req.offer_bus,
            req.direction,
            req.quantity_kw,
            tol,
        )?;
        let (inject_bus, withdraw_bus) = req.direction.transfer(req.request_bus, req.offer_bus);
        Ok(Json(CheckResponse {
            inject_bus,
            withdraw_bus,
            quantity_kw: cap.quantity_kw,
            binding_lines: cap.binding_lines.iter().map(|&i| net.lines()[i].id.clone()).collect(),
        }))
    })
    .await
}

fn conditional_count(log: &[TradeLogEntry]) -> usize {
    log.iter()
        .filter(|e| e.outcome.is_match() && e.conditionality == Conditionality::Conditional)
        .count()
}

pub async fn audit(body: Result<Json<AuditRequest>, JsonRejection>) -> ApiResult<AuditResponse> {
    let Json(req) = body?;
    blocking(move || {
        let tol = tolerance(req.tolerance_kw)?;
        let (net, baseline) = req.network.build(tol)?;
        let reports = audit_trade_log(&net, &baseline, &req.trades, tol)?;
        Ok(Json(AuditResponse {
            conditional_matches: conditional_count(&req.trades),
            reports,
        }))
    })
    .await
}

pub async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(req) = body?;
    req.config.validate()?;
    let market = blocking(move || {
        let (net, baseline) = req.network.build(req.config.tolerance_kw)?;
        Ok(Market::new(net, baseline, req.config)?)
    })
    .await?;
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let baseline_flows_kw = market.baseline_flows();
    state
        .sessions
        .write()
        .insert(session_id.clone(), std::sync::Arc::new(parking_lot::Mutex::new(market)));
    tracing::info!(session = %session_id, "session created");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id,
            baseline_flows_kw,
        }),
    ))
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionInfo> {
    let session = state.session(&id)?;
    let market = session.lock();
    Ok(Json(SessionInfo {
        session_id: id,
        config: market.config().clone(),
        next_sequence: market.next_sequence(),
        book: market.book().clone(),
    }))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().remove(&id) {
        Some(_) => {
            tracing::info!(session = %id, "session closed");
            Ok(StatusCode::NO_CONTENT)
        }
        None => Err(ApiError::not_found(format!("no session {id}"))),
    }
}

pub async fn submit_bid(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<BidRecord>, JsonRejection>,
) -> ApiResult<SubmitResponse> {
    let Json(record) = body?;
    let session = state.session(&id)?;
    blocking(move || {
        let mut market = session.lock();
        let sequence = market.next_sequence();
        let report = market.submit(record.into_bid(sequence)?)?;
        Ok(Json(SubmitResponse {
            sequence,
            matches: report.matches,
            log: report.log,
        }))
    })
    .await
}

pub async fn cancel_bid(
    State(state): State<AppState>,
    Path((id, bid_id)): Path<(String, String)>,
) -> ApiResult<CancelResponse> {
    let session = state.session(&id)?;
    let bid = session.lock().cancel(&bid_id)?;
    Ok(Json(CancelResponse { bid }))
}

pub async fn trades(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<TradeLogEntry>> {
    let session = state.session(&id)?;
    let log = session.lock().log().to_vec();
    Ok(Json(log))
}

pub async fn snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SnapshotRequest>, JsonRejection>,
) -> ApiResult<SnapshotResponse> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    let market = session.lock();
    let dispatch = market.activation_snapshot(&req.match_ids)?;
    let flows_kw = line_flows(market.ptdf(), &dispatch)?;
    Ok(Json(SnapshotResponse {
        injection_kw: dispatch.injection_kw,
        line_ids: market.ptdf().line_ids().to_vec(),
        flows_kw,
    }))
}

pub async fn feasibility(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<FeasibilityRequest>, JsonRejection>,
) -> ApiResult<FeasibilityResponse> {
    let Json(req) = body?;
    if !(req.quantity_kw > 0.0 && req.quantity_kw.is_finite()) {
        return Err(ApiError::invalid(format!("quantity must be positive, got {}", req.quantity_kw)));
    }
    let session = state.session(&id)?;
    blocking(move || {
        let market = session.lock();
        for bus in [req.inject_bus, req.withdraw_bus] {
            if !market.network().contains(bus) {
                return Err(ApiError::invalid(format!("unknown bus {bus}")));
            }
        }
        Ok(Json(market.check_combination_feasibility(
            req.inject_bus,
            req.withdraw_bus,
            req.quantity_kw,
        )?))
    })
    .await
}

pub async fn session_audit(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<AuditResponse> {
    let session = state.session(&id)?;
    blocking(move || {
        let market = session.lock();
        let members: Vec<MatchRecord> = market.book().conditional_matches().cloned().collect();
        let reports = exhaustive_subset_check(
            market.network(),
            &market.book().baseline,
            &members,
            market.config().tolerance_kw,
        )?;
        Ok(Json(AuditResponse {
            conditional_matches: members.len(),
            reports,
        }))
    })
    .await
}
