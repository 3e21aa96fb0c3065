use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use flexmarket_core::api::{codes, ApiErrorBody};
use flexmarket_core::grid::GridError;
use flexmarket_core::io::LoadError;
use flexmarket_core::market::MarketError;
use flexmarket_core::oracle::OracleError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, codes::INVALID_INPUT, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, codes::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ApiErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::invalid(e.body_text())
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::InfeasibleBaseline { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, codes::INFEASIBLE_BASELINE, e.to_string())
            }
            LoadError::Market(m) => m.into(),
            other => ApiError::invalid(other.to_string()),
        }
    }
}

impl From<GridError> for ApiError {
    fn from(e: GridError) -> Self {
        LoadError::from(e).into()
    }
}

impl From<MarketError> for ApiError {
    fn from(e: MarketError) -> Self {
        let message = e.to_string();
        match e {
            MarketError::Grid(g) => g.into(),
            MarketError::DuplicateBid(_) => ApiError::new(StatusCode::CONFLICT, codes::DUPLICATE_BID, message),
            MarketError::TooManyCombinations { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, codes::TOO_MANY_COMBINATIONS, message)
            }
            MarketError::UnknownBid(_) | MarketError::UnknownMatch(_) => ApiError::not_found(message),
            _ => ApiError::invalid(message),
        }
    }
}

impl From<OracleError> for ApiError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooManyMatches(_) | OracleError::IncompleteEntry(_) | OracleError::MissingInjection(_) => {
                ApiError::invalid(e.to_string())
            }
            OracleError::Singular => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, codes::INTERNAL, e.to_string()),
        }
    }
}
