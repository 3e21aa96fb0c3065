//! Async client for the flexibility market service.

use flexmarket_core::api::*;
use flexmarket_core::io::NetworkFile;
use flexmarket_core::market::{BidRecord, TradeLogEntry};
use reqwest::{Method, Url};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server url {0}")]
    InvalidUrl(String),
    #[error("transport error: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{message} ({status}, {code})")]
    Api { status: u16, code: String, message: String },
}

impl ClientError {
    /// Server error code, if the server answered with one.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: Url,
}

impl Client {
    /// `base_url` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let base = Url::parse(base_url).map_err(|_| ClientError::InvalidUrl(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::InvalidUrl(base_url.to_string()));
        }
        Ok(Client {
            http: reqwest::Client::new(),
            base,
        })
    }

    pub fn base_url(&self) -> &Url {
        &self.base
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("checked in new").pop_if_empty().extend(segments);
        url
    }

    async fn send(&self, method: Method, segments: &[&str], body: Option<&impl Serialize>) -> Result<reqwest::Response, ClientError> {
        let mut req = self.http.request(method, self.url(segments));
        if let Some(body) = body {
            req = req.json(body);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await?;
        Err(match serde_json::from_str::<ApiErrorBody>(&text) {
            Ok(e) => ClientError::Api {
                status: status.as_u16(),
                code: e.code,
                message: e.message,
            },
            Err(_) => ClientError::Api {
                status: status.as_u16(),
                code: codes::INTERNAL.to_string(),
                message: if text.is_empty() { status.to_string() } else { text },
            },
        })
    }

    async fn json<T: DeserializeOwned>(
        &self,
        method: Method,
        segments: &[&str],
        body: Option<&impl Serialize>,
    ) -> Result<T, ClientError> {
        Ok(self.send(method, segments, body).await?.json().await?)
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        self.send(Method::GET, &["health"], None::<&()>).await.map(drop)
    }

    pub async fn ptdf(&self, network: &NetworkFile) -> Result<PtdfResponse, ClientError> {
        self.json(Method::POST, &["v1", "ptdf"], Some(network)).await
    }

    pub async fn check(&self, req: &CheckRequest) -> Result<CheckResponse, ClientError> {
        self.json(Method::POST, &["v1", "check"], Some(req)).await
    }

    pub async fn audit(&self, req: &AuditRequest) -> Result<AuditResponse, ClientError> {
        self.json(Method::POST, &["v1", "audit"], Some(req)).await
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionCreated, ClientError> {
        self.json(Method::POST, &["v1", "sessions"], Some(req)).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionInfo, ClientError> {
        self.json(Method::GET, &["v1", "sessions", id], None::<&()>).await
    }

    pub async fn delete_session(&self, id: &str) -> Result<(), ClientError> {
        self.send(Method::DELETE, &["v1", "sessions", id], None::<&()>).await.map(drop)
    }

    /// Submits one bid; the server assigns its arrival sequence.
    pub async fn submit_bid(&self, id: &str, bid: &BidRecord) -> Result<SubmitResponse, ClientError> {
        self.json(Method::POST, &["v1", "sessions", id, "bids"], Some(bid)).await
    }

    pub async fn cancel_bid(&self, id: &str, bid_id: &str) -> Result<CancelResponse, ClientError> {
        self.json(Method::DELETE, &["v1", "sessions", id, "bids", bid_id], None::<&()>).await
    }

    pub async fn trades(&self, id: &str) -> Result<Vec<TradeLogEntry>, ClientError> {
        self.json(Method::GET, &["v1", "sessions", id, "trades"], None::<&()>).await
    }

    pub async fn snapshot(&self, id: &str, match_ids: &[String]) -> Result<SnapshotResponse, ClientError> {
        let body = SnapshotRequest {
            match_ids: match_ids.to_vec(),
        };
        self.json(Method::POST, &["v1", "sessions", id, "snapshot"], Some(&body)).await
    }

    pub async fn feasibility(&self, id: &str, req: &FeasibilityRequest) -> Result<FeasibilityResponse, ClientError> {
        self.json(Method::POST, &["v1", "sessions", id, "feasibility"], Some(req)).await
    }

    pub async fn session_audit(&self, id: &str) -> Result<AuditResponse, ClientError> {
        self.json(Method::POST, &["v1", "sessions", id, "audit"], None::<&()>).await
    }
}
