// SPDX-License-Identifier: MIT OR Apache-2.0

//! Async client for the lancet HTTP service.

use std::time::Duration;

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use lancet_core::mining::EditTask;
use lancet_core::wire::{
    BuildDictionaryRequest, DecomposeReply, DecomposeRequest, DictionaryReply, EmbedReply,
    EmbedRequest, ErrorBody, Health, ParseReply, RegisteredDictionary, ReportRequest, RewriteReply,
    StimuliReply, StimuliRequest, SweepReply, SweepRequest, TaskRequest, TransplantRequest,
    VecAddRequest, VectorReply, WireDictionary,
};
use lancet_core::{CoefficientReport, ConceptDictionary, ErrorCategory, TransplantOutput};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{} ({})", .body.message, .body.code)]
    Api { status: StatusCode, body: ErrorBody },

    /// The service could not be reached.
    #[error("cannot reach the service: {0}")]
    Unreachable(String),

    /// The service answered with something that is not the expected JSON.
    #[error("unexpected reply from the service: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            ClientError::Api { body, .. } => body.category,
            ClientError::Unreachable(_) => ErrorCategory::Transport,
            ClientError::Decode(_) => ErrorCategory::Transport,
        }
    }

    /// Machine-readable error code, when the service sent one.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct LancetClient {
    base: String,
    http: reqwest::Client,
}

impl LancetClient {
    /// `base_url` like `http://127.0.0.1:8080`, without a trailing path.
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(3600))
            .build()
            .map_err(|e| ClientError::Unreachable(e.to_string()))?;
        Ok(Self::with_http(base_url, http))
    }

    pub fn with_http(base_url: impl Into<String>, http: reqwest::Client) -> Self {
        let base = base_url.into().trim_end_matches('/').to_string();
        Self { base, http }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| ClientError::Unreachable(e.without_url().to_string()))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| ClientError::Unreachable(e.without_url().to_string()))?;
        if !status.is_success() {
            let body = serde_json::from_slice::<ErrorBody>(&bytes).map_err(|_| {
                ClientError::Decode(format!(
                    "HTTP {status}: {}",
                    String::from_utf8_lossy(&bytes).chars().take(200).collect::<String>()
                ))
            })?;
            return Err(ClientError::Api { status, body });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    async fn post<B: Serialize + ?Sized, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.call::<(), _>(Method::GET, "/health", None).await
    }

    pub async fn parse_concepts(&self, task: &EditTask, dry_run: bool) -> Result<ParseReply> {
        let req = TaskRequest {
            task: task.clone(),
            dry_run,
        };
        self.post("/v1/concepts/parse", &req).await
    }

    pub async fn rewrite_task(&self, task: &EditTask, dry_run: bool) -> Result<RewriteReply> {
        let req = TaskRequest {
            task: task.clone(),
            dry_run,
        };
        self.post("/v1/concepts/rewrite", &req).await
    }

    pub async fn stimuli(&self, concepts: &[String], dry_run: bool) -> Result<StimuliReply> {
        let req = StimuliRequest {
            concepts: concepts.to_vec(),
            dry_run,
        };
        self.post("/v1/stimuli", &req).await
    }

    pub async fn embed(&self, texts: &[String]) -> Result<EmbedReply> {
        let req = EmbedRequest {
            texts: texts.to_vec(),
        };
        self.post("/v1/embed", &req).await
    }

    pub async fn build_dictionary(&self, req: &BuildDictionaryRequest) -> Result<DictionaryReply> {
        self.post("/v1/dictionaries/build", req).await
    }

    /// Uploads `dict` and returns its registry entry.
    pub async fn register_dictionary(&self, dict: &ConceptDictionary) -> Result<RegisteredDictionary> {
        self.call(Method::PUT, "/v1/dictionaries", Some(&WireDictionary::from(dict)))
            .await
    }

    pub async fn dictionary(&self, id: &str) -> Result<WireDictionary> {
        self.call::<(), _>(Method::GET, &format!("/v1/dictionaries/{id}"), None)
            .await
    }

    pub async fn decompose(&self, req: &DecomposeRequest) -> Result<DecomposeReply> {
        self.post("/v1/decompose", req).await
    }

    pub async fn transplant(&self, req: &TransplantRequest) -> Result<TransplantOutput> {
        self.post("/v1/transplant", req).await
    }

    pub async fn sweep(&self, req: &SweepRequest) -> Result<SweepReply> {
        self.post("/v1/sweep", req).await
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<CoefficientReport> {
        self.post("/v1/report", req).await
    }

    pub async fn vec_add(&self, req: &VecAddRequest) -> Result<VectorReply> {
        self.post("/v1/vec_add", req).await
    }
}
