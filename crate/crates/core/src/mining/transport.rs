// SPDX-License-Identifier: MIT OR Apache-2.0

//! Chat-completions requests and the HTTP transport.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tracing::{debug, warn};

use super::ClientConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: MessageContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

impl ChatRequest {
    /// One user turn at temperature 0, with an optional image data URL.
    pub fn user(model: &str, text: String, image_data_url: Option<String>) -> Self {
        let content = match image_data_url {
            Some(url) => MessageContent::Parts(vec![
                ContentPart::Text { text },
                ContentPart::ImageUrl {
                    image_url: ImageUrl { url },
                },
            ]),
            None => MessageContent::Text(text),
        };
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content,
            }],
            temperature: 0.0,
        }
    }

    /// Text of the last user turn.
    pub fn prompt_text(&self) -> &str {
        match self.messages.last().map(|m| &m.content) {
            Some(MessageContent::Text(t)) => t,
            Some(MessageContent::Parts(parts)) => parts
                .iter()
                .find_map(|p| match p {
                    ContentPart::Text { text } => Some(text.as_str()),
                    _ => None,
                })
                .unwrap_or(""),
            None => "",
        }
    }

    pub fn has_image(&self) -> bool {
        self.messages.iter().any(|m| {
            matches!(&m.content, MessageContent::Parts(p)
                if p.iter().any(|x| matches!(x, ContentPart::ImageUrl { .. })))
        })
    }
}

/// Anything that turns a chat request into the assistant's reply text.
#[async_trait]
pub trait ChatTransport: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<String>;
}

#[async_trait]
impl<T: ChatTransport + ?Sized> ChatTransport for Arc<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<String> {
        (**self).complete(request).await
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// POSTs to a chat-completions-compatible endpoint with bounded concurrency,
/// a per-request timeout and exponential backoff on retryable failures.
pub struct HttpChatTransport {
    http: reqwest::Client,
    cfg: ClientConfig,
    permits: Arc<Semaphore>,
    requests: AtomicUsize,
}

impl std::fmt::Debug for HttpChatTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatTransport")
            .field("endpoint", &self.cfg.endpoint_url)
            .field("model", &self.cfg.model_name)
            .field("requests", &self.request_count())
            .finish()
    }
}

impl HttpChatTransport {
    pub fn new(cfg: ClientConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            http: build_http(&cfg)?,
            permits: Arc::new(Semaphore::new(cfg.max_concurrent_requests)),
            cfg,
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }
}

pub(crate) fn build_http(cfg: &ClientConfig) -> Result<reqwest::Client> {
    reqwest::Client::builder()
        .timeout(Duration::from_secs_f64(cfg.request_timeout_secs))
        .build()
        .map_err(|e| Error::Transport(format!("cannot build HTTP client: {e}")))
}

#[async_trait]
impl ChatTransport for HttpChatTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String> {
        let key = self.cfg.api_key()?;
        let body = send_with_retries(
            &self.http,
            &self.cfg,
            &self.permits,
            &self.requests,
            key.as_deref(),
            request,
        )
        .await?;
        let parsed: CompletionBody = serde_json::from_str(&body)
            .map_err(|e| Error::MalformedResponse(format!("not a chat completion: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::MalformedResponse("completion has no message content".into()))
    }
}

/// Sends `payload`, retrying on connect errors, timeouts, 429 and 5xx.
pub(crate) async fn send_with_retries<P: Serialize + ?Sized>(
    http: &reqwest::Client,
    cfg: &ClientConfig,
    permits: &Semaphore,
    counter: &AtomicUsize,
    api_key: Option<&str>,
    payload: &P,
) -> Result<String> {
    let mut attempt = 0usize;
    loop {
        let outcome = {
            let _permit = permits
                .acquire()
                .await
                .map_err(|_| Error::Transport("request pool closed".into()))?;
            counter.fetch_add(1, Ordering::Relaxed);
            let mut req = http.post(&cfg.endpoint_url).json(payload);
            if let Some(k) = api_key {
                req = req.bearer_auth(k);
            }
            match req.send().await {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().await.map_err(|e| e.to_string());
                    match text {
                        Ok(body) if status.is_success() => return Ok(body),
                        Ok(body) => Attempt {
                            retryable: status.as_u16() == 429 || status.is_server_error(),
                            message: format!("HTTP {status}: {}", super::list::preview(&body)),
                        },
                        Err(e) => Attempt {
                            retryable: true,
                            message: format!("reading body failed: {e}"),
                        },
                    }
                }
                Err(e) => Attempt {
                    retryable: e.is_timeout() || e.is_connect() || e.is_request(),
                    message: without_url(e),
                },
            }
        };
        if !outcome.retryable || attempt >= cfg.max_retries {
            return Err(Error::Transport(outcome.message));
        }
        let delay = backoff_delay(cfg.backoff_base_ms, attempt);
        warn!(
            attempt = attempt + 1,
            max = cfg.max_retries,
            delay_ms = delay.as_millis() as u64,
            "retrying request: {}",
            outcome.message
        );
        tokio::time::sleep(delay).await;
        attempt += 1;
    }
}

struct Attempt {
    retryable: bool,
    message: String,
}

fn without_url(e: reqwest::Error) -> String {
    e.without_url().to_string()
}

/// `base · 2^attempt`, jittered by ±20%.
pub fn backoff_delay(base_ms: u64, attempt: usize) -> Duration {
    let nominal = base_ms as f64 * 2f64.powi(attempt.min(30) as i32);
    let jitter = rand::thread_rng().gen_range(0.8..=1.2);
    let ms = nominal * jitter;
    debug!(ms, "backoff");
    Duration::from_secs_f64(ms / 1000.0)
}
