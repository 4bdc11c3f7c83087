// SPDX-License-Identifier: MIT OR Apache-2.0

//! Text embedding through an external encoder, with an on-disk cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use super::transport::{build_http, send_with_retries};
use super::ClientConfig;
use crate::error::{Error, Result};
use crate::solver::DenseMatrix;
use crate::store::EmbeddingCache;

/// Maps texts to fixed-length vectors. `model_name` keys the cache.
#[async_trait]
pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    /// One vector per input text, in input order.
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>>;

    /// Network requests issued so far (zero for local encoders).
    fn request_count(&self) -> usize {
        0
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

/// Client for an embeddings sidecar speaking the OpenAI `/v1/embeddings`
/// shape: `{"model", "input": [...]}` in, `{"data": [{"embedding", "index"}]}` out.
pub struct HttpEmbedder {
    http: reqwest::Client,
    cfg: ClientConfig,
    permits: Semaphore,
    requests: AtomicUsize,
}

impl HttpEmbedder {
    pub fn new(cfg: ClientConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            http: build_http(&cfg)?,
            permits: Semaphore::new(cfg.max_concurrent_requests),
            cfg,
            requests: AtomicUsize::new(0),
        })
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn model_name(&self) -> &str {
        &self.cfg.model_name
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let key = self.cfg.api_key()?;
        let body = send_with_retries(
            &self.http,
            &self.cfg,
            &self.permits,
            &self.requests,
            key.as_deref(),
            &EmbeddingRequest {
                model: &self.cfg.model_name,
                input: texts,
            },
        )
        .await?;
        let parsed: EmbeddingResponse = serde_json::from_str(&body)
            .map_err(|e| Error::MalformedResponse(format!("not an embeddings response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut rows: Vec<Option<Vec<f32>>> = vec![None; texts.len()];
        for (pos, item) in parsed.data.into_iter().enumerate() {
            let i = item.index.unwrap_or(pos);
            match rows.get_mut(i) {
                Some(slot @ None) => *slot = Some(item.embedding),
                _ => {
                    return Err(Error::MalformedResponse(format!(
                        "embedding index {i} is out of range or repeated"
                    )))
                }
            }
        }
        Ok(rows.into_iter().map(|r| r.expect("every slot filled")).collect())
    }

    fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }
}

/// Deterministic bag-of-words encoder for offline runs and tests.
///
/// Each lowercase alphanumeric token maps to a fixed pseudo-random vector
/// seeded from its SHA-256; a text embeds to the mean of its token vectors.
/// The empty string embeds to zero.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
    model_name: String,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            model_name: format!("hashing-bow-{dim}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token_vector(&self, token: &str) -> Vec<f32> {
        let seed: [u8; 32] = Sha256::digest(token.as_bytes()).into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        // unit variance per coordinate
        let scale = 3f32.sqrt();
        (0..self.dim).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect()
    }

    pub fn encode(&self, text: &str) -> Vec<f32> {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let mut acc = vec![0.0f64; self.dim];
        for t in &tokens {
            for (a, x) in acc.iter_mut().zip(self.token_vector(t)) {
                *a += f64::from(x);
            }
        }
        let n = tokens.len().max(1) as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }
}

#[async_trait]
impl Embedder for HashingEncoder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        Ok(texts.iter().map(|t| self.encode(t)).collect())
    }
}

/// An embedder fronted by the content-addressed cache.
#[derive(Clone)]
pub struct EmbeddingClient {
    embedder: Arc<dyn Embedder>,
    cache: Option<EmbeddingCache>,
}

impl EmbeddingClient {
    pub fn new(embedder: Arc<dyn Embedder>, cache: Option<EmbeddingCache>) -> Self {
        Self { embedder, cache }
    }

    pub fn model_name(&self) -> &str {
        self.embedder.model_name()
    }

    pub fn request_count(&self) -> usize {
        self.embedder.request_count()
    }

    /// Embeds `texts` as the rows of a `K × d` matrix, in input order.
    ///
    /// Cache hits skip the encoder entirely; misses are sent in one batch
    /// and written back. Every row must share one width.
    pub async fn embed_texts(&self, texts: &[String]) -> Result<DenseMatrix> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("no texts to embed"));
        }
        let model = self.embedder.model_name().to_string();
        let mut found: HashMap<&str, Vec<f32>> = HashMap::new();
        let mut misses: Vec<String> = Vec::new();
        for t in texts {
            if found.contains_key(t.as_str()) || misses.contains(t) {
                continue;
            }
            match self.cache.as_ref().map(|c| c.get(&model, t)).transpose()?.flatten() {
                Some(v) => {
                    found.insert(t, v);
                }
                None => misses.push(t.clone()),
            }
        }
        if !misses.is_empty() {
            let fresh = self.embedder.embed_batch(&misses).await?;
            if fresh.len() != misses.len() {
                return Err(Error::MalformedResponse(format!(
                    "encoder returned {} rows for {} texts",
                    fresh.len(),
                    misses.len()
                )));
            }
            for (t, v) in misses.iter().zip(fresh) {
                let key = texts.iter().find(|x| *x == t).expect("miss came from texts");
                found.insert(key.as_str(), v);
            }
        }
        let width = found[texts[0].as_str()].len();
        let mut data = Vec::with_capacity(texts.len() * width);
        for t in texts {
            let row = &found[t.as_str()];
            if row.len() != width {
                return Err(Error::DimensionDrift {
                    expected: width,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let matrix = DenseMatrix::new(texts.len(), width, data)?;
        if let Some(cache) = &self.cache {
            for t in &misses {
                cache.put(&model, t, &found[t.as_str()])?;
            }
        }
        Ok(matrix)
    }
}
