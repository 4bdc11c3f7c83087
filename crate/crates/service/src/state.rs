// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use lancet_core::config::{EncoderKind, RunConfig};
use lancet_core::mining::{
    ChatTransport, EmbeddingClient, Embedder, HashingEncoder, HttpEmbedder, Miner, ReplayTransport,
};
use lancet_core::store::EmbeddingCache;
use lancet_core::{ConceptDictionary, LatentSpaceTag, Result};

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    vlm: Miner,
    llm: Miner,
    embedder: EmbeddingClient,
    space: Option<LatentSpaceTag>,
    dictionaries: RwLock<HashMap<String, Arc<ConceptDictionary>>>,
}

impl AppState {
    pub fn new(vlm: Miner, llm: Miner, embedder: EmbeddingClient) -> Self {
        Self::with_space(vlm, llm, embedder, None)
    }

    /// Like [`AppState::new`], tagging built dictionaries with `space`.
    pub fn with_space(
        vlm: Miner,
        llm: Miner,
        embedder: EmbeddingClient,
        space: Option<LatentSpaceTag>,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                vlm,
                llm,
                embedder,
                space,
                dictionaries: RwLock::new(HashMap::new()),
            }),
        }
    }

    /// Miners over HTTP, or over recorded exchanges when
    /// `paths.replay_fixture` is set; the encoder and cache from `embedding`
    /// and `paths.cache_dir`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let (vlm, llm) = match &cfg.paths.replay_fixture {
            Some(path) => {
                let replay: Arc<dyn ChatTransport> = Arc::new(ReplayTransport::load(path)?);
                (
                    Miner::new(replay.clone(), cfg.vlm.clone()),
                    Miner::new(replay, cfg.llm.clone()),
                )
            }
            None => (Miner::http(cfg.vlm.clone())?, Miner::http(cfg.llm.clone())?),
        };
        let encoder: Arc<dyn Embedder> = match cfg.embedding.encoder {
            EncoderKind::Http => Arc::new(HttpEmbedder::new(cfg.embedding.client.clone())?),
            EncoderKind::Hashing => Arc::new(HashingEncoder::new(cfg.embedding.hashing_dim)),
        };
        let cache = cfg.paths.cache_dir.as_ref().map(EmbeddingCache::new);
        Ok(Self::with_space(
            vlm,
            llm,
            EmbeddingClient::new(encoder, cache),
            cfg.space,
        ))
    }

    pub fn vlm(&self) -> &Miner {
        &self.inner.vlm
    }

    pub fn llm(&self) -> &Miner {
        &self.inner.llm
    }

    pub fn embedder(&self) -> &EmbeddingClient {
        &self.inner.embedder
    }

    pub fn space(&self) -> Option<LatentSpaceTag> {
        self.inner.space
    }

    /// Stores `dict` under its content hash and returns the hash.
    pub fn register(&self, dict: ConceptDictionary) -> (String, Arc<ConceptDictionary>) {
        let id = dict.content_hash();
        let mut map = self.inner.dictionaries.write().unwrap_or_else(|e| e.into_inner());
        let entry = map.entry(id.clone()).or_insert_with(|| Arc::new(dict)).clone();
        (id, entry)
    }

    pub fn dictionary(&self, id: &str) -> Option<Arc<ConceptDictionary>> {
        let map = self.inner.dictionaries.read().unwrap_or_else(|e| e.into_inner());
        map.get(id).cloned()
    }

    pub fn dictionary_count(&self) -> usize {
        self.inner.dictionaries.read().unwrap_or_else(|e| e.into_inner()).len()
    }
}
