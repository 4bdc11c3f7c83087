// SPDX-License-Identifier: MIT OR Apache-2.0

//! Record/replay of chat exchanges so mining runs without network access.
//!
//! A fixture file is JSON:
//!
//! ```json
//! {"version": 1, "exchanges": [{"key": "<sha256>", "request": {...}, "response": "..."}]}
//! ```
//!
//! `key` is the SHA-256 of the canonical JSON encoding of `request`. When a
//! key appears several times its responses are served in file order, the
//! last one repeating once the sequence is exhausted.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::transport::{ChatRequest, ChatTransport};
use crate::dictionary::hex;
use crate::error::{Error, Result};
use crate::store::write_atomic_json;

pub const FIXTURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub key: String,
    pub request: ChatRequest,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub version: u32,
    pub exchanges: Vec<Exchange>,
}

pub fn request_key(request: &ChatRequest) -> String {
    let canonical = serde_json::to_vec(request).expect("chat requests always serialize");
    hex(&Sha256::digest(canonical))
}

/// Serves recorded responses; unknown requests fail with `ReplayMiss`.
#[derive(Debug)]
pub struct ReplayTransport {
    queues: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayTransport {
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        let mut queues: HashMap<String, VecDeque<String>> = HashMap::new();
        for ex in exchanges {
            queues.entry(ex.key).or_default().push_back(ex.response);
        }
        Self {
            queues: Mutex::new(queues),
        }
    }

    /// Loads one fixture file, or every `*.json` fixture in a directory
    /// (in file-name order).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_dir() {
            return Ok(Self::from_exchanges(read_fixture(path)?));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut exchanges = Vec::new();
        for f in &files {
            exchanges.extend(read_fixture(f)?);
        }
        Ok(Self::from_exchanges(exchanges))
    }
}

fn read_fixture(path: &Path) -> Result<Vec<Exchange>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FixtureFile =
        serde_json::from_str(&text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    if file.version != FIXTURE_VERSION {
        return Err(Error::UnsupportedVersion(file.version));
    }
    for ex in &file.exchanges {
        if request_key(&ex.request) != ex.key {
            return Err(Error::SchemaViolation(format!(
                "fixture key {} does not match its request",
                ex.key
            )));
        }
    }
    Ok(file.exchanges)
}

#[async_trait]
impl ChatTransport for ReplayTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String> {
        let key = request_key(request);
        let mut queues = self.queues.lock().unwrap_or_else(|e| e.into_inner());
        let queue = queues.get_mut(&key).ok_or_else(|| Error::ReplayMiss(key.clone()))?;
        match queue.len() {
            0 => Err(Error::ReplayMiss(key)),
            1 => Ok(queue[0].clone()),
            _ => Ok(queue.pop_front().expect("len > 1")),
        }
    }
}

/// Forwards to an inner transport and keeps every successful exchange.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<Exchange>>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = FixtureFile {
            version: FIXTURE_VERSION,
            exchanges: self.exchanges(),
        };
        write_atomic_json(path.as_ref(), &file)
    }
}

#[async_trait]
impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<String> {
        let response = self.inner.complete(request).await?;
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(Exchange {
                key: request_key(request),
                request: request.clone(),
                response: response.clone(),
            });
        Ok(response)
    }
}

/// Replies from a fixed queue regardless of the request, recording what it
/// was asked. For tests and offline demos.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<Result<String, String>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().map(|r| Ok(r.into())).collect()),
            seen: Mutex::default(),
        }
    }

    /// Queues a transport failure.
    pub fn push_failure(&self, message: impl Into<String>) {
        self.replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push_back(Err(message.into()));
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push_back(Ok(reply.into()));
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn request_count(&self) -> usize {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

#[async_trait]
impl ChatTransport for ScriptedTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String> {
        self.seen
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.clone());
        match self.replies.lock().unwrap_or_else(|e| e.into_inner()).pop_front() {
            Some(Ok(r)) => Ok(r),
            Some(Err(e)) => Err(Error::Transport(e)),
            None => Err(Error::Transport("script exhausted".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::user("m", text.into(), None)
    }

    #[tokio::test]
    async fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        let rec = RecordingTransport::new(ScriptedTransport::new(["one", "two", "three"]));
        assert_eq!(rec.complete(&req("a")).await.unwrap(), "one");
        assert_eq!(rec.complete(&req("b")).await.unwrap(), "two");
        assert_eq!(rec.complete(&req("a")).await.unwrap(), "three");
        rec.save(&path).unwrap();

        let replay = ReplayTransport::load(&path).unwrap();
        assert_eq!(replay.complete(&req("a")).await.unwrap(), "one");
        assert_eq!(replay.complete(&req("b")).await.unwrap(), "two");
        assert_eq!(replay.complete(&req("a")).await.unwrap(), "three");
        assert_eq!(replay.complete(&req("a")).await.unwrap(), "three");
        assert!(matches!(replay.complete(&req("c")).await, Err(Error::ReplayMiss(_))));
    }

    #[test]
    fn tampered_fixture_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        let file = FixtureFile {
            version: FIXTURE_VERSION,
            exchanges: vec![Exchange {
                key: "deadbeef".into(),
                request: req("a"),
                response: "x".into(),
            }],
        };
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(matches!(ReplayTransport::load(&path), Err(Error::SchemaViolation(_))));
    }

    #[tokio::test]
    async fn scripted_failures_and_exhaustion() {
        let s = ScriptedTransport::new(["ok"]);
        s.push_failure("boom");
        assert_eq!(s.complete(&req("x")).await.unwrap(), "ok");
        assert!(matches!(s.complete(&req("x")).await, Err(Error::Transport(_))));
        assert!(s.complete(&req("x")).await.is_err());
        assert_eq!(s.request_count(), 3);
    }
}
