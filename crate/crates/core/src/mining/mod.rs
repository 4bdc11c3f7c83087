// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concept mining: a vision-language model parses an edit task into a
//! concept list (or rewrites insertion tasks to name a counterpart), and a
//! language model writes stimuli for each concept.
//!
//! Every reply is validated before it is returned. A reply that fails
//! validation is retried with a repair note appended to the prompt, at most
//! `max_retries` times.

mod embed;
mod list;
mod replay;
mod transport;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

pub use embed::{EmbeddingClient, Embedder, HashingEncoder, HttpEmbedder};
pub use list::extract_string_list;
pub use replay::{
    request_key, Exchange, FixtureFile, RecordingTransport, ReplayTransport, ScriptedTransport,
    FIXTURE_VERSION,
};
pub use transport::{
    backoff_delay, ChatMessage, ChatRequest, ChatTransport, ContentPart, HttpChatTransport,
    ImageUrl, MessageContent,
};

use crate::dictionary::{dedup_stimuli, normalize_stimulus, Concept};
use crate::error::{Error, Result};

pub const MIN_CONCEPTS: usize = 15;
pub const MIN_STIMULI: usize = 30;

const REWRITE_TEMPLATE: &str = include_str!("../../templates/rewrite_for_insertion.txt");
const CONCEPT_LIST_TEMPLATE: &str = include_str!("../../templates/concept_list.txt");
const STIMULI_TEMPLATE: &str = include_str!("../../templates/stimuli.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Full URL that requests are POSTed to.
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the API key; empty for no auth.
    pub api_key_env: String,
    pub max_retries: usize,
    pub request_timeout_secs: f64,
    pub max_concurrent_requests: usize,
    /// Base delay of the exponential backoff.
    pub backoff_base_ms: u64,
    /// Whether the endpoint accepts image attachments.
    pub supports_images: bool,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            request_timeout_secs: 60.0,
            max_concurrent_requests: 4,
            backoff_base_ms: 1000,
            supports_images: true,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return Err(Error::InvalidConfig("request timeout must be positive".into()));
        }
        if self.max_concurrent_requests == 0 {
            return Err(Error::InvalidConfig("max_concurrent_requests must be >= 1".into()));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(Error::InvalidConfig("endpoint_url is empty".into()));
        }
        Ok(())
    }

    /// Reads the key from the configured variable. The value is never logged.
    pub(crate) fn api_key(&self) -> Result<Option<String>> {
        if self.api_key_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.is_empty() => Ok(Some(k)),
            _ => Err(Error::MissingApiKey(self.api_key_env.clone())),
        }
    }
}

/// A source/target prompt pair, with the edited concepts in `[brackets]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EditTask {
    #[serde(alias = "original_prompt")]
    pub source_prompt: String,
    #[serde(alias = "editing_prompt")]
    pub target_prompt: String,
    pub source_concept: String,
    pub target_concept: String,
    pub image_path: Option<PathBuf>,
}

impl EditTask {
    pub fn validate(&self) -> Result<()> {
        for (label, prompt) in [("source", &self.source_prompt), ("target", &self.target_prompt)] {
            if bracket_spans(prompt).len() > 1 {
                return Err(Error::Precondition(format!(
                    "{label} prompt has more than one bracketed span"
                )));
            }
        }
        Ok(())
    }

    /// Explicit source concept, else the bracketed span of the source prompt.
    pub fn resolved_source(&self) -> Option<String> {
        resolve(&self.source_concept, &self.source_prompt)
    }

    pub fn resolved_target(&self) -> Option<String> {
        resolve(&self.target_concept, &self.target_prompt)
    }
}

fn resolve(explicit: &str, prompt: &str) -> Option<String> {
    let explicit = normalize_stimulus(explicit);
    if !explicit.is_empty() {
        return Some(explicit);
    }
    bracket_spans(prompt)
        .first()
        .map(|s| normalize_stimulus(s))
        .filter(|s| !s.is_empty())
}

/// Contents of each `[...]` span, outermost only.
pub fn bracket_spans(text: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match c {
            '[' if open.is_none() => open = Some(i),
            ']' => {
                if let Some(start) = open.take() {
                    spans.push(&text[start + 1..i]);
                }
            }
            _ => {}
        }
    }
    spans
}

fn same_concept(a: &str, b: &str) -> bool {
    normalize_stimulus(a).to_lowercase() == normalize_stimulus(b).to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptListResponse {
    pub concepts: Vec<String>,
}

impl ConceptListResponse {
    /// At least 15 unique entries, the source first, the target absent.
    pub fn validate(&self, source: &str, target: Option<&str>) -> std::result::Result<(), String> {
        if self.concepts.len() < MIN_CONCEPTS {
            return Err(format!(
                "the list has {} concepts but at least {MIN_CONCEPTS} are required",
                self.concepts.len()
            ));
        }
        if !same_concept(&self.concepts[0], source) {
            return Err(format!(
                "the first concept must be the source concept {source:?}, found {:?}",
                self.concepts[0]
            ));
        }
        if let Some(t) = target.filter(|t| !t.trim().is_empty()) {
            if self.concepts.iter().any(|c| same_concept(c, t)) {
                return Err(format!("the target concept {t:?} must not appear in the list"));
            }
        }
        let mut seen = HashSet::new();
        for c in &self.concepts {
            let key = normalize_stimulus(c).to_lowercase();
            if key.is_empty() {
                return Err("the list contains an empty concept".into());
            }
            if !seen.insert(key) {
                return Err(format!("the concept {c:?} appears more than once"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusSetResponse {
    pub concept: String,
    pub stimuli: Vec<String>,
}

impl StimulusSetResponse {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.stimuli.len() < MIN_STIMULI {
            return Err(format!(
                "{} unique stimuli, at least {MIN_STIMULI} required",
                self.stimuli.len()
            ));
        }
        let mut seen = HashSet::new();
        for s in &self.stimuli {
            let norm = normalize_stimulus(s);
            if norm.is_empty() || !seen.insert(norm) {
                return Err(format!("stimulus {s:?} is empty or repeated"));
            }
        }
        Ok(())
    }

    pub fn into_concept(self) -> Result<Concept> {
        Concept::new(self.concept, self.stimuli)
    }
}

fn fill(template: &str, fields: &[(&str, &str)]) -> String {
    fields.iter().fold(template.to_string(), |acc, (k, v)| {
        acc.replace(&format!("{{{{{k}}}}}"), v)
    })
}

fn with_repair(prompt: &str, reason: &str, instruction: &str) -> String {
    format!(
        "{prompt}\n\nYour previous answer was rejected: {reason}. {instruction}"
    )
}

/// Drives the three mining prompts over a [`ChatTransport`].
pub struct Miner {
    transport: Arc<dyn ChatTransport>,
    cfg: ClientConfig,
}

impl Miner {
    pub fn new(transport: Arc<dyn ChatTransport>, cfg: ClientConfig) -> Self {
        Self { transport, cfg }
    }

    /// Talks to `cfg.endpoint_url` over HTTP.
    pub fn http(cfg: ClientConfig) -> Result<Self> {
        let transport = Arc::new(HttpChatTransport::new(cfg.clone())?);
        Ok(Self::new(transport, cfg))
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    fn image_attachment(&self, task: &EditTask) -> Result<Option<String>> {
        let Some(path) = &task.image_path else {
            return Ok(None);
        };
        if !self.cfg.supports_images {
            warn!(
                image = %path.display(),
                "endpoint does not take images; sending the prompts alone"
            );
            return Ok(None);
        }
        Ok(Some(image_data_url(path)?))
    }

    fn task_prompt(&self, template: &str, task: &EditTask, with_image: bool) -> String {
        fill(
            template,
            &[
                ("source_prompt", &task.source_prompt),
                ("target_prompt", &task.target_prompt),
                ("source_concept", &task.source_concept),
                ("target_concept", &task.target_concept),
                ("image", if with_image { "(IMG)" } else { "(not provided)" }),
            ],
        )
    }

    /// The first request `parse_concepts` would send, after precondition checks.
    pub fn parse_request(&self, task: &EditTask) -> Result<ChatRequest> {
        task.validate()?;
        let source = task.resolved_source().ok_or_else(|| {
            Error::Precondition(
                "task names no source concept; rewrite it for insertion first".into(),
            )
        })?;
        let mut filled = task.clone();
        filled.source_concept = source;
        if let Some(t) = task.resolved_target() {
            filled.target_concept = t;
        }
        let image = self.image_attachment(task)?;
        let prompt = self.task_prompt(CONCEPT_LIST_TEMPLATE, &filled, image.is_some());
        Ok(ChatRequest::user(&self.cfg.model_name, prompt, image))
    }

    /// Parses the task into a validated concept list.
    pub async fn parse_concepts(&self, task: &EditTask) -> Result<ConceptListResponse> {
        let first = self.parse_request(task)?;
        let source = task.resolved_source().expect("checked by parse_request");
        let target = task.resolved_target();
        self.ask_validated(first, |reply| {
            let concepts: Vec<String> = extract_string_list(reply)?
                .into_iter()
                .map(|c| normalize_stimulus(&c))
                .collect();
            let resp = ConceptListResponse { concepts };
            Ok(resp.validate(&source, target.as_deref()).map(|_| resp))
        }, |reason| {
            format!(
                "Reply again with a Python list of at least {MIN_CONCEPTS} unique concepts whose first item is \"{source}\"{}.",
                target
                    .as_deref()
                    .map(|t| format!(" and which does not contain \"{t}\""))
                    .unwrap_or_default()
            ) + &format!(" ({reason})")
        })
        .await
    }

    pub fn rewrite_request(&self, task: &EditTask) -> Result<ChatRequest> {
        task.validate()?;
        if task.resolved_source().is_some() {
            return Err(Error::Precondition(
                "task already names a source concept".into(),
            ));
        }
        let target = task.resolved_target().ok_or_else(|| {
            Error::Precondition("insertion tasks need a target concept".into())
        })?;
        let mut filled = task.clone();
        filled.target_concept = target;
        let image = self.image_attachment(task)?;
        let prompt = self.task_prompt(REWRITE_TEMPLATE, &filled, image.is_some());
        Ok(ChatRequest::user(&self.cfg.model_name, prompt, image))
    }

    /// Rewrites an insertion task so the source prompt brackets a counterpart
    /// concept, which becomes the task's source concept.
    pub async fn rewrite_for_insertion(&self, task: &EditTask) -> Result<EditTask> {
        let first = self.rewrite_request(task)?;
        let target = task.resolved_target().expect("checked by rewrite_request");
        self.ask_validated(
            first,
            |reply| Ok(validate_rewrite(reply, &target).map(|(prompt, counterpart)| {
                EditTask {
                    source_prompt: prompt,
                    source_concept: counterpart,
                    target_concept: target.clone(),
                    ..task.clone()
                }
            })),
            |reason| {
                format!(
                    "Reply with only the re-written source prompt, with exactly one concept in brackets that differs from \"{target}\" ({reason})."
                )
            },
        )
        .await
    }

    pub fn stimuli_request(&self, concept: &str) -> Result<ChatRequest> {
        let concept = normalize_stimulus(concept);
        if concept.is_empty() {
            return Err(Error::Precondition("concept name is empty".into()));
        }
        let prompt = fill(STIMULI_TEMPLATE, &[("concept", &concept)]);
        Ok(ChatRequest::user(&self.cfg.model_name, prompt, None))
    }

    /// At least 30 unique stimuli for `concept`. If deduplication leaves
    /// fewer, one top-up request asks for more before giving up.
    pub async fn synthesize_stimuli(&self, concept: &str) -> Result<StimulusSetResponse> {
        let first = self.stimuli_request(concept)?;
        let concept = normalize_stimulus(concept);
        let raw = self
            .ask_validated(
                first.clone(),
                |reply| {
                    let items = extract_string_list(reply)?;
                    Ok(if items.iter().any(|s| !s.trim().is_empty()) {
                        Ok(items)
                    } else {
                        Err("the list is empty".to_string())
                    })
                },
                |reason| format!("Reply with a Python list of {MIN_STIMULI} stimuli ({reason})."),
            )
            .await?;
        let mut stimuli = dedup_stimuli(&raw);
        if stimuli.len() < MIN_STIMULI {
            let missing = MIN_STIMULI - stimuli.len();
            info!(concept, have = stimuli.len(), "topping up stimuli");
            let taken = serde_json::to_string(&stimuli).expect("strings serialize");
            let prompt = format!(
                "{}\n\nThese stimuli are already taken: {taken}\nGive at least {missing} NEW stimuli that differ from all of them, as a Python list.",
                first.prompt_text()
            );
            let top_up = ChatRequest::user(&self.cfg.model_name, prompt, None);
            let reply = self.transport.complete(&top_up).await?;
            let more = extract_string_list(&reply)?;
            stimuli = dedup_stimuli(stimuli.iter().chain(more.iter()));
        }
        let resp = StimulusSetResponse { concept, stimuli };
        resp.validate().map_err(|reason| Error::ValidationFailed {
            attempts: 1,
            reason,
        })?;
        Ok(resp)
    }

    /// Stimuli for every concept, at most `max_concurrent_requests` in flight.
    /// Results keep input order; the first failure aborts the batch.
    pub async fn synthesize_many(&self, concepts: &[String]) -> Result<Vec<StimulusSetResponse>> {
        use futures::stream::{self, StreamExt, TryStreamExt};
        for c in concepts {
            self.stimuli_request(c)?;
        }
        let pending: Vec<_> = concepts.iter().map(|c| self.synthesize_stimuli(c)).collect();
        stream::iter(pending)
            .buffered(self.cfg.max_concurrent_requests.max(1))
            .try_collect()
            .await
    }

    /// Sends `first`, then up to `max_retries` repaired prompts until `check`
    /// accepts a reply. `check` returns `Err` for replies that are not even
    /// parseable and `Ok(Err(reason))` for parseable replies that break a rule.
    async fn ask_validated<T>(
        &self,
        first: ChatRequest,
        check: impl Fn(&str) -> Result<std::result::Result<T, String>>,
        repair: impl Fn(&str) -> String,
    ) -> Result<T> {
        let base_prompt = first.prompt_text().to_string();
        let mut request = first;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let reply = self.transport.complete(&request).await?;
            let reason = match check(&reply) {
                Ok(Ok(value)) => return Ok(value),
                Ok(Err(reason)) => reason,
                Err(Error::MalformedResponse(m)) => m,
                Err(e) => return Err(e),
            };
            if attempts > self.cfg.max_retries {
                return Err(Error::ValidationFailed { attempts, reason });
            }
            warn!(attempt = attempts, "reply rejected: {reason}");
            let prompt = with_repair(&base_prompt, &reason, &repair(&reason));
            request = replace_prompt(&request, prompt);
        }
    }
}

fn replace_prompt(request: &ChatRequest, prompt: String) -> ChatRequest {
    let mut next = request.clone();
    if let Some(last) = next.messages.last_mut() {
        match &mut last.content {
            MessageContent::Text(t) => *t = prompt,
            MessageContent::Parts(parts) => {
                for p in parts.iter_mut() {
                    if let ContentPart::Text { text } = p {
                        *text = prompt;
                        break;
                    }
                }
            }
        }
    }
    next
}

/// Returns `(rewritten prompt, counterpart)` or the rule the reply broke.
fn validate_rewrite(reply: &str, target: &str) -> std::result::Result<(String, String), String> {
    let line = reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let line = line
        .strip_prefix("Re-written Source Prompt:")
        .unwrap_or(line)
        .trim()
        .trim_matches(|c| c == '"' || c == '\'' || c == '`')
        .trim();
    let spans = bracket_spans(line);
    match spans.as_slice() {
        [] => Err("the prompt has no bracketed source concept".into()),
        [one] => {
            let counterpart = normalize_stimulus(one);
            if counterpart.is_empty() {
                Err("the brackets are empty".into())
            } else if same_concept(&counterpart, target) {
                Err(format!("the counterpart {counterpart:?} equals the target concept"))
            } else {
                Ok((line.to_string(), counterpart))
            }
        }
        _ => Err("the prompt has more than one bracketed span".into()),
    }
}

fn image_data_url(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        _ => "image/png",
    };
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{mime};base64,{b64}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ClientConfig {
        ClientConfig {
            max_retries: 2,
            backoff_base_ms: 1,
            ..ClientConfig::default()
        }
    }

    fn miner(replies: &[&str]) -> (Miner, Arc<ScriptedTransport>) {
        let t = Arc::new(ScriptedTransport::new(replies.iter().copied()));
        (Miner::new(t.clone(), cfg()), t)
    }

    fn cake_task() -> EditTask {
        EditTask {
            source_prompt: "a [round] cake with orange frosting on a wooden plate".into(),
            target_prompt: "a [square] cake with orange frosting on a wooden plate".into(),
            ..EditTask::default()
        }
    }

    fn list_of(items: &[&str]) -> String {
        serde_json::to_string(items).unwrap()
    }

    const CAKE: [&str; 16] = [
        "round", "cake", "orange", "frosting", "wooden", "plate", "swirl", "creamy", "crumbly",
        "smooth", "rustic", "natural", "muted", "handmade", "warm", "minimalist",
    ];

    #[test]
    fn brackets_and_resolution() {
        assert_eq!(bracket_spans("a [round] cake"), vec!["round"]);
        assert_eq!(bracket_spans("two [real] birds [x]"), vec!["real", "x"]);
        let t = cake_task();
        assert_eq!(t.resolved_source().as_deref(), Some("round"));
        assert_eq!(t.resolved_target().as_deref(), Some("square"));
        let bad = EditTask {
            source_prompt: "[a] and [b]".into(),
            ..EditTask::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Precondition(_))));
    }

    #[test]
    fn templates_are_filled() {
        let (m, _) = miner(&[]);
        let req = m.parse_request(&cake_task()).unwrap();
        let text = req.prompt_text();
        assert!(text.contains("Source Prompt: a [round] cake with orange frosting"));
        assert!(text.contains("Source Concept: \"round\""));
        assert!(text.contains("Target Concept: \"square\""));
        assert!(!text.contains("{{"));
        assert_eq!(req.temperature, 0.0);
        let s = m.stimuli_request("dog").unwrap();
        assert!(s.prompt_text().trim_end().ends_with("Concept: dog\nConcept Stimuli:"));
    }

    #[tokio::test]
    async fn parse_accepts_valid_list() {
        let (m, t) = miner(&[&list_of(&CAKE)]);
        let resp = m.parse_concepts(&cake_task()).await.unwrap();
        assert_eq!(resp.concepts[0], "round");
        assert_eq!(t.request_count(), 1);
    }

    #[tokio::test]
    async fn parse_repairs_then_accepts() {
        let short = list_of(&CAKE[..10]);
        let (m, t) = miner(&[&short, &list_of(&CAKE)]);
        m.parse_concepts(&cake_task()).await.unwrap();
        let reqs = t.requests();
        assert_eq!(reqs.len(), 2);
        assert!(reqs[1].prompt_text().contains("Your previous answer was rejected"));
    }

    #[tokio::test]
    async fn parse_fails_after_bounded_retries() {
        let short = list_of(&CAKE[..10]);
        let (m, t) = miner(&[&short, &short, &short, &short]);
        let err = m.parse_concepts(&cake_task()).await.unwrap_err();
        assert!(matches!(err, Error::ValidationFailed { attempts: 3, .. }), "{err}");
        assert_eq!(t.request_count(), 3);
    }

    #[tokio::test]
    async fn parse_rejects_target_and_wrong_first() {
        let mut with_target = CAKE.to_vec();
        with_target[5] = "square";
        let r = list_of(&with_target);
        let (m, _) = miner(&[&r, &r, &r]);
        assert!(matches!(m.parse_concepts(&cake_task()).await, Err(Error::ValidationFailed { .. })));

        let mut wrong_first = CAKE.to_vec();
        wrong_first.swap(0, 1);
        let r = list_of(&wrong_first);
        let (m, _) = miner(&[&r, &r, &r]);
        assert!(matches!(m.parse_concepts(&cake_task()).await, Err(Error::ValidationFailed { .. })));
    }

    #[tokio::test]
    async fn parse_requires_a_source() {
        let (m, t) = miner(&[]);
        let task = EditTask {
            source_prompt: "two birds sitting on a branch".into(),
            target_prompt: "two [origami] birds sitting on a branch".into(),
            ..EditTask::default()
        };
        assert!(matches!(m.parse_concepts(&task).await, Err(Error::Precondition(_))));
        assert_eq!(t.request_count(), 0);
    }

    #[tokio::test]
    async fn rewrite_validation() {
        let task = EditTask {
            source_prompt: "two birds sitting on a branch".into(),
            target_prompt: "two [origami] birds sitting on a branch".into(),
            target_concept: "origami".into(),
            ..EditTask::default()
        };
        let (m, _) = miner(&["two [real] birds sitting on a branch"]);
        let out = m.rewrite_for_insertion(&task).await.unwrap();
        assert_eq!(out.source_prompt, "two [real] birds sitting on a branch");
        assert_eq!(out.source_concept, "real");

        let same = "two [origami] birds sitting on a branch";
        let (m, t) = miner(&[same, same, same]);
        assert!(matches!(
            m.rewrite_for_insertion(&task).await,
            Err(Error::ValidationFailed { attempts: 3, .. })
        ));
        assert_eq!(t.request_count(), 3);

        let (m, _) = miner(&["Re-written Source Prompt: \"two [real] birds sitting on a branch\""]);
        assert_eq!(m.rewrite_for_insertion(&task).await.unwrap().source_concept, "real");
    }

    #[tokio::test]
    async fn stimuli_top_up_after_dedup() {
        let mut raw: Vec<String> = (0..29).map(|i| format!("A dog fact number {i}.")).collect();
        raw.push(raw[0].clone());
        raw.push(format!("  {}  ", raw[1]));
        assert_eq!(raw.len(), 31);
        let top_up = list_of(&["Dogs dream while they sleep.", "A dog fact number 3."]);
        let (m, t) = miner(&[&serde_json::to_string(&raw).unwrap(), &top_up]);
        let resp = m.synthesize_stimuli("dog").await.unwrap();
        assert_eq!(resp.stimuli.len(), 30);
        assert_eq!(t.request_count(), 2);
        assert!(t.requests()[1].prompt_text().contains("already taken"));
    }

    #[tokio::test]
    async fn stimuli_fail_when_top_up_is_not_enough() {
        let raw: Vec<String> = (0..20).map(|i| format!("fact {i}")).collect();
        let (m, _) = miner(&[&serde_json::to_string(&raw).unwrap(), "[\"fact 1\"]"]);
        assert!(matches!(
            m.synthesize_stimuli("dog").await,
            Err(Error::ValidationFailed { .. })
        ));
    }

    #[tokio::test]
    async fn empty_concept_sends_nothing() {
        let (m, t) = miner(&[]);
        assert!(matches!(m.synthesize_stimuli("  ").await, Err(Error::Precondition(_))));
        assert_eq!(t.request_count(), 0);
    }

    #[tokio::test]
    async fn image_is_omitted_when_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("cake.png");
        std::fs::write(&img, [0x89, b'P', b'N', b'G']).unwrap();
        let task = EditTask {
            image_path: Some(img),
            ..cake_task()
        };
        let t = Arc::new(ScriptedTransport::default());
        let with = Miner::new(t.clone(), cfg()).parse_request(&task).unwrap();
        assert!(with.has_image());
        assert!(with.prompt_text().contains("Source Image: (IMG)"));
        let without = Miner::new(
            t,
            ClientConfig {
                supports_images: false,
                ..cfg()
            },
        )
        .parse_request(&task)
        .unwrap();
        assert!(!without.has_image());
    }

    #[test]
    fn missing_key_is_reported_by_name() {
        let cfg = ClientConfig {
            api_key_env: "LANCET_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..ClientConfig::default()
        };
        assert!(matches!(cfg.api_key(), Err(Error::MissingApiKey(n)) if n == "LANCET_TEST_KEY_THAT_IS_NOT_SET"));
        let none = ClientConfig {
            api_key_env: String::new(),
            ..ClientConfig::default()
        };
        assert_eq!(none.api_key().unwrap(), None);
    }
}
