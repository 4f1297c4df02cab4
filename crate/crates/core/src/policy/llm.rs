//! OpenAI-compatible chat-completion policy with an append-only response
//! cache.
//!
//! Cache file: one JSON object per line,
//! `{"key": ..., "model": ..., "messages": [...], "response": ...}`, where
//! `key` is the hex SHA-256 of `model + "\n" + JSON(messages)`. Every live
//! exchange is appended; a lookup hit never touches the network, so a run
//! replayed against a complete cache is fully offline.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{render_prompt, PromptTemplates};
use super::{DecisionOutcome, DecisionPolicy, DecisionRequest, InterventionContext, OutcomeSource, PolicyError};
use crate::seed::sha256_hex;

pub const SYSTEM_MESSAGE: &str =
    "You are simulating a social media user deciding whether to share a news story. Stay in character.";

pub const REASK_MESSAGE: &str =
    "Your answer could not be read. Reply again, starting with a line of the form `DECISION: SHARE` or `DECISION: IGNORE`.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Extra attempts after a failed HTTP exchange.
    pub max_retries: u32,
    /// Maximum in-flight requests.
    pub concurrency: usize,
    pub cache_path: Option<PathBuf>,
    /// Re-asks after an unparseable reply before falling back to ignore.
    pub reask_limit: u32,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub backoff_ms: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-1106".into(),
            temperature: 0.0,
            max_retries: 3,
            concurrency: 8,
            cache_path: None,
            reask_limit: 2,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            backoff_ms: 500,
        }
    }
}

impl LlmSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            v.push(format!("policy.llm.temperature must be >= 0, got {}", self.temperature));
        }
        if self.concurrency == 0 {
            v.push("policy.llm.concurrency must be >= 1".into());
        }
        if self.endpoint.trim().is_empty() {
            v.push("policy.llm.endpoint must not be empty".into());
        }
        if self.model.trim().is_empty() {
            v.push("policy.llm.model must not be empty".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.into(), content: content.into() }
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// One request/response exchange with a chat model.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, model: &str, temperature: f64, messages: &[ChatMessage]) -> Result<String, TransportError>;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking HTTP client for `POST {endpoint}/chat/completions`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(settings: &LlmSettings) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: format!("{}/chat/completions", settings.endpoint.trim_end_matches('/')),
            api_key: std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty()),
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, model: &str, temperature: f64, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let mut req = self.client.post(&self.url).json(&CompletionRequest { model, messages, temperature });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(TransportError(format!("HTTP {status}: {}", body.chars().take(300).collect::<String>())));
        }
        let parsed: CompletionResponse = resp.json().map_err(|e| TransportError(format!("bad completion body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError("completion has no message content".into()))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model: String,
    messages: Vec<ChatMessage>,
    response: String,
}

pub fn cache_key(model: &str, messages: &[ChatMessage]) -> String {
    let body = serde_json::to_string(messages).expect("messages serialize");
    sha256_hex(format!("{model}\n{body}"))
}

/// In-memory index over the append-only cache file. Appends go through a
/// single locked writer.
pub struct ResponseCache {
    entries: Mutex<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { entries: Mutex::new(HashMap::new()), writer: Mutex::new(None) }
    }

    /// Loads `path` if it exists and opens it for appending. A torn final
    /// line (interrupted write) is skipped.
    pub fn open(path: &Path) -> Result<Self, PolicyError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| PolicyError::Cache(format!("{}: {e}", path.display())))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| PolicyError::Cache(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) => {
                        entries.insert(r.key, r.response);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable cache record: {e}", path.display(), i + 1),
                }
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| PolicyError::Cache(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| PolicyError::Cache(format!("{}: {e}", path.display())))?;
        Ok(ResponseCache { entries: Mutex::new(entries), writer: Mutex::new(Some(file)) })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hash over every (key, response) pair, independent of file order.
    pub fn digest(&self) -> String {
        let entries = self.entries.lock().unwrap();
        let mut keys: Vec<&String> = entries.keys().collect();
        keys.sort();
        let mut s = String::new();
        for k in keys {
            s.push_str(k);
            s.push('\0');
            s.push_str(&entries[k]);
            s.push('\0');
        }
        sha256_hex(s)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn insert(&self, key: String, model: &str, messages: &[ChatMessage], response: &str) -> Result<(), PolicyError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(f) = writer.as_mut() {
            let rec = CacheRecord {
                key: key.clone(),
                model: model.into(),
                messages: messages.to_vec(),
                response: response.into(),
            };
            let line = serde_json::to_string(&rec).map_err(|e| PolicyError::Cache(e.to_string()))?;
            writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| PolicyError::Cache(e.to_string()))?;
        }
        self.entries.lock().unwrap().insert(key, response.into());
        Ok(())
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let r = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDecision {
    pub share: bool,
    pub comment: Option<String>,
    pub reason: Option<String>,
}

fn field<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let cleaned = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '#' | '-' | '>' | '_'));
    let head = cleaned.get(..name.len())?;
    if !head.eq_ignore_ascii_case(name) {
        return None;
    }
    let rest = cleaned[name.len()..].trim_start_matches(['*', '_']);
    let rest = rest.trim_start();
    rest.strip_prefix(':').map(str::trim)
}

/// Reads `DECISION:` / `COMMENT:` / `REASON:` lines, case-insensitively and
/// ignoring surrounding prose. Only the first `DECISION` line counts.
/// Returns `None` when no readable decision is present.
pub fn parse_response(text: &str) -> Option<ParsedDecision> {
    let mut share = None;
    let mut comment = None;
    let mut reason = None;
    for line in text.lines() {
        if share.is_none() {
            if let Some(v) = field(line, "decision") {
                let token: String = v
                    .trim_start_matches(|c: char| !c.is_ascii_alphabetic())
                    .chars()
                    .take_while(|c| c.is_ascii_alphabetic() || *c == '\'')
                    .collect::<String>()
                    .to_ascii_lowercase();
                share = Some(match token.as_str() {
                    "share" | "yes" | "forward" | "repost" => true,
                    "ignore" | "no" | "not" | "skip" | "don't" | "dont" | "decline" => false,
                    _ => return None,
                });
                continue;
            }
        }
        if comment.is_none() {
            if let Some(v) = field(line, "comment") {
                let v = v.trim_matches('"').trim();
                if !v.is_empty() && !matches!(v.to_ascii_lowercase().as_str(), "none" | "n/a" | "-") {
                    comment = Some(v.to_string());
                }
                continue;
            }
        }
        if reason.is_none() {
            if let Some(v) = field(line, "reason") {
                if !v.is_empty() {
                    reason = Some(v.to_string());
                }
            }
        }
    }
    let share = share?;
    Some(ParsedDecision { share, comment: if share { comment } else { None }, reason })
}

pub struct LlmPolicy {
    settings: LlmSettings,
    templates: PromptTemplates,
    transport: Box<dyn ChatTransport>,
    cache: ResponseCache,
    gate: Gate,
    live_calls: AtomicUsize,
}

impl LlmPolicy {
    pub fn new(settings: LlmSettings, templates: PromptTemplates, transport: Box<dyn ChatTransport>) -> Result<Self, PolicyError> {
        let cache = match &settings.cache_path {
            Some(p) => ResponseCache::open(p)?,
            None => ResponseCache::in_memory(),
        };
        Ok(LlmPolicy {
            gate: Gate::new(settings.concurrency),
            settings,
            templates,
            transport,
            cache,
            live_calls: AtomicUsize::new(0),
        })
    }

    /// Live HTTP transport configured from `settings`.
    pub fn http(settings: LlmSettings, templates: PromptTemplates) -> Result<Self, PolicyError> {
        let transport = HttpTransport::new(&settings).map_err(|e| PolicyError::Network { attempts: 0, message: e.0 })?;
        Self::new(settings, templates, Box::new(transport))
    }

    /// Network exchanges performed so far (cache hits excluded).
    pub fn live_calls(&self) -> usize {
        self.live_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Returns the reply and whether it came from the cache.
    fn exchange(&self, messages: &[ChatMessage]) -> Result<(String, String, bool), PolicyError> {
        let model = &self.settings.model;
        let key = cache_key(model, messages);
        if let Some(hit) = self.cache.get(&key) {
            return Ok((key, hit, true));
        }
        let attempts = self.settings.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && self.settings.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.settings.backoff_ms << (attempt - 1).min(6)));
            }
            self.live_calls.fetch_add(1, Ordering::SeqCst);
            match self.gate.run(|| self.transport.complete(model, self.settings.temperature, messages)) {
                Ok(text) => {
                    self.cache.insert(key.clone(), model, messages, &text)?;
                    return Ok((key, text, false));
                }
                Err(e) => {
                    log::warn!("chat request attempt {} of {attempts} failed: {e}", attempt + 1);
                    last = e.0;
                }
            }
        }
        Err(PolicyError::Network { attempts, message: last })
    }
}

impl DecisionPolicy for LlmPolicy {
    fn identity(&self) -> String {
        format!("llm(model={},temperature={})", self.settings.model, self.settings.temperature)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn decide(&self, req: &DecisionRequest<'_>) -> Result<DecisionOutcome, PolicyError> {
        let prompt = render_prompt(req, &self.templates).map_err(|e| PolicyError::Template(e.to_string()))?;
        let wants_comment = matches!(req.context, InterventionContext::Commenting { .. });
        let mut messages = vec![ChatMessage::new("system", SYSTEM_MESSAGE), ChatMessage::new("user", prompt)];
        let mut keys = Vec::new();
        let mut all_cached = true;
        let mut raw = String::new();
        for attempt in 0..=self.settings.reask_limit {
            let (key, text, cached) = self.exchange(&messages)?;
            keys.push(key);
            all_cached &= cached;
            if let Some(p) = parse_response(&text) {
                return Ok(DecisionOutcome {
                    share: p.share,
                    comment: if wants_comment { p.comment } else { None },
                    rationale: p.reason,
                    raw_response: text,
                    source: if all_cached { OutcomeSource::LlmCache } else { OutcomeSource::LlmLive },
                    parse_failure: false,
                    transcript_keys: keys,
                });
            }
            raw = text.clone();
            if attempt < self.settings.reask_limit {
                messages.push(ChatMessage::new("assistant", text));
                messages.push(ChatMessage::new("user", REASK_MESSAGE));
            }
        }
        log::warn!("agent {} day {}: unparseable reply, defaulting to ignore", req.agent_id, req.day);
        Ok(DecisionOutcome {
            share: false,
            comment: None,
            rationale: None,
            raw_response: raw,
            source: if all_cached { OutcomeSource::LlmCache } else { OutcomeSource::LlmLive },
            parse_failure: true,
            transcript_keys: keys,
        })
    }
}
