//! Blocking client for OpenAI-compatible inference servers.
//!
//! Level probabilities, structuring and section selection go through
//! `/v1/completions`; leaf scoring goes through `/v1/rerank`. The task adapter
//! is selected by suffixing the model name: `{model}:{adapter_tag}`. Request
//! and response shapes are listed in `docs/providers.md`.

use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::prompts::Prompts;
use super::{LeafScorer, LevelProbabilityProvider, LevelProbs, Normalization, ProviderError, SectionSelector, Structurer};
use crate::doctree::Outline;
use crate::tokens::word_count;

pub const ENV_API_KEY: &str = "REFINER_API_KEY";
pub const ENV_ENDPOINT: &str = "REFINER_ENDPOINT";

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key: Option<String>,
    /// Per-attempt timeout; the whole call never exceeds
    /// `timeout * (max_retries + 1)`.
    pub timeout: Duration,
    pub max_retries: u32,
    pub adapter_tag: String,
    /// Structuring context window in words.
    pub context_window: usize,
    pub max_connections: usize,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    /// `k` requested from the structuring model.
    pub skip_k: usize,
    pub max_output_tokens: u32,
    pub top_logprobs: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://localhost:8000".into(),
            model_name: "refiner".into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 2,
            adapter_tag: String::new(),
            context_window: 24_000,
            max_connections: 8,
            backoff_base: Duration::from_millis(200),
            backoff_cap: Duration::from_secs(5),
            skip_k: 5,
            max_output_tokens: 8192,
            top_logprobs: 20,
        }
    }
}

impl ProviderConfig {
    /// Defaults overridden by `REFINER_ENDPOINT` and `REFINER_API_KEY`.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            c.endpoint_url = e;
        }
        c.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        c
    }

    pub fn with_adapter(&self, tag: &str) -> Self {
        Self { adapter_tag: tag.to_string(), ..self.clone() }
    }

    pub fn routed_model(&self) -> String {
        if self.adapter_tag.is_empty() {
            self.model_name.clone()
        } else {
            format!("{}:{}", self.model_name, self.adapter_tag)
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout.is_zero() {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        if self.endpoint_url.is_empty() {
            return Err(ProviderError::Config("endpoint is empty".into()));
        }
        Ok(())
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    prompts: Prompts,
    client: Client,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig, prompts: Prompts) -> Result<Self, ProviderError> {
        config.validate()?;
        let client =
            Client::builder().pool_max_idle_per_host(config.max_connections).build().map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self { config, prompts, client })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint_url.trim_end_matches('/'), path)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let exp = self.config.backoff_base.saturating_mul(2u32.saturating_pow(attempt));
        exp.min(self.config.backoff_cap).mul_f64(rand::rng().random_range(0.5..=1.0))
    }

    /// POSTs `body` with retries inside the overall deadline.
    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let url = self.url(path);
        let deadline = Instant::now() + self.config.timeout.saturating_mul(self.config.max_retries + 1);
        let mut attempt = 0;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(ProviderError::Timeout(self.config.timeout));
            }
            match self.send_once(&url, body, self.config.timeout.min(remaining)) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retriable() && attempt < self.config.max_retries => {
                    tracing::debug!(%url, attempt, error = %e, "retrying");
                    let wait = self.backoff(attempt).min(deadline.saturating_duration_since(Instant::now()));
                    thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send_once(&self, url: &str, body: &Value, timeout: Duration) -> Result<Value, ProviderError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp =
            req.send().map_err(
                |e| {
                    if e.is_timeout() {
                        ProviderError::Timeout(timeout)
                    } else {
                        ProviderError::Transport(e.to_string())
                    }
                },
            )?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            s if s.is_success() => serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(format!("invalid JSON: {e}"))),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(ProviderError::Auth(format!("{status}: {text}"))),
            s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => Err(ProviderError::Transport(format!("{status}: {text}"))),
            _ => Err(ProviderError::BadResponse(format!("{status}: {text}"))),
        }
    }

    fn complete(&self, prompt: &str, max_tokens: u32, logprobs: Option<u32>) -> Result<Value, ProviderError> {
        let mut body = json!({
            "model": self.config.routed_model(),
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": 0.0,
        });
        if let Some(n) = logprobs {
            body["logprobs"] = json!(n);
        }
        self.post("v1/completions", &body)
    }
}

fn completion_text(v: &Value) -> Result<&str, ProviderError> {
    v.pointer("/choices/0/text").and_then(Value::as_str).ok_or_else(|| ProviderError::BadResponse("missing choices[0].text".into()))
}

/// Sums the probabilities of first-token variants of the two level labels
/// (`Local`, ` [Local`, `local`, ...).
pub fn level_probs_from_response(v: &Value) -> Result<LevelProbs, ProviderError> {
    let top = v
        .pointer("/choices/0/logprobs/top_logprobs/0")
        .and_then(Value::as_object)
        .ok_or_else(|| ProviderError::BadResponse("missing choices[0].logprobs.top_logprobs[0]".into()))?;
    let (mut p_local, mut p_global, mut seen) = (0.0, 0.0, false);
    for (token, lp) in top {
        let Some(lp) = lp.as_f64() else { continue };
        let norm = token.trim().trim_start_matches(['[', '"', '{']).to_lowercase();
        if norm.starts_with("local") {
            p_local += lp.exp();
            seen = true;
        } else if norm.starts_with("global") {
            p_global += lp.exp();
            seen = true;
        }
    }
    if !seen {
        return Err(ProviderError::BadResponse("neither level token among top log-probabilities".into()));
    }
    Ok(LevelProbs { p_local: f64::min(p_local, 1.0), p_global: f64::min(p_global, 1.0) })
}

fn norm_title(t: &str) -> String {
    t.trim().to_lowercase()
}

/// Extracts selected titles from model output. Accepts a JSON array of
/// strings or one title per line / comma. Titles not in the outline are
/// dropped with a warning.
pub fn parse_selection(text: &str, outline: &Outline) -> Result<Vec<String>, ProviderError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let from_json = match (trimmed.find('['), trimmed.rfind(']')) {
        (Some(a), Some(b)) if a < b => serde_json::from_str::<Vec<String>>(&trimmed[a..=b]).ok(),
        _ => None,
    };
    let candidates: Vec<String> = from_json.unwrap_or_else(|| {
        trimmed
            .split(['\n', ',', ';'])
            .map(|s| s.trim().trim_start_matches(|c: char| c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ')'))
            .map(|s| s.trim().trim_matches(['"', '\'', '`']).trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    });
    if candidates.is_empty() {
        return Err(ProviderError::UnparseableSelection(trimmed.chars().take(200).collect()));
    }
    let mut out = Vec::new();
    for c in candidates {
        let n = norm_title(&c);
        let known = n == "abstract" || outline.titles.iter().any(|t| norm_title(t) == n);
        if !known {
            tracing::warn!(title = %c, "selector returned a title not in the outline; dropped");
        } else if !out.iter().any(|o: &String| norm_title(o) == n) {
            out.push(c);
        }
    }
    Ok(out)
}

pub fn rerank_scores(v: &Value, n: usize) -> Result<Vec<f64>, ProviderError> {
    let results = v.get("results").and_then(Value::as_array).ok_or_else(|| ProviderError::BadResponse("missing results".into()))?;
    let mut scores = vec![None; n];
    for r in results {
        let idx = r.get("index").and_then(Value::as_u64).map(|i| i as usize);
        let score = r.get("relevance_score").and_then(Value::as_f64);
        match (idx, score) {
            (Some(i), Some(s)) if i < n => scores[i] = Some(s),
            _ => return Err(ProviderError::BadResponse(format!("bad rerank entry: {r}"))),
        }
    }
    scores.into_iter().enumerate().map(|(i, s)| s.ok_or_else(|| ProviderError::BadResponse(format!("no score for document {i}")))).collect()
}

impl LevelProbabilityProvider for HttpProvider {
    fn level_probs(&self, query: &str) -> Result<LevelProbs, ProviderError> {
        let v = self.complete(&self.prompts.level_prompt(query), 1, Some(self.config.top_logprobs))?;
        level_probs_from_response(&v)
    }
}

impl Structurer for HttpProvider {
    fn structure(&self, text: &str) -> Result<String, ProviderError> {
        let tokens = word_count(text);
        if tokens > self.config.context_window {
            return Err(ProviderError::OversizeInput { tokens, window: self.config.context_window });
        }
        let v = self.complete(&self.prompts.structure_prompt(text, self.config.skip_k), self.config.max_output_tokens, None)?;
        completion_text(&v).map(str::to_string)
    }

    fn context_window(&self) -> usize {
        self.config.context_window
    }

    fn model_id(&self) -> String {
        self.config.routed_model()
    }
}

impl SectionSelector for HttpProvider {
    fn select(&self, query: &str, outline: &Outline) -> Result<Vec<String>, ProviderError> {
        if outline.titles.is_empty() && outline.abstract_text.is_empty() {
            return Ok(Vec::new());
        }
        let prompt = self.prompts.select_prompt(query, &outline.abstract_text, &outline.titles);
        let v = self.complete(&prompt, 256, None)?;
        parse_selection(completion_text(&v)?, outline)
    }
}

impl LeafScorer for HttpProvider {
    fn score(&self, query: &str, leaves: &[&str]) -> Result<Vec<f64>, ProviderError> {
        if leaves.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "model": self.config.routed_model(), "query": query, "documents": leaves });
        let v = self.post("v1/rerank", &body)?;
        rerank_scores(&v, leaves.len())
    }

    fn normalization(&self) -> Normalization {
        Normalization::Logistic
    }
}
