use std::thread;
use std::time::{Duration, Instant};

use fairsumm_core::SummaryRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const API_KEY_ENV: &str = "FAIRSUMM_API_KEY";
pub const BASE_URL_ENV: &str = "FAIRSUMM_BASE_URL";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const CHAT_COMPLETIONS_PATH: &str = "/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    pub concurrency: usize,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            model: "gpt-3.5-turbo".to_string(),
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 60,
            retries: 3,
            backoff_ms: 500,
            concurrency: 4,
            api_key: None,
        }
    }
}

impl GenerationConfig {
    pub fn new(model: impl Into<String>) -> Self {
        GenerationConfig {
            model: model.into(),
            ..Default::default()
        }
    }

    /// Applies `FAIRSUMM_BASE_URL` and `FAIRSUMM_API_KEY` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(base) = std::env::var(BASE_URL_ENV) {
            if !base.trim().is_empty() {
                self.endpoint = format!("{}{CHAT_COMPLETIONS_PATH}", base.trim().trim_end_matches('/'));
            }
        }
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(HarnessError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(HarnessError::Config("max_tokens must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be at least 1".into()));
        }
        if self.model.is_empty() {
            return Err(HarnessError::Config("model name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub summary: SummaryRecord,
    /// Empty output; kept for auditing but left out of metric aggregation.
    pub excluded: bool,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
    pub attempts: u32,
}

/// Anything that turns a prompt into text. The sweep runner only needs this.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<Generation>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
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

enum Failure {
    Transient(String),
    Permanent(String),
}

pub struct HttpGenerator {
    config: GenerationConfig,
    agent: ureq::Agent,
}

impl HttpGenerator {
    pub fn new(config: GenerationConfig) -> Result<Self> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpGenerator { config, agent })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.config
    }

    fn attempt(&self, prompt: &str, temperature: f64) -> std::result::Result<(String, Option<Usage>), Failure> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_vec(&body).map_err(|e| Failure::Permanent(e.to_string()))?;
        let mut response = request
            .send(&payload[..])
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}: {}", truncate(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Permanent(format!("HTTP {status}: {}", truncate(&text))));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| Failure::Permanent(format!("malformed response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Failure::Permanent("response has no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        Ok((content, parsed.usage))
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, prompt: &str, temperature: f64) -> Result<Generation> {
        let start = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt, temperature) {
                Ok((text, usage)) => {
                    let excluded = text.trim().is_empty();
                    if excluded {
                        log::warn!("empty generation from {}; excluded from aggregation", self.config.model);
                    }
                    return Ok(Generation {
                        summary: SummaryRecord::new(self.config.model.clone(), text),
                        excluded,
                        latency_ms: start.elapsed().as_millis() as u64,
                        usage,
                        attempts,
                    });
                }
                Err(Failure::Permanent(message)) => return Err(HarnessError::Generation { attempts, message }),
                Err(Failure::Transient(message)) => {
                    if attempts > self.config.retries {
                        return Err(HarnessError::Generation { attempts, message });
                    }
                    let delay = self.config.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    log::debug!("attempt {attempts} failed ({message}); retrying in {delay} ms");
                    thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

/// One-shot request using the config's own temperature.
pub fn request_summary(prompt: &str, config: &GenerationConfig) -> Result<Generation> {
    HttpGenerator::new(config.clone())?.generate(prompt, config.temperature)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
