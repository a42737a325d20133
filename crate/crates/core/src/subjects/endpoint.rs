//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatSession, SessionError, SessionKey, SubjectFactory, Transcript};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "TULVING_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_backoff_ms() -> u64 {
    500
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: 0.0,
            max_retries: default_retries(),
            timeout_secs: default_timeout_secs(),
            initial_backoff_ms: default_backoff_ms(),
            api_key: None,
        }
    }

    /// Fills `api_key` from the environment when it is unset.
    pub fn with_env_key(mut self) -> Self {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(SessionError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.base_url.trim().is_empty() {
            return Err(SessionError::Config("base_url is empty".into()));
        }
        if self.model.trim().is_empty() {
            return Err(SessionError::Config("model is empty".into()));
        }
        Ok(())
    }

    fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Message {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

pub struct EndpointSession {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    messages: Vec<Message>,
    transcript: Transcript,
}

pub fn open_endpoint_session(cfg: EndpointConfig) -> Result<EndpointSession, SessionError> {
    cfg.validate()?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let digest = crate::digest::json_digest(&cfg);
    Ok(EndpointSession { cfg, agent, messages: Vec::new(), transcript: Transcript::new("endpoint", digest) })
}

impl EndpointSession {
    fn post_once(&self) -> Result<String, SessionError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": self.messages,
            "temperature": self.cfg.temperature,
        });
        let mut req = self.agent.post(self.cfg.completions_url());
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| SessionError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| SessionError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(SessionError::Http { status, body: text.chars().take(300).collect() });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| SessionError::Response(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| SessionError::Response("no choices in response".into()))
    }

    fn post_with_retries(&self) -> Result<String, SessionError> {
        let mut attempt = 0;
        loop {
            match self.post_once() {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < self.cfg.max_retries => {
                    let delay = self.cfg.initial_backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("chat request failed ({e}); retry {} in {delay} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl ChatSession for EndpointSession {
    fn send(&mut self, prompt: &str) -> Result<String, SessionError> {
        self.messages.push(Message { role: "user".into(), content: prompt.to_string() });
        match self.post_with_retries() {
            Ok(reply) => {
                self.messages.push(Message { role: "assistant".into(), content: reply.clone() });
                self.transcript.record(prompt, &reply);
                Ok(reply)
            }
            Err(e) => {
                self.messages.pop();
                Err(e)
            }
        }
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    fn into_transcript(self: Box<Self>) -> Transcript {
        self.transcript
    }
}

pub struct EndpointFactory {
    pub cfg: EndpointConfig,
}

impl SubjectFactory for EndpointFactory {
    fn kind(&self) -> &'static str {
        "endpoint"
    }

    fn config(&self) -> serde_json::Value {
        // api_key is #[serde(skip)]
        serde_json::to_value(&self.cfg).expect("endpoint config serializes")
    }

    fn open(&self, _key: SessionKey) -> Result<Box<dyn ChatSession>, SessionError> {
        Ok(Box::new(open_endpoint_session(self.cfg.clone())?))
    }
}
