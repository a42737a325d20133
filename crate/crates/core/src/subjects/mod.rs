//! Chat "subjects": anything that answers prompts within a stateful session.

mod endpoint;
mod replay;
mod simulated;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use endpoint::{open_endpoint_session, EndpointConfig, EndpointFactory, EndpointSession, API_KEY_ENV};
pub use replay::{open_replay_session, ReplayFactory, ReplaySession};
pub use simulated::{
    open_simulated_session, LatentCategory, LatentTraceParams, SimulatedFactory, SimulatedProfile, SimulatedSession,
    DISTRACTORS,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("unparseable prompt: {0}")]
    Prompt(String),
    #[error("transcript exhausted after {0} exchanges")]
    Exhausted(usize),
    #[error("configuration: {0}")]
    Config(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: String, message: String },
}

impl SessionError {
    /// Transient failures worth retrying: transport errors, 408, 429 and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            SessionError::Transport(_) => true,
            SessionError::Http { status, .. } => *status == 408 || *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

/// Ordered prompt/response log of one session plus session metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub subject_kind: String,
    pub config_digest: String,
    pub started_at: String,
    #[serde(default)]
    pub finished_at: Option<String>,
    pub exchanges: Vec<Exchange>,
    /// Exchange indices where a replayed prompt differed from the recorded one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replay_mismatches: Vec<usize>,
}

impl Transcript {
    pub fn new(subject_kind: impl Into<String>, config_digest: impl Into<String>) -> Self {
        Transcript {
            subject_kind: subject_kind.into(),
            config_digest: config_digest.into(),
            started_at: now(),
            finished_at: None,
            exchanges: Vec::new(),
            replay_mismatches: Vec::new(),
        }
    }

    pub fn record(&mut self, prompt: &str, response: &str) {
        self.exchanges.push(Exchange { prompt: prompt.to_string(), response: response.to_string() });
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref();
        let err = |message: String| SessionError::Transcript { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("transcript serializes");
        std::fs::write(path, text)
    }
}

pub(crate) fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// A stateful chat. Each `send` sees every earlier prompt of the same session and nothing
/// from other sessions.
pub trait ChatSession: Send {
    fn send(&mut self, prompt: &str) -> Result<String, SessionError>;

    fn transcript(&self) -> &Transcript;

    fn into_transcript(self: Box<Self>) -> Transcript;
}

/// Identifies one batch session within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionKey {
    pub repetition: usize,
    pub batch: usize,
}

impl SessionKey {
    /// Relative path of this session's transcript inside a run directory.
    pub fn transcript_ref(&self) -> String {
        format!("transcripts/rep{:04}_batch{:03}.json", self.repetition, self.batch)
    }

    pub fn transcript_path(&self, run_dir: &Path) -> PathBuf {
        run_dir.join(self.transcript_ref())
    }
}

/// Opens a fresh session per batch.
pub trait SubjectFactory: Sync {
    fn kind(&self) -> &'static str;

    /// Configuration recorded in the run manifest. Never contains secrets.
    fn config(&self) -> serde_json::Value;

    fn config_digest(&self) -> String {
        crate::digest::json_digest(&self.config())
    }

    fn open(&self, key: SessionKey) -> Result<Box<dyn ChatSession>, SessionError>;
}
