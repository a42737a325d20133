use std::path::PathBuf;

use super::{ChatSession, SessionError, SessionKey, SubjectFactory, Transcript};

/// Answers each prompt with the next recorded response. Prompts that differ from the
/// recording are answered anyway and flagged in `replay_mismatches`.
pub struct ReplaySession {
    recorded: Vec<super::Exchange>,
    cursor: usize,
    transcript: Transcript,
}

pub fn open_replay_session(t: Transcript) -> ReplaySession {
    let digest = crate::digest::json_digest(&t.exchanges);
    ReplaySession { recorded: t.exchanges, cursor: 0, transcript: Transcript::new("replay", digest) }
}

impl ChatSession for ReplaySession {
    fn send(&mut self, prompt: &str) -> Result<String, SessionError> {
        let Some(ex) = self.recorded.get(self.cursor) else {
            return Err(SessionError::Exhausted(self.recorded.len()));
        };
        if ex.prompt != prompt {
            log::warn!("replay prompt mismatch at exchange {}", self.cursor);
            self.transcript.replay_mismatches.push(self.cursor);
        }
        let response = ex.response.clone();
        self.cursor += 1;
        self.transcript.record(prompt, &response);
        Ok(response)
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    fn into_transcript(self: Box<Self>) -> Transcript {
        self.transcript
    }
}

/// Replays the transcripts of an earlier run directory, one per session key.
pub struct ReplayFactory {
    pub run_dir: PathBuf,
}

impl SubjectFactory for ReplayFactory {
    fn kind(&self) -> &'static str {
        "replay"
    }

    fn config(&self) -> serde_json::Value {
        serde_json::json!({ "run_dir": self.run_dir.display().to_string() })
    }

    fn open(&self, key: SessionKey) -> Result<Box<dyn ChatSession>, SessionError> {
        let t = Transcript::load(key.transcript_path(&self.run_dir))?;
        Ok(Box::new(open_replay_session(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recorded() -> Transcript {
        let mut t = Transcript::new("endpoint", "abc");
        t.record("one", "1");
        t.record("two", "2");
        t.record("three", "3");
        t
    }

    #[test]
    fn replays_verbatim_then_exhausts() {
        let mut s = open_replay_session(recorded());
        assert_eq!(s.send("one").unwrap(), "1");
        assert_eq!(s.send("two").unwrap(), "2");
        assert_eq!(s.send("three").unwrap(), "3");
        assert!(s.transcript().replay_mismatches.is_empty());
        let err = s.send("four").unwrap_err();
        assert!(matches!(err, SessionError::Exhausted(3)));
        assert!(err.to_string().contains("transcript exhausted"));
    }

    #[test]
    fn tolerates_prompt_changes() {
        let mut s = open_replay_session(recorded());
        assert_eq!(s.send("one").unwrap(), "1");
        assert_eq!(s.send("TWO, reworded").unwrap(), "2");
        assert_eq!(s.transcript().replay_mismatches, vec![1]);
    }
}
