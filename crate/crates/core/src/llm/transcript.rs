use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CallCounts, ChatRequest, Role};

/// One logged backend call; a line of `transcripts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTranscript {
    pub sequence: u64,
    pub role: Role,
    pub role_sequence: u64,
    pub request_digest: String,
    pub request: ChatRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub duration_ms: u64,
}

pub fn read_transcripts(path: &Path) -> Result<Vec<AgentTranscript>, BackendError> {
    let file = File::open(path)
        .map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BackendError::Fixture(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| {
            BackendError::Fixture(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(entry);
    }
    Ok(out)
}

struct RecorderState {
    next_sequence: u64,
    counts: CallCounts,
    entries: Vec<AgentTranscript>,
    sink: Option<File>,
}

/// Wraps a backend and logs every call it forwards.
pub struct Recorder {
    inner: Arc<dyn Backend>,
    state: Mutex<RecorderState>,
}

impl Recorder {
    /// Keeps the log in memory only.
    pub fn new(inner: Arc<dyn Backend>) -> Self {
        Self {
            inner,
            state: Mutex::new(RecorderState {
                next_sequence: 1,
                counts: CallCounts::default(),
                entries: Vec::new(),
                sink: None,
            }),
        }
    }

    /// Appends to `path`, continuing the sequence numbers already in it.
    pub fn with_log(inner: Arc<dyn Backend>, path: &Path) -> std::io::Result<Self> {
        let existing = if path.exists() {
            read_transcripts(path).map_err(|e| std::io::Error::other(e.to_string()))?
        } else {
            Vec::new()
        };
        let next_sequence = existing.iter().map(|e| e.sequence).max().unwrap_or(0) + 1;
        let sink = OpenOptions::new().create(true).append(true).open(path)?;
        let rec = Self::new(inner);
        {
            let mut st = rec.state.lock().expect("recorder lock");
            st.next_sequence = next_sequence;
            st.sink = Some(sink);
        }
        Ok(rec)
    }

    pub fn counts(&self) -> CallCounts {
        self.state.lock().expect("recorder lock").counts.clone()
    }

    /// Entries recorded by this recorder (not those already in the file).
    pub fn entries(&self) -> Vec<AgentTranscript> {
        self.state.lock().expect("recorder lock").entries.clone()
    }
}

impl Backend for Recorder {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let started = Instant::now();
        let result = self.inner.complete(request);
        let duration_ms = started.elapsed().as_millis() as u64;

        let mut st = self.state.lock().expect("recorder lock");
        let role_sequence = st.counts.bump(request.role);
        let entry = AgentTranscript {
            sequence: st.next_sequence,
            role: request.role,
            role_sequence,
            request_digest: request.digest(),
            request: request.clone(),
            reply: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
            duration_ms,
        };
        st.next_sequence += 1;
        if let Some(sink) = st.sink.as_mut() {
            let line = serde_json::to_string(&entry).expect("transcript serializes");
            writeln!(sink, "{line}")
                .and_then(|_| sink.flush())
                .map_err(|e| BackendError::Transport(format!("cannot write transcript: {e}")))?;
        }
        st.entries.push(entry);
        result
    }

    fn fast_forward(&self, consumed: &CallCounts) {
        self.inner.fast_forward(consumed);
        self.state.lock().expect("recorder lock").counts = consumed.clone();
    }
}

/// Reproduces a recorded run. Calls are matched by role and per-role
/// position; the request digest must match the recording.
#[derive(Debug)]
pub struct ReplayBackend {
    entries: BTreeMap<(Role, u64), AgentTranscript>,
    cursor: Mutex<CallCounts>,
}

impl ReplayBackend {
    /// Later entries win, so a call retried after an aborted session replays
    /// its final outcome.
    pub fn from_entries(entries: impl IntoIterator<Item = AgentTranscript>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| ((e.role, e.role_sequence), e))
                .collect(),
            cursor: Mutex::new(CallCounts::default()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::from_entries(read_transcripts(path)?))
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let position = cursor.get(request.role) + 1;
        let entry = self
            .entries
            .get(&(request.role, position))
            .ok_or(BackendError::FixtureExhausted {
                role: request.role,
                position,
            })?;
        let actual = request.digest();
        if entry.request_digest != actual {
            return Err(BackendError::ReplayMismatch {
                sequence: entry.sequence,
                role: request.role,
                expected: entry.request_digest.clone(),
                actual,
            });
        }
        cursor.set(request.role, position);
        match (&entry.reply, &entry.error) {
            (Some(reply), _) => Ok(reply.clone()),
            (None, Some(err)) => Err(BackendError::Transport(format!("recorded failure: {err}"))),
            (None, None) => Err(BackendError::MalformedReply("recorded call has no reply".into())),
        }
    }

    fn fast_forward(&self, consumed: &CallCounts) {
        *self.cursor.lock().expect("cursor lock") = consumed.clone();
    }
}
