//! Engine side of the external game bridge.
//!
//! The bridge is a subprocess speaking newline-delimited JSON on its stdin
//! and stdout. The engine sends `hello` first and must get a `hello` back
//! with the same protocol version before it sends any request.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CurriculumSpec, PerformanceReport};

pub const PROTOCOL_VERSION: &str = "evocurr-bridge/1";
/// Script format accepted by the bridge in place of the DSL.
pub const SCRIPT_FORMAT: &str = "python-sc2-script";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    /// The submitted script failed to load or raised; counts as a zero win rate.
    ScriptError,
    GameUnavailable,
    ProtocolError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BridgeMessage {
    Hello {
        version: String,
        format: String,
    },
    EvaluateRequest {
        curriculum: CurriculumSpec,
        script: String,
        episodes: u32,
        seed: u64,
    },
    EvaluateResult {
        report: PerformanceReport,
    },
    Error {
        category: ErrorCategory,
        message: String,
    },
    Shutdown,
}

impl BridgeMessage {
    pub fn hello() -> Self {
        BridgeMessage::Hello {
            version: PROTOCOL_VERSION.to_string(),
            format: SCRIPT_FORMAT.to_string(),
        }
    }

    /// One line of JSON, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("bridge message serializes")
    }

    pub fn decode(line: &str) -> Result<Self, BridgeError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| BridgeError::Protocol(format!("{e}: {}", line.trim())))
    }
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bridge i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("bridge protocol error: {0}")]
    Protocol(String),
    #[error("bridge speaks {found}, expected {PROTOCOL_VERSION}")]
    VersionMismatch { found: String },
    #[error("game unavailable: {0}")]
    GameUnavailable(String),
    #[error("bridge closed the stream")]
    Closed,
}

/// Drives a bridge over any reader/writer pair, typically a child's pipes.
pub struct BridgeClient<R, W> {
    reader: R,
    writer: W,
    negotiated: bool,
}

impl<R: BufRead, W: Write> BridgeClient<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            negotiated: false,
        }
    }

    fn send(&mut self, msg: &BridgeMessage) -> Result<(), BridgeError> {
        writeln!(self.writer, "{}", msg.encode())?;
        self.writer.flush()?;
        Ok(())
    }

    fn receive(&mut self) -> Result<BridgeMessage, BridgeError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(BridgeError::Closed);
        }
        BridgeMessage::decode(&line)
    }

    pub fn handshake(&mut self) -> Result<(), BridgeError> {
        self.send(&BridgeMessage::hello())?;
        match self.receive()? {
            BridgeMessage::Hello { version, .. } if version == PROTOCOL_VERSION => {
                self.negotiated = true;
                Ok(())
            }
            BridgeMessage::Hello { version, .. } => Err(BridgeError::VersionMismatch { found: version }),
            other => Err(BridgeError::Protocol(format!("expected hello, got {}", other.encode()))),
        }
    }

    /// Runs a script remotely. A script error comes back as a failed report
    /// with a zero win rate rather than as an error.
    pub fn evaluate(
        &mut self,
        curriculum: &CurriculumSpec,
        script: &str,
        episodes: u32,
        seed: u64,
    ) -> Result<PerformanceReport, BridgeError> {
        if !self.negotiated {
            self.handshake()?;
        }
        self.send(&BridgeMessage::EvaluateRequest {
            curriculum: curriculum.clone(),
            script: script.to_string(),
            episodes,
            seed,
        })?;
        match self.receive()? {
            BridgeMessage::EvaluateResult { report } => Ok(report),
            BridgeMessage::Error {
                category: ErrorCategory::ScriptError,
                message,
            } => Ok(PerformanceReport::failed(message)),
            BridgeMessage::Error {
                category: ErrorCategory::GameUnavailable,
                message,
            } => Err(BridgeError::GameUnavailable(message)),
            BridgeMessage::Error { message, .. } => Err(BridgeError::Protocol(message)),
            other => Err(BridgeError::Protocol(format!(
                "expected evaluate_result, got {}",
                other.encode()
            ))),
        }
    }

    pub fn shutdown(mut self) -> Result<(), BridgeError> {
        self.send(&BridgeMessage::Shutdown)
    }
}
