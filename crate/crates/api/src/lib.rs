//! Request and response bodies of the session service.
//!
//! Routes:
//!
//! | method | path                      | body               | response          |
//! |--------|---------------------------|--------------------|-------------------|
//! | GET    | `/health`                 |                    | `Health`          |
//! | GET    | `/scripts`                |                    | `Vec<ScriptInfo>` |
//! | POST   | `/sessions`               | `CreateSession`    | `SessionCreated`  |
//! | GET    | `/sessions/{id}`          |                    | `Transcript`      |
//! | POST   | `/sessions/{id}/messages` | `PostMessage`      | `MessageReply`    |
//! | POST   | `/sessions/{id}/edit`     | `EditRequest`      | `EditResponse`    |
//! | POST   | `/turing`                 | `TuringRequest`    | `TuringResponse`  |
//!
//! Errors come back as `ErrorBody` with a 4xx/5xx status.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub use eliza_core::analysis::{Classification, CounterfactualOutcome, EditReplay};
pub use eliza_core::construction::MechanismConfig;
pub use eliza_core::engine::{QueueEntry, Role, Turn, TurnMeta, TurnType};
pub use eliza_core::Word;

/// Which side produces the reply shown to the user. Both always run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Engine,
    Construction,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Engine => "engine",
            Backend::Construction => "construction",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "engine" => Ok(Backend::Engine),
            "construction" => Ok(Backend::Construction),
            _ => Err(format!("unknown backend `{s}` (expected engine or construction)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptInfo {
    pub id: String,
    pub n_templates: usize,
    pub n_pretransforms: usize,
    pub vocab: Vec<Word>,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    /// Defaults to the script the service was started with.
    pub script_id: Option<String>,
    pub mechanism_config: MechanismConfig,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: Uuid,
    pub script_id: String,
    pub vocab: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostMessage {
    pub tokens: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub matched_template: String,
    pub turn_type: TurnType,
    /// Longest-matching-prefix state per input word.
    pub states: Vec<usize>,
    /// Lazy group label per input word.
    pub labels: Vec<usize>,
    pub rule_index: usize,
    pub queue: Vec<QueueEntry>,
    pub cycle_counts: BTreeMap<String, usize>,
    pub mechanism: MechanismConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub engine_reply: Vec<Word>,
    pub construction_reply: Option<Vec<Word>>,
    /// Set when the construction failed to produce a reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction_error: Option<String>,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageReply {
    /// Final reply of the session's backend.
    pub reply: Vec<Word>,
    /// Engine turns appended to the transcript, starting with the user turn.
    pub turns: Vec<Turn>,
    pub trace: Trace,
    pub divergence: Divergence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: Uuid,
    pub script_id: String,
    pub backend: Backend,
    pub mechanism_config: MechanismConfig,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    pub turn_index: usize,
    pub tokens: Vec<Word>,
}

/// The edited transcript is not stored; the session is unchanged.
pub type EditResponse = EditReplay;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuringRequest {
    pub fixture: String,
    pub tape: Vec<Word>,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuringResponse {
    pub steps: usize,
    /// One tape per generation cycle; the last is the halting tape.
    pub trace: Vec<Vec<Word>>,
    /// Eliza turns of the construction on the same input.
    pub construction_trace: Vec<Vec<Word>>,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
