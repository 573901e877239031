//! One conversation held by the service. Runs the engine and the
//! construction side by side on every message.

use std::sync::Arc;

use eliza_api::{Backend, Divergence, EditResponse, MessageReply, Trace, Transcript};
use eliza_core::analysis;
use eliza_core::construction::{decode, MechanismConfig};
use eliza_core::engine::{self, DialogueState, Role, Turn};
use eliza_core::{Script, Word};
use uuid::Uuid;

use crate::error::ServiceError;

/// Token budget for one construction decode of the whole conversation.
pub const DECODE_BUDGET: usize = 8192;

pub struct Session {
    pub id: Uuid,
    pub script_id: String,
    pub script: Arc<Script>,
    pub cfg: MechanismConfig,
    pub backend: Backend,
    state: DialogueState,
    turns: Vec<Turn>,
}

/// Rejects empty inputs and words outside the script vocabulary.
pub fn validate_tokens(script: &Script, tokens: &[Word]) -> Result<(), ServiceError> {
    if tokens.is_empty() {
        return Err(ServiceError::BadRequest("empty input".into()));
    }
    let bad: Vec<&str> = tokens.iter().filter(|w| w.is_reserved() || !script.in_vocab(w)).map(Word::as_str).collect();
    if !bad.is_empty() {
        let vocab: Vec<&str> = script.vocab.iter().map(Word::as_str).collect();
        return Err(ServiceError::BadRequest(format!(
            "words not in vocabulary: {}; vocabulary is {}",
            bad.join(" "),
            vocab.join(" ")
        )));
    }
    Ok(())
}

impl Session {
    pub fn new(
        script_id: String,
        script: Arc<Script>,
        cfg: MechanismConfig,
        backend: Backend,
    ) -> Result<Self, ServiceError> {
        cfg.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(Session { id: Uuid::new_v4(), script_id, script, cfg, backend, state: DialogueState::new(), turns: Vec::new() })
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            session_id: self.id,
            script_id: self.script_id.clone(),
            backend: self.backend,
            mechanism_config: self.cfg.clone(),
            turns: self.turns.clone(),
        }
    }

    fn user_turns(&self) -> Vec<Vec<Word>> {
        self.turns.iter().filter(|t| t.role == Role::User).map(|t| t.tokens.clone()).collect()
    }

    /// Processes one user input. The session is left untouched on error.
    pub fn send(&mut self, tokens: Vec<Word>) -> Result<MessageReply, ServiceError> {
        validate_tokens(&self.script, &tokens)?;
        let (eliza, state) = engine::respond(&self.script, &self.state, &tokens)
            .map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let engine_reply = eliza.last().map(|t| t.tokens.clone()).unwrap_or_default();

        let mut inputs = self.user_turns();
        inputs.push(tokens.clone());
        let construction = decode(&self.cfg, &self.script, &inputs, DECODE_BUDGET).map(|d| {
            let last_user = d.turns.iter().rposition(|t| t.role == Role::User).unwrap_or(0);
            d.turns[last_user..].iter().rev().find(|t| t.role == Role::Eliza).map(|t| t.tokens.clone()).unwrap_or_default()
        });
        let reply = match (self.backend, &construction) {
            (Backend::Engine, _) => engine_reply.clone(),
            (Backend::Construction, Ok(r)) => r.clone(),
            (Backend::Construction, Err(e)) => return Err(ServiceError::Unprocessable(format!("construction: {e}"))),
        };
        let divergence = match construction {
            Ok(r) => Divergence { equal: r == engine_reply, engine_reply, construction_reply: Some(r), construction_error: None },
            Err(e) => Divergence {
                engine_reply,
                construction_reply: None,
                construction_error: Some(e.to_string()),
                equal: false,
            },
        };

        let start = self.turns.len();
        self.turns.push(Turn::user(tokens));
        self.turns.extend(eliza);
        self.state = state;
        let trace = self.trace();
        Ok(MessageReply { reply, turns: self.turns[start..].to_vec(), trace, divergence })
    }

    fn trace(&self) -> Trace {
        let last = self.turns.len() - 1;
        let meta = self.turns[last].meta.clone().expect("engine turns carry metadata");
        let (states, labels) = analysis::turn_decomposition(&self.script, &self.turns, last)
            .map(|(d, _)| (d.states.clone(), d.labels()))
            .unwrap_or_default();
        Trace {
            matched_template: meta.template_id,
            turn_type: meta.turn_type,
            states,
            labels,
            rule_index: meta.rule_index,
            queue: self.state.queue.iter().cloned().collect(),
            cycle_counts: self.state.cycle_counts.clone(),
            mechanism: self.cfg.clone(),
        }
    }

    pub fn edit(&self, turn_index: usize, tokens: Vec<Word>) -> Result<EditResponse, ServiceError> {
        if let Some(bad) = tokens.iter().find(|w| w.is_reserved() || !self.script.in_vocab(w)) {
            return Err(ServiceError::BadRequest(format!("word `{bad}` not in vocabulary")));
        }
        analysis::replay_edit(&self.script, &self.cfg, &self.turns, turn_index, tokens).map_err(|e| match e {
            analysis::AnalysisError::InvalidEdit(m) => ServiceError::BadRequest(m),
            other => ServiceError::Unprocessable(other.to_string()),
        })
    }
}
