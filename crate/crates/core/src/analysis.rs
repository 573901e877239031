//! Turn-level scoring, counterfactual edits of earlier responses, and the
//! copying-mechanism comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::program::{ConstructionError, Program, TraceRecord};
use crate::construction::MechanismConfig;
use crate::datagen::{max_repeated_ngram, rng_for, Conversation};
use crate::engine::{self, DialogueState, EngineError, Role, Turn, TurnMeta, TurnType};
use crate::script::{ReassemblyRule, Script, Template};
use crate::word::{Word, PERIOD};

/// Generation stops after this many tokens in one predicted turn.
pub const TURN_BUDGET: usize = 512;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("predictions do not join to dataset turns: {}", .0.join(", "))]
    Dangling(Vec<String>),
    #[error("duplicate prediction for conversation {0}, turn {1}")]
    Duplicate(usize, usize),
    #[error("conversation {0} not found")]
    UnknownConversation(usize),
    #[error("occurrence not found: {0}")]
    OccurrenceNotFound(String),
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub conversation_id: usize,
    pub turn_index: usize,
    pub tokens: Vec<Word>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub n: usize,
    pub full_correct: usize,
    pub prefix_correct: usize,
    pub full_accuracy: f64,
    pub prefix_accuracy: f64,
}

impl Bucket {
    fn add(&mut self, full: bool, prefix: bool) {
        self.n += 1;
        self.full_correct += usize::from(full);
        self.prefix_correct += usize::from(prefix);
        self.full_accuracy = self.full_correct as f64 / self.n as f64;
        self.prefix_accuracy = self.prefix_correct as f64 / self.n as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Bucket,
    pub by_turn_type: BTreeMap<String, Bucket>,
    /// Axis name → bucket value → accuracy.
    pub correlates: BTreeMap<String, BTreeMap<usize, Bucket>>,
}

/// Equal first two words (the rule prefix).
pub fn prefix_match(predicted: &[Word], gold: &[Word]) -> bool {
    gold.len() >= 2 && predicted.len() >= 2 && predicted[..2] == gold[..2]
}

/// Queue operations (enqueues + dequeues) and enqueues strictly before each
/// turn.
fn queue_history(turns: &[Turn]) -> Vec<(usize, usize)> {
    let (mut ops, mut enq) = (0, 0);
    turns
        .iter()
        .map(|t| {
            let here = (ops, enq);
            if let Some(m) = &t.meta {
                if m.enqueue {
                    ops += 1;
                    enq += 1;
                }
                if m.dequeue_target.is_some() {
                    ops += 1;
                }
            }
            here
        })
        .collect()
}

pub fn score(dataset: &[Conversation], predictions: &[PredictionRecord]) -> Result<MetricsReport, AnalysisError> {
    let by_id: HashMap<usize, &Conversation> = dataset.iter().map(|c| (c.id, c)).collect();
    let mut seen = BTreeSet::new();
    let mut dangling = Vec::new();
    let mut joined = Vec::new();
    for p in predictions {
        if !seen.insert((p.conversation_id, p.turn_index)) {
            return Err(AnalysisError::Duplicate(p.conversation_id, p.turn_index));
        }
        match by_id.get(&p.conversation_id).and_then(|c| c.turns.get(p.turn_index).map(|t| (c, t))) {
            Some((c, t)) if t.role == Role::Eliza && t.meta.is_some() => joined.push((c, p)),
            _ => dangling.push(format!("{}:{}", p.conversation_id, p.turn_index)),
        }
    }
    if !dangling.is_empty() {
        return Err(AnalysisError::Dangling(dangling));
    }
    let mut report = MetricsReport::default();
    let mut history: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (c, p) in joined {
        let gold = &c.turns[p.turn_index];
        let meta = gold.meta.as_ref().expect("joined turns carry metadata");
        let full = p.tokens == gold.tokens;
        let prefix = prefix_match(&p.tokens, &gold.tokens);
        report.overall.add(full, prefix);
        report.by_turn_type.entry(meta.turn_type.as_str().to_string()).or_default().add(full, prefix);
        let (ops, enq) = history.entry(c.id).or_insert_with(|| queue_history(&c.turns))[p.turn_index];
        let mut axis = |name: &str, v: usize| {
            report.correlates.entry(name.to_string()).or_default().entry(v).or_default().add(full, prefix);
        };
        axis("copy_len", meta.copy_len);
        axis("n_copy_segments", meta.n_copy_segments);
        axis("queue_ops", ops);
        if let Some(d) = meta.distance {
            axis("dequeue_distance", d);
        }
        if meta.dequeue_target.is_some() || meta.turn_type == TurnType::NullTemplate {
            axis("enqueues_before_null", enq);
        }
    }
    Ok(report)
}

/// The gold Eliza turns of a dataset as predictions.
pub fn gold_predictions(dataset: &[Conversation]) -> Vec<PredictionRecord> {
    dataset
        .iter()
        .flat_map(|c| {
            c.turns.iter().enumerate().filter(|(_, t)| t.role == Role::Eliza).map(|(i, t)| PredictionRecord {
                conversation_id: c.id,
                turn_index: i,
                tokens: t.tokens.clone(),
            })
        })
        .collect()
}

fn push_turn(p: &mut Program, t: &Turn) -> Result<(), ConstructionError> {
    p.push(match t.role {
        Role::User => Word::user(),
        Role::Eliza => Word::eliza(),
    })?;
    for w in &t.tokens {
        p.push(w.clone())?;
    }
    p.push(Word::period())
}

/// Greedily generates one Eliza turn after the current context, which must
/// end with `e:`. The generated tokens are left in the program.
fn generate_turn(p: &mut Program) -> Result<Vec<Word>, ConstructionError> {
    let mut out = Vec::new();
    for _ in 0..TURN_BUDGET {
        let (tok, _) = p.predict()?;
        p.push(tok.clone())?;
        if tok == PERIOD {
            return Ok(out);
        }
        out.push(tok);
    }
    Err(ConstructionError::Budget(TURN_BUDGET))
}

/// Teacher-forced predictions of the construction for every Eliza turn: the
/// context is the gold transcript up to the turn's delimiter.
pub fn construction_predictions(
    script: &Script,
    cfg: &MechanismConfig,
    conv: &Conversation,
) -> Result<Vec<PredictionRecord>, ConstructionError> {
    let mut p = Program::new(cfg, script)?;
    p.push(Word::bos())?;
    let mut out = Vec::new();
    for (i, t) in conv.turns.iter().enumerate() {
        if t.role == Role::Eliza {
            let mark = p.len();
            p.push(Word::eliza())?;
            let tokens = generate_turn(&mut p)?;
            out.push(PredictionRecord { conversation_id: conv.id, turn_index: i, tokens });
            p.truncate(mark);
        }
        push_turn(&mut p, t)?;
    }
    Ok(out)
}

pub fn construction_predictions_all(
    script: &Script,
    cfg: &MechanismConfig,
    dataset: &[Conversation],
) -> Result<Vec<PredictionRecord>, ConstructionError> {
    let per: Vec<Vec<PredictionRecord>> =
        dataset.par_iter().map(|c| construction_predictions(script, cfg, c)).collect::<Result<_, _>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Continuation of the construction after `turns` (ending with a user turn).
pub fn continue_after(script: &Script, cfg: &MechanismConfig, turns: &[Turn]) -> Result<Vec<Word>, ConstructionError> {
    let mut p = Program::new(cfg, script)?;
    p.push(Word::bos())?;
    for t in turns {
        push_turn(&mut p, t)?;
    }
    p.push(Word::eliza())?;
    generate_turn(&mut p)
}

/// The decomposition and rule behind Eliza turn `k` of an engine transcript.
pub fn turn_decomposition<'s>(
    script: &'s Script,
    turns: &[Turn],
    k: usize,
) -> Option<(engine::Decomposition, Option<&'s ReassemblyRule>)> {
    let meta = turns.get(k)?.meta.as_ref()?;
    let input = match meta.dequeue_target {
        Some(t) => script.translate(&turns.get(t)?.tokens),
        None => source_input(script, turns, k),
    };
    let (template, rule): (&Template, Option<&ReassemblyRule>) = if meta.turn_type == TurnType::Pretransform {
        let p = script.pretransforms.get(meta.rule_index)?;
        (&p.template, Some(&p.rule))
    } else if meta.dequeue_target.is_some() {
        let mem = script.memory.as_ref()?;
        (script.template(&mem.template_id)?, mem.dequeue_rules.get(meta.rule_index))
    } else {
        (script.template(&meta.template_id)?, script.rules_for(&meta.template_id).get(meta.rule_index))
    };
    Some((engine::decompose(template, &input)?, rule))
}

/// Whether some copied group of Eliza turn `k` repeats a 2-gram.
pub fn has_repeated_2gram(script: &Script, turns: &[Turn], k: usize) -> bool {
    match turn_decomposition(script, turns, k) {
        Some((d, Some(rule))) => rule.group_refs().any(|g| max_repeated_ngram(d.group(g), 2) >= 2),
        _ => false,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub turns: usize,
    pub mismatches: usize,
}

impl Tally {
    fn add(&mut self, mismatch: bool) {
        self.turns += 1;
        self.mismatches += usize::from(mismatch);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub conversation_id: usize,
    pub turn_index: usize,
    pub gold: Vec<Word>,
    pub predicted: Vec<Word>,
    /// First differing token within the turn.
    pub position: usize,
    /// The construction's record for that token.
    pub trace: Option<TraceRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_conversations: usize,
    pub overall: Tally,
    pub by_turn_type: BTreeMap<String, Tally>,
    pub ambiguous: Tally,
    pub repeated_2gram: Tally,
    pub first_divergences: Vec<Divergence>,
}

/// Teacher-forced diff of the construction against the gold transcripts.
/// Keeps the first divergence of up to `max_traces` conversations.
pub fn verify(
    script: &Script,
    cfg: &MechanismConfig,
    dataset: &[Conversation],
    max_traces: usize,
) -> Result<VerifyReport, ConstructionError> {
    let preds = construction_predictions_all(script, cfg, dataset)?;
    let by_key: HashMap<(usize, usize), &PredictionRecord> =
        preds.iter().map(|p| ((p.conversation_id, p.turn_index), p)).collect();
    let mut r = VerifyReport { n_conversations: dataset.len(), ..Default::default() };
    for c in dataset {
        let mut traced = false;
        for (k, t) in c.turns.iter().enumerate() {
            let Some(meta) = t.meta.as_ref() else { continue };
            let predicted = &by_key[&(c.id, k)].tokens;
            let bad = *predicted != t.tokens;
            r.overall.add(bad);
            r.by_turn_type.entry(meta.turn_type.as_str().to_string()).or_default().add(bad);
            if meta.ambiguous {
                r.ambiguous.add(bad);
            }
            if has_repeated_2gram(script, &c.turns, k) {
                r.repeated_2gram.add(bad);
            }
            if bad && !traced && r.first_divergences.len() < max_traces {
                traced = true;
                r.first_divergences.push(divergence(script, cfg, c, k, predicted)?);
            }
        }
    }
    Ok(r)
}

fn divergence(
    script: &Script,
    cfg: &MechanismConfig,
    c: &Conversation,
    k: usize,
    predicted: &[Word],
) -> Result<Divergence, ConstructionError> {
    let gold = &c.turns[k].tokens;
    let position = gold.iter().zip(predicted).take_while(|(a, b)| a == b).count();
    let mut p = Program::new(cfg, script)?;
    p.push(Word::bos())?;
    for t in &c.turns[..k] {
        push_turn(&mut p, t)?;
    }
    p.push(Word::eliza())?;
    for w in &gold[..position] {
        p.push(w.clone())?;
    }
    let trace = p.predict().ok().map(|(_, rec)| rec);
    Ok(Divergence {
        conversation_id: c.id,
        turn_index: k,
        gold: gold.clone(),
        predicted: predicted.to_vec(),
        position,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Counterfactuals

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    CycleEdit,
    MemoryEdit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Same,
    Increment,
    Decrement,
    Neither,
}

/// One counterfactual request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EditSpec {
    CycleEdit { conversation_id: usize, template_id: String, occurrence: usize, new_rule: usize },
    MemoryEdit { conversation_id: usize, dequeue: usize },
}

impl EditSpec {
    pub fn kind(&self) -> EditKind {
        match self {
            EditSpec::CycleEdit { .. } => EditKind::CycleEdit,
            EditSpec::MemoryEdit { .. } => EditKind::MemoryEdit,
        }
    }

    pub fn conversation_id(&self) -> usize {
        match self {
            EditSpec::CycleEdit { conversation_id, .. } | EditSpec::MemoryEdit { conversation_id, .. } => {
                *conversation_id
            }
        }
    }
}

/// An edited context and the continuations each hypothesis predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: EditKind,
    /// Transcript up to and including the user turn whose response is probed.
    pub context: Vec<Turn>,
    pub edited_turn: usize,
    pub same: Vec<Word>,
    /// Increment for cycle edits, Decrement for memory edits.
    pub alternative: Vec<Word>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualOutcome {
    pub kind: EditKind,
    pub classification: Classification,
    pub full_match: bool,
    pub prefix_match: bool,
}

/// The input an Eliza turn responded to.
fn source_input(script: &Script, turns: &[Turn], eliza_index: usize) -> Vec<Word> {
    let prev = &turns[eliza_index - 1];
    match prev.role {
        Role::User => script.translate(&prev.tokens),
        Role::Eliza => prev.tokens.clone(),
    }
}

fn is_cycle_occurrence(m: &TurnMeta, template_id: &str) -> bool {
    m.template_id == template_id && m.dequeue_target.is_none() && m.turn_type != TurnType::Pretransform
}

fn cycle_occurrences(conv: &Conversation, template_id: &str) -> Vec<usize> {
    conv.turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.meta.as_ref().is_some_and(|m| is_cycle_occurrence(m, template_id)))
        .map(|(i, _)| i)
        .collect()
}

fn dequeue_turns(conv: &Conversation) -> Vec<usize> {
    conv.turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.meta.as_ref().is_some_and(|m| m.dequeue_target.is_some()))
        .map(|(i, _)| i)
        .collect()
}

fn realize(script: &Script, template_id: &str, input: &[Word], rule: &crate::script::ReassemblyRule) -> Vec<Word> {
    let t = script.template(template_id).expect("template from script");
    let d = engine::decompose(t, input).expect("gold input matches its template");
    engine::reassemble(&d, rule)
}

/// Replaces occurrence `i` of `t` with rule `j`; the probe is occurrence
/// `i + 1`. Same continues the gold cycle, Increment continues from `j`.
pub fn edit_cycle(
    script: &Script,
    conv: &Conversation,
    template_id: &str,
    i: usize,
    j: usize,
) -> Result<Edit, AnalysisError> {
    let occ = cycle_occurrences(conv, template_id);
    let (Some(&at), Some(&probe)) = (occ.get(i), occ.get(i + 1)) else {
        return Err(AnalysisError::OccurrenceNotFound(format!(
            "template {template_id} occurs {} times in conversation {}, need {}",
            occ.len(),
            conv.id,
            i + 2
        )));
    };
    let rules = script.rules_for(template_id);
    let gold = conv.turns[at].meta.as_ref().expect("occurrence has metadata").rule_index;
    if j == gold {
        return Err(AnalysisError::InvalidEdit(format!("rule {j} is already the gold rule")));
    }
    if j >= rules.len() {
        return Err(AnalysisError::InvalidEdit(format!("template {template_id} has {} rules", rules.len())));
    }
    let m = rules.len();
    let mut context = conv.turns[..probe].to_vec();
    context[at].tokens = realize(script, template_id, &source_input(script, &conv.turns, at), &rules[j]);
    let probe_input = source_input(script, &conv.turns, probe);
    Ok(Edit {
        kind: EditKind::CycleEdit,
        context,
        edited_turn: at,
        same: realize(script, template_id, &probe_input, &rules[(gold + 1) % m]),
        alternative: realize(script, template_id, &probe_input, &rules[(j + 1) % m]),
    })
}

/// Replaces dequeue `i` with the null response the engine would have given;
/// the probe is dequeue `i + 1`. Same reads memory `i + 1`, Decrement re-reads
/// memory `i`.
pub fn edit_memory(script: &Script, conv: &Conversation, i: usize) -> Result<Edit, AnalysisError> {
    let deq = dequeue_turns(conv);
    let (Some(&at), Some(&probe)) = (deq.get(i), deq.get(i + 1)) else {
        return Err(AnalysisError::OccurrenceNotFound(format!(
            "conversation {} has {} dequeues, need {}",
            conv.id,
            deq.len(),
            i + 2
        )));
    };
    let mem = script.memory.as_ref().ok_or_else(|| AnalysisError::InvalidEdit("script has no memory".into()))?;
    let null_id =
        script.null_template_id.clone().ok_or_else(|| AnalysisError::InvalidEdit("script has no null template".into()))?;
    // Engine state just before the edited turn, to pick the null rule.
    let mut st = DialogueState::new();
    for t in conv.turns[..at].iter().filter(|t| t.role == Role::User) {
        st = engine::respond(script, &st, &t.tokens)?.1;
    }
    let null_rules = script.rules_for(&null_id);
    let null_rule = &null_rules[st.null_cycle_count % null_rules.len()];
    let mut context = conv.turns[..probe].to_vec();
    context[at].tokens = realize(script, &null_id, &source_input(script, &conv.turns, at), null_rule);

    let memory_input = |k: usize| -> Vec<Word> {
        let target = conv.turns[deq[k]].meta.as_ref().and_then(|m| m.dequeue_target).expect("dequeue target");
        script.translate(&conv.turns[target].tokens)
    };
    let md = mem.dequeue_rules.len();
    let probe_rule = conv.turns[probe].meta.as_ref().expect("metadata").rule_index;
    Ok(Edit {
        kind: EditKind::MemoryEdit,
        context,
        edited_turn: at,
        same: realize(script, &mem.template_id, &memory_input(i + 1), &mem.dequeue_rules[probe_rule]),
        alternative: realize(script, &mem.template_id, &memory_input(i), &mem.dequeue_rules[(probe_rule + md - 1) % md]),
    })
}

pub fn apply_edit(script: &Script, dataset: &[Conversation], spec: &EditSpec) -> Result<Edit, AnalysisError> {
    let conv = dataset
        .iter()
        .find(|c| c.id == spec.conversation_id())
        .ok_or(AnalysisError::UnknownConversation(spec.conversation_id()))?;
    match spec {
        EditSpec::CycleEdit { template_id, occurrence, new_rule, .. } => {
            edit_cycle(script, conv, template_id, *occurrence, *new_rule)
        }
        EditSpec::MemoryEdit { dequeue, .. } => edit_memory(script, conv, *dequeue),
    }
}

pub fn classify(tokens: &[Word], edit: &Edit) -> CounterfactualOutcome {
    let alt = match edit.kind {
        EditKind::CycleEdit => Classification::Increment,
        EditKind::MemoryEdit => Classification::Decrement,
    };
    let (classification, candidate) = if prefix_match(tokens, &edit.same) {
        (Classification::Same, Some(&edit.same))
    } else if prefix_match(tokens, &edit.alternative) {
        (alt, Some(&edit.alternative))
    } else {
        (Classification::Neither, None)
    };
    CounterfactualOutcome {
        kind: edit.kind,
        classification,
        full_match: candidate.is_some_and(|c| c.as_slice() == tokens),
        prefix_match: candidate.is_some(),
    }
}

/// Every valid edit of `kind` in the dataset. Cycle edits cover non-null
/// templates with at least two rules.
pub fn enumerate_edits(script: &Script, dataset: &[Conversation], kind: EditKind) -> Vec<EditSpec> {
    let mut out = Vec::new();
    for c in dataset {
        match kind {
            EditKind::CycleEdit => {
                for t in &script.templates {
                    let m = script.rules_for(&t.id).len();
                    if Some(&t.id) == script.null_template_id.as_ref() || m < 2 {
                        continue;
                    }
                    let occ = cycle_occurrences(c, &t.id);
                    for (i, &at) in occ.iter().enumerate().take(occ.len().saturating_sub(1)) {
                        let gold = c.turns[at].meta.as_ref().expect("metadata").rule_index;
                        out.extend((0..m).filter(|&j| j != gold).map(|j| EditSpec::CycleEdit {
                            conversation_id: c.id,
                            template_id: t.id.clone(),
                            occurrence: i,
                            new_rule: j,
                        }));
                    }
                }
            }
            EditKind::MemoryEdit => {
                let n = dequeue_turns(c).len();
                out.extend((0..n.saturating_sub(1)).map(|i| EditSpec::MemoryEdit { conversation_id: c.id, dequeue: i }));
            }
        }
    }
    out
}

/// `n` edits drawn uniformly without replacement from all valid edits.
pub fn sample_edits(script: &Script, dataset: &[Conversation], kind: EditKind, n: usize, seed: u64) -> Vec<EditSpec> {
    let all = enumerate_edits(script, dataset, kind);
    let mut rng = rng_for(seed, 0);
    let mut picks = index::sample(&mut rng, all.len(), n.min(all.len())).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| all[i].clone()).collect()
}

pub fn run_edit(
    script: &Script,
    cfg: &MechanismConfig,
    dataset: &[Conversation],
    spec: &EditSpec,
) -> Result<(Vec<Word>, CounterfactualOutcome), AnalysisError> {
    let edit = apply_edit(script, dataset, spec)?;
    let tokens = continue_after(script, cfg, &edit.context)?;
    let outcome = classify(&tokens, &edit);
    Ok((tokens, outcome))
}

/// Result of editing one Eliza turn of a live transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditReplay {
    /// The whole transcript with the edit applied and later Eliza turns
    /// regenerated by the construction.
    pub turns: Vec<Turn>,
    /// Indices of regenerated turns whose tokens changed.
    pub changed: Vec<usize>,
    /// Present when the edit has the shape of a cycle or memory edit and a
    /// later turn probes it.
    pub outcome: Option<CounterfactualOutcome>,
}

/// Replaces Eliza turn `turn_index` with `tokens` and re-decodes everything
/// after it. `turns` must be an engine transcript (with metadata).
pub fn replay_edit(
    script: &Script,
    cfg: &MechanismConfig,
    turns: &[Turn],
    turn_index: usize,
    tokens: Vec<Word>,
) -> Result<EditReplay, AnalysisError> {
    match turns.get(turn_index) {
        Some(t) if t.role == Role::Eliza => {}
        Some(_) => return Err(AnalysisError::InvalidEdit(format!("turn {turn_index} is not an Eliza turn"))),
        None => return Err(AnalysisError::InvalidEdit(format!("transcript has {} turns", turns.len()))),
    }
    let conv = Conversation { id: 0, seed: 0, turns: turns.to_vec(), repeats: None };
    let outcome = match detect_edit(script, &conv, turn_index, &tokens) {
        Some(edit) => Some(classify(&continue_after(script, cfg, &edit.context)?, &edit)),
        None => None,
    };

    let mut edited = turns.to_vec();
    edited[turn_index].tokens = tokens;
    let mut p = Program::new(cfg, script)?;
    p.push(Word::bos())?;
    for t in &edited[..=turn_index] {
        push_turn(&mut p, t)?;
    }
    let mut changed = Vec::new();
    for (k, turn) in edited.iter_mut().enumerate().skip(turn_index + 1) {
        if turn.role == Role::User {
            push_turn(&mut p, turn)?;
            continue;
        }
        p.push(Word::eliza())?;
        let regenerated = generate_turn(&mut p)?;
        if regenerated != turn.tokens {
            changed.push(k);
            turn.tokens = regenerated;
        }
    }
    Ok(EditReplay { turns: edited, changed, outcome })
}

/// Recognizes an edit that swaps a cycling response for another rule of the
/// same template, or a dequeue for the null response.
fn detect_edit(script: &Script, conv: &Conversation, at: usize, tokens: &[Word]) -> Option<Edit> {
    let meta = conv.turns[at].meta.as_ref()?;
    if is_cycle_occurrence(meta, &meta.template_id) {
        let input = source_input(script, &conv.turns, at);
        let j = script
            .rules_for(&meta.template_id)
            .iter()
            .position(|r| realize(script, &meta.template_id, &input, r) == tokens)?;
        let i = cycle_occurrences(conv, &meta.template_id).iter().position(|&k| k == at)?;
        return edit_cycle(script, conv, &meta.template_id, i, j).ok();
    }
    if meta.dequeue_target.is_some() {
        let i = dequeue_turns(conv).iter().position(|&k| k == at)?;
        let edit = edit_memory(script, conv, i).ok()?;
        return (edit.context[at].tokens == tokens).then_some(edit);
    }
    None
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualSummary {
    pub n: usize,
    pub counts: BTreeMap<Classification, usize>,
    pub full_match: usize,
}

pub fn summarize(outcomes: &[CounterfactualOutcome]) -> CounterfactualSummary {
    let mut s = CounterfactualSummary { n: outcomes.len(), ..Default::default() };
    for o in outcomes {
        *s.counts.entry(o.classification).or_default() += 1;
        s.full_match += usize::from(o.full_match);
    }
    s
}

// ---------------------------------------------------------------------------
// Copying mechanisms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub mechanism: String,
    pub alpha: f64,
    pub overall: Bucket,
    /// Turns where no copied group repeats a 2-gram, and the rest.
    pub no_repeated_2gram: Bucket,
    pub repeated_2gram: Bucket,
    /// Keyed by the longest repeated n-gram over the copied groups.
    pub by_max_repeat: BTreeMap<usize, Bucket>,
}

/// Scores each mechanism config on each copy eval set (`(alpha, script,
/// conversations)`).
pub fn mechanism_matrix(
    sets: &[(f64, &Script, &[Conversation])],
    mechanisms: &[MechanismConfig],
) -> Result<Vec<MatrixCell>, AnalysisError> {
    let mut out = Vec::new();
    for cfg in mechanisms {
        for &(alpha, script, convs) in sets {
            let preds = construction_predictions_all(script, cfg, convs)?;
            let by_id: HashMap<usize, &Conversation> = convs.iter().map(|c| (c.id, c)).collect();
            let mut cell = MatrixCell {
                mechanism: cfg.copying.to_string(),
                alpha,
                overall: Bucket::default(),
                no_repeated_2gram: Bucket::default(),
                repeated_2gram: Bucket::default(),
                by_max_repeat: BTreeMap::new(),
            };
            for p in &preds {
                let c = by_id[&p.conversation_id];
                let gold = &c.turns[p.turn_index].tokens;
                let (full, prefix) = (&p.tokens == gold, prefix_match(&p.tokens, gold));
                let rep = c.repeats.as_ref().and_then(|r| r.iter().max().copied()).unwrap_or(0);
                cell.overall.add(full, prefix);
                cell.by_max_repeat.entry(rep).or_default().add(full, prefix);
                if rep >= 2 { &mut cell.repeated_2gram } else { &mut cell.no_repeated_2gram }.add(full, prefix);
            }
            out.push(cell);
        }
    }
    Ok(out)
}
