//! Reference ELIZA interpreter.
//!
//! Matching uses lazy-leftmost wildcard semantics: every `0` consumes as few
//! words as possible, resolved left to right. The longest-matching-prefix
//! `states` are computed separately; they are what the attention
//! construction sees, and they disagree with the lazy groups on some inputs.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::script::{Atom, NullCycleMode, PretransformTarget, ReassemblyRule, RuleElement, Script, Template};
use crate::word::Word;

/// Upper bound on pretransform re-dispatches inside one conversation turn.
pub const MAX_CHAIN: usize = 4096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("no template matches `{0}` and the script has no null template")]
    NoMatch(String),
    #[error("pretransform chain exceeded {0} steps")]
    ChainBudget(usize),
}

/// Half-open span of word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub template_id: String,
    pub tokens: Vec<Word>,
    /// Longest-matching-prefix label (1-based symbol index) per word.
    pub states: Vec<usize>,
    /// Lazy-leftmost span of every template symbol, literals included.
    pub spans: Vec<Span>,
    pub ambiguous: bool,
}

impl Decomposition {
    /// Words bound to the 1-based symbol `k`.
    pub fn group(&self, k: usize) -> &[Word] {
        let s = self.spans[k - 1];
        &self.tokens[s.start..s.end]
    }

    /// Lazy group label (1-based symbol index) per word.
    pub fn labels(&self) -> Vec<usize> {
        labels_from_spans(&self.spans, self.tokens.len())
    }
}

fn labels_from_spans(spans: &[Span], n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for (k, s) in spans.iter().enumerate() {
        for slot in &mut out[s.start..s.end] {
            *slot = k + 1;
        }
    }
    out
}

/// `table[l][i]`: the first `i` words match the first `l` atoms, with the
/// convention that a wildcard atom needs its predecessor matched strictly
/// earlier. Position 0 stands for the segment delimiter.
pub fn prefix_table(t: &Template, input: &[Word]) -> Vec<Vec<bool>> {
    prefix_tables(t, input).0
}

/// Returns the state table and `ends[l][i]`: atoms `..l` match `input[..i]`,
/// letting trailing wildcards be empty. Star rows of the state table only hold
/// positions the star actually covers.
fn prefix_tables(t: &Template, input: &[Word]) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    let atoms = t.atoms();
    let n = input.len();
    let mut table = vec![vec![false; n + 1]; atoms.len() + 1];
    let mut ends = table.clone();
    table[0][0] = true;
    ends[0][0] = true;
    for (l, atom) in atoms.iter().enumerate() {
        let l = l + 1;
        if atom.is_star() {
            let mut seen = false;
            for i in 0..=n {
                table[l][i] = seen;
                ends[l][i] = seen || ends[l - 1][i];
                seen |= ends[l - 1][i];
            }
        } else {
            for i in 1..=n {
                table[l][i] = ends[l - 1][i - 1] && atom.accepts(&input[i - 1]);
                ends[l][i] = table[l][i];
            }
        }
    }
    (table, ends)
}

/// Longest matching atom prefix at each word (1-based atom index, 0 = none).
pub fn atom_states(t: &Template, input: &[Word]) -> Vec<usize> {
    let table = prefix_table(t, input);
    (1..=input.len())
        .map(|i| (0..table.len()).rev().find(|&l| table[l][i]).unwrap_or(0))
        .collect()
}

/// Longest matching template prefix at each word, as a 1-based symbol index.
pub fn states(t: &Template, input: &[Word]) -> Vec<usize> {
    atom_states(t, input).into_iter().map(|a| t.symbol_of_atom(a)).collect()
}

pub fn matches(t: &Template, input: &[Word]) -> bool {
    let (_, ends) = prefix_tables(t, input);
    ends[ends.len() - 1][input.len()]
}

/// Lazy-leftmost spans (one per symbol), or `None` if `t` does not match.
pub fn lazy_spans(t: &Template, input: &[Word]) -> Option<Vec<Span>> {
    let atoms = t.atoms();
    let n = input.len();
    let l = atoms.len();
    // feasible[a][i]: atoms a.. match input[i..].
    let mut feasible = vec![vec![false; n + 1]; l + 1];
    feasible[l][n] = true;
    for a in (0..l).rev() {
        if atoms[a].is_star() {
            let mut any = false;
            for i in (0..=n).rev() {
                any |= feasible[a + 1][i];
                feasible[a][i] = any;
            }
        } else {
            for i in 0..n {
                feasible[a][i] = atoms[a].accepts(&input[i]) && feasible[a + 1][i + 1];
            }
        }
    }
    if !feasible[0][0] {
        return None;
    }
    let mut spans = vec![Span { start: 0, end: 0 }; t.symbols.len()];
    let mut touched = vec![false; t.symbols.len()];
    let mut pos = 0;
    for (a, atom) in atoms.iter().enumerate() {
        let start = pos;
        pos = if atom.is_star() {
            (pos..=n).find(|&j| feasible[a + 1][j]).expect("feasible star")
        } else {
            pos + 1
        };
        let k = t.symbol_of_atom(a + 1) - 1;
        if touched[k] {
            spans[k].end = pos;
        } else {
            spans[k] = Span { start, end: pos };
            touched[k] = true;
        }
    }
    Some(spans)
}

/// Full decomposition of `input` under `t`, or `None` if it does not match.
pub fn decompose(t: &Template, input: &[Word]) -> Option<Decomposition> {
    let spans = lazy_spans(t, input)?;
    let states = states(t, input);
    let ambiguous = labels_from_spans(&spans, input.len()) != states;
    Some(Decomposition { template_id: t.id.clone(), tokens: input.to_vec(), states, spans, ambiguous })
}

/// Highest-priority matching template (rank index) and its decomposition.
pub fn find_match(s: &Script, input: &[Word]) -> Option<(usize, Decomposition)> {
    s.templates.iter().enumerate().find_map(|(i, t)| decompose(t, input).map(|d| (i, d)))
}

/// Realizes `r` over `d`: prefix, then literals verbatim and group spans.
pub fn reassemble(d: &Decomposition, r: &ReassemblyRule) -> Vec<Word> {
    let mut out = r.prefix.clone();
    for e in &r.body {
        match e {
            RuleElement::Literal(w) => out.push(w.clone()),
            RuleElement::Group(k) => out.extend_from_slice(d.group(*k)),
        }
    }
    out
}

/// Number of copied words in a realized rule.
pub fn copy_len(d: &Decomposition, r: &ReassemblyRule) -> usize {
    r.group_refs().map(|k| d.group(k).len()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PretransformStep {
    Transformed { tokens: Vec<Word>, target: PretransformTarget, index: usize, ambiguous: bool, copy_len: usize },
    Pass,
}

/// Applies the first matching pretransform rule, if any.
pub fn step_pretransform(s: &Script, input: &[Word]) -> PretransformStep {
    for (index, p) in s.pretransforms.iter().enumerate() {
        if let Some(d) = decompose(&p.template, input) {
            return PretransformStep::Transformed {
                tokens: reassemble(&d, &p.rule),
                target: p.target.clone(),
                index,
                ambiguous: d.ambiguous,
                copy_len: copy_len(&d, &p.rule),
            };
        }
    }
    PretransformStep::Pass
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineOutcome {
    Halted { tape: Vec<Word>, steps: usize, trace: Vec<Vec<Word>> },
    Budget { trace: Vec<Vec<Word>> },
}

/// Iterates pretransform rules on a tape. Halts when no rule applies or after
/// a rule hands control to an ordinary template.
pub fn run_machine(s: &Script, input: &[Word], max_steps: usize) -> MachineOutcome {
    let mut tape = input.to_vec();
    let mut trace = Vec::new();
    loop {
        match step_pretransform(s, &tape) {
            PretransformStep::Pass => return MachineOutcome::Halted { steps: trace.len(), tape, trace },
            PretransformStep::Transformed { tokens, target, .. } => {
                if trace.len() == max_steps {
                    return MachineOutcome::Budget { trace };
                }
                tape = tokens;
                trace.push(tape.clone());
                if let PretransformTarget::Template(_) = target {
                    return MachineOutcome::Halted { steps: trace.len(), tape, trace };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnType {
    SingleTurn,
    MultiNoCycling,
    MultiCycling,
    MemoryDequeue,
    NullTemplate,
    /// Intermediate tape emitted by a pretransform rule.
    Pretransform,
}

impl TurnType {
    pub const ALL: [TurnType; 6] = [
        TurnType::SingleTurn,
        TurnType::MultiNoCycling,
        TurnType::MultiCycling,
        TurnType::MemoryDequeue,
        TurnType::NullTemplate,
        TurnType::Pretransform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TurnType::SingleTurn => "single_turn",
            TurnType::MultiNoCycling => "multi_no_cycling",
            TurnType::MultiCycling => "multi_cycling",
            TurnType::MemoryDequeue => "memory_dequeue",
            TurnType::NullTemplate => "null_template",
            TurnType::Pretransform => "pretransform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "u")]
    User,
    #[serde(rename = "e")]
    Eliza,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnMeta {
    pub template_id: String,
    pub rule_index: usize,
    pub turn_type: TurnType,
    pub queue_len_after: usize,
    /// This response stored the input in the memory queue.
    pub enqueue: bool,
    /// Turn index of the user input read back by a dequeue.
    pub dequeue_target: Option<usize>,
    /// Turns between the enqueued input and this dequeue response.
    pub distance: Option<usize>,
    pub copy_len: usize,
    pub n_copy_segments: usize,
    pub ambiguous: bool,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub tokens: Vec<Word>,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<TurnMeta>,
}

impl Turn {
    pub fn user(tokens: Vec<Word>) -> Self {
        Turn { role: Role::User, tokens, meta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub tokens: Vec<Word>,
    pub turn_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueState {
    pub cycle_counts: BTreeMap<String, usize>,
    pub null_cycle_count: usize,
    pub queue: VecDeque<QueueEntry>,
    pub dequeue_count: usize,
    pub enqueue_count: usize,
    /// Index the next turn will get in the transcript.
    pub turn_index: usize,
    /// Whether an ordinary (non-pretransform) response has been given.
    pub responded: bool,
}

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Where control goes after a pretransform step.
enum Dispatch {
    Ranked { pretransforms: bool },
    Template(String),
}

/// One user input in, the Eliza turns it produces out. Pretransform chains
/// produce one turn per intermediate tape before the final response.
pub fn respond(s: &Script, st: &DialogueState, input: &[Word]) -> Result<(Vec<Turn>, DialogueState), EngineError> {
    let mut st = st.clone();
    let user_turn = st.turn_index;
    st.turn_index += 1;
    let mut out = Vec::new();
    let mut tokens = s.translate(input);
    let mut dispatch = Dispatch::Ranked { pretransforms: true };
    let mut source_turn = user_turn;

    loop {
        if let Dispatch::Ranked { pretransforms: true } = dispatch {
            if let PretransformStep::Transformed { tokens: next, target, index, ambiguous, copy_len } =
                step_pretransform(s, &tokens)
            {
                if out.len() == MAX_CHAIN {
                    return Err(EngineError::ChainBudget(MAX_CHAIN));
                }
                let meta = TurnMeta {
                    template_id: s.pretransforms[index].template.id.clone(),
                    rule_index: index,
                    turn_type: TurnType::Pretransform,
                    queue_len_after: st.queue.len(),
                    enqueue: false,
                    dequeue_target: None,
                    distance: None,
                    copy_len,
                    n_copy_segments: s.pretransforms[index].rule.group_refs().count(),
                    ambiguous,
                    collision: false,
                };
                out.push(Turn { role: Role::Eliza, tokens: next.clone(), meta: Some(meta) });
                source_turn = st.turn_index;
                st.turn_index += 1;
                tokens = next;
                dispatch = match target {
                    PretransformTarget::Restart => Dispatch::Ranked { pretransforms: true },
                    PretransformTarget::Template(id) => Dispatch::Template(id),
                };
                continue;
            }
        }
        let found = match &dispatch {
            Dispatch::Template(id) => {
                let i = s.template_index(id).expect("validated target");
                decompose(&s.templates[i], &tokens).map(|d| (i, d)).or_else(|| find_match(s, &tokens))
            }
            Dispatch::Ranked { .. } => find_match(s, &tokens),
        };
        let (ti, d) = found.ok_or_else(|| EngineError::NoMatch(crate::word::join(&tokens)))?;
        let turn = respond_matched(s, &mut st, ti, d, source_turn);
        out.push(turn);
        return Ok((out, st));
    }
}

fn respond_matched(s: &Script, st: &mut DialogueState, ti: usize, d: Decomposition, source_turn: usize) -> Turn {
    let t = &s.templates[ti];
    let first = !st.responded;
    st.responded = true;
    let my_index = st.turn_index;
    st.turn_index += 1;
    let is_memory = s.memory_index() == Some(ti);
    let is_null = s.null_index() == Some(ti);

    let (rule, rule_index, turn_type, decomposition, enqueue, dequeue_target) = if is_null {
        let mode = s.null_cycle_mode;
        if let Some(entry) = st.queue.pop_front() {
            let mem = s.memory.as_ref().expect("queue implies memory");
            let mt = s.template(&mem.template_id).expect("validated memory template");
            let md = decompose(mt, &entry.tokens).expect("stored input matched the memory template");
            let idx = st.dequeue_count % mem.dequeue_rules.len();
            st.dequeue_count += 1;
            if mode == NullCycleMode::OnInput {
                st.null_cycle_count += 1;
            }
            (&mem.dequeue_rules[idx], idx, TurnType::MemoryDequeue, md, false, Some(entry.turn_index))
        } else {
            let rules = s.rules_for(&t.id);
            let idx = st.null_cycle_count % rules.len();
            st.null_cycle_count += 1;
            (&rules[idx], idx, TurnType::NullTemplate, d, false, None)
        }
    } else {
        let rules = s.rules_for(&t.id);
        let count = st.cycle_counts.entry(t.id.clone()).or_insert(0);
        let idx = *count % rules.len();
        let ty = if *count == 0 { TurnType::MultiNoCycling } else { TurnType::MultiCycling };
        *count += 1;
        if is_memory {
            st.queue.push_back(QueueEntry { tokens: d.tokens.clone(), turn_index: source_turn });
            st.enqueue_count += 1;
        }
        (&rules[idx], idx, ty, d, is_memory, None)
    };
    let turn_type = if first { TurnType::SingleTurn } else { turn_type };
    let tokens = reassemble(&decomposition, rule);
    Turn {
        role: Role::Eliza,
        meta: Some(TurnMeta {
            template_id: t.id.clone(),
            rule_index,
            turn_type,
            queue_len_after: st.queue.len(),
            enqueue,
            dequeue_target,
            distance: dequeue_target.map(|e| my_index - e),
            copy_len: copy_len(&decomposition, rule),
            n_copy_segments: rule.group_refs().count(),
            ambiguous: decomposition.ambiguous,
            collision: false,
        }),
        tokens,
    }
}

/// Folds `respond` over the user turns from a fresh state.
pub fn run_conversation(s: &Script, user_turns: &[Vec<Word>]) -> Result<Vec<Turn>, EngineError> {
    let mut st = DialogueState::new();
    let mut out = Vec::new();
    for input in user_turns {
        let (turns, next) = respond(s, &st, input)?;
        out.push(Turn::user(input.clone()));
        out.extend(turns);
        st = next;
    }
    Ok(out)
}

/// Token stream `BOS u: ... . e: ... .` for a transcript.
pub fn token_stream(turns: &[Turn]) -> Vec<Word> {
    let mut out = vec![Word::bos()];
    for t in turns {
        out.push(match t.role {
            Role::User => Word::user(),
            Role::Eliza => Word::eliza(),
        });
        out.extend(t.tokens.iter().cloned());
        out.push(Word::period());
    }
    out
}

/// Which literal atoms a template contains, for quick filtering.
pub fn literal_words(t: &Template) -> Vec<Word> {
    t.atoms()
        .iter()
        .filter_map(|a| match a {
            Atom::Word(w) => Some(w.clone()),
            _ => None,
        })
        .collect()
}
