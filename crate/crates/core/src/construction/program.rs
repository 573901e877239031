//! The full ELIZA program, run incrementally over a growing context.
//!
//! Each pushed token gets its features computed once from selectors over
//! earlier positions. Selector rows are only evaluated over the positions they
//! can select (the query's own segment, or the decision points of earlier
//! segments); every other entry is false by the head's predicate.

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::copying::{self, Action, CopyError};
use super::matching::{self, LayerPlan, PlanError};
use super::primitives::{one_hot_row, width_row};
use super::state::{self, Gridworld, MemoryDecision, QueueEvent};
use super::tensor::is_delimiter;
use super::{ConfigError, Copying, Cycling, MechanismConfig, Memory};
use crate::engine::Role;
use crate::script::{NullCycleMode, PretransformTarget, ReassemblyRule, Script, Template};
use crate::word::{Word, BOS, ELIZA, PERIOD, USER};

/// Templates longer than this many atoms do not fit the flag word.
pub const MAX_ATOMS: usize = 63;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstructionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Copy(#[from] CopyError),
    #[error("template `{0}` has more than {MAX_ATOMS} atoms")]
    TemplateTooLong(String),
    #[error("malformed context: {0}")]
    Malformed(String),
    #[error("no template matches the input segment and the script has no null template")]
    NoMatch,
    #[error("decode budget of {0} tokens exhausted")]
    Budget(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResponseKind {
    Ordinary,
    Enqueue,
    NullResponse,
    Dequeue { d: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Decision {
    Pretransform { index: usize, restart: bool },
    Respond { template: usize, rule_index: usize, response: ResponseKind },
}

/// Mechanism intermediates exposed for inspection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intermediates {
    /// Count read by a modular prefix sum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_count: Option<usize>,
    /// Rule index of the most recent recognized response.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_rule: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gridworld_state: Option<usize>,
}

#[derive(Debug, Clone)]
struct DecisionRec {
    decision: Decision,
    source_seg: usize,
    tref: usize,
    rule: ReassemblyRule,
    /// The input matched the null template (a queue read event).
    null_input: bool,
    enqueue_ordinal: Option<usize>,
    grid: Gridworld,
    inter: Intermediates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Owner {
    Template(usize),
    Dequeue,
}

#[derive(Debug, Clone)]
struct Recognized {
    owner: Owner,
    index: usize,
    /// Number of recognized responses with this owner up to and including
    /// this one.
    ordinal: usize,
}

#[derive(Debug, Clone)]
struct Summary {
    matched: Vec<bool>,
    pre_match: Option<usize>,
}

#[derive(Debug, Clone)]
struct Pos {
    token: Word,
    word: Word,
    seg: usize,
    spos: usize,
    role: Option<Role>,
    flags: Vec<u64>,
    summary: Option<Summary>,
    decision: Option<Rc<DecisionRec>>,
    recognized: Option<Recognized>,
}

#[derive(Debug)]
struct GroupInfo {
    words: Vec<Word>,
    states: Vec<usize>,
    labels: Vec<usize>,
    counts: Vec<usize>,
}

/// One record per predicted token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub position: usize,
    pub segment_id: usize,
    pub segment_position: usize,
    pub template: String,
    pub decision: Decision,
    pub rule_index: usize,
    /// Raw automaton states of the copied segment under the template.
    pub states: Vec<usize>,
    /// Group labels used for copying (corrected when enabled).
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
    pub action: Action,
    pub token: Word,
    pub mechanism: Intermediates,
}

pub struct Program<'s> {
    cfg: MechanismConfig,
    script: &'s Script,
    /// Script templates followed by pretransform templates.
    templates: Vec<Template>,
    plan: Option<LayerPlan>,
    prefixes: HashMap<(Word, Word), (Owner, usize)>,
    pos: Vec<Pos>,
    /// Positions of segment delimiters, indexed by segment id - 1.
    seg_starts: Vec<usize>,
    groups: HashMap<(usize, usize), Rc<GroupInfo>>,
}

impl<'s> Program<'s> {
    pub fn new(cfg: &MechanismConfig, script: &'s Script) -> Result<Self, ConstructionError> {
        cfg.validate()?;
        let mut templates = script.templates.clone();
        templates.extend(script.pretransforms.iter().map(|p| p.template.clone()));
        if let Some(t) = templates.iter().find(|t| t.atoms().len() > MAX_ATOMS) {
            return Err(ConstructionError::TemplateTooLong(t.id.clone()));
        }
        let plan = if cfg.reduced_layers { Some(matching::reduce_layers(&templates, cfg.head_budget)?) } else { None };
        let mut prefixes = HashMap::new();
        for (ti, t) in script.templates.iter().enumerate() {
            for (i, r) in script.rules_for(&t.id).iter().enumerate() {
                if let [a, b] = r.prefix.as_slice() {
                    prefixes.insert((a.clone(), b.clone()), (Owner::Template(ti), i));
                }
            }
        }
        if let Some(m) = &script.memory {
            for (i, r) in m.dequeue_rules.iter().enumerate() {
                if let [a, b] = r.prefix.as_slice() {
                    prefixes.insert((a.clone(), b.clone()), (Owner::Dequeue, i));
                }
            }
        }
        Ok(Program {
            cfg: cfg.clone(),
            script,
            templates,
            plan,
            prefixes,
            pos: Vec::new(),
            seg_starts: Vec::new(),
            groups: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn tokens(&self) -> Vec<Word> {
        self.pos.iter().map(|p| p.token.clone()).collect()
    }

    /// Drops every position from `len` on.
    pub fn truncate(&mut self, len: usize) {
        self.pos.truncate(len);
        self.seg_starts.retain(|&s| s < len);
        let live = self.seg_starts.len();
        self.groups.retain(|&(seg, _), _| seg < live);
    }

    /// Segment ids of every position (for isolation checks).
    pub fn segment_ids(&self) -> Vec<usize> {
        self.pos.iter().map(|p| p.seg).collect()
    }

    /// Raw symbol states of every position under template `ti`.
    pub fn states(&self, ti: usize) -> Vec<usize> {
        let t = &self.templates[ti];
        self.pos.iter().map(|p| t.symbol_of_atom(top_bit(p.flags.get(ti).copied().unwrap_or(0)))).collect()
    }

    fn segment_range(&self, seg: usize) -> std::ops::Range<usize> {
        let start = self.seg_starts[seg - 1];
        let end = self.seg_starts.get(seg).copied().unwrap_or(self.pos.len());
        start..end
    }

    /// Appends one token and computes its features.
    pub fn push(&mut self, token: Word) -> Result<(), ConstructionError> {
        let q = self.pos.len();
        if q == 0 && token != BOS {
            return Err(ConstructionError::Malformed("context must start with BOS".into()));
        }
        // Segment id: delimiters seen so far (clamped); segment position:
        // same-segment keys up to here (clamped).
        let delim = is_delimiter(&token);
        let raw_seg = self.seg_starts.len() + usize::from(delim);
        let seg = raw_seg.min(self.cfg.max_segments);
        let opens_segment = delim && raw_seg <= self.cfg.max_segments;
        if opens_segment {
            self.seg_starts.push(q);
        }
        let same_seg: Vec<bool> = self.pos.iter().map(|p| p.seg == seg).chain([true]).collect();
        let spos = width_row(&same_seg, Some(self.cfg.max_segment_length));
        // Role from the segment's delimiter (segment position 1).
        let role = if seg == 0 {
            None
        } else {
            let start = if opens_segment { q } else { self.seg_starts[seg - 1] };
            let tok = if start == q { &token } else { &self.pos[start].token };
            Some(if tok == USER { Role::User } else { Role::Eliza })
        };
        let word = if role == Some(Role::User) && !token.is_reserved() {
            self.script.translations.get(&token).cloned().unwrap_or_else(|| token.clone())
        } else {
            token.clone()
        };

        let flags = if seg == 0 { vec![0; self.templates.len()] } else { self.match_flags(q, seg, &word, delim) };
        self.pos.push(Pos {
            token: token.clone(),
            word,
            seg,
            spos,
            role,
            flags,
            summary: None,
            decision: None,
            recognized: None,
        });

        if seg > 0 && token == PERIOD {
            let s = self.summarize(q);
            self.pos[q].summary = Some(s);
        }
        if token == ELIZA {
            let d = self.decide(q)?;
            self.pos[q].decision = Some(Rc::new(d));
        }
        if role == Some(Role::Eliza) && spos == 3 {
            self.pos[q].recognized = self.recognize(q);
        }
        Ok(())
    }

    fn match_flags(&self, q: usize, seg: usize, word: &Word, delim: bool) -> Vec<u64> {
        let range = self.seg_starts[seg - 1]..q;
        let earlier = &self.pos[range.clone()];
        if let Some(plan) = &self.plan {
            let mut seg_words: Vec<Word> = earlier.iter().map(|p| p.word.clone()).collect();
            seg_words.push(word.clone());
            return (0..self.templates.len())
                .map(|ti| {
                    let prev: Vec<u64> = earlier.iter().map(|p| p.flags[ti]).collect();
                    plan.flags_at(ti, &seg_words, &prev)
                })
                .collect();
        }
        // One layer per atom: `ever` is the uniform same-segment head over
        // earlier positions, `just` the previous-position head.
        let prev = earlier.last();
        self.templates
            .iter()
            .enumerate()
            .map(|(ti, t)| {
                let ever = earlier.iter().fold(0u64, |acc, p| acc | p.flags[ti]);
                let just = prev.map_or(0, |p| p.flags[ti]);
                let atoms = t.atoms();
                let mut f = u64::from(delim);
                for (l, atom) in atoms.iter().enumerate() {
                    let after_star = l >= 1 && atoms[l - 1].is_star();
                    let bit = |m: u64| m >> l & 1 == 1;
                    if matching::atom_step(atom, after_star, bit(f), bit(just), bit(ever), word) {
                        f |= 1 << (l + 1);
                    }
                }
                f
            })
            .collect()
    }

    /// At a segment-final period: which templates match the segment.
    fn summarize(&self, q: usize) -> Summary {
        let prev = &self.pos[q - 1];
        let full = |ti: usize| {
            let t = &self.templates[ti];
            let l = t.atoms().len();
            let f = prev.flags[ti];
            f >> l & 1 == 1 || (l > 0 && t.atoms()[l - 1].is_star() && f >> (l - 1) & 1 == 1)
        };
        let n = self.script.templates.len();
        Summary {
            matched: (0..n).map(full).collect(),
            pre_match: (0..self.script.pretransforms.len()).find(|&i| full(n + i)),
        }
    }

    fn recognize(&self, q: usize) -> Option<Recognized> {
        let start = self.seg_starts[self.pos[q].seg - 1];
        let dec = self.pos[start].decision.as_ref()?;
        if matches!(dec.decision, Decision::Pretransform { .. }) {
            return None;
        }
        let key = (self.pos[q - 1].token.clone(), self.pos[q].token.clone());
        let (owner, index) = *self.prefixes.get(&key)?;
        let prior: Vec<bool> = self.pos[..q]
            .iter()
            .map(|p| p.recognized.as_ref().is_some_and(|r| r.owner == owner))
            .chain([true])
            .collect();
        Some(Recognized { owner, index, ordinal: width_row(&prior, None) })
    }

    /// Decision points (Eliza delimiters) strictly before `q`.
    fn prior_decisions(&self, q: usize) -> impl Iterator<Item = &Rc<DecisionRec>> {
        self.pos[..q].iter().filter_map(|p| p.decision.as_ref())
    }

    /// Rule index of the most recent recognized response by `owner`, read by
    /// counting such responses and attending to the one with that ordinal.
    fn most_recent(&self, q: usize, owner: Owner) -> Option<usize> {
        let sel: Vec<bool> =
            self.pos[..q].iter().map(|p| p.recognized.as_ref().is_some_and(|r| r.owner == owner)).collect();
        let c = width_row(&sel, None);
        if c == 0 {
            return None;
        }
        let pick: Vec<bool> =
            self.pos[..q].iter().map(|p| p.recognized.as_ref().is_some_and(|r| r.owner == owner && r.ordinal == c)).collect();
        let idx: Vec<usize> = self.pos[..q].iter().map(|p| p.recognized.as_ref().map_or(0, |r| r.index)).collect();
        one_hot_row(&pick, &idx).copied()
    }

    fn cycle(&self, q: usize, ti: usize, inter: &mut Intermediates) -> usize {
        let t = &self.script.templates[ti];
        let m = self.script.rules_for(&t.id).len();
        match self.cfg.cycling {
            Cycling::ModularPrefixSum => {
                let sel: Vec<bool> = self
                    .prior_decisions(q)
                    .map(|d| {
                        matches!(d.decision, Decision::Respond { template, response: ResponseKind::Ordinary | ResponseKind::Enqueue, .. } if template == ti)
                    })
                    .collect();
                let c = width_row(&sel, None);
                inter.cycle_count = Some(c);
                state::cycle_modular(c, m, self.cfg.max_segments)
            }
            Cycling::IntermediateOutputs => {
                let last = self.most_recent(q, Owner::Template(ti));
                inter.last_rule = last;
                state::cycle_intermediate(last, m)
            }
        }
    }

    fn null_cycle(&self, q: usize, ti: usize, inter: &mut Intermediates) -> usize {
        let m = self.script.rules_for(&self.script.templates[ti].id).len();
        let count_where = |f: &dyn Fn(&DecisionRec) -> bool| {
            let sel: Vec<bool> = self.prior_decisions(q).map(|d| f(d)).collect();
            width_row(&sel, None)
        };
        match (self.script.null_cycle_mode, self.cfg.cycling) {
            (NullCycleMode::OnInput, _) => {
                let c = count_where(&|d| d.null_input);
                inter.cycle_count = Some(c);
                state::cycle_modular(c, m, self.cfg.max_segments)
            }
            (NullCycleMode::OnResponse, Cycling::ModularPrefixSum) => {
                let c = count_where(&|d| {
                    matches!(d.decision, Decision::Respond { response: ResponseKind::NullResponse, .. })
                });
                inter.cycle_count = Some(c);
                state::cycle_modular(c, m, self.cfg.max_segments)
            }
            (NullCycleMode::OnResponse, Cycling::IntermediateOutputs) => {
                let last = self.most_recent(q, Owner::Template(ti));
                inter.last_rule = last;
                state::cycle_intermediate(last, m)
            }
        }
    }

    fn decide(&self, q: usize) -> Result<DecisionRec, ConstructionError> {
        let seg = self.pos[q].seg;
        if seg < 2 {
            return Err(ConstructionError::Malformed("`e:` without a preceding input segment".into()));
        }
        let input_seg = seg - 1;
        let range = self.segment_range(input_seg);
        let end_row: Vec<bool> =
            (0..q).map(|k| range.contains(&k) && self.pos[k].token == PERIOD).collect();
        let ends: Vec<usize> = (0..q).collect();
        let end = *one_hot_row(&end_row, &ends)
            .ok_or_else(|| ConstructionError::Malformed("input segment is not terminated by `.`".into()))?;
        let summary = self.pos[end].summary.as_ref().expect("period carries a summary");
        let input_start = range.start;
        let chain = match self.pos[input_start].role {
            Some(Role::Eliza) => self.pos[input_start].decision.as_ref().and_then(|d| match d.decision {
                Decision::Pretransform { index, .. } => Some(index),
                _ => None,
            }),
            _ => None,
        };
        let target = chain.map(|i| &self.script.pretransforms[i].target);
        let mut inter = Intermediates::default();

        if !matches!(target, Some(PretransformTarget::Template(_))) {
            if let Some(p) = summary.pre_match {
                let pt = &self.script.pretransforms[p];
                return Ok(DecisionRec {
                    decision: Decision::Pretransform { index: p, restart: pt.target == PretransformTarget::Restart },
                    source_seg: input_seg,
                    tref: self.script.templates.len() + p,
                    rule: pt.rule.clone(),
                    null_input: false,
                    enqueue_ordinal: None,
                    grid: self.last_grid(q),
                    inter,
                });
            }
        }
        let forced = match target {
            Some(PretransformTarget::Template(id)) => self.script.template_index(id).filter(|&i| summary.matched[i]),
            _ => None,
        };
        let ti = forced
            .or_else(|| summary.matched.iter().position(|&m| m))
            .ok_or(ConstructionError::NoMatch)?;
        let t = &self.script.templates[ti];
        let mut grid = self.last_grid(q);

        if self.script.memory_index() == Some(ti) {
            let rule_index = self.cycle(q, ti, &mut inter);
            let prior = self
                .prior_decisions(q)
                .filter(|d| matches!(d.decision, Decision::Respond { response: ResponseKind::Enqueue, .. }))
                .count();
            if let Memory::Gridworld { s } = self.cfg.memory {
                grid.step(QueueEvent::Enqueue, s);
            }
            return Ok(DecisionRec {
                decision: Decision::Respond { template: ti, rule_index, response: ResponseKind::Enqueue },
                source_seg: input_seg,
                tref: ti,
                rule: self.script.rules_for(&t.id)[rule_index].clone(),
                null_input: false,
                enqueue_ordinal: Some(prior + 1),
                grid,
                inter,
            });
        }
        if self.script.null_index() == Some(ti) {
            let memory = match (&self.script.memory, self.cfg.memory) {
                (None, _) => MemoryDecision::NullResponse,
                (Some(_), Memory::Gridworld { s }) => {
                    let m = grid.step(QueueEvent::NoMatch, s).expect("no-match decides");
                    inter.gridworld_state = Some(grid.state);
                    m
                }
                (Some(_), Memory::IntermediateOutputs) => {
                    let sel: Vec<bool> = self.pos[..q]
                        .iter()
                        .map(|p| p.recognized.as_ref().is_some_and(|r| r.owner == Owner::Dequeue))
                        .collect();
                    let d = width_row(&sel, None);
                    let e = self
                        .prior_decisions(q)
                        .filter(|d| matches!(d.decision, Decision::Respond { response: ResponseKind::Enqueue, .. }))
                        .count();
                    inter.d = Some(d);
                    inter.e = Some(e.min(self.cfg.enqueue_ceiling));
                    state::memory_intermediate(d, e, self.cfg.enqueue_ceiling)
                }
            };
            if let MemoryDecision::Dequeue { d } = memory {
                inter.d = Some(d);
                let mem = self.script.memory.as_ref().expect("dequeue implies memory");
                let source = self
                    .prior_decisions(q)
                    .find(|rec| rec.enqueue_ordinal == Some(d + 1))
                    .map(|rec| rec.source_seg);
                if let Some(source_seg) = source {
                    let rule_index = d % mem.dequeue_rules.len();
                    return Ok(DecisionRec {
                        decision: Decision::Respond { template: ti, rule_index, response: ResponseKind::Dequeue { d } },
                        source_seg,
                        tref: self.script.memory_index().expect("validated memory template"),
                        rule: mem.dequeue_rules[rule_index].clone(),
                        null_input: true,
                        enqueue_ordinal: None,
                        grid,
                        inter,
                    });
                }
            }
            let rule_index = self.null_cycle(q, ti, &mut inter);
            return Ok(DecisionRec {
                decision: Decision::Respond { template: ti, rule_index, response: ResponseKind::NullResponse },
                source_seg: input_seg,
                tref: ti,
                rule: self.script.rules_for(&t.id)[rule_index].clone(),
                null_input: true,
                enqueue_ordinal: None,
                grid,
                inter,
            });
        }
        let rule_index = self.cycle(q, ti, &mut inter);
        Ok(DecisionRec {
            decision: Decision::Respond { template: ti, rule_index, response: ResponseKind::Ordinary },
            source_seg: input_seg,
            tref: ti,
            rule: self.script.rules_for(&t.id)[rule_index].clone(),
            null_input: false,
            enqueue_ordinal: None,
            grid,
            inter,
        })
    }

    fn last_grid(&self, q: usize) -> Gridworld {
        self.prior_decisions(q).last().map(|d| d.grid).unwrap_or_default()
    }

    fn group_info(&mut self, seg: usize, tref: usize) -> Rc<GroupInfo> {
        if let Some(g) = self.groups.get(&(seg, tref)) {
            return g.clone();
        }
        let t = &self.templates[tref];
        let range = self.segment_range(seg);
        let word_pos: Vec<usize> = range.filter(|&k| !self.pos[k].token.is_reserved()).collect();
        let words: Vec<Word> = word_pos.iter().map(|&k| self.pos[k].word.clone()).collect();
        let atom_states: Vec<usize> = word_pos.iter().map(|&k| top_bit(self.pos[k].flags[tref])).collect();
        let states: Vec<usize> = atom_states.iter().map(|&a| t.symbol_of_atom(a)).collect();
        let labels =
            if self.cfg.correct_labels { matching::correct_labels(t, &atom_states) } else { states.clone() };
        let counts = copying::group_counts(&labels, t.symbols.len());
        let g = Rc::new(GroupInfo { words, states, labels, counts });
        self.groups.insert((seg, tref), g.clone());
        g
    }

    /// Greedy next-token prediction at the end of the context.
    pub fn predict(&mut self) -> Result<(Word, TraceRecord), ConstructionError> {
        let q = self.pos.len().checked_sub(1).ok_or_else(|| ConstructionError::Malformed("empty context".into()))?;
        let p = &self.pos[q];
        if p.role != Some(Role::Eliza) {
            return Err(ConstructionError::Malformed("no Eliza turn pending".into()));
        }
        let seg = p.seg;
        let start = self.seg_starts[seg - 1];
        let dec = self.pos[start]
            .decision
            .clone()
            .ok_or_else(|| ConstructionError::Malformed("Eliza segment has no decision".into()))?;
        let g = self.group_info(dec.source_seg, dec.tref);
        let p = &self.pos[q];
        let template = self.templates[dec.tref].id.clone();
        let rule_index = match dec.decision {
            Decision::Pretransform { index, .. } => index,
            Decision::Respond { rule_index, .. } => rule_index,
        };
        let (token, action) = if p.token == PERIOD && q > start {
            let next = if matches!(dec.decision, Decision::Pretransform { .. }) { ELIZA } else { USER };
            (Word::from(next), Action::HandBack)
        } else {
            let step = p.spos - 1;
            let action = match self.cfg.copying {
                Copying::PositionBased => copying::copy_position(&g.counts, &dec.rule, step)?,
                Copying::InductionHead { n } => {
                    let emitted: Vec<Word> = self.pos[start + 1..=q].iter().map(|p| p.token.clone()).collect();
                    copying::copy_induction(&g.words, &g.labels, &g.counts, &dec.rule, step, &emitted, n)?
                }
            };
            let token = match &action {
                Action::Copy { target } => g.words[target - 1].clone(),
                Action::Print { word } => word.clone(),
                Action::HandBack => Word::period(),
            };
            (token, action)
        };
        let trace = TraceRecord {
            position: q + 1,
            segment_id: seg,
            segment_position: p.spos + 1,
            template,
            decision: dec.decision.clone(),
            rule_index,
            states: g.states.clone(),
            labels: g.labels.clone(),
            counts: g.counts.clone(),
            action,
            token: token.clone(),
            mechanism: dec.inter.clone(),
        };
        Ok((token, trace))
    }
}

fn top_bit(f: u64) -> usize {
    if f == 0 {
        0
    } else {
        63 - f.leading_zeros() as usize
    }
}

/// Runs the program over `context` and predicts the next token.
pub fn forward(cfg: &MechanismConfig, script: &Script, context: &[Word]) -> Result<Word, ConstructionError> {
    let mut p = Program::new(cfg, script)?;
    for w in context {
        p.push(w.clone())?;
    }
    p.predict().map(|(w, _)| w)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedTurn {
    pub role: Role,
    pub tokens: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub turns: Vec<DecodedTurn>,
    pub trace: Vec<TraceRecord>,
}

impl Decoded {
    pub fn eliza_turns(&self) -> impl Iterator<Item = &[Word]> {
        self.turns.iter().filter(|t| t.role == Role::Eliza).map(|t| t.tokens.as_slice())
    }
}

/// Greedily decodes Eliza's side of a conversation. The context starts as
/// `BOS`; each user turn is appended as `u: ... . e:` and Eliza's tokens are
/// generated until she hands control back with `u:`.
pub fn decode(
    cfg: &MechanismConfig,
    script: &Script,
    user_turns: &[Vec<Word>],
    max_tokens: usize,
) -> Result<Decoded, ConstructionError> {
    let mut p = Program::new(cfg, script)?;
    p.push(Word::bos())?;
    let mut out = Decoded { turns: Vec::new(), trace: Vec::new() };
    let mut generated = 0;
    for input in user_turns {
        if p.tokens().last().is_none_or(|w| w != USER) {
            p.push(Word::user())?;
        }
        for w in input {
            p.push(w.clone())?;
        }
        p.push(Word::period())?;
        p.push(Word::eliza())?;
        out.turns.push(DecodedTurn { role: Role::User, tokens: input.clone() });
        let mut current = Vec::new();
        loop {
            if generated == max_tokens {
                return Err(ConstructionError::Budget(max_tokens));
            }
            generated += 1;
            let (tok, trace) = p.predict()?;
            out.trace.push(trace);
            p.push(tok.clone())?;
            match tok.as_str() {
                PERIOD => out.turns.push(DecodedTurn { role: Role::Eliza, tokens: std::mem::take(&mut current) }),
                USER => break,
                ELIZA => {}
                _ => current.push(tok),
            }
        }
    }
    Ok(out)
}
