//! Synthetic scripts, multi-turn conversations and single-turn copying
//! datasets.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, stream)`;
//! conversation `i` uses stream `i`, so parallel generation is byte-identical
//! to serial generation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{self, DialogueState, EngineError, Role, Turn, TurnType};
use crate::script::{MemoryConfig, ReassemblyRule, RuleElement, Script, Template, TemplateSymbol};
use crate::word::{default_vocab, Word};

pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stream reserved for script sampling.
const SCRIPT_STREAM: u64 = u64::MAX;
/// Eval conversations of a copy dataset start at this stream.
const EVAL_STREAM: u64 = 1 << 40;
/// Template redraws allowed before an empty null input is used instead.
const MAX_REDRAWS: usize = 64;
/// Longest repeated n-gram recorded for copy groups.
pub const REPEAT_CAP: usize = 5;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("need {needed} distinct rule prefixes but the vocabulary allows only {available}")]
    PrefixExhausted { needed: usize, available: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {source}")]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Scripts

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptSpec {
    /// Non-null templates; the null template is appended last.
    pub n_templates: usize,
    pub wildcards_min: usize,
    pub wildcards_max: usize,
    pub ngram_max: usize,
    pub rules_per_template_min: usize,
    pub rules_per_template_max: usize,
    pub copy_segments_min: usize,
    pub copy_segments_max: usize,
    /// Designate a memory template with this many dequeue rules; 0 disables
    /// the queue.
    pub n_dequeue_rules: usize,
    pub seed: u64,
}

impl Default for ScriptSpec {
    fn default() -> Self {
        ScriptSpec {
            n_templates: 31,
            wildcards_min: 2,
            wildcards_max: 4,
            ngram_max: 3,
            rules_per_template_min: 1,
            rules_per_template_max: 5,
            copy_segments_min: 1,
            copy_segments_max: 4,
            n_dequeue_rules: 4,
            seed: 0,
        }
    }
}

impl ScriptSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::Spec(m.to_string()));
        if self.n_templates == 0 {
            return bad("n_templates must be at least 1");
        }
        if self.wildcards_min == 0 || self.wildcards_min > self.wildcards_max {
            return bad("need 1 <= wildcards_min <= wildcards_max");
        }
        if self.ngram_max == 0 {
            return bad("ngram_max must be at least 1");
        }
        if self.rules_per_template_min == 0 || self.rules_per_template_min > self.rules_per_template_max {
            return bad("need 1 <= rules_per_template_min <= rules_per_template_max");
        }
        if self.copy_segments_min == 0 || self.copy_segments_min > self.copy_segments_max {
            return bad("need 1 <= copy_segments_min <= copy_segments_max");
        }
        Ok(())
    }
}

fn sample_ngram(rng: &mut ChaCha8Rng, vocab: &[Word], lo: usize, hi: usize) -> Vec<Word> {
    let m = rng.random_range(lo..=hi);
    (0..m).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect()
}

/// `ell` wildcards interleaved with `ell + 1` n-grams; edge n-grams may be
/// empty, interior ones may not.
fn sample_template(rng: &mut ChaCha8Rng, id: String, vocab: &[Word], spec: &ScriptSpec) -> Template {
    let ell = rng.random_range(spec.wildcards_min..=spec.wildcards_max);
    let mut symbols = Vec::new();
    for i in 0..=ell {
        let lo = if i == 0 || i == ell { 0 } else { 1 };
        symbols.extend(sample_ngram(rng, vocab, lo, spec.ngram_max).into_iter().map(TemplateSymbol::Literal));
        if i < ell {
            symbols.push(TemplateSymbol::Wildcard0);
        }
    }
    Template::new(id, symbols)
}

/// Up to `ell` distinct group refs in random order, interleaved with n-grams.
fn sample_rule(
    rng: &mut ChaCha8Rng,
    groups: &[usize],
    vocab: &[Word],
    spec: &ScriptSpec,
    prefix: Vec<Word>,
) -> ReassemblyRule {
    let ell = rng.random_range(spec.copy_segments_min..=spec.copy_segments_max).min(groups.len());
    let refs: Vec<usize> = index::sample(rng, groups.len(), ell).into_iter().map(|i| groups[i]).collect();
    let mut body = Vec::new();
    for i in 0..=refs.len() {
        let lo = if i == 0 || i == refs.len() { 0 } else { 1 };
        body.extend(sample_ngram(rng, vocab, lo, spec.ngram_max).into_iter().map(RuleElement::Literal));
        if let Some(&k) = refs.get(i) {
            body.push(RuleElement::Group(k));
        }
    }
    ReassemblyRule::new(prefix, body)
}

/// Draws `n` distinct two-word prefixes.
fn sample_prefixes(rng: &mut ChaCha8Rng, vocab: &[Word], n: usize) -> Result<Vec<Vec<Word>>, DatagenError> {
    let v = vocab.len();
    let available = v * v;
    if n > available {
        return Err(DatagenError::PrefixExhausted { needed: n, available });
    }
    Ok(index::sample(rng, available, n)
        .into_iter()
        .map(|i| vec![vocab[i / v].clone(), vocab[i % v].clone()])
        .collect())
}

pub fn sample_script(spec: &ScriptSpec) -> Result<Script, DatagenError> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, SCRIPT_STREAM);
    let vocab = default_vocab();
    let mut templates: Vec<Template> =
        (0..spec.n_templates).map(|i| sample_template(&mut rng, format!("t{i}"), &vocab, spec)).collect();
    // The memory template is ranked first; further down it is usually
    // shadowed by a more general template and the queue never fills.
    let memory = (spec.n_dequeue_rules > 0).then(|| {
        let m = rng.random_range(0..spec.n_templates);
        let t = templates.remove(m);
        templates.insert(0, t);
        templates = templates.iter().enumerate().map(|(i, t)| Template::new(format!("t{i}"), t.symbols.clone())).collect();
        0
    });
    templates.push(Template::new("null", vec![TemplateSymbol::Wildcard0]));
    let rule_counts: Vec<usize> = templates
        .iter()
        .map(|_| rng.random_range(spec.rules_per_template_min..=spec.rules_per_template_max))
        .collect();
    let needed = rule_counts.iter().sum::<usize>() + memory.map_or(0, |_| spec.n_dequeue_rules);
    let mut prefixes = sample_prefixes(&mut rng, &vocab, needed)?.into_iter();

    let mut rules = BTreeMap::new();
    for (t, &count) in templates.iter().zip(&rule_counts) {
        // Null rules are literal-only: the null template's single group would
        // echo arbitrary input.
        let groups = if t.is_null_shaped() { Vec::new() } else { t.group_indices() };
        let list = (0..count)
            .map(|_| sample_rule(&mut rng, &groups, &vocab, spec, prefixes.next().expect("counted")))
            .collect();
        rules.insert(t.id.clone(), list);
    }
    let memory = memory.map(|m| {
        let groups = templates[m].group_indices();
        MemoryConfig {
            template_id: templates[m].id.clone(),
            dequeue_rules: (0..spec.n_dequeue_rules)
                .map(|_| sample_rule(&mut rng, &groups, &vocab, spec, prefixes.next().expect("counted")))
                .collect(),
        }
    });
    Ok(Script {
        vocab,
        templates,
        rules,
        memory,
        null_template_id: Some("null".into()),
        null_cycle_mode: Default::default(),
        translations: BTreeMap::new(),
        pretransforms: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Sentences

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum Unigram {
    Uniform,
    /// A fresh `Dirichlet(alpha * 1)` word distribution per wildcard.
    Dirichlet(f64),
}

fn log_gamma_sample(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    // For small shapes the draw underflows; use Gamma(a) = Gamma(a + 1) * U^(1/a).
    if alpha >= 1.0 {
        Gamma::new(alpha, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(alpha + 1.0, 1.0).expect("positive shape").sample(rng).ln();
        let u: f64 = 1.0 - rng.random::<f64>();
        g + u.ln() / alpha
    }
}

/// Dirichlet draw by normalized Gamma variates, computed in log space.
pub fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_sample(rng, a)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

/// A sentence matching `t`: literals verbatim, each `0` replaced by
/// `U{0..len_max}` words.
pub fn sample_sentence(
    t: &Template,
    len_max: usize,
    unigram: Unigram,
    vocab: &[Word],
    rng: &mut ChaCha8Rng,
) -> Vec<Word> {
    let mut out = Vec::new();
    let fill = |rng: &mut ChaCha8Rng, out: &mut Vec<Word>, m: usize| match unigram {
        Unigram::Uniform => out.extend((0..m).map(|_| vocab[rng.random_range(0..vocab.len())].clone())),
        Unigram::Dirichlet(alpha) => {
            let p = dirichlet(rng, &vec![alpha; vocab.len()]);
            let dist = WeightedIndex::new(&p).expect("normalized weights");
            out.extend((0..m).map(|_| vocab[dist.sample(rng)].clone()));
        }
    };
    for s in &t.symbols {
        match s {
            TemplateSymbol::Literal(w) => out.push(w.clone()),
            TemplateSymbol::Wildcard0 => {
                let m = rng.random_range(0..=len_max);
                fill(rng, &mut out, m);
            }
            TemplateSymbol::WildcardN(n) => fill(rng, &mut out, *n as usize),
            TemplateSymbol::Class(ws) => out.push(ws[rng.random_range(0..ws.len())].clone()),
        }
    }
    debug_assert!(engine::matches(t, &out), "sampled sentence must match its template");
    out
}

// ---------------------------------------------------------------------------
// Conversations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConversationSpec {
    pub n_conversations: usize,
    pub max_tokens: usize,
    /// Dirichlet concentration for every template but the memory template.
    pub alpha: f64,
    pub memory_alpha: f64,
    pub max_queue: usize,
    pub segment_len_max: usize,
    pub seed: u64,
}

impl Default for ConversationSpec {
    fn default() -> Self {
        ConversationSpec {
            n_conversations: 1000,
            max_tokens: 512,
            alpha: 1.0 / 32.0,
            memory_alpha: 0.25,
            max_queue: 4,
            segment_len_max: 10,
            seed: 0,
        }
    }
}

impl ConversationSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if !(self.alpha > 0.0 && self.memory_alpha > 0.0) {
            return Err(DatagenError::Spec("concentrations must be positive".into()));
        }
        if self.max_queue == 0 {
            return Err(DatagenError::Spec("max_queue must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: usize,
    pub seed: u64,
    pub turns: Vec<Turn>,
    /// Copy datasets only: longest repeated n-gram (capped) in each copied
    /// group, in rule order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<Vec<usize>>,
}

impl Conversation {
    pub fn user_turns(&self) -> Vec<Vec<Word>> {
        self.turns.iter().filter(|t| t.role == Role::User).map(|t| t.tokens.clone()).collect()
    }

    /// `BOS u: ... . e: ... .` as one space-separated line.
    pub fn token_text(&self) -> String {
        crate::word::join(&engine::token_stream(&self.turns))
    }
}

/// Tokens in the stream form: BOS, plus delimiter, words and period per turn.
pub fn token_count(turns: &[Turn]) -> usize {
    1 + turns.iter().map(|t| t.tokens.len() + 2).sum::<usize>()
}

/// Template distribution for one conversation: Dirichlet draw, then the null
/// template is raised to half the memory template's mass and renormalized.
fn template_distribution(script: &Script, spec: &ConversationSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mem = script.memory_index();
    let alpha: Vec<f64> = (0..script.templates.len())
        .map(|i| if Some(i) == mem { spec.memory_alpha } else { spec.alpha })
        .collect();
    let mut p = dirichlet(rng, &alpha);
    if let (Some(m), Some(n)) = (mem, script.null_index()) {
        let floor = p[m] / 2.0;
        if p[n] < floor {
            p[n] = floor;
            let sum: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= sum);
        }
    }
    p
}

/// Samples turns until the next exchange would exceed the token budget.
pub fn sample_conversation(
    script: &Script,
    spec: &ConversationSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Turn>, DatagenError> {
    let p = template_distribution(script, spec, rng);
    let mem = script.memory_index();
    let mut without_memory = p.clone();
    if let Some(m) = mem {
        without_memory[m] = 0.0;
    }
    let full_dist = WeightedIndex::new(&p).expect("normalized weights");
    let restricted = WeightedIndex::new(&without_memory).ok();
    let mut st = DialogueState::new();
    let mut turns = Vec::new();
    let mut used = 1;
    loop {
        let mut attempt = 0;
        let (intended, input, mut eliza, next) = loop {
            let queue_full = st.queue.len() >= spec.max_queue;
            let (intended, input) = match (&restricted, queue_full, attempt < MAX_REDRAWS) {
                (_, _, false) | (None, true, _) => {
                    let n = script.null_index().unwrap_or(script.templates.len() - 1);
                    (n, Vec::new())
                }
                (Some(r), true, true) => {
                    let t = r.sample(rng);
                    (t, sample_sentence(&script.templates[t], spec.segment_len_max, Unigram::Uniform, &script.vocab, rng))
                }
                (_, false, true) => {
                    let t = full_dist.sample(rng);
                    (t, sample_sentence(&script.templates[t], spec.segment_len_max, Unigram::Uniform, &script.vocab, rng))
                }
            };
            attempt += 1;
            let (eliza, next) = engine::respond(script, &st, &input)?;
            if next.queue.len() <= spec.max_queue || attempt > MAX_REDRAWS {
                break (intended, input, eliza, next);
            }
        };
        let matched = engine::find_match(script, &input).map(|(i, _)| i);
        for t in &mut eliza {
            if let Some(m) = &mut t.meta {
                m.collision = matched.is_some_and(|i| i < intended);
            }
        }
        let user = Turn::user(input);
        let cost = token_count(std::slice::from_ref(&user)) - 1 + token_count(&eliza) - 1;
        if used + cost > spec.max_tokens {
            break;
        }
        used += cost;
        turns.push(user);
        turns.extend(eliza);
        st = next;
    }
    Ok(turns)
}

pub fn conversation(script: &Script, spec: &ConversationSpec, index: usize) -> Result<Conversation, DatagenError> {
    let mut rng = rng_for(spec.seed, index as u64);
    Ok(Conversation { id: index, seed: spec.seed, turns: sample_conversation(script, spec, &mut rng)?, repeats: None })
}

pub fn generate(script: &Script, spec: &ConversationSpec) -> Result<Vec<Conversation>, DatagenError> {
    spec.validate()?;
    (0..spec.n_conversations).into_par_iter().map(|i| conversation(script, spec, i)).collect()
}

// ---------------------------------------------------------------------------
// Copying datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CopySpec {
    pub n_templates: usize,
    /// Dirichlet concentration of the per-wildcard unigram distribution.
    pub concentration: f64,
    pub segment_len_max: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
}

impl Default for CopySpec {
    fn default() -> Self {
        CopySpec { n_templates: 15, concentration: 1.0, segment_len_max: 20, n_train: 32_000, n_eval: 16_000, seed: 0 }
    }
}

impl CopySpec {
    pub fn script_spec(&self) -> ScriptSpec {
        ScriptSpec {
            n_templates: self.n_templates,
            wildcards_min: 2,
            wildcards_max: 2,
            ngram_max: 1,
            rules_per_template_min: 1,
            rules_per_template_max: 1,
            copy_segments_min: 2,
            copy_segments_max: 2,
            n_dequeue_rules: 0,
            seed: self.seed,
        }
    }
}

/// Length of the longest n-gram (up to `cap`) occurring at least twice.
pub fn max_repeated_ngram(words: &[Word], cap: usize) -> usize {
    (1..=cap.min(words.len()))
        .rev()
        .find(|&n| {
            let mut seen = BTreeSet::new();
            words.windows(n).any(|w| !seen.insert(w))
        })
        .unwrap_or(0)
}

/// One single-turn conversation over a copy script.
pub fn copy_conversation(script: &Script, spec: &CopySpec, index: usize, stream: u64) -> Result<Conversation, DatagenError> {
    let mut rng = rng_for(spec.seed, stream);
    let candidates: Vec<usize> = (0..script.templates.len()).filter(|&i| Some(i) != script.null_index()).collect();
    let intended = candidates[rng.random_range(0..candidates.len())];
    let input = sample_sentence(
        &script.templates[intended],
        spec.segment_len_max,
        Unigram::Dirichlet(spec.concentration),
        &script.vocab,
        &mut rng,
    );
    let (mut eliza, _) = engine::respond(script, &DialogueState::new(), &input)?;
    let (matched, d) = engine::find_match(script, &input).expect("sentence matches its own template");
    let rule = eliza[0].meta.as_ref().map(|m| &script.rules_for(&script.templates[matched].id)[m.rule_index]);
    let repeats = rule.map(|r| r.group_refs().map(|k| max_repeated_ngram(d.group(k), REPEAT_CAP)).collect());
    for t in &mut eliza {
        if let Some(m) = &mut t.meta {
            m.collision = matched < intended;
        }
    }
    let mut turns = vec![Turn::user(input)];
    turns.extend(eliza);
    Ok(Conversation { id: index, seed: spec.seed, turns, repeats })
}

pub struct CopyDataset {
    pub script: Script,
    pub train: Vec<Conversation>,
    pub eval: Vec<Conversation>,
}

pub fn copy_dataset(spec: &CopySpec) -> Result<CopyDataset, DatagenError> {
    if spec.concentration.is_nan() || spec.concentration <= 0.0 {
        return Err(DatagenError::Spec("concentration must be positive".into()));
    }
    let script = sample_script(&spec.script_spec())?;
    let train = (0..spec.n_train)
        .into_par_iter()
        .map(|i| copy_conversation(&script, spec, i, i as u64))
        .collect::<Result<_, _>>()?;
    let eval = (0..spec.n_eval)
        .into_par_iter()
        .map(|i| copy_conversation(&script, spec, i, EVAL_STREAM + i as u64))
        .collect::<Result<_, _>>()?;
    Ok(CopyDataset { script, train, eval })
}

// ---------------------------------------------------------------------------
// Files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub kind: String,
    pub spec: serde_json::Value,
    pub config_sha256: String,
    pub master_seed: u64,
    pub script_path: String,
    pub script_sha256: String,
    pub n_conversations: usize,
    pub turn_types: BTreeMap<String, usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn turn_type_counts<'a>(convs: impl IntoIterator<Item = &'a Conversation>) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = TurnType::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect();
    for c in convs {
        for m in c.turns.iter().filter_map(|t| t.meta.as_ref()) {
            *counts.entry(m.turn_type.as_str().to_string()).or_default() += 1;
        }
    }
    counts
}

pub fn write_jsonl(path: &Path, convs: &[Conversation]) -> Result<(), DatagenError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for c in convs {
        let line = serde_json::to_string(c).expect("conversations serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Conversation>, DatagenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_jsonl(path, &text)
}

/// Parses JSONL text; errors cite the 1-based line.
pub fn parse_jsonl<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>, DatagenError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| DatagenError::Json { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

/// `d.jsonl` → `d.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_text(path: &Path, text: &str) -> Result<(), DatagenError> {
    fs::write(path, text).map_err(io_err(path))
}

fn manifest<S: Serialize>(
    kind: &str,
    spec: &S,
    seed: u64,
    script_path: &Path,
    script: &Script,
    convs: &[Conversation],
) -> Manifest {
    let spec = serde_json::to_value(spec).expect("specs serialize");
    Manifest {
        generator_version: GENERATOR_VERSION.into(),
        kind: kind.into(),
        config_sha256: sha256_hex(spec.to_string().as_bytes()),
        spec,
        master_seed: seed,
        script_path: script_path.display().to_string(),
        script_sha256: script.sha256(),
        n_conversations: convs.len(),
        turn_types: turn_type_counts(convs),
    }
}

/// Generates conversations for `script` and writes them to `out` with a
/// manifest beside it.
pub fn gen_dataset(
    script: &Script,
    script_path: &Path,
    spec: &ConversationSpec,
    out: &Path,
) -> Result<Manifest, DatagenError> {
    let convs = generate(script, spec)?;
    write_jsonl(out, &convs)?;
    let m = manifest("conversations", spec, spec.seed, script_path, script, &convs);
    write_text(&manifest_path(out), &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"))?;
    Ok(m)
}

/// Samples a script and writes it to `out` with a manifest beside it.
pub fn gen_script(spec: &ScriptSpec, out: &Path) -> Result<(Script, Manifest), DatagenError> {
    let script = sample_script(spec)?;
    write_text(out, &script.to_document())?;
    let m = manifest("script", spec, spec.seed, out, &script, &[]);
    write_text(&manifest_path(out), &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"))?;
    Ok((script, m))
}

/// Writes `script.json`, `train.jsonl`, `eval.jsonl` and `manifest.json`
/// into `dir`.
pub fn gen_copy_dataset(spec: &CopySpec, dir: &Path) -> Result<Manifest, DatagenError> {
    let ds = copy_dataset(spec)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let script_path = dir.join("script.json");
    write_text(&script_path, &ds.script.to_document())?;
    write_jsonl(&dir.join("train.jsonl"), &ds.train)?;
    write_jsonl(&dir.join("eval.jsonl"), &ds.eval)?;
    let all: Vec<Conversation> = ds.train.iter().chain(&ds.eval).cloned().collect();
    let m = manifest("copy", spec, spec.seed, &script_path, &ds.script, &all);
    write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"))?;
    Ok(m)
}
