//! ELIZA scripts: ranked decomposition templates, reassembly rules, memory
//! and null configuration, word translations and pre-transformation rules.
//!
//! Scripts are stored as a JSON document. Template rank is implicit in the
//! order of the `templates` array (first = tried first) and the null template
//! is always last.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::word::{Word, RESERVED};

/// Target id that re-runs the transformed input from the top of the script.
pub const RESTART: &str = "restart";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateSymbol {
    Literal(Word),
    /// `0`: zero or more words.
    Wildcard0,
    /// `n`: exactly `n` words.
    WildcardN(u32),
    /// `(a|b)`: one word from the set.
    Class(Vec<Word>),
}

impl TemplateSymbol {
    pub fn parse(tok: &str) -> Result<Self, String> {
        if tok.is_empty() {
            return Err("empty template symbol".into());
        }
        if tok.bytes().all(|b| b.is_ascii_digit()) {
            let n: u32 = tok.parse().map_err(|_| format!("bad wildcard count `{tok}`"))?;
            return Ok(if n == 0 { TemplateSymbol::Wildcard0 } else { TemplateSymbol::WildcardN(n) });
        }
        if let Some(inner) = tok.strip_prefix('(') {
            let inner = inner
                .strip_suffix(')')
                .ok_or_else(|| format!("unterminated class `{tok}`"))?;
            let members: Vec<Word> = inner.split('|').filter(|s| !s.is_empty()).map(Word::from).collect();
            return Ok(TemplateSymbol::Class(members));
        }
        if tok.contains(['(', ')', '|']) {
            return Err(format!("malformed symbol `{tok}`"));
        }
        Ok(TemplateSymbol::Literal(Word::from(tok)))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, TemplateSymbol::Literal(_))
    }
}

impl fmt::Display for TemplateSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateSymbol::Literal(w) => write!(f, "{w}"),
            TemplateSymbol::Wildcard0 => f.write_str("0"),
            TemplateSymbol::WildcardN(n) => write!(f, "{n}"),
            TemplateSymbol::Class(ws) => {
                f.write_str("(")?;
                for (i, w) in ws.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{w}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Unit of the matching automaton. `WildcardN(n)` expands to `n` `Any` atoms;
/// every other symbol is one atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Star,
    Word(Word),
    Class(Vec<Word>),
    Any,
}

impl Atom {
    pub fn is_star(&self) -> bool {
        matches!(self, Atom::Star)
    }

    /// Whether a fixed-width atom consumes `w`. Reserved tokens are never
    /// consumed. Not meaningful for `Star`.
    pub fn accepts(&self, w: &Word) -> bool {
        if w.is_reserved() {
            return false;
        }
        match self {
            Atom::Star | Atom::Any => true,
            Atom::Word(x) => x == w,
            Atom::Class(ws) => ws.contains(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub symbols: Vec<TemplateSymbol>,
    atoms: Vec<Atom>,
    /// 1-based symbol index of each atom.
    atom_symbol: Vec<usize>,
}

impl Template {
    pub fn new(id: impl Into<String>, symbols: Vec<TemplateSymbol>) -> Self {
        let mut atoms = Vec::new();
        let mut atom_symbol = Vec::new();
        for (i, s) in symbols.iter().enumerate() {
            match s {
                TemplateSymbol::Literal(w) => {
                    atoms.push(Atom::Word(w.clone()));
                    atom_symbol.push(i + 1);
                }
                TemplateSymbol::Wildcard0 => {
                    atoms.push(Atom::Star);
                    atom_symbol.push(i + 1);
                }
                TemplateSymbol::WildcardN(n) => {
                    for _ in 0..*n {
                        atoms.push(Atom::Any);
                        atom_symbol.push(i + 1);
                    }
                }
                TemplateSymbol::Class(ws) => {
                    atoms.push(Atom::Class(ws.clone()));
                    atom_symbol.push(i + 1);
                }
            }
        }
        Template { id: id.into(), symbols, atoms, atom_symbol }
    }

    /// Parses a space-separated pattern such as `0 a (b|c) 2 0`.
    pub fn parse(id: impl Into<String>, pattern: &str) -> Result<Self, String> {
        let symbols = pattern
            .split_whitespace()
            .map(TemplateSymbol::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Template::new(id, symbols))
    }

    pub fn pattern(&self) -> String {
        self.symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// 1-based symbol index for the 1-based atom index `atom`; 0 maps to 0.
    pub fn symbol_of_atom(&self, atom: usize) -> usize {
        if atom == 0 {
            0
        } else {
            self.atom_symbol[atom - 1]
        }
    }

    pub fn wildcard_count(&self) -> usize {
        self.symbols.iter().filter(|s| matches!(s, TemplateSymbol::Wildcard0)).count()
    }

    /// 1-based indices of the non-literal symbols (the copyable groups).
    pub fn group_indices(&self) -> Vec<usize> {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_literal())
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn is_null_shaped(&self) -> bool {
        self.symbols == [TemplateSymbol::Wildcard0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleElement {
    Group(usize),
    Literal(Word),
}

/// A response recipe. The emitted response is `prefix ++ realized body`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReassemblyRule {
    #[serde(default)]
    pub prefix: Vec<Word>,
    pub body: Vec<RuleElement>,
}

impl ReassemblyRule {
    pub fn new(prefix: Vec<Word>, body: Vec<RuleElement>) -> Self {
        ReassemblyRule { prefix, body }
    }

    /// Parses a compact body such as `c 2 d 5` (integers are group refs).
    pub fn parse_body(prefix: &[&str], body: &str) -> Self {
        let body = body
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(k) => RuleElement::Group(k),
                Err(_) => RuleElement::Literal(Word::from(t)),
            })
            .collect();
        ReassemblyRule { prefix: prefix.iter().map(|w| Word::from(*w)).collect(), body }
    }

    pub fn group_refs(&self) -> impl Iterator<Item = usize> + '_ {
        self.body.iter().filter_map(|e| match e {
            RuleElement::Group(k) => Some(*k),
            RuleElement::Literal(_) => None,
        })
    }

    /// Parts in emission order: prefix words then body elements.
    pub fn parts(&self) -> impl Iterator<Item = RuleElement> + '_ {
        self.prefix.iter().cloned().map(RuleElement::Literal).chain(self.body.iter().cloned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NullCycleMode {
    /// Null cycle counter advances on every null input, including those
    /// answered from the memory queue.
    #[default]
    OnInput,
    /// Counter advances only when a null response is actually emitted.
    OnResponse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryConfig {
    pub template_id: String,
    pub dequeue_rules: Vec<ReassemblyRule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PretransformTarget {
    Restart,
    Template(String),
}

impl PretransformTarget {
    fn as_str(&self) -> &str {
        match self {
            PretransformTarget::Restart => RESTART,
            PretransformTarget::Template(id) => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pretransform {
    pub template: Template,
    pub rule: ReassemblyRule,
    pub target: PretransformTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub vocab: Vec<Word>,
    /// Rank order: index 0 is tried first.
    pub templates: Vec<Template>,
    pub rules: BTreeMap<String, Vec<ReassemblyRule>>,
    pub memory: Option<MemoryConfig>,
    pub null_template_id: Option<String>,
    pub null_cycle_mode: NullCycleMode,
    pub translations: BTreeMap<Word, Word>,
    pub pretransforms: Vec<Pretransform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    ReservedInVocab,
    UnknownWord,
    EmptyClass,
    AdjacentWildcards,
    DuplicateTemplateId,
    EmptyTemplate,
    NullNotSingleWildcard,
    NullNotLast,
    MissingTemplate,
    MissingRules,
    DanglingGroupRef,
    BadPrefixLength,
    DuplicatePrefix,
    MemoryIsNull,
    EmptyDequeueRules,
}

impl ViolationKind {
    pub fn message(self) -> &'static str {
        match self {
            ViolationKind::ReservedInVocab => "reserved token in vocabulary",
            ViolationKind::UnknownWord => "word not in vocabulary",
            ViolationKind::EmptyClass => "empty word class",
            ViolationKind::AdjacentWildcards => "adjacent wildcards",
            ViolationKind::DuplicateTemplateId => "duplicate template id",
            ViolationKind::EmptyTemplate => "empty template",
            ViolationKind::NullNotSingleWildcard => "null template must be a single wildcard",
            ViolationKind::NullNotLast => "null template must be ranked last",
            ViolationKind::MissingTemplate => "unknown template id",
            ViolationKind::MissingRules => "template has no reassembly rules",
            ViolationKind::DanglingGroupRef => "dangling group reference",
            ViolationKind::BadPrefixLength => "rule prefix must be exactly two words",
            ViolationKind::DuplicatePrefix => "duplicate rule prefix",
            ViolationKind::MemoryIsNull => "memory template must differ from null template",
            ViolationKind::EmptyDequeueRules => "memory needs at least one dequeue rule",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub context: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.kind.message(), self.context)
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid template `{id}`: {message}")]
    Pattern { id: String, message: String },
    #[error("invalid script: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

// ---------------------------------------------------------------------------
// Document form

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    id: String,
    pattern: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryDoc {
    template_id: String,
    dequeue_rules: Vec<ReassemblyRule>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PretransformDoc {
    pattern: String,
    rule: ReassemblyRule,
    target: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptDoc {
    vocab: Vec<Word>,
    templates: Vec<TemplateDoc>,
    rules: BTreeMap<String, Vec<ReassemblyRule>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    memory: Option<MemoryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    null_template_id: Option<String>,
    #[serde(default)]
    null_cycle_mode: NullCycleMode,
    #[serde(default)]
    translations: BTreeMap<Word, Word>,
    #[serde(default)]
    pretransforms: Vec<PretransformDoc>,
}

impl Script {
    /// Parses and validates a script document.
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let doc: ScriptDoc = serde_json::from_str(text).map_err(|e| ScriptError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let templates = doc
            .templates
            .into_iter()
            .map(|t| {
                Template::parse(t.id.clone(), &t.pattern)
                    .map_err(|message| ScriptError::Pattern { id: t.id, message })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pretransforms = doc
            .pretransforms
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let id = format!("pre{i}");
                let template = Template::parse(id.clone(), &p.pattern)
                    .map_err(|message| ScriptError::Pattern { id, message })?;
                let target = if p.target == RESTART {
                    PretransformTarget::Restart
                } else {
                    PretransformTarget::Template(p.target)
                };
                Ok(Pretransform { template, rule: p.rule, target })
            })
            .collect::<Result<Vec<_>, ScriptError>>()?;
        let script = Script {
            vocab: doc.vocab,
            templates,
            rules: doc.rules,
            memory: doc.memory.map(|m| MemoryConfig { template_id: m.template_id, dequeue_rules: m.dequeue_rules }),
            null_template_id: doc.null_template_id,
            null_cycle_mode: doc.null_cycle_mode,
            translations: doc.translations,
            pretransforms,
        };
        let violations = script.validate();
        if violations.is_empty() {
            Ok(script)
        } else {
            Err(ScriptError::Invalid(violations))
        }
    }

    /// Canonical document text (pretty JSON, trailing newline).
    pub fn to_document(&self) -> String {
        let doc = ScriptDoc {
            vocab: self.vocab.clone(),
            templates: self
                .templates
                .iter()
                .map(|t| TemplateDoc { id: t.id.clone(), pattern: t.pattern() })
                .collect(),
            rules: self.rules.clone(),
            memory: self.memory.as_ref().map(|m| MemoryDoc {
                template_id: m.template_id.clone(),
                dequeue_rules: m.dequeue_rules.clone(),
            }),
            null_template_id: self.null_template_id.clone(),
            null_cycle_mode: self.null_cycle_mode,
            translations: self.translations.clone(),
            pretransforms: self
                .pretransforms
                .iter()
                .map(|p| PretransformDoc {
                    pattern: p.template.pattern(),
                    rule: p.rule.clone(),
                    target: p.target.as_str().to_string(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("script document serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical document.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_document().as_bytes()))
    }

    pub fn template_index(&self, id: &str) -> Option<usize> {
        self.templates.iter().position(|t| t.id == id)
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn rules_for(&self, id: &str) -> &[ReassemblyRule] {
        self.rules.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn null_index(&self) -> Option<usize> {
        self.null_template_id.as_deref().and_then(|id| self.template_index(id))
    }

    pub fn memory_index(&self) -> Option<usize> {
        self.memory.as_ref().and_then(|m| self.template_index(&m.template_id))
    }

    pub fn in_vocab(&self, w: &Word) -> bool {
        self.vocab.contains(w)
    }

    /// Word-level translation; simultaneous substitution, length preserved.
    pub fn translate(&self, utterance: &[Word]) -> Vec<Word> {
        utterance
            .iter()
            .map(|w| self.translations.get(w).cloned().unwrap_or_else(|| w.clone()))
            .collect()
    }

    /// Every invariant violation; empty means the script is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, context: String| out.push(Violation { kind, context });
        let vocab: HashSet<&Word> = self.vocab.iter().collect();

        for w in &self.vocab {
            if RESERVED.contains(&w.as_str()) {
                push(ViolationKind::ReservedInVocab, format!("`{w}`"));
            }
        }

        let check_template = |t: &Template, push: &mut dyn FnMut(ViolationKind, String)| {
            if t.symbols.is_empty() {
                push(ViolationKind::EmptyTemplate, format!("template `{}`", t.id));
            }
            for pair in t.symbols.windows(2) {
                if pair[0] == TemplateSymbol::Wildcard0 && pair[1] == TemplateSymbol::Wildcard0 {
                    push(ViolationKind::AdjacentWildcards, format!("template `{}`", t.id));
                }
            }
            for s in &t.symbols {
                match s {
                    TemplateSymbol::Literal(w) if !vocab.contains(w) => {
                        push(ViolationKind::UnknownWord, format!("`{w}` in template `{}`", t.id))
                    }
                    TemplateSymbol::Class(ws) if ws.is_empty() => {
                        push(ViolationKind::EmptyClass, format!("template `{}`", t.id))
                    }
                    TemplateSymbol::Class(ws) => {
                        for w in ws.iter().filter(|w| !vocab.contains(w)) {
                            push(ViolationKind::UnknownWord, format!("`{w}` in template `{}`", t.id));
                        }
                    }
                    _ => {}
                }
            }
        };

        let check_rule = |t: &Template,
                          r: &ReassemblyRule,
                          needs_prefix: bool,
                          what: &str,
                          push: &mut dyn FnMut(ViolationKind, String)| {
            if needs_prefix && r.prefix.len() != 2 {
                push(ViolationKind::BadPrefixLength, what.to_string());
            }
            for w in &r.prefix {
                if !vocab.contains(w) {
                    push(ViolationKind::UnknownWord, format!("`{w}` in {what}"));
                }
            }
            for e in &r.body {
                match e {
                    RuleElement::Literal(w) if !vocab.contains(w) => {
                        push(ViolationKind::UnknownWord, format!("`{w}` in {what}"))
                    }
                    RuleElement::Group(k) => {
                        let ok = *k >= 1 && *k <= t.symbols.len() && !t.symbols[*k - 1].is_literal();
                        if !ok {
                            push(ViolationKind::DanglingGroupRef, format!("group {k} in {what}"));
                        }
                    }
                    _ => {}
                }
            }
        };

        let mut seen_ids = HashSet::new();
        for t in &self.templates {
            if !seen_ids.insert(t.id.as_str()) || t.id == RESTART {
                push(ViolationKind::DuplicateTemplateId, format!("`{}`", t.id));
            }
            check_template(t, &mut push);
        }

        if let Some(null_id) = &self.null_template_id {
            match self.template_index(null_id) {
                None => push(ViolationKind::MissingTemplate, format!("null template `{null_id}`")),
                Some(i) => {
                    if !self.templates[i].is_null_shaped() {
                        push(ViolationKind::NullNotSingleWildcard, format!("template `{null_id}`"));
                    }
                    if i + 1 != self.templates.len() {
                        push(ViolationKind::NullNotLast, format!("template `{null_id}`"));
                    }
                }
            }
        }

        for id in self.rules.keys() {
            if self.template_index(id).is_none() {
                push(ViolationKind::MissingTemplate, format!("rules for `{id}`"));
            }
        }

        let mut prefixes: BTreeSet<(Word, Word)> = BTreeSet::new();
        let mut note_prefix = |r: &ReassemblyRule, what: &str, push: &mut dyn FnMut(ViolationKind, String)| {
            if let [a, b] = r.prefix.as_slice() {
                if !prefixes.insert((a.clone(), b.clone())) {
                    push(ViolationKind::DuplicatePrefix, format!("`{a} {b}` in {what}"));
                }
            }
        };

        for t in &self.templates {
            let rules = self.rules_for(&t.id);
            if rules.is_empty() {
                push(ViolationKind::MissingRules, format!("template `{}`", t.id));
            }
            for (i, r) in rules.iter().enumerate() {
                let what = format!("rule {i} of `{}`", t.id);
                check_rule(t, r, true, &what, &mut push);
                note_prefix(r, &what, &mut push);
            }
        }

        if let Some(mem) = &self.memory {
            if Some(&mem.template_id) == self.null_template_id.as_ref() {
                push(ViolationKind::MemoryIsNull, format!("`{}`", mem.template_id));
            }
            if mem.dequeue_rules.is_empty() {
                push(ViolationKind::EmptyDequeueRules, format!("`{}`", mem.template_id));
            }
            match self.template(&mem.template_id) {
                None => push(ViolationKind::MissingTemplate, format!("memory template `{}`", mem.template_id)),
                Some(t) => {
                    for (i, r) in mem.dequeue_rules.iter().enumerate() {
                        let what = format!("dequeue rule {i}");
                        check_rule(t, r, true, &what, &mut push);
                        note_prefix(r, &what, &mut push);
                    }
                }
            }
        }

        for (i, p) in self.pretransforms.iter().enumerate() {
            check_template(&p.template, &mut push);
            check_rule(&p.template, &p.rule, false, &format!("pretransform {i}"), &mut push);
            if let PretransformTarget::Template(id) = &p.target {
                if self.template_index(id).is_none() {
                    push(ViolationKind::MissingTemplate, format!("target `{id}` of pretransform {i}"));
                }
            }
        }

        for (from, to) in &self.translations {
            for w in [from, to] {
                if !vocab.contains(w) {
                    push(ViolationKind::UnknownWord, format!("`{w}` in translations"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::words;

    fn minimal() -> &'static str {
        r#"{
  "vocab": ["a", "b", "c", "d"],
  "templates": [{"id": "t0", "pattern": "0 a 0"}, {"id": "null", "pattern": "0"}],
  "rules": {
    "t0": [{"prefix": ["b", "c"], "body": [1, "d", 3]}],
    "null": [{"prefix": ["d", "d"], "body": []}]
  },
  "null_template_id": "null"
}"#
    }

    #[test]
    fn parses_minimal_script() {
        let s = Script::parse(minimal()).unwrap();
        assert_eq!(s.templates.len(), 2);
        assert_eq!(s.null_index(), Some(1));
        assert_eq!(s.templates[0].pattern(), "0 a 0");
        assert_eq!(s.rules_for("t0")[0].body[1], RuleElement::Literal(Word::from("d")));
    }

    #[test]
    fn round_trips_canonical_form() {
        let s = Script::parse(minimal()).unwrap();
        let doc = s.to_document();
        let again = Script::parse(&doc).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_document(), doc);
    }

    #[test]
    fn duplicate_prefix_rejected() {
        let text = minimal().replace(r#"["d", "d"]"#, r#"["b", "c"]"#);
        match Script::parse(&text) {
            Err(ScriptError::Invalid(v)) => {
                assert!(v.iter().any(|v| v.kind == ViolationKind::DuplicatePrefix), "{v:?}");
                assert!(v[0].to_string().starts_with("duplicate rule prefix"));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = Script::parse("{\n  \"vocab\": [,]\n}").unwrap_err();
        match err {
            ScriptError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn null_must_be_single_wildcard() {
        let mut s = Script::parse(minimal()).unwrap();
        s.templates[1] = Template::parse("null", "a 0").unwrap();
        let v = s.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind.message(), "null template must be a single wildcard");
    }

    #[test]
    fn dangling_group_reference() {
        let mut s = Script::parse(minimal()).unwrap();
        // `0 a` has two symbols; group 3 does not exist.
        s.templates[0] = Template::parse("t0", "0 a").unwrap();
        let v = s.validate();
        assert_eq!(v.iter().map(|v| v.kind).collect::<Vec<_>>(), vec![ViolationKind::DanglingGroupRef]);
        // Referencing a literal symbol is also dangling.
        s.rules.get_mut("t0").unwrap()[0].body = vec![RuleElement::Group(2)];
        assert_eq!(s.validate()[0].kind, ViolationKind::DanglingGroupRef);
    }

    #[test]
    fn adjacent_wildcards_rejected() {
        let mut s = Script::parse(minimal()).unwrap();
        s.templates[0] = Template::parse("t0", "0 0 a").unwrap();
        assert!(s.validate().iter().any(|v| v.kind == ViolationKind::AdjacentWildcards));
    }

    #[test]
    fn symbol_parsing() {
        let t = Template::parse("x", "0 a 2 (b|c)").unwrap();
        assert_eq!(
            t.symbols,
            vec![
                TemplateSymbol::Wildcard0,
                TemplateSymbol::Literal(Word::from("a")),
                TemplateSymbol::WildcardN(2),
                TemplateSymbol::Class(vec![Word::from("b"), Word::from("c")]),
            ]
        );
        assert_eq!(t.atoms().len(), 5);
        assert_eq!(t.symbol_of_atom(4), 3);
        assert_eq!(t.pattern(), "0 a 2 (b|c)");
        assert_eq!(t.group_indices(), vec![1, 3, 4]);
        assert!(Template::parse("x", "(a|b").is_err());
    }

    #[test]
    fn translate_direct_substitution() {
        let mut s = Script::parse(minimal()).unwrap();
        s.translations.insert(Word::from("a"), Word::from("c"));
        assert_eq!(s.translate(&words("d a b")), words("d c b"));
        s.translations.clear();
        assert_eq!(s.translate(&words("d a b")), words("d a b"));
    }

    #[test]
    fn translate_is_simultaneous() {
        let mut s = Script::parse(minimal()).unwrap();
        s.translations.insert(Word::from("a"), Word::from("b"));
        s.translations.insert(Word::from("b"), Word::from("a"));
        let input = words("a b");
        // One-pass map oracle.
        let oracle: Vec<Word> = input
            .iter()
            .map(|w| match w.as_str() {
                "a" => Word::from("b"),
                "b" => Word::from("a"),
                _ => w.clone(),
            })
            .collect();
        assert_eq!(s.translate(&input), oracle);
        assert_eq!(oracle, words("b a"));
    }
}
