//! Template matching as a layered prefix cascade, its reduced-depth variant,
//! and the generation-time label correction.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Rational64;
use thiserror::Error;

use super::primitives::{mean_row, one_hot_row, select_row};
use super::tensor::{is_delimiter, SeqTensor};
use crate::script::{Atom, Template};
use crate::word::Word;

/// Default number of attention heads available per layer.
pub const DEFAULT_HEAD_BUDGET: usize = 12;

/// Per-layer update of one atom flag at one position.
///
/// `same` is the previous prefix at this position, `just` the previous prefix
/// at the previous position of the segment, `ever` whether the previous
/// prefix held at any earlier position of the segment.
pub fn atom_step(atom: &Atom, after_star: bool, same: bool, just: bool, ever: bool, word: &Word) -> bool {
    match atom {
        // Adjacent wildcards: the earlier one stays empty.
        Atom::Star if after_star => same,
        Atom::Star => ever,
        _ if after_star => same && atom.accepts(word),
        _ => just && atom.accepts(word),
    }
}

fn ints(t: &SeqTensor, name: &str) -> Vec<i64> {
    t.ints(name).unwrap_or_else(|| panic!("tensor lacks `{name}`; run segment first"))
}

fn bit(v: bool) -> Rational64 {
    Rational64::from_integer(v as i64)
}

/// Prefix flags `[template][atom l][position]`, computed one layer per atom
/// with a uniform "ever matched" head and a "previous position" head, both
/// confined to the query's segment.
pub fn cascade(tensor: &SeqTensor, templates: &[Template]) -> Vec<Vec<Vec<bool>>> {
    let n = tensor.len();
    let ids = ints(tensor, "segment_ids");
    let pos = ints(tensor, "segment_positions");
    let keys: Vec<(i64, i64)> = ids.iter().copied().zip(pos.iter().copied()).collect();
    let frac_rows: Vec<Vec<bool>> =
        (0..n).map(|q| select_row(&keys, &keys[q], q, |a, b| a.0 == b.0 && a.1 != b.1)).collect();
    let prev_rows: Vec<Vec<bool>> =
        (0..n).map(|q| select_row(&keys, &keys[q], q, |a, b| a.0 == b.0 && b.1 == a.1 - 1)).collect();
    let tokens = tensor.tokens();
    let start: Vec<bool> = tokens.iter().map(is_delimiter).collect();

    templates
        .iter()
        .map(|t| {
            let atoms = t.atoms();
            let mut layers = vec![start.clone()];
            for (l, atom) in atoms.iter().enumerate() {
                let prev = &layers[l];
                let vals: Vec<Rational64> = prev.iter().map(|&b| bit(b)).collect();
                let after_star = l >= 1 && atoms[l - 1].is_star();
                let next = (0..n)
                    .map(|q| {
                        let ever = mean_row(&frac_rows[q], &vals) > Rational64::from_integer(0);
                        let just = one_hot_row(&prev_rows[q], &vals).is_some_and(|v| *v == bit(true));
                        atom_step(atom, after_star, prev[q], just, ever, &tokens[q])
                    })
                    .collect();
                layers.push(next);
            }
            layers
        })
        .collect()
}

/// Longest set prefix flag per position (atom index, 0 if none).
pub fn atom_states_from(flags: &[Vec<bool>]) -> Vec<usize> {
    let n = flags[0].len();
    (0..n).map(|i| (1..flags.len()).rev().find(|&l| flags[l][i]).unwrap_or(0)).collect()
}

/// Per-template, per-position longest matching prefix (1-based symbol index).
pub fn match_templates(tensor: &SeqTensor, templates: &[Template]) -> Vec<Vec<usize>> {
    cascade(tensor, templates)
        .iter()
        .zip(templates)
        .map(|(flags, t)| atom_states_from(flags).into_iter().map(|a| t.symbol_of_atom(a)).collect())
        .collect()
}

/// Relabels positions so that group spans follow lazy-leftmost semantics.
///
/// Fixed-width atom runs are placed deterministically: the leading run at the
/// start of the input, the trailing run at its end, and every interior run at
/// the first position where the automaton completes it. Everything between
/// runs belongs to the wildcard separating them. Takes atom-level states and
/// returns symbol labels.
pub fn correct_labels(template: &Template, atom_states: &[usize]) -> Vec<usize> {
    let atoms = template.atoms();
    let n = atom_states.len();
    let naive = || atom_states.iter().map(|&a| template.symbol_of_atom(a)).collect::<Vec<_>>();
    // Maximal runs of fixed atoms as (first atom, last atom), 1-based.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if a.is_star() {
            continue;
        }
        match runs.last_mut() {
            Some(r) if r.1 == i => r.1 = i + 1,
            _ => runs.push((i + 1, i + 1)),
        }
    }
    let mut starts = Vec::with_capacity(runs.len());
    for &(first, last) in &runs {
        let len = last - first + 1;
        let s = if first == 1 {
            0
        } else if last == atoms.len() {
            match n.checked_sub(len) {
                Some(s) => s,
                None => return naive(),
            }
        } else {
            match atom_states.iter().position(|&s| s == last) {
                Some(end) if end + 1 >= len => end + 1 - len,
                _ => return naive(),
            }
        };
        starts.push(s);
    }
    let mut labels = vec![0; n];
    let mut cursor = 0;
    let mut run = 0;
    let mut a = 1;
    while a <= atoms.len() {
        if atoms[a - 1].is_star() && atoms.get(a).is_some_and(Atom::is_star) {
            a += 1;
        } else if atoms[a - 1].is_star() {
            let until = starts.get(run).copied().unwrap_or(n);
            if until < cursor {
                return naive();
            }
            for l in &mut labels[cursor..until] {
                *l = template.symbol_of_atom(a);
            }
            cursor = until;
            a += 1;
        } else {
            let (first, last) = runs[run];
            let s = starts[run];
            if s < cursor || s + (last - first + 1) > n {
                return naive();
            }
            for (r, atom) in (first..=last).enumerate() {
                labels[s + r] = template.symbol_of_atom(atom);
            }
            cursor = s + (last - first + 1);
            run += 1;
            a = last + 1;
        }
    }
    if cursor != n {
        return naive();
    }
    labels
}

// ---------------------------------------------------------------------------
// Reduced-depth plans

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Head {
    /// Reads the word at a fixed offset from the segment start (1 = first word).
    Anchor(usize),
    /// Reads the word `d` positions back inside the segment.
    Offset(usize),
    /// Whether the previous layer's prefix held strictly before position `q - d`.
    EverBefore(usize),
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Anchor(p) => write!(f, "anchor({p})"),
            Head::Offset(d) => write!(f, "offset({d})"),
            Head::EverBefore(d) => write!(f, "ever_before({d})"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("template `{template}` needs {needed} heads in layer {layer}, budget is {budget}")]
    HeadBudget { template: String, layer: usize, needed: usize, budget: usize },
}

/// One wildcard and the fixed run after it.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Stage {
    star_atom: usize,
    run: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TemplatePlan {
    lead: Vec<Atom>,
    stages: Vec<Stage>,
    n_atoms: usize,
}

impl TemplatePlan {
    fn depth(&self) -> usize {
        self.stages.len().max(1)
    }

    fn heads(&self, layer: usize) -> BTreeSet<Head> {
        let mut heads = BTreeSet::new();
        if layer == 1 {
            heads.extend((1..=self.lead.len()).map(Head::Anchor));
        }
        if let Some(stage) = self.stages.get(layer - 1) {
            let m = stage.run.len();
            heads.extend((1..m).map(Head::Offset));
            if layer > 1 {
                heads.extend((0..m.max(1)).map(Head::EverBefore));
            }
        }
        heads
    }
}

/// Layer schedule with one layer per wildcard; n-gram runs are matched in
/// parallel heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    templates: Vec<TemplatePlan>,
    pub head_budget: usize,
}

pub fn reduce_layers(templates: &[Template], head_budget: usize) -> Result<LayerPlan, PlanError> {
    let mut plans = Vec::new();
    for t in templates {
        let atoms = t.atoms();
        let first_star = atoms.iter().position(Atom::is_star).unwrap_or(atoms.len());
        let lead = atoms[..first_star].to_vec();
        let mut stages = Vec::new();
        let mut a = first_star;
        while a < atoms.len() {
            let end = atoms[a + 1..].iter().position(Atom::is_star).map_or(atoms.len(), |p| a + 1 + p);
            stages.push(Stage { star_atom: a + 1, run: atoms[a + 1..end].to_vec() });
            a = end;
        }
        let plan = TemplatePlan { lead, stages, n_atoms: atoms.len() };
        for layer in 1..=plan.depth() {
            let needed = plan.heads(layer).len();
            if needed > head_budget {
                return Err(PlanError::HeadBudget { template: t.id.clone(), layer, needed, budget: head_budget });
            }
        }
        plans.push(plan);
    }
    Ok(LayerPlan { templates: plans, head_budget })
}

impl LayerPlan {
    pub fn depth(&self) -> usize {
        self.templates.iter().map(TemplatePlan::depth).max().unwrap_or(1)
    }

    pub fn template_depths(&self) -> Vec<usize> {
        self.templates.iter().map(TemplatePlan::depth).collect()
    }

    /// Union of heads used in `layer` (1-based) across all templates.
    pub fn heads(&self, layer: usize) -> BTreeSet<Head> {
        self.templates.iter().filter(|p| layer <= p.depth()).flat_map(|p| p.heads(layer)).collect()
    }

    /// Flags (bit `l` = atom prefix `l`) of template `ti` at the last position
    /// of `seg`, where `seg[0]` is the segment delimiter and `earlier[j]` holds
    /// the flags already computed at `seg[j]`.
    pub fn flags_at(&self, ti: usize, seg: &[Word], earlier: &[u64]) -> u64 {
        let plan = &self.templates[ti];
        let q = seg.len() - 1;
        let mut f = u64::from(q == 0);
        let lead_len = plan.lead.len();
        let anchor_ok = |p: usize| seg.get(p + 1).is_some_and(|w| plan.lead[p].accepts(w));
        for r in 0..lead_len {
            if q == r + 1 && (0..=r).all(anchor_ok) {
                f |= 1 << (r + 1);
            }
        }
        let lead_ok = q >= lead_len && (0..lead_len).all(anchor_ok);
        let mut prev_last = lead_len;
        for (k, stage) in plan.stages.iter().enumerate() {
            let held_before = |d: usize| -> bool {
                if q < d {
                    return false;
                }
                if k == 0 {
                    lead_ok && q - d > lead_len
                } else {
                    earlier[..q - d].iter().any(|e| e >> prev_last & 1 == 1)
                }
            };
            if held_before(0) {
                f |= 1 << stage.star_atom;
            }
            for r in 0..stage.run.len() {
                let words_ok = q > r && (0..=r).all(|d| stage.run[r - d].accepts(&seg[q - d]));
                if words_ok && held_before(r) {
                    f |= 1 << (stage.star_atom + 1 + r);
                }
            }
            prev_last = stage.star_atom + stage.run.len();
        }
        f
    }

    /// Prefix flags in the same layout as [`cascade`].
    pub fn execute(&self, tensor: &SeqTensor) -> Vec<Vec<Vec<bool>>> {
        let n = tensor.len();
        let ids = ints(tensor, "segment_ids");
        let pos = ints(tensor, "segment_positions");
        let keys: Vec<(i64, i64)> = ids.iter().copied().zip(pos.iter().copied()).collect();
        let tokens = tensor.tokens();
        let max_anchor = self.templates.iter().map(|p| p.lead.len()).max().unwrap_or(0);
        let max_offset = self.templates.iter().flat_map(|p| p.stages.iter().map(|s| s.run.len())).max().unwrap_or(0);

        // anchor[p][q]: word at segment offset p (delimiter is offset 0).
        let anchor: Vec<Vec<Option<Word>>> = (1..=max_anchor)
            .map(|p| {
                (0..n)
                    .map(|q| {
                        let row = select_row(&keys, &keys[q], q, |a, b| a.0 == b.0 && b.1 == p as i64 + 1);
                        one_hot_row(&row, tokens).cloned()
                    })
                    .collect()
            })
            .collect();
        // offset[d][q]: word d positions back in the segment.
        let offset: Vec<Vec<Option<Word>>> = (0..max_offset.max(1))
            .map(|d| {
                (0..n)
                    .map(|q| {
                        let row = select_row(&keys, &keys[q], q, |a, b| a.0 == b.0 && b.1 == a.1 - d as i64);
                        one_hot_row(&row, tokens).cloned()
                    })
                    .collect()
            })
            .collect();
        let in_segment: Vec<bool> = (0..n).map(|q| ids[q] > 0).collect();
        // Word index inside the segment: delimiter is 0.
        let widx: Vec<i64> = pos.iter().map(|p| p - 1).collect();

        self.templates
            .iter()
            .map(|plan| {
                let mut flags = vec![vec![false; n]; plan.n_atoms + 1];
                for q in 0..n {
                    flags[0][q] = is_delimiter(&tokens[q]);
                }
                // Layer 1: leading run via anchors.
                let lead_len = plan.lead.len();
                for r in 0..lead_len {
                    for q in 0..n {
                        let ok = in_segment[q]
                            && widx[q] == r as i64 + 1
                            && (0..=r).all(|p| {
                                anchor[p][q].as_ref().is_some_and(|w| plan.lead[p].accepts(w))
                            });
                        flags[r + 1][q] = ok;
                    }
                }
                let lead_ok: Vec<bool> = (0..n)
                    .map(|q| {
                        in_segment[q]
                            && (0..lead_len).all(|p| anchor[p][q].as_ref().is_some_and(|w| plan.lead[p].accepts(w)))
                    })
                    .collect();
                let mut prev_last = lead_len;
                for (k, stage) in plan.stages.iter().enumerate() {
                    let star = stage.star_atom;
                    let vals: Vec<Rational64> = flags[prev_last].iter().map(|&b| bit(b)).collect();
                    // Previous prefix held strictly before `q - d`.
                    let held_before = |d: usize, q: usize| -> bool {
                        if k == 0 {
                            lead_ok[q] && widx[q] - d as i64 > lead_len as i64
                        } else {
                            let row = select_row(&keys, &keys[q], q, |a, b| a.0 == b.0 && b.1 < a.1 - d as i64);
                            mean_row(&row, &vals) > Rational64::from_integer(0)
                        }
                    };
                    let star_flags: Vec<bool> = (0..n).map(|q| in_segment[q] && held_before(0, q)).collect();
                    let mut run_flags = vec![vec![false; n]; stage.run.len()];
                    for (r, slot) in run_flags.iter_mut().enumerate() {
                        for q in 0..n {
                            let words_ok = (0..=r).all(|d| {
                                offset[d][q].as_ref().is_some_and(|w| stage.run[r - d].accepts(w))
                            });
                            slot[q] = in_segment[q] && words_ok && widx[q] > r as i64 && held_before(r, q);
                        }
                    }
                    flags[star] = star_flags;
                    for (r, f) in run_flags.into_iter().enumerate() {
                        flags[star + 1 + r] = f;
                    }
                    prev_last = star + stage.run.len();
                }
                flags
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::tensor::segment;
    use crate::engine;
    use crate::word::words;

    fn tpl(p: &str) -> Template {
        Template::parse("t", p).unwrap()
    }

    fn seg(input: &str) -> SeqTensor {
        let mut toks = words("u:");
        toks.extend(words(input));
        segment(&toks, 64, 64)
    }

    #[test]
    fn cascade_reproduces_worked_states() {
        let t = seg("a a a b b a b");
        let s = match_templates(&t, &[tpl("a 0 b b 0")]);
        assert_eq!(s[0][1..], [1, 2, 2, 3, 4, 5, 5]);
        let t = seg("b a c a a b");
        let s = match_templates(&t, &[tpl("0 a b")]);
        assert_eq!(s[0][1..], [1, 2, 1, 2, 2, 3]);
    }

    #[test]
    fn correction_of_lookahead_example() {
        let t = tpl("0 a b");
        assert_eq!(correct_labels(&t, &[1, 2, 1, 2, 2, 3]), vec![1, 1, 1, 1, 2, 3]);
        let t = tpl("a 0 b b 0");
        assert_eq!(correct_labels(&t, &[1, 2, 2, 3, 4, 5, 5]), vec![1, 2, 2, 3, 4, 5, 5]);
        let t = tpl("0 1 a b");
        let input = words("b a c a a b");
        let d = engine::decompose(&t, &input).unwrap();
        assert_eq!(correct_labels(&t, &engine::atom_states(&t, &input)), d.labels());
    }

    #[test]
    fn reduced_plan_combining_wildcards() {
        let t = tpl("a 0 b 0");
        let plan = reduce_layers(std::slice::from_ref(&t), DEFAULT_HEAD_BUDGET).unwrap();
        assert_eq!(plan.depth(), 2);
        let tensor = seg("a c c b a b c");
        let flags = &plan.execute(&tensor)[0];
        // `a0b` completes at the fourth and sixth words.
        let a0b: Vec<usize> = (1..=7).filter(|&i| flags[3][i]).collect();
        assert_eq!(a0b, vec![4, 6]);
        let states: Vec<usize> = atom_states_from(flags)[1..].to_vec();
        assert_eq!(states, vec![1, 2, 2, 3, 4, 4, 4]);
    }

    #[test]
    fn wildcard_free_is_one_layer() {
        let plan = reduce_layers(&[tpl("a b c")], DEFAULT_HEAD_BUDGET).unwrap();
        assert_eq!(plan.depth(), 1);
        let tensor = seg("a b c");
        let flags = &plan.execute(&tensor)[0];
        assert_eq!(atom_states_from(flags)[1..], [1, 2, 3]);
    }

    #[test]
    fn head_budget_names_template() {
        let t = Template::parse("long", "0 a b c d e f g 0").unwrap();
        let err = reduce_layers(&[t], 4).unwrap_err();
        assert!(err.to_string().contains("`long`"), "{err}");
    }
}
