//! Generation-stage reassembly: which rule part is active at a step, and
//! which input token to copy, by position arithmetic or by an n-gram
//! induction head.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::script::{ReassemblyRule, RuleElement};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Action {
    /// Copy the input word at this 1-based position.
    Copy { target: usize },
    Print { word: Word },
    HandBack,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CopyError {
    #[error("generation step {step} is past the end of a {total}-token response")]
    StepBeyond { step: usize, total: usize },
}

/// Number of input words per label; index 0 is always 0.
pub fn group_counts(labels: &[usize], n_symbols: usize) -> Vec<usize> {
    let mut counts = vec![0; n_symbols + 1];
    for &l in labels {
        if l > 0 && l <= n_symbols {
            counts[l] += 1;
        }
    }
    counts[0] = 0;
    counts
}

fn part_size(counts: &[usize], part: &RuleElement) -> usize {
    match part {
        RuleElement::Group(k) => counts.get(*k).copied().unwrap_or(0),
        RuleElement::Literal(_) => 1,
    }
}

/// Active rule part at `step` and how many of its tokens were emitted.
fn locate(counts: &[usize], parts: &[RuleElement], step: usize) -> Result<Option<(usize, usize)>, CopyError> {
    let total: usize = parts.iter().map(|p| part_size(counts, p)).sum();
    if step == total {
        return Ok(None);
    }
    if step > total {
        return Err(CopyError::StepBeyond { step, total });
    }
    let mut end = 0;
    for (i, p) in parts.iter().enumerate() {
        let start = end;
        end += part_size(counts, p);
        if end > step {
            return Ok(Some((i, step - start)));
        }
    }
    unreachable!("step < total implies an active part")
}

/// Position-based reassembly: group sizes give each group's start, the step
/// gives the offset inside the active part.
pub fn copy_position(counts: &[usize], rule: &ReassemblyRule, step: usize) -> Result<Action, CopyError> {
    let parts: Vec<RuleElement> = rule.parts().collect();
    Ok(match locate(counts, &parts, step)? {
        None => Action::HandBack,
        Some((i, done)) => match &parts[i] {
            RuleElement::Literal(w) => Action::Print { word: w.clone() },
            RuleElement::Group(k) => {
                let start: usize = counts[..*k].iter().sum();
                Action::Copy { target: start + done + 1 }
            }
        },
    })
}

/// Induction-head reassembly with an `n`-token context window.
///
/// Keys are the input positions of the active group; each key's context is
/// the `n` words before it, masked where they fall outside the group. The
/// query context is the last `n` emitted tokens, where tokens not emitted by
/// the active rule part act as wildcards. The key with the longest run of
/// matches (most recent first) wins; ties go to the earliest key.
pub fn copy_induction(
    words: &[Word],
    labels: &[usize],
    counts: &[usize],
    rule: &ReassemblyRule,
    step: usize,
    emitted: &[Word],
    n: usize,
) -> Result<Action, CopyError> {
    let parts: Vec<RuleElement> = rule.parts().collect();
    let Some((i, done)) = locate(counts, &parts, step)? else {
        return Ok(Action::HandBack);
    };
    let group = match &parts[i] {
        RuleElement::Literal(w) => return Ok(Action::Print { word: w.clone() }),
        RuleElement::Group(k) => *k,
    };
    let query: Vec<Option<&Word>> = (0..n)
        .map(|k| if k < done { emitted.len().checked_sub(k + 1).map(|j| &emitted[j]) } else { None })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    for (j, &l) in labels.iter().enumerate() {
        if l != group {
            continue;
        }
        let mut score = 0;
        for (k, q) in query.iter().enumerate() {
            let key = j.checked_sub(k + 1).filter(|&p| labels[p] == group).map(|p| &words[p]);
            let ok = match q {
                None => true,
                Some(w) => key == Some(*w),
            };
            if !ok {
                break;
            }
            score += 1;
        }
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, j));
        }
    }
    let (_, j) = best.expect("non-empty active group has keys");
    Ok(Action::Copy { target: j + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine;
    use crate::script::Template;
    use crate::word::words;

    fn emit(words_in: &[Word], labels: &[usize], rule: &ReassemblyRule, induction: Option<usize>) -> Vec<Word> {
        let counts = group_counts(labels, *labels.iter().max().unwrap());
        let mut out = Vec::new();
        for step in 0.. {
            let a = match induction {
                None => copy_position(&counts, rule, step).unwrap(),
                Some(n) => copy_induction(words_in, labels, &counts, rule, step, &out, n).unwrap(),
            };
            match a {
                Action::HandBack => break,
                Action::Print { word } => out.push(word),
                Action::Copy { target } => out.push(words_in[target - 1].clone()),
            }
        }
        out
    }

    fn table_input() -> (Vec<Word>, Vec<usize>, ReassemblyRule) {
        let t = Template::parse("t", "a 0 b 0").unwrap();
        let input = words("a c d e c d f b g");
        let d = engine::decompose(&t, &input).unwrap();
        (input, d.labels(), ReassemblyRule::parse_body(&[], "h 2"))
    }

    #[test]
    fn position_row_of_worked_table() {
        let (input, labels, rule) = table_input();
        let counts = group_counts(&labels, 4);
        let targets: Vec<usize> = (1..=6)
            .map(|s| match copy_position(&counts, &rule, s).unwrap() {
                Action::Copy { target } => target,
                a => panic!("{a:?}"),
            })
            .collect();
        assert_eq!(targets, vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(emit(&input, &labels, &rule, None), words("h c d e c d f"));
        assert_eq!(copy_position(&counts, &rule, 7).unwrap(), Action::HandBack);
        assert!(copy_position(&counts, &rule, 8).is_err());
    }

    #[test]
    fn induction_head_error_of_worked_table() {
        let (input, labels, rule) = table_input();
        assert_eq!(emit(&input, &labels, &rule, Some(2)), words("h c d e c d e"));
    }

    #[test]
    fn literal_rule_never_copies() {
        let rule = ReassemblyRule::parse_body(&["p", "q"], "x y");
        let counts = vec![0, 3];
        for step in 0..4 {
            assert!(matches!(copy_position(&counts, &rule, step).unwrap(), Action::Print { .. }));
        }
        assert_eq!(copy_position(&counts, &rule, 4).unwrap(), Action::HandBack);
    }

    #[test]
    fn wide_window_matches_position() {
        let (input, labels, rule) = table_input();
        for n in 6..9 {
            assert_eq!(emit(&input, &labels, &rule, Some(n)), emit(&input, &labels, &rule, None));
        }
    }
}
