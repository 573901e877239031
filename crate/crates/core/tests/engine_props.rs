use eliza_core::construction::{correct_labels, match_templates, segment};
use eliza_core::engine::{self, Span};
use eliza_core::script::{ReassemblyRule, RuleElement, Template, TemplateSymbol};
use eliza_core::word::{words, Word};
use proptest::prelude::*;

fn template() -> impl Strategy<Value = Template> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "0", "0", "2"]), 0..7)
        .prop_map(|syms| Template::parse("t", &syms.join(" ")).unwrap())
}

fn input() -> impl Strategy<Value = Vec<Word>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..14)
        .prop_map(|ws| ws.iter().map(Word::new).collect())
}

fn with_delimiter(input: &[Word]) -> Vec<Word> {
    let mut toks = words("u:");
    toks.extend_from_slice(input);
    toks
}

proptest! {
    #[test]
    fn spans_tile_the_input(t in template(), input in input()) {
        let spans = engine::lazy_spans(&t, &input);
        prop_assert_eq!(spans.is_some(), engine::matches(&t, &input));
        if let Some(spans) = spans {
            let mut at = 0;
            for (s, sym) in spans.iter().zip(&t.symbols) {
                prop_assert_eq!(s.start, at);
                match sym {
                    TemplateSymbol::WildcardN(n) => prop_assert_eq!(s.len(), *n as usize),
                    TemplateSymbol::Wildcard0 => {}
                    _ => prop_assert_eq!(s.len(), 1),
                }
                at = s.end;
            }
            prop_assert_eq!(at, input.len());
        }
    }

    #[test]
    fn spans_are_lazy(t in template(), input in input()) {
        // With earlier spans fixed, no shorter choice for a wildcard leaves a
        // matchable remainder.
        if let Some(spans) = engine::lazy_spans(&t, &input) {
            for (k, sym) in t.symbols.iter().enumerate() {
                if *sym != TemplateSymbol::Wildcard0 {
                    continue;
                }
                let rest = Template::new("r", t.symbols[k + 1..].to_vec());
                for l in 0..spans[k].len() {
                    prop_assert!(!engine::matches(&rest, &input[spans[k].start + l..]));
                }
            }
            prop_assert_eq!(engine::decompose(&t, &input).unwrap().spans, spans);
        }
    }

    #[test]
    fn construction_states_equal_engine_states(t in template(), input in input()) {
        let tensor = segment(&with_delimiter(&input), 4, 64);
        let states = match_templates(&tensor, std::slice::from_ref(&t));
        prop_assert_eq!(&states[0][1..], &engine::states(&t, &input)[..]);
    }

    #[test]
    fn corrected_labels_equal_lazy_labels(t in template(), input in input()) {
        if let Some(d) = engine::decompose(&t, &input) {
            let corrected = correct_labels(&t, &engine::atom_states(&t, &input));
            prop_assert_eq!(corrected, d.labels());
        }
    }

    #[test]
    fn reassembly_length(t in template(), input in input(), refs in prop::collection::vec(1usize..8, 0..4)) {
        if let Some(d) = engine::decompose(&t, &input) {
            let body: Vec<RuleElement> = refs
                .iter()
                .map(|&k| if k <= t.len() { RuleElement::Group(k) } else { RuleElement::Literal(Word::new("z")) })
                .collect();
            let literals = body.iter().filter(|e| matches!(e, RuleElement::Literal(_))).count();
            let rule = ReassemblyRule::new(Vec::new(), body);
            let out = engine::reassemble(&d, &rule);
            prop_assert_eq!(out.len(), literals + engine::copy_len(&d, &rule));
        }
    }
}

#[test]
fn adjacent_wildcards_match_empty_input() {
    let t = Template::parse("t", "0 0").unwrap();
    assert!(engine::matches(&t, &[]));
    assert_eq!(engine::lazy_spans(&t, &[]), Some(vec![Span { start: 0, end: 0 }; 2]));
}

#[test]
fn ambiguity_flag() {
    let t = Template::parse("t", "0 a b").unwrap();
    let d = engine::decompose(&t, &words("b a c a a b")).unwrap();
    assert_eq!(d.states, [1, 2, 1, 2, 2, 3]);
    assert_eq!(d.labels(), [1, 1, 1, 1, 2, 3]);
    assert!(d.ambiguous);
    let d = engine::decompose(&t, &words("c a b")).unwrap();
    assert!(!d.ambiguous);
}
