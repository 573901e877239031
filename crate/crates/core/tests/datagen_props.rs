use eliza_core::datagen::{self, ConversationSpec, CopySpec, ScriptSpec};
use eliza_core::engine::{self, TurnType};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conversations_respect_budget_and_queue(seed in 0u64..100_000, max_queue in 1usize..5) {
        let script = datagen::sample_script(&ScriptSpec { seed, ..Default::default() }).unwrap();
        let spec = ConversationSpec { n_conversations: 3, max_queue, seed, ..Default::default() };
        for i in 0..3 {
            let c = datagen::conversation(&script, &spec, i).unwrap();
            prop_assert!(datagen::token_count(&c.turns) <= spec.max_tokens);
            for m in c.turns.iter().filter_map(|t| t.meta.as_ref()) {
                prop_assert!(m.queue_len_after <= max_queue);
            }
            // Replaying the user side through the engine reproduces the Eliza side.
            let replay = engine::run_conversation(&script, &c.user_turns()).unwrap();
            prop_assert_eq!(engine::token_stream(&replay), engine::token_stream(&c.turns));
        }
    }

    #[test]
    fn scripts_are_deterministic(seed in any::<u64>()) {
        let spec = ScriptSpec { seed, ..Default::default() };
        let a = datagen::sample_script(&spec).unwrap();
        let b = datagen::sample_script(&spec).unwrap();
        prop_assert_eq!(a.to_document(), b.to_document());
    }

    #[test]
    fn dirichlet_is_a_distribution(seed in any::<u64>(), alpha in 0.005f64..200.0) {
        let mut rng = datagen::rng_for(seed, 0);
        let p = datagen::dirichlet(&mut rng, &vec![alpha; 26]);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn first_turn_is_single_turn() {
    let script = datagen::sample_script(&ScriptSpec::default()).unwrap();
    let spec = ConversationSpec { n_conversations: 20, ..Default::default() };
    for c in datagen::generate(&script, &spec).unwrap() {
        let first = c.turns.iter().find_map(|t| t.meta.as_ref()).unwrap();
        assert_eq!(first.turn_type, TurnType::SingleTurn);
    }
}

#[test]
fn repetition_grows_as_concentration_falls() {
    let frac = |alpha: f64| {
        let spec = CopySpec { concentration: alpha, n_train: 0, n_eval: 2000, ..Default::default() };
        let d = datagen::copy_dataset(&spec).unwrap();
        let repeated = d.eval.iter().filter(|c| c.repeats.as_ref().is_some_and(|r| r.iter().any(|&n| n >= 2))).count();
        repeated as f64 / d.eval.len() as f64
    };
    let (high, low) = (frac(100.0), frac(0.01));
    assert!(low > high, "{low} <= {high}");
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CopySpec { n_train: 20, n_eval: 10, ..Default::default() };
    let manifest = datagen::gen_copy_dataset(&spec, dir.path()).unwrap();
    assert_eq!(manifest.n_conversations, 30);
    let eval = datagen::read_jsonl(&dir.path().join("eval.jsonl")).unwrap();
    assert_eq!(eval, datagen::copy_dataset(&spec).unwrap().eval);
}
