mod common;

use common::decision::{enumerate, op, oracle, Expected};
use opcycle::decide::{decide, filter, greedy_set, Exploration, Filtered, Outcome, Pref};
use opcycle::rule::PrefKind;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn actual(prefs: &[Pref]) -> Expected {
    match filter(prefs) {
        Filtered::NoChange => Expected::NoChange,
        Filtered::Conflict(s) => Expected::Conflict(s),
        Filtered::Tie(s) => Expected::Tie(s),
        Filtered::Single(o) => Expected::Single(o),
        Filtered::Indifferent(s) => {
            let g = greedy_set(prefs, &s);
            Expected::Choice(s, g)
        }
    }
}

#[test]
fn pipeline_matches_reference_on_every_enumerated_case() {
    let cases = enumerate();
    assert!(cases.len() >= 10_000, "{}", cases.len());
    for (ops, prefs) in &cases {
        assert_eq!(actual(prefs), oracle(prefs, ops), "{prefs:?}");
    }
}

#[test]
fn greedy_choice_lands_in_the_argmax_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (ops, prefs) in enumerate().iter().step_by(7) {
        if let Expected::Choice(_, greedy) = oracle(prefs, ops) {
            let d = decide(
                prefs,
                None,
                Exploration::EpsilonGreedy { epsilon: 0.0 },
                &mut rng,
            );
            let Outcome::Selected(o) = d.outcome else {
                panic!("{prefs:?}")
            };
            assert!(greedy.contains(&o));
        }
    }
}

proptest! {
    #[test]
    fn scaling_values_keeps_the_argmax(values in proptest::collection::vec(-5.0f64..5.0, 2..5), scale in 0.01f64..100.0) {
        let mut prefs = Vec::new();
        let mut scaled = Vec::new();
        let cands: Vec<_> = (1..=values.len() as u32).map(op).collect();
        for (o, v) in cands.iter().zip(&values) {
            prefs.push(Pref::unary(PrefKind::Acceptable, o.clone()));
            prefs.push(Pref::numeric(o.clone(), *v));
            scaled.push(Pref::unary(PrefKind::Acceptable, o.clone()));
            scaled.push(Pref::numeric(o.clone(), v * scale));
        }
        prop_assert_eq!(greedy_set(&prefs, &cands), greedy_set(&scaled, &cands));
    }

    #[test]
    fn rl_values_never_override_symbolic_choices(v1 in -3.0f64..3.0, v2 in -3.0f64..3.0) {
        let base = vec![
            Pref::unary(PrefKind::Acceptable, op(1)),
            Pref::unary(PrefKind::Acceptable, op(2)),
            Pref::binary(PrefKind::Better, op(2), op(1)),
        ];
        let mut with_rl = base.clone();
        with_rl.push(Pref::numeric(op(1), v1));
        with_rl.push(Pref::numeric(op(2), v2));
        prop_assert_eq!(filter(&base), Filtered::Single(op(2)));
        prop_assert_eq!(filter(&with_rl), Filtered::Single(op(2)));
    }
}
