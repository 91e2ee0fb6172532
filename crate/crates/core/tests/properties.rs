mod common;

use std::collections::BTreeSet;

use common::naive::random_rule;
use opcycle::epmem::{EpisodicMemory, EpmemConfig};
use opcycle::rule::parse_agent_file;
use opcycle::symbol::{Ident, Symbol};
use opcycle::wm::{Support, WmeKey, WorkingMemory};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key_strategy() -> impl Strategy<Value = WmeKey> {
    (
        1u32..4,
        prop::sample::select(vec!["a", "b", "c"]),
        prop_oneof![
            (0i64..3).prop_map(Symbol::Int),
            (2u32..5).prop_map(|n| Symbol::Id(Ident::new('X', n)))
        ],
    )
        .prop_map(|(id, attr, value)| (Ident::new('X', id), Symbol::str(attr), value, false))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_rules_parse_back_identically(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = random_rule(&mut rng, "gen");
        let text = rule.to_string();
        let (again, diags) = parse_agent_file(&text);
        prop_assert!(diags.is_empty(), "{text}: {diags:?}");
        prop_assert_eq!(&again[0].conditions, &rule.conditions);
        prop_assert_eq!(&again[0].actions, &rule.actions);
        prop_assert_eq!(again[0].to_string(), text);
    }

    #[test]
    fn episodes_reconstruct_exactly(snapshots in prop::collection::vec(prop::collection::btree_set(key_strategy(), 0..8), 1..30)) {
        let mut m = EpisodicMemory::new(EpmemConfig::on());
        m.set_root(Ident::new('X', 1));
        m.set_logging(true);
        let mut log = Vec::new();
        for (c, s) in snapshots.iter().enumerate() {
            m.record(c as u64, s);
            log.extend(m.take_log());
        }
        let back = EpisodicMemory::load_log(&log.join("\n"), EpmemConfig::on()).unwrap();
        for (c, s) in snapshots.iter().enumerate() {
            prop_assert_eq!(m.reconstruct(c as u64), Some(s.clone()));
            prop_assert_eq!(back.reconstruct(c as u64), Some(s.clone()));
        }
        prop_assert_eq!(m.reconstruct(snapshots.len() as u64), None::<BTreeSet<WmeKey>>);
        prop_assert_eq!(back.latest(), Some(snapshots.len() as u64 - 1));
    }

    #[test]
    fn memory_is_a_set_and_indexes_agree(ops in prop::collection::vec((any::<bool>(), key_strategy()), 1..80)) {
        let mut wm = WorkingMemory::new();
        let mut shadow: BTreeSet<WmeKey> = BTreeSet::new();
        for (add, k) in ops {
            let (id, attr, value, acc) = k.clone();
            if add {
                wm.add(id, attr, value, acc, Support::O, None);
                shadow.insert(k);
            } else if let Some(tt) = wm.find(id, &attr, &value, acc) {
                wm.remove(tt);
                shadow.remove(&k);
            }
        }
        let keys: BTreeSet<WmeKey> = wm.iter().map(|e| e.wme.key()).collect();
        prop_assert_eq!(wm.len(), shadow.len());
        prop_assert_eq!(&keys, &shadow);
        for (id, attr, value, acc) in &shadow {
            let tt = wm.find(*id, attr, value, *acc).unwrap();
            prop_assert!(wm.of_id(*id).contains(&tt));
            prop_assert!(wm.of_id_attr(*id, attr).contains(&tt));
            prop_assert!(wm.of_attr(attr, *acc).contains(&tt));
            prop_assert!(wm.of_attr_value(attr, value).contains(&tt));
        }
        let indexed: usize = [1u32, 2, 3, 4].iter().map(|n| wm.of_id(Ident::new('X', *n)).len()).sum();
        prop_assert_eq!(indexed, shadow.len());
    }
}
