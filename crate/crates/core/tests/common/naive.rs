//! Re-match-from-scratch oracle and random workload generator.

use std::collections::{BTreeSet, HashMap};

use opcycle::rule::{parse_agent_file, Condition, Operand, Rule, Test};
use opcycle::symbol::Symbol;
use opcycle::wm::{Support, Wme, WorkingMemory};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Env = HashMap<String, Symbol>;

fn check(test: &Test, sym: &Symbol, env: &mut Env, late: &mut Vec<(Test, Symbol)>) -> bool {
    match test {
        Test::Const(c) => c == sym,
        Test::Var(v) => match env.get(v) {
            Some(x) => x == sym,
            None => {
                env.insert(v.clone(), sym.clone());
                true
            }
        },
        Test::Compare(..) => {
            late.push((test.clone(), sym.clone()));
            true
        }
        Test::Conj(ts) => ts.iter().all(|t| check(t, sym, env, late)),
    }
}

fn compare_ok(test: &Test, sym: &Symbol, env: &Env) -> bool {
    let Test::Compare(op, operand) = test else {
        return true;
    };
    let rhs = match operand {
        Operand::Const(c) => c.clone(),
        Operand::Var(v) => match env.get(v) {
            Some(x) => x.clone(),
            None => return false,
        },
    };
    op.holds(sym, &rhs)
}

fn fits(
    c: &Condition,
    w: &Wme,
    wm: &WorkingMemory,
    env: &mut Env,
    late: &mut Vec<(Test, Symbol)>,
) -> bool {
    w.acceptable == c.acceptable
        && (!c.state || wm.is_state(w.id))
        && check(&c.id, &Symbol::Id(w.id), env, late)
        && check(&c.attr, &w.attr, env, late)
        && check(&c.value, &w.value, env, late)
}

fn extend(
    pos: &[&Condition],
    neg: &[&Condition],
    wmes: &[&Wme],
    wm: &WorkingMemory,
    env: Env,
    late: Vec<(Test, Symbol)>,
    token: Vec<u64>,
    out: &mut Vec<Vec<u64>>,
) {
    let Some((first, rest)) = pos.split_first() else {
        if !late.iter().all(|(t, s)| compare_ok(t, s, &env)) {
            return;
        }
        for n in neg {
            for w in wmes {
                let mut e = env.clone();
                let mut l = Vec::new();
                if fits(n, w, wm, &mut e, &mut l) && l.iter().all(|(t, s)| compare_ok(t, s, &e)) {
                    return;
                }
            }
        }
        out.push(token);
        return;
    };
    for w in wmes {
        let mut e = env.clone();
        let mut l = late.clone();
        if fits(first, w, wm, &mut e, &mut l) {
            let mut t = token.clone();
            t.push(w.timetag);
            extend(rest, neg, wmes, wm, e, l, t, out);
        }
    }
}

/// Every (rule index, token) currently matching, computed by brute force.
pub fn naive_matches(rules: &[Rule], wm: &WorkingMemory) -> BTreeSet<(usize, Vec<u64>)> {
    let wmes = wm.sorted();
    let mut all = BTreeSet::new();
    for (i, r) in rules.iter().enumerate() {
        let pos: Vec<&Condition> = r.conditions.iter().filter(|c| !c.negated).collect();
        let neg: Vec<&Condition> = r.conditions.iter().filter(|c| c.negated).collect();
        let mut out = Vec::new();
        extend(
            &pos,
            &neg,
            &wmes,
            wm,
            Env::new(),
            Vec::new(),
            Vec::new(),
            &mut out,
        );
        for t in out {
            all.insert((i, t));
        }
    }
    all
}

const ATTRS: [&str; 4] = ["a", "b", "c", "d"];

/// A random rule over a small vocabulary, chaining identifiers from the state.
pub fn random_rule(rng: &mut ChaCha8Rng, name: &str) -> Rule {
    let mut ids = vec!["<s>".to_string()];
    let mut values: Vec<String> = Vec::new();
    let mut conds = Vec::new();
    let n = rng.gen_range(1..=3);
    for k in 0..n {
        let id = if k == 0 {
            "state <s>".to_string()
        } else {
            ids.choose(rng).unwrap().clone()
        };
        let attr = ATTRS.choose(rng).unwrap();
        let value = match rng.gen_range(0..6) {
            0 | 1 => {
                let v = format!("<x{k}>");
                ids.push(v.clone());
                v
            }
            2 => rng.gen_range(0..3).to_string(),
            3 if !values.is_empty() => values.choose(rng).unwrap().clone(),
            4 => {
                let v = format!("<n{k}>");
                let bound = format!("{{ {v} > {} }}", rng.gen_range(0..2));
                values.push(v);
                bound
            }
            _ => {
                let v = format!("<n{k}>");
                values.push(v.clone());
                v
            }
        };
        conds.push(format!("({id} ^{attr} {value})"));
    }
    if rng.gen_bool(0.4) {
        let id = ids.choose(rng).unwrap();
        let attr = ATTRS.choose(rng).unwrap();
        let value = match values.choose(rng) {
            Some(v) if rng.gen_bool(0.5) => v.clone(),
            _ => rng.gen_range(0..3).to_string(),
        };
        conds.push(format!(
            "-({} ^{attr} {value})",
            id.trim_start_matches("state ")
        ));
    }
    let src = format!("sp {{{name} {} --> (<s> ^out 1)}}", conds.join(" "));
    let (mut rules, diags) = parse_agent_file(&src);
    assert!(diags.is_empty(), "{src}: {diags:?}");
    rules.remove(0)
}

/// Random mutation: add or remove a WME among a fixed set of identifiers.
pub fn random_mutation(
    rng: &mut ChaCha8Rng,
    wm: &mut WorkingMemory,
    ids: &[opcycle::symbol::Ident],
    cap: usize,
) {
    let live = wm.sorted().iter().map(|w| w.timetag).collect::<Vec<_>>();
    if !live.is_empty() && (wm.len() >= cap || rng.gen_bool(0.35)) {
        let tt = *live.choose(rng).unwrap();
        wm.remove(tt);
        return;
    }
    let id = *ids.choose(rng).unwrap();
    let attr = Symbol::str(ATTRS.choose(rng).unwrap());
    let value = if rng.gen_bool(0.4) {
        Symbol::Id(*ids[1..].choose(rng).unwrap())
    } else {
        Symbol::Int(rng.gen_range(0..3))
    };
    wm.add(id, attr, value, false, Support::O, None);
}

/// A state plus a handful of plain identifiers.
pub fn random_memory() -> (WorkingMemory, Vec<opcycle::symbol::Ident>) {
    let mut wm = WorkingMemory::new();
    let s1 = wm.fresh_id('S');
    wm.register_state(s1);
    let mut ids = vec![s1];
    for _ in 0..6 {
        ids.push(wm.fresh_id('X'));
    }
    (wm, ids)
}
