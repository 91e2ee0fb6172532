//! Brute-force reference for operator selection, written from the pipeline
//! description without sharing code with the engine.

use opcycle::decide::Pref;
use opcycle::rule::PrefKind;
use opcycle::symbol::{Ident, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub enum Expected {
    NoChange,
    Conflict(Vec<Symbol>),
    Tie(Vec<Symbol>),
    Single(Symbol),
    /// Indifferent survivors and the subset with the largest summed value.
    Choice(Vec<Symbol>, Vec<Symbol>),
}

fn any(prefs: &[Pref], kind: PrefKind, op: &Symbol) -> bool {
    prefs.iter().any(|p| p.kind == kind && p.op == *op)
}

fn pair(prefs: &[Pref], kind: PrefKind, a: &Symbol, b: &Symbol) -> bool {
    prefs
        .iter()
        .any(|p| p.kind == kind && p.op == *a && p.referent.as_ref() == Some(b))
}

pub fn oracle(prefs: &[Pref], universe: &[Symbol]) -> Expected {
    let mut live: Vec<Symbol> = universe
        .iter()
        .filter(|o| any(prefs, PrefKind::Acceptable, o))
        .cloned()
        .collect();
    live.retain(|o| !any(prefs, PrefKind::Reject, o));
    if live.is_empty() {
        return Expected::NoChange;
    }
    let n = live.len();
    // beats[i][j]: i dominates j directly
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                reach[i][j] = pair(prefs, PrefKind::Better, &live[i], &live[j])
                    || pair(prefs, PrefKind::Worse, &live[j], &live[i]);
            }
        }
    }
    let direct = reach.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let in_cycle: Vec<Symbol> = (0..n)
        .filter(|&i| (0..n).any(|j| j != i && reach[i][j] && reach[j][i]))
        .map(|i| live[i].clone())
        .collect();
    if !in_cycle.is_empty() {
        let mut s = in_cycle;
        s.sort();
        return Expected::Conflict(s);
    }
    let mut rest: Vec<Symbol> = (0..n)
        .filter(|&j| !(0..n).any(|i| direct[i][j]))
        .map(|j| live[j].clone())
        .collect();
    let bests: Vec<Symbol> = rest
        .iter()
        .filter(|o| any(prefs, PrefKind::Best, o))
        .cloned()
        .collect();
    if !bests.is_empty() {
        rest = bests;
    }
    let non_worst: Vec<Symbol> = rest
        .iter()
        .filter(|o| !any(prefs, PrefKind::Worst, o))
        .cloned()
        .collect();
    if !non_worst.is_empty() {
        rest = non_worst;
    }
    rest.sort();
    if rest.len() == 1 {
        return Expected::Single(rest[0].clone());
    }
    let soft =
        |o: &Symbol| any(prefs, PrefKind::UnaryIndifferent, o) || any(prefs, PrefKind::Numeric, o);
    for a in &rest {
        for b in &rest {
            if a == b {
                continue;
            }
            let bin = pair(prefs, PrefKind::BinaryIndifferent, a, b)
                || pair(prefs, PrefKind::BinaryIndifferent, b, a);
            if !bin && !(soft(a) && soft(b)) {
                return Expected::Tie(rest);
            }
        }
    }
    let score = |o: &Symbol| -> f64 {
        prefs
            .iter()
            .filter(|p| p.kind == PrefKind::Numeric && p.op == *o)
            .map(|p| p.value.unwrap())
            .sum()
    };
    let top = rest.iter().map(score).fold(f64::MIN, f64::max);
    let greedy = rest.iter().filter(|o| score(o) == top).cloned().collect();
    Expected::Choice(rest, greedy)
}

pub fn op(i: u32) -> Symbol {
    Symbol::Id(Ident::new('O', i))
}

/// Per-operator unary preference configurations.
const UNARY: usize = 10;

fn unary(state: usize, o: &Symbol, i: u32, out: &mut Vec<Pref>) {
    use PrefKind::*;
    let kinds: &[PrefKind] = match state {
        0 => &[],
        1 => &[Acceptable],
        2 => &[Acceptable, Reject],
        3 => &[Acceptable, Best],
        4 => &[Acceptable, Worst],
        5 => &[Acceptable, Best, Worst],
        6 => &[Acceptable, UnaryIndifferent],
        7 => &[Acceptable, Numeric],
        8 => &[Acceptable, Numeric, Numeric],
        _ => &[Acceptable, Best, Best],
    };
    for (k, kind) in kinds.iter().enumerate() {
        let value = (*kind == Numeric).then(|| 0.25 * f64::from(i) + 0.1 * k as f64);
        out.push(Pref {
            kind: *kind,
            op: o.clone(),
            referent: None,
            value,
        });
    }
}

/// Pairwise configurations between two operators.
const BINARY: usize = 6;

fn binary(state: usize, a: &Symbol, b: &Symbol, out: &mut Vec<Pref>) {
    use PrefKind::*;
    let list: &[(PrefKind, bool)] = match state {
        0 => &[],
        1 => &[(Better, false)],
        2 => &[(Worse, false)],
        3 => &[(BinaryIndifferent, false)],
        4 => &[(Better, true)],
        _ => &[(Better, false), (Worse, false)],
    };
    for (kind, flip) in list {
        let (x, y) = if *flip { (b, a) } else { (a, b) };
        out.push(Pref {
            kind: *kind,
            op: x.clone(),
            referent: Some(y.clone()),
            value: None,
        });
    }
}

/// Every preference set over one, two and three operators in the configuration space.
pub fn enumerate() -> Vec<(Vec<Symbol>, Vec<Pref>)> {
    let mut cases = Vec::new();
    for n in 1..=3u32 {
        let ops: Vec<Symbol> = (1..=n).map(op).collect();
        let pairs: Vec<(usize, usize)> = (0..n as usize)
            .flat_map(|a| (a + 1..n as usize).map(move |b| (a, b)))
            .collect();
        let unary_total = UNARY.pow(n);
        let binary_total = BINARY.pow(pairs.len() as u32);
        for u in 0..unary_total {
            for bcode in 0..binary_total {
                let mut prefs = Vec::new();
                let mut code = u;
                for (i, o) in ops.iter().enumerate() {
                    unary(code % UNARY, o, i as u32, &mut prefs);
                    code /= UNARY;
                }
                let mut code = bcode;
                for (a, b) in &pairs {
                    binary(code % BINARY, &ops[*a], &ops[*b], &mut prefs);
                    code /= BINARY;
                }
                cases.push((ops.clone(), prefs));
            }
        }
    }
    cases
}
