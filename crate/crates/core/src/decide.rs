//! The fixed decision procedure over operator preferences.
//!
//! [`filter`] is the deterministic part of the pipeline and is what the
//! application phase re-runs after each wave. [`decide`] adds the final
//! stochastic choice among mutually indifferent candidates.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use crate::rule::PrefKind;
use crate::symbol::Symbol;

/// One operator preference in a state's preference memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Pref {
    pub kind: PrefKind,
    pub op: Symbol,
    pub referent: Option<Symbol>,
    pub value: Option<f64>,
}

impl Pref {
    pub fn unary(kind: PrefKind, op: impl Into<Symbol>) -> Pref {
        Pref {
            kind,
            op: op.into(),
            referent: None,
            value: None,
        }
    }

    pub fn binary(kind: PrefKind, op: impl Into<Symbol>, referent: impl Into<Symbol>) -> Pref {
        Pref {
            kind,
            op: op.into(),
            referent: Some(referent.into()),
            value: None,
        }
    }

    pub fn numeric(op: impl Into<Symbol>, value: f64) -> Pref {
        Pref {
            kind: PrefKind::Numeric,
            op: op.into(),
            referent: None,
            value: Some(value),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ImpasseKind {
    StateNoChange,
    Tie,
    Conflict,
    OperatorNoChange,
}

impl ImpasseKind {
    pub fn name(self) -> &'static str {
        match self {
            ImpasseKind::StateNoChange => "state-no-change",
            ImpasseKind::Tie => "tie",
            ImpasseKind::Conflict => "conflict",
            ImpasseKind::OperatorNoChange => "operator-no-change",
        }
    }

    /// Whether the impasse concerns operators or the state as a whole.
    pub fn attribute(self) -> &'static str {
        match self {
            ImpasseKind::StateNoChange => "state",
            _ => "operator",
        }
    }
}

/// Result of the deterministic part of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Filtered {
    NoChange,
    Conflict(Vec<Symbol>),
    Single(Symbol),
    /// Several mutually indifferent candidates remain.
    Indifferent(Vec<Symbol>),
    Tie(Vec<Symbol>),
}

impl Filtered {
    /// Whether `op` survives the pipeline as a possible choice.
    pub fn admits(&self, op: &Symbol) -> bool {
        match self {
            Filtered::Single(s) => s == op,
            Filtered::Indifferent(set) => set.contains(op),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Selected(Symbol),
    Retained(Symbol),
    Impasse(ImpasseKind, Vec<Symbol>),
}

/// How the final choice among indifferent candidates is made.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Exploration {
    EpsilonGreedy { epsilon: f64 },
    Softmax { temperature: f64 },
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration::EpsilonGreedy { epsilon: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub outcome: Outcome,
    /// A numeric-preference choice among several candidates was made.
    pub stochastic: bool,
}

fn has(prefs: &[Pref], op: &Symbol, kind: PrefKind) -> bool {
    prefs.iter().any(|p| p.kind == kind && &p.op == op)
}

/// Candidates in non-trivial strongly connected components of the
/// dominance graph (Tarjan's algorithm).
fn cyclic_nodes(nodes: &[Symbol], edges: &BTreeSet<(usize, usize)>) -> BTreeSet<usize> {
    struct T<'a> {
        adj: Vec<Vec<usize>>,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: &'a mut BTreeSet<usize>,
    }
    impl T<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on[v] = true;
            for w in self.adj[v].clone() {
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.low[v] = self.low[v].min(self.low[w]);
                    }
                    Some(iw) if self.on[w] => self.low[v] = self.low[v].min(iw),
                    _ => {}
                }
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("scc member");
                    self.on[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                if comp.len() > 1 {
                    self.out.extend(comp);
                }
            }
        }
    }
    let n = nodes.len();
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        if a != b {
            adj[*a].push(*b);
        }
    }
    let mut out = BTreeSet::new();
    let mut t = T {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: &mut out,
    };
    for v in 0..n {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    out
}

/// Steps one to six of the pipeline, plus the indifference test of step seven.
pub fn filter(prefs: &[Pref]) -> Filtered {
    let proposed: BTreeSet<Symbol> = prefs
        .iter()
        .filter(|p| p.kind == PrefKind::Acceptable)
        .map(|p| p.op.clone())
        .collect();
    let mut cands: Vec<Symbol> = proposed
        .into_iter()
        .filter(|o| !has(prefs, o, PrefKind::Reject))
        .collect();
    if cands.is_empty() {
        return Filtered::NoChange;
    }

    let pos = |s: &Symbol, c: &[Symbol]| c.iter().position(|x| x == s);
    let mut edges = BTreeSet::new();
    for p in prefs {
        let Some(r) = &p.referent else { continue };
        let (Some(a), Some(b)) = (pos(&p.op, &cands), pos(r, &cands)) else {
            continue;
        };
        match p.kind {
            PrefKind::Better => {
                edges.insert((a, b));
            }
            PrefKind::Worse => {
                edges.insert((b, a));
            }
            _ => {}
        }
    }
    let cyclic = cyclic_nodes(&cands, &edges);
    if !cyclic.is_empty() {
        return Filtered::Conflict(cyclic.into_iter().map(|i| cands[i].clone()).collect());
    }
    let dominated: BTreeSet<usize> = edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|(_, b)| *b)
        .collect();
    cands = cands
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !dominated.contains(i))
        .map(|(_, c)| c)
        .collect();

    if cands.iter().any(|c| has(prefs, c, PrefKind::Best)) {
        cands.retain(|c| has(prefs, c, PrefKind::Best));
    }
    if !cands.iter().all(|c| has(prefs, c, PrefKind::Worst)) {
        cands.retain(|c| !has(prefs, c, PrefKind::Worst));
    }

    if cands.len() == 1 {
        return Filtered::Single(cands.remove(0));
    }
    let unary =
        |c: &Symbol| has(prefs, c, PrefKind::UnaryIndifferent) || has(prefs, c, PrefKind::Numeric);
    let binary = |a: &Symbol, b: &Symbol| {
        prefs.iter().any(|p| {
            p.kind == PrefKind::BinaryIndifferent
                && ((&p.op == a && p.referent.as_ref() == Some(b))
                    || (&p.op == b && p.referent.as_ref() == Some(a)))
        })
    };
    let all_indifferent = cands.iter().enumerate().all(|(i, a)| {
        cands[i + 1..]
            .iter()
            .all(|b| binary(a, b) || (unary(a) && unary(b)))
    });
    if all_indifferent {
        Filtered::Indifferent(cands)
    } else {
        Filtered::Tie(cands)
    }
}

/// Summed numeric preference per candidate; candidates without one are absent.
pub fn numeric_values(prefs: &[Pref], cands: &[Symbol]) -> BTreeMap<Symbol, f64> {
    let mut out = BTreeMap::new();
    for p in prefs {
        if p.kind == PrefKind::Numeric && cands.contains(&p.op) {
            *out.entry(p.op.clone()).or_insert(0.0) += p.value.unwrap_or(0.0);
        }
    }
    out
}

/// Candidates sharing the maximal summed value (missing values count as 0).
pub fn greedy_set(prefs: &[Pref], cands: &[Symbol]) -> Vec<Symbol> {
    let values = numeric_values(prefs, cands);
    let v = |c: &Symbol| values.get(c).copied().unwrap_or(0.0);
    let best = cands.iter().map(v).fold(f64::NEG_INFINITY, f64::max);
    cands.iter().filter(|c| v(c) == best).cloned().collect()
}

/// Chooses among indifferent candidates.
pub fn choose<R: Rng>(
    prefs: &[Pref],
    cands: &[Symbol],
    policy: Exploration,
    rng: &mut R,
) -> (Symbol, bool) {
    let values = numeric_values(prefs, cands);
    if values.is_empty() {
        return (cands[rng.gen_range(0..cands.len())].clone(), false);
    }
    let pick = match policy {
        Exploration::EpsilonGreedy { epsilon } => {
            if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                cands[rng.gen_range(0..cands.len())].clone()
            } else {
                let g = greedy_set(prefs, cands);
                g[rng.gen_range(0..g.len())].clone()
            }
        }
        Exploration::Softmax { temperature } => {
            let t = temperature.max(1e-9);
            let v: Vec<f64> = cands
                .iter()
                .map(|c| values.get(c).copied().unwrap_or(0.0) / t)
                .collect();
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = cands.len() - 1;
            for (i, x) in w.iter().enumerate() {
                if r < *x {
                    chosen = i;
                    break;
                }
                r -= x;
            }
            cands[chosen].clone()
        }
    };
    (pick, true)
}

/// The full decision for one state. `current` is the operator selected now, if any.
pub fn decide<R: Rng>(
    prefs: &[Pref],
    current: Option<&Symbol>,
    policy: Exploration,
    rng: &mut R,
) -> Decision {
    let f = filter(prefs);
    if let Some(cur) = current {
        if f.admits(cur) {
            return Decision {
                outcome: Outcome::Retained(cur.clone()),
                stochastic: false,
            };
        }
    }
    let (outcome, stochastic) = match f {
        Filtered::NoChange => (
            Outcome::Impasse(ImpasseKind::StateNoChange, Vec::new()),
            false,
        ),
        Filtered::Conflict(set) => (Outcome::Impasse(ImpasseKind::Conflict, set), false),
        Filtered::Tie(set) => (Outcome::Impasse(ImpasseKind::Tie, set), false),
        Filtered::Single(op) => (Outcome::Selected(op), false),
        Filtered::Indifferent(set) => {
            let (op, stochastic) = choose(prefs, &set, policy, rng);
            (Outcome::Selected(op), stochastic)
        }
    };
    Decision {
        outcome,
        stochastic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Ident;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use PrefKind::*;

    fn op(i: u32) -> Symbol {
        Symbol::Id(Ident::new('O', i))
    }

    fn run(prefs: &[Pref]) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        decide(
            prefs,
            None,
            Exploration::EpsilonGreedy { epsilon: 0.0 },
            &mut rng,
        )
        .outcome
    }

    #[test]
    fn dominance_selects() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::binary(Better, op(1), op(2)),
        ];
        assert_eq!(run(&p), Outcome::Selected(op(1)));
    }

    #[test]
    fn bare_candidates_tie() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
        ];
        assert_eq!(
            run(&p),
            Outcome::Impasse(ImpasseKind::Tie, vec![op(1), op(2)])
        );
    }

    #[test]
    fn mutual_betterness_conflicts() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::binary(Better, op(1), op(2)),
            Pref::binary(Better, op(2), op(1)),
        ];
        assert_eq!(
            run(&p),
            Outcome::Impasse(ImpasseKind::Conflict, vec![op(1), op(2)])
        );
    }

    #[test]
    fn rejection_leaves_nothing() {
        let p = [Pref::unary(Acceptable, op(1)), Pref::unary(Reject, op(1))];
        assert_eq!(
            run(&p),
            Outcome::Impasse(ImpasseKind::StateNoChange, vec![])
        );
        assert_eq!(
            run(&[]),
            Outcome::Impasse(ImpasseKind::StateNoChange, vec![])
        );
    }

    #[test]
    fn greedy_takes_the_larger_value() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::numeric(op(1), 0.9),
            Pref::numeric(op(2), 0.1),
        ];
        assert_eq!(run(&p), Outcome::Selected(op(1)));
    }

    #[test]
    fn best_then_worst() {
        // O1 is both best and worst: best filtering keeps it, worst filtering
        // cannot remove it because every survivor is worst.
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::unary(Best, op(1)),
            Pref::unary(Worst, op(1)),
        ];
        assert_eq!(run(&p), Outcome::Selected(op(1)));
    }

    #[test]
    fn current_operator_is_retained() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::unary(UnaryIndifferent, op(1)),
            Pref::unary(UnaryIndifferent, op(2)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = decide(&p, Some(&op(2)), Exploration::default(), &mut rng);
        assert_eq!(d.outcome, Outcome::Retained(op(2)));
    }

    #[test]
    fn softmax_prefers_higher_values() {
        let p = [
            Pref::unary(Acceptable, op(1)),
            Pref::unary(Acceptable, op(2)),
            Pref::numeric(op(1), 2.0),
            Pref::numeric(op(2), 0.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cands = [op(1), op(2)];
        let hits = (0..2000)
            .filter(|_| {
                choose(
                    &p,
                    &cands,
                    Exploration::Softmax { temperature: 1.0 },
                    &mut rng,
                )
                .0 == op(1)
            })
            .count();
        // e^2 / (e^2 + 1) = 0.881
        assert!((1650..1870).contains(&hits), "{hits}");
    }
}
