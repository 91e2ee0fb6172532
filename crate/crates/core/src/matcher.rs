//! Incremental rule matching.
//!
//! Each rule keeps its complete set of current matches. Working-memory
//! changes are folded in by joins seeded at the changed WME, so the cost of
//! a sync is proportional to the affected matches rather than to the size
//! of memory. Rules are indexed by the constant attributes they test.

use std::collections::{HashMap, HashSet};

use crate::rule::{Condition, Operand, RelOp, Rule, Test};
use crate::symbol::Symbol;
use crate::wm::{Change, Timetag, Wme, WorkingMemory};

pub type RuleId = usize;

/// Timetags of the WMEs matched by the positive conditions, in condition order.
pub type Token = Vec<Timetag>;

/// Variable values indexed by the rule's variable table.
pub type Bindings = Vec<Option<Symbol>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub rule: RuleId,
    pub token: Token,
    pub bindings: Bindings,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchDelta {
    pub added: Vec<Match>,
    pub removed: Vec<(RuleId, Token)>,
}

impl MatchDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

#[derive(Clone, Debug)]
enum CTest {
    Const(Symbol),
    Var(usize),
    Cmp(RelOp, COperand),
    Conj(Vec<CTest>),
}

#[derive(Clone, Debug)]
enum COperand {
    Const(Symbol),
    Var(usize),
}

#[derive(Clone, Debug)]
struct CCond {
    state: bool,
    acceptable: bool,
    id: CTest,
    attr: CTest,
    value: CTest,
    id_var: Option<usize>,
    attr_var: Option<usize>,
    value_var: Option<usize>,
    attr_const: Option<Symbol>,
    value_const: Option<Symbol>,
}

struct Compiled {
    vars: Vec<String>,
    pos: Vec<CCond>,
    neg: Vec<CCond>,
    matches: HashMap<Token, Bindings>,
}

#[derive(Default)]
pub struct Matcher {
    rules: Vec<Option<Compiled>>,
    pos_by_attr: HashMap<SiteKey, Vec<(RuleId, usize)>>,
    neg_by_attr: HashMap<SiteKey, Vec<(RuleId, usize)>>,
    pos_wild: Vec<(RuleId, usize)>,
    neg_wild: Vec<(RuleId, usize)>,
    by_timetag: HashMap<Timetag, HashSet<(RuleId, Token)>>,
}

/// Constant attribute, plus the constant value when the condition tests one.
type SiteKey = (Symbol, Option<Symbol>);

fn site_key(c: &CCond) -> Option<SiteKey> {
    c.attr_const.clone().map(|a| (a, c.value_const.clone()))
}

struct VarTable<'a>(&'a mut Vec<String>);

impl VarTable<'_> {
    fn slot(&mut self, name: &str) -> usize {
        match self.0.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.0.push(name.to_string());
                self.0.len() - 1
            }
        }
    }

    fn test(&mut self, t: &Test) -> CTest {
        match t {
            Test::Const(c) => CTest::Const(c.clone()),
            Test::Var(v) => CTest::Var(self.slot(v)),
            Test::Compare(op, Operand::Const(c)) => CTest::Cmp(*op, COperand::Const(c.clone())),
            Test::Compare(op, Operand::Var(v)) => CTest::Cmp(*op, COperand::Var(self.slot(v))),
            Test::Conj(ts) => CTest::Conj(ts.iter().map(|t| self.test(t)).collect()),
        }
    }

    fn cond(&mut self, c: &Condition) -> CCond {
        let id = self.test(&c.id);
        let attr = self.test(&c.attr);
        let value = self.test(&c.value);
        CCond {
            state: c.state,
            acceptable: c.acceptable,
            id_var: c.id.main_var().map(|v| self.slot(v)),
            attr_var: c.attr.main_var().map(|v| self.slot(v)),
            value_var: c.value.main_var().map(|v| self.slot(v)),
            attr_const: c.attr.main_const().cloned(),
            value_const: c.value.main_const().cloned(),
            id,
            attr,
            value,
        }
    }
}

fn compile(rule: &Rule) -> Compiled {
    let mut vars = Vec::new();
    let mut table = VarTable(&mut vars);
    let pos: Vec<CCond> = rule
        .conditions
        .iter()
        .filter(|c| !c.negated)
        .map(|c| table.cond(c))
        .collect();
    let neg: Vec<CCond> = rule
        .conditions
        .iter()
        .filter(|c| c.negated)
        .map(|c| table.cond(c))
        .collect();
    for a in &rule.actions {
        use crate::rule::{Action, RhsValue};
        match a {
            Action::Make { id, attr, value } | Action::Remove { id, attr, value } => {
                table.slot(id);
                for v in [attr, value] {
                    if let RhsValue::Var(v) = v {
                        table.slot(v);
                    }
                }
            }
            Action::Pref {
                state,
                op,
                referent,
                ..
            } => {
                table.slot(state);
                table.slot(op);
                if let Some(r) = referent {
                    table.slot(r);
                }
            }
            Action::Halt => {}
        }
    }
    Compiled {
        vars,
        pos,
        neg,
        matches: HashMap::new(),
    }
}

/// Tests one field; comparisons whose operand is still unbound pass here
/// and are re-checked once the match is complete.
fn field(t: &CTest, sym: &Symbol, b: &mut Bindings, trail: &mut Vec<usize>) -> bool {
    match t {
        CTest::Const(c) => c == sym,
        CTest::Var(i) => match &b[*i] {
            Some(x) => x == sym,
            None => {
                b[*i] = Some(sym.clone());
                trail.push(*i);
                true
            }
        },
        CTest::Cmp(op, operand) => match operand {
            COperand::Const(c) => op.holds(sym, c),
            COperand::Var(i) => b[*i].as_ref().is_none_or(|v| op.holds(sym, v)),
        },
        CTest::Conj(ts) => ts.iter().all(|t| field(t, sym, b, trail)),
    }
}

fn comparisons_hold(t: &CTest, sym: &Symbol, b: &Bindings) -> bool {
    match t {
        CTest::Cmp(op, COperand::Var(i)) => b[*i].as_ref().is_some_and(|v| op.holds(sym, v)),
        CTest::Conj(ts) => ts.iter().all(|t| comparisons_hold(t, sym, b)),
        _ => true,
    }
}

fn unify(c: &CCond, w: &Wme, wm: &WorkingMemory, b: &mut Bindings, trail: &mut Vec<usize>) -> bool {
    if w.acceptable != c.acceptable || (c.state && !wm.is_state(w.id)) {
        return false;
    }
    field(&c.id, &Symbol::Id(w.id), b, trail)
        && field(&c.attr, &w.attr, b, trail)
        && field(&c.value, &w.value, b, trail)
}

fn undo(b: &mut Bindings, trail: &mut Vec<usize>, mark: usize) {
    for i in trail.drain(mark..) {
        b[i] = None;
    }
}

fn bound(b: &Bindings, var: Option<usize>) -> Option<&Symbol> {
    var.and_then(|i| b[i].as_ref())
}

fn candidates(c: &CCond, b: &Bindings, wm: &WorkingMemory) -> Vec<Timetag> {
    let id = bound(b, c.id_var).and_then(|s| s.as_ident());
    if c.id_var.is_some() && bound(b, c.id_var).is_some() && id.is_none() {
        return Vec::new();
    }
    let attr = c.attr_const.as_ref().or_else(|| bound(b, c.attr_var));
    let value = c.value_const.as_ref().or_else(|| bound(b, c.value_var));
    match (id, attr, value) {
        (Some(id), Some(a), _) => wm.of_id_attr(id, a).iter().copied().collect(),
        (Some(id), None, _) => wm.of_id(id).iter().copied().collect(),
        (None, Some(a), Some(v)) => wm.of_attr_value(a, v).iter().copied().collect(),
        (None, Some(a), None) => wm.of_attr(a, c.acceptable).iter().copied().collect(),
        (None, None, _) => wm.sorted().iter().map(|w| w.timetag).collect(),
    }
}

/// Lower is better: how selective a condition is under the current bindings.
fn selectivity(c: &CCond, b: &Bindings) -> u8 {
    let id = bound(b, c.id_var).is_some();
    let attr = c.attr_const.is_some() || bound(b, c.attr_var).is_some();
    let value = c.value_const.is_some() || bound(b, c.value_var).is_some();
    match (id, attr, value) {
        (true, true, _) => 0,
        (true, false, _) => 1,
        (false, true, true) => 2,
        (false, true, false) => 3,
        (false, false, _) => 4,
    }
}

fn blocked(c: &CCond, b: &Bindings, wm: &WorkingMemory) -> bool {
    let mut scratch = b.clone();
    let mut trail = Vec::new();
    for tt in candidates(c, &scratch, wm) {
        let w = wm.get(tt).expect("indexed wme");
        if unify(c, w, wm, &mut scratch, &mut trail) && comparisons_hold_all(c, w, &scratch) {
            return true;
        }
        undo(&mut scratch, &mut trail, 0);
    }
    false
}

fn comparisons_hold_all(c: &CCond, w: &Wme, b: &Bindings) -> bool {
    comparisons_hold(&c.id, &Symbol::Id(w.id), b)
        && comparisons_hold(&c.attr, &w.attr, b)
        && comparisons_hold(&c.value, &w.value, b)
}

struct Join<'a> {
    rule: &'a Compiled,
    wm: &'a WorkingMemory,
    token: Vec<Timetag>,
    done: Vec<bool>,
    out: Vec<(Token, Bindings)>,
}

impl Join<'_> {
    fn run(&mut self, b: &mut Bindings, trail: &mut Vec<usize>, remaining: usize) {
        if remaining == 0 {
            let complete = self.rule.pos.iter().zip(&self.token).all(|(c, tt)| {
                let w = self.wm.get(*tt).expect("matched wme");
                comparisons_hold_all(c, w, b)
            });
            if complete && !self.rule.neg.iter().any(|c| blocked(c, b, self.wm)) {
                self.out.push((self.token.clone(), b.clone()));
            }
            return;
        }
        let next = (0..self.rule.pos.len())
            .filter(|i| !self.done[*i])
            .min_by_key(|i| selectivity(&self.rule.pos[*i], b))
            .expect("remaining condition");
        let c = &self.rule.pos[next];
        self.done[next] = true;
        for tt in candidates(c, b, self.wm) {
            let w = self.wm.get(tt).expect("indexed wme");
            let mark = trail.len();
            if unify(c, w, self.wm, b, trail) {
                self.token[next] = tt;
                self.run(b, trail, remaining - 1);
            }
            undo(b, trail, mark);
        }
        self.done[next] = false;
    }
}

/// All matches of `rule`, optionally with one positive condition pinned to a WME
/// or with some variables pre-bound.
fn join(
    rule: &Compiled,
    wm: &WorkingMemory,
    seed: Option<(usize, &Wme)>,
    pre: Option<Bindings>,
) -> Vec<(Token, Bindings)> {
    let n = rule.pos.len();
    let mut b = pre.unwrap_or_else(|| vec![None; rule.vars.len()]);
    let mut trail = Vec::new();
    let mut j = Join {
        rule,
        wm,
        token: vec![0; n],
        done: vec![false; n],
        out: Vec::new(),
    };
    match seed {
        Some((i, w)) => {
            if !unify(&rule.pos[i], w, wm, &mut b, &mut trail) {
                return Vec::new();
            }
            j.token[i] = w.timetag;
            j.done[i] = true;
            j.run(&mut b, &mut trail, n - 1);
        }
        None => j.run(&mut b, &mut trail, n),
    }
    j.out
}

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Variable table for a rule; bindings are indexed by it.
    pub fn vars(&self, rule: RuleId) -> &[String] {
        &self.rules[rule].as_ref().expect("live rule").vars
    }

    pub fn binding<'a>(&'a self, m: &'a Match, var: &str) -> Option<&'a Symbol> {
        let i = self.vars(m.rule).iter().position(|v| v == var)?;
        m.bindings[i].as_ref()
    }

    pub fn is_live(&self, rule: RuleId) -> bool {
        self.rules.get(rule).is_some_and(|r| r.is_some())
    }

    /// Current matches of a rule, sorted by token.
    pub fn matches(&self, rule: RuleId) -> Vec<Match> {
        let Some(Some(c)) = self.rules.get(rule) else {
            return Vec::new();
        };
        let mut v: Vec<Match> = c
            .matches
            .iter()
            .map(|(t, b)| Match {
                rule,
                token: t.clone(),
                bindings: b.clone(),
            })
            .collect();
        v.sort_by(|a, b| a.token.cmp(&b.token));
        v
    }

    pub fn match_count(&self) -> usize {
        self.rules.iter().flatten().map(|c| c.matches.len()).sum()
    }

    pub fn bindings_of(&self, rule: RuleId, token: &Token) -> Option<&Bindings> {
        self.rules.get(rule)?.as_ref()?.matches.get(token)
    }

    /// Adds a rule under `id` and returns its current matches.
    pub fn add_rule(&mut self, id: RuleId, rule: &Rule, wm: &WorkingMemory) -> Vec<Match> {
        let mut compiled = compile(rule);
        if self.rules.len() <= id {
            self.rules.resize_with(id + 1, || None);
        }
        assert!(self.rules[id].is_none(), "rule slot {id} in use");
        for (i, c) in compiled.pos.iter().enumerate() {
            match site_key(c) {
                Some(k) => self.pos_by_attr.entry(k).or_default().push((id, i)),
                None => self.pos_wild.push((id, i)),
            }
        }
        for (i, c) in compiled.neg.iter().enumerate() {
            match site_key(c) {
                Some(k) => self.neg_by_attr.entry(k).or_default().push((id, i)),
                None => self.neg_wild.push((id, i)),
            }
        }
        let mut found = join(&compiled, wm, None, None);
        found.sort_by(|a, b| a.0.cmp(&b.0));
        let mut added = Vec::new();
        for (token, bindings) in found {
            for tt in &token {
                self.by_timetag
                    .entry(*tt)
                    .or_default()
                    .insert((id, token.clone()));
            }
            compiled.matches.insert(token.clone(), bindings.clone());
            added.push(Match {
                rule: id,
                token,
                bindings,
            });
        }
        self.rules[id] = Some(compiled);
        added
    }

    /// Removes a rule and returns the tokens it had matched.
    pub fn remove_rule(&mut self, id: RuleId) -> Vec<Token> {
        let Some(compiled) = self.rules.get_mut(id).and_then(Option::take) else {
            return Vec::new();
        };
        for list in self
            .pos_by_attr
            .values_mut()
            .chain(self.neg_by_attr.values_mut())
        {
            list.retain(|(r, _)| *r != id);
        }
        self.pos_wild.retain(|(r, _)| *r != id);
        self.neg_wild.retain(|(r, _)| *r != id);
        let mut tokens: Vec<Token> = compiled.matches.into_keys().collect();
        tokens.sort();
        for t in &tokens {
            for tt in t {
                if let Some(set) = self.by_timetag.get_mut(tt) {
                    set.remove(&(id, t.clone()));
                    if set.is_empty() {
                        self.by_timetag.remove(tt);
                    }
                }
            }
        }
        tokens
    }

    fn drop_match(&mut self, rule: RuleId, token: &Token) -> bool {
        let Some(Some(c)) = self.rules.get_mut(rule) else {
            return false;
        };
        if c.matches.remove(token).is_none() {
            return false;
        }
        for tt in token {
            if let Some(set) = self.by_timetag.get_mut(tt) {
                set.remove(&(rule, token.clone()));
                if set.is_empty() {
                    self.by_timetag.remove(tt);
                }
            }
        }
        true
    }

    fn keep_match(&mut self, rule: RuleId, token: Token, bindings: Bindings) -> bool {
        let c = self.rules[rule].as_mut().expect("live rule");
        if c.matches.contains_key(&token) {
            return false;
        }
        for tt in &token {
            self.by_timetag
                .entry(*tt)
                .or_default()
                .insert((rule, token.clone()));
        }
        c.matches.insert(token, bindings);
        true
    }

    fn sites(
        index: &HashMap<SiteKey, Vec<(RuleId, usize)>>,
        wild: &[(RuleId, usize)],
        w: &Wme,
    ) -> Vec<(RuleId, usize)> {
        let mut v: Vec<(RuleId, usize)> = Vec::new();
        for k in [
            (w.attr.clone(), None),
            (w.attr.clone(), Some(w.value.clone())),
        ] {
            if let Some(list) = index.get(&k) {
                v.extend(list.iter().copied());
            }
        }
        v.extend(wild.iter().copied());
        v
    }

    fn pos_sites(&self, w: &Wme) -> Vec<(RuleId, usize)> {
        Self::sites(&self.pos_by_attr, &self.pos_wild, w)
    }

    fn neg_sites(&self, w: &Wme) -> Vec<(RuleId, usize)> {
        Self::sites(&self.neg_by_attr, &self.neg_wild, w)
    }

    /// Brings every rule's match set up to date with the given changes.
    /// `wm` must already reflect all of them.
    pub fn sync(&mut self, wm: &WorkingMemory, changes: &[Change]) -> MatchDelta {
        let mut removed: Vec<(RuleId, Token)> = Vec::new();
        let mut added: Vec<(RuleId, Token)> = Vec::new();

        // Matches that used a removed WME.
        for ch in changes {
            if let Change::Remove(w) = ch {
                let Some(set) = self.by_timetag.get(&w.timetag) else {
                    continue;
                };
                let mut doomed: Vec<(RuleId, Token)> = set.iter().cloned().collect();
                doomed.sort();
                for (r, t) in doomed {
                    if self.drop_match(r, &t) {
                        removed.push((r, t));
                    }
                }
            }
        }

        // Matches unblocked by a removed WME that fit a negated condition.
        for ch in changes {
            let Change::Remove(w) = ch else { continue };
            for (r, ni) in self.neg_sites(w) {
                let c = self.rules[r].as_ref().expect("live rule");
                let mut pre = vec![None; c.vars.len()];
                let mut trail = Vec::new();
                if !unify(&c.neg[ni], w, wm, &mut pre, &mut trail) {
                    continue;
                }
                for (t, b) in join(c, wm, None, Some(pre)) {
                    if self.keep_match(r, t.clone(), b) {
                        added.push((r, t));
                    }
                }
            }
        }

        // Matches that use an added WME.
        for ch in changes {
            let Change::Add(w) = ch else { continue };
            if !wm.contains(w.timetag) {
                continue;
            }
            for (r, pi) in self.pos_sites(w) {
                let c = self.rules[r].as_ref().expect("live rule");
                for (t, b) in join(c, wm, Some((pi, w)), None) {
                    if self.keep_match(r, t.clone(), b) {
                        added.push((r, t));
                    }
                }
            }
        }

        // Matches newly blocked by an added WME.
        for ch in changes {
            let Change::Add(w) = ch else { continue };
            if !wm.contains(w.timetag) {
                continue;
            }
            for (r, ni) in self.neg_sites(w) {
                let c = self.rules[r].as_ref().expect("live rule");
                let cond = &c.neg[ni];
                let mut doomed: Vec<Token> = c
                    .matches
                    .iter()
                    .filter(|(_, b)| {
                        let mut scratch = (*b).clone();
                        let mut trail = Vec::new();
                        unify(cond, w, wm, &mut scratch, &mut trail)
                            && comparisons_hold_all(cond, w, &scratch)
                    })
                    .map(|(t, _)| t.clone())
                    .collect();
                doomed.sort();
                for t in doomed {
                    if self.drop_match(r, &t) {
                        removed.push((r, t));
                    }
                }
            }
        }

        // A match can be dropped and re-found within one batch; report net changes only.
        let added_set: HashSet<(RuleId, Token)> = added.iter().cloned().collect();
        let removed_set: HashSet<(RuleId, Token)> = removed.iter().cloned().collect();
        let mut delta = MatchDelta::default();
        let mut seen = HashSet::new();
        for (r, t) in removed {
            if !added_set.contains(&(r, t.clone())) && seen.insert((r, t.clone())) {
                delta.removed.push((r, t));
            }
        }
        for (r, t) in added {
            let live = self.rules[r]
                .as_ref()
                .and_then(|c| c.matches.get(&t))
                .cloned();
            if let Some(b) = live {
                if !removed_set.contains(&(r, t.clone())) && seen.insert((r, t.clone())) {
                    delta.added.push(Match {
                        rule: r,
                        token: t,
                        bindings: b,
                    });
                }
            }
        }
        delta.removed.sort();
        delta
            .added
            .sort_by(|a, b| (a.rule, &a.token).cmp(&(b.rule, &b.token)));
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_agent_file;
    use crate::wm::Support;

    fn rules(src: &str) -> Vec<Rule> {
        let (r, d) = parse_agent_file(src);
        assert!(d.is_empty(), "{d:?}");
        r
    }

    fn s(x: &str) -> Symbol {
        Symbol::str(x)
    }

    #[test]
    fn proposal_matches_each_clear_block() {
        let mut wm = WorkingMemory::new();
        let s1 = wm.fresh_id('S');
        wm.register_state(s1);
        for _ in 0..3 {
            let b = wm.fresh_id('B');
            wm.add(s1, s("block"), b.into(), false, Support::O, None);
            wm.add(b, s("clear"), s("true"), false, Support::O, None);
        }
        wm.take_changes();
        let r = rules("sp {p (state <s> ^block <b>) (<b> ^clear true) --> (<s> ^operator <o> +) (<o> ^target <b>)}");
        let mut m = Matcher::new();
        assert_eq!(m.add_rule(0, &r[0], &wm).len(), 3);
        let none = rules("sp {q (state <s> ^block <b>) (<b> ^clear false) --> (<s> ^x 1)}");
        assert!(m.add_rule(1, &none[0], &wm).is_empty());
    }

    #[test]
    fn negation_blocks_and_unblocks() {
        let mut wm = WorkingMemory::new();
        let s1 = wm.fresh_id('S');
        wm.register_state(s1);
        wm.add(s1, s("a"), Symbol::Int(1), false, Support::O, None);
        wm.take_changes();
        let r = rules("sp {n (state <s> ^a <x>) -(<s> ^b <x>) --> (<s> ^c <x>)}");
        let mut m = Matcher::new();
        assert_eq!(m.add_rule(0, &r[0], &wm).len(), 1);
        let tt = wm
            .add(s1, s("b"), Symbol::Int(1), false, Support::O, None)
            .timetag;
        let ch = wm.take_changes();
        let d = m.sync(&wm, &ch);
        assert_eq!(d.removed.len(), 1);
        assert!(d.added.is_empty());
        wm.remove(tt);
        let ch = wm.take_changes();
        let d = m.sync(&wm, &ch);
        assert_eq!(d.added.len(), 1);
    }

    #[test]
    fn comparisons_with_late_bound_operand() {
        let mut wm = WorkingMemory::new();
        let s1 = wm.fresh_id('S');
        wm.register_state(s1);
        wm.add(s1, s("x"), Symbol::Int(3), false, Support::O, None);
        wm.add(s1, s("y"), Symbol::Int(5), false, Support::O, None);
        wm.take_changes();
        let r = rules("sp {c (state <s> ^x { <a> < <b> }) (<s> ^y <b>) --> (<s> ^ok 1)}");
        let mut m = Matcher::new();
        assert_eq!(m.add_rule(0, &r[0], &wm).len(), 1);
        let r2 = rules("sp {c2 (state <s> ^x { <a> > <b> }) (<s> ^y <b>) --> (<s> ^ok 1)}");
        assert!(m.add_rule(1, &r2[0], &wm).is_empty());
    }

    #[test]
    fn add_then_remove_in_one_batch_is_invisible() {
        let mut wm = WorkingMemory::new();
        let s1 = wm.fresh_id('S');
        wm.register_state(s1);
        wm.take_changes();
        let r = rules("sp {e (state <s> ^a <x>) --> (<s> ^b <x>)}");
        let mut m = Matcher::new();
        m.add_rule(0, &r[0], &wm);
        let tt = wm
            .add(s1, s("a"), Symbol::Int(1), false, Support::O, None)
            .timetag;
        wm.remove(tt);
        let ch = wm.take_changes();
        assert!(m.sync(&wm, &ch).is_empty());
        assert_eq!(m.match_count(), 0);
    }
}
