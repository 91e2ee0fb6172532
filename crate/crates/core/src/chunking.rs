//! Compiling substate results into rules.
//!
//! Every instantiation fired in a substate keeps a trace of the WMEs it
//! matched. When a result appears, the trace is walked backwards from the
//! result's creator to the WMEs that existed above the substate (the
//! frontier); those become the conditions of a new rule whose actions
//! recreate the results.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::decide::{ImpasseKind, Pref};
use crate::ground::{ground_actions, Grounded as GroundAction};
use crate::matcher::Matcher;
use crate::rule::{Action, Condition, Operand, PrefKind, Provenance, RelOp, RhsValue, Rule, Test};
use crate::symbol::{Ident, Symbol};
use crate::wm::{ArchKind, InstId, Support, Timetag, Wme, WorkingMemory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SupportKind {
    Arch(ArchKind),
    O,
    I,
}

impl From<&Support> for SupportKind {
    fn from(s: &Support) -> Self {
        match s {
            Support::Arch(k) => SupportKind::Arch(*k),
            Support::O => SupportKind::O,
            Support::I(_) => SupportKind::I,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Id,
    Attr,
    Value,
}

/// A WME as matched by a positive condition.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedWme {
    pub wme: Wme,
    pub creator: Option<InstId>,
    pub support: SupportKind,
    /// Relational tests the condition applied, with operands resolved.
    pub tests: Vec<(Field, RelOp, Symbol)>,
}

/// A negated condition with its variables replaced by their bindings.
/// Each field holds equality (`None`) and relational constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct NegatedTest {
    pub id: Ident,
    pub attr: Vec<(Option<RelOp>, Symbol)>,
    pub value: Vec<(Option<RelOp>, Symbol)>,
    pub acceptable: bool,
}

impl NegatedTest {
    /// True when `w` is a WME the negated condition forbids.
    pub fn matches(&self, w: &Wme) -> bool {
        let field = |tests: &[(Option<RelOp>, Symbol)], v: &Symbol| {
            tests.iter().all(|(op, s)| match op {
                None => v == s,
                Some(op) => op.holds(v, s),
            })
        };
        w.id == self.id
            && w.acceptable == self.acceptable
            && field(&self.attr, &w.attr)
            && field(&self.value, &w.value)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceInst {
    pub name: String,
    pub state: Option<Ident>,
    pub level: usize,
    pub matched: Vec<MatchedWme>,
    pub negated: Vec<NegatedTest>,
}

/// Something a substate produced for a shallower level.
#[derive(Clone, Debug, PartialEq)]
pub enum ResultItem {
    Wme {
        timetag: Timetag,
        id: Ident,
        attr: Symbol,
        value: Symbol,
        creator: InstId,
    },
    Pref {
        state: Ident,
        pref: Pref,
        creator: InstId,
    },
}

impl ResultItem {
    pub fn creator(&self) -> InstId {
        match self {
            ResultItem::Wme { creator, .. } | ResultItem::Pref { creator, .. } => *creator,
        }
    }

    fn idents(&self) -> Vec<Ident> {
        let syms: Vec<&Symbol> = match self {
            ResultItem::Wme { attr, value, .. } => vec![attr, value],
            ResultItem::Pref { pref, .. } => pref
                .referent
                .iter()
                .chain(std::iter::once(&pref.op))
                .collect(),
        };
        let mut out: Vec<Ident> = syms.into_iter().filter_map(Symbol::as_ident).collect();
        match self {
            ResultItem::Wme { id, .. } => out.push(*id),
            ResultItem::Pref { state, .. } => out.push(*state),
        }
        out
    }

    fn is_evaluation(&self) -> bool {
        matches!(self, ResultItem::Pref { pref, .. } if pref.kind != PrefKind::Acceptable)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Backtrace {
    pub frontier: Vec<MatchedWme>,
    pub negations: Vec<NegatedTest>,
    pub visited: BTreeSet<InstId>,
    pub refusal: Option<String>,
}

/// Walks back from `start` through the traces of instantiations at `level`.
/// `levels` gives the level of each identifier before the results were
/// linked; missing identifiers count as local.
pub fn backtrace(
    start: &[InstId],
    level: usize,
    superstate: Ident,
    traces: &dyn Fn(InstId) -> Option<TraceInst>,
    levels: &HashMap<Ident, usize>,
    wm: &WorkingMemory,
) -> Backtrace {
    let mut bt = Backtrace::default();
    let mut seen_tt: HashSet<Timetag> = HashSet::new();
    let mut queue: VecDeque<InstId> = start.iter().copied().collect();
    let level_of = |id: Ident| levels.get(&id).copied().unwrap_or(level);
    let lookup = |id: Ident, attr: &str, value: &Symbol| -> Option<MatchedWme> {
        let tt = wm.find(id, &Symbol::str(attr), value, true)?;
        let e = wm.entry(tt)?;
        Some(MatchedWme {
            wme: e.wme.clone(),
            creator: e.creator,
            support: (&e.support).into(),
            tests: Vec::new(),
        })
    };
    while let Some(inst) = queue.pop_front() {
        if !bt.visited.insert(inst) {
            continue;
        }
        let Some(trace) = traces(inst) else {
            bt.refusal
                .get_or_insert(format!("no trace for instantiation {}", inst.0));
            continue;
        };
        for n in &trace.negated {
            if level_of(n.id) < level {
                if !bt.negations.contains(n) {
                    bt.negations.push(n.clone());
                }
            } else {
                bt.refusal.get_or_insert(format!(
                    "{} tests the absence of local structure",
                    trace.name
                ));
            }
        }
        for m in &trace.matched {
            let mut pending = vec![m.clone()];
            while let Some(m) = pending.pop() {
                if level_of(m.wme.id) < level {
                    if seen_tt.insert(m.wme.timetag) {
                        bt.frontier.push(m);
                    } else if let Some(f) = bt
                        .frontier
                        .iter_mut()
                        .find(|f| f.wme.timetag == m.wme.timetag)
                    {
                        for t in m.tests {
                            if !f.tests.contains(&t) {
                                f.tests.push(t);
                            }
                        }
                    }
                    continue;
                }
                match m.support {
                    SupportKind::Arch(ArchKind::Structure) => {}
                    SupportKind::Arch(ArchKind::Item) => {
                        match lookup(superstate, "operator", &m.wme.value) {
                            Some(acc) => pending.push(acc),
                            None => {
                                bt.refusal.get_or_insert(format!(
                                    "item {} has no acceptable preference above",
                                    m.wme.value
                                ));
                            }
                        }
                    }
                    SupportKind::Arch(ArchKind::Selection) => {
                        match lookup(m.wme.id, "operator", &m.wme.value) {
                            Some(acc) => pending.push(acc),
                            None => {
                                bt.refusal.get_or_insert(format!(
                                    "selected {} has no acceptable preference",
                                    m.wme.value
                                ));
                            }
                        }
                    }
                    SupportKind::Arch(ArchKind::Retrieval) => {
                        bt.refusal
                            .get_or_insert(format!("{} depends on a memory retrieval", trace.name));
                    }
                    SupportKind::O | SupportKind::I => match m.creator {
                        Some(c) => queue.push_back(c),
                        None => {
                            bt.refusal.get_or_insert(format!(
                                "{} has no recorded creator",
                                m.wme.triple_text()
                            ));
                        }
                    },
                }
            }
        }
    }
    bt
}

/// Splits results into groups that share frontier WMEs or new identifiers.
/// Evaluation preferences never share a group with structure.
pub fn group_results(
    results: &[ResultItem],
    frontiers: &[BTreeSet<Timetag>],
    known: &HashSet<Ident>,
) -> Vec<Vec<usize>> {
    let n = results.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut owner_tt: HashMap<(bool, Timetag), usize> = HashMap::new();
    let mut owner_id: HashMap<(bool, Ident), usize> = HashMap::new();
    for i in 0..n {
        let eval = results[i].is_evaluation();
        for tt in &frontiers[i] {
            if let Some(j) = owner_tt.insert((eval, *tt), i) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
        for id in results[i].idents() {
            if known.contains(&id) {
                continue;
            }
            if let Some(j) = owner_id.insert((eval, id), i) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

fn var_of(id: Ident) -> String {
    format!("<{}{}>", id.letter.to_ascii_lowercase(), id.index)
}

struct Vars {
    known: BTreeMap<Ident, String>,
}

impl Vars {
    fn sym(&self, s: &Symbol) -> Option<Test> {
        match s {
            Symbol::Id(id) => self.known.get(id).map(|v| Test::Var(v.clone())),
            other => Some(Test::Const(other.clone())),
        }
    }

    fn operand(&self, s: &Symbol) -> Option<Operand> {
        match s {
            Symbol::Id(id) => self.known.get(id).map(|v| Operand::Var(v.clone())),
            other => Some(Operand::Const(other.clone())),
        }
    }
}

/// Builds a rule from a backtrace and the results it explains.
/// `superstate_link` is used when no frontier WME hangs off the superstate.
pub fn build_chunk(
    name: &str,
    bt: &Backtrace,
    results: &[ResultItem],
    superstate: Ident,
    superstate_link: Option<MatchedWme>,
) -> Result<Rule, String> {
    if let Some(r) = &bt.refusal {
        return Err(r.clone());
    }
    let mut frontier: Vec<MatchedWme> = bt.frontier.clone();
    if !frontier.iter().any(|m| m.wme.id == superstate) {
        frontier.push(superstate_link.ok_or("no condition links the superstate")?);
    }
    let mut vars = Vars {
        known: BTreeMap::new(),
    };
    for m in &frontier {
        for s in [
            Symbol::Id(m.wme.id),
            m.wme.attr.clone(),
            m.wme.value.clone(),
        ] {
            if let Symbol::Id(id) = s {
                vars.known.entry(id).or_insert_with(|| var_of(id));
            }
        }
    }

    let key = |m: &MatchedWme| {
        let konst = |s: &Symbol| {
            if s.is_ident() {
                String::new()
            } else {
                s.to_string()
            }
        };
        (
            konst(&m.wme.attr),
            konst(&m.wme.value),
            m.wme.acceptable,
            m.wme.timetag,
        )
    };
    let mut bound: HashSet<Ident> = HashSet::from([superstate]);
    let mut remaining: Vec<MatchedWme> = frontier;
    let mut ordered: Vec<MatchedWme> = Vec::new();
    while !remaining.is_empty() {
        let next = remaining
            .iter()
            .enumerate()
            .filter(|(_, m)| bound.contains(&m.wme.id))
            .min_by(|a, b| key(a.1).cmp(&key(b.1)))
            .map(|(i, _)| i)
            .ok_or("condition not connected to the superstate")?;
        let m = remaining.remove(next);
        for s in [&m.wme.attr, &m.wme.value] {
            if let Symbol::Id(id) = s {
                bound.insert(*id);
            }
        }
        ordered.push(m);
    }

    let mut first_seen: Vec<String> = Vec::new();
    let mut field_test = |s: &Symbol, extra: Vec<Test>, vars: &Vars| -> Result<Test, String> {
        let base = vars
            .sym(s)
            .ok_or_else(|| format!("identifier {s} has no variable"))?;
        let mut parts = vec![base.clone()];
        if let (Test::Var(v), Symbol::Id(_)) = (&base, s) {
            if !first_seen.contains(v) {
                parts.extend(
                    first_seen
                        .iter()
                        .map(|u| Test::Compare(RelOp::Ne, Operand::Var(u.clone()))),
                );
                first_seen.push(v.clone());
            }
        }
        parts.extend(extra);
        Ok(if parts.len() == 1 {
            base
        } else {
            Test::Conj(parts)
        })
    };
    let mut conditions = Vec::new();
    for (i, m) in ordered.iter().enumerate() {
        let extra = |f: Field| -> Vec<Test> {
            m.tests
                .iter()
                .filter(|(g, _, _)| *g == f)
                .filter_map(|(_, op, s)| vars.operand(s).map(|o| Test::Compare(*op, o)))
                .collect()
        };
        let id = field_test(&Symbol::Id(m.wme.id), extra(Field::Id), &vars)?;
        let attr = field_test(&m.wme.attr, extra(Field::Attr), &vars)?;
        let value = field_test(&m.wme.value, extra(Field::Value), &vars)?;
        conditions.push(Condition {
            negated: false,
            state: i == 0,
            id,
            attr,
            value,
            acceptable: m.wme.acceptable,
        });
    }
    for n in &bt.negations {
        let id = vars
            .sym(&Symbol::Id(n.id))
            .ok_or("negation on an unbound identifier")?;
        let side = |cs: &[(Option<RelOp>, Symbol)]| -> Result<Test, String> {
            let mut parts = Vec::new();
            for (op, s) in cs {
                match op {
                    None => parts.push(vars.sym(s).ok_or("negation on a local identifier")?),
                    Some(op) => parts.push(Test::Compare(
                        *op,
                        vars.operand(s).ok_or("negation on a local identifier")?,
                    )),
                }
            }
            match parts.len() {
                0 => Err("negation with an unconstrained field".to_string()),
                1 => Ok(parts.pop().expect("one part")),
                _ => Ok(Test::Conj(parts)),
            }
        };
        let attr = side(&n.attr)?;
        let value = side(&n.value)?;
        conditions.push(Condition {
            negated: true,
            state: false,
            id,
            attr,
            value,
            acceptable: n.acceptable,
        });
    }

    let mut created: BTreeMap<Ident, String> = BTreeMap::new();
    let mut rhs = |s: &Symbol| -> RhsValue {
        match s {
            Symbol::Id(id) => RhsValue::Var(
                vars.known
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| created.entry(*id).or_insert_with(|| var_of(*id)).clone()),
            ),
            other => RhsValue::Const(other.clone()),
        }
    };
    let mut actions = Vec::new();
    for r in results {
        match r {
            ResultItem::Wme {
                id, attr, value, ..
            } => {
                let RhsValue::Var(idv) = rhs(&Symbol::Id(*id)) else {
                    unreachable!("identifiers map to variables")
                };
                actions.push(Action::Make {
                    id: idv,
                    attr: rhs(attr),
                    value: rhs(value),
                });
            }
            ResultItem::Pref { state, pref, .. } => {
                let var = |v: RhsValue| match v {
                    RhsValue::Var(x) => Ok(x),
                    RhsValue::Const(c) => Err(format!("preference for constant {c}")),
                };
                let state = var(rhs(&Symbol::Id(*state)))?;
                let op = var(rhs(&pref.op))?;
                let referent = match &pref.referent {
                    Some(r) => Some(var(rhs(r))?),
                    None => None,
                };
                actions.push(Action::Pref {
                    state,
                    op,
                    kind: pref.kind,
                    referent,
                    value: pref.value,
                });
            }
        }
    }
    Rule::new(name, conditions, actions, Provenance::Chunk).map_err(|e| e.to_string())
}

/// Everything needed to check that a learned rule reproduces its results.
#[derive(Clone, Debug)]
pub struct ChunkRecord {
    pub rule: String,
    pub cycle: u64,
    pub impasse: ImpasseKind,
    pub superstate: Ident,
    pub frontier: Vec<Wme>,
    pub results: Vec<GroundAction>,
}

impl ChunkRecord {
    pub fn results_of(items: &[ResultItem]) -> Vec<GroundAction> {
        items
            .iter()
            .map(|r| match r {
                ResultItem::Wme {
                    id, attr, value, ..
                } => GroundAction::Make(*id, attr.clone(), value.clone()),
                ResultItem::Pref { state, pref, .. } => GroundAction::Pref(*state, pref.clone()),
            })
            .collect()
    }
}

/// Fires `rule` against a working memory holding only the recorded frontier
/// and checks that some match recreates the recorded results, up to a
/// renaming of identifiers the rule creates.
pub fn replay(rule: &Rule, record: &ChunkRecord) -> Result<(), String> {
    let mut wm = WorkingMemory::new();
    let mut all_ids: BTreeSet<Ident> = BTreeSet::from([record.superstate]);
    for w in &record.frontier {
        all_ids.insert(w.id);
        for s in [&w.attr, &w.value] {
            if let Symbol::Id(i) = s {
                all_ids.insert(*i);
            }
        }
    }
    for r in &record.results {
        if let GroundAction::Make(id, a, v) = r {
            all_ids.insert(*id);
            all_ids.extend([a, v].into_iter().filter_map(Symbol::as_ident));
        }
        if let GroundAction::Pref(s, p) = r {
            all_ids.insert(*s);
            all_ids.extend(
                p.referent
                    .iter()
                    .chain(std::iter::once(&p.op))
                    .filter_map(Symbol::as_ident),
            );
        }
    }
    for id in &all_ids {
        wm.reserve_id(*id);
    }
    wm.register_state(record.superstate);
    for w in &record.frontier {
        wm.add(
            w.id,
            w.attr.clone(),
            w.value.clone(),
            w.acceptable,
            Support::O,
            None,
        );
    }
    let mut matcher = Matcher::new();
    let matches = matcher.add_rule(0, rule, &wm);
    if matches.is_empty() {
        return Err(format!("{} does not match its own frontier", rule.name));
    }
    let frontier_ids: HashSet<Ident> = all_ids
        .iter()
        .copied()
        .filter(|i| {
            *i == record.superstate
                || record
                    .frontier
                    .iter()
                    .any(|w| w.id == *i || w.value == Symbol::Id(*i) || w.attr == Symbol::Id(*i))
        })
        .collect();
    for m in &matches {
        let (got, _) = ground_actions(
            &rule.actions,
            |v| matcher.binding(m, v).cloned(),
            |l| wm.fresh_id(l),
        );
        if same_up_to_new_ids(&got, &record.results, &frontier_ids) {
            return Ok(());
        }
    }
    Err(format!(
        "{} fired but produced different results",
        rule.name
    ))
}

fn same_up_to_new_ids(got: &[GroundAction], want: &[GroundAction], fixed: &HashSet<Ident>) -> bool {
    if got.len() != want.len() {
        return false;
    }
    let mut map: HashMap<Ident, Ident> = HashMap::new();
    let mut used: HashSet<Ident> = HashSet::new();
    let mut same_sym = |a: &Symbol, b: &Symbol, map: &mut HashMap<Ident, Ident>| -> bool {
        match (a, b) {
            (Symbol::Id(x), Symbol::Id(y)) if fixed.contains(y) => x == y,
            (Symbol::Id(x), Symbol::Id(y)) => match map.get(x) {
                Some(z) => z == y,
                None => {
                    if !used.insert(*y) {
                        return false;
                    }
                    map.insert(*x, *y);
                    true
                }
            },
            _ => a == b,
        }
    };
    got.iter().zip(want).all(|(g, w)| match (g, w) {
        (GroundAction::Make(i1, a1, v1), GroundAction::Make(i2, a2, v2)) => {
            same_sym(&Symbol::Id(*i1), &Symbol::Id(*i2), &mut map)
                && same_sym(a1, a2, &mut map)
                && same_sym(v1, v2, &mut map)
        }
        (GroundAction::Pref(s1, p1), GroundAction::Pref(s2, p2)) => {
            p1.kind == p2.kind
                && p1.value == p2.value
                && same_sym(&Symbol::Id(*s1), &Symbol::Id(*s2), &mut map)
                && same_sym(&p1.op, &p2.op, &mut map)
                && match (&p1.referent, &p2.referent) {
                    (Some(a), Some(b)) => same_sym(a, b, &mut map),
                    (None, None) => true,
                    _ => false,
                }
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::canonical_text;

    fn id(l: char, n: u32) -> Ident {
        Ident::new(l, n)
    }

    fn mw(
        tt: Timetag,
        i: Ident,
        a: &str,
        v: Symbol,
        creator: Option<u64>,
        support: SupportKind,
    ) -> MatchedWme {
        MatchedWme {
            wme: Wme {
                timetag: tt,
                id: i,
                attr: Symbol::str(a),
                value: v,
                acceptable: false,
            },
            creator: creator.map(InstId),
            support,
            tests: Vec::new(),
        }
    }

    #[test]
    fn two_step_backtrace_reaches_the_frontier() {
        let s1 = id('S', 1);
        let s2 = id('S', 2);
        let b1 = id('B', 1);
        let mut traces: HashMap<InstId, TraceInst> = HashMap::new();
        // inst 2 read (S1 ^block B1) (B1 ^size 3) and made (S2 ^big B1)
        traces.insert(
            InstId(2),
            TraceInst {
                name: "mark".into(),
                state: Some(s2),
                level: 1,
                matched: vec![
                    mw(
                        1,
                        s2,
                        "superstate",
                        Symbol::Id(s1),
                        None,
                        SupportKind::Arch(ArchKind::Structure),
                    ),
                    mw(5, s1, "block", Symbol::Id(b1), None, SupportKind::O),
                    mw(6, b1, "size", Symbol::Int(3), None, SupportKind::O),
                ],
                negated: vec![],
            },
        );
        // inst 3 read (S2 ^big B1) and made the result (B1 ^heavy yes)
        traces.insert(
            InstId(3),
            TraceInst {
                name: "result".into(),
                state: Some(s2),
                level: 1,
                matched: vec![mw(9, s2, "big", Symbol::Id(b1), Some(2), SupportKind::I)],
                negated: vec![],
            },
        );
        let levels: HashMap<Ident, usize> = [(s1, 0), (b1, 0), (s2, 1)].into_iter().collect();
        let wm = WorkingMemory::new();
        let bt = backtrace(
            &[InstId(3)],
            1,
            s1,
            &|i| traces.get(&i).cloned(),
            &levels,
            &wm,
        );
        assert!(bt.refusal.is_none());
        let tts: Vec<Timetag> = bt.frontier.iter().map(|m| m.wme.timetag).collect();
        assert_eq!(tts, vec![5, 6]);
        let result = ResultItem::Wme {
            timetag: 10,
            id: b1,
            attr: Symbol::str("heavy"),
            value: Symbol::str("yes"),
            creator: InstId(3),
        };
        let rule = build_chunk("chunk-1", &bt, std::slice::from_ref(&result), s1, None).unwrap();
        assert_eq!(
            rule.to_string(),
            "sp {chunk-1\n    (state <s1> ^block { <b1> <> <s1> })\n    (<b1> ^size 3)\n-->\n    (<b1> ^heavy yes)\n}"
        );
        let (back, diags) = crate::rule::parse_agent_file(&rule.to_string());
        assert!(diags.is_empty());
        assert_eq!(canonical_text(&back[0]), canonical_text(&rule));

        let record = ChunkRecord {
            rule: rule.name.clone(),
            cycle: 1,
            impasse: ImpasseKind::Tie,
            superstate: s1,
            frontier: bt.frontier.iter().map(|m| m.wme.clone()).collect(),
            results: ChunkRecord::results_of(&[result]),
        };
        replay(&rule, &record).unwrap();
    }

    #[test]
    fn retrieval_and_local_negation_refuse() {
        let s1 = id('S', 1);
        let s2 = id('S', 2);
        let mut traces: HashMap<InstId, TraceInst> = HashMap::new();
        traces.insert(
            InstId(1),
            TraceInst {
                name: "uses-retrieval".into(),
                state: Some(s2),
                level: 1,
                matched: vec![mw(
                    4,
                    id('R', 1),
                    "x",
                    Symbol::Int(1),
                    None,
                    SupportKind::Arch(ArchKind::Retrieval),
                )],
                negated: vec![],
            },
        );
        traces.insert(
            InstId(2),
            TraceInst {
                name: "local-negation".into(),
                state: Some(s2),
                level: 1,
                matched: vec![],
                negated: vec![NegatedTest {
                    id: s2,
                    attr: vec![(None, Symbol::str("x"))],
                    value: vec![],
                    acceptable: false,
                }],
            },
        );
        let levels: HashMap<Ident, usize> = [(s1, 0), (s2, 1)].into_iter().collect();
        let wm = WorkingMemory::new();
        let bt = backtrace(
            &[InstId(1)],
            1,
            s1,
            &|i| traces.get(&i).cloned(),
            &levels,
            &wm,
        );
        assert!(bt.refusal.unwrap().contains("retrieval"));
        let bt = backtrace(
            &[InstId(2)],
            1,
            s1,
            &|i| traces.get(&i).cloned(),
            &levels,
            &wm,
        );
        assert!(bt.refusal.unwrap().contains("absence"));
    }

    #[test]
    fn results_group_by_shared_new_ids() {
        let s1 = id('S', 1);
        let x = id('X', 1);
        let results = vec![
            ResultItem::Wme {
                timetag: 1,
                id: s1,
                attr: Symbol::str("a"),
                value: Symbol::Id(x),
                creator: InstId(1),
            },
            ResultItem::Wme {
                timetag: 2,
                id: x,
                attr: Symbol::str("v"),
                value: Symbol::Int(1),
                creator: InstId(2),
            },
            ResultItem::Wme {
                timetag: 3,
                id: s1,
                attr: Symbol::str("b"),
                value: Symbol::Int(2),
                creator: InstId(3),
            },
        ];
        let fr = vec![
            BTreeSet::from([10]),
            BTreeSet::from([11]),
            BTreeSet::from([12]),
        ];
        let known = HashSet::from([s1]);
        assert_eq!(
            group_results(&results, &fr, &known),
            vec![vec![0, 1], vec![2]]
        );
    }
}
