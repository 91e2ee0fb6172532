use std::collections::HashSet;
use std::rc::Rc;

use super::{Engine, Inst, PrefRecord};
use crate::chunking::{Field, MatchedWme, NegatedTest, TraceInst};
use crate::decide::filter;
use crate::error::{Error, Result};
use crate::ground::{ground_actions, Grounded};
use crate::matcher::{Bindings, RuleId, Token};
use crate::rule::{FunctionClass, Operand, PrefKind, RelOp, Rule, Test};
use crate::symbol::{Ident, Symbol};
use crate::trace::CycleReport;
use crate::wm::{Change, InstId, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Phase {
    Elaboration,
    Application,
}

type Removal = (String, Ident, Symbol, Symbol);

fn lookup<'a>(vars: &'a [String], bindings: &'a Bindings) -> impl Fn(&str) -> Option<Symbol> + 'a {
    move |v| {
        vars.iter()
            .position(|x| x == v)
            .and_then(|i| bindings.get(i).cloned().flatten())
    }
}

impl Engine {
    /// Runs one decision cycle.
    pub fn step(&mut self) -> Result<CycleReport> {
        if self.halted {
            return Err(Error::Halted);
        }
        let cycle = self.cycle;
        self.report = CycleReport {
            cycle,
            ..Default::default()
        };
        for s in &mut self.stack {
            s.reward_read = false;
        }
        self.trace
            .emit(2, || format!("--- cycle {cycle}: input ---"));
        self.input_phase()?;
        self.trace.emit(2, || "--- elaboration ---".to_string());
        self.run_waves(Phase::Elaboration)?;
        if !self.halted {
            self.trace.emit(2, || "--- decision ---".to_string());
            self.decision_phase()?;
        }
        if !self.halted {
            self.trace.emit(2, || "--- application ---".to_string());
            self.run_waves(Phase::Application)?;
        }
        self.trace.emit(2, || "--- output ---".to_string());
        self.output_phase()?;
        self.record_episode();
        if self.halted {
            self.terminal_updates();
            self.trace.emit(1, || format!("halted at cycle {cycle}"));
        }
        self.report.halted = self.halted;
        self.cycle += 1;
        Ok(std::mem::take(&mut self.report))
    }

    /// Runs up to `max_cycles` cycles, stopping early when the agent halts.
    pub fn run(&mut self, max_cycles: u64) -> Result<Vec<CycleReport>> {
        let mut out = Vec::new();
        for _ in 0..max_cycles {
            if self.halted {
                break;
            }
            out.push(self.step()?);
        }
        Ok(out)
    }

    /// Feeds working-memory changes to the matcher and updates what is
    /// waiting to fire or retract.
    pub(crate) fn sync_matches(&mut self) {
        let changes = self.wm.take_changes();
        if changes.is_empty() {
            return;
        }
        for c in &changes {
            match c {
                Change::Add(w) => {
                    self.trace.emit(4, || format!("=>WM: {}", w.triple_text()));
                    if let Some(negs) = self.just_negs.get_mut(&w.id) {
                        let insts = &self.insts;
                        negs.retain(|(j, _)| insts.get(j).is_some_and(|i| i.live));
                        self.pending_retract
                            .extend(negs.iter().filter(|(_, n)| n.matches(w)).map(|(j, _)| *j));
                    }
                }
                Change::Remove(w) => {
                    self.trace.emit(4, || format!("<=WM: {}", w.triple_text()));
                    if w.value.is_ident() {
                        self.gc_needed = true;
                    }
                    if let Some(js) = self.just_deps.remove(&w.timetag) {
                        self.pending_retract.extend(js);
                    }
                }
            }
        }
        let delta = self.matcher.sync(&self.wm, &changes);
        for key in delta.removed {
            if self.pending_fire.remove(&key).is_none() {
                if let Some(inst) = self.live.get(&key) {
                    self.pending_retract.insert(*inst);
                }
            }
        }
        for m in delta.added {
            self.pending_fire.insert((m.rule, m.token), m.bindings);
        }
    }

    fn rule_rc(&self, id: RuleId) -> Option<Rc<Rule>> {
        self.rules.get(id).cloned().flatten()
    }

    /// Waves of parallel retraction and firing until quiescence.
    pub(crate) fn run_waves(&mut self, phase: Phase) -> Result<()> {
        let mut waves = 0usize;
        let mut applying = phase == Phase::Application;
        loop {
            self.sync_matches();
            let retract: Vec<InstId> = std::mem::take(&mut self.pending_retract)
                .into_iter()
                .collect();
            let eligible: Vec<(RuleId, Token)> = self
                .pending_fire
                .keys()
                .filter(|(r, _)| {
                    applying
                        || self.rules[*r]
                            .as_ref()
                            .is_some_and(|rule| rule.class != FunctionClass::Application)
                })
                .cloned()
                .collect();
            if retract.is_empty() && eligible.is_empty() {
                if self.gc_needed {
                    self.collect_garbage();
                    if self.wm.has_pending_changes() {
                        continue;
                    }
                }
                break;
            }
            waves += 1;
            self.report.waves += 1;
            if phase == Phase::Elaboration {
                self.report.elaboration_waves += 1;
            }
            if waves > self.config.max_elaborations {
                let mut names: Vec<String> = eligible
                    .iter()
                    .filter_map(|(r, _)| self.rules[*r].as_ref().map(|x| x.name.clone()))
                    .collect();
                names.sort();
                names.dedup();
                return Err(Error::Runaway {
                    waves: waves - 1,
                    rules: names,
                });
            }
            for i in retract {
                self.retract(i);
            }
            let mut firing: Vec<(String, RuleId, Token, Bindings)> = eligible
                .into_iter()
                .filter_map(|k| {
                    let b = self.pending_fire.remove(&k)?;
                    let name = self.rules[k.0].as_ref()?.name.clone();
                    Some((name, k.0, k.1, b))
                })
                .collect();
            firing.sort_by(|a, b| (&a.0, &a.2).cmp(&(&b.0, &b.2)));
            let mut fired = Vec::new();
            let mut removals: Vec<Removal> = Vec::new();
            let mut added_o: HashSet<(Ident, Symbol, Symbol)> = HashSet::new();
            for (_, rid, token, bindings) in firing {
                if let Some(i) = self.fire(rid, token, &bindings, &mut removals, &mut added_o) {
                    fired.push(i);
                }
            }
            for (rule, id, attr, value) in removals {
                if added_o.contains(&(id, attr.clone(), value.clone())) {
                    log::warn!("{rule}: removal of ({id} ^{attr} {value}) overridden by an addition in the same wave");
                    continue;
                }
                match self.wm.find(id, &attr, &value, false) {
                    Some(tt)
                        if matches!(self.wm.entry(tt).map(|e| &e.support), Some(Support::O)) =>
                    {
                        self.wm.remove(tt);
                    }
                    Some(_) => {
                        log::warn!("{rule}: ({id} ^{attr} {value}) is not o-supported; not removed")
                    }
                    None => {}
                }
            }
            if self.stack.len() > 1 && !fired.is_empty() {
                self.detect_results(&fired)?;
            }
            if applying && self.recheck_selections() {
                applying = false;
            }
        }
        Ok(())
    }

    /// Reruns the decision filter in every state with a selected operator
    /// and deselects operators that are no longer admitted.
    fn recheck_selections(&mut self) -> bool {
        let mut any = false;
        for d in 0..self.stack.len() {
            if let Some((op, _)) = self.stack[d].operator.clone() {
                let prefs = self.prefs_of(self.stack[d].id);
                if !filter(&prefs).admits(&op) {
                    self.deselect(d);
                    any = true;
                }
            }
        }
        any
    }

    pub(crate) fn deselect(&mut self, depth: usize) {
        if let Some((op, tt)) = self.stack[depth].operator.take() {
            self.wm.remove(tt);
            let s = self.stack[depth].id;
            self.trace.emit(1, || format!("deselect {op} in {s}"));
        }
    }

    pub(crate) fn collect_garbage(&mut self) {
        let roots = self.state_ids();
        let removed = self.wm.collect_garbage(&roots);
        self.gc_needed = false;
        self.trace
            .emit(4, || format!("garbage: {} WMEs", removed.len()));
    }

    fn trace_of(
        &self,
        rule: &Rule,
        token: &Token,
        find: &dyn Fn(&str) -> Option<Symbol>,
    ) -> (Vec<MatchedWme>, Vec<NegatedTest>) {
        fn compares(
            t: &Test,
            field: Field,
            find: &dyn Fn(&str) -> Option<Symbol>,
            out: &mut Vec<(Field, RelOp, Symbol)>,
        ) {
            match t {
                Test::Compare(op, Operand::Const(c)) => out.push((field, *op, c.clone())),
                Test::Compare(op, Operand::Var(v)) => {
                    if let Some(s) = find(v) {
                        out.push((field, *op, s));
                    }
                }
                Test::Conj(ts) => ts.iter().for_each(|t| compares(t, field, find, out)),
                _ => {}
            }
        }
        fn ground(
            t: &Test,
            find: &dyn Fn(&str) -> Option<Symbol>,
            out: &mut Vec<(Option<RelOp>, Symbol)>,
        ) {
            match t {
                Test::Const(c) => out.push((None, c.clone())),
                Test::Var(v) => {
                    if let Some(s) = find(v) {
                        out.push((None, s));
                    }
                }
                Test::Compare(op, Operand::Const(c)) => out.push((Some(*op), c.clone())),
                Test::Compare(op, Operand::Var(v)) => {
                    if let Some(s) = find(v) {
                        out.push((Some(*op), s));
                    }
                }
                Test::Conj(ts) => ts.iter().for_each(|t| ground(t, find, out)),
            }
        }
        let mut matched = Vec::new();
        for (c, tt) in rule.conditions.iter().filter(|c| !c.negated).zip(token) {
            let Some(e) = self.wm.entry(*tt) else {
                continue;
            };
            let mut tests = Vec::new();
            compares(&c.id, Field::Id, find, &mut tests);
            compares(&c.attr, Field::Attr, find, &mut tests);
            compares(&c.value, Field::Value, find, &mut tests);
            matched.push(MatchedWme {
                wme: e.wme.clone(),
                creator: e.creator,
                support: (&e.support).into(),
                tests,
            });
        }
        let mut negated = Vec::new();
        for c in rule.conditions.iter().filter(|c| c.negated) {
            let id = match &c.id {
                Test::Const(Symbol::Id(i)) => Some(*i),
                t => t.main_var().and_then(find).and_then(|s| s.as_ident()),
            };
            let Some(id) = id else { continue };
            let (mut attr, mut value) = (Vec::new(), Vec::new());
            ground(&c.attr, find, &mut attr);
            ground(&c.value, find, &mut value);
            negated.push(NegatedTest {
                id,
                attr,
                value,
                acceptable: c.acceptable,
            });
        }
        (matched, negated)
    }

    /// Fires one instantiation. Returns `None` when the match went stale.
    fn fire(
        &mut self,
        rid: RuleId,
        token: Token,
        bindings: &Bindings,
        removals: &mut Vec<Removal>,
        added_o: &mut HashSet<(Ident, Symbol, Symbol)>,
    ) -> Option<InstId> {
        if token.iter().any(|tt| !self.wm.contains(*tt)) {
            return None;
        }
        let rule = self.rule_rc(rid)?;
        let vars: Vec<String> = self.matcher.vars(rid).to_vec();
        let find = lookup(&vars, bindings);
        let state = rule
            .conditions
            .first()
            .and_then(|c| c.id.main_var())
            .and_then(&find)
            .and_then(|s| s.as_ident())?;
        let level = self.depth_of(state)?;
        let inst_id = self.new_inst_id();
        let mut trace = TraceInst {
            name: rule.name.clone(),
            state: Some(state),
            level,
            ..Default::default()
        };
        if level > 0 {
            let (m, n) = self.trace_of(&rule, &token, &find);
            trace.matched = m;
            trace.negated = n;
        }
        let wm = &mut self.wm;
        let (actions, warnings) = ground_actions(&rule.actions, &find, |l| wm.fresh_id(l));
        for w in warnings {
            log::warn!("{}: {w}", rule.name);
        }
        let o = rule.class.o_supported();
        let mut created = Vec::new();
        let mut prefs = Vec::new();
        for a in actions {
            match a {
                Grounded::Make(id, attr, value) => {
                    let support = if o { Support::O } else { Support::i(inst_id) };
                    if o {
                        added_o.insert((id, attr.clone(), value.clone()));
                    }
                    let added = self.wm.add(id, attr, value, false, support, Some(inst_id));
                    created.push(added.timetag);
                }
                Grounded::Remove(id, attr, value) => {
                    removals.push((rule.name.clone(), id, attr, value))
                }
                Grounded::Pref(s, pref) => {
                    let pid = self.next_pref;
                    self.next_pref += 1;
                    let mirror = (pref.kind == PrefKind::Acceptable).then(|| {
                        let a = self.wm.add(
                            s,
                            Symbol::str("operator"),
                            pref.op.clone(),
                            true,
                            Support::i(inst_id),
                            Some(inst_id),
                        );
                        created.push(a.timetag);
                        a.timetag
                    });
                    let rl_rule = (rule.rl && pref.kind == PrefKind::Numeric).then_some(rid);
                    self.prefs.insert(
                        pid,
                        PrefRecord {
                            id: pid,
                            state: s,
                            pref,
                            owner: inst_id,
                            rl_rule,
                            mirror,
                        },
                    );
                    self.prefs_by_state.entry(s).or_default().insert(pid);
                    prefs.push(pid);
                }
                Grounded::Halt => self.halted = true,
            }
        }
        if rule.class == FunctionClass::Application {
            self.stack[level].applied = true;
        }
        self.trace
            .emit(3, || format!("Firing {} {:?}", rule.name, token));
        self.live.insert((rid, token.clone()), inst_id);
        if level > 0 {
            self.stack[level].archive.push(inst_id);
        }
        self.insts.insert(
            inst_id,
            Inst {
                rule: Some(rid),
                name: rule.name.clone(),
                token,
                level,
                trace,
                created,
                prefs,
                live: true,
            },
        );
        self.report.fired += 1;
        Some(inst_id)
    }

    /// Withdraws an instantiation's i-support and preferences.
    pub(crate) fn retract(&mut self, inst_id: InstId) {
        let Some(inst) = self.insts.get_mut(&inst_id) else {
            return;
        };
        if !inst.live {
            return;
        }
        inst.live = false;
        let created = std::mem::take(&mut inst.created);
        let prefs = std::mem::take(&mut inst.prefs);
        let (name, level) = (inst.name.clone(), inst.level);
        if let Some(r) = inst.rule {
            let key = (r, inst.token.clone());
            if self.live.get(&key) == Some(&inst_id) {
                self.live.remove(&key);
            }
        }
        for tt in created {
            self.wm.remove_support(tt, inst_id);
        }
        for pid in prefs {
            if let Some(p) = self.prefs.remove(&pid) {
                if let Some(set) = self.prefs_by_state.get_mut(&p.state) {
                    set.remove(&pid);
                }
            }
        }
        if level == 0 {
            self.insts.remove(&inst_id);
        }
        self.report.retracted += 1;
        self.trace.emit(3, || format!("Retracting {name}"));
    }
}
