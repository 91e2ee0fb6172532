use super::Engine;
use crate::decide::{choose, filter, numeric_values, Filtered, ImpasseKind};
use crate::error::{Error, Result};
use crate::rl::{td_error, PendingUpdate, Policy};
use crate::symbol::Symbol;
use crate::trace::{ImpasseEvent, StateOutcome};
use crate::wm::{ArchKind, Support};

impl Engine {
    /// Selects operators from the topstate down, creating, updating or
    /// removing substates as decisions fail or succeed.
    pub(crate) fn decision_phase(&mut self) -> Result<()> {
        self.collect_rewards();
        let mut d = 0;
        while d < self.stack.len() {
            let s = self.stack[d].id;
            let prefs = self.prefs_of(s);
            let current = self.stack[d].operator.as_ref().map(|(o, _)| o.clone());
            let filtered = filter(&prefs);
            let mut want: Option<(ImpasseKind, Vec<Symbol>)> = None;
            let mut outcome = StateOutcome {
                state: s.to_string(),
                depth: d,
                outcome: String::new(),
                operator: None,
                detail: Vec::new(),
                impasse: None,
            };
            match &current {
                Some(op) if filtered.admits(op) => {
                    outcome.outcome = "retained".into();
                    outcome.operator = Some(op.to_string());
                    if self.stack[d].applied {
                        self.stack[d].applied = false;
                    } else {
                        want = Some((ImpasseKind::OperatorNoChange, vec![op.clone()]));
                    }
                }
                _ => {
                    if current.is_some() {
                        self.deselect(d);
                    }
                    match filtered {
                        Filtered::Single(op) => {
                            self.select(d, op.clone(), std::slice::from_ref(&op), false);
                            outcome.outcome = "selected".into();
                            outcome.operator = Some(op.to_string());
                            outcome.detail = self.operator_detail(&op);
                        }
                        Filtered::Indifferent(cands) => {
                            let (op, stochastic) =
                                choose(&prefs, &cands, self.config.exploration, &mut self.rng);
                            self.select(d, op.clone(), &cands, stochastic);
                            outcome.outcome = "selected".into();
                            outcome.operator = Some(op.to_string());
                            outcome.detail = self.operator_detail(&op);
                        }
                        Filtered::NoChange => want = Some((ImpasseKind::StateNoChange, Vec::new())),
                        Filtered::Conflict(v) => want = Some((ImpasseKind::Conflict, v)),
                        Filtered::Tie(v) => want = Some((ImpasseKind::Tie, v)),
                    }
                }
            }
            if let Some((k, _)) = &want {
                if outcome.outcome.is_empty() {
                    outcome.outcome = "impasse".into();
                }
                outcome.impasse = Some(k.name().to_string());
            }
            self.report.selections.push(outcome);
            let has_sub = d + 1 < self.stack.len();
            match want {
                None => {
                    if has_sub {
                        self.destroy_from(d + 1, "resolved");
                    }
                    break;
                }
                Some((kind, items)) => {
                    if has_sub && self.stack[d + 1].impasse.as_ref().map(|(k, _)| *k) == Some(kind)
                    {
                        self.update_items(d + 1, items);
                        d += 1;
                        continue;
                    }
                    if has_sub {
                        self.destroy_from(d + 1, "replaced");
                    }
                    self.create_substate(d, kind, items)?;
                    break;
                }
            }
        }
        Ok(())
    }

    fn operator_label(&self, op: &Symbol) -> String {
        match op.as_ident().and_then(|i| self.wm.value(i, "name")) {
            Some(n) => format!("{op} ({n})"),
            None => op.to_string(),
        }
    }

    fn operator_detail(&self, op: &Symbol) -> Vec<(String, String)> {
        let Some(id) = op.as_ident() else {
            return Vec::new();
        };
        self.wm
            .of_id(id)
            .iter()
            .filter_map(|tt| self.wm.get(*tt))
            .map(|w| (w.attr.to_string(), w.value.to_string()))
            .collect()
    }

    fn select(&mut self, d: usize, op: Symbol, cands: &[Symbol], stochastic: bool) {
        let s = self.stack[d].id;
        let tt = self
            .wm
            .add(
                s,
                Symbol::str("operator"),
                op.clone(),
                false,
                Support::Arch(ArchKind::Selection),
                None,
            )
            .timetag;
        self.stack[d].operator = Some((op.clone(), tt));
        self.stack[d].applied = false;
        if stochastic {
            self.stack[d].stochastic = true;
        }
        let label = self.operator_label(&op);
        let (cycle, indent) = (self.cycle, "  ".repeat(d));
        self.trace
            .emit(1, || format!("{cycle:>6}: {indent}O: {label}"));
        self.rl_on_select(d, &op, cands);
    }

    fn create_substate(&mut self, d: usize, kind: ImpasseKind, items: Vec<Symbol>) -> Result<()> {
        let parent = self.stack[d].id;
        if d + 1 < self.stack.len() {
            return Err(Error::SubstateExists(parent));
        }
        if d + 1 > self.config.max_depth {
            self.halted = true;
            return Err(Error::DepthLimit(self.config.max_depth));
        }
        let sub = self.wm.fresh_id('S');
        self.wm.register_state(sub);
        let arch = || Support::Arch(ArchKind::Structure);
        let choices = if matches!(kind, ImpasseKind::Tie | ImpasseKind::Conflict) {
            "multiple"
        } else {
            "none"
        };
        for (a, v) in [
            ("superstate", Symbol::Id(parent)),
            ("impasse", Symbol::str(kind.name())),
            ("attribute", Symbol::str(kind.attribute())),
            ("choices", Symbol::str(choices)),
        ] {
            self.wm.add(sub, Symbol::str(a), v, false, arch(), None);
        }
        let mut rec = self.state_skeleton(sub);
        if matches!(kind, ImpasseKind::Tie | ImpasseKind::Conflict) {
            for op in &items {
                let tt = self
                    .wm
                    .add(
                        sub,
                        Symbol::str("item"),
                        op.clone(),
                        false,
                        Support::Arch(ArchKind::Item),
                        None,
                    )
                    .timetag;
                rec.items.insert(op.clone(), tt);
            }
        }
        rec.impasse = Some((kind, items.clone()));
        self.stack.push(rec);
        self.impasse_count += 1;
        let indent = "  ".repeat(d + 1);
        self.trace.emit(1, || {
            format!("        {indent}==> {sub} ({} impasse)", kind.name())
        });
        self.report.impasses.push(ImpasseEvent {
            event: "created".into(),
            state: parent.to_string(),
            substate: sub.to_string(),
            impasse: kind.name().into(),
            items: items.iter().map(|i| i.to_string()).collect(),
        });
        Ok(())
    }

    fn update_items(&mut self, d: usize, items: Vec<Symbol>) {
        let Some((kind, old)) = self.stack[d].impasse.clone() else {
            return;
        };
        if old == items {
            return;
        }
        let sub = self.stack[d].id;
        if matches!(kind, ImpasseKind::Tie | ImpasseKind::Conflict) {
            for op in &old {
                if !items.contains(op) {
                    if let Some(tt) = self.stack[d].items.remove(op) {
                        self.wm.remove(tt);
                    }
                }
            }
            for op in &items {
                if !self.stack[d].items.contains_key(op) {
                    let tt = self
                        .wm
                        .add(
                            sub,
                            Symbol::str("item"),
                            op.clone(),
                            false,
                            Support::Arch(ArchKind::Item),
                            None,
                        )
                        .timetag;
                    self.stack[d].items.insert(op.clone(), tt);
                }
            }
        }
        self.stack[d].impasse = Some((kind, items.clone()));
        self.report.impasses.push(ImpasseEvent {
            event: "updated".into(),
            state: self.stack[d - 1].id.to_string(),
            substate: sub.to_string(),
            impasse: kind.name().into(),
            items: items.iter().map(|i| i.to_string()).collect(),
        });
    }

    /// Removes the substates at `depth` and below, deepest first.
    pub(crate) fn destroy_from(&mut self, depth: usize, event: &str) {
        while self.stack.len() > depth {
            let d = self.stack.len() - 1;
            let s = self.stack[d].id;
            if let Some(p) = self.rl_pending.remove(&s) {
                self.close_terminal(d, p);
            }
            let archive = std::mem::take(&mut self.stack[d].archive);
            for i in &archive {
                self.retract(*i);
            }
            for i in &archive {
                self.insts.remove(i);
            }
            if let Some(ids) = self.prefs_by_state.remove(&s) {
                for pid in ids {
                    if let Some(p) = self.prefs.remove(&pid) {
                        if let Some(inst) = self.insts.get_mut(&p.owner) {
                            inst.prefs.retain(|x| *x != pid);
                        }
                    }
                }
            }
            self.wm.unregister_state(s);
            let rec = self.stack.pop().expect("substate");
            let (kind, items) = rec
                .impasse
                .unwrap_or((ImpasseKind::StateNoChange, Vec::new()));
            let indent = "  ".repeat(d);
            self.trace
                .emit(1, || format!("        {indent}<== {s} ({event})"));
            self.report.impasses.push(ImpasseEvent {
                event: event.into(),
                state: self.stack[d - 1].id.to_string(),
                substate: s.to_string(),
                impasse: kind.name().into(),
                items: items.iter().map(|i| i.to_string()).collect(),
            });
        }
        self.collect_garbage();
    }

    /// Sum of the numeric `^value`s under a state's reward link.
    fn read_reward(&self, d: usize) -> f64 {
        let rl = self.stack[d].reward_link;
        let mut total = 0.0;
        for r in self.wm.values(rl, "reward") {
            let Some(r) = r.as_ident() else { continue };
            for v in self.wm.values(r, "value") {
                match v.as_number() {
                    Some(x) => total += x,
                    None => log::warn!("non-numeric reward value {v} ignored"),
                }
            }
        }
        total
    }

    fn collect_rewards(&mut self) {
        if !self.config.rl.enabled {
            return;
        }
        for d in 0..self.stack.len() {
            let s = self.stack[d].id;
            if !self.rl_pending.contains_key(&s) {
                continue;
            }
            let r = self.read_reward(d);
            self.stack[d].reward_read = true;
            if let Some(p) = self.rl_pending.get_mut(&s) {
                p.rewards.push(r);
            }
            self.report.rewards.push((s.to_string(), r));
        }
    }

    fn numeric_sum(&self, state: crate::symbol::Ident, op: &Symbol) -> f64 {
        let prefs = self.prefs_of(state);
        numeric_values(&prefs, std::slice::from_ref(op))
            .get(op)
            .copied()
            .unwrap_or(0.0)
    }

    fn rl_on_select(&mut self, d: usize, op: &Symbol, cands: &[Symbol]) {
        if !self.config.rl.enabled {
            return;
        }
        let s = self.stack[d].id;
        if let Some(p) = self.rl_pending.remove(&s) {
            let q_next = match self.config.rl.policy {
                Policy::Sarsa => self.numeric_sum(s, op),
                Policy::QLearning => cands
                    .iter()
                    .map(|c| self.numeric_sum(s, c))
                    .reduce(f64::max)
                    .unwrap_or(0.0),
            };
            self.apply_update(p, q_next);
        }
        let contributions: Vec<(usize, f64)> = self
            .preferences(s)
            .into_iter()
            .filter(|p| p.pref.op == *op)
            .filter_map(|p| Some((p.rl_rule?, p.pref.value?)))
            .collect();
        if !contributions.is_empty() {
            self.rl_pending.insert(
                s,
                PendingUpdate {
                    operator: op.clone(),
                    contributions,
                    rewards: Vec::new(),
                },
            );
        }
    }

    fn close_terminal(&mut self, d: usize, mut p: PendingUpdate) {
        if !self.stack[d].reward_read {
            p.rewards.push(self.read_reward(d));
        }
        self.apply_update(p, 0.0);
    }

    /// Closes every open update when the agent halts.
    pub(crate) fn terminal_updates(&mut self) {
        for d in (0..self.stack.len()).rev() {
            let s = self.stack[d].id;
            if let Some(p) = self.rl_pending.remove(&s) {
                self.close_terminal(d, p);
            }
        }
    }

    fn apply_update(&mut self, p: PendingUpdate, q_next: f64) {
        let delta = td_error(&self.config.rl, &p, q_next);
        let share = delta / p.contributions.len() as f64;
        for (rid, _) in &p.contributions {
            let Some(Some(rule)) = self.rules.get_mut(*rid) else {
                continue;
            };
            let rule = std::rc::Rc::make_mut(rule);
            let v = rule.rl_value().unwrap_or(0.0) + share;
            rule.set_rl_value(v);
            self.rl_stats.record(&rule.name, share);
            let name = rule.name.clone();
            self.trace
                .emit(3, || format!("RL update {name}: {share:+} -> {v}"));
        }
    }
}
