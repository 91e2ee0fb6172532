use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{Engine, Inst, PrefId};
use crate::chunking::{
    backtrace, build_chunk, group_results, Backtrace, ChunkRecord, MatchedWme, ResultItem,
    TraceInst,
};
use crate::decide::ImpasseKind;
use crate::error::Result;
use crate::rule::canonical_text;
use crate::symbol::{Ident, Symbol};
use crate::wm::{InstId, Timetag};

#[derive(Clone, Copy, Debug)]
enum Handle {
    Wme(Timetag),
    Pref(PrefId),
}

impl Engine {
    /// Finds structures that instantiations in substates just linked to a
    /// shallower level, then learns from them and hands them a new owner.
    pub(crate) fn detect_results(&mut self, fired: &[InstId]) -> Result<()> {
        let stack_ids = self.state_ids();
        let levels = self.wm.id_levels(&stack_ids);
        let mut by_level: BTreeMap<usize, Vec<(ResultItem, Handle)>> = BTreeMap::new();
        let mut seen: HashSet<Timetag> = HashSet::new();
        for inst_id in fired {
            let Some(inst) = self.insts.get(inst_id) else {
                continue;
            };
            if inst.level == 0 || !inst.live {
                continue;
            }
            let l = inst.level;
            for tt in &inst.created {
                let Some(w) = self.wm.get(*tt) else { continue };
                if w.acceptable || levels.get(&w.id).is_none_or(|x| *x >= l) || !seen.insert(*tt) {
                    continue;
                }
                let item = ResultItem::Wme {
                    timetag: *tt,
                    id: w.id,
                    attr: w.attr.clone(),
                    value: w.value.clone(),
                    creator: *inst_id,
                };
                by_level
                    .entry(l)
                    .or_default()
                    .push((item, Handle::Wme(*tt)));
            }
            for pid in &inst.prefs {
                let Some(p) = self.prefs.get(pid) else {
                    continue;
                };
                if self.depth_of(p.state).is_some_and(|d| d < l) {
                    let item = ResultItem::Pref {
                        state: p.state,
                        pref: p.pref.clone(),
                        creator: *inst_id,
                    };
                    by_level
                        .entry(l)
                        .or_default()
                        .push((item, Handle::Pref(*pid)));
                }
            }
        }
        for (l, mut items) in by_level.into_iter().rev() {
            if l >= self.stack.len() {
                continue;
            }
            self.close_over_results(l, &mut items, &mut seen);
            self.handle_results(l, items)?;
        }
        Ok(())
    }

    /// Adds local structure hanging off new result identifiers.
    fn close_over_results(
        &self,
        l: usize,
        items: &mut Vec<(ResultItem, Handle)>,
        seen: &mut HashSet<Timetag>,
    ) {
        let result_tts: HashSet<Timetag> = seen.clone();
        let pre = self
            .wm
            .id_levels_skipping(&self.state_ids(), |w| result_tts.contains(&w.timetag));
        let mut queue: Vec<Ident> = items
            .iter()
            .filter_map(|(r, _)| match r {
                ResultItem::Wme {
                    value: Symbol::Id(v),
                    ..
                } => Some(*v),
                _ => None,
            })
            .collect();
        let mut visited: HashSet<Ident> = HashSet::new();
        while let Some(id) = queue.pop() {
            if pre.get(&id).is_some_and(|x| *x < l) || !visited.insert(id) {
                continue;
            }
            for tt in self.wm.of_id(id) {
                let Some(e) = self.wm.entry(*tt) else {
                    continue;
                };
                let Some(c) = e.creator else { continue };
                if !self.insts.get(&c).is_some_and(|i| i.level >= l)
                    || e.wme.acceptable
                    || !seen.insert(*tt)
                {
                    continue;
                }
                let w = &e.wme;
                items.push((
                    ResultItem::Wme {
                        timetag: *tt,
                        id: w.id,
                        attr: w.attr.clone(),
                        value: w.value.clone(),
                        creator: c,
                    },
                    Handle::Wme(*tt),
                ));
                if let Symbol::Id(v) = w.value {
                    queue.push(v);
                }
            }
        }
    }

    fn handle_results(&mut self, l: usize, items: Vec<(ResultItem, Handle)>) -> Result<()> {
        let superstate = self.stack[l - 1].id;
        let stack_ids = self.state_ids();
        let result_tts: HashSet<Timetag> = items
            .iter()
            .filter_map(|(_, h)| match h {
                Handle::Wme(tt) => Some(*tt),
                Handle::Pref(_) => None,
            })
            .collect();
        let pre = self
            .wm
            .id_levels_skipping(&stack_ids, |w| result_tts.contains(&w.timetag));
        let known: HashSet<Ident> = pre
            .iter()
            .filter(|(_, v)| **v < l)
            .map(|(k, _)| *k)
            .collect();
        let traces = |i: InstId| self.insts.get(&i).map(|x| x.trace.clone());
        let mut bts: Vec<Backtrace> = Vec::new();
        let mut cache: HashMap<InstId, usize> = HashMap::new();
        let mut per_item: Vec<usize> = Vec::new();
        for (r, _) in &items {
            let c = r.creator();
            let idx = *cache.entry(c).or_insert_with(|| {
                bts.push(backtrace(&[c], l, superstate, &traces, &pre, &self.wm));
                bts.len() - 1
            });
            per_item.push(idx);
        }
        let frontiers: Vec<BTreeSet<Timetag>> = per_item
            .iter()
            .map(|i| bts[*i].frontier.iter().map(|m| m.wme.timetag).collect())
            .collect();
        let results: Vec<ResultItem> = items.iter().map(|(r, _)| r.clone()).collect();
        let groups = group_results(&results, &frontiers, &known);
        let onc = matches!(
            self.stack[l].impasse,
            Some((ImpasseKind::OperatorNoChange, _))
        );
        let (kind, stochastic) = (
            self.stack[l]
                .impasse
                .as_ref()
                .map(|(k, _)| *k)
                .unwrap_or(ImpasseKind::StateNoChange),
            self.stack[l].stochastic,
        );
        for g in groups {
            let mut bt = Backtrace::default();
            let mut seen_bt: BTreeSet<usize> = BTreeSet::new();
            for i in &g {
                if seen_bt.insert(per_item[*i]) {
                    merge_backtrace(&mut bt, &bts[per_item[*i]]);
                }
            }
            if stochastic {
                bt.refusal
                    .get_or_insert("substate decision used numeric preferences".into());
            }
            let group_items: Vec<(ResultItem, Handle)> =
                g.iter().map(|i| items[*i].clone()).collect();
            let group_results: Vec<ResultItem> =
                group_items.iter().map(|(r, _)| r.clone()).collect();
            let link = self.superstate_link(superstate);
            let mut owner = None;
            if self.config.learning {
                owner = self.try_learn(l, superstate, kind, &bt, &group_results, link.clone());
            }
            let owner = match owner {
                Some(o) => o,
                None => self.justify(l, superstate, &bt, link),
            };
            for (r, h) in group_items {
                self.transfer(r.creator(), owner, h, onc);
            }
        }
        Ok(())
    }

    fn superstate_link(&self, superstate: Ident) -> Option<MatchedWme> {
        let tt = *self
            .wm
            .of_id_attr(superstate, &Symbol::str("superstate"))
            .iter()
            .next()?;
        let e = self.wm.entry(tt)?;
        Some(MatchedWme {
            wme: e.wme.clone(),
            creator: e.creator,
            support: (&e.support).into(),
            tests: Vec::new(),
        })
    }

    /// Builds and installs a chunk; returns the instantiation standing in
    /// for it when its current match explains the results.
    fn try_learn(
        &mut self,
        l: usize,
        superstate: Ident,
        kind: ImpasseKind,
        bt: &Backtrace,
        results: &[ResultItem],
        link: Option<MatchedWme>,
    ) -> Option<InstId> {
        let name = format!("chunk-{}", self.chunk_count + 1);
        let rule = match build_chunk(&name, bt, results, superstate, link.clone()) {
            Ok(r) => r,
            Err(why) => {
                self.refuse(format!("cycle {}: no chunk: {why}", self.cycle));
                return None;
            }
        };
        if let Some(existing) = self.canon.get(&canonical_text(&rule)) {
            let other = self.rules[*existing]
                .as_ref()
                .map(|r| r.name.clone())
                .unwrap_or_default();
            self.refuse(format!(
                "cycle {}: chunk duplicates {other}; skipped",
                self.cycle
            ));
            return None;
        }
        self.chunk_count += 1;
        let mut frontier: Vec<MatchedWme> = bt.frontier.clone();
        if !frontier.iter().any(|m| m.wme.id == superstate) {
            frontier.extend(link);
        }
        let mut sources: Vec<String> = bt
            .visited
            .iter()
            .filter_map(|i| self.insts.get(i).map(|x| x.name.clone()))
            .collect();
        sources.sort();
        sources.dedup();
        let header = format!(
            "# {name}: cycle {}, {} impasse, sources: {}\n",
            self.cycle,
            kind.name(),
            sources.join(" ")
        );
        self.chunk_log.push(format!("{header}{rule}\n\n"));
        self.chunk_records.push(ChunkRecord {
            rule: name.clone(),
            cycle: self.cycle,
            impasse: kind,
            superstate,
            frontier: frontier.iter().map(|m| m.wme.clone()).collect(),
            results: ChunkRecord::results_of(results),
        });
        self.report.chunks.push(name.clone());
        let cycle = self.cycle;
        self.trace.emit(2, || format!("{cycle}: learned {name}"));
        let rid = self.add_rule(rule);
        let want: BTreeSet<Timetag> = frontier.iter().map(|m| m.wme.timetag).collect();
        let key = self
            .pending_fire
            .keys()
            .find(|(r, t)| *r == rid && t.iter().copied().collect::<BTreeSet<_>>() == want)
            .cloned()?;
        self.pending_fire.remove(&key);
        let id = self.new_inst_id();
        let level = l - 1;
        let trace = TraceInst {
            name: name.clone(),
            state: Some(superstate),
            level,
            matched: if level > 0 { frontier } else { Vec::new() },
            negated: if level > 0 {
                bt.negations.clone()
            } else {
                Vec::new()
            },
        };
        self.live.insert(key.clone(), id);
        self.insts.insert(
            id,
            Inst {
                rule: Some(rid),
                name,
                token: key.1,
                level,
                trace,
                created: Vec::new(),
                prefs: Vec::new(),
                live: true,
            },
        );
        if level > 0 {
            self.stack[level].archive.push(id);
        }
        Some(id)
    }

    fn refuse(&mut self, why: String) {
        self.trace.emit(2, || why.clone());
        log::info!("{why}");
        self.refusals.push(why);
    }

    /// An instantiation that holds results for as long as the superstate
    /// structures they were derived from remain.
    fn justify(
        &mut self,
        l: usize,
        superstate: Ident,
        bt: &Backtrace,
        link: Option<MatchedWme>,
    ) -> InstId {
        let id = self.new_inst_id();
        let level = l - 1;
        let mut frontier = bt.frontier.clone();
        if !frontier.iter().any(|m| m.wme.id == superstate) {
            frontier.extend(link);
        }
        let mut stale = false;
        for m in &frontier {
            if self.wm.contains(m.wme.timetag) {
                self.just_deps.entry(m.wme.timetag).or_default().insert(id);
            } else {
                stale = true;
            }
        }
        for n in &bt.negations {
            stale |= self
                .wm
                .of_id(n.id)
                .iter()
                .filter_map(|tt| self.wm.get(*tt))
                .any(|w| n.matches(w));
            self.just_negs
                .entry(n.id)
                .or_default()
                .push((id, n.clone()));
        }
        if stale {
            self.pending_retract.insert(id);
        }
        let name = format!("justification-{}", id.0);
        let trace = TraceInst {
            name: name.clone(),
            state: Some(superstate),
            level,
            matched: frontier,
            negated: bt.negations.clone(),
        };
        self.insts.insert(
            id,
            Inst {
                rule: None,
                name,
                token: Vec::new(),
                level,
                trace,
                created: Vec::new(),
                prefs: Vec::new(),
                live: true,
            },
        );
        if level > 0 {
            self.stack[level].archive.push(id);
        }
        id
    }

    fn transfer(&mut self, from: InstId, to: InstId, h: Handle, o_support: bool) {
        match h {
            Handle::Wme(tt) => {
                self.wm.transfer(tt, from, to, o_support);
                if let Some(i) = self.insts.get_mut(&from) {
                    i.created.retain(|x| *x != tt);
                }
                if !o_support {
                    if let Some(i) = self.insts.get_mut(&to) {
                        i.created.push(tt);
                    }
                }
            }
            Handle::Pref(pid) => {
                let Some(p) = self.prefs.get_mut(&pid) else {
                    return;
                };
                p.owner = to;
                let mirror = p.mirror;
                if let Some(i) = self.insts.get_mut(&from) {
                    i.prefs.retain(|x| *x != pid);
                    if let Some(m) = mirror {
                        i.created.retain(|x| *x != m);
                    }
                }
                if let Some(m) = mirror {
                    self.wm.transfer(m, from, to, false);
                }
                if let Some(i) = self.insts.get_mut(&to) {
                    i.prefs.push(pid);
                    i.created.extend(mirror);
                }
            }
        }
    }
}

fn merge_backtrace(into: &mut Backtrace, from: &Backtrace) {
    for m in &from.frontier {
        match into
            .frontier
            .iter_mut()
            .find(|f| f.wme.timetag == m.wme.timetag)
        {
            Some(f) => {
                for t in &m.tests {
                    if !f.tests.contains(t) {
                        f.tests.push(t.clone());
                    }
                }
            }
            None => into.frontier.push(m.clone()),
        }
    }
    for n in &from.negations {
        if !into.negations.contains(n) {
            into.negations.push(n.clone());
        }
    }
    into.visited.extend(from.visited.iter().copied());
    if into.refusal.is_none() {
        into.refusal = from.refusal.clone();
    }
}
