use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::Engine;
use crate::env::{DeltaOp, EnvDelta};
use crate::epmem::{Cue, CueEdge, CueTarget};
use crate::error::Result;
use crate::smem::{CueValue, QueryFailure, SlotValue};
use crate::symbol::{Ident, Symbol};
use crate::wm::{ArchKind, Support, Timetag, WmeKey};

/// Structure to place under a result buffer at the next input phase,
/// replacing what the buffer held.
#[derive(Clone, Debug, PartialEq)]
pub struct BufferWrite {
    pub result_buffer: Ident,
    pub triples: Vec<(Ident, Symbol, Symbol)>,
}

impl BufferWrite {
    fn new(result_buffer: Ident) -> Self {
        BufferWrite {
            result_buffer,
            triples: Vec::new(),
        }
    }

    fn put(&mut self, id: Ident, attr: &str, value: impl Into<Symbol>) {
        self.triples.push((id, Symbol::str(attr), value.into()));
    }

    fn status(&mut self, attr: &str, value: impl Into<Symbol>) {
        let r = self.result_buffer;
        self.put(r, attr, value);
    }
}

impl Engine {
    pub(crate) fn input_phase(&mut self) -> Result<()> {
        for write in std::mem::take(&mut self.buffer_queue) {
            if !self.wm.is_live_id(write.result_buffer) {
                continue;
            }
            let old: Vec<Timetag> = self.wm.of_id(write.result_buffer).iter().copied().collect();
            for tt in old {
                if let Some(w) = self.wm.remove(tt) {
                    if w.value.is_ident() {
                        self.gc_needed = true;
                    }
                }
            }
            for (id, attr, value) in write.triples {
                self.wm.add(
                    id,
                    attr,
                    value,
                    false,
                    Support::Arch(ArchKind::Retrieval),
                    None,
                );
            }
        }
        for d in std::mem::take(&mut self.input_queue) {
            let id = self.env_ident(&d.id);
            let value = match Ident::parse(&d.value) {
                Some(_) => Symbol::Id(self.env_ident(&d.value)),
                None => Symbol::parse_token(&d.value),
            };
            match d.op {
                DeltaOp::Add => {
                    self.wm
                        .add(id, d.attr.clone(), value, false, Support::O, None);
                }
                DeltaOp::Remove => match self.wm.find(id, &d.attr, &value, false) {
                    Some(tt) => {
                        self.wm.remove(tt);
                        if value.is_ident() {
                            self.gc_needed = true;
                        }
                    }
                    None => log::warn!("environment removed missing {d}"),
                },
            }
        }
        Ok(())
    }

    /// Maps an environment's identifier token to an agent identifier,
    /// allocating one on first use.
    fn env_ident(&mut self, text: &str) -> Ident {
        if let Some(id) = self.env_ids.get(text) {
            return *id;
        }
        let letter = text
            .chars()
            .next()
            .filter(char::is_ascii_alphabetic)
            .map(|c| c.to_ascii_uppercase())
            .unwrap_or('E');
        let id = self.wm.fresh_id(letter);
        self.env_ids.insert(text.to_string(), id);
        id
    }

    pub(crate) fn output_phase(&mut self) -> Result<()> {
        if self.env.is_some() {
            self.exchange_with_env()?;
        }
        self.processed.retain(|tt| self.wm.contains(*tt));
        for d in 0..self.stack.len() {
            self.smem_commands(d);
            self.epmem_commands(d);
        }
        Ok(())
    }

    fn exchange_with_env(&mut self) -> Result<()> {
        let out = self.output_link();
        let reachable = self.wm.reachable([out], |w| w.acceptable);
        let mut current: BTreeMap<Timetag, EnvDelta> = BTreeMap::new();
        for id in &reachable {
            for tt in self.wm.of_id(*id) {
                let w = &self.wm.entry(*tt).expect("indexed").wme;
                if w.acceptable {
                    continue;
                }
                current.insert(
                    *tt,
                    EnvDelta {
                        op: DeltaOp::Add,
                        id: w.id.to_string(),
                        attr: w.attr.clone(),
                        value: w.value.to_string(),
                    },
                );
            }
        }
        let mut deltas = Vec::new();
        for (tt, d) in &self.sent_output {
            if !current.contains_key(tt) {
                deltas.push(EnvDelta {
                    op: DeltaOp::Remove,
                    ..d.clone()
                });
            }
        }
        for (tt, d) in &current {
            if !self.sent_output.contains_key(tt) {
                deltas.push(d.clone());
            }
        }
        for tt in &current {
            let w = &self.wm.entry(*tt.0).expect("indexed").wme;
            self.env_ids.entry(w.id.to_string()).or_insert(w.id);
            if let Symbol::Id(v) = w.value {
                self.env_ids.entry(v.to_string()).or_insert(v);
            }
        }
        self.sent_output = current;
        let cycle = self.cycle;
        for d in &deltas {
            self.trace.emit(3, || format!("out: {d}"));
        }
        let Some(env) = self.env.as_mut() else {
            return Ok(());
        };
        let input = env.exchange(cycle, &deltas)?;
        for d in &input {
            self.trace.emit(3, || format!("in: {d}"));
        }
        self.input_queue.extend(input);
        Ok(())
    }

    /// Unprocessed commands `(C ^attr value)` in timetag order; marks them processed.
    fn take_commands(&mut self, command: Ident) -> Vec<(Symbol, Symbol)> {
        let tts: Vec<Timetag> = self
            .wm
            .of_id(command)
            .iter()
            .copied()
            .filter(|tt| !self.processed.contains(tt))
            .collect();
        let mut out = Vec::new();
        for tt in tts {
            let w = self.wm.get(tt).expect("indexed");
            if w.acceptable {
                continue;
            }
            out.push((w.attr.clone(), w.value.clone()));
            self.processed.insert(tt);
        }
        out
    }

    fn smem_commands(&mut self, d: usize) {
        let (_, command, result) = self.stack[d].smem;
        let commands = self.take_commands(command);
        if commands.is_empty() {
            return;
        }
        let mut write = BufferWrite::new(result);
        let now = self.cycle;
        for (attr, value) in commands {
            match (attr.as_str(), value.as_ident()) {
                (Some("store"), Some(root)) => self.smem_store(root, now, &mut write),
                (Some("query"), Some(cue)) => self.smem_query(cue, now, &mut write),
                _ => {
                    log::warn!("unknown smem command ^{attr} {value}");
                    write.status("failure", value);
                    write.status("reason", Symbol::str("unknown-command"));
                }
            }
        }
        self.buffer_queue.push(write);
    }

    fn smem_store(&mut self, root: Ident, now: u64, write: &mut BufferWrite) {
        let slots: Vec<(Symbol, Symbol)> = self
            .wm
            .of_id(root)
            .iter()
            .filter_map(|tt| self.wm.get(*tt))
            .filter(|w| !w.acceptable)
            .map(|w| (w.attr.clone(), w.value.clone()))
            .collect();
        if slots.is_empty() {
            write.status("failure", Symbol::Id(root));
            write.status("reason", Symbol::str("empty"));
            return;
        }
        let mut stored = Vec::new();
        for (a, v) in slots {
            let v = match v {
                Symbol::Id(i) => SlotValue::Lti(match self.wm.lti(i) {
                    Some(l) => l,
                    None => {
                        let l = self.smem.allocate(now);
                        self.wm.set_lti(i, l);
                        l
                    }
                }),
                c => SlotValue::Const(c),
            };
            stored.push((a, v));
        }
        let lti = self.smem.store(self.wm.lti(root), stored, now);
        self.wm.set_lti(root, lti);
        self.trace
            .emit(3, || format!("smem store {root} as @{lti}"));
        write.status("success", Symbol::Id(root));
    }

    fn smem_query(&mut self, cue_id: Ident, now: u64, write: &mut BufferWrite) {
        let cue: Vec<(Symbol, CueValue)> = self
            .wm
            .of_id(cue_id)
            .iter()
            .filter_map(|tt| self.wm.get(*tt))
            .filter(|w| !w.acceptable)
            .map(|w| {
                let v = match &w.value {
                    Symbol::Id(i) => match self.wm.lti(*i) {
                        Some(l) => CueValue::Lti(l),
                        None => CueValue::Any,
                    },
                    c => CueValue::Const(c.clone()),
                };
                (w.attr.clone(), v)
            })
            .collect();
        let in_wm = self.wm.live_ltis();
        match self.smem.query(&cue, now, &in_wm) {
            Ok(lti) => {
                let concept = self.smem.concept(lti).expect("retrieved concept").clone();
                let root = self.wm.fresh_id('L');
                self.wm.set_lti(root, lti);
                write.status("success", Symbol::Id(cue_id));
                write.status("retrieved", Symbol::Id(root));
                for (a, v) in concept.slots {
                    let value = match v {
                        SlotValue::Const(c) => c,
                        SlotValue::Lti(l) => {
                            let id = self.wm.fresh_id('L');
                            self.wm.set_lti(id, l);
                            Symbol::Id(id)
                        }
                    };
                    write.triples.push((root, a, value));
                }
                self.trace.emit(3, || format!("smem retrieved @{lti}"));
            }
            Err(f) => {
                write.status("failure", Symbol::Id(cue_id));
                let reason = match f {
                    QueryFailure::Malformed => "malformed",
                    QueryFailure::NoMatch => "no-match",
                };
                write.status("reason", Symbol::str(reason));
            }
        }
    }

    fn epmem_commands(&mut self, d: usize) {
        let (_, command, result) = self.stack[d].epmem;
        let commands = self.take_commands(command);
        if commands.is_empty() {
            return;
        }
        let mut write = BufferWrite::new(result);
        for (attr, value) in commands {
            let target = match (attr.as_str(), &value) {
                (Some("query"), Symbol::Id(cue)) => {
                    let cue = self.epmem_cue(*cue);
                    match self.epmem.query(&cue) {
                        Some((c, score)) => {
                            write.status("match-score", Symbol::Int(score as i64));
                            Ok(c)
                        }
                        None => Err("no-match"),
                    }
                }
                (Some("retrieve"), Symbol::Int(n)) if *n >= 0 => Ok(*n as u64),
                (Some("next"), _) => self.stack[d]
                    .epmem_cursor
                    .map(|c| c + 1)
                    .ok_or("no-current-episode"),
                (Some("previous"), _) => match self.stack[d].epmem_cursor {
                    Some(0) => Err("boundary"),
                    Some(c) => Ok(c - 1),
                    None => Err("no-current-episode"),
                },
                _ => Err("unknown-command"),
            };
            let outcome = target.and_then(|c| {
                self.epmem
                    .reconstruct(c)
                    .map(|keys| (c, keys))
                    .ok_or(match attr.as_str() {
                        Some("next") | Some("previous") => "boundary",
                        _ => "out-of-range",
                    })
            });
            match outcome {
                Ok((c, keys)) => {
                    self.stack[d].epmem_cursor = Some(c);
                    write.status("success", value);
                    write.status("cycle", Symbol::Int(c as i64));
                    self.materialize(&keys, &mut write);
                    self.trace
                        .emit(3, || format!("epmem retrieved episode {c}"));
                }
                Err(reason) => {
                    write.status("failure", value);
                    write.status("reason", Symbol::str(reason));
                }
            }
        }
        self.buffer_queue.push(write);
    }

    /// The cue graph hanging from `root`, identifiers becoming nodes.
    fn epmem_cue(&self, root: Ident) -> Cue {
        let mut nodes: HashMap<Ident, usize> = HashMap::from([(root, 0)]);
        let mut queue = vec![root];
        let mut edges = Vec::new();
        while let Some(id) = queue.pop() {
            let from = nodes[&id];
            for tt in self.wm.of_id(id) {
                let w = self.wm.get(*tt).expect("indexed");
                if w.acceptable {
                    continue;
                }
                let to = match &w.value {
                    Symbol::Id(v) => {
                        let n = nodes.len();
                        let node = *nodes.entry(*v).or_insert_with(|| {
                            queue.push(*v);
                            n
                        });
                        CueTarget::Node(node)
                    }
                    c => CueTarget::Const(c.clone()),
                };
                edges.push(CueEdge {
                    from,
                    attr: w.attr.clone(),
                    to,
                });
            }
        }
        Cue {
            nodes: nodes.len(),
            edges,
        }
    }

    /// Copies an episode under the result buffer with fresh identifiers.
    fn materialize(&mut self, keys: &BTreeSet<WmeKey>, write: &mut BufferWrite) {
        let mut fresh: HashMap<Ident, Ident> = HashMap::new();
        let mut map = |wm: &mut crate::wm::WorkingMemory, id: Ident| {
            *fresh.entry(id).or_insert_with(|| wm.fresh_id(id.letter))
        };
        if let Some(root) = self.epmem.root() {
            let r = map(&mut self.wm, root);
            write.status("retrieved", Symbol::Id(r));
        }
        for (id, attr, value, acceptable) in keys {
            if *acceptable {
                continue;
            }
            let id = map(&mut self.wm, *id);
            let value = match value {
                Symbol::Id(v) => Symbol::Id(map(&mut self.wm, *v)),
                c => c.clone(),
            };
            write.triples.push((id, attr.clone(), value));
        }
    }

    /// Snapshot of the topstate for episodic memory.
    pub(crate) fn record_episode(&mut self) {
        if !self.epmem.config.enabled {
            return;
        }
        let top = self.topstate();
        let exclude = self.epmem.config.exclude.clone();
        let skip = |w: &crate::wm::Wme| {
            w.acceptable
                || (w.id == top && matches!(w.attr.as_str(), Some("smem" | "epmem")))
                || w.attr.as_str().is_some_and(|a| exclude.contains(a))
        };
        let reachable = self.wm.reachable([top], skip);
        let mut snapshot = BTreeSet::new();
        for id in reachable {
            for tt in self.wm.of_id(id) {
                let w = self.wm.get(*tt).expect("indexed");
                if !skip(w) {
                    snapshot.insert(w.key());
                }
            }
        }
        let (opened, closed) = self.epmem.record(self.cycle, &snapshot);
        let cycle = self.cycle;
        self.trace
            .emit(4, || format!("episode {cycle}: +{opened} -{closed}"));
    }
}
