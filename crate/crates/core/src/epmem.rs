//! Episodic memory: interval-encoded snapshots of the topstate.
//!
//! Each WME content gets an interval `[start, end)` of cycles during which
//! it was present. Episodes are reconstructed by collecting the intervals
//! live at a cycle; queries sweep backward from the most recent episode,
//! updating the reconstruction by the deltas between neighbouring cycles.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::symbol::{Ident, Symbol};
use crate::wm::WmeKey;

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub key: WmeKey,
    pub start: u64,
    pub end: Option<u64>,
}

impl Interval {
    pub fn live_at(&self, cycle: u64) -> bool {
        self.start <= cycle && self.end.is_none_or(|e| cycle < e)
    }
}

/// A query cue: a graph of nodes hanging from a root (node 0).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cue {
    pub nodes: usize,
    pub edges: Vec<CueEdge>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CueEdge {
    pub from: usize,
    pub attr: Symbol,
    pub to: CueTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CueTarget {
    Const(Symbol),
    Node(usize),
}

impl Cue {
    fn has_children(&self, node: usize) -> bool {
        self.edges.iter().any(|e| e.from == node)
    }

    /// Leaves are constant-valued edges and edges into childless nodes.
    pub fn leaf_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| match e.to {
                CueTarget::Const(_) => true,
                CueTarget::Node(n) => !self.has_children(n),
            })
            .count()
    }
}

/// `id -> {(attr, value)}` view of one episode, acceptable preferences excluded.
pub type Graph = HashMap<Ident, BTreeSet<(Symbol, Symbol)>>;

pub fn graph_of<'a>(keys: impl IntoIterator<Item = &'a WmeKey>) -> Graph {
    let mut g = Graph::new();
    for k in keys {
        graph_add(&mut g, k);
    }
    g
}

fn graph_add(g: &mut Graph, k: &WmeKey) {
    if !k.3 {
        g.entry(k.0).or_default().insert((k.1.clone(), k.2.clone()));
    }
}

fn graph_remove(g: &mut Graph, k: &WmeKey) {
    if let Some(set) = g.get_mut(&k.0) {
        set.remove(&(k.1.clone(), k.2.clone()));
        if set.is_empty() {
            g.remove(&k.0);
        }
    }
}

struct Scorer<'a> {
    cue: &'a Cue,
    graph: &'a Graph,
    order: Vec<usize>,
    map: Vec<Option<Symbol>>,
    leaf_edges: Vec<usize>,
    best: usize,
}

impl Scorer<'_> {
    fn satisfied(&self) -> usize {
        self.leaf_edges
            .iter()
            .filter(|&&i| {
                let e = &self.cue.edges[i];
                let Some(Symbol::Id(p)) = &self.map[e.from] else {
                    return false;
                };
                match &e.to {
                    CueTarget::Const(c) => self
                        .graph
                        .get(p)
                        .is_some_and(|s| s.contains(&(e.attr.clone(), c.clone()))),
                    CueTarget::Node(n) => self.map[*n].is_some(),
                }
            })
            .count()
    }

    fn consistent(&self, node: usize, value: &Symbol) -> bool {
        self.cue.edges.iter().all(|e| {
            if e.to != CueTarget::Node(node) {
                return true;
            }
            match &self.map[e.from] {
                Some(Symbol::Id(p)) => self
                    .graph
                    .get(p)
                    .is_some_and(|s| s.contains(&(e.attr.clone(), value.clone()))),
                _ => true,
            }
        }) && self
            .cue
            .edges
            .iter()
            .filter(|e| e.from == node)
            .all(|e| match e.to {
                CueTarget::Node(child) => match &self.map[child] {
                    Some(v) => value.as_ident().is_some_and(|id| {
                        self.graph
                            .get(&id)
                            .is_some_and(|s| s.contains(&(e.attr.clone(), v.clone())))
                    }),
                    None => true,
                },
                CueTarget::Const(_) => true,
            })
    }

    fn search(&mut self, k: usize) {
        if self.best == self.leaf_edges.len() {
            return;
        }
        if k == self.order.len() {
            self.best = self.best.max(self.satisfied());
            return;
        }
        let node = self.order[k];
        let mut options: BTreeSet<Symbol> = BTreeSet::new();
        for e in &self.cue.edges {
            if e.to != CueTarget::Node(node) {
                continue;
            }
            if let Some(Symbol::Id(p)) = &self.map[e.from] {
                if let Some(s) = self.graph.get(p) {
                    options.extend(
                        s.iter()
                            .filter(|(a, _)| *a == e.attr)
                            .map(|(_, v)| v.clone()),
                    );
                }
            }
        }
        let needs_id = self.cue.has_children(node);
        for v in options {
            if needs_id && v.as_ident().is_none() {
                continue;
            }
            if self.consistent(node, &v) {
                self.map[node] = Some(v);
                self.search(k + 1);
                self.map[node] = None;
            }
        }
        self.search(k + 1);
    }
}

/// Largest number of cue leaves satisfiable under one consistent mapping of
/// cue nodes into the episode, with the cue root placed at `root`.
pub fn score(cue: &Cue, graph: &Graph, root: Ident) -> usize {
    let mut order = Vec::new();
    let mut seen = BTreeSet::from([0]);
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(n) = queue.pop_front() {
        for e in cue.edges.iter().filter(|e| e.from == n) {
            if let CueTarget::Node(c) = e.to {
                if seen.insert(c) {
                    order.push(c);
                    queue.push_back(c);
                }
            }
        }
    }
    let leaf_edges = (0..cue.edges.len())
        .filter(|&i| match cue.edges[i].to {
            CueTarget::Const(_) => true,
            CueTarget::Node(n) => !cue.has_children(n),
        })
        .collect();
    let mut map = vec![None; cue.nodes.max(1)];
    map[0] = Some(Symbol::Id(root));
    let mut s = Scorer {
        cue,
        graph,
        order,
        map,
        leaf_edges,
        best: 0,
    };
    s.search(0);
    s.best
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpmemConfig {
    pub enabled: bool,
    /// Attributes whose WMEs (and the structure only reachable through them) are not recorded.
    pub exclude: BTreeSet<String>,
}

impl EpmemConfig {
    pub fn on() -> Self {
        EpmemConfig {
            enabled: true,
            exclude: BTreeSet::new(),
        }
    }
}

#[derive(Default)]
pub struct EpisodicMemory {
    pub config: EpmemConfig,
    root: Option<Ident>,
    intervals: Vec<Interval>,
    open: HashMap<WmeKey, usize>,
    by_start: BTreeMap<u64, Vec<usize>>,
    by_end: BTreeMap<u64, Vec<usize>>,
    first: Option<u64>,
    latest: Option<u64>,
    /// Pending log lines; `None` while logging is off.
    log: Option<Vec<String>>,
}

impl EpisodicMemory {
    pub fn new(config: EpmemConfig) -> Self {
        EpisodicMemory {
            config,
            ..Default::default()
        }
    }

    pub fn set_root(&mut self, root: Ident) {
        self.root = Some(root);
    }

    pub fn root(&self) -> Option<Ident> {
        self.root
    }

    pub fn latest(&self) -> Option<u64> {
        self.latest
    }

    pub fn first(&self) -> Option<u64> {
        self.first
    }

    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_recorded(&self, cycle: u64) -> bool {
        matches!((self.first, self.latest), (Some(a), Some(b)) if a <= cycle && cycle <= b)
    }

    /// Log lines produced since the last call.
    pub fn take_log(&mut self) -> Vec<String> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Starts or stops collecting log lines for [`EpisodicMemory::take_log`].
    pub fn set_logging(&mut self, on: bool) {
        self.log = on.then(|| self.log.take().unwrap_or_default());
    }

    fn emit(&mut self, line: impl FnOnce() -> String) {
        if let Some(log) = self.log.as_mut() {
            log.push(line());
        }
    }

    /// Records the snapshot for `cycle`. Returns (opened, closed) interval counts.
    pub fn record(&mut self, cycle: u64, snapshot: &BTreeSet<WmeKey>) -> (usize, usize) {
        let mut closed: Vec<(WmeKey, usize)> = self
            .open
            .iter()
            .filter(|(k, _)| !snapshot.contains(*k))
            .map(|(k, i)| (k.clone(), *i))
            .collect();
        closed.sort_by_key(|(_, i)| *i);
        for (k, i) in &closed {
            self.open.remove(k);
            self.intervals[*i].end = Some(cycle);
            self.by_end.entry(cycle).or_default().push(*i);
            self.emit(|| format!("R {cycle} {i}"));
        }
        let mut opened = 0;
        for k in snapshot {
            if self.open.contains_key(k) {
                continue;
            }
            let i = self.intervals.len();
            self.intervals.push(Interval {
                key: k.clone(),
                start: cycle,
                end: None,
            });
            self.open.insert(k.clone(), i);
            self.by_start.entry(cycle).or_default().push(i);
            if let Some(log) = self.log.as_mut() {
                log.push(format!("A {cycle} {}", key_text(k)));
            }
            opened += 1;
        }
        self.first.get_or_insert(cycle);
        self.latest = Some(cycle);
        self.emit(|| format!("C {cycle}"));
        (opened, closed.len())
    }

    /// Contents live at `cycle`, or `None` if that cycle was not recorded.
    pub fn reconstruct(&self, cycle: u64) -> Option<BTreeSet<WmeKey>> {
        if !self.is_recorded(cycle) {
            return None;
        }
        Some(
            self.by_start
                .range(..=cycle)
                .flat_map(|(_, v)| v.iter())
                .map(|i| &self.intervals[*i])
                .filter(|iv| iv.live_at(cycle))
                .map(|iv| iv.key.clone())
                .collect(),
        )
    }

    /// Best episode for a cue: highest score, most recent among equals.
    /// Returns `None` when no episode satisfies any leaf.
    pub fn query(&self, cue: &Cue) -> Option<(u64, usize)> {
        let (Some(first), Some(latest), Some(root)) = (self.first, self.latest, self.root) else {
            return None;
        };
        let full = cue.leaf_count();
        let mut graph = graph_of(self.open.keys());
        let mut best: Option<(u64, usize)> = None;
        let mut cycle = latest;
        loop {
            let s = score(cue, &graph, root);
            if s > best.map_or(0, |b| b.1) {
                best = Some((cycle, s));
                if s == full {
                    break;
                }
            }
            if cycle == first {
                break;
            }
            // Step to cycle - 1: undo intervals that began at `cycle`, restore those that ended there.
            if let Some(v) = self.by_start.get(&cycle) {
                for i in v {
                    graph_remove(&mut graph, &self.intervals[*i].key);
                }
            }
            if let Some(v) = self.by_end.get(&cycle) {
                for i in v {
                    let iv = &self.intervals[*i];
                    if iv.start < cycle {
                        graph_add(&mut graph, &iv.key);
                    }
                }
            }
            cycle -= 1;
        }
        best
    }

    /// Rebuilds memory from log lines. Recording resumes after the last logged cycle.
    pub fn load_log(text: &str, config: EpmemConfig) -> Result<EpisodicMemory> {
        let mut mem = EpisodicMemory::new(config);
        for (n, line) in text.lines().enumerate() {
            let bad = |m: &str| Error::Format {
                line: n + 1,
                message: m.to_string(),
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (kind, rest) = line.split_once(' ').ok_or_else(|| bad("expected record"))?;
            let (cycle, rest) = rest.split_once(' ').unwrap_or((rest, ""));
            let cycle: u64 = cycle.parse().map_err(|_| bad("bad cycle"))?;
            match kind {
                "A" => {
                    let key = parse_key(rest).ok_or_else(|| bad("expected (<id> ^attr value)"))?;
                    let i = mem.intervals.len();
                    mem.intervals.push(Interval {
                        key: key.clone(),
                        start: cycle,
                        end: None,
                    });
                    mem.open.insert(key, i);
                    mem.by_start.entry(cycle).or_default().push(i);
                }
                "R" => {
                    let i: usize = rest
                        .trim()
                        .parse()
                        .map_err(|_| bad("bad interval reference"))?;
                    let iv = mem
                        .intervals
                        .get_mut(i)
                        .ok_or_else(|| bad("unknown interval"))?;
                    iv.end = Some(cycle);
                    let key = iv.key.clone();
                    mem.open.remove(&key);
                    mem.by_end.entry(cycle).or_default().push(i);
                }
                "C" if rest.is_empty() => {}
                _ => return Err(bad("unknown record")),
            }
            mem.first = Some(mem.first.map_or(cycle, |f| f.min(cycle)));
            mem.latest = Some(mem.latest.map_or(cycle, |l| l.max(cycle)));
        }
        Ok(mem)
    }
}

pub fn key_text(k: &WmeKey) -> String {
    let mut s = String::new();
    let _ = write!(s, "({} ^{} {}", k.0, k.1, k.2);
    if k.3 {
        s.push_str(" +");
    }
    s.push(')');
    s
}

fn parse_key(text: &str) -> Option<WmeKey> {
    let body = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut parts = body.split_whitespace();
    let id = Ident::parse(parts.next()?)?;
    let attr = Symbol::parse_token(parts.next()?.strip_prefix('^')?);
    let value = Symbol::parse_token(parts.next()?);
    let acceptable = match parts.next() {
        None => false,
        Some("+") => true,
        Some(_) => return None,
    };
    Some((id, attr, value, acceptable))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(id: u32, attr: &str, value: Symbol) -> WmeKey {
        (Ident::new('S', id), Symbol::str(attr), value, false)
    }

    #[test]
    fn interval_lifecycle() {
        let mut m = EpisodicMemory::new(EpmemConfig::on());
        m.set_root(Ident::new('S', 1));
        let x = key(1, "x", Symbol::Int(1));
        for c in 0..12 {
            let snap: BTreeSet<WmeKey> = if (5..9).contains(&c) {
                BTreeSet::from([x.clone()])
            } else {
                BTreeSet::new()
            };
            m.record(c, &snap);
        }
        assert_eq!(m.interval_count(), 1);
        assert_eq!(m.intervals[0].start, 5);
        assert_eq!(m.intervals[0].end, Some(9));
        assert_eq!(m.record(12, &BTreeSet::new()), (0, 0));
        assert!(m.reconstruct(4).unwrap().is_empty());
        assert_eq!(m.reconstruct(8).unwrap().len(), 1);
        assert!(m.reconstruct(13).is_none());
    }

    #[test]
    fn query_prefers_recent_among_equals() {
        let mut m = EpisodicMemory::new(EpmemConfig::on());
        m.set_root(Ident::new('S', 1));
        let on = key(1, "light", Symbol::str("on"));
        for c in 0..50 {
            let snap: BTreeSet<WmeKey> = if c == 10 || c == 42 {
                BTreeSet::from([on.clone()])
            } else {
                BTreeSet::from([key(1, "light", Symbol::str("off"))])
            };
            m.record(c, &snap);
        }
        let cue = Cue {
            nodes: 1,
            edges: vec![CueEdge {
                from: 0,
                attr: Symbol::str("light"),
                to: CueTarget::Const(Symbol::str("on")),
            }],
        };
        assert_eq!(m.query(&cue), Some((42, 1)));
        let none = Cue {
            nodes: 1,
            edges: vec![CueEdge {
                from: 0,
                attr: Symbol::str("dark"),
                to: CueTarget::Const(Symbol::Int(1)),
            }],
        };
        assert_eq!(m.query(&none), None);
    }

    #[test]
    fn log_roundtrip() {
        let mut m = EpisodicMemory::new(EpmemConfig::on());
        m.set_root(Ident::new('S', 1));
        m.set_logging(true);
        let mut lines = Vec::new();
        for c in 0..6u64 {
            let snap: BTreeSet<WmeKey> = (0..=c % 3)
                .map(|i| key(1, "n", Symbol::Int(i as i64)))
                .collect();
            m.record(c, &snap);
            lines.extend(m.take_log());
        }
        let back = EpisodicMemory::load_log(&lines.join("\n"), EpmemConfig::on()).unwrap();
        for c in 0..6 {
            assert_eq!(back.reconstruct(c), m.reconstruct(c), "cycle {c}");
        }
    }
}
