//! Graph-structured working memory.
//!
//! Every WME has a timetag that serves as its identity in traces. Support
//! is tracked per WME: i-supported WMEs carry the set of instantiations
//! justifying them and disappear when that set empties.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::{IdGen, Ident, Symbol};

pub type Timetag = u64;

/// Identity of a rule instantiation (or a substate justification).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InstId(pub u64);

/// A working-memory element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Wme {
    pub timetag: Timetag,
    pub id: Ident,
    pub attr: Symbol,
    pub value: Symbol,
    /// Mirror of an acceptable operator preference, `(S1 ^operator O1 +)`.
    pub acceptable: bool,
}

impl Wme {
    pub fn key(&self) -> WmeKey {
        (
            self.id,
            self.attr.clone(),
            self.value.clone(),
            self.acceptable,
        )
    }

    pub fn triple_text(&self) -> String {
        if self.acceptable {
            format!("({} ^{} {} +)", self.id, self.attr, self.value)
        } else {
            format!("({} ^{} {})", self.id, self.attr, self.value)
        }
    }
}

pub type WmeKey = (Ident, Symbol, Symbol, bool);

/// What kind of architecture structure a WME is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArchKind {
    /// State skeleton: `^superstate`, `^impasse`, buffer links, io links.
    Structure,
    /// A tied or conflicting candidate, `(S2 ^item O1)`.
    Item,
    /// The selected operator, `(S1 ^operator O1)`.
    Selection,
    /// Contents placed in a buffer by a long-term memory or the environment.
    Retrieval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Support {
    Arch(ArchKind),
    O,
    I(BTreeSet<InstId>),
}

impl Support {
    pub fn i(inst: InstId) -> Support {
        Support::I(BTreeSet::from([inst]))
    }
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub wme: Wme,
    pub support: Support,
    /// First instantiation that created the WME.
    pub creator: Option<InstId>,
}

/// Mutation record consumed by the matcher and recorders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Change {
    Add(Wme),
    Remove(Wme),
}

#[derive(Default)]
pub struct WorkingMemory {
    entries: HashMap<Timetag, Entry>,
    by_key: HashMap<WmeKey, Timetag>,
    by_id: HashMap<Ident, BTreeSet<Timetag>>,
    by_id_attr: HashMap<(Ident, Symbol), BTreeSet<Timetag>>,
    by_attr: HashMap<(Symbol, bool), BTreeSet<Timetag>>,
    by_attr_value: HashMap<(Symbol, Symbol), BTreeSet<Timetag>>,
    value_refs: HashMap<Ident, usize>,
    states: BTreeSet<Ident>,
    dead: HashSet<Ident>,
    next_timetag: Timetag,
    ids: IdGen,
    changes: Vec<Change>,
    lti: HashMap<Ident, u64>,
}

/// Result of an addition: the timetag and whether a new WME was created.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Added {
    pub timetag: Timetag,
    pub new: bool,
}

static EMPTY: BTreeSet<Timetag> = BTreeSet::new();

impl WorkingMemory {
    pub fn new() -> Self {
        WorkingMemory {
            next_timetag: 1,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fresh_id(&mut self, letter: char) -> Ident {
        self.ids.fresh(letter)
    }

    pub fn reserve_id(&mut self, id: Ident) {
        self.ids.reserve(id);
    }

    pub fn register_state(&mut self, id: Ident) {
        self.states.insert(id);
        self.dead.remove(&id);
    }

    pub fn unregister_state(&mut self, id: Ident) {
        self.states.remove(&id);
        self.dead.insert(id);
    }

    pub fn is_state(&self, id: Ident) -> bool {
        self.states.contains(&id)
    }

    /// A live identifier is a state or the value of some live WME.
    pub fn is_live_id(&self, id: Ident) -> bool {
        self.states.contains(&id) || self.value_refs.get(&id).is_some_and(|n| *n > 0)
    }

    /// Checked addition used by external callers: the identifier must be live.
    pub fn add_wme(
        &mut self,
        id: Ident,
        attr: Symbol,
        value: Symbol,
        support: Support,
    ) -> Result<Timetag> {
        if self.dead.contains(&id) {
            return Err(Error::RemovedState(id));
        }
        if !self.is_live_id(id) {
            return Err(Error::DanglingId(id));
        }
        Ok(self.add(id, attr, value, false, support, None).timetag)
    }

    /// Adds or merges a WME. Duplicate i-supported additions merge their
    /// justification sets; any o-support or architecture support wins.
    pub fn add(
        &mut self,
        id: Ident,
        attr: Symbol,
        value: Symbol,
        acceptable: bool,
        support: Support,
        creator: Option<InstId>,
    ) -> Added {
        let key = (id, attr, value, acceptable);
        if let Some(&tt) = self.by_key.get(&key) {
            let entry = self.entries.get_mut(&tt).expect("indexed wme");
            entry.support = match (std::mem::replace(&mut entry.support, Support::O), support) {
                (Support::I(mut a), Support::I(b)) => {
                    a.extend(b);
                    Support::I(a)
                }
                (Support::Arch(k), _) | (_, Support::Arch(k)) => Support::Arch(k),
                _ => Support::O,
            };
            return Added {
                timetag: tt,
                new: false,
            };
        }
        let (id, attr, value, acceptable) = key;
        let timetag = self.next_timetag;
        self.next_timetag += 1;
        let wme = Wme {
            timetag,
            id,
            attr: attr.clone(),
            value: value.clone(),
            acceptable,
        };
        self.by_key.insert(wme.key(), timetag);
        self.by_id.entry(id).or_default().insert(timetag);
        self.by_id_attr
            .entry((id, attr.clone()))
            .or_default()
            .insert(timetag);
        self.by_attr
            .entry((attr.clone(), acceptable))
            .or_default()
            .insert(timetag);
        self.by_attr_value
            .entry((attr, value.clone()))
            .or_default()
            .insert(timetag);
        if let Symbol::Id(v) = value {
            *self.value_refs.entry(v).or_insert(0) += 1;
        }
        self.changes.push(Change::Add(wme.clone()));
        self.entries.insert(
            timetag,
            Entry {
                wme,
                support,
                creator,
            },
        );
        Added { timetag, new: true }
    }

    pub fn remove(&mut self, timetag: Timetag) -> Option<Wme> {
        let entry = self.entries.remove(&timetag)?;
        let wme = entry.wme;
        self.by_key.remove(&wme.key());
        fn unindex<K: std::hash::Hash + Eq>(
            map: &mut HashMap<K, BTreeSet<Timetag>>,
            k: K,
            tt: Timetag,
        ) {
            if let Some(set) = map.get_mut(&k) {
                set.remove(&tt);
                if set.is_empty() {
                    map.remove(&k);
                }
            }
        }
        unindex(&mut self.by_id, wme.id, timetag);
        unindex(&mut self.by_id_attr, (wme.id, wme.attr.clone()), timetag);
        unindex(
            &mut self.by_attr,
            (wme.attr.clone(), wme.acceptable),
            timetag,
        );
        unindex(
            &mut self.by_attr_value,
            (wme.attr.clone(), wme.value.clone()),
            timetag,
        );
        if let Symbol::Id(v) = wme.value {
            if let Some(n) = self.value_refs.get_mut(&v) {
                *n -= 1;
                if *n == 0 {
                    self.value_refs.remove(&v);
                }
            }
        }
        self.changes.push(Change::Remove(wme.clone()));
        Some(wme)
    }

    /// Drops one justification; removes the WME when none remain.
    pub fn remove_support(&mut self, timetag: Timetag, inst: InstId) -> Option<Wme> {
        let entry = self.entries.get_mut(&timetag)?;
        if let Support::I(set) = &mut entry.support {
            set.remove(&inst);
            if set.is_empty() {
                return self.remove(timetag);
            }
        }
        None
    }

    /// Hands a WME over to a new owner: `to` replaces `from` as creator
    /// and as justification, or the WME becomes o-supported.
    pub fn transfer(&mut self, timetag: Timetag, from: InstId, to: InstId, o_support: bool) {
        let Some(entry) = self.entries.get_mut(&timetag) else {
            return;
        };
        entry.creator = Some(to);
        match &mut entry.support {
            Support::Arch(_) => {}
            _ if o_support => entry.support = Support::O,
            Support::I(set) => {
                set.remove(&from);
                set.insert(to);
            }
            Support::O => {}
        }
    }

    pub fn entry(&self, timetag: Timetag) -> Option<&Entry> {
        self.entries.get(&timetag)
    }

    pub fn get(&self, timetag: Timetag) -> Option<&Wme> {
        self.entries.get(&timetag).map(|e| &e.wme)
    }

    pub fn contains(&self, timetag: Timetag) -> bool {
        self.entries.contains_key(&timetag)
    }

    pub fn find(
        &self,
        id: Ident,
        attr: &Symbol,
        value: &Symbol,
        acceptable: bool,
    ) -> Option<Timetag> {
        self.by_key
            .get(&(id, attr.clone(), value.clone(), acceptable))
            .copied()
    }

    pub fn of_id(&self, id: Ident) -> &BTreeSet<Timetag> {
        self.by_id.get(&id).unwrap_or(&EMPTY)
    }

    pub fn of_id_attr(&self, id: Ident, attr: &Symbol) -> &BTreeSet<Timetag> {
        self.by_id_attr.get(&(id, attr.clone())).unwrap_or(&EMPTY)
    }

    pub fn of_attr(&self, attr: &Symbol, acceptable: bool) -> &BTreeSet<Timetag> {
        self.by_attr
            .get(&(attr.clone(), acceptable))
            .unwrap_or(&EMPTY)
    }

    pub fn of_attr_value(&self, attr: &Symbol, value: &Symbol) -> &BTreeSet<Timetag> {
        self.by_attr_value
            .get(&(attr.clone(), value.clone()))
            .unwrap_or(&EMPTY)
    }

    /// Values of `(id ^attr *)` plain WMEs.
    pub fn values(&self, id: Ident, attr: &str) -> Vec<Symbol> {
        let attr = Symbol::str(attr);
        self.of_id_attr(id, &attr)
            .iter()
            .filter_map(|tt| self.get(*tt))
            .filter(|w| !w.acceptable)
            .map(|w| w.value.clone())
            .collect()
    }

    pub fn value(&self, id: Ident, attr: &str) -> Option<Symbol> {
        self.values(id, attr).into_iter().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entry> {
        self.entries.values()
    }

    /// All WMEs sorted by timetag.
    pub fn sorted(&self) -> Vec<&Wme> {
        let mut v: Vec<&Wme> = self.entries.values().map(|e| &e.wme).collect();
        v.sort_by_key(|w| w.timetag);
        v
    }

    pub fn take_changes(&mut self) -> Vec<Change> {
        std::mem::take(&mut self.changes)
    }

    pub fn has_pending_changes(&self) -> bool {
        !self.changes.is_empty()
    }

    pub fn set_lti(&mut self, id: Ident, lti: u64) {
        self.lti.insert(id, lti);
    }

    pub fn lti(&self, id: Ident) -> Option<u64> {
        self.lti.get(&id).copied()
    }

    /// Long-term identifiers of live identifiers in working memory.
    pub fn live_ltis(&self) -> BTreeSet<u64> {
        self.lti
            .iter()
            .filter(|(id, _)| self.is_live_id(**id))
            .map(|(_, l)| *l)
            .collect()
    }

    /// Identifiers reachable from `roots` by following WME values.
    pub fn reachable<I: IntoIterator<Item = Ident>>(
        &self,
        roots: I,
        skip: impl Fn(&Wme) -> bool,
    ) -> HashSet<Ident> {
        let mut seen: HashSet<Ident> = HashSet::new();
        let mut queue: VecDeque<Ident> = VecDeque::new();
        for r in roots {
            if seen.insert(r) {
                queue.push_back(r);
            }
        }
        while let Some(id) = queue.pop_front() {
            for tt in self.of_id(id) {
                let w = &self.entries[tt].wme;
                if skip(w) {
                    continue;
                }
                if let Symbol::Id(v) = w.value {
                    if seen.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
        }
        seen
    }

    /// Level of each identifier: the depth of the shallowest state it hangs
    /// off. `stack` lists states topstate first. Substates are not reachable
    /// from their superstates, so each level is a fresh traversal.
    pub fn id_levels(&self, stack: &[Ident]) -> HashMap<Ident, usize> {
        self.id_levels_skipping(stack, |_| false)
    }

    /// [`WorkingMemory::id_levels`] ignoring the WMEs selected by `skip`.
    pub fn id_levels_skipping(
        &self,
        stack: &[Ident],
        skip: impl Fn(&Wme) -> bool,
    ) -> HashMap<Ident, usize> {
        let mut level: HashMap<Ident, usize> = HashMap::new();
        for (depth, root) in stack.iter().enumerate() {
            let mut queue = VecDeque::from([*root]);
            level.entry(*root).or_insert(depth);
            while let Some(id) = queue.pop_front() {
                for tt in self.of_id(id) {
                    let w = &self.entries[tt].wme;
                    if skip(w) {
                        continue;
                    }
                    if let Symbol::Id(v) = w.value {
                        if let std::collections::hash_map::Entry::Vacant(e) = level.entry(v) {
                            e.insert(depth);
                            queue.push_back(v);
                        }
                    }
                }
            }
        }
        level
    }

    /// Removes every WME whose identifier is unreachable from `roots`.
    pub fn collect_garbage(&mut self, roots: &[Ident]) -> Vec<Wme> {
        let live = self.reachable(roots.iter().copied(), |_| false);
        let doomed: Vec<Timetag> = self
            .entries
            .values()
            .filter(|e| !live.contains(&e.wme.id))
            .map(|e| e.wme.timetag)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        doomed
            .into_iter()
            .filter_map(|tt| self.remove(tt))
            .collect()
    }

    /// Printable dump: depth-first from each state, timetag order within an identifier.
    pub fn dump(&self, states: &[Ident], with_timetags: bool) -> String {
        let mut out = String::new();
        let mut seen: HashSet<Ident> = HashSet::new();
        for s in states {
            self.dump_from(*s, &mut seen, &mut out, with_timetags);
        }
        out
    }

    fn dump_from(&self, id: Ident, seen: &mut HashSet<Ident>, out: &mut String, tt: bool) {
        if !seen.insert(id) {
            return;
        }
        let tts: Vec<Timetag> = self.of_id(id).iter().copied().collect();
        for t in tts {
            let w = &self.entries[&t].wme;
            let plus = if w.acceptable { " +" } else { "" };
            if tt {
                let _ = writeln!(
                    out,
                    "({} ^{} {}{} [{}])",
                    w.id, w.attr, w.value, plus, w.timetag
                );
            } else {
                let _ = writeln!(out, "({} ^{} {}{})", w.id, w.attr, w.value, plus);
            }
            if let Symbol::Id(v) = w.value {
                if !self.states.contains(&v) {
                    self.dump_from(v, seen, out, tt);
                }
            }
        }
    }
}
