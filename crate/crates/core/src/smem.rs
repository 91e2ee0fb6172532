//! Semantic memory: a long-term graph of concepts retrieved by partial cue.
//!
//! Retrieval ranks every candidate containing the cue by base-level
//! activation (recency and frequency of access) plus activation spread from
//! concepts currently instantiated in working memory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Long-term identifier index, printed `@n`.
pub type Lti = u64;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotValue {
    Const(Symbol),
    Lti(Lti),
}

impl std::fmt::Display for SlotValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SlotValue::Const(s) => write!(f, "{s}"),
            SlotValue::Lti(l) => write!(f, "@{l}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Concept {
    pub lti: Lti,
    pub slots: Vec<(Symbol, SlotValue)>,
    /// Cycles at which the concept was created, stored or retrieved.
    pub history: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CueValue {
    Const(Symbol),
    Lti(Lti),
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmemConfig {
    pub decay: f64,
    /// Activation each working-memory concept spreads to its neighbours.
    pub spread_budget: f64,
    pub spread_depth: u32,
    /// Standard deviation of zero-mean activation noise; off when `None`.
    pub noise: Option<f64>,
    pub noise_seed: u64,
}

impl Default for SmemConfig {
    fn default() -> Self {
        SmemConfig {
            decay: 0.5,
            spread_budget: 1.0,
            spread_depth: 1,
            noise: None,
            noise_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryFailure {
    Malformed,
    NoMatch,
}

/// Base-level activation: ln Σ (now − t)^(−d). Ages below one count as one.
pub fn bla(history: &[u64], now: u64, decay: f64) -> f64 {
    let sum: f64 = history
        .iter()
        .map(|t| {
            let age = now.saturating_sub(*t).max(1) as f64;
            age.powf(-decay)
        })
        .sum();
    sum.ln()
}

pub struct SemanticMemory {
    pub config: SmemConfig,
    concepts: BTreeMap<Lti, Concept>,
    next: Lti,
    noise_rng: ChaCha8Rng,
}

impl Default for SemanticMemory {
    fn default() -> Self {
        Self::new(SmemConfig::default())
    }
}

impl SemanticMemory {
    pub fn new(config: SmemConfig) -> Self {
        SemanticMemory {
            config,
            concepts: BTreeMap::new(),
            next: 1,
            noise_rng: ChaCha8Rng::seed_from_u64(config.noise_seed),
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, lti: Lti) -> Option<&Concept> {
        self.concepts.get(&lti)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    /// A new concept with no slots, created at `now`.
    pub fn allocate(&mut self, now: u64) -> Lti {
        let lti = self.next;
        self.next += 1;
        self.concepts.insert(
            lti,
            Concept {
                lti,
                slots: Vec::new(),
                history: vec![now],
            },
        );
        lti
    }

    fn touch(&mut self, lti: Lti, now: u64) {
        if let Some(c) = self.concepts.get_mut(&lti) {
            if c.history.last().is_none_or(|t| *t < now) {
                c.history.push(now);
            }
        }
    }

    /// Stores slots under `lti` (or a new concept) and records an access.
    pub fn store(&mut self, lti: Option<Lti>, slots: Vec<(Symbol, SlotValue)>, now: u64) -> Lti {
        let lti = match lti {
            Some(l) if self.concepts.contains_key(&l) => l,
            Some(l) => {
                self.next = self.next.max(l + 1);
                self.concepts.insert(
                    l,
                    Concept {
                        lti: l,
                        slots: Vec::new(),
                        history: Vec::new(),
                    },
                );
                l
            }
            None => self.allocate(now),
        };
        self.concepts.get_mut(&lti).expect("concept").slots = slots;
        self.touch(lti, now);
        lti
    }

    /// LTIs that `lti` links to through its slots.
    pub fn neighbours(&self, lti: Lti) -> BTreeSet<Lti> {
        self.concepts
            .get(&lti)
            .map(|c| {
                c.slots
                    .iter()
                    .filter_map(|(_, v)| match v {
                        SlotValue::Lti(l) => Some(*l),
                        SlotValue::Const(_) => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Activation received by each concept from the given sources.
    pub fn spread(&self, sources: &BTreeSet<Lti>) -> BTreeMap<Lti, f64> {
        let mut boost: BTreeMap<Lti, f64> = BTreeMap::new();
        let mut frontier: BTreeMap<Lti, f64> = sources
            .iter()
            .map(|s| (*s, self.config.spread_budget))
            .collect();
        for _ in 0..self.config.spread_depth {
            let mut next: BTreeMap<Lti, f64> = BTreeMap::new();
            for (src, amount) in &frontier {
                let n = self.neighbours(*src);
                if n.is_empty() {
                    continue;
                }
                let share = amount / n.len() as f64;
                for l in n {
                    *boost.entry(l).or_insert(0.0) += share;
                    *next.entry(l).or_insert(0.0) += share;
                }
            }
            frontier = next;
        }
        boost
    }

    fn contains_cue(c: &Concept, cue: &[(Symbol, CueValue)]) -> bool {
        cue.iter().all(|(attr, want)| {
            c.slots.iter().any(|(a, v)| {
                a == attr
                    && match (want, v) {
                        (CueValue::Any, _) => true,
                        (CueValue::Const(x), SlotValue::Const(y)) => x == y,
                        (CueValue::Lti(x), SlotValue::Lti(y)) => x == y,
                        _ => false,
                    }
            })
        })
    }

    /// Concepts containing every cue slot, in LTI order.
    pub fn candidates(&self, cue: &[(Symbol, CueValue)]) -> Vec<Lti> {
        self.concepts
            .values()
            .filter(|c| Self::contains_cue(c, cue))
            .map(|c| c.lti)
            .collect()
    }

    /// Total activation of a concept at `now`.
    pub fn activation(&self, lti: Lti, now: u64, spread: &BTreeMap<Lti, f64>) -> f64 {
        let base = self
            .concepts
            .get(&lti)
            .filter(|c| !c.history.is_empty())
            .map(|c| bla(&c.history, now, self.config.decay))
            .unwrap_or(f64::NEG_INFINITY);
        base + spread.get(&lti).copied().unwrap_or(0.0)
    }

    /// The winning concept without recording an access.
    pub fn rank(
        &mut self,
        cue: &[(Symbol, CueValue)],
        now: u64,
        in_wm: &BTreeSet<Lti>,
    ) -> std::result::Result<Lti, QueryFailure> {
        if cue.is_empty() {
            return Err(QueryFailure::Malformed);
        }
        let spread = self.spread(in_wm);
        let mut best: Option<(f64, u64, Lti)> = None;
        for lti in self.candidates(cue) {
            let mut a = self.activation(lti, now, &spread);
            if let Some(sd) = self.config.noise {
                let (u1, u2): (f64, f64) = (
                    self.noise_rng.gen::<f64>().max(f64::MIN_POSITIVE),
                    self.noise_rng.gen(),
                );
                a += sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            }
            let recent = self.concepts[&lti].history.last().copied().unwrap_or(0);
            let better = match best {
                None => true,
                Some((ba, br, bl)) => {
                    a > ba || (a == ba && (recent > br || (recent == br && lti < bl)))
                }
            };
            if better {
                best = Some((a, recent, lti));
            }
        }
        best.map(|(_, _, l)| l).ok_or(QueryFailure::NoMatch)
    }

    /// Retrieves the best concept for a cue and records the access.
    pub fn query(
        &mut self,
        cue: &[(Symbol, CueValue)],
        now: u64,
        in_wm: &BTreeSet<Lti>,
    ) -> std::result::Result<Lti, QueryFailure> {
        let lti = self.rank(cue, now, in_wm)?;
        self.touch(lti, now);
        Ok(lti)
    }

    /// Human-diffable text: one line per slot, one history line per concept.
    pub fn save(&self) -> String {
        let mut out = String::new();
        for c in self.concepts.values() {
            for (a, v) in &c.slots {
                let _ = writeln!(out, "(@{} ^{} {})", c.lti, a, v);
            }
            let _ = write!(out, "@{} history", c.lti);
            for t in &c.history {
                let _ = write!(out, " {t}");
            }
            out.push('\n');
        }
        out
    }

    pub fn load(text: &str, config: SmemConfig) -> Result<SemanticMemory> {
        let mut mem = SemanticMemory::new(config);
        let bad = |line: usize, message: &str| Error::Format {
            line,
            message: message.to_string(),
        };
        let parse_lti = |tok: &str| tok.strip_prefix('@').and_then(|n| n.parse::<Lti>().ok());
        let ensure = |mem: &mut SemanticMemory, l: Lti| {
            if let std::collections::btree_map::Entry::Vacant(e) = mem.concepts.entry(l) {
                e.insert(Concept {
                        lti: l,
                        slots: Vec::new(),
                        history: Vec::new(),
                    });
                mem.next = mem.next.max(l + 1);
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(body) = line.strip_prefix('(').and_then(|l| l.strip_suffix(')')) {
                let mut parts = body.splitn(3, ' ');
                let (Some(id), Some(attr), Some(value)) =
                    (parts.next(), parts.next(), parts.next())
                else {
                    return Err(bad(i + 1, "expected (@n ^attr value)"));
                };
                let lti = parse_lti(id).ok_or_else(|| bad(i + 1, "expected @n"))?;
                let attr = attr
                    .strip_prefix('^')
                    .ok_or_else(|| bad(i + 1, "expected ^attr"))?;
                let value = match parse_lti(value.trim()) {
                    Some(l) => {
                        ensure(&mut mem, l);
                        SlotValue::Lti(l)
                    }
                    None => SlotValue::Const(Symbol::parse_token(value.trim())),
                };
                ensure(&mut mem, lti);
                mem.concepts
                    .get_mut(&lti)
                    .expect("concept")
                    .slots
                    .push((Symbol::parse_token(attr), value));
            } else {
                let mut parts = line.split_whitespace();
                let lti = parts
                    .next()
                    .and_then(parse_lti)
                    .ok_or_else(|| bad(i + 1, "expected @n history"))?;
                if parts.next() != Some("history") {
                    return Err(bad(i + 1, "expected history"));
                }
                ensure(&mut mem, lti);
                let hist: std::result::Result<Vec<u64>, _> = parts.map(str::parse).collect();
                mem.concepts.get_mut(&lti).expect("concept").history =
                    hist.map_err(|_| bad(i + 1, "bad cycle"))?;
            }
        }
        Ok(mem)
    }
}
