//! The decision cycle: input, elaboration, operator selection, operator
//! application and output, with substates, learning and long-term memory.

mod buffers;
mod cycle;
mod decision;
mod results;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chunking::{ChunkRecord, NegatedTest, TraceInst};
use crate::decide::{Exploration, ImpasseKind, Pref};
use crate::env::{EnvDelta, Environment};
use crate::epmem::{EpisodicMemory, EpmemConfig};
use crate::error::{Error, Result};
use crate::matcher::{Bindings, Matcher, RuleId, Token};
use crate::rl::{PendingUpdate, RlConfig, RlStats};
use crate::rule::{canonical_text, parse_agent_file, Diagnostic, Rule};
use crate::smem::{SemanticMemory, SmemConfig};
use crate::symbol::{Ident, Symbol};
use crate::trace::{CycleReport, Trace};
use crate::wm::{ArchKind, InstId, Support, Timetag, WorkingMemory};

pub use buffers::BufferWrite;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub max_elaborations: usize,
    /// Deepest allowed state; the topstate is depth 0.
    pub max_depth: usize,
    pub seed: u64,
    pub learning: bool,
    pub exploration: Exploration,
    pub rl: RlConfig,
    pub smem: SmemConfig,
    pub epmem: EpmemConfig,
    pub watch: u8,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_elaborations: 100,
            max_depth: 100,
            seed: 0,
            learning: false,
            exploration: Exploration::default(),
            rl: RlConfig::default(),
            smem: SmemConfig::default(),
            epmem: EpmemConfig::on(),
            watch: 0,
        }
    }
}

pub type PrefId = u64;

#[derive(Clone, Debug, PartialEq)]
pub struct PrefRecord {
    pub id: PrefId,
    pub state: Ident,
    pub pref: Pref,
    pub owner: InstId,
    /// Set when the preference came from an RL rule.
    pub rl_rule: Option<RuleId>,
    /// The `(S ^operator O +)` WME mirroring an acceptable preference.
    pub mirror: Option<Timetag>,
}

#[derive(Clone, Debug)]
pub(crate) struct Inst {
    pub rule: Option<RuleId>,
    pub name: String,
    pub token: Token,
    pub level: usize,
    pub trace: TraceInst,
    pub created: Vec<Timetag>,
    pub prefs: Vec<PrefId>,
    pub live: bool,
}

/// One entry of the state stack.
#[derive(Clone, Debug)]
pub struct StateRec {
    pub id: Ident,
    /// Why this state exists; `None` for the topstate.
    pub impasse: Option<(ImpasseKind, Vec<Symbol>)>,
    pub items: BTreeMap<Symbol, Timetag>,
    pub operator: Option<(Symbol, Timetag)>,
    /// An application rule fired in this state since the last selection.
    pub applied: bool,
    /// A numeric-preference choice was made here.
    pub stochastic: bool,
    pub smem: (Ident, Ident, Ident),
    pub epmem: (Ident, Ident, Ident),
    pub reward_link: Ident,
    pub archive: Vec<InstId>,
    pub epmem_cursor: Option<u64>,
    pub reward_read: bool,
}

pub struct Engine {
    pub config: EngineConfig,
    pub(crate) wm: WorkingMemory,
    matcher: Matcher,
    rules: Vec<Option<Rc<Rule>>>,
    rule_ids: BTreeMap<String, RuleId>,
    canon: HashMap<String, RuleId>,
    insts: HashMap<InstId, Inst>,
    live: HashMap<(RuleId, Token), InstId>,
    next_inst: u64,
    prefs: BTreeMap<PrefId, PrefRecord>,
    prefs_by_state: HashMap<Ident, BTreeSet<PrefId>>,
    next_pref: PrefId,
    stack: Vec<StateRec>,
    pending_fire: BTreeMap<(RuleId, Token), Bindings>,
    pending_retract: BTreeSet<InstId>,
    just_deps: HashMap<Timetag, BTreeSet<InstId>>,
    /// Negated superstate tests of live justifications, by identifier.
    just_negs: HashMap<Ident, Vec<(InstId, NegatedTest)>>,
    rng: ChaCha8Rng,
    cycle: u64,
    halted: bool,
    gc_needed: bool,
    rl_pending: HashMap<Ident, PendingUpdate>,
    pub rl_stats: RlStats,
    pub smem: SemanticMemory,
    pub epmem: EpisodicMemory,
    env: Option<Box<dyn Environment>>,
    input_queue: Vec<EnvDelta>,
    buffer_queue: Vec<BufferWrite>,
    env_ids: HashMap<String, Ident>,
    sent_output: BTreeMap<Timetag, EnvDelta>,
    processed: HashSet<Timetag>,
    io: (Ident, Ident, Ident),
    trace: Trace,
    report: CycleReport,
    chunk_log: Vec<String>,
    chunk_records: Vec<ChunkRecord>,
    chunk_count: usize,
    refusals: Vec<String>,
    impasse_count: usize,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Engine {
        let mut e = Engine {
            wm: WorkingMemory::new(),
            matcher: Matcher::new(),
            rules: Vec::new(),
            rule_ids: BTreeMap::new(),
            canon: HashMap::new(),
            insts: HashMap::new(),
            live: HashMap::new(),
            next_inst: 1,
            prefs: BTreeMap::new(),
            prefs_by_state: HashMap::new(),
            next_pref: 1,
            stack: Vec::new(),
            pending_fire: BTreeMap::new(),
            pending_retract: BTreeSet::new(),
            just_deps: HashMap::new(),
            just_negs: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            cycle: 0,
            halted: false,
            gc_needed: false,
            rl_pending: HashMap::new(),
            rl_stats: RlStats::default(),
            smem: SemanticMemory::new(config.smem),
            epmem: EpisodicMemory::new(config.epmem.clone()),
            env: None,
            input_queue: Vec::new(),
            buffer_queue: Vec::new(),
            env_ids: HashMap::new(),
            sent_output: BTreeMap::new(),
            processed: HashSet::new(),
            io: (Ident::new('L', 1), Ident::new('I', 1), Ident::new('O', 1)),
            trace: Trace::new(config.watch),
            report: CycleReport::default(),
            chunk_log: Vec::new(),
            chunk_records: Vec::new(),
            chunk_count: 0,
            refusals: Vec::new(),
            impasse_count: 0,
            config,
        };
        e.init_topstate();
        e
    }

    fn init_topstate(&mut self) {
        let s1 = self.wm.fresh_id('S');
        self.wm.register_state(s1);
        let arch = || Support::Arch(ArchKind::Structure);
        self.wm.add(
            s1,
            Symbol::str("superstate"),
            Symbol::str("nil"),
            false,
            arch(),
            None,
        );
        let io = self.wm.fresh_id('L');
        let input = self.wm.fresh_id('I');
        let output = self.wm.fresh_id('O');
        self.wm
            .add(s1, Symbol::str("io"), Symbol::Id(io), false, arch(), None);
        self.wm.add(
            io,
            Symbol::str("input-link"),
            Symbol::Id(input),
            false,
            arch(),
            None,
        );
        self.wm.add(
            io,
            Symbol::str("output-link"),
            Symbol::Id(output),
            false,
            arch(),
            None,
        );
        self.io = (io, input, output);
        self.env_ids.insert("input-link".into(), input);
        self.env_ids.insert("output-link".into(), output);
        self.env_ids.insert(input.to_string(), input);
        self.env_ids.insert(output.to_string(), output);
        let rec = self.state_skeleton(s1);
        self.stack.push(rec);
        self.epmem.set_root(s1);
    }

    /// Creates the buffers every state carries.
    fn state_skeleton(&mut self, s: Ident) -> StateRec {
        let arch = || Support::Arch(ArchKind::Structure);
        let buffer = |wm: &mut WorkingMemory, attr: &str, letter: char| {
            let b = wm.fresh_id(letter);
            let c = wm.fresh_id('C');
            let r = wm.fresh_id('R');
            wm.add(s, Symbol::str(attr), Symbol::Id(b), false, arch(), None);
            wm.add(
                b,
                Symbol::str("command"),
                Symbol::Id(c),
                false,
                arch(),
                None,
            );
            wm.add(b, Symbol::str("result"), Symbol::Id(r), false, arch(), None);
            (b, c, r)
        };
        let smem = buffer(&mut self.wm, "smem", 'M');
        let epmem = buffer(&mut self.wm, "epmem", 'E');
        let rl = self.wm.fresh_id('R');
        self.wm.add(
            s,
            Symbol::str("reward-link"),
            Symbol::Id(rl),
            false,
            arch(),
            None,
        );
        StateRec {
            id: s,
            impasse: None,
            items: BTreeMap::new(),
            operator: None,
            applied: false,
            stochastic: false,
            smem,
            epmem,
            reward_link: rl,
            archive: Vec::new(),
            epmem_cursor: None,
            reward_read: false,
        }
    }

    /// Clears working memory and all run state, keeping rules (with their
    /// learned values), chunks and long-term memories. The cycle counter
    /// keeps counting so episodes stay in order.
    pub fn reinit(&mut self) {
        self.wm = WorkingMemory::new();
        self.matcher = Matcher::new();
        self.insts.clear();
        self.live.clear();
        self.prefs.clear();
        self.prefs_by_state.clear();
        self.stack.clear();
        self.pending_fire.clear();
        self.pending_retract.clear();
        self.just_deps.clear();
        self.just_negs.clear();
        self.halted = false;
        self.gc_needed = false;
        self.rl_pending.clear();
        self.input_queue.clear();
        self.buffer_queue.clear();
        self.env_ids.clear();
        self.sent_output.clear();
        self.processed.clear();
        self.init_topstate();
        if let Some(env) = self.env.as_mut() {
            env.reset();
        }
        for id in 0..self.rules.len() {
            if let Some(rule) = &self.rules[id] {
                for m in self.matcher.add_rule(id, rule, &self.wm) {
                    self.pending_fire.insert((m.rule, m.token), m.bindings);
                }
            }
        }
        self.wm.take_changes();
    }

    /// Parses and adds rules. Well-formed rules are loaded even when other
    /// blocks have diagnostics.
    pub fn load_str(&mut self, text: &str) -> (usize, Vec<Diagnostic>) {
        let (rules, diags) = parse_agent_file(text);
        let n = rules.len();
        for r in rules {
            self.add_rule(r);
        }
        (n, diags)
    }

    /// Like [`Engine::load_str`] but any diagnostic is an error.
    pub fn load_checked(&mut self, text: &str) -> Result<usize> {
        let (rules, diags) = parse_agent_file(text);
        if !diags.is_empty() {
            return Err(Error::Load(diags));
        }
        let n = rules.len();
        for r in rules {
            self.add_rule(r);
        }
        Ok(n)
    }

    /// Inserts a rule; it matches immediately against working memory. A
    /// rule with an existing name replaces the old one.
    pub fn add_rule(&mut self, rule: Rule) -> RuleId {
        if let Some(old) = self.rule_ids.get(&rule.name).copied() {
            log::warn!("rule {} replaced", rule.name);
            self.excise(old);
        }
        let id = self.rules.len();
        for m in self.matcher.add_rule(id, &rule, &self.wm) {
            self.pending_fire.insert((m.rule, m.token), m.bindings);
        }
        self.rule_ids.insert(rule.name.clone(), id);
        self.canon.insert(canonical_text(&rule), id);
        self.rules.push(Some(Rc::new(rule)));
        id
    }

    /// Removes a rule, retracting its live instantiations at the next wave.
    pub fn excise(&mut self, id: RuleId) {
        let Some(rule) = self.rules.get_mut(id).and_then(Option::take) else {
            return;
        };
        self.rule_ids.remove(&rule.name);
        self.canon.remove(&canonical_text(&rule));
        for token in self.matcher.remove_rule(id) {
            let key = (id, token);
            self.pending_fire.remove(&key);
            if let Some(inst) = self.live.get(&key) {
                self.pending_retract.insert(*inst);
            }
        }
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rule_ids
            .get(name)
            .and_then(|id| self.rules[*id].as_deref())
    }

    pub fn rule_id(&self, name: &str) -> Option<RuleId> {
        self.rule_ids.get(name).copied()
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().flatten().map(|r| &**r)
    }

    pub fn set_environment(&mut self, env: Box<dyn Environment>) {
        self.env = Some(env);
    }

    pub fn take_environment(&mut self) -> Option<Box<dyn Environment>> {
        self.env.take()
    }

    pub fn seed(&mut self, seed: u64) {
        self.config.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn set_watch(&mut self, level: u8) {
        self.config.watch = level;
        self.trace.level = level;
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.take()
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    pub fn wm(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn topstate(&self) -> Ident {
        self.stack[0].id
    }

    pub fn input_link(&self) -> Ident {
        self.io.1
    }

    pub fn output_link(&self) -> Ident {
        self.io.2
    }

    pub fn stack(&self) -> &[StateRec] {
        &self.stack
    }

    pub fn selected_operator(&self, depth: usize) -> Option<&Symbol> {
        self.stack
            .get(depth)
            .and_then(|s| s.operator.as_ref().map(|(o, _)| o))
    }

    /// Total substates created since the engine started.
    pub fn impasse_count(&self) -> usize {
        self.impasse_count
    }

    pub fn chunk_log(&self) -> String {
        self.chunk_log.concat()
    }

    pub fn chunk_records(&self) -> &[ChunkRecord] {
        &self.chunk_records
    }

    pub fn chunking_refusals(&self) -> &[String] {
        &self.refusals
    }

    pub fn chunks(&self) -> impl Iterator<Item = &Rule> {
        self.rules()
            .filter(|r| r.provenance == crate::rule::Provenance::Chunk)
    }

    /// Adds an o-supported WME from outside the cycle, as an environment would.
    pub fn add_wme(&mut self, id: Ident, attr: &str, value: Symbol) -> Result<Timetag> {
        self.wm
            .add_wme(id, Symbol::parse_token(attr), value, Support::O)
    }

    pub fn fresh_id(&mut self, letter: char) -> Ident {
        self.wm.fresh_id(letter)
    }

    /// Removes a WME from outside the cycle.
    pub fn remove_wme(&mut self, id: Ident, attr: &str, value: &Symbol) -> bool {
        match self.wm.find(id, &Symbol::parse_token(attr), value, false) {
            Some(tt) => {
                if matches!(self.wm.get(tt), Some(w) if w.value.is_ident()) {
                    self.gc_needed = true;
                }
                self.wm.remove(tt).is_some()
            }
            None => false,
        }
    }

    /// Queues input deltas as if the environment had sent them.
    pub fn queue_input(&mut self, deltas: impl IntoIterator<Item = EnvDelta>) {
        self.input_queue.extend(deltas);
    }

    /// Live preferences for a state, in creation order.
    pub fn preferences(&self, state: Ident) -> Vec<&PrefRecord> {
        self.prefs_by_state
            .get(&state)
            .map(|ids| ids.iter().map(|i| &self.prefs[i]).collect())
            .unwrap_or_default()
    }

    pub(crate) fn prefs_of(&self, state: Ident) -> Vec<Pref> {
        self.preferences(state)
            .into_iter()
            .map(|p| p.pref.clone())
            .collect()
    }

    pub fn state_ids(&self) -> Vec<Ident> {
        self.stack.iter().map(|s| s.id).collect()
    }

    pub fn print_wm(&self, with_timetags: bool) -> String {
        self.wm.dump(&self.state_ids(), with_timetags)
    }

    pub fn print_prefs(&self, state: Ident) -> String {
        let mut out = String::new();
        for p in self.preferences(state) {
            let action = crate::rule::Action::Pref {
                state: p.state.to_string(),
                op: p.pref.op.to_string(),
                kind: p.pref.kind,
                referent: p.pref.referent.as_ref().map(|r| r.to_string()),
                value: p.pref.value,
            };
            let name = self
                .insts
                .get(&p.owner)
                .map(|i| i.name.as_str())
                .unwrap_or("?");
            let _ = writeln!(out, "{action}  [{name}]");
        }
        out
    }

    pub fn print_stack(&self) -> String {
        let mut out = String::new();
        for (d, s) in self.stack.iter().enumerate() {
            let indent = "  ".repeat(d);
            let why = match &s.impasse {
                None => String::new(),
                Some((k, items)) if items.is_empty() => format!(" ({})", k.name()),
                Some((k, items)) => {
                    format!(
                        " ({} {})",
                        k.name(),
                        items
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(" ")
                    )
                }
            };
            let op = s
                .operator
                .as_ref()
                .map(|(o, _)| format!(" O: {o}"))
                .unwrap_or_default();
            let _ = writeln!(out, "{indent}{}{why}{op}", s.id);
        }
        out
    }

    /// `name<TAB>value<TAB>updates<TAB>last-delta`, one line per RL rule.
    pub fn rl_stats(&self) -> String {
        let mut out = String::from("rule\tvalue\tupdates\tlast_delta\n");
        let mut names: Vec<&Rule> = self.rules().filter(|r| r.rl).collect();
        names.sort_by(|a, b| a.name.cmp(&b.name));
        for r in names {
            let s = self
                .rl_stats
                .by_rule
                .get(&r.name)
                .cloned()
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.name,
                r.rl_value().unwrap_or(0.0),
                s.updates,
                s.last_delta
            );
        }
        out
    }

    pub fn rl_value(&self, rule: &str) -> Option<f64> {
        self.rule(rule).and_then(Rule::rl_value)
    }

    /// Pretty-prints episodes `from..=to`.
    pub fn epmem_replay(&self, from: u64, to: u64) -> String {
        let mut out = String::new();
        for c in from..=to {
            match self.epmem.reconstruct(c) {
                Some(keys) => {
                    let _ = writeln!(out, "# episode {c}");
                    for k in keys {
                        let _ = writeln!(out, "{}", crate::epmem::key_text(&k));
                    }
                }
                None => {
                    let _ = writeln!(out, "# episode {c} not recorded");
                }
            }
        }
        out
    }

    /// Rebuilds episodic memory from a log and resumes numbering after it.
    pub fn load_epmem_log(&mut self, text: &str) -> Result<()> {
        let mut mem = EpisodicMemory::load_log(text, self.config.epmem.clone())?;
        mem.set_root(self.topstate());
        if let Some(l) = mem.latest() {
            self.cycle = self.cycle.max(l + 1);
        }
        self.epmem = mem;
        Ok(())
    }

    pub fn load_smem(&mut self, text: &str) -> Result<()> {
        self.smem = SemanticMemory::load(text, self.config.smem)?;
        Ok(())
    }

    fn new_inst_id(&mut self) -> InstId {
        let id = InstId(self.next_inst);
        self.next_inst += 1;
        id
    }

    fn depth_of(&self, state: Ident) -> Option<usize> {
        self.stack.iter().position(|s| s.id == state)
    }
}
