use opcycle::engine::{Engine, EngineConfig};
use opcycle::symbol::{Ident, Symbol};

fn engine(src: &str) -> Engine {
    let mut e = Engine::new(EngineConfig::default());
    e.load_checked(src).unwrap();
    e
}

fn value(e: &Engine, id: Ident, attr: &str) -> Option<String> {
    e.wm().value(id, attr).map(|v| v.to_string())
}

fn run_until(e: &mut Engine, max: usize, done: impl Fn(&Engine) -> bool) {
    for _ in 0..max {
        if done(e) {
            return;
        }
        e.step().unwrap();
    }
    assert!(done(e), "condition not reached in {max} cycles");
}

const RECALL: &str = "
sp {propose-store (state <s> ^superstate nil) -(<s> ^stored yes) --> (<s> ^operator <o> +) (<o> ^name store)}
sp {apply-store (state <s> ^operator <o> ^smem <m>) (<o> ^name store) (<m> ^command <c>) --> (<c> ^store <f>) (<f> ^color red ^shape round) (<s> ^stored yes)}
sp {propose-query (state <s> ^stored yes ^smem <m>) (<m> ^result <r>) (<r> ^success <f>) -(<s> ^asked yes) --> (<s> ^operator <o> +) (<o> ^name query)}
sp {apply-query (state <s> ^operator <o> ^smem <m>) (<o> ^name query) (<m> ^command <c>) --> (<c> ^query <q>) (<q> ^color red) (<s> ^asked yes)}
sp {recall (state <s> ^smem <m>) (<m> ^result <r>) (<r> ^retrieved <l>) (<l> ^shape <sh>) --> (<s> ^recalled <sh>)}
";

#[test]
fn rules_store_and_recall_a_concept() {
    let mut e = engine(RECALL);
    let top = e.topstate();
    run_until(&mut e, 10, |e| e.wm().value(top, "recalled").is_some());
    assert_eq!(value(&e, top, "recalled").as_deref(), Some("round"));
    assert_eq!(e.smem.len(), 1);
    let saved = e.smem.save();
    assert!(
        saved.contains("^color red") && saved.contains("^shape round"),
        "{saved}"
    );
}

#[test]
fn unmatched_semantic_query_reports_failure() {
    let mut e = engine("");
    e.load_smem("(@1 ^color red)\n(@1 ^shape round)\n@1 history 0\n")
        .unwrap();
    let (_, command, result) = e.stack()[0].smem;
    let q = e.fresh_id('Q');
    e.add_wme(command, "query", Symbol::Id(q)).unwrap();
    e.add_wme(q, "color", Symbol::str("blue")).unwrap();
    run_until(&mut e, 3, |e| e.wm().value(result, "failure").is_some());
    assert_eq!(value(&e, result, "reason").as_deref(), Some("no-match"));

    let q2 = e.fresh_id('Q');
    e.add_wme(command, "query", Symbol::Id(q2)).unwrap();
    e.add_wme(q2, "color", Symbol::str("red")).unwrap();
    run_until(&mut e, 3, |e| e.wm().value(result, "success").is_some());
    let l = e
        .wm()
        .value(result, "retrieved")
        .unwrap()
        .as_ident()
        .unwrap();
    assert_eq!(value(&e, l, "shape").as_deref(), Some("round"));
    assert!(
        e.wm().value(result, "failure").is_none(),
        "old result cleared"
    );
}

const COUNTER: &str = "
sp {init (state <s> ^superstate nil) -(<s> ^ready true) --> (<s> ^operator <o> +) (<o> ^name init)}
sp {apply-init (state <s> ^operator <o>) (<o> ^name init) --> (<s> ^ready true ^count 0 ^succ <a> ^succ <b> ^succ <c>) (<a> ^from 0 ^to 1) (<b> ^from 1 ^to 2) (<c> ^from 2 ^to 3)}
sp {propose-count (state <s> ^count { <c> < 3 }) --> (<s> ^operator <o> +) (<o> ^name count)}
sp {apply-count (state <s> ^operator <o> ^count <c> ^succ <p>) (<o> ^name count) (<p> ^from <c> ^to <n>) --> (<s> ^count <c> -) (<s> ^count <n>)}
";

struct Epmem {
    command: Ident,
    result: Ident,
}

impl Epmem {
    fn of(e: &Engine) -> Self {
        let (_, command, result) = e.stack()[0].epmem;
        Epmem { command, result }
    }

    /// Issues one command, clearing earlier ones, and waits for its result.
    fn ask(&self, e: &mut Engine, attr: &str, value: Symbol) {
        self.ask_with(e, attr, value, &[]);
    }

    fn ask_with(&self, e: &mut Engine, attr: &str, value: Symbol, cue: &[(&str, Symbol)]) {
        for (a, v) in e
            .wm()
            .iter()
            .filter(|x| x.wme.id == self.command)
            .map(|x| (x.wme.attr.to_string(), x.wme.value.clone()))
            .collect::<Vec<_>>()
        {
            e.remove_wme(self.command, &a, &v);
        }
        e.add_wme(self.command, attr, value.clone()).unwrap();
        for (a, v) in cue {
            e.add_wme(value.as_ident().unwrap(), a, v.clone()).unwrap();
        }
        let (result, v) = (self.result, value);
        run_until(e, 3, |e| {
            [
                e.wm().values(result, "success"),
                e.wm().values(result, "failure"),
            ]
            .concat()
            .contains(&v)
        });
    }

    fn count(&self, e: &Engine) -> Option<String> {
        let r = e.wm().value(self.result, "retrieved")?.as_ident()?;
        value(e, r, "count")
    }
}

#[test]
fn episodic_query_and_stepping_through_episodes() {
    let mut e = engine(COUNTER);
    e.run(5).unwrap();
    let m = Epmem::of(&e);
    let q = e.fresh_id('Q');
    m.ask_with(&mut e, "query", Symbol::Id(q), &[("count", Symbol::Int(1))]);
    assert_eq!(value(&e, m.result, "cycle").as_deref(), Some("1"));
    assert_eq!(value(&e, m.result, "match-score").as_deref(), Some("1"));
    assert_eq!(m.count(&e).as_deref(), Some("1"));

    m.ask(&mut e, "next", Symbol::str("yes"));
    assert_eq!(value(&e, m.result, "cycle").as_deref(), Some("2"));
    assert_eq!(m.count(&e).as_deref(), Some("2"));

    m.ask(&mut e, "previous", Symbol::str("back"));
    m.ask(&mut e, "previous", Symbol::str("again"));
    assert_eq!(value(&e, m.result, "cycle").as_deref(), Some("0"));
    assert_eq!(m.count(&e).as_deref(), Some("0"));

    m.ask(&mut e, "previous", Symbol::str("once-more"));
    assert_eq!(value(&e, m.result, "reason").as_deref(), Some("boundary"));

    m.ask(&mut e, "retrieve", Symbol::Int(999));
    assert_eq!(
        value(&e, m.result, "reason").as_deref(),
        Some("out-of-range")
    );
}

#[test]
fn stepping_without_a_current_episode_fails() {
    let mut e = engine(COUNTER);
    e.run(2).unwrap();
    let m = Epmem::of(&e);
    m.ask(&mut e, "next", Symbol::str("yes"));
    assert_eq!(
        value(&e, m.result, "reason").as_deref(),
        Some("no-current-episode")
    );
}

#[test]
fn retrieved_episode_uses_fresh_identifiers() {
    let mut e = engine(COUNTER);
    e.run(3).unwrap();
    let m = Epmem::of(&e);
    m.ask(&mut e, "retrieve", Symbol::Int(1));
    let root = e
        .wm()
        .value(m.result, "retrieved")
        .unwrap()
        .as_ident()
        .unwrap();
    assert_ne!(root, e.topstate());
    let succ = e.wm().values(root, "succ");
    assert_eq!(succ.len(), 3);
    let live: Vec<Symbol> = e.wm().values(e.topstate(), "succ");
    assert!(succ.iter().all(|s| !live.contains(s)));
    assert!(e.wm().values(root, "io").len() == 1);
    assert!(e.wm().values(root, "epmem").is_empty() && e.wm().values(root, "smem").is_empty());
}
