use opcycle::engine::{Engine, EngineConfig};
use opcycle::env::{EnvDelta, ScriptedEnv, StdioEnv};
use opcycle::error::Error;
use opcycle::symbol::Symbol;

const THERMOSTAT: &str = "
sp {propose-heat (state <s> ^io <io>) (<io> ^input-link <i>) (<i> ^temp { <t> < 18 }) --> (<s> ^operator <o> +) (<o> ^name heat)}
sp {apply-heat (state <s> ^operator <o> ^io <io>) (<o> ^name heat) (<io> ^output-link <out>) --> (<out> ^heat on)}
";

fn engine(src: &str) -> Engine {
    let mut e = Engine::new(EngineConfig::default());
    e.load_checked(src).unwrap();
    e
}

#[test]
fn child_process_sees_output_and_feeds_input() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("seen.txt");
    let script = format!(
        r#"while read line; do
  case "$line" in
    "sync 0") echo "add (input-link ^temp 15)"; echo done ;;
    sync*) echo done ;;
    *) echo "$line" >> {} ;;
  esac
done"#,
        log.display()
    );
    let mut e = engine(THERMOSTAT);
    e.set_environment(Box::new(StdioEnv::spawn_shell(&script).unwrap()));
    e.run(3).unwrap();
    assert_eq!(e.wm().values(e.input_link(), "temp"), vec![Symbol::Int(15)]);
    drop(e.take_environment());
    let seen = std::fs::read_to_string(&log).unwrap();
    assert_eq!(seen.trim(), "add (O1 ^heat on)");
}

#[test]
fn exited_environment_freezes_input_and_the_agent_keeps_running() {
    let script = r#"read line; echo "add (input-link ^temp 10)"; echo done"#;
    let mut e = engine(THERMOSTAT);
    e.set_environment(Box::new(StdioEnv::spawn_shell(script).unwrap()));
    let reports = e.run(4).unwrap();
    assert_eq!(reports.len(), 4);
    assert_eq!(e.wm().values(e.input_link(), "temp"), vec![Symbol::Int(10)]);
    assert!(!e.wm().values(e.output_link(), "heat").is_empty());
}

#[test]
fn malformed_environment_line_is_a_protocol_error() {
    let mut e = engine(THERMOSTAT);
    e.set_environment(Box::new(
        StdioEnv::spawn_shell("read line; echo 'put (input-link ^temp 3)'; read line").unwrap(),
    ));
    assert!(matches!(e.step(), Err(Error::Protocol(_))));
}

#[test]
fn environment_identifiers_build_nested_input() {
    let script = vec![
        (0, EnvDelta::add("input-link", "sensor", "E1")),
        (0, EnvDelta::add("E1", "range", 4)),
        (0, EnvDelta::add("E1", "heading", "north")),
        (2, EnvDelta::remove("input-link", "sensor", "E1")),
    ];
    let mut e = engine(
        "sp {near (state <s> ^io <io>) (<io> ^input-link <i>) (<i> ^sensor <x>) (<x> ^range { <r> < 5 }) --> (<s> ^near yes)}",
    );
    e.set_environment(Box::new(ScriptedEnv {
        script,
        received: Vec::new(),
    }));
    e.step().unwrap();
    e.step().unwrap();
    let top = e.topstate();
    assert_eq!(e.wm().values(top, "near"), vec![Symbol::str("yes")]);
    let sensor = e
        .wm()
        .value(e.input_link(), "sensor")
        .unwrap()
        .as_ident()
        .unwrap();
    assert_eq!(e.wm().value(sensor, "heading"), Some(Symbol::str("north")));
    e.step().unwrap();
    e.step().unwrap();
    assert!(e.wm().values(top, "near").is_empty());
    assert!(
        e.wm().iter().all(|x| x.wme.id != sensor),
        "unreachable input structure collected"
    );
}

#[test]
fn output_command_outlives_its_operator() {
    let mut e = engine(THERMOSTAT);
    let script = vec![
        (0, EnvDelta::add("input-link", "temp", 12)),
        (2, EnvDelta::remove("input-link", "temp", 12)),
    ];
    e.set_environment(Box::new(ScriptedEnv {
        script,
        received: Vec::new(),
    }));
    e.run(5).unwrap();
    // the operator retracts once the input goes away, the command stays
    assert_eq!(
        e.wm().values(e.output_link(), "heat"),
        vec![Symbol::str("on")]
    );
}
