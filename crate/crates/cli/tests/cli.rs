use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn agent(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "agents", name]
        .iter()
        .collect();
    p.display().to_string()
}

fn opcycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opcycle"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn blocks_agent_builds_the_tower_and_halts() {
    let script = format!(
        "load {}; run --until-halt; print --wm",
        agent("blocks.soar")
    );
    let o = opcycle(&["-c", &script]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("halted at cycle"), "{out}");
    for line in [
        "(A1 ^on B1)",
        "(B1 ^on C3)",
        "(C3 ^on T1)",
        "(A1 ^in-place true)",
        "(B1 ^in-place true)",
        "(C3 ^in-place true)",
    ] {
        assert!(out.contains(line), "missing {line} in\n{out}");
    }
}

#[test]
fn stepping_into_a_tie_shows_the_substate() {
    let script = format!("load {}; step 3; print --stack", agent("blocks.soar"));
    let o = opcycle(&["--watch", "0", "-c", &script]);
    assert!(o.status.success());
    let out = stdout(&o);
    let stack: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("S1")).collect();
    assert_eq!(stack.len(), 2, "{out}");
    assert!(stack[1].trim_start().starts_with("S2 (tie"), "{out}");
}

#[test]
fn same_seed_gives_the_same_trace() {
    let script = format!("seed 11; load {}; run --until-halt", agent("blocks.soar"));
    let a = stdout(&opcycle(&["--watch", "2", "-c", &script]));
    let b = stdout(&opcycle(&["--watch", "2", "-c", &script]));
    assert_eq!(a, b);
    let other = format!("seed 12; load {}; run --until-halt", agent("blocks.soar"));
    let c = stdout(&opcycle(&["--watch", "2", "-c", &other]));
    assert!(c.contains("halted at cycle"));
}

#[test]
fn unknown_command_fails_with_usage() {
    let o = opcycle(&["-c", "load-everything"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("unknown command: load-everything") && err.contains("print --wm"),
        "{err}"
    );
}

#[test]
fn script_file_runs_line_by_line_and_stops_at_quit() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("session.txt");
    let log = dir.path().join("episodes.log");
    std::fs::write(
        &script,
        format!(
            "# hierarchy demo\nwatch 0\nload {}\nepmem --log {}\nrun --max-cycles 4\nprint --stack\nquit\nnot-reached\n",
            agent("hierarchy.soar"),
            log.display()
        ),
    )
    .unwrap();
    let o = opcycle(&[script.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(&log).unwrap();
    assert_eq!(
        records.lines().filter(|l| l.starts_with("C ")).count(),
        4,
        "{records}"
    );

    let replay = format!(
        "watch 0; epmem --load {}; epmem --replay 0 0",
        log.display()
    );
    let o = opcycle(&["-c", &replay]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("^io"), "{}", stdout(&o));
}

#[test]
fn commands_can_come_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_opcycle"))
        .arg("-")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let text = format!(
        "load {}\nprint --rule blocks*apply*move\n",
        agent("blocks.soar")
    );
    child
        .stdin
        .take()
        .unwrap()
        .write_all(text.as_bytes())
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("sp {blocks*apply*move"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn bandit_agent_learns_against_a_child_environment() {
    let exe = env!("CARGO_BIN_EXE_opcycle");
    let mut script = format!(
        "watch 0; seed 3; load {}; env --stdio {exe} --bandit-env; run",
        agent("bandit.soar")
    );
    for _ in 1..30 {
        script.push_str("; init; run");
    }
    script.push_str("; rl stats");
    let o = opcycle(&["-c", &script]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.matches("halted at cycle").count(), 30, "{out}");
    let value = |arm: &str| -> f64 {
        let line = out
            .lines()
            .find(|l| l.starts_with(&format!("bandit*rl*{arm}\t")))
            .unwrap();
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    assert!(value("left") > 0.9 && value("right") < 0.1, "{out}");
}

#[test]
fn json_reports_one_object_per_cycle() {
    let script = format!("load {}; step 2 --json", agent("blocks.soar"));
    let o = opcycle(&["--watch", "0", "-c", &script]);
    assert!(o.status.success());
    let out = stdout(&o);
    let reports: Vec<&str> = out.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(reports.len(), 2, "{out}");
    assert!(
        reports[0].contains("\"cycle\":0") && reports[1].contains("\"cycle\":1"),
        "{out}"
    );
}
