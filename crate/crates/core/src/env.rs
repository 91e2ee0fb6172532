//! The line protocol spoken with external environments.
//!
//! Each output phase the engine writes the output-link additions and
//! removals as `add (<id> ^<attr> <value>)` / `remove (...)` lines followed
//! by `sync <cycle>`. The environment answers with input deltas and a
//! closing `done`.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use crate::error::{Error, Result};
use crate::symbol::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaOp {
    Add,
    Remove,
}

/// One triple crossing the boundary. Identifier tokens are kept as text:
/// `input-link` and `output-link` name the link roots.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvDelta {
    pub op: DeltaOp,
    pub id: String,
    pub attr: Symbol,
    pub value: String,
}

impl EnvDelta {
    pub fn add(id: &str, attr: &str, value: impl fmt::Display) -> Self {
        EnvDelta {
            op: DeltaOp::Add,
            id: id.to_string(),
            attr: Symbol::str(attr),
            value: value.to_string(),
        }
    }

    pub fn remove(id: &str, attr: &str, value: impl fmt::Display) -> Self {
        EnvDelta {
            op: DeltaOp::Remove,
            id: id.to_string(),
            attr: Symbol::str(attr),
            value: value.to_string(),
        }
    }
}

impl fmt::Display for EnvDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            DeltaOp::Add => "add",
            DeltaOp::Remove => "remove",
        };
        write!(f, "{op} ({} ^{} {})", self.id, self.attr, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Delta(EnvDelta),
    Sync(u64),
    Done,
}

pub fn parse_line(line: &str) -> Result<Message> {
    let bad = |m: &str| Error::Protocol(format!("{m}: {line:?}"));
    let line = line.trim();
    if line == "done" {
        return Ok(Message::Done);
    }
    if let Some(n) = line.strip_prefix("sync ") {
        return n
            .trim()
            .parse()
            .map(Message::Sync)
            .map_err(|_| bad("bad cycle"));
    }
    let (op, rest) = if let Some(r) = line.strip_prefix("add ") {
        (DeltaOp::Add, r)
    } else if let Some(r) = line.strip_prefix("remove ") {
        (DeltaOp::Remove, r)
    } else {
        return Err(bad("unknown message"));
    };
    let body = rest
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| bad("expected (id ^attr value)"))?;
    let mut parts = body.trim().splitn(3, char::is_whitespace);
    let id = parts
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("missing identifier"))?;
    let attr = parts
        .next()
        .and_then(|a| a.strip_prefix('^'))
        .filter(|a| !a.is_empty())
        .ok_or_else(|| bad("missing ^attr"))?;
    let value = parts
        .next()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| bad("missing value"))?;
    Ok(Message::Delta(EnvDelta {
        op,
        id: id.to_string(),
        attr: Symbol::parse_token(attr),
        value: value.to_string(),
    }))
}

/// An environment exchanging deltas with the agent at each output phase.
pub trait Environment {
    /// Receives this cycle's output changes and returns input changes,
    /// applied at the next input phase.
    fn exchange(&mut self, cycle: u64, output: &[EnvDelta]) -> Result<Vec<EnvDelta>>;

    /// Called when the agent is reinitialized.
    fn reset(&mut self) {}
}

/// An environment in a child process, spoken to over its standard streams.
pub struct StdioEnv {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    frozen: bool,
}

impl StdioEnv {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(StdioEnv {
            child,
            stdin,
            stdout,
            frozen: false,
        })
    }

    /// Spawns a shell command line.
    pub fn spawn_shell(cmdline: &str) -> Result<Self> {
        Self::spawn("sh", &["-c".to_string(), cmdline.to_string()])
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn freeze(&mut self, why: &str) {
        if !self.frozen {
            log::warn!("environment process {why}; input frozen");
            self.frozen = true;
            self.stdin = None;
        }
    }
}

impl Environment for StdioEnv {
    fn exchange(&mut self, cycle: u64, output: &[EnvDelta]) -> Result<Vec<EnvDelta>> {
        if self.frozen {
            return Ok(Vec::new());
        }
        let mut text = String::new();
        for d in output {
            text.push_str(&d.to_string());
            text.push('\n');
        }
        text.push_str(&format!("sync {cycle}\n"));
        let sent = match self.stdin.as_mut() {
            Some(w) => w.write_all(text.as_bytes()).and_then(|_| w.flush()).is_ok(),
            None => false,
        };
        if !sent {
            self.freeze("closed its input");
            return Ok(Vec::new());
        }
        let mut input = Vec::new();
        loop {
            let mut line = String::new();
            if self.stdout.read_line(&mut line)? == 0 {
                self.freeze("exited");
                return Ok(input);
            }
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line)? {
                Message::Done => return Ok(input),
                Message::Delta(d) => input.push(d),
                Message::Sync(_) => return Err(Error::Protocol("environment sent sync".into())),
            }
        }
    }
}

impl Drop for StdioEnv {
    fn drop(&mut self) {
        self.stdin = None;
        let _ = self.child.wait();
    }
}

/// Runs an environment on this process's standard streams: reads the
/// engine's messages, answers each `sync` with the environment's deltas.
pub fn serve(env: &mut dyn Environment, input: impl BufRead, mut output: impl Write) -> Result<()> {
    let mut pending = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line)? {
            Message::Delta(d) => pending.push(d),
            Message::Sync(cycle) => {
                for d in env.exchange(cycle, &pending)? {
                    writeln!(output, "{d}")?;
                }
                writeln!(output, "done")?;
                output.flush()?;
                pending.clear();
            }
            Message::Done => return Err(Error::Protocol("engine sent done".into())),
        }
    }
    Ok(())
}

/// Two-armed bandit: a pull command on the output link is answered with
/// the arm's payout on the input link.
#[derive(Clone, Debug)]
pub struct BanditEnv {
    pub payouts: [(String, f64); 2],
    pub pulls: Vec<String>,
}

impl Default for BanditEnv {
    fn default() -> Self {
        BanditEnv {
            payouts: [("left".into(), 1.0), ("right".into(), 0.0)],
            pulls: Vec::new(),
        }
    }
}

impl Environment for BanditEnv {
    fn exchange(&mut self, _cycle: u64, output: &[EnvDelta]) -> Result<Vec<EnvDelta>> {
        let mut reply = Vec::new();
        for d in output {
            if d.op == DeltaOp::Add && d.attr == Symbol::str("pull") {
                let arm = d.value.clone();
                let pay = self
                    .payouts
                    .iter()
                    .find(|(a, _)| *a == arm)
                    .map(|(_, p)| *p)
                    .unwrap_or(0.0);
                self.pulls.push(arm);
                reply.push(EnvDelta::add("input-link", "payout", pay));
            }
        }
        Ok(reply)
    }
}

/// Replays fixed input deltas keyed by cycle and records what it was sent.
#[derive(Clone, Debug, Default)]
pub struct ScriptedEnv {
    pub script: Vec<(u64, EnvDelta)>,
    pub received: Vec<(u64, EnvDelta)>,
}

impl Environment for ScriptedEnv {
    fn exchange(&mut self, cycle: u64, output: &[EnvDelta]) -> Result<Vec<EnvDelta>> {
        self.received
            .extend(output.iter().map(|d| (cycle, d.clone())));
        Ok(self
            .script
            .iter()
            .filter(|(c, _)| *c == cycle)
            .map(|(_, d)| d.clone())
            .collect())
    }
}
