//! Command interpreter shared by batch scripts and the REPL.

use std::fs::{File, OpenOptions};
use std::io::Write;

use opcycle::engine::{Engine, EngineConfig};
use opcycle::env::{BanditEnv, StdioEnv};
use opcycle::symbol::Ident;
use opcycle::Error;

pub const USAGE: &str = "\
commands:
  load <file>                       load rules from a file
  step [n] [--json]                 run n decision cycles (default 1)
  run [--max-cycles N] [--until-halt] [--json]
  print --wm | --prefs [<state>] | --stack | --chunks | --rule <name>
  watch <0..4>                      trace detail shown while running
  rl stats                          values and update counts of RL rules
  smem --print | --load <file> | --save <file>
  epmem --replay <from> <to> | --load <file> | --log <file>
  seed <u64>
  env --stdio <command line> | --bandit | --none
  learn on|off                      chunking
  init                              clear working memory, keep rules
  excise <rule>
  help
  quit";

/// Cycles `run` allows itself when not told otherwise.
const DEFAULT_MAX_CYCLES: u64 = 10_000;

#[derive(Debug)]
pub enum Failure {
    /// Not a command, or malformed arguments.
    Usage(String),
    Engine(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Engine(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

pub enum Flow {
    Continue,
    Quit,
}

pub struct Session {
    pub engine: Engine,
    epmem_log: Option<File>,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn number<T: std::str::FromStr>(word: Option<&str>, what: &str) -> Result<T, Failure> {
    let w = word.ok_or_else(|| usage(format!("missing {what}")))?;
    w.parse().map_err(|_| usage(format!("bad {what}: {w}")))
}

impl Session {
    pub fn new(config: EngineConfig) -> Self {
        Session {
            engine: Engine::new(config),
            epmem_log: None,
        }
    }

    /// Runs every `;`-separated command on the line.
    pub fn execute_line(&mut self, line: &str, out: &mut dyn Write) -> Result<Flow, Failure> {
        let line = line.split_once('#').map_or(line, |(code, _)| code);
        for command in line.split(';') {
            if let Flow::Quit = self.execute(command.trim(), out)? {
                return Ok(Flow::Quit);
            }
        }
        Ok(Flow::Continue)
    }

    pub fn execute(&mut self, command: &str, out: &mut dyn Write) -> Result<Flow, Failure> {
        let mut words = command.split_whitespace();
        let Some(head) = words.next() else {
            return Ok(Flow::Continue);
        };
        let args: Vec<&str> = words.collect();
        match head {
            "load" => {
                let path = args.first().ok_or_else(|| usage("load needs a file"))?;
                let text = std::fs::read_to_string(path)?;
                let (n, diags) = self.engine.load_str(&text);
                for d in &diags {
                    writeln!(out, "{path}: {d}")?;
                }
                writeln!(out, "loaded {n} rules from {path}")?;
                if !diags.is_empty() {
                    return Err(Failure::Engine(Error::Load(diags)));
                }
            }
            "step" => {
                let json = args.contains(&"--json");
                let rest: Vec<&str> = args.iter().copied().filter(|a| *a != "--json").collect();
                let n = if rest.is_empty() {
                    1
                } else {
                    number(rest.first().copied(), "cycle count")?
                };
                self.cycles(n, json, out)?;
            }
            "run" => {
                let (mut max, mut json) = (DEFAULT_MAX_CYCLES, false);
                let mut it = args.iter();
                while let Some(a) = it.next() {
                    match *a {
                        "--max-cycles" => max = number(it.next().copied(), "cycle count")?,
                        "--until-halt" => {}
                        "--json" => json = true,
                        other => return Err(usage(format!("unknown run option {other}"))),
                    }
                }
                self.cycles(max, json, out)?;
            }
            "print" => self.print(&args, out)?,
            "watch" => {
                let level: u8 = number(args.first().copied(), "watch level")?;
                if level > 4 {
                    return Err(usage("watch level is 0..4"));
                }
                self.engine.set_watch(level);
            }
            "rl" if args.first() == Some(&"stats") => write!(out, "{}", self.engine.rl_stats())?,
            "smem" => match args.as_slice() {
                ["--print"] => write!(out, "{}", self.engine.smem.save())?,
                ["--load", path] => self.engine.load_smem(&std::fs::read_to_string(path)?)?,
                ["--save", path] => std::fs::write(path, self.engine.smem.save())?,
                _ => return Err(usage("smem --print | --load <file> | --save <file>")),
            },
            "epmem" => match args.as_slice() {
                ["--replay", from, to] => {
                    let (a, b): (u64, u64) =
                        (number(Some(from), "cycle")?, number(Some(to), "cycle")?);
                    write!(out, "{}", self.engine.epmem_replay(a, b))?;
                }
                ["--load", path] => {
                    self.engine
                        .load_epmem_log(&std::fs::read_to_string(path)?)?;
                    self.engine.epmem.set_logging(self.epmem_log.is_some());
                }
                ["--log", path] => {
                    self.epmem_log = Some(OpenOptions::new().create(true).append(true).open(path)?);
                    self.engine.epmem.set_logging(true);
                }
                _ => {
                    return Err(usage(
                        "epmem --replay <from> <to> | --load <file> | --log <file>",
                    ))
                }
            },
            "seed" => self.engine.seed(number(args.first().copied(), "seed")?),
            "env" => match args.as_slice() {
                ["--stdio", rest @ ..] if !rest.is_empty() => {
                    let env = StdioEnv::spawn_shell(&rest.join(" "))?;
                    self.engine.set_environment(Box::new(env));
                }
                ["--bandit"] => self.engine.set_environment(Box::new(BanditEnv::default())),
                ["--none"] => drop(self.engine.take_environment()),
                _ => return Err(usage("env --stdio <command line> | --bandit | --none")),
            },
            "learn" => match args.as_slice() {
                ["on"] => self.engine.config.learning = true,
                ["off"] => self.engine.config.learning = false,
                _ => return Err(usage("learn on|off")),
            },
            "init" => self.engine.reinit(),
            "excise" => {
                let name = args
                    .first()
                    .ok_or_else(|| usage("excise needs a rule name"))?;
                let id = self
                    .engine
                    .rule_id(name)
                    .ok_or_else(|| usage(format!("no rule named {name}")))?;
                self.engine.excise(id);
            }
            "help" => writeln!(out, "{USAGE}")?,
            "quit" | "exit" => return Ok(Flow::Quit),
            other => return Err(usage(format!("unknown command: {other}"))),
        }
        Ok(Flow::Continue)
    }

    /// Steps up to `n` cycles, printing the trace as it goes and, with
    /// `json`, one report object per cycle.
    fn cycles(&mut self, n: u64, json: bool, out: &mut dyn Write) -> Result<(), Failure> {
        let ran = !self.engine.halted();
        for _ in 0..n {
            if self.engine.halted() {
                break;
            }
            let result = self.engine.step();
            self.flush(out)?;
            let report = result?;
            if json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&report).map_err(std::io::Error::other)?
                )?;
            }
        }
        if ran && self.engine.halted() && self.engine.config.watch == 0 {
            writeln!(
                out,
                "halted at cycle {}",
                self.engine.cycle().saturating_sub(1)
            )?;
        }
        Ok(())
    }

    fn flush(&mut self, out: &mut dyn Write) -> Result<(), Failure> {
        for line in self.engine.take_trace() {
            writeln!(out, "{line}")?;
        }
        if let Some(file) = self.epmem_log.as_mut() {
            for line in self.engine.epmem.take_log() {
                writeln!(file, "{line}")?;
            }
        }
        Ok(())
    }

    fn print(&self, args: &[&str], out: &mut dyn Write) -> Result<(), Failure> {
        match args {
            ["--wm"] => write!(out, "{}", self.engine.print_wm(false))?,
            ["--prefs"] => write!(out, "{}", self.engine.print_prefs(self.engine.topstate()))?,
            ["--prefs", state] => {
                let id = Ident::parse(state)
                    .ok_or_else(|| usage(format!("not an identifier: {state}")))?;
                write!(out, "{}", self.engine.print_prefs(id))?;
            }
            ["--stack"] => write!(out, "{}", self.engine.print_stack())?,
            ["--chunks"] => write!(out, "{}", self.engine.chunk_log())?,
            ["--rule", name] => {
                let rule = self
                    .engine
                    .rule(name)
                    .ok_or_else(|| usage(format!("no rule named {name}")))?;
                writeln!(out, "{rule}")?;
            }
            _ => {
                return Err(usage(
                    "print --wm | --prefs [<state>] | --stack | --chunks | --rule <name>",
                ))
            }
        }
        Ok(())
    }
}
