mod session;

use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use opcycle::engine::EngineConfig;
use opcycle::env::{serve, BanditEnv};
use session::{Failure, Flow, Session, USAGE};

#[derive(Parser, Debug)]
#[command(name = "opcycle", version, about = "Run and inspect rule-based agents")]
struct Args {
    /// Command script to run in batch mode, or `-` for stdin.
    script: Option<PathBuf>,

    /// Commands to run before the script, separated by `;`.
    #[arg(short = 'c', long = "command")]
    commands: Vec<String>,

    /// Initial trace level.
    #[arg(long, default_value_t = 1)]
    watch: u8,

    /// Random seed for operator selection.
    #[arg(long)]
    seed: Option<u64>,

    /// Maximum substate depth.
    #[arg(long)]
    max_depth: Option<usize>,

    /// Serve the two-armed bandit over stdin and stdout instead of running an agent.
    #[arg(long, hide = true)]
    bandit_env: bool,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    if args.bandit_env {
        let stdin = io::stdin();
        return match serve(&mut BanditEnv::default(), stdin.lock(), io::stdout().lock()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }

    let mut config = EngineConfig::default();
    if let Some(d) = args.max_depth {
        config.max_depth = d;
    }
    let mut session = Session::new(config);
    session.engine.set_watch(args.watch.min(4));
    if let Some(seed) = args.seed {
        session.engine.seed(seed);
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in &args.commands {
        match run_batch_line(&mut session, line, &mut out) {
            Some(code) => return code,
            None => continue,
        }
    }

    match args.script {
        Some(path) if path.as_os_str() == "-" => batch(&mut session, io::stdin().lock(), &mut out),
        Some(path) => match std::fs::File::open(&path) {
            Ok(f) => batch(&mut session, io::BufReader::new(f), &mut out),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                ExitCode::FAILURE
            }
        },
        None if !args.commands.is_empty() => ExitCode::SUCCESS,
        None => repl(&mut session, &mut out),
    }
}

/// Runs one line; `Some` means stop with that exit code.
fn run_batch_line(session: &mut Session, line: &str, out: &mut dyn Write) -> Option<ExitCode> {
    match session.execute_line(line, out) {
        Ok(Flow::Continue) => None,
        Ok(Flow::Quit) => Some(ExitCode::SUCCESS),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            if let Failure::Usage(_) = e {
                eprintln!("{USAGE}");
            }
            Some(ExitCode::FAILURE)
        }
    }
}

fn batch(session: &mut Session, input: impl BufRead, out: &mut dyn Write) -> ExitCode {
    for line in input.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        };
        if let Some(code) = run_batch_line(session, &line, out) {
            return code;
        }
    }
    ExitCode::SUCCESS
}

fn repl(session: &mut Session, out: &mut dyn Write) -> ExitCode {
    let interactive = io::stdin().is_terminal();
    let mut line = String::new();
    loop {
        if interactive {
            let _ = write!(out, "opcycle> ");
            let _ = out.flush();
        }
        line.clear();
        match io::stdin().lock().read_line(&mut line) {
            Ok(0) => return ExitCode::SUCCESS,
            Ok(_) => {}
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
        match session.execute_line(&line, out) {
            Ok(Flow::Continue) => {}
            Ok(Flow::Quit) => return ExitCode::SUCCESS,
            Err(Failure::Usage(m)) => {
                let _ = writeln!(out, "{m}\n{USAGE}");
            }
            Err(e) => {
                let _ = writeln!(out, "error: {e}");
            }
        }
    }
}
