//! Watch-level trace buffer and per-cycle reports.

use serde::Serialize;

/// Trace levels: 0 silent, 1 decisions, 2 phases, 3 firings and
/// retractions, 4 working-memory deltas.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub level: u8,
    lines: Vec<String>,
}

impl Trace {
    pub fn new(level: u8) -> Self {
        Trace {
            level,
            lines: Vec::new(),
        }
    }

    pub fn enabled(&self, level: u8) -> bool {
        self.level >= level
    }

    pub fn emit(&mut self, level: u8, line: impl FnOnce() -> String) {
        if self.level >= level {
            let text = line();
            log::trace!("{text}");
            self.lines.push(text);
        }
    }

    pub fn take(&mut self) -> Vec<String> {
        std::mem::take(&mut self.lines)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateOutcome {
    pub state: String,
    pub depth: usize,
    /// `selected`, `retained` or `impasse`.
    pub outcome: String,
    pub operator: Option<String>,
    /// The operator's own attribute-value pairs when it was chosen.
    pub detail: Vec<(String, String)>,
    pub impasse: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpasseEvent {
    /// `created`, `resolved`, `replaced` or `updated`.
    pub event: String,
    pub state: String,
    pub substate: String,
    pub impasse: String,
    pub items: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CycleReport {
    pub cycle: u64,
    pub selections: Vec<StateOutcome>,
    pub impasses: Vec<ImpasseEvent>,
    pub fired: usize,
    pub retracted: usize,
    pub waves: usize,
    /// Waves before the decision, included in `waves`.
    pub elaboration_waves: usize,
    pub rewards: Vec<(String, f64)>,
    pub chunks: Vec<String>,
    pub halted: bool,
}
