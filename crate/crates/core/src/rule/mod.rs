//! The agent rule language: types, parser, printer and function classifier.
//!
//! Rules are written as `sp { name conditions --> actions }` blocks. A
//! multi-attribute condition `(<b> ^clear true ^on <c>)` desugars to one
//! [`Condition`] per attribute; likewise for actions.

mod classify;
mod parser;
mod print;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::symbol::Symbol;

pub use classify::{classify_rule, ClassifyError};
pub use parser::{parse_agent_file, Diagnostic};
pub use print::canonical_text;

/// Relational operator in a comparison test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelOp {
    Lt,
    Gt,
    Le,
    Ge,
    Ne,
}

impl RelOp {
    pub fn glyph(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
            RelOp::Ne => "<>",
        }
    }

    /// Applies `lhs op rhs`. Ordering ops need two numbers; `<>` works on any symbols.
    pub fn holds(self, lhs: &Symbol, rhs: &Symbol) -> bool {
        if self == RelOp::Ne {
            return match (lhs.as_number(), rhs.as_number()) {
                (Some(a), Some(b)) => a != b,
                _ => lhs != rhs,
            };
        }
        let (Some(a), Some(b)) = (lhs.as_number(), rhs.as_number()) else {
            return false;
        };
        match self {
            RelOp::Lt => a < b,
            RelOp::Gt => a > b,
            RelOp::Le => a <= b,
            RelOp::Ge => a >= b,
            RelOp::Ne => unreachable!(),
        }
    }
}

/// Right-hand side of a comparison.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Const(Symbol),
    Var(String),
}

/// A test on one field of a working-memory element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Test {
    Const(Symbol),
    Var(String),
    Compare(RelOp, Operand),
    Conj(Vec<Test>),
}

impl Test {
    /// Variables this test binds (plain variable tests, including inside conjunctions).
    pub fn binding_vars(&self, out: &mut Vec<String>) {
        match self {
            Test::Var(v) => out.push(v.clone()),
            Test::Conj(ts) => ts.iter().for_each(|t| t.binding_vars(out)),
            _ => {}
        }
    }

    /// Variables referenced as comparison operands.
    pub fn operand_vars(&self, out: &mut Vec<String>) {
        match self {
            Test::Compare(_, Operand::Var(v)) => out.push(v.clone()),
            Test::Conj(ts) => ts.iter().for_each(|t| t.operand_vars(out)),
            _ => {}
        }
    }

    /// The first plain variable in the test, if any.
    pub fn main_var(&self) -> Option<&str> {
        match self {
            Test::Var(v) => Some(v),
            Test::Conj(ts) => ts.iter().find_map(|t| t.main_var()),
            _ => None,
        }
    }

    /// The constant this test requires equality with, if any.
    pub fn main_const(&self) -> Option<&Symbol> {
        match self {
            Test::Const(c) => Some(c),
            Test::Conj(ts) => ts.iter().find_map(|t| t.main_const()),
            _ => None,
        }
    }
}

/// One condition: a test on the identifier, attribute and value of a WME.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    pub negated: bool,
    /// The identifier must be a state (`(state <s> ...)`).
    pub state: bool,
    pub id: Test,
    pub attr: Test,
    pub value: Test,
    /// Tests an acceptable preference rather than a plain WME.
    pub acceptable: bool,
}

impl Condition {
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.id.binding_vars(&mut out);
        self.attr.binding_vars(&mut out);
        self.value.binding_vars(&mut out);
        self.id.operand_vars(&mut out);
        self.attr.operand_vars(&mut out);
        self.value.operand_vars(&mut out);
        out
    }

    /// Tests the selected operator: positive, non-acceptable `^operator`.
    pub fn tests_selected_operator(&self) -> bool {
        !self.negated
            && !self.acceptable
            && self.attr.main_const() == Some(&Symbol::str("operator"))
    }
}

/// Kinds of operator preference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrefKind {
    Acceptable,
    Reject,
    Better,
    Worse,
    Best,
    Worst,
    UnaryIndifferent,
    BinaryIndifferent,
    Numeric,
}

impl PrefKind {
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            PrefKind::Better | PrefKind::Worse | PrefKind::BinaryIndifferent
        )
    }
}

/// Value slot of a right-hand-side make or remove.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RhsValue {
    Var(String),
    Const(Symbol),
}

impl RhsValue {
    pub fn var(&self) -> Option<&str> {
        match self {
            RhsValue::Var(v) => Some(v),
            RhsValue::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Make {
        id: String,
        attr: RhsValue,
        value: RhsValue,
    },
    Remove {
        id: String,
        attr: RhsValue,
        value: RhsValue,
    },
    Pref {
        state: String,
        op: String,
        kind: PrefKind,
        referent: Option<String>,
        value: Option<f64>,
    },
    Halt,
}

impl Action {
    pub fn is_structure(&self) -> bool {
        matches!(
            self,
            Action::Make { .. } | Action::Remove { .. } | Action::Halt
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionClass {
    Elaboration,
    Proposal,
    Evaluation,
    Application,
}

impl FunctionClass {
    pub fn name(self) -> &'static str {
        match self {
            FunctionClass::Elaboration => "elaboration",
            FunctionClass::Proposal => "proposal",
            FunctionClass::Evaluation => "evaluation",
            FunctionClass::Application => "application",
        }
    }

    /// Application effects persist; everything else is truth-maintained.
    pub fn o_supported(self) -> bool {
        self == FunctionClass::Application
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Loaded,
    Chunk,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub actions: Vec<Action>,
    pub class: FunctionClass,
    /// Evaluation rule whose single action is a constant numeric preference.
    pub rl: bool,
    pub provenance: Provenance,
}

impl Rule {
    /// Builds a rule and classifies it.
    pub fn new(
        name: impl Into<String>,
        conditions: Vec<Condition>,
        actions: Vec<Action>,
        provenance: Provenance,
    ) -> Result<Rule, ClassifyError> {
        let mut rule = Rule {
            name: name.into(),
            conditions,
            actions,
            class: FunctionClass::Elaboration,
            rl: false,
            provenance,
        };
        let (class, rl) = classify_rule(&rule)?;
        rule.class = class;
        rule.rl = rl;
        Ok(rule)
    }

    /// Variables bound by positive conditions.
    pub fn bound_vars(&self) -> BTreeSet<String> {
        let mut out = Vec::new();
        for c in self.conditions.iter().filter(|c| !c.negated) {
            c.id.binding_vars(&mut out);
            c.attr.binding_vars(&mut out);
            c.value.binding_vars(&mut out);
        }
        out.into_iter().collect()
    }

    /// Current value of an RL rule's numeric preference.
    pub fn rl_value(&self) -> Option<f64> {
        if !self.rl {
            return None;
        }
        self.actions.iter().find_map(|a| match a {
            Action::Pref {
                kind: PrefKind::Numeric,
                value,
                ..
            } => *value,
            _ => None,
        })
    }

    pub fn set_rl_value(&mut self, v: f64) {
        for a in &mut self.actions {
            if let Action::Pref {
                kind: PrefKind::Numeric,
                value,
                ..
            } = a
            {
                *value = Some(v);
            }
        }
    }
}
