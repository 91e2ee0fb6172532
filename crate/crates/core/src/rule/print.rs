use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::symbol::Symbol;

use super::{Action, Condition, Operand, PrefKind, RhsValue, Rule, Test};

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Const(c) => write!(f, "{c}"),
            Operand::Var(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Test {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Test::Const(c) => write!(f, "{c}"),
            Test::Var(v) => write!(f, "{v}"),
            Test::Compare(op, rhs) => write!(f, "{} {rhs}", op.glyph()),
            Test::Conj(ts) => {
                f.write_str("{")?;
                for t in ts {
                    write!(f, " {t}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

impl fmt::Display for RhsValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsValue::Var(v) => write!(f, "{v}"),
            RhsValue::Const(c) => write!(f, "{c}"),
        }
    }
}

fn attr_value(c: &Condition) -> String {
    let mut s = format!("^{} {}", c.attr, c.value);
    if c.acceptable {
        s.push_str(" +");
    }
    s
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Make { id, attr, value } => write!(f, "({id} ^{attr} {value})"),
            Action::Remove { id, attr, value } => write!(f, "({id} ^{attr} {value} -)"),
            Action::Halt => f.write_str("(halt)"),
            Action::Pref {
                state,
                op,
                kind,
                referent,
                value,
            } => {
                let r = referent.as_deref().unwrap_or("");
                let glyph = match kind {
                    PrefKind::Acceptable => "+".to_string(),
                    PrefKind::Reject => "-".to_string(),
                    PrefKind::Best => ">".to_string(),
                    PrefKind::Worst => "<".to_string(),
                    PrefKind::Better => format!("> {r}"),
                    PrefKind::Worse => format!("< {r}"),
                    PrefKind::UnaryIndifferent => "=".to_string(),
                    PrefKind::BinaryIndifferent => format!("= {r}"),
                    PrefKind::Numeric => format!("= {}", Symbol::Float(value.unwrap_or(0.0))),
                };
                write!(f, "({state} ^operator {op} {glyph})")
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sp {{{}", self.name)?;
        let mut i = 0;
        while i < self.conditions.len() {
            let c = &self.conditions[i];
            if c.negated {
                writeln!(f, "    -({} {})", c.id, attr_value(c))?;
                i += 1;
                continue;
            }
            let mut line = String::from("    (");
            if c.state {
                line.push_str("state ");
            }
            let _ = write!(line, "{} {}", c.id, attr_value(c));
            let mut j = i + 1;
            while j < self.conditions.len() {
                let d = &self.conditions[j];
                if d.negated || d.state || d.id != c.id {
                    break;
                }
                let _ = write!(line, " {}", attr_value(d));
                j += 1;
            }
            line.push(')');
            writeln!(f, "{line}")?;
            i = j;
        }
        writeln!(f, "-->")?;
        for a in &self.actions {
            writeln!(f, "    {a}")?;
        }
        f.write_str("}")
    }
}

/// Rule text with the name dropped and variables renamed by first
/// appearance; two rules are equal up to variable renaming iff their
/// canonical texts match.
pub fn canonical_text(rule: &Rule) -> String {
    let printed = rule.to_string();
    let body = printed.split_once('\n').map(|(_, b)| b).unwrap_or("");
    let mut names: HashMap<String, String> = HashMap::new();
    let mut out = String::with_capacity(body.len());
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            let mut j = i + 1;
            while j < chars.len()
                && (chars[j].is_alphanumeric() || matches!(chars[j], '-' | '_' | '*'))
            {
                j += 1;
            }
            if j > i + 1 && chars.get(j) == Some(&'>') {
                let var: String = chars[i..=j].iter().collect();
                let n = names.len();
                let canon = names.entry(var).or_insert_with(|| format!("<v{n}>"));
                out.push_str(canon);
                i = j + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}
