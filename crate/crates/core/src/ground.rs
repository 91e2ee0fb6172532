//! Turning a rule's actions into concrete changes under a set of bindings.

use std::collections::HashMap;

use crate::decide::Pref;
use crate::rule::{Action, RhsValue};
use crate::symbol::{Ident, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub enum Grounded {
    Make(Ident, Symbol, Symbol),
    Remove(Ident, Symbol, Symbol),
    Pref(Ident, Pref),
    Halt,
}

/// Letter for an identifier created by an unbound action variable: `<o2>` gives `O`.
pub fn var_letter(var: &str) -> char {
    var.trim_start_matches('<')
        .chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase())
        .unwrap_or('I')
}

/// Grounds `actions`. Unbound variables become fresh identifiers, one per
/// variable. Actions whose identifier slot is bound to a constant are
/// skipped and reported.
pub fn ground_actions(
    actions: &[Action],
    lookup: impl Fn(&str) -> Option<Symbol>,
    mut fresh: impl FnMut(char) -> Ident,
) -> (Vec<Grounded>, Vec<String>) {
    let mut created: HashMap<String, Ident> = HashMap::new();
    let mut warnings = Vec::new();
    let mut resolve = |var: &str, created: &mut HashMap<String, Ident>| -> Symbol {
        if let Some(s) = lookup(var) {
            return s;
        }
        Symbol::Id(
            *created
                .entry(var.to_string())
                .or_insert_with(|| fresh(var_letter(var))),
        )
    };
    let mut out = Vec::new();
    for a in actions {
        match a {
            Action::Make { id, attr, value } | Action::Remove { id, attr, value } => {
                let idv = resolve(id, &mut created);
                let Some(ident) = idv.as_ident() else {
                    warnings.push(format!("{id} is bound to constant {idv}; action skipped"));
                    continue;
                };
                let rv = |v: &RhsValue, created: &mut HashMap<String, Ident>, resolve: &mut dyn FnMut(&str, &mut HashMap<String, Ident>) -> Symbol| match v {
                    RhsValue::Const(c) => c.clone(),
                    RhsValue::Var(x) => resolve(x, created),
                };
                let attr = rv(attr, &mut created, &mut resolve);
                let value = rv(value, &mut created, &mut resolve);
                out.push(if matches!(a, Action::Make { .. }) {
                    Grounded::Make(ident, attr, value)
                } else {
                    Grounded::Remove(ident, attr, value)
                });
            }
            Action::Pref {
                state,
                op,
                kind,
                referent,
                value,
            } => {
                let sv = resolve(state, &mut created);
                let Some(s) = sv.as_ident() else {
                    warnings.push(format!(
                        "{state} is bound to constant {sv}; preference skipped"
                    ));
                    continue;
                };
                let op = resolve(op, &mut created);
                let referent = referent.as_ref().map(|r| resolve(r, &mut created));
                out.push(Grounded::Pref(
                    s,
                    Pref {
                        kind: *kind,
                        op,
                        referent,
                        value: *value,
                    },
                ));
            }
            Action::Halt => out.push(Grounded::Halt),
        }
    }
    (out, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::{parse_agent_file, PrefKind};

    #[test]
    fn unbound_variables_get_one_fresh_id_each() {
        let (rules, _) = parse_agent_file(
            "sp {p (state <s> ^x <b>) --> (<s> ^operator <o> +) (<o> ^name go ^target <b>)}",
        );
        let s1 = Symbol::Id(Ident::new('S', 1));
        let b = Symbol::Int(4);
        let mut n = 10;
        let (g, w) = ground_actions(
            &rules[0].actions,
            |v| match v {
                "<s>" => Some(s1.clone()),
                "<b>" => Some(b.clone()),
                _ => None,
            },
            |letter| {
                n += 1;
                Ident::new(letter, n)
            },
        );
        assert!(w.is_empty());
        let o = Symbol::Id(Ident::new('O', 11));
        assert_eq!(
            g[0],
            Grounded::Pref(
                Ident::new('S', 1),
                Pref::unary(PrefKind::Acceptable, o.clone())
            )
        );
        assert_eq!(
            g[1],
            Grounded::Make(Ident::new('O', 11), Symbol::str("name"), Symbol::str("go"))
        );
        assert_eq!(
            g[2],
            Grounded::Make(Ident::new('O', 11), Symbol::str("target"), b)
        );
    }
}
