use thiserror::Error;

use super::{Action, FunctionClass, PrefKind, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("rule {rule} mixes functions: {first} and {second}")]
    Mixed {
        rule: String,
        first: &'static str,
        second: &'static str,
    },
    #[error("rule {rule}: structure removal outside an application rule")]
    RemoveOutsideApplication { rule: String },
}

/// Assigns the single function class of a rule and its RL flag.
///
/// Proposal rules may also build the proposed operator's structure; every
/// other combination of preference and structure actions is rejected.
pub fn classify_rule(rule: &Rule) -> Result<(FunctionClass, bool), ClassifyError> {
    let mixed = |first, second| ClassifyError::Mixed {
        rule: rule.name.clone(),
        first,
        second,
    };

    let prefs: Vec<PrefKind> = rule
        .actions
        .iter()
        .filter_map(|a| match a {
            Action::Pref { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    let has_acceptable = prefs.contains(&PrefKind::Acceptable);
    let has_other_pref = prefs.iter().any(|k| *k != PrefKind::Acceptable);
    let has_make = rule
        .actions
        .iter()
        .any(|a| matches!(a, Action::Make { .. } | Action::Halt));
    let has_remove = rule
        .actions
        .iter()
        .any(|a| matches!(a, Action::Remove { .. }));
    let tests_operator = rule.conditions.iter().any(|c| c.tests_selected_operator());

    if has_acceptable && has_other_pref {
        return Err(mixed("proposal", "evaluation"));
    }
    if has_acceptable {
        if has_remove {
            return Err(mixed("proposal", "application"));
        }
        return Ok((FunctionClass::Proposal, false));
    }
    if has_other_pref {
        if has_make || has_remove {
            let second = if tests_operator {
                "application"
            } else {
                "elaboration"
            };
            return Err(mixed("evaluation", second));
        }
        let rl = rule.actions.len() == 1
            && matches!(rule.actions[0], Action::Pref { kind: PrefKind::Numeric, value: Some(v), .. } if v.is_finite());
        return Ok((FunctionClass::Evaluation, rl));
    }
    if tests_operator {
        return Ok((FunctionClass::Application, false));
    }
    if has_remove {
        return Err(ClassifyError::RemoveOutsideApplication {
            rule: rule.name.clone(),
        });
    }
    Ok((FunctionClass::Elaboration, false))
}
