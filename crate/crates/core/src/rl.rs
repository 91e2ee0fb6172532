//! Temporal-difference updates of RL rule values.
//!
//! A pending update is opened when an operator is selected in a state and
//! closed at the next selection in that state (or when the state goes
//! away). Rewards seen in between are discounted and summed.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::matcher::RuleId;
use crate::symbol::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Policy {
    Sarsa,
    QLearning,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RlConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub policy: Policy,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            enabled: true,
            alpha: 0.3,
            gamma: 0.9,
            policy: Policy::Sarsa,
        }
    }
}

/// Open update for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct PendingUpdate {
    pub operator: Symbol,
    /// Contributing RL rules with the values their preferences carried.
    pub contributions: Vec<(RuleId, f64)>,
    /// Reward collected at each decision since the selection.
    pub rewards: Vec<f64>,
}

impl PendingUpdate {
    pub fn q_prev(&self) -> f64 {
        self.contributions.iter().map(|(_, v)| v).sum()
    }
}

/// Discounted reward over the gap: Σ γ^i r_i.
pub fn discounted(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .enumerate()
        .map(|(i, r)| gamma.powi(i as i32) * r)
        .sum()
}

/// The temporal-difference error for a closing update. A terminal update
/// passes `q_next = 0`.
pub fn td_error(cfg: &RlConfig, pending: &PendingUpdate, q_next: f64) -> f64 {
    let n = pending.rewards.len().max(1) as i32;
    cfg.alpha
        * (discounted(&pending.rewards, cfg.gamma) + cfg.gamma.powi(n) * q_next - pending.q_prev())
}

/// Per-rule bookkeeping reported by `rl stats`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RuleStats {
    pub updates: u64,
    pub last_delta: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RlStats {
    pub by_rule: BTreeMap<String, RuleStats>,
}

impl RlStats {
    pub fn record(&mut self, rule: &str, delta: f64) {
        let s = self.by_rule.entry(rule.to_string()).or_default();
        s.updates += 1;
        s.last_delta = delta;
    }
}
