//! Demo agents shipped with the kernel.

/// Three-block tower built by tie-impasse look-ahead.
pub const BLOCKS: &str = include_str!("../agents/blocks.soar");

/// Move-block decomposed through operator no-change substates.
pub const HIERARCHY: &str = include_str!("../agents/hierarchy.soar");

/// Two-armed bandit learned by RL; run against [`crate::env::BanditEnv`].
pub const BANDIT: &str = include_str!("../agents/bandit.soar");

/// `(name, source)` for every demo agent.
pub const ALL: [(&str, &str); 3] = [
    ("blocks", BLOCKS),
    ("hierarchy", HIERARCHY),
    ("bandit", BANDIT),
];
