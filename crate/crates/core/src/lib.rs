//! A task-independent cognitive-architecture kernel.
//!
//! Production rules match a graph-structured working memory and fire in
//! parallel waves; a fixed decision procedure selects operators from
//! preferences; impasses spawn substates whose results are compiled into
//! new rules by chunking. Numeric preferences are tuned by reinforcement
//! learning, and the agent can deliberately store and retrieve from
//! semantic and episodic long-term memories.

pub mod agents;
pub mod chunking;
pub mod decide;
pub mod engine;
pub mod env;
pub mod epmem;
pub mod error;
pub mod ground;
pub mod matcher;
pub mod rl;
pub mod rule;
pub mod smem;
pub mod symbol;
pub mod trace;
pub mod wm;

pub use error::{Error, Result};
