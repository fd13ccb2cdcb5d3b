//! States, symbols, derangements and the four signalling-game protocols.
//!
//! The protocols in [`play`] act as referees: they ask agents for decisions
//! through the [`Agent`] trait, route symbols between them, and return an
//! [`EpisodeRecord`] that names every sampled decision so that learners can
//! assign credit afterwards.

mod derangement;
mod play;
mod types;

pub use derangement::{make_derangement, Derangement, DerangementKind};
pub use play::{play, play_atomic, play_basic_negation, play_combined, play_learned_negation, Agent};
pub use types::{
    Decision, EpisodeRecord, GameConfig, GameKind, Mask, Meaning, Message, Role, MAX_WIDTH,
};
