//! Signalling games with compositional negation, played by populations of
//! Roth-Erev and neural actor-critic agents.
//!
//! - [`game`]: states, symbols, derangements and the four game protocols.
//! - [`roth_erev`]: tabular urn learners with periodic reward resetting.
//! - [`nn`]: dense layers, Adam and PPO.
//! - [`neural`]: actor-critic agents trained with PPO.
//! - [`population`]: learning events, fitness evaluation and repetitions.
//! - [`io`]: configuration files, CSV/JSON outputs and plot series.

pub mod error;
pub mod game;
pub mod io;
pub mod neural;
pub mod nn;
pub mod population;
pub mod rng;
pub mod roth_erev;

pub use error::{NumericError, Result, SimError};
