//! Finite stochastic pricing games with one-memory strategies: exact value
//! computation, subgame-perfection checks and a Q-learning simulator.

pub mod error;
pub mod game;
pub mod harness;
pub mod policy;
pub mod random;
pub mod scenarios;
pub mod value;
pub mod verify;
pub mod qlearning;
pub mod io;

pub use error::{Error, Result};
