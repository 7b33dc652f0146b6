//! Almost-sure population control versus countdown games.
//!
//! A countdown game is compiled into a gadget MDP ([`reduction`]); the n-fold
//! synchronized product of that MDP is explored under the counting
//! abstraction ([`population`]) and solved for almost-sure reachability of
//! the all-Heaven configuration ([`solver`]). [`pilot`] implements the
//! explicit synchronizing strategy for games that Player 1 wins, [`sim`]
//! samples runs, and [`harness`] ties everything together into per-game
//! reports.

pub mod countdown;
pub mod dot;
pub mod harness;
pub mod mdp;
pub mod pilot;
pub mod population;
pub mod reduction;
pub mod sim;
pub mod solver;

pub use countdown::{countdown_as_mdp, parse_game, random_game, solve_game, CountdownGame, WinTable};
pub use mdp::{ActionId, Distribution, Mdp, Prob, StateId};
pub use reduction::{compile, CompileOptions, Compiled, GadgetMap};
