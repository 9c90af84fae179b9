//! The binary online bookmaking game.
//!
//! A house quotes odds `r_t` on two outcomes for `T` rounds, updating them from
//! the bets placed so far; the gambler's stake each round pays `q/r` if team 1
//! wins and `(1-q)/(1-r)` if team 0 wins. The house minimises its worst-case
//! total payout.
//!
//! - [`game`]: odds, bets, losses, transcripts and the round protocol.
//! - [`balance`]: the involution `f_d` and bi-balanced trees.
//! - [`strategies`]: the optimal house (worst-case loss `T + √T`), its exact
//!   expectation over continuous bets, and baselines.
//! - [`monte_carlo`]: sampled approximation of the expected strategy.
//! - [`blackwell`]: approachability baseline.
//! - [`adversaries`]: gamblers, including exhaustive worst-case search.
//! - [`oracle`]: brute-force checks that do not use the closed forms.

// `!(x > a)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversaries;
pub mod balance;
pub mod blackwell;
pub mod error;
pub mod game;
pub mod monte_carlo;
pub mod oracle;
pub mod strategies;

pub use error::{Error, Result};
pub use game::{
    game_loss, house_gain, play_game, round_loss, BetPoint, GamblerStrategy, GameConfig, HouseStrategy, LossVector,
    OddsPoint, Outcome, RoundView, Transcript,
};
pub use strategies::HouseKind;
