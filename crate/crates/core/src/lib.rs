//! Discrete-input minimization of parameterized network objectives by
//! homotopy continuation in parameter space.
//!
//! The library treats the model parameters of an objective `F(p, x)` as a
//! second optimization variable: descending in `p` at a fixed anchor input
//! produces a chain of progressively easier discrete problems, which are then
//! solved in reverse with warm-started greedy token search. Objectives are
//! one-hidden-layer networks over one-hot inputs; 3CNF formulas compile into
//! such networks with an exhaustive satisfiability oracle as ground truth,
//! which makes the whole pipeline checkable end to end.
//!
//! Modules:
//!
//! * [`objective`] — networks, exact parameter/input gradients, token
//!   sequences, suffix problems.
//! * [`cnf`] — DIMACS parsing, formula generators, compilation to network
//!   objectives, brute-force SAT oracle.
//! * [`search`] — greedy-random and gradient-greedy substitution search,
//!   exhaustive minimizer, search traces.
//! * [`homotopy`] — checkpoint chains, the staged walk-back, the
//!   binary-search checkpoint scheduler, chain persistence.
//! * [`ranking`] — ground-truth / gradient / random token rankings and
//!   rank-biased overlap.

pub mod cnf;
pub mod error;
pub mod homotopy;
pub mod objective;
pub mod ranking;
pub mod search;
pub mod seeds;
pub mod test_support;

pub use error::{FhError, Result};
pub use objective::{
    sgd_step, surrogate_loss, Activation, InputGradient, NetShape, ParamGradient, ParamState,
    SuffixProblem, TokenSequence, TwoLayerNet,
};
