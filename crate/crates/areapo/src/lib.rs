//! Average-reward entropy-advantage policy optimization (AR-EAPO) for the
//! underactuated double pendulum, together with the plant simulator, an exact
//! tabular average-reward oracle, and a competition-style evaluation harness.
//!
//! The crate is organized around the training pipeline:
//!
//! - [`dynamics`] — rigid-body model of the two-link pendulum (acrobot /
//!   pendubot actuation masks, RK4 integration, energy accounting).
//! - [`env`] — continuing-MDP wrapper: observation scaling and running
//!   normalization, quadratic reward, noisy resets, random truncation, and a
//!   vectorized set of environments.
//! - [`tabular`] — exact gain / bias / entropy-gain / entropy-bias / soft
//!   advantage computation on small finite MDPs, used as ground truth for the
//!   learner's estimators.
//! - [`nn`] — minimal double-precision MLP toolkit with analytic
//!   backpropagation, a diagonal-Gaussian policy head, a two-headed critic,
//!   and an Adam optimizer with global gradient-norm clipping.
//! - [`learner`] — the AR-EAPO algorithm: vectorized rollouts, dual
//!   average-reward GAE, incremental gain tracking, and clipped-surrogate
//!   updates.
//! - [`eval`] — swing-up criteria, aggregate scoring, and the six-category
//!   robustness sweep.

pub mod checkpoint;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod learner;
pub mod nn;
pub mod rng;
pub mod svg;
pub mod tabular;

pub use error::{Error, Result};
