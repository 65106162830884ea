#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Stochastic follow-the-regularized-leader dynamics on finite games.
//!
//! The crate covers exact game analysis ([`game`]), convex regularizers and
//! mirror maps ([`regularization`]), deterministic and stochastic integrators
//! ([`dynamics`]), Monte Carlo estimators and bound calculators
//! ([`analysis`]), and a config-driven experiment runner ([`cli`]).

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod noise;
pub mod regularization;

pub use dynamics::{SimConfig, SrdVariant, TerminalReason, Trajectory};
pub use error::{Error, Result};
pub use game::{Face, Game, HarmonicStructure, MixedProfile, NashClass, PureProfile};
pub use noise::{NoiseModel, NoiseStream};
pub use regularization::{Kernel, RegularizerSet, ScoreProfile};
