//! Subjective-logic identification of time-varying Markov channel models.
//!
//! The crate estimates the transition matrix of a finite Markov chain from a
//! stream of observed states, window by window, and attaches an explicit
//! statistical uncertainty to every row of the estimate. Modules:
//!
//! - [`opinion`]: opinions, Dirichlet evidence, fusion, discounting, conflict.
//! - [`ident`]: the windowed online identifier and the classical baseline.
//! - [`sim`]: seedable simulator for piecewise constant / drifting chains.
//! - [`delay`]: packet-delay traces to three-state observations.
//! - [`report`]: per-window reports, RMSE and reset-latency metrics.

pub mod chain;
pub mod config;
pub mod delay;
pub mod error;
pub mod ident;
pub mod opinion;
pub mod report;
pub mod sim;

pub use chain::{State, TransitionMatrix};
pub use error::{Error, ErrorClass, Result};
pub use ident::{
    classical_estimate, run, step, window_opinions, ClassicalEstimate, Identifier,
    IdentifierConfig, IdentifierOutput, OpinionMatrix, WindowStats,
};
pub use opinion::{EvidenceVector, Opinion};
pub use sim::{reference_scenario, ObservationTrace, ScenarioSpec};
