//! Reinforcement-learning search for variational quantum classifier
//! circuits.
//!
//! An N-step double-DQN agent places gates one at a time; after every
//! placement the classifier is retrained and the agent is rewarded for
//! reaching a target accuracy with as few gates as possible.

pub mod agent;
pub mod baselines;
pub mod datasets;
pub mod embedding;
pub mod env;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod optim;
pub mod qsim;
pub mod rng;
pub mod vqc;

pub use error::{QasError, Result};
