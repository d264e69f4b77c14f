//! Monte-Carlo simulation of social-media overuse: dual-system (model-free +
//! model-based) reinforcement-learning users, a non-stationary bandit
//! recommender, and small tabular environments.

pub mod agent;
pub mod chart;
pub mod config;
pub mod environments;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod output;
pub mod recommender;
pub mod seed;

pub use error::{Result, SimError};
