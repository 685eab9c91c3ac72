//! Optimistic model-based reinforcement learning for communicating MDPs with
//! Kullback-Leibler (KL-UCRL) and L¹ (UCRL2) confidence sets.

pub mod agents;
pub mod envs;
pub mod error;
pub mod evi;
pub mod harness;
pub mod klopt;
pub mod mdp;

pub use error::{Error, Result};
