//! Deadline-aware MU-MIMO downlink scheduling with a hybrid-policy
//! reinforcement learner.

pub mod baselines;
pub mod env;
pub mod harness_cli;
pub mod mimo_phy;
pub mod policy;
pub mod ssca_trainer;
pub mod traffic_queue;
pub mod wsr_scheduler;
