//! Action-poisoning attack simulation for tabular episodic reinforcement learning.
//!
//! An attacker sits between the agent and the environment and may replace the
//! agent's chosen action before the environment executes it, trying to force
//! the agent onto a target policy at sub-linear cost and loss. This crate
//! provides:
//!
//! - exact representation and solution of finite-horizon tabular MDPs ([`mdp`]),
//! - benchmark environment generators ([`envs`]),
//! - a UCB-Hoeffding Q-learning agent behind a uniform agent interface ([`agents`]),
//! - white-box and black-box action-poisoning attack strategies ([`attackers`]),
//! - a deterministic, seeded experiment harness with metrics accounting ([`harness`]).

pub mod agents;
pub mod attackers;
pub mod config;
pub mod envs;
pub mod harness;
pub mod mdp;
pub mod rng;

pub use config::ExperimentConfig;
pub use harness::{run_experiment, MetricsSeries, Simulation};
pub use mdp::{MdpSpec, Policy, RewardNoise, ValueTables};
