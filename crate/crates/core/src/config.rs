//! Experiment configuration: JSON-serializable description of one run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agents::QInit;
use crate::envs::Grid1dParams;
use crate::mdp::MdpSpec;

fn default_failure_prob() -> f64 {
    0.05
}

fn default_bonus_c() -> f64 {
    2.0
}

fn default_checkpoints() -> usize {
    50
}

/// Which environment a run uses and how it is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    /// Periodic 1-d grid world.
    Grid1d {
        #[serde(flatten)]
        params: Grid1dParams,
    },
    /// Fixed 4x4 grid world with obstacles.
    Grid2d,
    /// Random tabular MDP (Dirichlet rows, uniform rewards).
    Random { num_states: usize, num_actions: usize, horizon: usize, seed: u64 },
    /// MDP spec loaded from a JSON file.
    SpecFile { path: PathBuf },
    /// MDP spec embedded in the config document.
    Inline { spec: MdpSpec },
}

/// Agent selection and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentConfig {
    UcbH {
        #[serde(default = "default_bonus_c")]
        c: f64,
        #[serde(default = "default_failure_prob")]
        p: f64,
        #[serde(default)]
        q_init: QInit,
    },
    /// Baseline that plays a fixed policy and never learns.
    Oracle { plays: OraclePolicy },
}

/// Which policy an oracle agent plays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OraclePolicy {
    Optimal,
    Target,
}

/// Attacker selection and parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackerConfig {
    #[default]
    None,
    Exchange,
    AlphaPortion { alpha: f64 },
    LcbH {
        #[serde(default = "default_failure_prob")]
        p: f64,
    },
}

impl AttackerConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AttackerConfig::None => "none",
            AttackerConfig::Exchange => "exchange",
            AttackerConfig::AlphaPortion { .. } => "alpha_portion",
            AttackerConfig::LcbH { .. } => "lcb_h",
        }
    }
}

/// Where the target policy comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetConfig {
    /// Rejection-sampled admissible policy; errors if none is found.
    Generated {
        #[serde(default)]
        seed: u64,
    },
    /// Built-in fixture for the 2-d grid world (walks to the terminal,
    /// avoiding the special jump).
    Grid2dNoJump,
    /// Explicit deterministic action table `[h][s]`.
    Explicit { actions: Vec<Vec<usize>> },
    /// Policy loaded from a JSON file.
    File { path: PathBuf },
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig::Generated { seed: 0 }
    }
}

/// Full description of one experiment run. Deterministic given `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvConfig,
    pub agent: AgentConfig,
    #[serde(default)]
    pub attacker: AttackerConfig,
    #[serde(default)]
    pub target: TargetConfig,
    /// Number of episodes K; the planned step budget is T = K * H.
    pub episodes: u64,
    /// Master seed; fans out into the four per-party streams.
    pub seed: u64,
    /// Number of log-spaced metric checkpoints.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
