//! RL agents behind a uniform interface: choose an action for `(state, step)`,
//! then observe `(reward, next state)` for the action they believe was
//! executed. Agents never see the attacker.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{argmax_first, MdpError, Policy};
use crate::rng::Stream;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("bonus constant c must be positive, got {0}")]
    NonPositiveBonus(f64),
    #[error("failure probability must lie in (0, 1), got {0}")]
    BadFailureProb(f64),
    #[error("planned total steps must be positive")]
    ZeroTotalSteps,
    #[error("oracle agent requires a deterministic policy")]
    StochasticPolicy,
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Uniform agent interface driven by the harness.
pub trait Agent {
    fn choose(&mut self, s: usize, h: usize, rng: &mut Stream) -> usize;
    fn update(&mut self, h: usize, s: usize, a: usize, r: f64, s_next: usize);
}

/// Q-table initialization mode.
///
/// The optimistic mode starts every estimate at the maximum attainable value
/// `H`; both modes are exposed because the printed algorithm initializes at 0
/// while its analysis presumes the optimistic start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QInit {
    #[default]
    Optimistic,
    Zero,
}

/// Hyperparameters of the UCB-Hoeffding Q-learning agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcbhConfig {
    /// Bonus constant in `b_t = c sqrt(H^3 iota / t)`.
    pub c: f64,
    /// Failure probability entering `iota = ln(2 S A T / p)`.
    pub failure_prob: f64,
    /// Planned total steps `T = K * H`.
    pub total_steps: u64,
    pub q_init: QInit,
}

impl UcbhConfig {
    pub fn new(total_steps: u64) -> Self {
        Self { c: 2.0, failure_prob: 0.05, total_steps, q_init: QInit::Optimistic }
    }
}

/// Q-learning with UCB-Hoeffding exploration.
///
/// Acts greedily on optimistic Q estimates; updates with learning rate
/// `alpha_t = (H + 1) / (H + t)` and bonus `b_t = c sqrt(H^3 iota / t)`,
/// clipping state values at `H`.
pub struct UcbH {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    q: Array3<f64>,
    n: Array3<u64>,
    v: Array2<f64>,
    c: f64,
    iota: f64,
}

impl UcbH {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        config: UcbhConfig,
    ) -> Result<Self, AgentError> {
        if !(config.c > 0.0) {
            return Err(AgentError::NonPositiveBonus(config.c));
        }
        if !(config.failure_prob > 0.0 && config.failure_prob < 1.0) {
            return Err(AgentError::BadFailureProb(config.failure_prob));
        }
        if config.total_steps == 0 {
            return Err(AgentError::ZeroTotalSteps);
        }
        let iota = (2.0 * num_states as f64 * num_actions as f64 * config.total_steps as f64
            / config.failure_prob)
            .ln();
        let init = match config.q_init {
            QInit::Optimistic => horizon as f64,
            QInit::Zero => 0.0,
        };
        let mut v = Array2::from_elem((horizon + 1, num_states), init.min(horizon as f64));
        v.row_mut(horizon).fill(0.0);
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            q: Array3::from_elem((horizon, num_states, num_actions), init),
            n: Array3::zeros((horizon, num_states, num_actions)),
            v,
            c: config.c,
            iota,
        })
    }

    /// Greedy action on the current Q estimates; pure, lowest-index tie-break.
    pub fn choose_action(&self, s: usize, h: usize) -> usize {
        argmax_first(self.q.slice(ndarray::s![h, s, ..]))
    }

    /// One Q-learning update for an executed step.
    pub fn observe(&mut self, h: usize, s: usize, a: usize, r: f64, s_next: usize) {
        self.n[[h, s, a]] += 1;
        let t = self.n[[h, s, a]] as f64;
        let h_f = self.horizon as f64;
        let alpha = (h_f + 1.0) / (h_f + t);
        let bonus = self.c * (h_f.powi(3) * self.iota / t).sqrt();
        let q = &mut self.q[[h, s, a]];
        *q = (1.0 - alpha) * *q + alpha * (r + self.v[[h + 1, s_next]] + bonus);
        let best = argmax_first(self.q.slice(ndarray::s![h, s, ..]));
        self.v[[h, s]] = self.q[[h, s, best]].min(h_f);
    }

    pub fn q_table(&self) -> &Array3<f64> {
        &self.q
    }

    pub fn visit_counts(&self) -> &Array3<u64> {
        &self.n
    }

    pub fn v_table(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_states, self.num_actions, self.horizon)
    }
}

impl Agent for UcbH {
    fn choose(&mut self, s: usize, h: usize, _rng: &mut Stream) -> usize {
        self.choose_action(s, h)
    }

    fn update(&mut self, h: usize, s: usize, a: usize, r: f64, s_next: usize) {
        self.observe(h, s, a, r, s_next);
    }
}

/// Baseline agent that plays a fixed deterministic policy and never learns.
pub struct GreedyOracle {
    actions: Vec<Vec<usize>>,
}

impl GreedyOracle {
    pub fn new(policy: &Policy) -> Result<Self, AgentError> {
        let actions =
            policy.action_table().map_err(|_| AgentError::StochasticPolicy)?.clone();
        Ok(Self { actions })
    }
}

impl Agent for GreedyOracle {
    fn choose(&mut self, s: usize, h: usize, _rng: &mut Stream) -> usize {
        self.actions[h][s]
    }

    fn update(&mut self, _h: usize, _s: usize, _a: usize, _r: f64, _s_next: usize) {}
}
