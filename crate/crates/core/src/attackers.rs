//! Action-poisoning middleware. Given the agent's chosen action at `(s, h)`,
//! an attacker decides which action the environment actually executes. The
//! black-box LCB-H attacker additionally learns the target policy's Q-values
//! from the observations alone, via importance sampling.

use ndarray::Array3;
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::mdp::{MdpError, Policy};
use crate::rng::Stream;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("LCB-H requires horizon >= 2 (the H/(H-1) weight is undefined at H=1)")]
    HorizonTooShort,
    #[error("failure probability must lie in (0, 1), got {0}")]
    BadFailureProb(f64),
    #[error("planned total steps must be positive")]
    ZeroTotalSteps,
    #[error("incomplete episode tape: got {got} steps, expected {expected}")]
    IncompleteTape { got: usize, expected: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Middleware interface driven by the harness, once per executed step plus an
/// end-of-episode hook. The attacker observes only `(s, a, r, s')`.
pub trait Attacker {
    /// Decides the executed action for the agent's choice `a` at `(s, h)`.
    fn intercept(&mut self, h: usize, s: usize, a: usize, rng: &mut Stream) -> usize;

    /// Reports the completed step: the agent chose `a_agent`, the environment
    /// executed `a_exec` and returned `(r, s_next)`.
    fn observe(&mut self, h: usize, s: usize, a_agent: usize, a_exec: usize, r: f64, s_next: usize) {
        let _ = (h, s, a_agent, a_exec, r, s_next);
    }

    /// Fires after the H-th step of each episode.
    fn end_episode(&mut self) {}

    /// Learned tables for offline analysis, if the attacker keeps any.
    fn dump_state(&self) -> Option<serde_json::Value> {
        None
    }
}

/// Baseline: never attacks.
pub struct NoAttack;

impl Attacker for NoAttack {
    fn intercept(&mut self, _h: usize, _s: usize, a: usize, _rng: &mut Stream) -> usize {
        a
    }
}

/// White-box exchange attack: swap the optimal and target actions, leave
/// everything else alone. Attacks target actions by design, so its cost can
/// grow linearly even when the loss does not.
pub struct ExchangeAttack {
    optimal: Vec<Vec<usize>>,
    target: Vec<Vec<usize>>,
}

impl ExchangeAttack {
    pub fn new(optimal: &Policy, target: &Policy) -> Result<Self, AttackError> {
        Ok(Self { optimal: optimal.action_table()?.clone(), target: target.action_table()?.clone() })
    }
}

impl Attacker for ExchangeAttack {
    fn intercept(&mut self, h: usize, s: usize, a: usize, _rng: &mut Stream) -> usize {
        let best = self.optimal[h][s];
        let tgt = self.target[h][s];
        if a == best {
            tgt
        } else if a == tgt {
            best
        } else {
            a
        }
    }
}

/// White-box alpha-portion attack: target actions pass untouched; any other
/// action is replaced by the target action with probability `1 - alpha` and by
/// the worst action (argmin of the target policy's Q) with probability `alpha`.
pub struct AlphaPortionAttack {
    target: Vec<Vec<usize>>,
    worst: Vec<Vec<usize>>,
    alpha: f64,
}

impl AlphaPortionAttack {
    pub fn new(target: &Policy, worst: &Policy, alpha: f64) -> Result<Self, AttackError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(AttackError::AlphaOutOfRange(alpha));
        }
        Ok(Self { target: target.action_table()?.clone(), worst: worst.action_table()?.clone(), alpha })
    }
}

impl Attacker for AlphaPortionAttack {
    fn intercept(&mut self, h: usize, s: usize, a: usize, rng: &mut Stream) -> usize {
        let tgt = self.target[h][s];
        if a == tgt {
            return a; // no attack, no randomness consumed
        }
        if rng.gen::<f64>() < self.alpha {
            self.worst[h][s]
        } else {
            tgt
        }
    }
}

/// One executed step on an episode tape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TapeStep {
    pub state: usize,
    pub agent_action: usize,
    pub executed_action: usize,
    /// Importance-sampling weight: 1 when no attack happened, 0 when the
    /// action was changed to a non-target action, H/(H-1) when it was changed
    /// to the target action.
    pub weight: f64,
    pub reward: f64,
}

/// Per-episode record of executed steps, in step order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EpisodeTape {
    pub steps: Vec<TapeStep>,
}

impl EpisodeTape {
    pub fn push(&mut self, step: TapeStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Half-width of the Q-estimate confidence interval after `t` samples at a
/// step with `steps_remaining` steps left in the episode:
/// `(e * steps_remaining + 1) * sqrt(2 iota / t)`.
pub fn lcb_width(steps_remaining: usize, t: u64, iota: f64) -> f64 {
    assert!(t >= 1, "confidence width needs at least one sample");
    (std::f64::consts::E * steps_remaining as f64 + 1.0) * (2.0 * iota / t as f64).sqrt()
}

/// Hyperparameters of the LCB-H attacker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LcbhConfig {
    /// Failure probability entering `iota = ln(2 S A T / p)`.
    pub failure_prob: f64,
    /// Planned total steps `T = K * H`.
    pub total_steps: u64,
}

/// Black-box LCB-H attack.
///
/// Target actions pass untouched. A non-target action is changed to the
/// target action with probability `1 - 1/H`, and with probability `1/H` to
/// the non-target action with the lowest lower confidence bound, which
/// explores and exploits the worst action. At episode end a backward pass
/// feeds each executed pair an importance-sampled return and refreshes its
/// lower bound.
pub struct LcbhAttack {
    target: Vec<Vec<usize>>,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    iota: f64,
    n: Array3<u64>,
    q_hat: Array3<f64>,
    lower: Array3<f64>,
    tape: EpisodeTape,
}

impl LcbhAttack {
    pub fn new(
        target: &Policy,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        config: LcbhConfig,
    ) -> Result<Self, AttackError> {
        if horizon < 2 {
            return Err(AttackError::HorizonTooShort);
        }
        if !(config.failure_prob > 0.0 && config.failure_prob < 1.0) {
            return Err(AttackError::BadFailureProb(config.failure_prob));
        }
        if config.total_steps == 0 {
            return Err(AttackError::ZeroTotalSteps);
        }
        let iota = (2.0 * num_states as f64 * num_actions as f64 * config.total_steps as f64
            / config.failure_prob)
            .ln();
        Ok(Self {
            target: target.action_table()?.clone(),
            num_states,
            num_actions,
            horizon,
            iota,
            n: Array3::zeros((horizon, num_states, num_actions)),
            q_hat: Array3::zeros((horizon, num_states, num_actions)),
            lower: Array3::from_elem((horizon, num_states, num_actions), f64::NEG_INFINITY),
            tape: EpisodeTape::default(),
        })
    }

    /// Non-target action with the lowest lower bound; ties and untried
    /// (`-inf`) entries resolve to the lowest index, so untried actions are
    /// explored first.
    fn argmin_lower_non_target(&self, h: usize, s: usize) -> usize {
        let tgt = self.target[h][s];
        let mut best = usize::MAX;
        let mut best_v = f64::INFINITY;
        for a in 0..self.num_actions {
            if a == tgt {
                continue;
            }
            let v = self.lower[[h, s, a]];
            if best == usize::MAX || v < best_v {
                best_v = v;
                best = a;
            }
        }
        best
    }

    /// The intercept rule: returns the executed action and its IS weight.
    pub fn intercept_action<R: Rng>(
        &self,
        h: usize,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> (usize, f64) {
        let tgt = self.target[h][s];
        if a == tgt {
            return (a, 1.0);
        }
        let h_f = self.horizon as f64;
        if rng.gen::<f64>() < 1.0 / h_f {
            (self.argmin_lower_non_target(h, s), 0.0)
        } else {
            (tgt, h_f / (h_f - 1.0))
        }
    }

    /// IS weight implied by a completed step, derived from the tape invariant:
    /// 1 when the agent chose the target action, H/(H-1) when a non-target
    /// choice was redirected to the target, 0 otherwise.
    pub fn weight_for(&self, h: usize, s: usize, a_agent: usize, a_exec: usize) -> f64 {
        let tgt = self.target[h][s];
        if a_agent == tgt {
            1.0
        } else if a_exec == tgt {
            let h_f = self.horizon as f64;
            h_f / (h_f - 1.0)
        } else {
            0.0
        }
    }

    /// Backward pass over a complete episode tape: for `h = H..1`, feed the
    /// executed pair the sample `r_h + G_{h+1} * rho_{h+1:H+1}`, keep the
    /// running mean exact, and refresh the lower bound with the confidence
    /// width. `G_{H+1} = 0`, `rho_{H+1:H+1} = 1`.
    pub fn end_episode_update(&mut self, tape: &EpisodeTape) -> Result<(), AttackError> {
        if tape.len() != self.horizon {
            return Err(AttackError::IncompleteTape { got: tape.len(), expected: self.horizon });
        }
        let mut g_next = 0.0;
        let mut rho_next = 1.0;
        for (h, step) in tape.steps.iter().enumerate().rev() {
            let sample = step.reward + g_next * rho_next;
            let cell = [h, step.state, step.executed_action];
            self.n[cell] += 1;
            let t = self.n[cell];
            let inv = 1.0 / t as f64;
            self.q_hat[cell] = (1.0 - inv) * self.q_hat[cell] + inv * sample;
            self.lower[cell] = self.q_hat[cell] - lcb_width(self.horizon - 1 - h, t, self.iota);
            g_next += step.reward;
            rho_next *= step.weight;
        }
        Ok(())
    }

    pub fn visit_counts(&self) -> &Array3<u64> {
        &self.n
    }

    pub fn q_hat(&self) -> &Array3<f64> {
        &self.q_hat
    }

    pub fn lower_bounds(&self) -> &Array3<f64> {
        &self.lower
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }
}

impl Attacker for LcbhAttack {
    fn intercept(&mut self, h: usize, s: usize, a: usize, rng: &mut Stream) -> usize {
        self.intercept_action(h, s, a, rng).0
    }

    fn observe(&mut self, h: usize, s: usize, a_agent: usize, a_exec: usize, r: f64, _s_next: usize) {
        let weight = self.weight_for(h, s, a_agent, a_exec);
        debug_assert_eq!(self.tape.len(), h, "steps must be observed in order");
        self.tape.push(TapeStep {
            state: s,
            agent_action: a_agent,
            executed_action: a_exec,
            weight,
            reward: r,
        });
    }

    fn end_episode(&mut self) {
        let tape = std::mem::take(&mut self.tape);
        self.end_episode_update(&tape).expect("harness feeds complete episodes");
    }

    fn dump_state(&self) -> Option<serde_json::Value> {
        let to_nested = |arr: &Array3<f64>| -> Vec<Vec<Vec<f64>>> {
            (0..self.horizon)
                .map(|h| {
                    (0..self.num_states)
                        .map(|s| (0..self.num_actions).map(|a| arr[[h, s, a]]).collect())
                        .collect()
                })
                .collect()
        };
        let counts: Vec<Vec<Vec<u64>>> = (0..self.horizon)
            .map(|h| {
                (0..self.num_states)
                    .map(|s| (0..self.num_actions).map(|a| self.n[[h, s, a]]).collect())
                    .collect()
            })
            .collect();
        Some(json!({
            "kind": "lcb_h",
            "iota": self.iota,
            "N": counts,
            "Q_hat": to_nested(&self.q_hat),
            "L": to_nested(&self.lower),
        }))
    }
}
