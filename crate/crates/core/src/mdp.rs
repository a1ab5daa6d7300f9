//! Exact representation and solution of finite-horizon tabular MDPs.
//!
//! All tables are dense row-major arrays of `f64` indexed `[h][s][a]` (plus a
//! trailing `[s']` axis for transitions), with steps `h` 0-indexed so the last
//! in-episode step is `h = horizon - 1`. Value tables carry an extra terminal
//! row `v[horizon][..] = 0`.

use ndarray::{Array1, Array2, Array3, Array4, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability-sum and Bellman-residual checks.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid mdp:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operation requires a deterministic policy")]
    StochasticPolicy,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

/// How the environment randomizes rewards around their means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardNoise {
    /// Reward is 0 or 1, Bernoulli with the table mean.
    Bernoulli,
    /// Reward equals the table mean exactly.
    Deterministic,
}

/// A finite-horizon tabular MDP.
///
/// Immutable after construction; shared freely across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Transition tensor `[h][s][a][s']`.
    pub transitions: Array4<f64>,
    /// Mean-reward table `[h][s][a]`, entries in `[0, 1]`.
    pub mean_rewards: Array3<f64>,
    /// Distribution of the episode start state.
    pub initial_dist: Array1<f64>,
    pub reward_noise: RewardNoise,
}

/// An agent or attacker policy, `(state, step)`-indexed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// `actions[h][s]` is the action taken at step `h` in state `s`.
    Deterministic { actions: Vec<Vec<usize>> },
    /// `probs[h][s][a]` is the probability of action `a`; rows sum to 1.
    Stochastic { probs: Vec<Vec<Vec<f64>>> },
}

impl Policy {
    pub fn deterministic(actions: Vec<Vec<usize>>) -> Self {
        Policy::Deterministic { actions }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Policy::Deterministic { actions } => actions.len(),
            Policy::Stochastic { probs } => probs.len(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Deterministic { .. })
    }

    /// Action table of a deterministic policy.
    pub fn action_table(&self) -> Result<&Vec<Vec<usize>>, MdpError> {
        match self {
            Policy::Deterministic { actions } => Ok(actions),
            Policy::Stochastic { .. } => Err(MdpError::StochasticPolicy),
        }
    }

    /// The deterministic action at `(h, s)`.
    pub fn action(&self, h: usize, s: usize) -> Result<usize, MdpError> {
        Ok(self.action_table()?[h][s])
    }

    /// Checks shape against `spec` and the per-kind invariants
    /// (deterministic entries `< A`; stochastic rows nonnegative, summing to 1).
    pub fn validate(&self, spec: &MdpSpec) -> Result<(), MdpError> {
        let (h, s, a) = (spec.horizon, spec.num_states, spec.num_actions);
        match self {
            Policy::Deterministic { actions } => {
                if actions.len() != h || actions.iter().any(|row| row.len() != s) {
                    return Err(MdpError::DimensionMismatch(format!(
                        "policy shape does not match H={h} S={s}"
                    )));
                }
                for (hi, row) in actions.iter().enumerate() {
                    for (si, &ai) in row.iter().enumerate() {
                        if ai >= a {
                            return Err(MdpError::InvalidPolicy(format!(
                                "action {ai} at (h={hi}, s={si}) exceeds A={a}"
                            )));
                        }
                    }
                }
            }
            Policy::Stochastic { probs } => {
                if probs.len() != h
                    || probs.iter().any(|row| row.len() != s)
                    || probs.iter().flatten().any(|p| p.len() != a)
                {
                    return Err(MdpError::DimensionMismatch(format!(
                        "policy shape does not match H={h} S={s} A={a}"
                    )));
                }
                for (hi, row) in probs.iter().enumerate() {
                    for (si, dist) in row.iter().enumerate() {
                        if dist.iter().any(|&p| p < 0.0) {
                            return Err(MdpError::InvalidPolicy(format!(
                                "negative probability at (h={hi}, s={si})"
                            )));
                        }
                        let sum: f64 = dist.iter().sum();
                        if (sum - 1.0).abs() > PROB_TOL {
                            return Err(MdpError::InvalidPolicy(format!(
                                "row sum {sum} at (h={hi}, s={si})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Value and Q tables from backward induction.
///
/// `v` has `horizon + 1` rows with `v[horizon][..] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTables {
    pub v: Array2<f64>,
    pub q: Array3<f64>,
}

/// Index of the largest entry; ties broken by lowest index.
pub(crate) fn argmax_first(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &x) in row.iter().enumerate() {
        if x > best_v {
            best_v = x;
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; ties broken by lowest index.
pub(crate) fn argmin_first(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, &x) in row.iter().enumerate() {
        if x < best_v {
            best_v = x;
            best = i;
        }
    }
    best
}

impl MdpSpec {
    /// Confirms every structural invariant, listing all violations at once.
    pub fn validate(&self) -> Result<(), MdpError> {
        let mut errors = Vec::new();
        let (h_n, s_n, a_n) = (self.horizon, self.num_states, self.num_actions);
        if h_n == 0 || s_n == 0 || a_n == 0 {
            errors.push(format!("dimensions must be positive: H={h_n} S={s_n} A={a_n}"));
        }
        if self.transitions.dim() != (h_n, s_n, a_n, s_n) {
            errors.push(format!(
                "transition tensor shape {:?} does not match (H, S, A, S)",
                self.transitions.dim()
            ));
        }
        if self.mean_rewards.dim() != (h_n, s_n, a_n) {
            errors.push(format!(
                "reward table shape {:?} does not match (H, S, A)",
                self.mean_rewards.dim()
            ));
        }
        if self.initial_dist.len() != s_n {
            errors.push(format!(
                "initial distribution length {} does not match S={s_n}",
                self.initial_dist.len()
            ));
        }
        if !errors.is_empty() {
            // Shape errors make the per-entry checks below meaningless.
            return Err(MdpError::Invalid(errors));
        }

        for h in 0..h_n {
            for s in 0..s_n {
                for a in 0..a_n {
                    let r = self.mean_rewards[[h, s, a]];
                    if !(0.0..=1.0).contains(&r) {
                        errors.push(format!("reward {r} out of [0,1] at (h={h}, s={s}, a={a})"));
                    }
                    let mut sum = 0.0;
                    for sp in 0..s_n {
                        let p = self.transitions[[h, s, a, sp]];
                        if p < 0.0 {
                            errors.push(format!(
                                "negative transition probability {p} at (h={h}, s={s}, a={a}, s'={sp})"
                            ));
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > PROB_TOL {
                        errors.push(format!("transition row sum {sum} at (h={h}, s={s}, a={a})"));
                    }
                }
            }
        }
        let init_sum: f64 = self.initial_dist.sum();
        if (init_sum - 1.0).abs() > PROB_TOL {
            errors.push(format!("initial distribution sum {init_sum}"));
        }
        if self.initial_dist.iter().any(|&p| p < 0.0) {
            errors.push("negative entry in initial distribution".to_string());
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(MdpError::Invalid(errors))
        }
    }

    /// Samples one environment step: `next_state ~ P[h][s][a]`, then the
    /// reward (Bernoulli around the mean, or exactly the mean).
    pub fn sample_step<R: Rng>(
        &self,
        s: usize,
        a: usize,
        h: usize,
        rng: &mut R,
    ) -> Result<(f64, usize), MdpError> {
        if h >= self.horizon || s >= self.num_states || a >= self.num_actions {
            return Err(MdpError::IndexOutOfRange(format!(
                "(h={h}, s={s}, a={a}) vs (H={}, S={}, A={})",
                self.horizon, self.num_states, self.num_actions
            )));
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = self.num_states - 1;
        for sp in 0..self.num_states {
            acc += self.transitions[[h, s, a, sp]];
            if u < acc {
                next = sp;
                break;
            }
        }
        let mean = self.mean_rewards[[h, s, a]];
        let reward = match self.reward_noise {
            RewardNoise::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardNoise::Deterministic => mean,
        };
        Ok((reward, next))
    }

    /// Draws an episode start state from `initial_dist`.
    pub fn sample_initial_state<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for s in 0..self.num_states {
            acc += self.initial_dist[s];
            if u < acc {
                return s;
            }
        }
        self.num_states - 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mdp spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Backward induction of `V` and `Q` for a fixed policy.
///
/// `q[h][s][a] = R[h][s][a] + sum_s' P[h][s][a][s'] v[h+1][s']` and
/// `v[h][s] = sum_a pi_h(a|s) q[h][s][a]`, with `v[H] = 0`.
pub fn evaluate_policy(spec: &MdpSpec, pi: &Policy) -> Result<ValueTables, MdpError> {
    pi.validate(spec)?;
    let (h_n, s_n, a_n) = (spec.horizon, spec.num_states, spec.num_actions);
    let mut v = Array2::<f64>::zeros((h_n + 1, s_n));
    let mut q = Array3::<f64>::zeros((h_n, s_n, a_n));
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            for a in 0..a_n {
                let mut expected = 0.0;
                for sp in 0..s_n {
                    expected += spec.transitions[[h, s, a, sp]] * v[[h + 1, sp]];
                }
                q[[h, s, a]] = spec.mean_rewards[[h, s, a]] + expected;
            }
            v[[h, s]] = match pi {
                Policy::Deterministic { actions } => q[[h, s, actions[h][s]]],
                Policy::Stochastic { probs } => {
                    let mut acc = 0.0;
                    for a in 0..a_n {
                        acc += probs[h][s][a] * q[[h, s, a]];
                    }
                    acc
                }
            };
        }
    }
    Ok(ValueTables { v, q })
}

/// Bellman-optimality backward induction: `v[h][s] = max_a q[h][s][a]`, with
/// the returned deterministic policy taking the argmax (lowest index on ties).
pub fn solve_optimal(spec: &MdpSpec) -> (ValueTables, Policy) {
    let (h_n, s_n, a_n) = (spec.horizon, spec.num_states, spec.num_actions);
    let mut v = Array2::<f64>::zeros((h_n + 1, s_n));
    let mut q = Array3::<f64>::zeros((h_n, s_n, a_n));
    let mut actions = vec![vec![0usize; s_n]; h_n];
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            for a in 0..a_n {
                let mut expected = 0.0;
                for sp in 0..s_n {
                    expected += spec.transitions[[h, s, a, sp]] * v[[h + 1, sp]];
                }
                q[[h, s, a]] = spec.mean_rewards[[h, s, a]] + expected;
            }
            let best = argmax_first(q.slice(ndarray::s![h, s, ..]));
            actions[h][s] = best;
            v[[h, s]] = q[[h, s, best]];
        }
    }
    (ValueTables { v, q }, Policy::Deterministic { actions })
}

/// The minimum gap of a deterministic target policy:
/// `min_{h,s} ( V_h(s) - min_a Q_h(s,a) )` under that policy's own tables.
pub fn minimum_gap(spec: &MdpSpec, target: &Policy) -> Result<f64, MdpError> {
    target.action_table()?;
    let tables = evaluate_policy(spec, target)?;
    let mut gap = f64::INFINITY;
    for h in 0..spec.horizon {
        for s in 0..spec.num_states {
            let row = tables.q.slice(ndarray::s![h, s, ..]);
            let worst = row[argmin_first(row)];
            gap = gap.min(tables.v[[h, s]] - worst);
        }
    }
    Ok(gap)
}

/// Whether the target policy is strictly better than the per-state worst
/// action under its own Q-function, at every `(s, h)`.
///
/// Uses a strict comparison with no tolerance: the gap must be genuinely
/// positive for an efficient attack to exist.
pub fn check_target_admissible(spec: &MdpSpec, target: &Policy) -> Result<bool, MdpError> {
    target.action_table()?;
    let tables = evaluate_policy(spec, target)?;
    for h in 0..spec.horizon {
        for s in 0..spec.num_states {
            let row = tables.q.slice(ndarray::s![h, s, ..]);
            let worst = row[argmin_first(row)];
            if !(tables.v[[h, s]] > worst) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Per-`(s, h)` argmin of the target policy's Q-function, ties broken by
/// lowest action index.
pub fn worst_action_policy(spec: &MdpSpec, target: &Policy) -> Result<Policy, MdpError> {
    target.action_table()?;
    let tables = evaluate_policy(spec, target)?;
    let mut actions = vec![vec![0usize; spec.num_states]; spec.horizon];
    for h in 0..spec.horizon {
        for s in 0..spec.num_states {
            actions[h][s] = argmin_first(tables.q.slice(ndarray::s![h, s, ..]));
        }
    }
    Ok(Policy::Deterministic { actions })
}

/// The environment an agent effectively faces under the alpha-portion attack:
/// rows for the target action are untouched; every other action's reward and
/// transition row become the `(1 - alpha)`/`alpha` mixture of the target and
/// worst action rows.
pub fn build_alpha_attacked_mdp(
    spec: &MdpSpec,
    target: &Policy,
    alpha: f64,
) -> Result<MdpSpec, MdpError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MdpError::AlphaOutOfRange(alpha));
    }
    let target_actions = target.action_table()?.clone();
    target.validate(spec)?;
    let worst = worst_action_policy(spec, target)?;
    let worst_actions = worst.action_table()?.clone();

    let mut attacked = spec.clone();
    for h in 0..spec.horizon {
        for s in 0..spec.num_states {
            let at = target_actions[h][s];
            let aw = worst_actions[h][s];
            let r_mix = (1.0 - alpha) * spec.mean_rewards[[h, s, at]]
                + alpha * spec.mean_rewards[[h, s, aw]];
            for a in 0..spec.num_actions {
                if a == at {
                    continue;
                }
                attacked.mean_rewards[[h, s, a]] = r_mix;
                for sp in 0..spec.num_states {
                    attacked.transitions[[h, s, a, sp]] = (1.0 - alpha)
                        * spec.transitions[[h, s, at, sp]]
                        + alpha * spec.transitions[[h, s, aw, sp]];
                }
            }
        }
    }
    Ok(attacked)
}

// ------------------------------------------------------------------ serde --

/// JSON wire form: `{S, A, H, P, R, initial_dist, reward_noise}` with `P` a
/// 4-level nested array `[h][s][a][s']` and `R` a 3-level array.
#[derive(Serialize, Deserialize)]
struct MdpSpecJson {
    #[serde(rename = "S")]
    num_states: usize,
    #[serde(rename = "A")]
    num_actions: usize,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "P")]
    transitions: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "R")]
    mean_rewards: Vec<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
    reward_noise: RewardNoise,
}

impl From<&MdpSpec> for MdpSpecJson {
    fn from(spec: &MdpSpec) -> Self {
        let (h_n, s_n, a_n) = (spec.horizon, spec.num_states, spec.num_actions);
        let transitions = (0..h_n)
            .map(|h| {
                (0..s_n)
                    .map(|s| {
                        (0..a_n)
                            .map(|a| (0..s_n).map(|sp| spec.transitions[[h, s, a, sp]]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mean_rewards = (0..h_n)
            .map(|h| {
                (0..s_n)
                    .map(|s| (0..a_n).map(|a| spec.mean_rewards[[h, s, a]]).collect())
                    .collect()
            })
            .collect();
        Self {
            num_states: s_n,
            num_actions: a_n,
            horizon: h_n,
            transitions,
            mean_rewards,
            initial_dist: spec.initial_dist.to_vec(),
            reward_noise: spec.reward_noise,
        }
    }
}

impl TryFrom<MdpSpecJson> for MdpSpec {
    type Error = String;

    fn try_from(json: MdpSpecJson) -> Result<Self, String> {
        let (h_n, s_n, a_n) = (json.horizon, json.num_states, json.num_actions);
        let mut transitions = Array4::<f64>::zeros((h_n, s_n, a_n, s_n));
        let mut mean_rewards = Array3::<f64>::zeros((h_n, s_n, a_n));
        if json.transitions.len() != h_n || json.mean_rewards.len() != h_n {
            return Err("P and R must have H outer levels".to_string());
        }
        for h in 0..h_n {
            if json.transitions[h].len() != s_n || json.mean_rewards[h].len() != s_n {
                return Err(format!("P[{h}] and R[{h}] must have S rows"));
            }
            for s in 0..s_n {
                if json.transitions[h][s].len() != a_n || json.mean_rewards[h][s].len() != a_n {
                    return Err(format!("P[{h}][{s}] and R[{h}][{s}] must have A entries"));
                }
                for a in 0..a_n {
                    if json.transitions[h][s][a].len() != s_n {
                        return Err(format!("P[{h}][{s}][{a}] must have S entries"));
                    }
                    mean_rewards[[h, s, a]] = json.mean_rewards[h][s][a];
                    for sp in 0..s_n {
                        transitions[[h, s, a, sp]] = json.transitions[h][s][a][sp];
                    }
                }
            }
        }
        if json.initial_dist.len() != s_n {
            return Err("initial_dist length must equal S".to_string());
        }
        Ok(MdpSpec {
            num_states: s_n,
            num_actions: a_n,
            horizon: h_n,
            transitions,
            mean_rewards,
            initial_dist: Array1::from_vec(json.initial_dist),
            reward_noise: json.reward_noise,
        })
    }
}

impl Serialize for MdpSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MdpSpecJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MdpSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = MdpSpecJson::deserialize(deserializer)?;
        MdpSpec::try_from(json).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;

    fn two_state_spec() -> MdpSpec {
        MdpSpec {
            num_states: 2,
            num_actions: 2,
            horizon: 1,
            transitions: Array4::from_shape_vec(
                (1, 2, 2, 2),
                vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            )
            .unwrap(),
            mean_rewards: Array3::from_shape_vec((1, 2, 2), vec![0.1, 0.9, 0.4, 0.2]).unwrap(),
            initial_dist: array![0.5, 0.5],
            reward_noise: RewardNoise::Deterministic,
        }
    }

    #[test]
    fn validate_accepts_well_formed_spec() {
        assert!(two_state_spec().validate().is_ok());
    }

    #[test]
    fn validate_reports_reward_out_of_range() {
        let mut spec = two_state_spec();
        spec.mean_rewards[[0, 0, 0]] = 1.2;
        let err = spec.validate().unwrap_err();
        let MdpError::Invalid(msgs) = err else { panic!("expected Invalid") };
        assert!(msgs.iter().any(|m| m.contains("reward 1.2 out of [0,1]")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("(h=0, s=0, a=0)")), "{msgs:?}");
    }

    #[test]
    fn validate_reports_bad_row_sum() {
        let mut spec = two_state_spec();
        spec.transitions[[0, 0, 0, 0]] = 0.6;
        spec.transitions[[0, 0, 0, 1]] = 0.5;
        let err = spec.validate().unwrap_err();
        let MdpError::Invalid(msgs) = err else { panic!("expected Invalid") };
        assert!(msgs.iter().any(|m| m.contains("row sum 1.1")), "{msgs:?}");
    }

    #[test]
    fn validate_collects_multiple_violations() {
        let mut spec = two_state_spec();
        spec.mean_rewards[[0, 0, 0]] = -0.1;
        spec.transitions[[0, 1, 1, 0]] = -0.2;
        let MdpError::Invalid(msgs) = spec.validate().unwrap_err() else { panic!() };
        assert!(msgs.len() >= 3, "{msgs:?}"); // bad reward, negative prob, bad row sum
    }

    #[test]
    fn evaluate_zero_rewards_gives_zero_tables() {
        let mut spec = two_state_spec();
        spec.mean_rewards.fill(0.0);
        let pi = Policy::deterministic(vec![vec![0, 1]]);
        let tables = evaluate_policy(&spec, &pi).unwrap();
        assert!(tables.v.iter().all(|&x| x == 0.0));
        assert!(tables.q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn horizon_one_q_equals_rewards() {
        let spec = two_state_spec();
        let pi = Policy::deterministic(vec![vec![1, 0]]);
        let tables = evaluate_policy(&spec, &pi).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert_eq!(tables.q[[0, s, a]], spec.mean_rewards[[0, s, a]]);
            }
        }
        assert_eq!(tables.v[[0, 0]], 0.9);
        assert_eq!(tables.v[[0, 1]], 0.4);
    }

    #[test]
    fn horizon_one_optimal_is_reward_argmax() {
        let spec = two_state_spec();
        let (tables, pi) = solve_optimal(&spec);
        assert_eq!(pi.action_table().unwrap(), &vec![vec![1, 0]]);
        assert_eq!(tables.v[[0, 0]], 0.9);
        assert_eq!(tables.v[[0, 1]], 0.4);
    }

    #[test]
    fn dominant_action_is_chosen_everywhere() {
        // Action 1 strictly dominates at every (s, h).
        let mut spec = two_state_spec();
        spec.horizon = 2;
        spec.transitions = Array4::from_shape_fn((2, 2, 2, 2), |(_, s, a, sp)| {
            let next = if a == 0 { s } else { 1 - s };
            if sp == next {
                1.0
            } else {
                0.0
            }
        });
        spec.mean_rewards =
            Array3::from_shape_vec((2, 2, 2), vec![0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9])
                .unwrap();
        let (_, pi) = solve_optimal(&spec);
        assert_eq!(pi.action_table().unwrap(), &vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn single_action_mdp_has_zero_gap_and_is_inadmissible() {
        let spec = MdpSpec {
            num_states: 1,
            num_actions: 1,
            horizon: 2,
            transitions: Array4::from_elem((2, 1, 1, 1), 1.0),
            mean_rewards: Array3::from_elem((2, 1, 1), 0.5),
            initial_dist: array![1.0],
            reward_noise: RewardNoise::Deterministic,
        };
        let target = Policy::deterministic(vec![vec![0], vec![0]]);
        assert_eq!(minimum_gap(&spec, &target).unwrap(), 0.0);
        assert!(!check_target_admissible(&spec, &target).unwrap());
    }

    #[test]
    fn worst_action_tie_break_takes_lowest_index() {
        let mut spec = two_state_spec();
        spec.mean_rewards.fill(0.5);
        // Symmetric transitions: both actions uniform.
        spec.transitions = Array4::from_elem((1, 2, 2, 2), 0.5);
        let target = Policy::deterministic(vec![vec![0, 0]]);
        let worst = worst_action_policy(&spec, &target).unwrap();
        assert_eq!(worst.action_table().unwrap(), &vec![vec![0, 0]]);
    }

    #[test]
    fn horizon_one_worst_is_reward_argmin() {
        let spec = two_state_spec();
        let target = Policy::deterministic(vec![vec![1, 0]]);
        let worst = worst_action_policy(&spec, &target).unwrap();
        assert_eq!(worst.action_table().unwrap(), &vec![vec![0, 1]]);
    }

    #[test]
    fn alpha_one_replaces_non_target_rows_with_worst_rows() {
        let spec = two_state_spec();
        let target = Policy::deterministic(vec![vec![1, 0]]);
        let worst = worst_action_policy(&spec, &target).unwrap();
        let attacked = build_alpha_attacked_mdp(&spec, &target, 1.0).unwrap();
        for s in 0..2 {
            let at = target.action(0, s).unwrap();
            let aw = worst.action(0, s).unwrap();
            for a in 0..2 {
                let src = if a == at { a } else { aw };
                assert_eq!(attacked.mean_rewards[[0, s, a]], spec.mean_rewards[[0, s, src]]);
                for sp in 0..2 {
                    assert_eq!(
                        attacked.transitions[[0, s, a, sp]],
                        spec.transitions[[0, s, src, sp]]
                    );
                }
            }
        }
    }

    #[test]
    fn attacked_mdp_keeps_target_rows_for_any_alpha() {
        let spec = two_state_spec();
        let target = Policy::deterministic(vec![vec![1, 0]]);
        for alpha in [0.17, 0.5, 1.0] {
            let attacked = build_alpha_attacked_mdp(&spec, &target, alpha).unwrap();
            for s in 0..2 {
                let at = target.action(0, s).unwrap();
                assert_eq!(attacked.mean_rewards[[0, s, at]], spec.mean_rewards[[0, s, at]]);
                for sp in 0..2 {
                    assert_eq!(
                        attacked.transitions[[0, s, at, sp]],
                        spec.transitions[[0, s, at, sp]]
                    );
                }
            }
        }
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let spec = two_state_spec();
        let target = Policy::deterministic(vec![vec![1, 0]]);
        assert!(matches!(
            build_alpha_attacked_mdp(&spec, &target, 0.0),
            Err(MdpError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            build_alpha_attacked_mdp(&spec, &target, 1.5),
            Err(MdpError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn sample_step_zero_mean_reward_is_always_zero() {
        let mut spec = two_state_spec();
        spec.reward_noise = RewardNoise::Bernoulli;
        spec.mean_rewards[[0, 0, 0]] = 0.0;
        let mut rng = stream(7, 0);
        for _ in 0..100 {
            let (r, _) = spec.sample_step(0, 0, 0, &mut rng).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn sample_step_point_mass_transition() {
        let spec = two_state_spec();
        let mut rng = stream(7, 0);
        for _ in 0..100 {
            let (_, next) = spec.sample_step(0, 1, 0, &mut rng).unwrap();
            assert_eq!(next, 1);
        }
    }

    #[test]
    fn sample_step_rejects_bad_indices() {
        let spec = two_state_spec();
        let mut rng = stream(7, 0);
        assert!(matches!(
            spec.sample_step(0, 0, 5, &mut rng),
            Err(MdpError::IndexOutOfRange(_))
        ));
        assert!(matches!(
            spec.sample_step(9, 0, 0, &mut rng),
            Err(MdpError::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn bernoulli_reward_mean_matches_table() {
        // 0.65 is one of the benchmark reward levels.
        let mut spec = two_state_spec();
        spec.reward_noise = RewardNoise::Bernoulli;
        spec.mean_rewards[[0, 0, 0]] = 0.65;
        let mut rng = stream(11, 0);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            total += spec.sample_step(0, 0, 0, &mut rng).unwrap().0;
        }
        let mean = total / n as f64;
        let limit = 3.0 * (0.65f64 * 0.35 / n as f64).sqrt();
        assert!((mean - 0.65).abs() < limit, "mean {mean} outside {limit}");
    }

    #[test]
    fn stochastic_policy_rejected_by_gap_ops() {
        let spec = two_state_spec();
        let pi = Policy::Stochastic { probs: vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]] };
        assert!(matches!(minimum_gap(&spec, &pi), Err(MdpError::StochasticPolicy)));
        assert!(matches!(
            check_target_admissible(&spec, &pi),
            Err(MdpError::StochasticPolicy)
        ));
        assert!(matches!(worst_action_policy(&spec, &pi), Err(MdpError::StochasticPolicy)));
    }

    #[test]
    fn policy_dimension_mismatch_is_reported() {
        let spec = two_state_spec();
        let pi = Policy::deterministic(vec![vec![0, 1], vec![0, 1]]); // H=2 vs 1
        assert!(matches!(
            evaluate_policy(&spec, &pi),
            Err(MdpError::DimensionMismatch(_))
        ));
        let pi = Policy::deterministic(vec![vec![0, 7]]); // action out of range
        assert!(matches!(evaluate_policy(&spec, &pi), Err(MdpError::InvalidPolicy(_))));
    }

    #[test]
    fn json_round_trip_is_exact_for_representable_values() {
        let mut spec = two_state_spec();
        spec.mean_rewards[[0, 0, 0]] = 0.5;
        spec.mean_rewards[[0, 0, 1]] = 0.3; // not exactly representable; still round-trips
        let text = spec.to_json();
        assert!(text.contains("\"S\""));
        assert!(text.contains("\"P\""));
        let back = MdpSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn json_rejects_ragged_tables() {
        let text = r#"{"S":2,"A":1,"H":1,"P":[[[[1.0,0.0]],[[0.5]]]],"R":[[[0.5],[0.5]]],
                       "initial_dist":[0.5,0.5],"reward_noise":"Bernoulli"}"#;
        assert!(MdpSpec::from_json(text).is_err());
    }
}
