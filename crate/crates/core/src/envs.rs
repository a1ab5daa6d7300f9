//! Benchmark environment generators and admissible target policies.

use ndarray::{Array1, Array3, Array4};
use rand::Rng;
use rand_distr::Dirichlet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{check_target_admissible, MdpError, MdpSpec, Policy, RewardNoise};
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("periodic 1-d grid world requires exactly 5 actions, got {0}")]
    BadActionCount(usize),
    #[error("invalid environment parameters: {0}")]
    BadParams(String),
    #[error("no admissible target exists: all actions are value-equivalent at step {step}, state {state}")]
    NoAdmissibleTarget { step: usize, state: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Parameters of the periodic 1-d grid world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid1dParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Lower/upper bounds of the per-pair self-transition fidelity `p(s, a)`.
    pub p_low: f64,
    pub p_high: f64,
    pub reward_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for Grid1dParams {
    fn default() -> Self {
        Self {
            num_states: 10,
            num_actions: 5,
            horizon: 10,
            p_low: 0.5,
            p_high: 1.0,
            reward_levels: vec![0.2, 0.35, 0.5, 0.65, 0.8],
            seed: 0,
        }
    }
}

/// One transition row of the periodic 1-d grid: with probability `fidelity`
/// the walker moves by `action - 2` cells (wrapping); otherwise the next state
/// is uniform over the 5-cell neighborhood `{s-2, .., s+2}` (wrapping).
pub fn periodic_1d_row(s: usize, action: usize, fidelity: f64, num_states: usize) -> Vec<f64> {
    let mut row = vec![0.0; num_states];
    let wrap = |offset: isize| -> usize {
        (s as isize + offset).rem_euclid(num_states as isize) as usize
    };
    for offset in -2..=2 {
        row[wrap(offset)] += (1.0 - fidelity) / 5.0;
    }
    row[wrap(action as isize - 2)] += fidelity;
    row
}

/// Generates the periodic 1-d grid world. The same transition and reward
/// tables are used at every step; rewards are drawn uniformly from
/// `reward_levels` and fidelities uniformly from `(p_low, p_high)`.
pub fn gen_periodic_1d(params: &Grid1dParams) -> Result<MdpSpec, EnvError> {
    if params.num_actions != 5 {
        return Err(EnvError::BadActionCount(params.num_actions));
    }
    if !(params.p_low > 0.0 && params.p_low < params.p_high && params.p_high <= 1.0) {
        return Err(EnvError::BadParams(format!(
            "need 0 < p_low < p_high <= 1, got ({}, {}]",
            params.p_low, params.p_high
        )));
    }
    if params.reward_levels.is_empty()
        || params.reward_levels.iter().any(|&r| !(0.0..=1.0).contains(&r))
    {
        return Err(EnvError::BadParams("reward levels must be nonempty within [0,1]".into()));
    }
    if params.num_states == 0 || params.horizon == 0 {
        return Err(EnvError::BadParams("num_states and horizon must be positive".into()));
    }

    let (s_n, a_n, h_n) = (params.num_states, params.num_actions, params.horizon);
    let mut rng = stream(params.seed, 0);
    let mut fidelity = vec![vec![0.0; a_n]; s_n];
    for row in fidelity.iter_mut() {
        for p in row.iter_mut() {
            *p = rng.gen_range(params.p_low..params.p_high);
        }
    }
    let mut rewards = vec![vec![0.0; a_n]; s_n];
    for row in rewards.iter_mut() {
        for r in row.iter_mut() {
            *r = params.reward_levels[rng.gen_range(0..params.reward_levels.len())];
        }
    }

    let mut transitions = Array4::<f64>::zeros((h_n, s_n, a_n, s_n));
    let mut mean_rewards = Array3::<f64>::zeros((h_n, s_n, a_n));
    for s in 0..s_n {
        for a in 0..a_n {
            let row = periodic_1d_row(s, a, fidelity[s][a], s_n);
            for h in 0..h_n {
                mean_rewards[[h, s, a]] = rewards[s][a];
                for sp in 0..s_n {
                    transitions[[h, s, a, sp]] = row[sp];
                }
            }
        }
    }

    Ok(MdpSpec {
        num_states: s_n,
        num_actions: a_n,
        horizon: h_n,
        transitions,
        mean_rewards,
        initial_dist: Array1::from_elem(s_n, 1.0 / s_n as f64),
        reward_noise: RewardNoise::Bernoulli,
    })
}

// 4x4 grid with obstacles; cells are (row, col) in 1..=4, indexed row-major
// over the 12 non-obstacle cells.
const GRID2D_SIDE: usize = 4;
const GRID2D_OBSTACLES: [(usize, usize); 4] = [(2, 2), (2, 3), (2, 4), (3, 2)];
const GRID2D_START: (usize, usize) = (1, 1);
const GRID2D_TERMINAL: (usize, usize) = (4, 4);
const GRID2D_JUMP_FROM: (usize, usize) = (1, 3);
const GRID2D_JUMP_TO: (usize, usize) = (3, 3);
pub const GRID2D_STATES: usize = 12;
pub const GRID2D_ACTIONS: usize = 4;
pub const GRID2D_HORIZON: usize = 10;
/// Action indices of the 2-d grid world.
pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const WEST: usize = 2;
pub const EAST: usize = 3;

fn grid2d_is_obstacle(cell: (usize, usize)) -> bool {
    GRID2D_OBSTACLES.contains(&cell)
}

fn grid2d_cells() -> Vec<(usize, usize)> {
    let mut cells = Vec::with_capacity(GRID2D_STATES);
    for r in 1..=GRID2D_SIDE {
        for c in 1..=GRID2D_SIDE {
            if !grid2d_is_obstacle((r, c)) {
                cells.push((r, c));
            }
        }
    }
    cells
}

/// State index of a non-obstacle cell `(row, col)`, row-major.
pub fn grid2d_index(cell: (usize, usize)) -> Option<usize> {
    grid2d_cells().iter().position(|&c| c == cell)
}

/// Where a realized move lands. The terminal returns to the start for any
/// move; the special jump fires on South from its source cell; moves off the
/// grid or into an obstacle leave the location unchanged.
fn grid2d_move(cell: (usize, usize), dir: usize) -> (usize, usize) {
    if cell == GRID2D_TERMINAL {
        return GRID2D_START;
    }
    if cell == GRID2D_JUMP_FROM && dir == SOUTH {
        return GRID2D_JUMP_TO;
    }
    let (r, c) = (cell.0 as isize, cell.1 as isize);
    let (nr, nc) = match dir {
        NORTH => (r - 1, c),
        SOUTH => (r + 1, c),
        WEST => (r, c - 1),
        EAST => (r, c + 1),
        _ => unreachable!("grid2d has 4 actions"),
    };
    let side = GRID2D_SIDE as isize;
    if nr < 1 || nr > side || nc < 1 || nc > side || grid2d_is_obstacle((nr as usize, nc as usize))
    {
        return cell;
    }
    (nr as usize, nc as usize)
}

/// Mean reward for executing action `a` in `cell`: 1 at the terminal and on
/// the special jump, 0 when the intended move is blocked, and otherwise a
/// fixed alternating 0.2/0.4 table (the source does not pin these cells, so
/// the table here is the project's fixture: 0.2 when state index + action is
/// even, 0.4 when odd).
fn grid2d_reward(index: usize, cell: (usize, usize), dir: usize) -> f64 {
    if cell == GRID2D_TERMINAL {
        return 1.0;
    }
    if cell == GRID2D_JUMP_FROM && dir == SOUTH {
        return 1.0;
    }
    if grid2d_move(cell, dir) == cell {
        return 0.0;
    }
    if (index + dir) % 2 == 0 {
        0.2
    } else {
        0.4
    }
}

/// The fixed 4-by-4 grid world: 12 reachable cells, 4 actions, horizon 10.
/// The executed move follows the received action with probability 0.7 and
/// each of the other three actions with probability 0.1.
pub fn gen_gridworld_2d() -> MdpSpec {
    let cells = grid2d_cells();
    let mut transitions =
        Array4::<f64>::zeros((GRID2D_HORIZON, GRID2D_STATES, GRID2D_ACTIONS, GRID2D_STATES));
    let mut mean_rewards =
        Array3::<f64>::zeros((GRID2D_HORIZON, GRID2D_STATES, GRID2D_ACTIONS));
    for (s, &cell) in cells.iter().enumerate() {
        for a in 0..GRID2D_ACTIONS {
            // Accumulate tenths so stacked 0.1 weights stay exact in f64.
            let mut tenths = [0u32; GRID2D_STATES];
            for dir in 0..GRID2D_ACTIONS {
                let weight = if dir == a { 7 } else { 1 };
                let landing = grid2d_move(cell, dir);
                let sp = grid2d_index(landing).expect("moves land on free cells");
                tenths[sp] += weight;
            }
            let reward = grid2d_reward(s, cell, a);
            for h in 0..GRID2D_HORIZON {
                mean_rewards[[h, s, a]] = reward;
                for (sp, &w) in tenths.iter().enumerate() {
                    transitions[[h, s, a, sp]] = w as f64 / 10.0;
                }
            }
        }
    }
    let mut initial_dist = Array1::<f64>::zeros(GRID2D_STATES);
    initial_dist[grid2d_index(GRID2D_START).unwrap()] = 1.0;
    MdpSpec {
        num_states: GRID2D_STATES,
        num_actions: GRID2D_ACTIONS,
        horizon: GRID2D_HORIZON,
        transitions,
        mean_rewards,
        initial_dist,
        reward_noise: RewardNoise::Bernoulli,
    }
}

/// Fixture target policy for the 2-d grid world: walk to the terminal along
/// column 1 and row 4, never taking the special jump. The same action is used
/// at every step. Note that every action at the terminal cell has identical
/// dynamics, so no strictly admissible target exists on this environment; the
/// choice there (North) is arbitrary.
pub fn grid2d_target_policy() -> Policy {
    let mut per_state = vec![0usize; GRID2D_STATES];
    let set = |table: &mut Vec<usize>, cell, a| {
        table[grid2d_index(cell).unwrap()] = a;
    };
    set(&mut per_state, (1, 1), SOUTH);
    set(&mut per_state, (1, 2), WEST);
    set(&mut per_state, (1, 3), WEST);
    set(&mut per_state, (1, 4), WEST);
    set(&mut per_state, (2, 1), SOUTH);
    set(&mut per_state, (3, 1), SOUTH);
    set(&mut per_state, (3, 3), SOUTH);
    set(&mut per_state, (3, 4), SOUTH);
    set(&mut per_state, (4, 1), EAST);
    set(&mut per_state, (4, 2), EAST);
    set(&mut per_state, (4, 3), EAST);
    set(&mut per_state, (4, 4), NORTH);
    Policy::Deterministic { actions: vec![per_state; GRID2D_HORIZON] }
}

/// A random tabular MDP: every transition row symmetric Dirichlet(1, .., 1),
/// every mean reward uniform on `[0, 1)`, uniform initial distribution.
pub fn gen_random_mdp(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> MdpSpec {
    assert!(num_states >= 1 && num_actions >= 1 && horizon >= 1);
    let mut rng = stream(seed, 0);
    let mut transitions = Array4::<f64>::zeros((horizon, num_states, num_actions, num_states));
    let mut mean_rewards = Array3::<f64>::zeros((horizon, num_states, num_actions));
    for h in 0..horizon {
        for s in 0..num_states {
            for a in 0..num_actions {
                if num_states == 1 {
                    transitions[[h, s, a, 0]] = 1.0;
                } else {
                    let dirichlet = Dirichlet::new_with_size(1.0, num_states)
                        .expect("valid dirichlet parameters");
                    let row = rng.sample(dirichlet);
                    for (sp, &p) in row.iter().enumerate() {
                        transitions[[h, s, a, sp]] = p;
                    }
                }
                mean_rewards[[h, s, a]] = rng.gen::<f64>();
            }
        }
    }
    MdpSpec {
        num_states,
        num_actions,
        horizon,
        transitions,
        mean_rewards,
        initial_dist: Array1::from_elem(num_states, 1.0 / num_states as f64),
        reward_noise: RewardNoise::Bernoulli,
    }
}

/// Draws a random admissible target policy by deleting the worst action:
/// walking the steps backward, each `(s, h)` cell picks uniformly among the
/// actions whose Q-value under the already-chosen future strictly exceeds the
/// cell minimum. Admissibility holds by construction (a cell's Q-values
/// depend only on later steps), and the draw is deterministic in `seed`.
///
/// Errors when some cell has all Q-values equal, which means no policy can
/// satisfy the strict condition there (a single-action MDP is the simplest
/// case).
pub fn gen_target_policy(spec: &MdpSpec, seed: u64) -> Result<Policy, EnvError> {
    let mut rng = stream(seed, 0);
    let (h_n, s_n, a_n) = (spec.horizon, spec.num_states, spec.num_actions);
    let mut actions = vec![vec![0usize; s_n]; h_n];
    let mut v_next = vec![0.0; s_n];
    let mut candidates = Vec::with_capacity(a_n);
    for h in (0..h_n).rev() {
        let mut v_cur = vec![0.0; s_n];
        for s in 0..s_n {
            let q_row: Vec<f64> = (0..a_n)
                .map(|a| {
                    let mut q = spec.mean_rewards[[h, s, a]];
                    for sp in 0..s_n {
                        q += spec.transitions[[h, s, a, sp]] * v_next[sp];
                    }
                    q
                })
                .collect();
            let worst = q_row.iter().cloned().fold(f64::INFINITY, f64::min);
            candidates.clear();
            candidates.extend((0..a_n).filter(|&a| q_row[a] > worst));
            if candidates.is_empty() {
                return Err(EnvError::NoAdmissibleTarget { step: h, state: s });
            }
            let pick = candidates[rng.gen_range(0..candidates.len())];
            actions[h][s] = pick;
            v_cur[s] = q_row[pick];
        }
        v_next = v_cur;
    }
    let policy = Policy::Deterministic { actions };
    debug_assert!(check_target_admissible(spec, &policy)?);
    Ok(policy)
}
