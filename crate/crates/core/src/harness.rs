//! Drives the agent-attacker-environment loop over K episodes, accounts the
//! loss/cost/non-optimal-pull/return metrics, and manages seeds and
//! checkpoints. A run is strictly sequential; distinct runs share nothing.

use std::path::PathBuf;

use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{Agent, AgentError, GreedyOracle, UcbH, UcbhConfig};
use crate::attackers::{
    AlphaPortionAttack, AttackError, Attacker, ExchangeAttack, LcbhAttack, LcbhConfig, NoAttack,
};
use crate::config::{
    AgentConfig, AttackerConfig, EnvConfig, ExperimentConfig, OraclePolicy, TargetConfig,
};
use crate::envs::{gen_gridworld_2d, gen_periodic_1d, gen_random_mdp, gen_target_policy,
    grid2d_target_policy, EnvError};
use crate::mdp::{solve_optimal, worst_action_policy, MdpError, MdpSpec, Policy, ValueTables};
use crate::rng::RngStreams;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("failed to parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("proxy regret is only defined for unattacked runs")]
    RegretUnavailable,
}

/// 1 iff the agent's chosen action deviates from the target policy.
pub fn loss_increment(a: usize, target: &Policy, s: usize, h: usize) -> u64 {
    u64::from(a != target.action(h, s).expect("deterministic target policy"))
}

/// 1 iff the attacker changed the agent's action.
pub fn cost_increment(a: usize, a_exec: usize) -> u64 {
    u64::from(a != a_exec)
}

/// 1 iff the chosen action is strictly sub-optimal in the true MDP:
/// `Q*_h(s, a) < V*_h(s)`. Ties count as optimal.
pub fn nonopt_increment(optimal: &ValueTables, s: usize, a: usize, h: usize) -> u64 {
    u64::from(optimal.q[[h, s, a]] < optimal.v[[h, s]])
}

/// Log-spaced episode checkpoints in `[1, total]`, deduplicated, always
/// ending at `total`.
pub fn checkpoint_episodes(total: u64, points: usize) -> Vec<u64> {
    if total == 0 {
        return Vec::new();
    }
    let points = points.max(1);
    let log_total = (total as f64).ln();
    let mut out: Vec<u64> = Vec::with_capacity(points);
    for i in 0..points {
        let frac = if points == 1 { 1.0 } else { i as f64 / (points - 1) as f64 };
        let episode = (frac * log_total).exp().round() as u64;
        out.push(episode.clamp(1, total));
    }
    if *out.last().unwrap() != total {
        out.push(total);
    }
    out.dedup();
    out
}

/// One metrics checkpoint: cumulative totals after `episodes` episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub step: u64,
    pub episodes: u64,
    pub loss: u64,
    pub cost: u64,
    pub nonopt_pulls: u64,
    pub cum_return: f64,
    /// Cumulative `V*_1(s_1^k)` minus cumulative realized return; only
    /// recorded for unattacked runs.
    pub proxy_regret: Option<f64>,
}

/// Checkpointed metrics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub run_id: String,
    pub seed: u64,
    pub config_hash: String,
    pub attacker_kind: String,
    pub rows: Vec<CheckpointRow>,
}

pub const CSV_HEADER: &str = "run_id,seed,checkpoint_step,episodes,loss,cost,nonopt_pulls,cum_return";

impl MetricsSeries {
    pub fn final_row(&self) -> Option<&CheckpointRow> {
        self.rows.last()
    }

    /// CSV rendering; the `proxy_regret` column is present exactly when the
    /// run was unattacked.
    pub fn to_csv(&self) -> String {
        let with_regret = self.rows.first().is_some_and(|r| r.proxy_regret.is_some());
        let mut out = String::from(CSV_HEADER);
        if with_regret {
            out.push_str(",proxy_regret");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}",
                self.run_id,
                self.seed,
                row.step,
                row.episodes,
                row.loss,
                row.cost,
                row.nonopt_pulls,
                row.cum_return
            ));
            if with_regret {
                out.push_str(&format!(",{}", row.proxy_regret.unwrap_or(f64::NAN)));
            }
            out.push('\n');
        }
        out
    }
}

/// Cumulative proxy-regret series `(step, regret)` of an unattacked run.
pub fn regret_series(series: &MetricsSeries) -> Result<Vec<(u64, f64)>, RunError> {
    series
        .rows
        .iter()
        .map(|row| row.proxy_regret.map(|r| (row.step, r)).ok_or(RunError::RegretUnavailable))
        .collect()
}

/// Short stable hash of the resolved config document.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// One executed step, recorded when transcripts are enabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub episode: u64,
    pub h: usize,
    pub state: usize,
    pub agent_action: usize,
    pub executed_action: usize,
    pub reward: f64,
}

/// Running totals of a simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Totals {
    pub episodes: u64,
    pub loss: u64,
    pub cost: u64,
    pub nonopt_pulls: u64,
    pub cum_return: f64,
    pub cum_v_star: f64,
}

impl Totals {
    pub fn proxy_regret(&self) -> f64 {
        self.cum_v_star - self.cum_return
    }
}

/// A fully resolved experiment: environment, solved ground-truth tables,
/// target policy, agent, attacker, and the four named random streams.
///
/// The interaction protocol per step: the agent chooses `a`; the attacker may
/// replace it with the executed action; the environment samples `(r, s')`
/// from the executed pair; the agent updates as if its own action produced
/// the outcome; the attacker observes the completed step.
pub struct Simulation {
    spec: MdpSpec,
    target: Policy,
    optimal: ValueTables,
    optimal_policy: Policy,
    agent: Box<dyn Agent + Send>,
    attacker: Box<dyn Attacker + Send>,
    streams: RngStreams,
    attacked: bool,
    totals: Totals,
    transcript: Option<Vec<StepRecord>>,
}

fn build_spec(env: &EnvConfig) -> Result<MdpSpec, RunError> {
    let spec = match env {
        EnvConfig::Grid1d { params } => gen_periodic_1d(params)?,
        EnvConfig::Grid2d => gen_gridworld_2d(),
        EnvConfig::Random { num_states, num_actions, horizon, seed } => {
            if *num_states == 0 || *num_actions == 0 || *horizon == 0 {
                return Err(RunError::Config("random MDP dimensions must be positive".into()));
            }
            gen_random_mdp(*num_states, *num_actions, *horizon, *seed)
        }
        EnvConfig::SpecFile { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RunError::Io { path: path.clone(), source })?;
            MdpSpec::from_json(&text)
                .map_err(|source| RunError::Parse { path: path.clone(), source })?
        }
        EnvConfig::Inline { spec } => spec.clone(),
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_target(spec: &MdpSpec, target: &TargetConfig) -> Result<Policy, RunError> {
    let policy = match target {
        TargetConfig::Generated { seed } => gen_target_policy(spec, *seed)?,
        TargetConfig::Grid2dNoJump => grid2d_target_policy(),
        TargetConfig::Explicit { actions } => Policy::deterministic(actions.clone()),
        TargetConfig::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RunError::Io { path: path.clone(), source })?;
            serde_json::from_str(&text)
                .map_err(|source| RunError::Parse { path: path.clone(), source })?
        }
    };
    policy.validate(spec)?;
    if !policy.is_deterministic() {
        return Err(RunError::Config("target policy must be deterministic".into()));
    }
    Ok(policy)
}

impl Simulation {
    pub fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        if config.episodes == 0 {
            return Err(RunError::Config("episodes must be at least 1".into()));
        }
        let spec = build_spec(&config.environment)?;
        let (optimal, optimal_policy) = solve_optimal(&spec);
        let target = resolve_target(&spec, &config.target)?;
        let total_steps = config
            .episodes
            .checked_mul(spec.horizon as u64)
            .ok_or_else(|| RunError::Config("episodes * horizon overflows".into()))?;

        let agent: Box<dyn Agent + Send> = match &config.agent {
            AgentConfig::UcbH { c, p, q_init } => Box::new(UcbH::new(
                spec.num_states,
                spec.num_actions,
                spec.horizon,
                UcbhConfig { c: *c, failure_prob: *p, total_steps, q_init: *q_init },
            )?),
            AgentConfig::Oracle { plays } => {
                let policy = match plays {
                    OraclePolicy::Optimal => &optimal_policy,
                    OraclePolicy::Target => &target,
                };
                Box::new(GreedyOracle::new(policy)?)
            }
        };

        let attacker: Box<dyn Attacker + Send> = match &config.attacker {
            AttackerConfig::None => Box::new(NoAttack),
            AttackerConfig::Exchange => Box::new(ExchangeAttack::new(&optimal_policy, &target)?),
            AttackerConfig::AlphaPortion { alpha } => {
                let worst = worst_action_policy(&spec, &target)?;
                Box::new(AlphaPortionAttack::new(&target, &worst, *alpha)?)
            }
            AttackerConfig::LcbH { p } => Box::new(LcbhAttack::new(
                &target,
                spec.num_states,
                spec.num_actions,
                spec.horizon,
                LcbhConfig { failure_prob: *p, total_steps },
            )?),
        };

        Ok(Self {
            spec,
            target,
            optimal,
            optimal_policy,
            agent,
            attacker,
            streams: RngStreams::new(config.seed),
            attacked: config.attacker != AttackerConfig::None,
            totals: Totals::default(),
            transcript: None,
        })
    }

    /// Runs one full episode of the interaction protocol.
    pub fn run_episode(&mut self) {
        let mut s = self.spec.sample_initial_state(&mut self.streams.initial_state);
        self.totals.cum_v_star += self.optimal.v[[0, s]];
        for h in 0..self.spec.horizon {
            let a = self.agent.choose(s, h, &mut self.streams.agent);
            let a_exec = self.attacker.intercept(h, s, a, &mut self.streams.attacker);
            let (r, s_next) = self
                .spec
                .sample_step(s, a_exec, h, &mut self.streams.environment)
                .expect("validated dimensions");
            self.agent.update(h, s, a, r, s_next);
            self.attacker.observe(h, s, a, a_exec, r, s_next);

            self.totals.loss += loss_increment(a, &self.target, s, h);
            self.totals.cost += cost_increment(a, a_exec);
            self.totals.nonopt_pulls += nonopt_increment(&self.optimal, s, a, h);
            self.totals.cum_return += r;
            if let Some(transcript) = &mut self.transcript {
                transcript.push(StepRecord {
                    episode: self.totals.episodes,
                    h,
                    state: s,
                    agent_action: a,
                    executed_action: a_exec,
                    reward: r,
                });
            }
            s = s_next;
        }
        self.attacker.end_episode();
        self.totals.episodes += 1;
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn checkpoint_row(&self) -> CheckpointRow {
        CheckpointRow {
            step: self.totals.episodes * self.spec.horizon as u64,
            episodes: self.totals.episodes,
            loss: self.totals.loss,
            cost: self.totals.cost,
            nonopt_pulls: self.totals.nonopt_pulls,
            cum_return: self.totals.cum_return,
            proxy_regret: (!self.attacked).then(|| self.totals.proxy_regret()),
        }
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.spec
    }

    pub fn target(&self) -> &Policy {
        &self.target
    }

    pub fn optimal_tables(&self) -> &ValueTables {
        &self.optimal
    }

    pub fn optimal_policy(&self) -> &Policy {
        &self.optimal_policy
    }

    pub fn attacker_dump(&self) -> Option<serde_json::Value> {
        self.attacker.dump_state()
    }

    /// Records every executed step from now on (tests and audits only).
    pub fn record_transcript(&mut self) {
        self.transcript = Some(Vec::new());
    }

    pub fn transcript(&self) -> Option<&[StepRecord]> {
        self.transcript.as_deref()
    }
}

/// Runs a full experiment, sampling metrics on the log-spaced checkpoint
/// schedule. Deterministic given the config (including its master seed).
pub fn run_experiment_with_id(
    config: &ExperimentConfig,
    run_id: &str,
) -> Result<MetricsSeries, RunError> {
    let mut sim = Simulation::new(config)?;
    let schedule = checkpoint_episodes(config.episodes, config.checkpoints);
    let mut rows = Vec::with_capacity(schedule.len());
    let mut next = schedule.iter().copied().peekable();
    for episode in 1..=config.episodes {
        sim.run_episode();
        if next.peek() == Some(&episode) {
            next.next();
            rows.push(sim.checkpoint_row());
        }
    }
    Ok(MetricsSeries {
        run_id: run_id.to_string(),
        seed: config.seed,
        config_hash: config_hash(config),
        attacker_kind: config.attacker.kind_name().to_string(),
        rows,
    })
}

/// [`run_experiment_with_id`] with the default run id.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsSeries, RunError> {
    run_experiment_with_id(config, "run")
}

/// Sidecar document storing the resolved config next to a CSV.
pub fn sidecar_json(config: &ExperimentConfig, run_id: &str) -> serde_json::Value {
    json!({
        "run_id": run_id,
        "seed": config.seed,
        "config_hash": config_hash(config),
        "config": config,
    })
}
