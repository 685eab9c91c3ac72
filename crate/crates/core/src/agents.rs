//! Episodic optimistic learners: KL-UCRL and the UCRL2 baseline.
//!
//! Both agents share the doubling episode schedule and differ only in the confidence set
//! handed to extended value iteration: KL balls of radius `C_P / N` with reward radius
//! `C_R / sqrt(N)`, or L¹ balls with the UCRL2 radii.

use rand::Rng;

use crate::error::{Error, Result};
use crate::evi::{extended_value_iteration_with, ConfidenceSet, EviOptions, Metric};
use crate::mdp::{IterationLimits, Policy};

/// Visit statistics backing the empirical model.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTables {
    n_states: usize,
    n_actions: usize,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    reward_sum: Vec<f64>,
    episode_visits: Vec<u64>,
}

impl CountTables {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        let pairs = n_states * n_actions;
        CountTables {
            n_states,
            n_actions,
            visits: vec![0; pairs],
            transitions: vec![0; pairs * n_states],
            reward_sum: vec![0.0; pairs],
            episode_visits: vec![0; pairs],
        }
    }

    #[inline]
    fn pair(&self, state: usize, action: usize) -> usize {
        state * self.n_actions + action
    }

    pub fn record(&mut self, state: usize, action: usize, reward: f64, next_state: usize) {
        let k = self.pair(state, action);
        self.visits[k] += 1;
        self.episode_visits[k] += 1;
        self.transitions[k * self.n_states + next_state] += 1;
        self.reward_sum[k] += reward;
    }

    pub fn start_episode(&mut self) {
        self.episode_visits.fill(0);
    }

    pub fn visits(&self, state: usize, action: usize) -> u64 {
        self.visits[self.pair(state, action)]
    }

    pub fn episode_visits(&self, state: usize, action: usize) -> u64 {
        self.episode_visits[self.pair(state, action)]
    }

    pub fn transitions(&self, state: usize, action: usize, next_state: usize) -> u64 {
        self.transitions[self.pair(state, action) * self.n_states + next_state]
    }

    pub fn reward_sum(&self, state: usize, action: usize) -> f64 {
        self.reward_sum[self.pair(state, action)]
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// Empirical model; rows of unvisited pairs are all zero and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    n_states: usize,
    n_actions: usize,
    pub p_hat: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub visited: Vec<bool>,
}

impl Estimates {
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let k = state * self.n_actions + action;
        &self.p_hat[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.r_hat[state * self.n_actions + action]
    }

    pub fn is_visited(&self, state: usize, action: usize) -> bool {
        self.visited[state * self.n_actions + action]
    }
}

/// Empirical transition frequencies and mean rewards with a `max(N, 1)` denominator.
pub fn estimate(counts: &CountTables) -> Estimates {
    let (n, pairs) = (counts.n_states, counts.n_states * counts.n_actions);
    let mut p_hat = vec![0.0; pairs * n];
    let mut r_hat = vec![0.0; pairs];
    let mut visited = vec![false; pairs];
    for k in 0..pairs {
        let denom = counts.visits[k].max(1) as f64;
        for y in 0..n {
            p_hat[k * n + y] = counts.transitions[k * n + y] as f64 / denom;
        }
        r_hat[k] = counts.reward_sum[k] / denom;
        visited[k] = counts.visits[k] > 0;
    }
    Estimates { n_states: n, n_actions: counts.n_actions, p_hat, r_hat, visited }
}

/// Confidence constants `(C_P, C_R)` giving the high-probability regret guarantee at horizon `T`.
pub fn confidence_constants(n_states: usize, n_actions: usize, horizon: u64, delta: f64) -> Result<(f64, f64)> {
    if horizon <= 5 {
        return Err(Error::Domain(format!("horizon must exceed 5, got {horizon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (s, a) = (n_states as f64, n_actions as f64);
    let log_t = (horizon as f64).ln();
    let b = (2.0 * std::f64::consts::E * s * s * a * log_t / delta).ln();
    let shifted = b + 1.0 / log_t;
    let c_p = s * (b + shifted.ln() * (1.0 + 1.0 / shifted));
    let c_r = ((4.0 * s * a * log_t / delta).ln() / 1.99).sqrt();
    Ok((c_p, c_r))
}

/// UCRL2 radii `(L¹ transition radius, reward radius)` at time `t` for a pair seen `count` times.
pub fn ucrl2_radii(n_states: usize, n_actions: usize, t: u64, count: u64, delta: f64) -> (f64, f64) {
    let (s, a, t) = (n_states as f64, n_actions as f64, t.max(1) as f64);
    let n = count.max(1) as f64;
    let transition = (14.0 * s * (2.0 * a * t / delta).ln() / n).sqrt();
    let reward = (3.5 * (2.0 * s * a * t / delta).ln() / n).sqrt();
    (transition, reward)
}

/// How the L¹ agent sizes its balls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L1Radii {
    /// Radii of the UCRL2 analysis.
    Ucrl2,
    /// `eps' = sqrt(2 C_P / N)`, the L¹ ball implied by the KL ball through Pinsker's inequality.
    PinskerMatched,
}

/// Stopping tolerance of extended value iteration inside the learning loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EviTolerance {
    /// `1 / sqrt(t_j)` at the episode start `t_j`.
    InverseSqrtEpisodeStart,
    Fixed(f64),
}

impl EviTolerance {
    pub fn at(self, episode_start: u64) -> f64 {
        match self {
            EviTolerance::InverseSqrtEpisodeStart => 1.0 / (episode_start.max(1) as f64).sqrt(),
            EviTolerance::Fixed(tol) => tol,
        }
    }
}

impl std::fmt::Display for EviTolerance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EviTolerance::InverseSqrtEpisodeStart => f.write_str("1/sqrt(t_j)"),
            EviTolerance::Fixed(tol) => write!(f, "fixed {tol}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub horizon: u64,
    pub delta: f64,
    pub metric: Metric,
    /// Replaces `(C_P, C_R)` for the KL agent (and the Pinsker-matched L¹ agent).
    pub constant_overrides: Option<(f64, f64)>,
    /// Evaluate the constants at the current time instead of the fixed horizon.
    pub anytime: bool,
    pub l1_radii: L1Radii,
    pub evi_tolerance: EviTolerance,
    pub reward_cap: bool,
    /// Mean rewards per pair, when they are given to the agent in advance.
    pub known_rewards: Option<Vec<f64>>,
}

impl AgentConfig {
    pub fn new(horizon: u64, delta: f64, metric: Metric) -> Self {
        AgentConfig {
            horizon,
            delta,
            metric,
            constant_overrides: None,
            anytime: false,
            l1_radii: L1Radii::Ucrl2,
            evi_tolerance: EviTolerance::InverseSqrtEpisodeStart,
            reward_cap: true,
            known_rewards: None,
        }
    }
}

/// One planning event.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub index: usize,
    pub start: u64,
    pub gain: f64,
    pub sweeps: usize,
}

/// An episodic optimistic learner.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    n_states: usize,
    n_actions: usize,
    counts: CountTables,
    episode_index: usize,
    episode_start: u64,
    time: u64,
    policy: Policy,
    bias: Vec<f64>,
    constants: (f64, f64),
    episodes: Vec<EpisodeRecord>,
}

impl Agent {
    /// The initial policy draws one uniform action per state from `rng`.
    pub fn new<R: Rng>(n_states: usize, n_actions: usize, config: AgentConfig, rng: &mut R) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Domain("agent needs at least one state and one action".into()));
        }
        if let Some(known) = &config.known_rewards {
            if known.len() != n_states * n_actions {
                return Err(Error::DimensionMismatch { expected: n_states * n_actions, got: known.len() });
            }
        }
        let constants = match config.constant_overrides {
            Some(c) => c,
            None if config.anytime => (0.0, 0.0),
            None => confidence_constants(n_states, n_actions, config.horizon, config.delta)?,
        };
        let policy = Policy::new((0..n_states).map(|_| rng.random_range(0..n_actions)).collect());
        Ok(Agent {
            config,
            n_states,
            n_actions,
            counts: CountTables::new(n_states, n_actions),
            episode_index: 0,
            episode_start: 0,
            time: 0,
            policy,
            bias: vec![0.0; n_states],
            constants,
            episodes: Vec::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn counts(&self) -> &CountTables {
        &self.counts
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    /// Number of episodes started so far, `m(t)`.
    pub fn episode_count(&self) -> usize {
        self.episode_index
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    /// `(C_P, C_R)` in use (horizon-based; anytime agents recompute per episode).
    pub fn constants(&self) -> (f64, f64) {
        self.constants
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Chooses the action for the observed state at the next time step, replanning first
    /// when the doubling condition fires. The very first step always plans.
    pub fn step(&mut self, state: usize) -> Result<usize> {
        let t = self.time + 1;
        let action = self.policy.action(state);
        let in_episode = self.counts.episode_visits(state, action);
        let before = self.counts.visits(state, action) - in_episode;
        if t == 1 || in_episode >= before.max(1) {
            self.begin_episode(t)?;
        }
        Ok(self.policy.action(state))
    }

    /// Records the transition that followed the last [`Agent::step`].
    pub fn observe(&mut self, state: usize, action: usize, reward: f64, next_state: usize) {
        self.counts.record(state, action, reward, next_state);
        self.time += 1;
    }

    fn begin_episode(&mut self, t: u64) -> Result<()> {
        self.episode_index += 1;
        self.episode_start = t;
        self.counts.start_episode();
        if self.config.anytime && self.config.constant_overrides.is_none() {
            self.constants = confidence_constants(self.n_states, self.n_actions, t.max(6), self.config.delta)?;
        }
        let conf = self.confidence_set(t);
        let options = EviOptions {
            tolerance: self.config.evi_tolerance.at(t),
            limits: IterationLimits::default(),
            initial: Some(self.bias.clone()),
        };
        let solution = extended_value_iteration_with(&conf, &options)?;
        log::debug!(
            "{} episode {} at t={}: gain {:.6}, {} sweeps, C_P={:.4}, C_R={:.4}",
            self.config.metric.as_str(),
            self.episode_index,
            t,
            solution.gain,
            solution.sweeps,
            self.constants.0,
            self.constants.1
        );
        self.episodes.push(EpisodeRecord {
            index: self.episode_index,
            start: t,
            gain: solution.gain,
            sweeps: solution.sweeps,
        });
        self.policy = solution.policy;
        self.bias = solution.bias;
        Ok(())
    }

    /// Confidence set at episode start `t` built from the current counts.
    pub fn confidence_set(&self, t: u64) -> ConfidenceSet {
        let est = estimate(&self.counts);
        let mut conf = ConfidenceSet::unvisited(self.n_states, self.n_actions, self.config.metric);
        conf.reward_cap = self.config.reward_cap.then_some(1.0);
        conf.known_rewards = self.config.known_rewards.is_some();
        let (c_p, c_r) = self.constants;
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                let n = self.counts.visits(x, a);
                let nf = n.max(1) as f64;
                let (transition_radius, mut reward_radius) = match (self.config.metric, self.config.l1_radii) {
                    (Metric::Kl, _) => (c_p / nf, c_r / nf.sqrt()),
                    (Metric::L1, L1Radii::Ucrl2) => {
                        ucrl2_radii(self.n_states, self.n_actions, t, n, self.config.delta)
                    }
                    (Metric::L1, L1Radii::PinskerMatched) => ((2.0 * c_p / nf).sqrt(), c_r / nf.sqrt()),
                };
                let mut r_hat = est.reward(x, a);
                if let Some(known) = &self.config.known_rewards {
                    r_hat = known[x * self.n_actions + a];
                    reward_radius = 0.0;
                }
                if est.is_visited(x, a) {
                    conf.set_pair(x, a, est.row(x, a), r_hat, transition_radius, reward_radius)
                        .expect("empirical rows of visited pairs are distributions");
                } else {
                    conf.set_unvisited(x, a, r_hat, reward_radius);
                }
            }
        }
        conf
    }
}

/// Upper bound `|X||A| log2(8T / (|X||A|))` on the number of episodes up to `T`.
pub fn episode_bound(n_states: usize, n_actions: usize, horizon: u64) -> f64 {
    let sa = (n_states * n_actions) as f64;
    sa * (8.0 * horizon as f64 / sa).log2()
}
