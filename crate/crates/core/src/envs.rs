//! Benchmark environments and the sampling interface the agents interact with.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};

use crate::error::{Error, Result};
use crate::mdp::{check_simplex, Mdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardMode {
    /// The mean reward is paid exactly.
    Deterministic,
    /// A Bernoulli draw with the mean reward as success probability.
    Bernoulli,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Deterministic => "det",
            RewardMode::Bernoulli => "bern",
        }
    }
}

impl std::str::FromStr for RewardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(RewardMode::Deterministic),
            "bern" | "bernoulli" => Ok(RewardMode::Bernoulli),
            other => Err(Error::Domain(format!("unknown reward mode '{other}'"))),
        }
    }
}

/// A communicating MDP together with its sampling state.
#[derive(Debug, Clone)]
pub struct Environment {
    name: &'static str,
    model: Mdp,
    reward_mode: RewardMode,
    initial_state: usize,
    current_state: usize,
    known_rewards: bool,
    parameters: Vec<(String, String)>,
    transition_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(name: &'static str, model: Mdp, initial_state: usize) -> Result<Self> {
        if let Some((from, target)) = model.unreachable_pair() {
            return Err(Error::InvalidModel(format!(
                "{name} is not communicating: state {target} unreachable from {from}"
            )));
        }
        if initial_state >= model.n_states() {
            return Err(Error::InvalidModel(format!("initial state {initial_state} out of range")));
        }
        Ok(Environment {
            name,
            model,
            reward_mode: RewardMode::Deterministic,
            initial_state,
            current_state: initial_state,
            known_rewards: false,
            parameters: Vec::new(),
            transition_rng: ChaCha8Rng::seed_from_u64(0),
            reward_rng: ChaCha8Rng::seed_from_u64(1),
        })
    }

    pub fn with_reward_mode(mut self, mode: RewardMode) -> Self {
        self.reward_mode = mode;
        self
    }

    /// Replaces the random streams and returns to the initial state.
    pub fn reseed(&mut self, transition_rng: ChaCha8Rng, reward_rng: ChaCha8Rng) {
        self.transition_rng = transition_rng;
        self.reward_rng = reward_rng;
        self.current_state = self.initial_state;
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn model(&self) -> &Mdp {
        &self.model
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode
    }

    pub fn current_state(&self) -> usize {
        self.current_state
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Moves the process to `state` without consuming randomness.
    pub fn set_state(&mut self, state: usize) {
        assert!(state < self.model.n_states(), "state {state} out of range");
        self.current_state = state;
    }

    /// Whether agents are told the mean rewards in advance.
    pub fn known_rewards(&self) -> bool {
        self.known_rewards
    }

    pub fn set_known_rewards(&mut self, known: bool) {
        self.known_rewards = known;
    }

    /// Construction parameters, for experiment metadata.
    pub fn parameters(&self) -> &[(String, String)] {
        &self.parameters
    }

    fn with_parameter(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    /// Applies `action` in the current state, returning `(next_state, reward)`.
    pub fn sample_step(&mut self, action: usize) -> (usize, f64) {
        let x = self.current_state;
        let mean = self.model.reward(x, action);
        let reward = match self.reward_mode {
            RewardMode::Deterministic => mean,
            RewardMode::Bernoulli => {
                if self.reward_rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let row = self.model.row(x, action);
        let u: f64 = self.transition_rng.random();
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = y;
                break;
            }
        }
        // rounding can leave the last bucket with zero mass
        while row[next] == 0.0 && next > 0 {
            next -= 1;
        }
        self.current_state = next;
        (next, reward)
    }
}

fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiverSwimParams {
    pub n_states: usize,
    pub p_advance: f64,
    pub p_stay: f64,
    pub p_regress: f64,
    /// Reward for swimming left in the leftmost state.
    pub reward_left: f64,
    /// Reward for swimming right in the rightmost state.
    pub reward_right: f64,
}

impl Default for RiverSwimParams {
    fn default() -> Self {
        RiverSwimParams {
            n_states: 6,
            p_advance: 0.35,
            p_stay: 0.6,
            p_regress: 0.05,
            reward_left: 0.005,
            reward_right: 1.0,
        }
    }
}

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// A row of states; swimming left always succeeds, swimming right fights the current.
/// Moves that would leave the row are folded into staying put.
pub fn riverswim(params: &RiverSwimParams) -> Result<Environment> {
    let n = params.n_states;
    if n < 2 {
        return Err(Error::InvalidModel("riverswim needs at least two states".into()));
    }
    check_simplex(&[params.p_advance, params.p_stay, params.p_regress])
        .map_err(|e| Error::InvalidModel(format!("riverswim right-swim probabilities: {e}")))?;
    let mut rows = Vec::with_capacity(2 * n);
    let mut rewards = Vec::with_capacity(2 * n);
    for x in 0..n {
        let mut left = vec![0.0; n];
        left[x.saturating_sub(1)] = 1.0;
        rows.push(left);
        rewards.push(if x == 0 { params.reward_left } else { 0.0 });

        let mut right = vec![0.0; n];
        right[(x + 1).min(n - 1)] += params.p_advance;
        right[x] += params.p_stay;
        right[x.saturating_sub(1)] += params.p_regress;
        rows.push(right);
        rewards.push(if x == n - 1 { params.reward_right } else { 0.0 });
    }
    let model = Mdp::new(n, 2, rows, rewards)?;
    Ok(Environment::new("riverswim", model, 0)?
        .with_parameter("riverswim.n_states", n)
        .with_parameter("riverswim.p_advance", params.p_advance)
        .with_parameter("riverswim.p_stay", params.p_stay)
        .with_parameter("riverswim.p_regress", params.p_regress)
        .with_parameter("riverswim.reward_left", params.reward_left)
        .with_parameter("riverswim.reward_right", params.reward_right))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SixArmsParams {
    /// Success probability of arm `a` from the hub state.
    pub probabilities: Vec<f64>,
    /// Per-step reward for staying in room `x`.
    pub rewards: Vec<f64>,
    pub known_rewards: bool,
}

impl Default for SixArmsParams {
    fn default() -> Self {
        SixArmsParams {
            probabilities: vec![1.0, 0.15, 0.1, 0.05, 0.03, 0.01],
            rewards: [50.0, 133.0, 300.0, 800.0, 1666.0, 6000.0].iter().map(|r| r / 6000.0).collect(),
            known_rewards: true,
        }
    }
}

/// Action that keeps the agent in a room and pays its reward; all other actions lead back to the hub.
pub const STAY: usize = 0;

/// A hub state 0 and six rooms; arm `a` from the hub reaches room `a + 1` with probability `p_a`.
pub fn sixarms(params: &SixArmsParams) -> Result<Environment> {
    let arms = params.probabilities.len();
    if arms != 6 || params.rewards.len() != 6 {
        return Err(Error::InvalidModel(format!(
            "sixarms needs 6 probabilities and 6 rewards, got {} and {}",
            arms,
            params.rewards.len()
        )));
    }
    if params.probabilities.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidModel("sixarms probabilities must lie in (0, 1]".into()));
    }
    let n = arms + 1;
    let mut rows = Vec::with_capacity(n * arms);
    let mut rewards = Vec::with_capacity(n * arms);
    for a in 0..arms {
        let mut row = vec![0.0; n];
        row[a + 1] = params.probabilities[a];
        row[0] += 1.0 - params.probabilities[a];
        rows.push(row);
        rewards.push(0.0);
    }
    for x in 1..n {
        for a in 0..arms {
            let mut row = vec![0.0; n];
            if a == STAY {
                row[x] = 1.0;
                rewards.push(params.rewards[x - 1]);
            } else {
                row[0] = 1.0;
                rewards.push(0.0);
            }
            rows.push(row);
        }
    }
    let model = Mdp::new(n, arms, rows, rewards)?;
    let mut env = Environment::new("sixarms", model, 0)?
        .with_parameter("sixarms.probabilities", format_list(&params.probabilities))
        .with_parameter("sixarms.rewards", format_list(&params.rewards))
        .with_parameter("sixarms.stay_action", STAY)
        .with_parameter("sixarms.known_rewards", params.known_rewards);
    env.set_known_rewards(params.known_rewards);
    Ok(env)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub avg_out_degree: f64,
    pub seed: u64,
}

impl Default for SparseGenConfig {
    fn default() -> Self {
        SparseGenConfig { n_states: 10, n_actions: 5, avg_out_degree: 5.0, seed: 0 }
    }
}

const SPARSE_RETRIES: usize = 100;

/// Random sparse MDP: binomial out-degrees, uniform Dirichlet rows, uniform rewards.
pub fn random_sparse(config: &SparseGenConfig) -> Result<Environment> {
    let n = config.n_states;
    if n == 0 || config.n_actions == 0 || !(config.avg_out_degree > 0.0) {
        return Err(Error::Generation("sizes and out-degree must be positive".into()));
    }
    if config.avg_out_degree > n as f64 {
        return Err(Error::Generation(format!(
            "average out-degree {} exceeds the number of states {n}",
            config.avg_out_degree
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let degree = Binomial::new(n as u64, config.avg_out_degree / n as f64)
        .map_err(|e| Error::Generation(e.to_string()))?;
    for attempt in 0..SPARSE_RETRIES {
        let pairs = n * config.n_actions;
        let mut rows = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let k = (degree.sample(&mut rng) as usize).max(1);
            let successors = index::sample(&mut rng, n, k);
            let weights: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = weights.iter().sum();
            let mut row = vec![0.0; n];
            for (y, w) in successors.iter().zip(&weights) {
                row[y] = w / total;
            }
            rows.push(row);
        }
        let rewards: Vec<f64> = (0..pairs).map(|_| rng.random::<f64>()).collect();
        let model = Mdp::new(n, config.n_actions, rows, rewards)?;
        if model.is_communicating() {
            return Ok(Environment::new("sparse", model, 0)?
                .with_parameter("sparse.n_states", n)
                .with_parameter("sparse.n_actions", config.n_actions)
                .with_parameter("sparse.avg_out_degree", config.avg_out_degree)
                .with_parameter("sparse.seed", config.seed)
                .with_parameter("sparse.attempts", attempt + 1));
        }
    }
    Err(Error::Generation(format!(
        "no communicating instance after {SPARSE_RETRIES} attempts"
    )))
}
