//! Extended value iteration over a confidence set of models.
//!
//! Each backup maximizes jointly over actions, over rewards in `[r_hat - eps_R, r_hat + eps_R]`
//! and over transition rows inside a KL or L¹ ball around the empirical row.

use crate::error::{Error, Result};
use crate::klopt::{self, ascending_order, max_kl, max_l1_ordered};
use crate::mdp::{dot, relative_iteration, IterationLimits, Mdp, Policy, SimplexVector};

/// Divergence used for the transition confidence balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Kl,
    L1,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Kl => "kl",
            Metric::L1 => "l1",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(Metric::Kl),
            "l1" => Ok(Metric::L1),
            other => Err(Error::Domain(format!("unknown metric '{other}' (expected kl or l1)"))),
        }
    }
}

/// Plausible models around the empirical estimates, one ball per state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    n_states: usize,
    n_actions: usize,
    p_hat: Vec<f64>,
    visited: Vec<bool>,
    r_hat: Vec<f64>,
    transition_radius: Vec<f64>,
    reward_radius: Vec<f64>,
    metric: Metric,
    /// Upper clamp on optimistic rewards; `None` disables the cap.
    pub reward_cap: Option<f64>,
    /// Rewards are exact: unvisited pairs keep `r_hat` instead of the maximal reward.
    pub known_rewards: bool,
}

impl ConfidenceSet {
    /// A set in which no pair has been visited yet.
    pub fn unvisited(n_states: usize, n_actions: usize, metric: Metric) -> Self {
        let pairs = n_states * n_actions;
        ConfidenceSet {
            n_states,
            n_actions,
            p_hat: vec![0.0; pairs * n_states],
            visited: vec![false; pairs],
            r_hat: vec![0.0; pairs],
            transition_radius: vec![0.0; pairs],
            reward_radius: vec![0.0; pairs],
            metric,
            reward_cap: Some(1.0),
            known_rewards: false,
        }
    }

    /// Balls of the given radii centred on a known model.
    pub fn around(mdp: &Mdp, metric: Metric, transition_radius: f64, reward_radius: f64) -> Self {
        let mut conf = Self::unvisited(mdp.n_states(), mdp.n_actions(), metric);
        for x in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                conf.set_pair(x, a, mdp.row(x, a), mdp.reward(x, a), transition_radius, reward_radius)
                    .expect("model rows are valid");
            }
        }
        conf
    }

    pub fn set_pair(
        &mut self,
        state: usize,
        action: usize,
        row: &[f64],
        r_hat: f64,
        transition_radius: f64,
        reward_radius: f64,
    ) -> Result<()> {
        if row.len() != self.n_states {
            return Err(Error::DimensionMismatch { expected: self.n_states, got: row.len() });
        }
        crate::mdp::check_simplex(row)?;
        if !(transition_radius >= 0.0) || !(reward_radius >= 0.0) {
            return Err(Error::Domain("confidence radii must be nonnegative".into()));
        }
        let k = state * self.n_actions + action;
        self.p_hat[k * self.n_states..(k + 1) * self.n_states].copy_from_slice(row);
        self.visited[k] = true;
        self.r_hat[k] = r_hat;
        self.transition_radius[k] = transition_radius;
        self.reward_radius[k] = reward_radius;
        Ok(())
    }

    /// Marks a pair unvisited while keeping a reward estimate (used with known rewards).
    pub fn set_unvisited(&mut self, state: usize, action: usize, r_hat: f64, reward_radius: f64) {
        let k = state * self.n_actions + action;
        self.visited[k] = false;
        self.r_hat[k] = r_hat;
        self.reward_radius[k] = reward_radius;
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn p_hat(&self, state: usize, action: usize) -> &[f64] {
        let k = state * self.n_actions + action;
        &self.p_hat[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn is_visited(&self, state: usize, action: usize) -> bool {
        self.visited[state * self.n_actions + action]
    }

    pub fn transition_radius(&self, state: usize, action: usize) -> f64 {
        self.transition_radius[state * self.n_actions + action]
    }

    pub fn reward_radius(&self, state: usize, action: usize) -> f64 {
        self.reward_radius[state * self.n_actions + action]
    }

    /// Largest reward the set allows for a pair.
    pub fn upper_reward(&self, state: usize, action: usize) -> f64 {
        let k = state * self.n_actions + action;
        if !self.visited[k] && !self.known_rewards {
            return self.reward_cap.unwrap_or(1.0);
        }
        let r = self.r_hat[k] + self.reward_radius[k];
        match self.reward_cap {
            Some(cap) => r.min(cap),
            None => r,
        }
    }

    /// Whether `row` lies in the transition ball of a pair, up to `slack`.
    pub fn contains_row(&self, state: usize, action: usize, row: &[f64], slack: f64) -> bool {
        if !self.is_visited(state, action) {
            return true;
        }
        let p = self.p_hat(state, action);
        let radius = self.transition_radius(state, action);
        match self.metric {
            Metric::Kl => klopt::kl_divergence(p, row) <= radius + slack,
            Metric::L1 => p.iter().zip(row).map(|(a, b)| (a - b).abs()).sum::<f64>() <= radius + slack,
        }
    }

    fn optimistic_row(&self, state: usize, action: usize, u: &[f64], order: &[usize], out: &mut [f64]) {
        if !self.is_visited(state, action) {
            // lowest index among maximal entries
            let top = u[*order.last().expect("nonempty")];
            let best = order[order.iter().position(|&i| u[i] == top).unwrap()];
            out.fill(0.0);
            out[best] = 1.0;
            return;
        }
        let p = self.p_hat(state, action);
        let radius = self.transition_radius(state, action);
        match self.metric {
            Metric::Kl => out.copy_from_slice(max_kl(p, u, radius).q.as_slice()),
            Metric::L1 => max_l1_ordered(p, u, radius, order, out),
        }
    }
}

/// `min(r_hat + radius, 1)`: the optimistic end of a reward interval in `[0, 1]`.
pub fn optimistic_reward(r_hat: f64, radius: f64) -> f64 {
    (r_hat + radius).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticSolution {
    pub policy: Policy,
    pub gain: f64,
    /// Bias of the optimistic model, minimum zero.
    pub bias: Vec<f64>,
    /// Maximizing row for each state under its chosen action.
    pub optimistic_transitions: Vec<SimplexVector>,
    /// Optimistic rewards indexed `state * n_actions + action`.
    pub optimistic_rewards: Vec<f64>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviOptions {
    pub tolerance: f64,
    pub limits: IterationLimits,
    /// Starting vector; zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl EviOptions {
    pub fn new(tolerance: f64) -> Self {
        EviOptions { tolerance, limits: IterationLimits::default(), initial: None }
    }
}

pub fn extended_value_iteration(conf: &ConfidenceSet, tolerance: f64) -> Result<OptimisticSolution> {
    extended_value_iteration_with(conf, &EviOptions::new(tolerance))
}

pub fn extended_value_iteration_with(
    conf: &ConfidenceSet,
    options: &EviOptions,
) -> Result<OptimisticSolution> {
    let n = conf.n_states();
    let n_actions = conf.n_actions();
    let rewards: Vec<f64> = (0..n)
        .flat_map(|x| (0..n_actions).map(move |a| (x, a)))
        .map(|(x, a)| conf.upper_reward(x, a))
        .collect();
    let initial = match &options.initial {
        Some(u) if u.len() == n => u.clone(),
        Some(u) => return Err(Error::DimensionMismatch { expected: n, got: u.len() }),
        None => vec![0.0; n],
    };
    let mut policy = vec![0usize; n];
    let mut row = vec![0.0; n];
    let outcome = relative_iteration(
        initial,
        options.tolerance,
        options.limits,
        "extended value iteration",
        |u, w, out| {
            let order = ascending_order(u);
            for x in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..n_actions {
                    conf.optimistic_row(x, a, u, &order, &mut row);
                    let value = rewards[x * n_actions + a] + w * dot(&row, u);
                    if value > best {
                        best = value;
                        best_a = a;
                    }
                }
                out[x] = best + (1.0 - w) * u[x];
                policy[x] = best_a;
            }
        },
    )?;

    let order = ascending_order(&outcome.bias);
    let optimistic_transitions = (0..n)
        .map(|x| {
            conf.optimistic_row(x, policy[x], &outcome.bias, &order, &mut row);
            SimplexVector::from_vec_unchecked(row.clone())
        })
        .collect();
    Ok(OptimisticSolution {
        policy: Policy::new(policy),
        gain: outcome.gain,
        bias: outcome.bias,
        optimistic_transitions,
        optimistic_rewards: rewards,
        sweeps: outcome.sweeps,
    })
}
