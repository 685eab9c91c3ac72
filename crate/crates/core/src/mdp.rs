//! Tabular average-reward MDPs and exact planning.
//!
//! Transition rows are stored flat, row `(x, a)` at offset `(x * n_actions + a) * n_states`.

use crate::error::{Error, Result};

/// Tolerance used when validating that a row sums to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default sweep cap for the average-reward iterations.
pub const MAX_SWEEPS: usize = 1_000_000;

/// Sweeps without convergence after which the aperiodicity transform is considered.
pub const APERIODIC_AFTER: usize = 10_000;

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_simplex(&entries)?;
        Ok(SimplexVector(entries))
    }

    /// Point mass on `index`.
    pub fn point_mass(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        SimplexVector(v)
    }

    pub fn uniform(dim: usize) -> Self {
        SimplexVector(vec![1.0 / dim as f64; dim])
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        SimplexVector(entries)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn check_simplex(entries: &[f64]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidSimplex("empty vector".into()));
    }
    if let Some(bad) = entries.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidSimplex(format!("entry {bad} is negative or not finite")));
    }
    let sum: f64 = entries.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Deterministic stationary policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    pub fn constant(n_states: usize, action: usize) -> Self {
        Policy(vec![action; n_states])
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn is_valid_for(&self, n_states: usize, n_actions: usize) -> bool {
        self.0.len() == n_states && self.0.iter().all(|&a| a < n_actions)
    }

    /// Enumerates every deterministic policy, first state varying fastest.
    pub fn enumerate(n_states: usize, n_actions: usize) -> impl Iterator<Item = Policy> {
        let total = (n_actions as u64).pow(n_states as u32);
        (0..total).map(move |mut code| {
            let mut actions = Vec::with_capacity(n_states);
            for _ in 0..n_states {
                actions.push((code % n_actions as u64) as usize);
                code /= n_actions as u64;
            }
            Policy(actions)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    mean_rewards: Vec<f64>,
}

impl Mdp {
    /// Builds a model from rows indexed `x * n_actions + a` and rewards with the same indexing.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<f64>>,
        mean_rewards: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("state and action counts must be positive".into()));
        }
        let pairs = n_states * n_actions;
        if rows.len() != pairs {
            return Err(Error::DimensionMismatch { expected: pairs, got: rows.len() });
        }
        if mean_rewards.len() != pairs {
            return Err(Error::DimensionMismatch { expected: pairs, got: mean_rewards.len() });
        }
        let mut transitions = Vec::with_capacity(pairs * n_states);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::DimensionMismatch { expected: n_states, got: row.len() });
            }
            check_simplex(&row).map_err(|e| {
                Error::InvalidModel(format!(
                    "row (state {}, action {}): {e}",
                    i / n_actions,
                    i % n_actions
                ))
            })?;
            transitions.extend(row);
        }
        if let Some(r) = mean_rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidModel(format!("mean reward {r} outside [0, 1]")));
        }
        Ok(Mdp { n_states, n_actions, transitions, mean_rewards })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.mean_rewards[state * self.n_actions + action]
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_rewards
    }

    /// Pair `(source, target)` such that `target` cannot be reached from `source`, if any.
    pub fn unreachable_pair(&self) -> Option<(usize, usize)> {
        let n = self.n_states;
        for source in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![source];
            seen[source] = true;
            while let Some(x) = stack.pop() {
                for a in 0..self.n_actions {
                    for (y, &p) in self.row(x, a).iter().enumerate() {
                        if p > 0.0 && !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
            }
            if let Some(target) = seen.iter().position(|s| !s) {
                return Some((source, target));
            }
        }
        None
    }

    pub fn is_communicating(&self) -> bool {
        self.unreachable_pair().is_none()
    }
}

/// Solution of the average-reward optimality equation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSolution {
    pub gain: f64,
    /// Bias vector, shifted so its minimum entry is zero.
    pub bias: Vec<f64>,
    pub policy: Policy,
    pub sweeps: usize,
}

/// Span seminorm `max(v) - min(v)`.
pub fn span(v: &[f64]) -> f64 {
    let (lo, hi) = min_max(v);
    hi - lo
}

#[inline]
pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of [`relative_iteration`].
pub(crate) struct IterationOutcome {
    /// Gain estimate, midpoint of the final increment.
    pub gain: f64,
    /// Bias in the original (untransformed) scale, minimum zero.
    pub bias: Vec<f64>,
    pub sweeps: usize,
}

/// Stopping and damping parameters shared by plain and extended value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLimits {
    pub max_sweeps: usize,
    pub aperiodic_after: usize,
}

impl Default for IterationLimits {
    fn default() -> Self {
        IterationLimits { max_sweeps: MAX_SWEEPS, aperiodic_after: APERIODIC_AFTER }
    }
}

/// Relative value iteration driver.
///
/// `backup(u, w, out)` must write `out[x] = max_a (r(x,a) + w * q*·u) + (1 - w) * u[x]`, where
/// `q*` is the (possibly optimistic) next-state distribution. `w = 1` is the plain operator,
/// `w = 1/2` the aperiodicity transform, switched on only when the increment span stalls.
pub(crate) fn relative_iteration<F>(
    initial: Vec<f64>,
    tolerance: f64,
    limits: IterationLimits,
    what: &'static str,
    mut backup: F,
) -> Result<IterationOutcome>
where
    F: FnMut(&[f64], f64, &mut [f64]),
{
    if !(tolerance > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tolerance}")));
    }
    let n = initial.len();
    let mut u = initial;
    let mut next = vec![0.0; n];
    let mut weight = 1.0;
    let mut last_span = f64::INFINITY;
    let mut checkpoint_span = f64::INFINITY;

    for sweep in 1..=limits.max_sweeps {
        backup(&u, weight, &mut next);
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        last_span = hi - lo;
        let (shift, _) = min_max(&next);
        for (ui, &vi) in u.iter_mut().zip(&next) {
            *ui = vi - shift;
        }
        if last_span < tolerance {
            let gain = 0.5 * (hi + lo);
            let bias = u.iter().map(|&x| x * weight).collect();
            return Ok(IterationOutcome { gain, bias, sweeps: sweep });
        }
        if weight == 1.0 && limits.aperiodic_after > 0 {
            if sweep % limits.aperiodic_after == limits.aperiodic_after / 2 {
                checkpoint_span = last_span;
            }
            // periodic chains keep a constant increment span
            if sweep % limits.aperiodic_after == 0 && last_span > 0.5 * checkpoint_span {
                log::debug!("{what}: span stalled at {last_span:e} after {sweep} sweeps, damping");
                weight = 0.5;
            }
        }
    }
    Err(Error::NonConvergence { what, sweeps: limits.max_sweeps, span: last_span })
}

/// Average-reward value iteration with span stopping.
pub fn value_iteration(mdp: &Mdp, tolerance: f64) -> Result<PlanningSolution> {
    value_iteration_with(mdp, tolerance, IterationLimits::default())
}

pub fn value_iteration_with(
    mdp: &Mdp,
    tolerance: f64,
    limits: IterationLimits,
) -> Result<PlanningSolution> {
    let n = mdp.n_states();
    let mut policy = vec![0usize; n];
    let outcome = relative_iteration(vec![0.0; n], tolerance, limits, "value iteration", |u, w, out| {
        for x in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..mdp.n_actions() {
                let q = mdp.reward(x, a) + w * dot(mdp.row(x, a), u);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            out[x] = best + (1.0 - w) * u[x];
            policy[x] = best_a;
        }
    })?;
    Ok(PlanningSolution {
        gain: outcome.gain,
        bias: outcome.bias,
        policy: Policy(policy),
        sweeps: outcome.sweeps,
    })
}

/// Long-run average reward of `policy` from every starting state.
///
/// Uses the Cesàro limit matrix, obtained as the limit of powers of `(I + P) / 2`
/// by repeated squaring, so multichain and periodic policies are handled.
pub fn policy_gain(mdp: &Mdp, policy: &Policy) -> Vec<f64> {
    let n = mdp.n_states();
    let mut m = vec![0.0; n * n];
    for x in 0..n {
        let row = mdp.row(x, policy.action(x));
        for y in 0..n {
            m[x * n + y] = 0.5 * row[y];
        }
        m[x * n + x] += 0.5;
    }
    let mut tmp = vec![0.0; n * n];
    for _ in 0..64 {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[i * n + k] * m[k * n + j];
                }
                tmp[i * n + j] = s;
            }
            // keep rows stochastic so rounding cannot compound across squarings
            let total: f64 = tmp[i * n..(i + 1) * n].iter().sum();
            tmp[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= total);
        }
        let delta = m.iter().zip(&tmp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut m, &mut tmp);
        if delta < 1e-14 {
            break;
        }
    }
    let r: Vec<f64> = (0..n).map(|x| mdp.reward(x, policy.action(x))).collect();
    (0..n).map(|x| dot(&m[x * n..(x + 1) * n], &r)).collect()
}

/// Minimal expected hitting times of `target` from every state, with the minimizing policy.
pub fn hitting_times(mdp: &Mdp, target: usize) -> Result<(Vec<f64>, Policy)> {
    let n = mdp.n_states();
    if let Some(source) =
        (0..n).find(|&s| !reachable_from(mdp, s)[target])
    {
        return Err(Error::InfiniteDiameter { from: source, target });
    }
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0usize; n];
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for x in 0..n {
            if x == target {
                next[x] = 0.0;
                continue;
            }
            let mut best = f64::INFINITY;
            for a in 0..mdp.n_actions() {
                let v = 1.0 + dot(mdp.row(x, a), &h);
                if v < best {
                    best = v;
                    policy[x] = a;
                }
            }
            change = change.max((best - h[x]).abs());
            next[x] = best;
        }
        std::mem::swap(&mut h, &mut next);
        let scale = h.iter().cloned().fold(1.0, f64::max);
        if change <= 1e-13 * scale {
            return Ok((h, Policy(policy)));
        }
    }
    let worst = (0..n).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    Err(Error::InfiniteDiameter { from: worst, target })
}

fn reachable_from(mdp: &Mdp, source: usize) -> Vec<bool> {
    let n = mdp.n_states();
    let mut seen = vec![false; n];
    let mut stack = vec![source];
    seen[source] = true;
    while let Some(x) = stack.pop() {
        for a in 0..mdp.n_actions() {
            for (y, &p) in mdp.row(x, a).iter().enumerate() {
                if p > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen
}

/// Diameter: worst pair of states under the best policy for each target.
pub fn compute_diameter(mdp: &Mdp) -> Result<f64> {
    let mut diameter: f64 = 0.0;
    for target in 0..mdp.n_states() {
        let (h, _) = hitting_times(mdp, target)?;
        diameter = h.iter().cloned().fold(diameter, f64::max);
    }
    Ok(diameter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_state() -> Mdp {
        Mdp::new(1, 2, vec![vec![1.0], vec![1.0]], vec![0.2, 0.8]).unwrap()
    }

    fn swap() -> Mdp {
        Mdp::new(2, 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn span_examples() {
        assert_eq!(span(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(span(&[0.0, 3.0, 1.0]), 3.0);
        assert_eq!(span(&[-2.0, 5.0]), 7.0);
    }

    proptest! {
        #[test]
        fn span_is_a_seminorm(v in prop::collection::vec(-100.0f64..100.0, 1..10),
                              c in -50.0f64..50.0, alpha in -5.0f64..5.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert!((span(&shifted) - span(&v)).abs() < 1e-9);
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            prop_assert!((span(&scaled) - alpha.abs() * span(&v)).abs() < 1e-9);
        }
    }

    #[test]
    fn one_state_picks_best_reward() {
        let sol = value_iteration(&one_state(), 1e-9).unwrap();
        assert!((sol.gain - 0.8).abs() < 1e-12);
        assert_eq!(sol.policy.action(0), 1);
        assert_eq!(sol.bias, vec![0.0]);
    }

    #[test]
    fn periodic_swap_averages_rewards() {
        // the undamped iteration oscillates forever on this chain
        let limits = IterationLimits { max_sweeps: 50_000, aperiodic_after: 2_000 };
        let sol = value_iteration_with(&swap(), 1e-9, limits).unwrap();
        assert!((sol.gain - 0.5).abs() < 1e-9);
        // h(1) - h(0) = 1 - rho - ... : bias satisfies the optimality equation
        let m = swap();
        for x in 0..2 {
            let rhs = m.reward(x, 0) + dot(m.row(x, 0), &sol.bias);
            assert!((sol.bias[x] + sol.gain - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn stalled_iteration_reports_span() {
        let limits = IterationLimits { max_sweeps: 100, aperiodic_after: 0 };
        match value_iteration_with(&swap(), 1e-9, limits) {
            Err(Error::NonConvergence { sweeps, span, .. }) => {
                assert_eq!(sweeps, 100);
                assert!((span - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_rows_and_rewards() {
        assert!(Mdp::new(1, 1, vec![vec![0.9]], vec![0.0]).is_err());
        assert!(Mdp::new(1, 1, vec![vec![1.0]], vec![1.5]).is_err());
        assert!(Mdp::new(2, 1, vec![vec![1.0]], vec![0.0]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(compute_diameter(&swap()).unwrap(), 1.0);
        assert_eq!(compute_diameter(&one_state()).unwrap(), 0.0);
    }

    #[test]
    fn diameter_of_disconnected_model_is_infinite() {
        let m = Mdp::new(2, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert!(!m.is_communicating());
        assert!(matches!(compute_diameter(&m), Err(Error::InfiniteDiameter { .. })));
    }

    #[test]
    fn policy_gain_handles_periodic_and_multichain() {
        let g = policy_gain(&swap(), &Policy::constant(2, 0));
        assert!(g.iter().all(|x| (x - 0.5).abs() < 1e-12));
        let absorbing =
            Mdp::new(2, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.3, 0.9]).unwrap();
        let g = policy_gain(&absorbing, &Policy::constant(2, 0));
        assert!((g[0] - 0.3).abs() < 1e-12 && (g[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn enumerate_covers_every_policy() {
        let all: Vec<Policy> = Policy::enumerate(3, 2).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[1].actions(), &[1, 0, 0]);
    }
}
