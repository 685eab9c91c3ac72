//! Reference regret curves and the paired sign test.

use crate::mdp::{policy_gain, value_iteration, Mdp, Policy};

use super::ORACLE_TOLERANCE;

/// Leading constant of the high-probability bound.
pub const HIGH_PROBABILITY_C: f64 = 24.0;
/// Leading constant of the logarithmic expected-regret bound.
pub const LOGARITHMIC_C: f64 = 400.0;

/// Largest `|X||A|` for which the gap is computed by enumerating policies.
pub const GAP_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurves {
    pub high_probability: Vec<f64>,
    /// Present only when a gap is known.
    pub logarithmic: Option<Vec<f64>>,
}

/// `C D |X| sqrt(|A| T log(log T / delta))` with `C = 24`.
pub fn high_probability_bound(n_states: usize, n_actions: usize, diameter: f64, delta: f64, t: f64) -> f64 {
    let inner = (t.ln() / delta).ln().max(0.0);
    HIGH_PROBABILITY_C * diameter * n_states as f64 * (n_actions as f64 * t * inner).sqrt()
}

/// Both reference curves over `grid`; the logarithmic one is `C D² |X|² |A| log T / gap`, `C = 400`.
pub fn regret_bound_curves(
    n_states: usize,
    n_actions: usize,
    diameter: f64,
    delta: f64,
    grid: &[f64],
    gap: Option<f64>,
) -> BoundCurves {
    let high_probability = grid
        .iter()
        .map(|&t| high_probability_bound(n_states, n_actions, diameter, delta, t))
        .collect();
    let logarithmic = gap.filter(|g| *g > 0.0).map(|g| {
        let scale = LOGARITHMIC_C * diameter * diameter * (n_states * n_states * n_actions) as f64 / g;
        grid.iter().map(|&t| scale * t.ln()).collect()
    });
    BoundCurves { high_probability, logarithmic }
}

/// Gap between the optimal gain and the best suboptimal deterministic policy.
///
/// Policies are scored by their worst starting state. `None` when the model is too large
/// to enumerate or every policy is optimal.
pub fn policy_gap(mdp: &Mdp) -> Option<f64> {
    if mdp.n_states() * mdp.n_actions() > GAP_ENUMERATION_LIMIT {
        return None;
    }
    let optimal = value_iteration(mdp, ORACLE_TOLERANCE).ok()?.gain;
    let threshold = optimal - 1e-8;
    Policy::enumerate(mdp.n_states(), mdp.n_actions())
        .map(|pi| policy_gain(mdp, &pi).into_iter().fold(f64::INFINITY, f64::min))
        .filter(|&g| g < threshold)
        .fold(None, |best: Option<f64>, g| Some(best.map_or(g, |b| b.max(g))))
        .map(|second| optimal - second)
}

/// One-sided sign test: `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test_p_value(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    // log C(n, k) accumulated incrementally
    let mut log_choose = 0.0;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            total += (log_choose - n as f64 * std::f64::consts::LN_2).exp();
        }
    }
    total.min(1.0)
}
