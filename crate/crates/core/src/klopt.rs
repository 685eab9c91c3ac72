//! Linear maximization over KL and L¹ neighborhoods of a probability vector.
//!
//! `max_kl` solves `max V·q  s.t.  KL(p, q) <= eps` over the simplex. The Lagrangian
//! conditions reduce the problem to a scalar root of
//!
//! ```text
//! f(nu) = sum_{p_i > 0} p_i log(nu - V_i) + log(sum_{p_i > 0} p_i / (nu - V_i))
//! ```
//!
//! which is positive, convex and decreasing on `nu > max_{p_i > 0} V_i`. On the support,
//! `q_i` is proportional to `p_i / (nu - V_i)`; off the support, mass only goes to
//! maximal-value coordinates and only when `f(max V) < eps`.
//!
//! Functions on slices assume `p` is a valid probability vector and panic on length
//! mismatches. Use [`KlMaxProblem`] for validated input.

use crate::error::{Error, Result};
use crate::mdp::SimplexVector;

/// Target accuracy of the Newton root, `|f(nu) - eps|`.
pub const ROOT_TOL: f64 = 1e-10;

/// Slack allowed on the KL constraint of returned vectors.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_NEWTON_ITERS: usize = 200;

/// Which case of the solver produced a [`KlMaxSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Some unobserved maximal-value coordinates receive mass `r > 0`.
    InteriorBestState,
    /// Mass stays on the support; `nu` is the root of `f(nu) = eps`.
    NewtonRoot,
    /// The constraint or the objective leaves no room for improvement; `q = p`.
    DegenerateReturnP,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::InteriorBestState => "interior-best-state",
            Branch::NewtonRoot => "newton-root",
            Branch::DegenerateReturnP => "degenerate-return-p",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlMaxSolution {
    pub q: SimplexVector,
    /// Lagrange root; `None` on the degenerate branch.
    pub nu: Option<f64>,
    /// Total mass placed outside the support of `p`.
    pub r: f64,
    pub branch: Branch,
}

/// Validated input of [`max_kl`].
#[derive(Debug, Clone, PartialEq)]
pub struct KlMaxProblem {
    p: SimplexVector,
    values: Vec<f64>,
    epsilon: f64,
}

impl KlMaxProblem {
    pub fn new(p: SimplexVector, values: Vec<f64>, epsilon: f64) -> Result<Self> {
        if p.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: values.len() });
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("radius must be finite and nonnegative, got {epsilon}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("value vector has non-finite entries".into()));
        }
        Ok(KlMaxProblem { p, values, epsilon })
    }

    pub fn solve(&self) -> KlMaxSolution {
        max_kl(self.p.as_slice(), &self.values, self.epsilon)
    }

    pub fn solve_l1(&self) -> SimplexVector {
        max_l1(self.p.as_slice(), &self.values, self.epsilon)
    }
}

/// `KL(p, q) = sum p_i log(p_i / q_i)` with `0 log 0 = 0`; infinite if `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "dimension mismatch");
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total.max(0.0)
}

/// Support statistics of `(p, V)` reused by every evaluation of `f`.
///
/// Internally `f` is parametrized by the gap `s = nu - max_{p_i > 0} V_i`, so that roots
/// lying within rounding distance of the top value are still resolved exactly.
#[derive(Debug, Clone)]
struct Support {
    /// `(p_i / sum p, V_i)` on `p_i > 0`.
    terms: Vec<(f64, f64)>,
    mean: f64,
    variance: f64,
    v_max: f64,
    v_min: f64,
}

impl Support {
    fn new(p: &[f64], v: &[f64]) -> Self {
        assert_eq!(p.len(), v.len(), "dimension mismatch");
        let mass: f64 = p.iter().filter(|&&x| x > 0.0).sum();
        let terms: Vec<(f64, f64)> = p
            .iter()
            .zip(v)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &vi)| (pi / mass, vi))
            .collect();
        let mean: f64 = terms.iter().map(|(w, x)| w * x).sum();
        let variance: f64 = terms.iter().map(|(w, x)| w * (x - mean) * (x - mean)).sum();
        let (v_min, v_max) = terms
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, x)| (lo.min(x), hi.max(x)));
        Support { terms, mean, variance, v_max, v_min }
    }

    fn tie_tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.v_max.abs())
    }

    fn is_constant(&self) -> bool {
        self.v_max - self.v_min <= self.tie_tolerance()
    }

    // Evaluated relative to D = nu - E_p V:
    //   f = sum p_i log(d_i / D) + log1p(sum p_i (V_i - m) / d_i),  d_i = nu - V_i,
    // which keeps full relative precision when nu is far from the values.
    fn f_gap(&self, s: f64) -> f64 {
        let big_d = (self.v_max - self.mean) + s;
        let mut first = 0.0;
        let mut inner = 0.0;
        for &(w, vi) in &self.terms {
            let d = (self.v_max - vi) + s;
            let x = (self.mean - vi) / big_d;
            first += w * if x > -0.5 { x.ln_1p() } else { d.ln() - big_d.ln() };
            inner += w * (vi - self.mean) / d;
        }
        first + inner.ln_1p()
    }

    // f' = A - B / A with A = sum p/d, B = sum p/d^2, i.e. -Var_p(1/d) / E_p(1/d).
    fn f_prime_gap(&self, s: f64) -> f64 {
        let big_d = (self.v_max - self.mean) + s;
        // a_i - 1 = D/d_i - 1 = (V_i - m) / d_i
        let dev = |vi: f64| (vi - self.mean) / ((self.v_max - vi) + s);
        let shifted_mean: f64 = self.terms.iter().map(|&(w, vi)| w * dev(vi)).sum();
        let var: f64 = self
            .terms
            .iter()
            .map(|&(w, vi)| {
                let c = dev(vi) - shifted_mean;
                w * c * c
            })
            .sum();
        -var / (big_d * (1.0 + shifted_mean))
    }

    fn gap_of(&self, nu: f64) -> Result<f64> {
        if nu > self.v_max && nu.is_finite() {
            Ok(nu - self.v_max)
        } else {
            Err(Error::Domain(format!(
                "nu = {nu} must exceed the largest supported value {}",
                self.v_max
            )))
        }
    }

    fn newton_start(&self, epsilon: f64) -> f64 {
        self.mean + (self.variance / (2.0 * epsilon)).sqrt()
    }

    /// Gap `s > 0` with `f = eps`, by safeguarded Newton steps in `ln s`.
    ///
    /// `f` behaves like `-(1 - p_top) ln s` near zero and like `Var / (2 s^2)` far away, so
    /// in the log variable Newton is well behaved on both ends; bracket steps bisect in `ln s`.
    fn solve_gap(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("radius must be positive, got {epsilon}")));
        }
        if self.terms.len() < 2 || self.is_constant() {
            return Err(Error::NoRoot);
        }
        let spread = self.v_max - self.v_min;
        let start = self.newton_start(epsilon) - self.v_max;
        let mut t = if start > 0.0 { start.ln() } else { spread.ln() };
        let mut g = self.f_gap(t.exp()) - epsilon;

        // bracket [lo, hi] in ln s with g(lo) > 0 > g(hi)
        let (mut lo, mut hi);
        let min_t = f64::MIN_POSITIVE.ln();
        if g > 0.0 {
            lo = t;
            let mut step = std::f64::consts::LN_2;
            loop {
                hi = t + step;
                let gh = self.f_gap(hi.exp()) - epsilon;
                if gh <= 0.0 || !hi.exp().is_finite() {
                    break;
                }
                lo = hi;
                step *= 2.0;
            }
        } else {
            hi = t;
            let mut step = std::f64::consts::LN_2;
            loop {
                lo = (t - step).max(min_t);
                let gl = self.f_gap(lo.exp()) - epsilon;
                if gl > 0.0 {
                    break;
                }
                if lo <= min_t {
                    // the root is below the smallest representable gap
                    return Ok(f64::MIN_POSITIVE);
                }
                hi = lo;
                step *= 2.0;
            }
        }
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
            g = self.f_gap(t.exp()) - epsilon;
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
        }

        let target = ROOT_TOL * 1e-2 * epsilon.min(1.0);
        for _ in 0..MAX_NEWTON_ITERS {
            if g.abs() <= target {
                break;
            }
            let s = t.exp();
            let slope = self.f_prime_gap(s) * s;
            let mut candidate = t - g / slope;
            if !(candidate > lo && candidate < hi) || !candidate.is_finite() {
                candidate = 0.5 * (lo + hi);
            }
            if candidate == t {
                break;
            }
            t = candidate;
            g = self.f_gap(t.exp()) - epsilon;
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(t.exp())
    }
}

/// `f(nu)`; requires `nu > max_{p_i > 0} V_i`.
pub fn f_eval(p: &[f64], v: &[f64], nu: f64) -> Result<f64> {
    let support = Support::new(p, v);
    let s = support.gap_of(nu)?;
    Ok(support.f_gap(s))
}

/// Analytic derivative of `f`.
pub fn f_derivative(p: &[f64], v: &[f64], nu: f64) -> Result<f64> {
    let support = Support::new(p, v);
    let s = support.gap_of(nu)?;
    Ok(support.f_prime_gap(s))
}

/// Asymptotic Newton start `E_p V + sqrt(Var_p(V) / (2 eps))`, from `f(nu) ~ Var_p(V) / (2 (nu - E_p V)^2)`.
pub fn newton_start(p: &[f64], v: &[f64], epsilon: f64) -> f64 {
    Support::new(p, v).newton_start(epsilon)
}

/// Root of `f(nu) = eps` by safeguarded Newton iterations.
///
/// When the root lies within a few ulps of `max_{p_i > 0} V_i` the returned `nu` carries
/// the rounding of that sum; [`max_kl`] works with the gap directly and is unaffected.
/// A root less than one ulp above it comes back as the next representable number.
pub fn newton_solve(p: &[f64], v: &[f64], epsilon: f64) -> Result<f64> {
    let support = Support::new(p, v);
    Ok(root_from_gap(support.v_max, support.solve_gap(epsilon)?))
}

fn root_from_gap(v_max: f64, gap: f64) -> f64 {
    (v_max + gap).max(v_max.next_up())
}

/// Maximizes `V·q` over the KL ball `{q : KL(p, q) <= eps}`.
pub fn max_kl(p: &[f64], v: &[f64], epsilon: f64) -> KlMaxSolution {
    assert_eq!(p.len(), v.len(), "dimension mismatch");
    let n = p.len();
    let degenerate = || KlMaxSolution {
        q: SimplexVector::from_vec_unchecked(p.to_vec()),
        nu: None,
        r: 0.0,
        branch: Branch::DegenerateReturnP,
    };
    if !(epsilon > 0.0) {
        return degenerate();
    }
    let support = Support::new(p, v);
    let v_max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax_on_support = v_max <= support.v_max;
    // On a constant support, values within the tie tolerance of it count as ties too;
    // otherwise f vanishes identically and the best coordinates take 1 - exp(-eps).
    let constant = support.is_constant();
    if constant && (argmax_on_support || v_max - support.v_max <= support.tie_tolerance()) {
        return degenerate();
    }

    // Unobserved coordinates sharing the global maximum.
    let best_unobserved: Vec<usize> = (0..n).filter(|&i| p[i] <= 0.0 && v[i] == v_max).collect();
    let mut q = vec![0.0; n];
    let (gap, r, branch) = if !best_unobserved.is_empty() && !argmax_on_support {
        let gap = v_max - support.v_max;
        let f_at_max = if constant { 0.0 } else { support.f_gap(gap) };
        if f_at_max < epsilon {
            let r = -(f_at_max - epsilon).exp_m1();
            let share = r / best_unobserved.len() as f64;
            for &i in &best_unobserved {
                q[i] = share;
            }
            (gap, r, Branch::InteriorBestState)
        } else {
            (support_root(&support, epsilon), 0.0, Branch::NewtonRoot)
        }
    } else {
        (support_root(&support, epsilon), 0.0, Branch::NewtonRoot)
    };

    let mut tilde_sum = 0.0;
    for i in 0..n {
        if p[i] > 0.0 {
            q[i] = p[i] / ((support.v_max - v[i]) + gap);
            tilde_sum += q[i];
        }
    }
    let scale = (1.0 - r) / tilde_sum;
    for i in 0..n {
        if p[i] > 0.0 {
            q[i] *= scale;
        }
    }
    let nu = if branch == Branch::InteriorBestState { v_max } else { root_from_gap(support.v_max, gap) };
    KlMaxSolution { q: SimplexVector::from_vec_unchecked(q), nu: Some(nu), r, branch }
}

fn support_root(support: &Support, epsilon: f64) -> f64 {
    support
        .solve_gap(epsilon)
        .expect("non-constant support values always admit a root for eps > 0")
}

/// Maximizes `V·q` over the L¹ ball `{q : |p - q|_1 <= eps}`.
///
/// The top-value coordinate gains `eps/2` (capped at 1); the surplus is removed from
/// the lowest-value coordinates first. Ties go to the lowest index.
pub fn max_l1(p: &[f64], v: &[f64], epsilon: f64) -> SimplexVector {
    assert_eq!(p.len(), v.len(), "dimension mismatch");
    let order = ascending_order(v);
    let mut q = p.to_vec();
    max_l1_ordered(p, v, epsilon, &order, &mut q);
    SimplexVector::from_vec_unchecked(q)
}

/// Indices sorted by increasing value, ties by lowest index.
pub fn ascending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    order
}

/// [`max_l1`] with a precomputed [`ascending_order`] of `v`; writes the result into `q`.
pub(crate) fn max_l1_ordered(p: &[f64], v: &[f64], epsilon: f64, order: &[usize], q: &mut [f64]) {
    q.copy_from_slice(p);
    if !(epsilon > 0.0) {
        return;
    }
    // maximal values form a suffix of `order`, in increasing index order
    let top = v[*order.last().expect("nonempty")];
    let best = order[order.iter().position(|&i| v[i] == top).unwrap_or(order.len() - 1)];
    if p[best] + 0.5 * epsilon >= 1.0 {
        q.fill(0.0);
        q[best] = 1.0;
        return;
    }
    q[best] = p[best] + 0.5 * epsilon;
    let mut excess = q[best] - p[best];
    for &i in order {
        if excess <= 0.0 {
            break;
        }
        if i == best {
            continue;
        }
        let take = q[i].min(excess);
        q[i] -= take;
        excess -= take;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_abs_diff_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]), 2f64.ln(), epsilon = 1e-15);
        let kl = kl_divergence(&[0.3, 0.7, 0.0], &[0.16710, 0.77978, 0.05312]);
        assert_abs_diff_eq!(kl, 0.1, epsilon = 1e-4);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn f_examples() {
        let f = f_eval(&[0.5, 0.5], &[0.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(f, 0.5 * 2f64.ln() + 0.75f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(f, 0.0589, epsilon = 1e-4);
        assert_eq!(f_eval(&[0.0, 1.0, 0.0], &[3.0, 1.0, -2.0], 1.5).unwrap(), 0.0);
        // f(nu) 2 nu^2 -> Var_p(V)
        for nu in [1e3, 1e5] {
            let scaled = f_eval(&[0.5, 0.5], &[0.0, 1.0], nu).unwrap() * 2.0 * nu * nu;
            assert_abs_diff_eq!(scaled, 0.25, epsilon = 2.0 / nu);
        }
    }

    #[test]
    fn f_rejects_nu_outside_domain() {
        assert!(matches!(f_eval(&[0.5, 0.5], &[0.0, 1.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(f_eval(&[0.5, 0.5], &[0.0, 1.0], 0.5), Err(Error::Domain(_))));
        // unobserved coordinates do not restrict the domain
        assert!(f_eval(&[0.5, 0.5, 0.0], &[0.0, 1.0, 9.0], 1.5).is_ok());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (p, v) = ([0.2, 0.5, 0.3], [0.0, 2.0, 1.0]);
        for nu in [2.01, 2.5, 4.0, 30.0] {
            let h = 1e-6 * nu;
            let fd = (f_eval(&p, &v, nu + h).unwrap() - f_eval(&p, &v, nu - h).unwrap()) / (2.0 * h);
            let an = f_derivative(&p, &v, nu).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-6), "nu={nu}: {fd} vs {an}");
        }
    }

    #[test]
    fn newton_round_trips_through_f() {
        let (p, v) = ([0.5, 0.5], [0.0, 1.0]);
        let eps = f_eval(&p, &v, 2.0).unwrap();
        let nu = newton_solve(&p, &v, eps).unwrap();
        assert_abs_diff_eq!(nu, 2.0, epsilon = 1e-8);
        assert!((f_eval(&p, &v, nu).unwrap() - eps).abs() <= ROOT_TOL);
    }

    #[test]
    fn newton_start_is_accurate_for_small_radius() {
        let (p, v) = ([0.5, 0.5], [0.0, 1.0]);
        let nu0 = newton_start(&p, &v, 1e-3);
        assert_abs_diff_eq!(nu0, 0.5 + (0.25f64 / 0.002).sqrt(), epsilon = 1e-12);
        let f0 = f_eval(&p, &v, nu0).unwrap();
        assert!((f0 - 1e-3).abs() / 1e-3 <= 0.05);
        let nu = newton_solve(&p, &v, 1e-3).unwrap();
        assert_abs_diff_eq!(nu, 11.68593052305653, epsilon = 1e-8);
    }

    #[test]
    fn newton_root_above_three() {
        let (p, v) = ([0.3, 0.7], [1.0, 2.0]);
        assert_abs_diff_eq!(f_eval(&p, &v, 3.0).unwrap(), 0.04542522467020865, epsilon = 1e-14);
        let nu = newton_solve(&p, &v, 0.04).unwrap();
        assert!(nu > 3.0);
        assert!((f_eval(&p, &v, nu).unwrap() - 0.04).abs() <= ROOT_TOL);
    }

    #[test]
    fn newton_handles_large_radius() {
        // the plain Newton step from the asymptotic start leaves the domain here
        let (p, v) = ([0.01, 0.99], [5.0, 0.0]);
        for eps in [1.0, 3.0, 4.5] {
            let nu = newton_solve(&p, &v, eps).unwrap();
            assert!(nu > 5.0);
            assert!((f_eval(&p, &v, nu).unwrap() - eps).abs() <= ROOT_TOL);
        }
    }

    #[test]
    fn newton_reports_missing_root() {
        assert_eq!(newton_solve(&[1.0, 0.0], &[0.0, 1.0], 0.1), Err(Error::NoRoot));
        assert_eq!(newton_solve(&[0.5, 0.5], &[2.0, 2.0], 0.1), Err(Error::NoRoot));
        assert!(matches!(newton_solve(&[0.5, 0.5], &[0.0, 1.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_values_return_p() {
        let sol = max_kl(&[0.2, 0.3, 0.5], &[1.5, 1.5, 1.5], 0.3);
        assert_eq!(sol.branch, Branch::DegenerateReturnP);
        assert_eq!(sol.q.as_slice(), &[0.2, 0.3, 0.5]);
        let sol = max_kl(&[0.2, 0.8], &[0.0, 1.0], 0.0);
        assert_eq!(sol.branch, Branch::DegenerateReturnP);
        // point mass already on the best coordinate
        let sol = max_kl(&[0.0, 1.0], &[0.0, 1.0], 0.5);
        assert_eq!(sol.q.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn worked_example_with_unobserved_best_state() {
        let p = [0.3, 0.7, 0.0];
        let sol = max_kl(&p, &[1.0, 2.0, 3.0], 0.1);
        assert_eq!(sol.branch, Branch::InteriorBestState);
        assert_eq!(sol.nu, Some(3.0));
        let expected = [0.16709783, 0.77978987, 0.05311230];
        for (q, e) in sol.q.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*q, e, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(sol.r, 0.053112297629651306, epsilon = 1e-12);
        assert_abs_diff_eq!(kl_divergence(&p, sol.q.as_slice()), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn small_radius_renounces_unobserved_state() {
        let p = [0.3, 0.7, 0.0];
        let sol = max_kl(&p, &[1.0, 2.0, 3.0], 0.04);
        assert_eq!(sol.branch, Branch::NewtonRoot);
        assert_eq!(sol.q[2], 0.0);
        assert_eq!(sol.r, 0.0);
        assert!(sol.nu.unwrap() > 3.0);
        assert_abs_diff_eq!(kl_divergence(&p, sol.q.as_slice()), 0.04, epsilon = 1e-9);
    }

    #[test]
    fn root_below_one_ulp_stays_in_domain() {
        // nearly all mass on the top value: the gap underflows for a large radius
        let (p, v) = ([0.001, 0.999], [0.0, 1.0]);
        let nu = newton_solve(&p, &v, 0.9).unwrap();
        assert_eq!(nu, 1.0f64.next_up());
        assert!(f_eval(&p, &v, nu).unwrap() <= 0.9);
    }

    #[test]
    fn point_mass_moves_exp_minus_eps() {
        let sol = max_kl(&[1.0, 0.0], &[0.0, 1.0], 0.05);
        assert_abs_diff_eq!(sol.q[0], (-0.05f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(sol.q[1], 1.0 - (-0.05f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn tied_unobserved_maxima_share_mass_uniformly() {
        let sol = max_kl(&[0.5, 0.5, 0.0, 0.0], &[0.0, 1.0, 2.0, 2.0], 0.5);
        assert_eq!(sol.branch, Branch::InteriorBestState);
        assert_eq!(sol.q[2], sol.q[3]);
        assert_abs_diff_eq!(sol.q[2] + sol.q[3], sol.r, epsilon = 1e-15);
    }

    #[test]
    fn unobserved_coordinate_tied_with_support_max_stays_empty() {
        let sol = max_kl(&[0.5, 0.5, 0.0], &[0.0, 1.0, 1.0], 0.2);
        assert_eq!(sol.branch, Branch::NewtonRoot);
        assert_eq!(sol.q[2], 0.0);
    }

    #[test]
    fn near_constant_support_with_rounding_level_gap_returns_p() {
        let c = 0.028120791323174243;
        let p = [0.3, 0.0, 0.7];
        let v = [c, c + 2.2e-16, c - 2e-14];
        let sol = max_kl(&p, &v, 0.6);
        assert_eq!(sol.branch, Branch::DegenerateReturnP);
        assert_eq!(sol.q.as_slice(), &p);
        // a clear gap above a constant support takes 1 - exp(-eps)
        let sol = max_kl(&p, &[c, c + 0.1, c - 2e-14], 0.6);
        assert_eq!(sol.branch, Branch::InteriorBestState);
        assert!((sol.q[1] - (1.0 - (-0.6f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let q = max_l1(&[0.15, 0.2, 0.65], &[0.0, 0.05, 1.0], 0.2);
        for (a, b) in q.as_slice().iter().zip([0.05, 0.2, 0.75]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(max_l1(&[0.15, 0.2, 0.65], &[0.0, 0.05, 1.0], 0.0).as_slice(), &[0.15, 0.2, 0.65]);
        let eps1 = (2.0f64 * 0.05).sqrt();
        let q = max_l1(&[0.0, 0.4, 0.6], &[-1.0, -2.0, -5.0], eps1);
        assert_abs_diff_eq!(q[0], eps1 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(q[2], 0.6 - eps1 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn l1_caps_at_one_and_breaks_ties_low() {
        let q = max_l1(&[0.3, 0.3, 0.4], &[1.0, 1.0, 0.0], 5.0);
        assert_eq!(q.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn problem_validates_input() {
        let p = SimplexVector::new(vec![0.5, 0.5]).unwrap();
        assert!(KlMaxProblem::new(p.clone(), vec![1.0], 0.1).is_err());
        assert!(KlMaxProblem::new(p.clone(), vec![1.0, 0.0], -0.1).is_err());
        let sol = KlMaxProblem::new(p, vec![1.0, 0.0], 0.1).unwrap().solve();
        assert!(sol.q[0] > 0.5);
    }
}
