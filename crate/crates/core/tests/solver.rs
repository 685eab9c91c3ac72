mod common;

use klucrl::klopt::{f_derivative, f_eval, kl_divergence, max_kl, max_l1, newton_solve, newton_start, Branch};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{dot, grid_kl_optimum, kl, l1, random_simplex};

/// `p` with some coordinates zeroed (at least one kept), values in `[0, scale)`, log-uniform radius.
fn instance(seed: u64, dim: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = random_simplex(&mut rng, dim);
    let keep = rng.random_range(0..dim);
    for (i, x) in p.iter_mut().enumerate() {
        if i != keep && rng.random::<f64>() < 0.3 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    let scale = 10f64.powf(rng.random_range(-1.0..2.0));
    let v: Vec<f64> = (0..dim).map(|_| scale * rng.random::<f64>()).collect();
    let eps = 10f64.powf(rng.random_range(-4.0..0.0));
    (p, v, eps)
}

fn support_max(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).filter(|(pi, _)| **pi > 0.0).map(|(_, vi)| *vi).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn grid_oracle_small_dimensions() {
    for dim in [2usize, 3] {
        for seed in 0..60 {
            let (p, v, eps) = instance(1000 * dim as u64 + seed, dim);
            let sol = max_kl(&p, &v, eps);
            let grid = grid_kl_optimum(&p, &v, eps, 1e-3);
            let vmax = v.iter().cloned().fold(0.0, f64::max);
            assert!(
                dot(sol.q.as_slice(), &v) >= grid - 1e-3 * vmax,
                "dim {dim} seed {seed}: {} < {grid}",
                dot(sol.q.as_slice(), &v)
            );
        }
    }
}

#[test]
fn observed_transitions_can_vanish_under_l1_only() {
    // 0 < p_0 < eps'/2 on the lowest value: the L1 solution drops it, the KL one cannot
    let p = [0.05, 0.55, 0.4];
    let v = [0.0, 1.0, 2.0];
    let q1 = max_l1(&p, &v, 0.2);
    assert_eq!(q1[0], 0.0);
    let qkl = max_kl(&p, &v, 0.2 * 0.2 / 2.0);
    assert!(qkl.q[0] > 0.0);
}

#[test]
fn sweep_cutoff_at_f_of_best_value() {
    let p = [0.3, 0.7, 0.0];
    let v = [1.0, 2.0, 3.0];
    let threshold = f_eval(&p, &v, 3.0).unwrap();
    assert!((threshold - 0.04542522467020865).abs() < 1e-14);
    for k in 0..200 {
        let eps = 0.5 * (0.002f64 / 0.5).powf(k as f64 / 199.0);
        let q = max_kl(&p, &v, eps).q;
        if eps > threshold {
            assert!(q[2] > 0.0, "eps {eps}");
        } else if eps < threshold {
            assert_eq!(q[2], 0.0, "eps {eps}");
        }
    }
}

#[test]
fn continuity_in_values() {
    let p = [0.2, 0.5, 0.3, 0.0];
    let v = [0.1, 0.7, 0.4, 0.5];
    let eps = 0.05;
    let base = max_kl(&p, &v, eps).q;
    let mut worst_ratio: f64 = 0.0;
    for k in 1..=20 {
        let eta = 1e-4 * k as f64 / 20.0;
        let moved: Vec<f64> = v.iter().enumerate().map(|(i, x)| x + eta * (i as f64 - 1.5)).collect();
        let q = max_kl(&p, &moved, eps).q;
        let change = l1(base.as_slice(), q.as_slice());
        worst_ratio = worst_ratio.max(change / eta);
    }
    // empirical Lipschitz constant stays moderate across the sweep
    assert!(worst_ratio < 50.0, "ratio {worst_ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn feasibility_and_improvement(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, eps) = instance(seed, dim);
        let sol = max_kl(&p, &v, eps);
        let q = sol.q.as_slice();
        prop_assert!(q.iter().all(|&x| x >= 0.0));
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(kl(&p, q) <= eps + 1e-9);
        prop_assert!(dot(q, &v) >= dot(&p, &v) - 1e-12 * (1.0 + dot(&p, &v).abs()));
        // Pinsker
        prop_assert!(l1(&p, q) <= (2.0 * kl_divergence(&p, q)).sqrt() + 1e-9);
        prop_assert!(l1(&p, q) <= (2.0 * eps).sqrt() + 1e-9);
    }

    #[test]
    fn boundary_is_active_when_values_vary(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, eps) = instance(seed, dim);
        let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let relevant: Vec<f64> = (0..dim).filter(|&i| p[i] > 0.0 || v[i] == vmax).map(|i| v[i]).collect();
        let spread = relevant.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - relevant.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-9);
        let sol = max_kl(&p, &v, eps);
        prop_assert!((kl(&p, sol.q.as_slice()) - eps).abs() <= 1e-6, "kl {} eps {eps}", kl(&p, sol.q.as_slice()));
    }

    #[test]
    fn observed_transitions_keep_mass(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, eps) = instance(seed, dim);
        let q = max_kl(&p, &v, eps).q;
        for i in 0..dim {
            if p[i] > 0.0 {
                prop_assert!(q[i] > 0.0);
            }
        }
    }

    #[test]
    fn unlikely_transition_cutoff(seed in any::<u64>(), dim in 3usize..=8) {
        let (mut p, v, eps) = instance(seed, dim);
        let best = (0..dim).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        p[best] = 0.0;
        let s: f64 = p.iter().sum();
        prop_assume!(s > 0.0);
        p.iter_mut().for_each(|x| *x /= s);
        let f_best = f_eval(&p, &v, v[best]).unwrap();
        prop_assume!((f_best - eps).abs() > 1e-9 * eps);
        let sol = max_kl(&p, &v, eps);
        prop_assert_eq!(sol.q[best] > 0.0, f_best < eps);
        if f_best < eps {
            prop_assert_eq!(sol.branch, Branch::InteriorBestState);
        }
        // the L1 maximizer always moves mass onto the best state
        prop_assert!(max_l1(&p, &v, (2.0 * eps).sqrt())[best] > 0.0);
    }

    #[test]
    fn f_is_positive_decreasing_convex(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, _) = instance(seed, dim);
        let top = support_max(&p, &v);
        let support: Vec<f64> = p.iter().zip(&v).filter(|(pi, _)| **pi > 0.0).map(|(_, vi)| *vi).collect();
        let spread = top - support.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        let h = spread * 1e-2;
        let grid: Vec<f64> = (1..200).map(|k| top + h * k as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&nu| f_eval(&p, &v, nu).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[0] > 0.0 && w[1] > 0.0);
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for w in vals.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
        for &nu in grid.iter().step_by(20) {
            prop_assert!(f_derivative(&p, &v, nu).unwrap() <= 0.0);
        }
    }

    #[test]
    fn newton_round_trip(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, eps) = instance(seed, dim);
        let support: Vec<f64> = p.iter().zip(&v).filter(|(pi, _)| **pi > 0.0).map(|(_, vi)| *vi).collect();
        prop_assume!(support.len() >= 2);
        let nu = newton_solve(&p, &v, eps).unwrap();
        let top = support_max(&p, &v);
        prop_assert!(nu > top);
        if nu == top.next_up() {
            // the root lies in (top, nu]: f is decreasing, so f(nu) cannot exceed eps
            prop_assert!(f_eval(&p, &v, nu).unwrap() <= eps + 1e-10);
            return Ok(());
        }
        // a root within a few ulps of max V cannot be pinned more tightly than one ulp of nu
        let conditioning = f_derivative(&p, &v, nu).unwrap().abs() * 2.0 * f64::EPSILON * nu.abs();
        prop_assert!((f_eval(&p, &v, nu).unwrap() - eps).abs() <= 1e-10 + conditioning);
    }

    #[test]
    fn newton_start_error_vanishes_like_sqrt_eps(seed in any::<u64>(), dim in 2usize..=8) {
        let (p, v, _) = instance(seed, dim);
        let support: Vec<f64> = p.iter().zip(&v).filter(|(pi, _)| **pi > 0.0).map(|(_, vi)| *vi).collect();
        prop_assume!(support.len() >= 2);
        let rel = |eps: f64| (f_eval(&p, &v, newton_start(&p, &v, eps)).unwrap() - eps) / eps;
        let (coarse, fine) = (rel(1e-8), rel(1e-10));
        prop_assert!(fine.abs() <= 0.05, "relative error {fine}");
        // leading error term is proportional to sqrt(eps): a factor 100 in eps gives 10 in error
        if coarse.abs() > 1e-5 {
            prop_assert!((coarse / fine - 10.0).abs() <= 1.0, "ratio {}", coarse / fine);
        }
    }
}
