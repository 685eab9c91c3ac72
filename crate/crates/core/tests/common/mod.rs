//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use klucrl::mdp::{Mdp, Policy};
use rand::Rng;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-14, "singular system");
        for row in col + 1..n {
            let factor = a[row][col] / d;
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Stationary distribution of a unichain kernel: `pi (P - I) = 0`, `sum pi = 1`.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // transpose system, last equation replaced by normalization
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_linear(a, b)
}

/// Gain of a unichain policy through its stationary distribution.
pub fn unichain_gain(mdp: &Mdp, policy: &Policy) -> f64 {
    let n = mdp.n_states();
    let p: Vec<Vec<f64>> = (0..n).map(|x| mdp.row(x, policy.action(x)).to_vec()).collect();
    let pi = stationary(&p);
    (0..n).map(|x| pi[x] * mdp.reward(x, policy.action(x))).sum()
}

/// Expected hitting times of `target` under a fixed policy, by a direct linear solve.
/// States that never reach `target` get `f64::INFINITY`.
pub fn policy_hitting_times(mdp: &Mdp, policy: &Policy, target: usize) -> Vec<f64> {
    let n = mdp.n_states();
    // backward reachability to the target under the policy
    let mut reaches = vec![false; n];
    reaches[target] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for x in 0..n {
            if !reaches[x] && mdp.row(x, policy.action(x)).iter().zip(&reaches).any(|(p, r)| *p > 0.0 && *r) {
                reaches[x] = true;
                changed = true;
            }
        }
    }
    // finite only if no reachable state escapes the target forever
    let mut changed = true;
    while changed {
        changed = false;
        for x in 0..n {
            if x != target
                && reaches[x]
                && mdp.row(x, policy.action(x)).iter().zip(&reaches).any(|(p, r)| *p > 0.0 && !*r)
            {
                reaches[x] = false;
                changed = true;
            }
        }
    }
    let others: Vec<usize> = (0..n).filter(|&x| x != target && reaches[x]).collect();
    let m = others.len();
    let mut a = vec![vec![0.0; m]; m];
    let b = vec![1.0; m];
    for (i, &x) in others.iter().enumerate() {
        let row = mdp.row(x, policy.action(x));
        for (j, &y) in others.iter().enumerate() {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - row[y];
        }
    }
    let sol = solve_linear(a, b);
    let mut out: Vec<f64> = (0..n).map(|x| if reaches[x] { 0.0 } else { f64::INFINITY }).collect();
    for (i, &x) in others.iter().enumerate() {
        out[x] = sol[i];
    }
    out
}

pub fn random_simplex<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Dense random MDP (every transition positive, hence ergodic under every policy).
pub fn random_dense_mdp<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize) -> Mdp {
    let rows = (0..n_states * n_actions).map(|_| random_simplex(rng, n_states)).collect();
    let rewards = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    Mdp::new(n_states, n_actions, rows, rewards).unwrap()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| if *qi <= 0.0 { f64::INFINITY } else { pi * (pi / qi).ln() })
        .sum()
}

pub fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best `V.q` over a grid of step `h` on the simplex, restricted to `KL(p, q) <= eps`.
pub fn grid_kl_optimum(p: &[f64], v: &[f64], eps: f64, h: f64) -> f64 {
    let steps = (1.0 / h).round() as usize;
    let mut best = f64::NEG_INFINITY;
    match p.len() {
        2 => {
            for i in 0..=steps {
                let a = i as f64 * h;
                let q = [a, 1.0 - a];
                if kl(p, &q) <= eps {
                    best = best.max(dot(&q, v));
                }
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let a = i as f64 * h;
                    let b = j as f64 * h;
                    let q = [a, b, (1.0 - a - b).max(0.0)];
                    if kl(p, &q) <= eps {
                        best = best.max(dot(&q, v));
                    }
                }
            }
        }
        d => panic!("grid oracle supports dimensions 2 and 3, got {d}"),
    }
    best
}
