//! Monte-Carlo regret experiments.
//!
//! Every replication derives its random streams from `seed + replication`: stream 0 drives
//! transitions, 1 the agent, 2 reward noise and 3 the generation of per-replication sparse
//! instances. Both algorithms therefore face identical environment randomness.

mod bounds;
mod output;
mod plots;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::{episode_bound, Agent, AgentConfig};
use crate::envs::{
    random_sparse, riverswim, sixarms, Environment, RewardMode, RiverSwimParams, SixArmsParams,
    SparseGenConfig,
};
use crate::error::{Error, Result};
use crate::evi::Metric;
use crate::mdp::{compute_diameter, value_iteration};

pub use bounds::{policy_gap, sign_test_p_value, regret_bound_curves, high_probability_bound, BoundCurves};
pub use output::{
    parse_csv, parse_metadata, summarize_rows, write_metadata, write_summary, write_traces_csv,
    CsvRow, CSV_HEADER,
};
pub use plots::{emit_plots, sweep_demo, write_sweep, PlotArtifacts, SweepRow, SWEEP_P, SWEEP_V};

/// Tolerance of the planning run that supplies the optimal gain.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KlUcrl,
    Ucrl2,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::KlUcrl => "klucrl",
            Algorithm::Ucrl2 => "ucrl2",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Algorithm::KlUcrl => Metric::Kl,
            Algorithm::Ucrl2 => Metric::L1,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "klucrl" | "kl-ucrl" => Ok(Algorithm::KlUcrl),
            "ucrl2" => Ok(Algorithm::Ucrl2),
            other => Err(Error::Domain(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    RiverSwim(RiverSwimParams),
    SixArms(SixArmsParams),
    /// With `per_replication`, each replication draws a fresh instance; otherwise the
    /// configured seed fixes a single instance.
    Sparse { config: SparseGenConfig, per_replication: bool },
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::RiverSwim(_) => "riverswim",
            EnvSpec::SixArms(_) => "sixarms",
            EnvSpec::Sparse { .. } => "sparse",
        }
    }

    pub fn build(&self, instance_seed: u64) -> Result<Environment> {
        match self {
            EnvSpec::RiverSwim(p) => riverswim(p),
            EnvSpec::SixArms(p) => sixarms(p),
            EnvSpec::Sparse { config, per_replication } => {
                let mut config = config.clone();
                if *per_replication {
                    config.seed = instance_seed;
                }
                random_sparse(&config)
            }
        }
    }

    fn varies_per_replication(&self) -> bool {
        matches!(self, EnvSpec::Sparse { per_replication: true, .. })
    }
}

impl std::str::FromStr for EnvSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riverswim" => Ok(EnvSpec::RiverSwim(RiverSwimParams::default())),
            "sixarms" => Ok(EnvSpec::SixArms(SixArmsParams::default())),
            "sparse" => Ok(EnvSpec::Sparse { config: SparseGenConfig::default(), per_replication: true }),
            other => Err(Error::Domain(format!("unknown environment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithms: Vec<Algorithm>,
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    pub delta: f64,
    pub reward_mode: RewardMode,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, horizon: u64) -> Self {
        ExperimentConfig {
            env,
            algorithms: vec![Algorithm::KlUcrl, Algorithm::Ucrl2],
            horizon,
            replications: 20,
            seed: 0,
            delta: 0.05,
            reward_mode: RewardMode::Deterministic,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= 5 {
            return Err(Error::Domain(format!("horizon must exceed 5, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(Error::Domain("at least one replication is required".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Domain("no algorithm selected".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn agent_config(&self, algorithm: Algorithm, env: &Environment) -> AgentConfig {
        let mut config = AgentConfig::new(self.horizon, self.delta, algorithm.metric());
        if env.known_rewards() {
            config.known_rewards = Some(env.model().mean_rewards().to_vec());
        }
        config
    }
}

/// Counter-based stream `stream` of replication seed `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-step cumulative reward and regret of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algorithm: Algorithm,
    pub replication: usize,
    pub cumulative_reward: Vec<f64>,
    pub regret: Vec<f64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }
}

/// `regret(t) = t * optimal_gain - sum_{s <= t} R_s`, with `cumulative_reward(t)` alongside.
pub fn compute_regret(rewards: &[f64], optimal_gain: f64) -> (Vec<f64>, Vec<f64>) {
    let mut cumulative = Vec::with_capacity(rewards.len());
    let mut regret = Vec::with_capacity(rewards.len());
    let mut total = 0.0;
    for (i, r) in rewards.iter().enumerate() {
        total += r;
        cumulative.push(total);
        regret.push((i + 1) as f64 * optimal_gain - total);
    }
    (cumulative, regret)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub trace: RegretTrace,
    pub optimal_gain: f64,
    pub episodes: usize,
    /// `(state, action, reward)` per step, kept only when requested.
    pub steps: Option<Vec<(usize, usize, f64)>>,
}

/// Runs one agent on one environment for `horizon` steps.
pub fn run_agent(
    env: &mut Environment,
    agent: &mut Agent,
    horizon: u64,
    keep_steps: bool,
) -> Result<(Vec<f64>, Option<Vec<(usize, usize, f64)>>)> {
    let mut rewards = Vec::with_capacity(horizon as usize);
    let mut steps = keep_steps.then(|| Vec::with_capacity(horizon as usize));
    for _ in 0..horizon {
        let x = env.current_state();
        let a = agent.step(x)?;
        let (y, r) = env.sample_step(a);
        agent.observe(x, a, r, y);
        rewards.push(r);
        if let Some(s) = steps.as_mut() {
            s.push((x, a, r));
        }
    }
    Ok((rewards, steps))
}

/// Builds the environment of a replication with its paired random streams.
pub fn replication_environment(config: &ExperimentConfig, replication: usize) -> Result<Environment> {
    let seed = config.seed.wrapping_add(replication as u64);
    let instance_seed = {
        use rand::RngCore;
        replication_rng(seed, 3).next_u64()
    };
    let mut env = config.env.build(instance_seed)?.with_reward_mode(config.reward_mode);
    env.reseed(replication_rng(seed, 0), replication_rng(seed, 2));
    Ok(env)
}

pub fn run_replication(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    replication: usize,
    keep_steps: bool,
) -> Result<ReplicationResult> {
    let seed = config.seed.wrapping_add(replication as u64);
    let mut env = replication_environment(config, replication)?;
    let optimal_gain = value_iteration(env.model(), ORACLE_TOLERANCE)?.gain;
    let mut agent_rng = replication_rng(seed, 1);
    let model = env.model();
    let mut agent = Agent::new(
        model.n_states(),
        model.n_actions(),
        config.agent_config(algorithm, &env),
        &mut agent_rng,
    )?;
    let (rewards, steps) = run_agent(&mut env, &mut agent, config.horizon, keep_steps)?;
    let (cumulative_reward, regret) = compute_regret(&rewards, optimal_gain);
    Ok(ReplicationResult {
        trace: RegretTrace { algorithm, replication, cumulative_reward, regret },
        optimal_gain,
        episodes: agent.episode_count(),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub replications: usize,
    pub mean_final_regret: f64,
    pub stderr_final_regret: f64,
    pub mean_episodes: f64,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub env_name: &'static str,
    /// Ordered by algorithm (as configured), then replication.
    pub results: Vec<ReplicationResult>,
    pub summary: Vec<AlgorithmSummary>,
    pub metadata: Vec<(String, String)>,
    pub diameter: Option<f64>,
    pub gap: Option<f64>,
}

impl ExperimentResult {
    pub fn traces(&self) -> impl Iterator<Item = &RegretTrace> {
        self.results.iter().map(|r| &r.trace)
    }

    pub fn for_algorithm(&self, algorithm: Algorithm) -> impl Iterator<Item = &ReplicationResult> {
        self.results.iter().filter(move |r| r.trace.algorithm == algorithm)
    }

    pub fn summary_for(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summary.iter().find(|s| s.algorithm == algorithm.as_str())
    }
}

/// Runs every algorithm × replication pair in parallel and merges the results by key.
///
/// Outputs are written when `out_dir` is set. On failure the run is aborted and
/// `metadata.txt` records `status=invalid` with the error, so that partial outputs from an
/// earlier run in the same directory are not mistaken for valid ones.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut metadata = Vec::new();
    let outcome = run_experiment_inner(config, &mut metadata);
    if let (Err(e), Some(dir)) = (&outcome, &config.out_dir) {
        metadata.push(("status".into(), "invalid".into()));
        metadata.push(("error".into(), e.to_string()));
        std::fs::create_dir_all(dir)?;
        write_metadata(&dir.join("metadata.txt"), &metadata)?;
    }
    outcome
}

fn run_experiment_inner(config: &ExperimentConfig, metadata: &mut Vec<(String, String)>) -> Result<ExperimentResult> {
    metadata.push(("env".to_string(), config.env.name().to_string()));
    config.validate()?;
    let reference = replication_environment(config, 0)?;
    let fixed_model = !config.env.varies_per_replication();
    let diameter = if fixed_model { Some(compute_diameter(reference.model())?) } else { None };
    let gap = if fixed_model { policy_gap(reference.model()) } else { None };
    let optimal_gain = value_iteration(reference.model(), ORACLE_TOLERANCE)?.gain;

    metadata.extend([
        ("n_states".to_string(), reference.model().n_states().to_string()),
        ("n_actions".into(), reference.model().n_actions().to_string()),
        ("horizon".into(), config.horizon.to_string()),
        ("replications".into(), config.replications.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("delta".into(), config.delta.to_string()),
        ("reward_mode".into(), config.reward_mode.as_str().to_string()),
        ("algorithms".into(), config.algorithms.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",")),
        ("instance".into(), if fixed_model { "fixed" } else { "per-replication" }.to_string()),
    ]);
    if fixed_model {
        metadata.extend(reference.parameters().iter().cloned());
        metadata.push(("optimal_gain".into(), optimal_gain.to_string()));
    }
    if let Some(d) = diameter {
        metadata.push(("diameter".into(), d.to_string()));
    }
    if let Some(g) = gap {
        metadata.push(("gap".into(), g.to_string()));
    }
    for &algorithm in &config.algorithms {
        let agent = config.agent_config(algorithm, &reference);
        let prefix = algorithm.as_str();
        metadata.push((format!("{prefix}.metric"), agent.metric.as_str().into()));
        metadata.push((format!("{prefix}.evi_tolerance"), agent.evi_tolerance.to_string()));
        metadata.push((format!("{prefix}.known_rewards"), agent.known_rewards.is_some().to_string()));
        if algorithm == Algorithm::KlUcrl {
            let (s, a) = (reference.model().n_states(), reference.model().n_actions());
            let (c_p, c_r) = crate::agents::confidence_constants(s, a, config.horizon, config.delta)?;
            metadata.push((format!("{prefix}.c_p"), c_p.to_string()));
            metadata.push((format!("{prefix}.c_r"), c_r.to_string()));
        } else {
            metadata.push((format!("{prefix}.radii"), "ucrl2".into()));
        }
    }

    let jobs: Vec<(Algorithm, usize)> = config
        .algorithms
        .iter()
        .flat_map(|&a| (0..config.replications).map(move |r| (a, r)))
        .collect();
    let outcomes: Vec<Result<ReplicationResult>> = jobs
        .par_iter()
        .map(|&(algorithm, rep)| run_replication(config, algorithm, rep, false))
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    for (outcome, (algorithm, rep)) in outcomes.into_iter().zip(&jobs) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                metadata.push(("failed_job".into(), format!("{} replication {rep}", algorithm.as_str())));
                return Err(e);
            }
        }
    }
    metadata.push(("status".into(), "complete".into()));

    let summary = config
        .algorithms
        .iter()
        .map(|&algorithm| {
            let finals: Vec<f64> = results
                .iter()
                .filter(|r| r.trace.algorithm == algorithm)
                .map(|r| r.trace.final_regret())
                .collect();
            let episodes: Vec<f64> = results
                .iter()
                .filter(|r| r.trace.algorithm == algorithm)
                .map(|r| r.episodes as f64)
                .collect();
            let (mean, stderr) = mean_stderr(&finals);
            AlgorithmSummary {
                algorithm: algorithm.as_str().to_string(),
                replications: finals.len(),
                mean_final_regret: mean,
                stderr_final_regret: stderr,
                mean_episodes: mean_stderr(&episodes).0,
            }
        })
        .collect();

    let result = ExperimentResult {
        env_name: config.env.name(),
        results,
        summary,
        metadata: metadata.clone(),
        diameter,
        gap,
    };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        let csv = std::fs::File::create(dir.join("regret.csv"))?;
        write_traces_csv(std::io::BufWriter::new(csv), result.env_name, result.traces())?;
        write_summary(&dir.join("summary.csv"), &result.summary)?;
        write_metadata(&dir.join("metadata.txt"), &result.metadata)?;
    }
    log_episode_bounds(config, &result, &reference);
    Ok(result)
}

fn log_episode_bounds(config: &ExperimentConfig, result: &ExperimentResult, env: &Environment) {
    let bound = episode_bound(env.model().n_states(), env.model().n_actions(), config.horizon);
    for r in &result.results {
        if r.episodes as f64 > bound {
            log::warn!(
                "{} replication {}: {} episodes exceed the bound {bound:.1}",
                r.trace.algorithm.as_str(),
                r.trace.replication,
                r.episodes
            );
        }
    }
}
