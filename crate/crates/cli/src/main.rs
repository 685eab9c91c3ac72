use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use klucrl::envs::RewardMode;
use klucrl::evi::Metric;
use klucrl::harness::{
    emit_plots, run_experiment, sweep_demo, write_sweep, Algorithm, EnvSpec, ExperimentConfig,
};
use klucrl::klopt::{max_kl, max_l1};
use klucrl::mdp::SimplexVector;

/// Overrides the default output directory of `run` and `sweep-demo`.
const OUT_DIR_ENV: &str = "KLUCRL_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

#[derive(Parser)]
#[command(name = "klucrl", version, about = "KL-UCRL and UCRL2 on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize q.V over a KL (or L1) ball around p.
    Solve(SolveArgs),
    /// Run a Monte-Carlo regret experiment.
    Run(RunArgs),
    /// Write a gnuplot script and data for a regret CSV.
    Plot(PlotArgs),
    /// Trace the KL and L1 solutions on a fixed instance as epsilon shrinks.
    SweepDemo(SweepArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// File holding the probability vector p.
    #[arg(long)]
    p: PathBuf,
    /// File holding the value vector V.
    #[arg(long = "V", alias = "v")]
    values: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value = "kl")]
    metric: Metric,
}

#[derive(Args)]
struct RunArgs {
    /// key=value file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// riverswim, sixarms or sparse.
    #[arg(long)]
    env: Option<String>,
    /// Comma-separated list of klucrl and ucrl2.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    /// det or bern.
    #[arg(long = "reward-mode")]
    reward_mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Overlay the reference regret bounds (reads metadata.txt beside the CSV).
    #[arg(long)]
    bounds: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Solve(args) => solve(args),
        Command::Run(args) => run(args),
        Command::Plot(args) => plot(args),
        Command::SweepDemo(args) => sweep(args),
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad number '{s}' in {}", path.display())))
        .collect()
}

fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(" ")
}

fn solve(args: SolveArgs) -> Result<()> {
    let p = read_vector(&args.p)?;
    let values = read_vector(&args.values)?;
    if p.len() != values.len() {
        bail!("p has {} entries but V has {}", p.len(), values.len());
    }
    SimplexVector::new(p.clone())?;
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        bail!("epsilon must be positive, got {}", args.epsilon);
    }
    match args.metric {
        Metric::Kl => {
            let sol = max_kl(&p, &values, args.epsilon);
            println!("q = {}", format_vector(sol.q.as_slice()));
            match sol.nu {
                Some(nu) => println!("nu = {nu:.10}"),
                None => println!("nu = none"),
            }
            println!("r = {:.10}", sol.r);
            println!("branch = {}", sol.branch);
        }
        Metric::L1 => {
            let q = max_l1(&p, &values, args.epsilon);
            println!("q = {}", format_vector(q.as_slice()));
            println!("nu = none");
            println!("r = none");
            println!("branch = l1-greedy");
        }
    }
    Ok(())
}

fn read_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let key = k.trim().replace('_', "-");
        if !["env", "algo", "horizon", "reps", "seed", "delta", "reward-mode", "out"].contains(&key.as_str()) {
            bail!("{}:{}: unknown key '{}'", path.display(), i + 1, k.trim());
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Flag value if given, else the config-file value parsed, else `None`.
fn pick<T: std::str::FromStr>(flag: Option<T>, file: &HashMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|e| anyhow::anyhow!("config key '{key}': {e}")))
        .transpose()
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => HashMap::new(),
    };
    let env_name: String = pick(args.env, &file, "env")?.context("--env is required")?;
    let env: EnvSpec = env_name.parse()?;
    let horizon: u64 = pick(args.horizon, &file, "horizon")?.context("--horizon is required")?;
    let mut config = ExperimentConfig::new(env, horizon);
    if let Some(algos) = pick::<String>(args.algo, &file, "algo")? {
        config.algorithms = algos.split(',').map(str::parse).collect::<Result<_, _>>()?;
    }
    if let Some(reps) = pick(args.reps, &file, "reps")? {
        config.replications = reps;
    }
    if let Some(seed) = pick(args.seed, &file, "seed")? {
        config.seed = seed;
    }
    if let Some(delta) = pick(args.delta, &file, "delta")? {
        config.delta = delta;
    }
    if let Some(mode) = pick::<RewardMode>(args.reward_mode.map(|m| m.parse()).transpose()?, &file, "reward-mode")? {
        config.reward_mode = mode;
    }
    let out = pick(args.out, &file, "out")?.unwrap_or_else(|| default_out_dir().join(config.env.name()));
    config.out_dir = Some(out.clone());

    log::info!(
        "running {} on {} for T={} with {} replications",
        config.algorithms.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
        config.env.name(),
        config.horizon,
        config.replications
    );
    let result = run_experiment(&config)?;
    for s in &result.summary {
        println!(
            "{}: mean final regret {:.3} (stderr {:.3}), mean episodes {:.1}",
            s.algorithm, s.mean_final_regret, s.stderr_final_regret, s.mean_episodes
        );
    }
    if config.algorithms.contains(&Algorithm::KlUcrl) && config.algorithms.contains(&Algorithm::Ucrl2) {
        let (wins, losses) = paired_wins(&result);
        let p = klucrl::harness::sign_test_p_value(wins, losses);
        println!("klucrl lower on {wins} of {} paired replications (sign test p = {p:.4})", wins + losses);
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

fn paired_wins(result: &klucrl::harness::ExperimentResult) -> (usize, usize) {
    let kl: Vec<f64> = result.for_algorithm(Algorithm::KlUcrl).map(|r| r.trace.final_regret()).collect();
    let l1: Vec<f64> = result.for_algorithm(Algorithm::Ucrl2).map(|r| r.trace.final_regret()).collect();
    let wins = kl.iter().zip(&l1).filter(|(a, b)| a < b).count();
    let losses = kl.iter().zip(&l1).filter(|(a, b)| a > b).count();
    (wins, losses)
}

fn plot(args: PlotArgs) -> Result<()> {
    let out = args
        .out
        .unwrap_or_else(|| args.input.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
    let artifacts = emit_plots(&args.input, args.bounds, &out)?;
    println!("script: {}", artifacts.script.display());
    println!("data: {}", artifacts.data.display());
    if let Some(b) = artifacts.bounds {
        println!("bounds: {}", b.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| default_out_dir().join("sweep"));
    let rows = sweep_demo(args.points);
    let path = write_sweep(&out, &rows)?;
    println!("sweep written to {}", path.display());
    Ok(())
}
