//! Flat-file outputs: the regret CSV, the per-algorithm summary and the metadata block.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{mean_stderr, AlgorithmSummary, RegretTrace};

pub const CSV_HEADER: &str = "algorithm,env,replication,t,cumulative_reward,regret";

/// Steps up to this time are all logged; later ones every [`THIN_STRIDE`] steps.
pub const THIN_FULL_UNTIL: u64 = 1_000;
pub const THIN_STRIDE: u64 = 100;

fn keep_step(t: u64, horizon: u64) -> bool {
    t <= THIN_FULL_UNTIL || t % THIN_STRIDE == 0 || t == horizon
}

/// Writes thinned traces; floats use the shortest representation that parses back exactly.
pub fn write_traces_csv<'a, W: Write>(
    mut out: W,
    env: &str,
    traces: impl IntoIterator<Item = &'a RegretTrace>,
) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for trace in traces {
        let horizon = trace.regret.len() as u64;
        for (i, (cum, reg)) in trace.cumulative_reward.iter().zip(&trace.regret).enumerate() {
            let t = i as u64 + 1;
            if keep_step(t, horizon) {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    trace.algorithm.as_str(),
                    env,
                    trace.replication,
                    t,
                    cum,
                    reg
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algorithm: String,
    pub env: String,
    pub replication: usize,
    pub t: u64,
    pub cumulative_reward: f64,
    pub regret: f64,
}

pub fn parse_csv<R: BufRead>(input: R) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line_no == 1 {
            if line.trim() != CSV_HEADER {
                return Err(Error::Parse { line: 1, msg: format!("expected header '{CSV_HEADER}'") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 6 fields, got {}", fields.len()) });
        }
        let bad = |what: &str| Error::Parse { line: line_no, msg: format!("invalid {what}") };
        rows.push(CsvRow {
            algorithm: fields[0].to_string(),
            env: fields[1].to_string(),
            replication: fields[2].parse().map_err(|_| bad("replication"))?,
            t: fields[3].parse().map_err(|_| bad("t"))?,
            cumulative_reward: fields[4].parse().map_err(|_| bad("cumulative_reward"))?,
            regret: fields[5].parse().map_err(|_| bad("regret"))?,
        });
    }
    Ok(rows)
}

/// Final-regret summary per algorithm, recomputed from parsed rows.
pub fn summarize_rows(rows: &[CsvRow]) -> Vec<AlgorithmSummary> {
    let mut finals: BTreeMap<(String, usize), (u64, f64)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !order.contains(&row.algorithm) {
            order.push(row.algorithm.clone());
        }
        let entry = finals.entry((row.algorithm.clone(), row.replication)).or_insert((0, 0.0));
        if row.t >= entry.0 {
            *entry = (row.t, row.regret);
        }
    }
    order
        .into_iter()
        .map(|algorithm| {
            let values: Vec<f64> = finals
                .iter()
                .filter(|((a, _), _)| *a == algorithm)
                .map(|(_, (_, r))| *r)
                .collect();
            let (mean, stderr) = mean_stderr(&values);
            AlgorithmSummary {
                algorithm,
                replications: values.len(),
                mean_final_regret: mean,
                stderr_final_regret: stderr,
                mean_episodes: f64::NAN,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &[AlgorithmSummary]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "algorithm,replications,mean_final_regret,stderr_final_regret,mean_episodes")?;
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.algorithm, s.replications, s.mean_final_regret, s.stderr_final_regret, s.mean_episodes
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Plain-text `key=value` block, one entry per line.
pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# experiment metadata")?;
    for (k, v) in entries {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `key=value` block; `#` starts a comment line.
pub fn parse_metadata<R: BufRead>(input: R) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected key=value".into() })?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(entries)
}
