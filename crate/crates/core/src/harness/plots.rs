//! Gnuplot scripts and data files for regret curves and the solver sweep.

use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::klopt::{max_kl, max_l1, Branch};

use super::bounds::regret_bound_curves;
use super::output::{parse_csv, parse_metadata};
use super::mean_stderr;

/// Files written by [`emit_plots`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotArtifacts {
    pub script: PathBuf,
    pub data: PathBuf,
    pub bounds: Option<PathBuf>,
}

fn metadata_value<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn required<T: std::str::FromStr>(entries: &[(String, String)], key: &str) -> Result<T> {
    metadata_value(entries, key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Domain(format!("metadata lacks a usable '{key}' entry")))
}

/// Reads the regret CSV and writes `regret.dat` (mean and standard error per algorithm at
/// each logged time) plus `regret.gp`. With `bounds`, the reference curves are evaluated
/// from `metadata.txt` next to the CSV and written to `bounds.dat`.
pub fn emit_plots(csv_path: &Path, bounds: bool, out_dir: &Path) -> Result<PlotArtifacts> {
    let rows = parse_csv(BufReader::new(std::fs::File::open(csv_path)?))?;
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    let mut algorithms: Vec<String> = Vec::new();
    // t -> algorithm -> regrets over replications
    let mut grid: BTreeMap<u64, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for row in &rows {
        if !algorithms.contains(&row.algorithm) {
            algorithms.push(row.algorithm.clone());
        }
        grid.entry(row.t).or_default().entry(row.algorithm.clone()).or_default().push(row.regret);
    }
    let env = rows[0].env.clone();

    std::fs::create_dir_all(out_dir)?;
    let data = out_dir.join("regret.dat");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&data)?);
    write!(out, "# t")?;
    for a in &algorithms {
        write!(out, " {a}_mean {a}_stderr")?;
    }
    writeln!(out)?;
    for (t, per_algo) in &grid {
        write!(out, "{t}")?;
        for a in &algorithms {
            let (m, s) = per_algo.get(a).map_or((f64::NAN, f64::NAN), |v| mean_stderr(v));
            write!(out, " {m} {s}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;

    let bounds_path = if bounds {
        let meta_path = csv_path.with_file_name("metadata.txt");
        let meta = parse_metadata(BufReader::new(std::fs::File::open(&meta_path).map_err(|e| {
            Error::Io(format!("bounds need {}: {e}", meta_path.display()))
        })?))?;
        let n_states: usize = required(&meta, "n_states")?;
        let n_actions: usize = required(&meta, "n_actions")?;
        let diameter: f64 = required(&meta, "diameter")?;
        let delta: f64 = required(&meta, "delta")?;
        let gap: Option<f64> = metadata_value(&meta, "gap").and_then(|v| v.parse().ok());
        let times: Vec<f64> = grid.keys().filter(|&&t| t > 5).map(|&t| t as f64).collect();
        let curves = regret_bound_curves(n_states, n_actions, diameter, delta, &times, gap);
        let path = out_dir.join("bounds.dat");
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "# t high_probability{}", if curves.logarithmic.is_some() { " logarithmic" } else { "" })?;
        for (i, t) in times.iter().enumerate() {
            write!(out, "{t} {}", curves.high_probability[i])?;
            if let Some(t2) = &curves.logarithmic {
                write!(out, " {}", t2[i])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Some((path, curves.logarithmic.is_some()))
    } else {
        None
    };

    let script = out_dir.join("regret.gp");
    let mut gp = std::io::BufWriter::new(std::fs::File::create(&script)?);
    writeln!(gp, "set terminal pngcairo size 900,600")?;
    writeln!(gp, "set output 'regret.png'")?;
    writeln!(gp, "set title 'Regret on {env}'")?;
    writeln!(gp, "set xlabel 'time step'")?;
    writeln!(gp, "set ylabel 'regret'")?;
    writeln!(gp, "set key left top")?;
    let mut parts = Vec::new();
    for (i, a) in algorithms.iter().enumerate() {
        let mean_col = 2 + 2 * i;
        let err_col = mean_col + 1;
        parts.push(format!(
            "'regret.dat' using 1:(${mean_col}-${err_col}):(${mean_col}+${err_col}) with filledcurves fs transparent solid 0.2 lc {} notitle",
            i + 1
        ));
        parts.push(format!("'regret.dat' using 1:{mean_col} with lines lw 2 lc {} title '{a}'", i + 1));
    }
    if let Some((_, has_t2)) = &bounds_path {
        parts.push("'bounds.dat' using 1:2 with lines dt 2 lc rgb 'black' title 'high-probability bound'".into());
        if *has_t2 {
            parts.push("'bounds.dat' using 1:3 with lines dt 3 lc rgb 'gray' title 'logarithmic bound'".into());
        }
    }
    writeln!(gp, "plot {}", parts.join(", \\\n     "))?;
    gp.flush()?;

    Ok(PlotArtifacts { script, data, bounds: bounds_path.map(|(p, _)| p) })
}

/// One point of the solver sweep over `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub kl: Vec<f64>,
    pub kl_branch: Branch,
    /// The L¹ solution at the Pinsker-matched radius `sqrt(2 epsilon)`.
    pub l1: Vec<f64>,
}

pub const SWEEP_P: [f64; 3] = [0.3, 0.7, 0.0];
pub const SWEEP_V: [f64; 3] = [1.0, 2.0, 3.0];

/// Solves both problems on the fixed three-state instance for `points` values of epsilon,
/// log-spaced from 1/2 down to 1/500.
pub fn sweep_demo(points: usize) -> Vec<SweepRow> {
    let (hi, lo): (f64, f64) = (0.5, 1.0 / 500.0);
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            let epsilon = (hi.ln() + frac * (lo.ln() - hi.ln())).exp();
            let kl = max_kl(&SWEEP_P, &SWEEP_V, epsilon);
            let l1 = max_l1(&SWEEP_P, &SWEEP_V, (2.0 * epsilon).sqrt());
            SweepRow { epsilon, kl: kl.q.into_inner(), kl_branch: kl.branch, l1: l1.into_inner() }
        })
        .collect()
}

/// Writes `sweep.csv` and a matching `sweep.gp` into `out_dir`; returns the CSV path.
pub fn write_sweep(out_dir: &Path, rows: &[SweepRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("sweep.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "epsilon,kl_q1,kl_q2,kl_q3,kl_branch,l1_q1,l1_q2,l1_q3")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.epsilon, r.kl[0], r.kl[1], r.kl[2], r.kl_branch, r.l1[0], r.l1[1], r.l1[2]
        )?;
    }
    out.flush()?;

    let mut gp = std::io::BufWriter::new(std::fs::File::create(out_dir.join("sweep.gp"))?);
    writeln!(gp, "set terminal pngcairo size 1200,450")?;
    writeln!(gp, "set output 'sweep.png'")?;
    writeln!(gp, "set datafile separator ','")?;
    writeln!(gp, "set logscale x")?;
    writeln!(gp, "set xrange [*:*] reverse")?;
    writeln!(gp, "set xlabel 'epsilon'")?;
    writeln!(gp, "set multiplot layout 1,2")?;
    writeln!(gp, "set title 'KL ball'")?;
    writeln!(
        gp,
        "plot for [i=2:4] 'sweep.csv' using 1:i skip 1 with linespoints title sprintf('q%d', i-1)"
    )?;
    writeln!(gp, "set title 'L1 ball, radius sqrt(2 epsilon)'")?;
    writeln!(
        gp,
        "plot for [i=6:8] 'sweep.csv' using 1:i skip 1 with linespoints title sprintf('q%d', i-5)"
    )?;
    writeln!(gp, "unset multiplot")?;
    gp.flush()?;
    Ok(path)
}
