//! Multi-seed campaigns over one or more problem files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sofcma::io::{float_sentinel, format_f64, load_problem};
use sofcma::{gain_norm, solve, PlantRealization, SolverConfig};

use crate::stats::Summary;

pub const RUNS_HEADER: [&str; 10] = [
    "problem",
    "run",
    "seed",
    "status",
    "feasible",
    "objective",
    "fitness",
    "gain_norm",
    "global_evals",
    "local_evals",
];
pub const SUMMARY_HEADER: [&str; 10] = [
    "problem",
    "runs",
    "successes",
    "best",
    "q1",
    "median",
    "q3",
    "worst",
    "mean",
    "std",
];
pub const TIMING_HEADER: [&str; 4] = ["problem", "runs", "total_wall_time", "mean_wall_time"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub problems: Vec<PathBuf>,
    pub runs: usize,
    pub base_seed: u64,
    /// Base solver configuration; the seed is overridden per run.
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub problem: String,
    pub run: usize,
    pub seed: u64,
    /// `ok`, or `error` when the problem or the solver failed.
    pub status: String,
    pub feasible: bool,
    #[serde(with = "float_sentinel")]
    pub objective: f64,
    #[serde(with = "float_sentinel")]
    pub fitness: f64,
    #[serde(with = "float_sentinel")]
    pub gain_norm: f64,
    pub global_evals: usize,
    pub local_evals: usize,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub problem: String,
    pub runs: usize,
    pub total_wall_time: f64,
    pub mean_wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<Summary>,
    pub timings: Vec<Timing>,
    /// Diagnostics for problems or runs that failed.
    pub errors: Vec<String>,
}

fn problem_label(path: &Path, plant: Option<&PlantRealization>) -> String {
    match plant {
        Some(p) if !p.name.is_empty() => p.name.clone(),
        _ => path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        ),
    }
}

fn failed_row(problem: &str, run: usize, seed: u64) -> RunRow {
    RunRow {
        problem: problem.to_string(),
        run,
        seed,
        status: "error".into(),
        feasible: false,
        objective: f64::INFINITY,
        fitness: f64::NEG_INFINITY,
        gain_norm: f64::INFINITY,
        global_evals: 0,
        local_evals: 0,
        wall_time: 0.0,
    }
}

/// Runs every (problem, run) pair, in parallel on the current rayon pool.
/// Run `i` uses seed `base_seed + i`. Rows come back in problem order, then
/// run order, whatever the scheduling.
pub fn run_campaign(spec: &CampaignSpec) -> Campaign {
    let mut errors = Vec::new();
    let plants: Vec<(String, Option<PlantRealization>)> = spec
        .problems
        .iter()
        .map(|path| match load_problem(path) {
            Ok(p) => (problem_label(path, Some(&p)), Some(p)),
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                (problem_label(path, None), None)
            }
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..plants.len())
        .flat_map(|p| (0..spec.runs).map(move |r| (p, r)))
        .collect();
    let results: Vec<(RunRow, Option<String>)> = jobs
        .par_iter()
        .map(|&(p, run)| {
            let (label, plant) = &plants[p];
            let seed = spec.base_seed.wrapping_add(run as u64);
            let Some(plant) = plant else {
                return (failed_row(label, run, seed), None);
            };
            let config = SolverConfig {
                seed,
                ..spec.config.clone()
            };
            match solve(plant, &config) {
                Ok(r) => (
                    RunRow {
                        problem: label.clone(),
                        run,
                        seed,
                        status: "ok".into(),
                        feasible: r.feasible,
                        objective: r.best_objective,
                        fitness: r.best_fitness,
                        gain_norm: gain_norm(&r.best_alpha),
                        global_evals: r.global_evals,
                        local_evals: r.local_evals,
                        wall_time: r.wall_time,
                    },
                    None,
                ),
                Err(e) => (
                    failed_row(label, run, seed),
                    Some(format!("{label} run {run}: {e}")),
                ),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    for (row, err) in results {
        errors.extend(err);
        rows.push(row);
    }

    let mut summaries = Vec::new();
    let mut timings = Vec::new();
    for (p, (label, _)) in plants.iter().enumerate() {
        let mine: Vec<&RunRow> = rows[p * spec.runs..(p + 1) * spec.runs].iter().collect();
        let objectives: Vec<f64> = mine
            .iter()
            .filter(|r| r.feasible)
            .map(|r| r.objective)
            .collect();
        summaries.push(Summary::from_objectives(label, spec.runs, &objectives));
        let total: f64 = mine.iter().map(|r| r.wall_time).sum();
        timings.push(Timing {
            problem: label.clone(),
            runs: spec.runs,
            total_wall_time: total,
            mean_wall_time: total / spec.runs as f64,
        });
    }
    Campaign {
        rows,
        summaries,
        timings,
        errors,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> WriteError {
    WriteError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    records: Vec<Vec<String>>,
) -> Result<(), WriteError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for r in records {
        w.write_record(&r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WriteError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Writes `runs`, `summary` and `timing` files into `dir`. The first two
/// are a pure function of the campaign spec; wall times live only in the
/// timing file. Returns the paths written.
pub fn write_campaign(
    campaign: &Campaign,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, WriteError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let paths = ["runs", "summary", "timing"].map(|stem| dir.join(format!("{stem}.{ext}")));
    match format {
        Format::Csv => {
            let runs = campaign
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.problem.clone(),
                        r.run.to_string(),
                        r.seed.to_string(),
                        r.status.clone(),
                        r.feasible.to_string(),
                        format_f64(r.objective),
                        format_f64(r.fitness),
                        format_f64(r.gain_norm),
                        r.global_evals.to_string(),
                        r.local_evals.to_string(),
                    ]
                })
                .collect();
            write_csv(&paths[0], RUNS_HEADER, runs)?;
            let summary = campaign
                .summaries
                .iter()
                .map(|s| {
                    let mut rec = vec![
                        s.problem.clone(),
                        s.runs.to_string(),
                        s.successes.to_string(),
                    ];
                    rec.extend(
                        [s.best, s.q1, s.median, s.q3, s.worst, s.mean, s.std].map(format_f64),
                    );
                    rec
                })
                .collect();
            write_csv(&paths[1], SUMMARY_HEADER, summary)?;
            let timing = campaign
                .timings
                .iter()
                .map(|t| {
                    vec![
                        t.problem.clone(),
                        t.runs.to_string(),
                        format_f64(t.total_wall_time),
                        format_f64(t.mean_wall_time),
                    ]
                })
                .collect();
            write_csv(&paths[2], TIMING_HEADER, timing)?;
        }
        Format::Json => {
            write_json(&paths[0], &campaign.rows)?;
            write_json(&paths[1], &campaign.summaries)?;
            write_json(&paths[2], &campaign.timings)?;
        }
    }
    Ok(paths.to_vec())
}
