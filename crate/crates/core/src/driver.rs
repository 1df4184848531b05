//! Memetic CMA-ES generation loop.
//!
//! Each generation samples `p` offspring, scores them, refines each one with
//! the (1+1) local search, sorts the refined population, and feeds the top
//! `mu` back into the global state update. Candidate scoring and refinement
//! run in parallel on the current rayon pool; every random draw comes from
//! a substream keyed by `(seed, generation, candidate)`, so results are
//! identical for any thread count.

use std::cell::Cell;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cma::{default_params, maybe_reset, sample_population, CmaState, ResetLimits};
use crate::error::{Error, Result};
use crate::io::float_sentinel;
use crate::local::{run_local, LocalParams};
use crate::model::PlantRealization;
use crate::objectives::{evaluate_or_penalize, FitnessConfig, ObjectiveKind};
use crate::rng::{substream, Purpose};

/// Which evaluations count against `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `t_max` bounds global samples; local evaluations are reported separately.
    GlobalOnly,
    /// `t_max` bounds global plus local evaluations.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub objective: ObjectiveKind,
    pub t_max: usize,
    /// Local-search iterations per refined offspring.
    pub t_s: usize,
    pub fitness: FitnessConfig,
    pub seed: u64,
    /// Starting mean; the zero gain when `None`.
    pub initial_mean: Option<Vec<f64>>,
    pub sigma0: f64,
    pub local_search_enabled: bool,
    /// Refine only the best `k` offspring (by unrefined fitness).
    pub refine_top: Option<usize>,
    pub budget_mode: BudgetMode,
    pub reset: ResetLimits,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::HinfNorm,
            t_max: 10_000,
            t_s: 10,
            fitness: FitnessConfig::default(),
            seed: 0,
            initial_mean: None,
            sigma0: 0.3,
            local_search_enabled: true,
            refine_top: None,
            budget_mode: BudgetMode::GlobalOnly,
            reset: ResetLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Cumulative fitness evaluations (global plus local).
    pub evaluations: usize,
    /// Best fitness seen so far.
    #[serde(with = "float_sentinel")]
    pub best_fitness: f64,
    /// Step size after this generation's update.
    pub sigma: f64,
    /// Fraction of this generation's (refined) offspring that are feasible.
    pub feasible_fraction: f64,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_alpha: Vec<f64>,
    #[serde(with = "float_sentinel")]
    pub best_fitness: f64,
    #[serde(with = "float_sentinel")]
    pub best_objective: f64,
    pub feasible: bool,
    pub global_evals: usize,
    pub local_evals: usize,
    pub generations: usize,
    pub history: Vec<GenerationRecord>,
    pub wall_time: f64,
}

impl RunResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub fitness: f64,
    pub feasible: bool,
}

fn rank_key(f: f64) -> f64 {
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

impl SolverConfig {
    fn validate(&self, n: usize, population: usize) -> Result<()> {
        self.fitness.check()?;
        if self.t_max < population {
            return Err(Error::InvalidConfig(format!(
                "t_max ({}) must be at least the population size ({population})",
                self.t_max
            )));
        }
        if self.local_search_enabled && self.t_s == 0 {
            return Err(Error::InvalidConfig(
                "t_s must be positive when local search is enabled".into(),
            ));
        }
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if let Some(m) = &self.initial_mean {
            if m.len() != n {
                return Err(Error::DecisionLength {
                    expected: n,
                    found: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("initial mean must be finite".into()));
            }
        }
        if self.refine_top == Some(0) {
            return Err(Error::InvalidConfig("refine_top must be positive".into()));
        }
        let r = &self.reset;
        if !(r.sigma_min > 0.0 && r.sigma_min < r.sigma_max && r.sigma_reset > 0.0) {
            return Err(Error::InvalidConfig(
                "reset limits must satisfy 0 < sigma_min < sigma_max".into(),
            ));
        }
        Ok(())
    }

    fn refined_per_generation(&self, population: usize) -> usize {
        if self.local_search_enabled {
            self.refine_top.map_or(population, |k| k.min(population))
        } else {
            0
        }
    }
}

pub type Progress<'a> = &'a mut dyn FnMut(&GenerationRecord);

/// Optimizes an arbitrary fitness function (maximization) over `R^n`.
pub fn solve_raw<F>(fitness_fn: F, n: usize, config: &SolverConfig) -> Result<RunResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    solve_raw_with_progress(fitness_fn, n, config, &mut |_| {})
}

pub fn solve_raw_with_progress<F>(
    fitness_fn: F,
    n: usize,
    config: &SolverConfig,
    progress: Progress<'_>,
) -> Result<RunResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let scored = |x: &[f64]| Scored {
        fitness: fitness_fn(x),
        feasible: true,
    };
    let mut result = run(&scored, n, config, progress)?;
    result.best_objective = -result.best_fitness;
    result.feasible = true;
    Ok(result)
}

/// Synthesizes a static output feedback gain for `plant`.
pub fn solve(plant: &PlantRealization, config: &SolverConfig) -> Result<RunResult> {
    solve_with_progress(plant, config, &mut |_| {})
}

pub fn solve_with_progress(
    plant: &PlantRealization,
    config: &SolverConfig,
    progress: Progress<'_>,
) -> Result<RunResult> {
    let n = plant.dims.decision_len();
    let kind = config.objective;
    let cfg = config.fitness;
    let scored = |x: &[f64]| {
        let e = evaluate_or_penalize(plant, x, kind, &cfg);
        Scored {
            fitness: e.fitness,
            feasible: e.feasible,
        }
    };
    let mut result = run(&scored, n, config, progress)?;
    let best = evaluate_or_penalize(plant, &result.best_alpha, kind, &cfg);
    result.best_objective = best.objective;
    result.feasible = best.feasible;
    Ok(result)
}

struct Candidate {
    x: DVector<f64>,
    score: Scored,
}

fn run<E>(eval: &E, n: usize, config: &SolverConfig, progress: Progress<'_>) -> Result<RunResult>
where
    E: Fn(&[f64]) -> Scored + Sync,
{
    let started = Instant::now();
    let params = default_params(n)?;
    config.validate(n, params.population)?;
    let p = params.population;
    let refined_count = config.refined_per_generation(p);
    let local_params = LocalParams::new(n, config.t_s);
    let generation_cost = match config.budget_mode {
        BudgetMode::GlobalOnly => p,
        BudgetMode::Shared => p + refined_count * config.t_s,
    };
    if generation_cost > config.t_max {
        return Err(Error::InvalidConfig(format!(
            "t_max ({}) is below the cost of one generation ({generation_cost})",
            config.t_max
        )));
    }

    let mean = config
        .initial_mean
        .as_ref()
        .map_or_else(|| DVector::zeros(n), |m| DVector::from_column_slice(m));
    let mut state = CmaState::new(mean.clone(), config.sigma0);
    let mut best_alpha = mean;
    let mut best_fitness = f64::NEG_INFINITY;
    let mut global_evals = 0usize;
    let mut local_evals = 0usize;
    let mut history = Vec::new();

    loop {
        let spent = match config.budget_mode {
            BudgetMode::GlobalOnly => global_evals,
            BudgetMode::Shared => global_evals + local_evals,
        };
        if spent + generation_cost > config.t_max {
            break;
        }
        let generation = state.generation;

        let samples = sample_population(&mut state, &params, config.seed)?;
        let mut population: Vec<Candidate> = samples
            .into_par_iter()
            .map(|x| {
                let score = eval(x.as_slice());
                Candidate { x, score }
            })
            .collect();
        global_evals += p;

        if refined_count > 0 {
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&i, &j| {
                rank_key(population[j].score.fitness)
                    .total_cmp(&rank_key(population[i].score.fitness))
            });
            let mut chosen = vec![false; p];
            for &i in order.iter().take(refined_count) {
                chosen[i] = true;
            }
            let sigma = state.sigma;
            population = population
                .into_par_iter()
                .enumerate()
                .map(|(i, cand)| {
                    if chosen[i] {
                        refine(cand, i, generation, sigma, &local_params, eval, config.seed)
                    } else {
                        cand
                    }
                })
                .collect();
            local_evals += refined_count * config.t_s;
        }

        // stable: ties keep candidate index order
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| {
            rank_key(population[j].score.fitness).total_cmp(&rank_key(population[i].score.fitness))
        });

        let top = &population[order[0]];
        if rank_key(top.score.fitness) > best_fitness || history.is_empty() {
            best_fitness = rank_key(top.score.fitness);
            best_alpha = top.x.clone();
        }
        let feasible_fraction =
            population.iter().filter(|c| c.score.feasible).count() as f64 / p as f64;

        let selected: Vec<DVector<f64>> = order[..params.mu]
            .iter()
            .map(|&i| population[i].x.clone())
            .collect();
        if state.tell(&selected, &params).is_err() {
            // a failed eigen refresh leaves a state that must be reset
            state.sigma = f64::NAN;
        }
        let reset = maybe_reset(&mut state, &config.reset, &best_alpha);

        let record = GenerationRecord {
            generation,
            evaluations: global_evals + local_evals,
            best_fitness,
            sigma: state.sigma,
            feasible_fraction,
            reset,
        };
        progress(&record);
        history.push(record);
    }

    Ok(RunResult {
        best_alpha: best_alpha.as_slice().to_vec(),
        best_fitness,
        best_objective: f64::NAN,
        feasible: false,
        global_evals,
        local_evals,
        generations: history.len(),
        history,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn refine<E>(
    cand: Candidate,
    index: usize,
    generation: u64,
    sigma: f64,
    params: &LocalParams,
    eval: &E,
    seed: u64,
) -> Candidate
where
    E: Fn(&[f64]) -> Scored + Sync,
{
    let mut rng = substream(seed, generation, index as u64, Purpose::LocalSearch);
    // tracks the feasibility flag of the running local best
    let best = Cell::new((rank_key(cand.score.fitness), cand.score.feasible));
    let fitness_fn = |x: &[f64]| {
        let s = eval(x);
        let f = rank_key(s.fitness);
        if f > best.get().0 {
            best.set((f, s.feasible));
        }
        f
    };
    match run_local(
        cand.x.clone(),
        rank_key(cand.score.fitness),
        sigma,
        params,
        fitness_fn,
        &mut rng,
    ) {
        Ok(out) => {
            let (_, feasible) = best.get();
            Candidate {
                x: out.alpha,
                score: Scored {
                    fitness: out.fitness,
                    feasible,
                },
            }
        }
        Err(_) => cand,
    }
}
