//! Elitist (1+1)-CMA-ES used to refine individual offspring.
//!
//! One parent, one offspring per iteration. The step size follows a
//! smoothed success-rate rule with target rate 2/11, and the covariance
//! only adapts after a strict improvement.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cma::enforce_spd;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalParams {
    /// Step-size damping `1 + n/2`.
    pub damping: f64,
    /// Target success rate.
    pub target_success: f64,
    /// Success-rate averaging.
    pub c_p: f64,
    /// Cumulation horizon `2 / (2 + n)`.
    pub c_cth: f64,
    /// Covariance learning rate `2 / (n^2 + 6)`.
    pub c_cov: f64,
    /// Success rate above which the path stops accumulating.
    pub threshold_success: f64,
    /// Inner iterations per call.
    pub iterations: usize,
}

impl LocalParams {
    pub fn new(n: usize, iterations: usize) -> Self {
        let nf = n as f64;
        Self {
            damping: 1.0 + nf / 2.0,
            target_success: 2.0 / 11.0,
            c_p: 1.0 / 12.0,
            c_cth: 2.0 / (2.0 + nf),
            c_cov: 2.0 / (nf * nf + 6.0),
            threshold_success: 0.44,
            iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    pub parent: DVector<f64>,
    pub parent_fitness: f64,
    pub sigma_loc: f64,
    pub cov: DMatrix<f64>,
    pub path_c: DVector<f64>,
    pub success_rate: f64,
    /// Outcome of the previous comparison.
    pub v_succ: bool,
    pub best: DVector<f64>,
    pub best_fitness: f64,
}

/// Local state around `parent`, with step size one tenth of the global one.
pub fn init_local(
    parent: DVector<f64>,
    parent_fitness: f64,
    global_sigma: f64,
    params: &LocalParams,
) -> LocalState {
    let n = parent.len();
    LocalState {
        best: parent.clone(),
        best_fitness: parent_fitness,
        parent,
        parent_fitness,
        sigma_loc: global_sigma / 10.0,
        cov: DMatrix::identity(n, n),
        path_c: DVector::zeros(n),
        success_rate: params.target_success,
        v_succ: false,
    }
}

fn cholesky_factor(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(cov.clone()).map(|c| c.l())
}

/// Offspring `parent + sigma_loc * L xi` with `cov = L L^T`; returns the
/// offspring and the perturbation `L xi`. A failed factorization repairs the
/// covariance in place and retries once.
pub fn sample_offspring_with(
    state: &mut LocalState,
    xi: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let l = match cholesky_factor(&state.cov) {
        Some(l) => l,
        None => {
            state.cov = enforce_spd(&state.cov)?;
            cholesky_factor(&state.cov).ok_or(Error::EigenFailure(state.cov.nrows()))?
        }
    };
    let eps = l * xi;
    let offspring = &state.parent + &eps * state.sigma_loc;
    Ok((offspring, eps))
}

pub fn sample_offspring<R: Rng>(
    state: &mut LocalState,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = state.parent.len();
    let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    sample_offspring_with(state, &xi)
}

/// Success-rate smoothing followed by the step-size rule.
pub fn update_success_and_sigma(state: &mut LocalState, params: &LocalParams) {
    let v = if state.v_succ { 1.0 } else { 0.0 };
    state.success_rate = (1.0 - params.c_p) * state.success_rate + params.c_p * v;
    let ps = state.success_rate;
    let pt = params.target_success;
    state.sigma_loc *= ((ps - pt / (1.0 - pt) * (1.0 - ps)) / params.damping).exp();
}

/// Elitist acceptance. Only a strict improvement replaces the parent and
/// adapts the path and covariance.
pub fn accept_and_adapt(
    state: &mut LocalState,
    offspring: DVector<f64>,
    offspring_fitness: f64,
    eps: &DVector<f64>,
    params: &LocalParams,
) -> Result<()> {
    if !(offspring_fitness > state.parent_fitness) {
        state.v_succ = false;
        return Ok(());
    }
    state.parent = offspring;
    state.parent_fitness = offspring_fitness;
    if offspring_fitness > state.best_fitness {
        state.best = state.parent.clone();
        state.best_fitness = offspring_fitness;
    }
    let c = params.c_cth;
    let a = params.c_cov;
    if state.success_rate < params.threshold_success {
        state.path_c = &state.path_c * (1.0 - c) + eps * (c * (2.0 - c)).sqrt();
        state.cov = &state.cov * (1.0 - a) + (&state.path_c * state.path_c.transpose()) * a;
    } else {
        state.path_c *= 1.0 - c;
        state.cov = &state.cov * (1.0 - a)
            + (&state.path_c * state.path_c.transpose() + &state.cov * (c * (2.0 - c))) * a;
    }
    state.cov = enforce_spd(&state.cov)?;
    state.v_succ = true;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub alpha: DVector<f64>,
    pub fitness: f64,
    /// Fitness evaluations consumed (always `params.iterations`).
    pub evaluations: usize,
    /// Best fitness after each inner iteration.
    pub trace: Vec<f64>,
}

/// Runs `params.iterations` inner iterations from `(alpha, fitness)`.
/// Non-finite fitness values count as failed offspring.
pub fn run_local<F, R>(
    alpha: DVector<f64>,
    fitness: f64,
    global_sigma: f64,
    params: &LocalParams,
    fitness_fn: F,
    rng: &mut R,
) -> Result<LocalOutcome>
where
    F: Fn(&[f64]) -> f64,
    R: Rng,
{
    let mut state = init_local(alpha, fitness, global_sigma, params);
    let mut trace = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let (offspring, eps) = sample_offspring(&mut state, rng)?;
        update_success_and_sigma(&mut state, params);
        let f = fitness_fn(offspring.as_slice());
        let f = if f.is_nan() { f64::NEG_INFINITY } else { f };
        accept_and_adapt(&mut state, offspring, f, &eps, params)?;
        trace.push(state.best_fitness);
    }
    Ok(LocalOutcome {
        alpha: state.best,
        fitness: state.best_fitness,
        evaluations: params.iterations,
        trace,
    })
}
