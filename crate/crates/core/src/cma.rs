//! Global (mu/mu_w, lambda)-CMA-ES engine.
//!
//! The engine maximizes. Callers sample a population with
//! [`sample_population`], score it, sort it by fitness (descending) and
//! hand the top `mu` candidates to [`CmaState::tell`], which applies the
//! mean, evolution-path, covariance and step-size updates in that order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

/// Strategy parameters derived from the problem dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub n: usize,
    /// Population size (lambda).
    pub population: usize,
    /// Parent count.
    pub mu: usize,
    /// Recombination weights, positive, decreasing, summing to one.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub d_sigma: f64,
    /// Approximation of E|N(0, I)|.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Threshold on the normalized step-size path length used by `h_sigma`.
    pub fn h_sigma_threshold(&self) -> f64 {
        (1.4 + 2.0 / (self.n as f64 + 1.0)) * self.chi_n
    }
}

/// Default strategy parameters for dimension `n`.
pub fn default_params(n: usize) -> Result<CmaParams> {
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let nf = n as f64;
    let population = 4 + (3.0 * nf.ln()).floor() as usize;
    let mu = population / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| ((population as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu =
        (1.0 - c_1).min((0.5 + 2.0 * mu_eff + 2.0 / mu_eff - 4.0) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    Ok(CmaParams {
        n,
        population,
        mu,
        weights,
        mu_eff,
        c_sigma,
        c_c,
        c_1,
        c_mu,
        d_sigma,
        chi_n,
    })
}

/// Mutable search state of the global engine.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub path_sigma: DVector<f64>,
    pub path_cov: DVector<f64>,
    /// Completed covariance updates.
    pub generation: u64,
    /// Orthonormal eigenvectors of `cov` (columns).
    pub basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of `cov`.
    pub scales: DVector<f64>,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma: f64) -> Self {
        let n = mean.len();
        Self {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_cov: DVector::zeros(n),
            generation: 0,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_finite(&self) -> bool {
        self.sigma.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && self.cov.iter().all(|v| v.is_finite())
            && self.path_sigma.iter().all(|v| v.is_finite())
            && self.path_cov.iter().all(|v| v.is_finite())
    }

    fn factor_is_valid(&self) -> bool {
        self.scales.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.basis.iter().all(|v| v.is_finite())
    }

    /// Recomputes `basis` and `scales` from `cov`.
    pub fn refresh_eigen(&mut self) -> Result<()> {
        let n = self.dim();
        let eig = SymmetricEigen::try_new(self.cov.clone(), f64::EPSILON, 1000 * n.max(10))
            .ok_or(Error::EigenFailure(n))?;
        let floor = spd_floor(&eig.eigenvalues);
        self.scales = eig.eigenvalues.map(|l| l.max(floor).sqrt());
        self.basis = eig.eigenvectors;
        if !self.factor_is_valid() {
            return Err(Error::EigenFailure(n));
        }
        Ok(())
    }

    /// `cov^{-1/2} = B D^{-1} B^T`.
    pub fn inv_sqrt_cov(&self) -> DMatrix<f64> {
        let inv = DMatrix::from_diagonal(&self.scales.map(|s| 1.0 / s));
        &self.basis * inv * self.basis.transpose()
    }

    /// Applies one full generation update from the fitness-sorted parents
    /// (best first, exactly `mu` of them).
    pub fn tell(&mut self, selected: &[DVector<f64>], params: &CmaParams) -> Result<()> {
        let old_mean = self.mean.clone();
        let new_mean = update_mean(selected, params);
        let paths = update_paths(self, &new_mean, params);
        let cov = update_covariance(
            self,
            selected,
            &old_mean,
            &paths.path_cov,
            paths.h_sigma,
            params,
        )?;
        let sigma = update_step_size(self.sigma, paths.path_sigma.norm(), params);
        self.mean = new_mean;
        self.path_sigma = paths.path_sigma;
        self.path_cov = paths.path_cov;
        self.cov = cov;
        self.sigma = sigma;
        self.generation += 1;
        if self.is_finite() {
            self.refresh_eigen()?;
        }
        Ok(())
    }
}

/// `m + sigma * B D xi`.
pub fn sample_candidate(state: &CmaState, xi: &DVector<f64>) -> DVector<f64> {
    let scaled = state.scales.component_mul(xi);
    &state.mean + (&state.basis * scaled) * state.sigma
}

/// Draws the population for the current generation. Candidate `i` uses its
/// own substream keyed by `(master_seed, generation, i)`.
pub fn sample_population(
    state: &mut CmaState,
    params: &CmaParams,
    master_seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if !state.factor_is_valid() {
        state.cov = enforce_spd(&state.cov)?;
        state.refresh_eigen()?;
    }
    let n = state.dim();
    Ok((0..params.population)
        .map(|i| {
            let mut rng = substream(
                master_seed,
                state.generation,
                i as u64,
                Purpose::GlobalSample,
            );
            let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            sample_candidate(state, &xi)
        })
        .collect())
}

/// Weighted recombination of the top `mu` candidates.
pub fn update_mean(selected: &[DVector<f64>], params: &CmaParams) -> DVector<f64> {
    assert_eq!(
        selected.len(),
        params.mu,
        "update_mean needs exactly mu candidates"
    );
    let mut mean = DVector::zeros(params.n);
    for (w, x) in params.weights.iter().zip(selected) {
        mean.axpy(*w, x, 1.0);
    }
    mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathUpdate {
    pub path_sigma: DVector<f64>,
    pub path_cov: DVector<f64>,
    pub h_sigma: bool,
}

pub fn update_paths(state: &CmaState, new_mean: &DVector<f64>, params: &CmaParams) -> PathUpdate {
    let shift = (new_mean - &state.mean) / state.sigma;
    let whitened = state.inv_sqrt_cov() * &shift;
    let cs = params.c_sigma;
    let path_sigma =
        &state.path_sigma * (1.0 - cs) + whitened * (cs * (2.0 - cs) * params.mu_eff).sqrt();

    let g = state.generation as f64;
    let correction = (1.0 - (1.0 - cs).powf(2.0 * (g + 1.0))).sqrt();
    let h_sigma = path_sigma.norm() / correction < params.h_sigma_threshold();

    let cc = params.c_c;
    let h = if h_sigma { 1.0 } else { 0.0 };
    let path_cov =
        &state.path_cov * (1.0 - cc) + shift * (h * (cc * (2.0 - cc) * params.mu_eff).sqrt());
    PathUpdate {
        path_sigma,
        path_cov,
        h_sigma,
    }
}

/// Rank-one plus rank-mu covariance update, followed by symmetrization and
/// SPD repair.
pub fn update_covariance(
    state: &CmaState,
    selected: &[DVector<f64>],
    old_mean: &DVector<f64>,
    path_cov: &DVector<f64>,
    h_sigma: bool,
    params: &CmaParams,
) -> Result<DMatrix<f64>> {
    let (c1, cmu, cc) = (params.c_1, params.c_mu, params.c_c);
    let h = if h_sigma { 1.0 } else { 0.0 };
    let decay = 1.0 - c1 - cmu * params.weight_sum();
    let mut cov = &state.cov * decay;
    cov += (path_cov * path_cov.transpose() + &state.cov * ((1.0 - h) * cc * (2.0 - cc))) * c1;
    for (w, x) in params.weights.iter().zip(selected) {
        let y = (x - old_mean) / state.sigma;
        cov.ger(cmu * w, &y, &y, 1.0);
    }
    enforce_spd(&cov)
}

/// `sigma * exp((c_sigma / d_sigma) * (|p_sigma| / chi_n - 1))`.
pub fn update_step_size(sigma: f64, path_sigma_norm: f64, params: &CmaParams) -> f64 {
    sigma * ((params.c_sigma / params.d_sigma) * (path_sigma_norm / params.chi_n - 1.0)).exp()
}

/// Relative eigenvalue floor used by the SPD repair.
pub const SPD_FLOOR_REL: f64 = 1e-12;

fn spd_floor(eigenvalues: &DVector<f64>) -> f64 {
    SPD_FLOOR_REL * eigenvalues.max().max(1.0)
}

/// Symmetrizes and clamps eigenvalues below `1e-12 * max(lambda_max, 1)` up
/// to that floor. A symmetric input that already satisfies the floor is
/// returned as its symmetric part, without reconstruction.
pub fn enforce_spd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure(n));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenFailure(n))?;
    let floor = spd_floor(&eig.eigenvalues);
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// Bounds that trigger a restart of the search distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResetLimits {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Step size restored on reset.
    pub sigma_reset: f64,
}

impl Default for ResetLimits {
    fn default() -> Self {
        Self {
            sigma_max: 1e7,
            sigma_min: 1e-12,
            sigma_reset: 0.3,
        }
    }
}

/// Resets step size, covariance and both paths when the step size leaves
/// `[sigma_min, sigma_max]` or any state entry is non-finite. The mean moves
/// to `best` and the generation counter is kept. Returns whether a reset
/// happened.
pub fn maybe_reset(state: &mut CmaState, limits: &ResetLimits, best: &DVector<f64>) -> bool {
    let healthy = state.is_finite()
        && state.factor_is_valid()
        && state.sigma <= limits.sigma_max
        && state.sigma >= limits.sigma_min;
    if healthy {
        return false;
    }
    let n = state.dim();
    let mean = if best.iter().all(|v| v.is_finite()) {
        best.clone()
    } else if state.mean.iter().all(|v| v.is_finite()) {
        state.mean.clone()
    } else {
        DVector::zeros(n)
    };
    let generation = state.generation;
    *state = CmaState::new(mean, limits.sigma_reset);
    state.generation = generation;
    true
}
