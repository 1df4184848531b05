//! Penalized fitness for static output feedback synthesis.
//!
//! Fitness follows the maximization convention: for a feasible gain vector
//! `alpha`, `fitness = -(objective + beta * |alpha|_2)`. Feasibility is the
//! Hurwitz property of the closed-loop state matrix.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, DEFAULT_HINF_REL_TOL, DEFAULT_STABILITY_TOL};
use crate::error::{Error, Result};
use crate::model::{
    close_loop, closed_loop_state_matrix, gain_norm, unflatten_gain, PlantRealization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    HinfNorm,
    SpectralAbscissa,
}

impl ObjectiveKind {
    pub fn short_name(self) -> &'static str {
        match self {
            Self::HinfNorm => "hinf",
            Self::SpectralAbscissa => "sa",
        }
    }
}

/// How infeasible candidates are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Flat `-infeasible_penalty`.
    Strict,
    /// `-infeasible_penalty - max(0, abscissa)`, so unstable candidates are
    /// still ranked by how unstable they are.
    Guided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    pub beta: f64,
    pub infeasible_penalty: f64,
    pub penalty_mode: PenaltyMode,
    pub stability_tol: f64,
    pub hinf_rel_tol: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            beta: 1e-10,
            infeasible_penalty: 1e5,
            penalty_mode: PenaltyMode::Guided,
            stability_tol: DEFAULT_STABILITY_TOL,
            hinf_rel_tol: DEFAULT_HINF_REL_TOL,
        }
    }
}

impl FitnessConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.infeasible_penalty > 0.0) || !self.infeasible_penalty.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "infeasible_penalty must be > 0, got {}",
                self.infeasible_penalty
            )));
        }
        if !(self.stability_tol >= 0.0) {
            return Err(Error::InvalidConfig("stability_tol must be >= 0".into()));
        }
        if !(self.hinf_rel_tol > 0.0) {
            return Err(Error::InvalidConfig("hinf_rel_tol must be > 0".into()));
        }
        Ok(())
    }

    /// Fitness assigned to an infeasible candidate.
    pub fn infeasible_fitness(&self, abscissa: f64) -> f64 {
        match self.penalty_mode {
            PenaltyMode::Strict => -self.infeasible_penalty,
            PenaltyMode::Guided => {
                let excess = if abscissa.is_nan() {
                    f64::INFINITY
                } else {
                    abscissa.max(0.0)
                };
                // keep the value finite so sorting stays meaningful
                -self.infeasible_penalty - excess.min(f64::MAX / 4.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    /// Raw objective; `+inf` for infeasible H-infinity candidates.
    pub objective: f64,
    pub gain_norm: f64,
    pub feasible: bool,
}

/// True iff the closed-loop state matrix for `alpha` is Hurwitz at `tol`.
pub fn feasibility(plant: &PlantRealization, alpha: &[f64], tol: f64) -> Result<bool> {
    let a_f = closed_loop_state_matrix(plant, alpha)?;
    Ok(analysis::is_hurwitz(&a_f, tol)?.hurwitz)
}

pub fn evaluate(
    plant: &PlantRealization,
    alpha: &[f64],
    kind: ObjectiveKind,
    cfg: &FitnessConfig,
) -> Result<Evaluation> {
    let gain = unflatten_gain(alpha, &plant.dims)?;
    let norm = gain_norm(alpha);
    let cl = close_loop(plant, &gain)?;
    let stab = analysis::is_hurwitz(&cl.a_f, cfg.stability_tol)?;
    match kind {
        ObjectiveKind::SpectralAbscissa => Ok(Evaluation {
            fitness: -(stab.abscissa + cfg.beta * norm),
            objective: stab.abscissa,
            gain_norm: norm,
            feasible: stab.hurwitz,
        }),
        ObjectiveKind::HinfNorm => {
            if !stab.hurwitz {
                return Ok(Evaluation {
                    fitness: cfg.infeasible_fitness(stab.abscissa),
                    objective: f64::INFINITY,
                    gain_norm: norm,
                    feasible: false,
                });
            }
            let hinf = analysis::hinf_norm(&cl, cfg.hinf_rel_tol)?;
            Ok(Evaluation {
                fitness: -(hinf.value + cfg.beta * norm),
                objective: hinf.value,
                gain_norm: norm,
                feasible: true,
            })
        }
    }
}

/// [`evaluate`] with numerical failures mapped to an infeasible score, as
/// used inside the optimizer.
pub fn evaluate_or_penalize(
    plant: &PlantRealization,
    alpha: &[f64],
    kind: ObjectiveKind,
    cfg: &FitnessConfig,
) -> Evaluation {
    evaluate(plant, alpha, kind, cfg).unwrap_or_else(|_| Evaluation {
        fitness: -cfg.infeasible_penalty,
        objective: f64::INFINITY,
        gain_norm: gain_norm(alpha),
        feasible: false,
    })
}
