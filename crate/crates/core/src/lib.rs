//! Memetic CMA-ES for static output feedback synthesis.
//!
//! A global CMA-ES searches over flattened feedback gains while an embedded
//! (1+1)-CMA-ES refines every offspring before selection. Two objective
//! families are provided: the closed-loop H-infinity norm and the
//! closed-loop spectral abscissa, each with a gain-magnitude penalty.
//!
//! ```no_run
//! use sofcma::{io, solve, ObjectiveKind, SolverConfig};
//!
//! let plant = io::load_problem("problems/double_integrator.json")?;
//! let config = SolverConfig {
//!     objective: ObjectiveKind::SpectralAbscissa,
//!     t_max: 2000,
//!     ..SolverConfig::default()
//! };
//! let result = solve(&plant, &config)?;
//! println!("abscissa {}", result.best_objective);
//! # Ok::<(), sofcma::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cma;
pub mod driver;
mod error;
pub mod io;
pub mod local;
pub mod model;
pub mod objectives;
pub mod rng;

pub use driver::{
    solve, solve_raw, solve_raw_with_progress, solve_with_progress, BudgetMode, GenerationRecord,
    RunResult, SolverConfig,
};
pub use error::{Error, Result};
pub use model::{
    close_loop, flatten_gain, gain_norm, unflatten_gain, ClosedLoopRealization, Dims, GainMatrix,
    PlantRealization,
};
pub use objectives::{
    evaluate, feasibility, Evaluation, FitnessConfig, ObjectiveKind, PenaltyMode,
};
