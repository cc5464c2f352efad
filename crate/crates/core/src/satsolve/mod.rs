// SPDX-License-Identifier: Apache-2.0

//! A deterministic CDCL SAT solver with effort counters.
//!
//! Given the same formula and [`SolverConfig`], the status, model and the
//! decision/propagation/conflict counters are reproducible run to run; only
//! `wall_seconds` varies.

mod cdcl;
mod external;
mod heap;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::CnfFormula;

pub use external::ExternalSolver;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub wall_seconds: f64,
}

impl SolverStats {
    /// Counters only; `wall_seconds` is ignored.
    pub fn same_effort(&self, other: &SolverStats) -> bool {
        self.decisions == other.decisions
            && self.propagations == other.propagations
            && self.conflicts == other.conflicts
    }
}

impl Add for SolverStats {
    type Output = SolverStats;
    fn add(mut self, rhs: SolverStats) -> SolverStats {
        self += rhs;
        self
    }
}

impl AddAssign for SolverStats {
    fn add_assign(&mut self, rhs: SolverStats) {
        self.decisions += rhs.decisions;
        self.propagations += rhs.propagations;
        self.conflicts += rhs.conflicts;
        self.wall_seconds += rhs.wall_seconds;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Sat(Vec<bool>),
    Unsat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub stats: SolverStats,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self.status, SolveStatus::Sat(_))
    }

    /// Model indexed by `Var::slot`.
    pub fn model(&self) -> Option<&[bool]> {
        match &self.status {
            SolveStatus::Sat(m) => Some(m),
            SolveStatus::Unsat => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("timed out after {:.3}s", stats.wall_seconds)]
    Timeout { stats: SolverStats },
    #[error("model assigns {got} variables, formula has {expected}")]
    PartialModel { expected: usize, got: usize },
    #[error("external solver: {0}")]
    External(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub restarts: bool,
    pub learning: bool,
    pub seed: u64,
    pub timeout_seconds: Option<f64>,
    pub external: Option<ExternalSolver>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: true,
            learning: true,
            seed: 0,
            timeout_seconds: None,
            external: None,
        }
    }
}

/// Decides `f`. With `learning` off the search is plain chronological DPLL
/// and restarts are ignored.
pub fn solve(f: &CnfFormula, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    match &config.external {
        Some(ext) => ext.solve(f),
        None => cdcl::Solver::new(f, config).run(),
    }
}

pub fn verify_model(f: &CnfFormula, model: &[bool]) -> Result<bool, SolveError> {
    let expected = f.num_vars() as usize;
    if model.len() < expected {
        return Err(SolveError::PartialModel {
            expected,
            got: model.len(),
        });
    }
    Ok(f.evaluate(model))
}
