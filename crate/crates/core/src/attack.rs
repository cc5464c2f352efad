// SPDX-License-Identifier: Apache-2.0

//! Oracle-guided SAT attack.
//!
//! Each iteration asks the miter for an input on which two keys disagree,
//! queries the unlocked circuit on it, and constrains both key copies to
//! agree with the oracle there. When no such input remains, any key
//! consistent with the collected constraints is functionally correct.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{build_miter, CnfError};
use crate::netlist::{bits_msb_first, Circuit, NetlistError};
use crate::obfuscate::ObfuscationInstance;
use crate::satsolve::{solve, SolveError, SolveStatus, SolverConfig, SolverStats};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("solver failure: {0}")]
    Solver(SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttackStatus {
    Solved,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub timeout_seconds: Option<f64>,
    pub solver: SolverConfig,
    /// Random vectors used when exhaustive verification is too large.
    pub verify_vectors: usize,
    pub verify_seed: u64,
    /// Largest input count verified exhaustively.
    pub exhaustive_limit: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            timeout_seconds: None,
            solver: SolverConfig::default(),
            verify_vectors: 1000,
            verify_seed: 0,
            exhaustive_limit: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    /// Empty on timeout.
    pub recovered_key: Vec<bool>,
    pub dips: Vec<Vec<bool>>,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub total_stats: SolverStats,
    pub per_solve: Vec<SolverStats>,
    pub status: AttackStatus,
    /// Outcome of the equivalence check; `None` on timeout.
    pub verified: Option<bool>,
}

pub fn sat_attack(inst: &ObfuscationInstance, config: &AttackConfig) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let locked = &inst.obfuscated;
    let oracle = &*inst.base;
    let mut miter = build_miter(locked)?;
    let mut dips = Vec::new();
    let mut per_solve = Vec::new();

    let remaining = |cfg: &SolverConfig| -> Option<SolverConfig> {
        match config.timeout_seconds {
            None => Some(cfg.clone()),
            Some(t) => {
                let left = t - start.elapsed().as_secs_f64();
                (left > 0.0).then(|| SolverConfig {
                    timeout_seconds: Some(left),
                    ..cfg.clone()
                })
            }
        }
    };
    let timed_out = |dips: Vec<Vec<bool>>, per_solve: Vec<SolverStats>| {
        let total_stats = per_solve.iter().copied().fold(SolverStats::default(), |a, b| a + b);
        AttackResult {
            recovered_key: Vec::new(),
            iterations: dips.len(),
            dips,
            wall_seconds: start.elapsed().as_secs_f64(),
            total_stats,
            per_solve,
            status: AttackStatus::Timeout,
            verified: None,
        }
    };

    loop {
        let Some(cfg) = remaining(&config.solver) else {
            return Ok(timed_out(dips, per_solve));
        };
        let r = match solve(&miter.miter_formula(), &cfg) {
            Ok(r) => r,
            Err(SolveError::Timeout { stats }) => {
                per_solve.push(stats);
                return Ok(timed_out(dips, per_solve));
            }
            Err(e) => return Err(AttackError::Solver(e)),
        };
        per_solve.push(r.stats);
        match r.status {
            SolveStatus::Sat(model) => {
                let dip = miter.extract_inputs(&model);
                let out = oracle.simulate(&dip, &[])?;
                miter.add_dip_constraint(&dip, &out)?;
                log::debug!("iteration {}: dip {:?}", dips.len() + 1, dip);
                dips.push(dip);
            }
            SolveStatus::Unsat => break,
        }
    }

    let Some(cfg) = remaining(&config.solver) else {
        return Ok(timed_out(dips, per_solve));
    };
    let key = match solve(miter.key_formula(), &cfg) {
        Ok(r) => {
            per_solve.push(r.stats);
            match r.status {
                SolveStatus::Sat(model) => miter.extract_key1(&model),
                SolveStatus::Unsat => unreachable!("the correct key always satisfies the DIP constraints"),
            }
        }
        Err(SolveError::Timeout { stats }) => {
            per_solve.push(stats);
            return Ok(timed_out(dips, per_solve));
        }
        Err(e) => return Err(AttackError::Solver(e)),
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let verified = verify_key(oracle, locked, &key, config)?;
    let total_stats = per_solve.iter().copied().fold(SolverStats::default(), |a, b| a + b);
    Ok(AttackResult {
        recovered_key: key,
        iterations: dips.len(),
        dips,
        wall_seconds,
        total_stats,
        per_solve,
        status: AttackStatus::Solved,
        verified: Some(verified),
    })
}

/// Input vectors used for equivalence checks: all of them up to
/// `exhaustive_limit` inputs, else `verify_vectors` seeded random ones.
pub fn verification_vectors(n_inputs: usize, config: &AttackConfig) -> Vec<Vec<bool>> {
    if n_inputs <= config.exhaustive_limit {
        (0..1u64 << n_inputs).map(|x| bits_msb_first(x, n_inputs)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.verify_seed);
        (0..config.verify_vectors)
            .map(|_| (0..n_inputs).map(|_| rng.random()).collect())
            .collect()
    }
}

/// Whether `locked` under `key` matches `oracle` on the verification set.
pub fn verify_key(oracle: &Circuit, locked: &Circuit, key: &[bool], config: &AttackConfig) -> Result<bool, NetlistError> {
    for x in verification_vectors(oracle.primary_inputs().len(), config) {
        if oracle.simulate(&x, &[])? != locked.simulate(&x, key)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    WallSeconds,
    #[default]
    Log1pSeconds,
    Conflicts,
    Log1pConflicts,
}

impl std::str::FromStr for LabelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wall_seconds" => Ok(LabelKind::WallSeconds),
            "log1p_seconds" => Ok(LabelKind::Log1pSeconds),
            "conflicts" => Ok(LabelKind::Conflicts),
            "log1p_conflicts" => Ok(LabelKind::Log1pConflicts),
            _ => Err(format!("unknown label kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeLabel {
    pub instance_id: usize,
    pub label_value: f64,
    pub label_kind: LabelKind,
    pub censored: bool,
}

pub fn label_value(wall_seconds: f64, conflicts: u64, kind: LabelKind) -> f64 {
    match kind {
        LabelKind::WallSeconds => wall_seconds,
        LabelKind::Log1pSeconds => wall_seconds.ln_1p(),
        LabelKind::Conflicts => conflicts as f64,
        LabelKind::Log1pConflicts => (conflicts as f64).ln_1p(),
    }
}

pub fn make_label(instance_id: usize, r: &AttackResult, kind: LabelKind) -> RuntimeLabel {
    RuntimeLabel {
        instance_id,
        label_value: label_value(r.wall_seconds, r.total_stats.conflicts, kind),
        label_kind: kind,
        censored: r.status == AttackStatus::Timeout,
    }
}

/// One line of `attacks.log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackLogLine {
    pub id: usize,
    pub n_locations: usize,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub status: AttackStatus,
}

impl AttackLogLine {
    pub fn new(id: usize, n_locations: usize, r: &AttackResult) -> Self {
        AttackLogLine {
            id,
            n_locations,
            iterations: r.iterations,
            wall_seconds: r.wall_seconds,
            decisions: r.total_stats.decisions,
            propagations: r.total_stats.propagations,
            conflicts: r.total_stats.conflicts,
            status: r.status,
        }
    }
}
