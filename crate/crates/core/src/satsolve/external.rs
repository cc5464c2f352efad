// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{SolveError, SolveResult, SolveStatus, SolverStats};
use crate::cnf::{to_dimacs, CnfFormula};

/// A competition-style solver run as `command args... <file.cnf>`.
///
/// Only `s` and `v` output lines are read; effort counters stay zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSolver {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn solve(&self, f: &CnfFormula) -> Result<SolveResult, SolveError> {
        let start = Instant::now();
        let io = |e: std::io::Error| SolveError::External(e.to_string());
        let mut file = tempfile::Builder::new().suffix(".cnf").tempfile().map_err(io)?;
        file.write_all(to_dimacs(f).as_bytes()).map_err(io)?;
        file.flush().map_err(io)?;
        let out = Command::new(&self.command)
            .args(&self.args)
            .arg(file.path())
            .output()
            .map_err(io)?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let status = parse_output(&stdout, f.num_vars() as usize)?;
        Ok(SolveResult {
            status,
            stats: SolverStats {
                wall_seconds: start.elapsed().as_secs_f64(),
                ..SolverStats::default()
            },
        })
    }
}

pub(crate) fn parse_output(text: &str, num_vars: usize) -> Result<SolveStatus, SolveError> {
    let mut verdict = None;
    let mut model = vec![false; num_vars];
    for line in text.lines() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            verdict = match s.trim() {
                "SATISFIABLE" => Some(true),
                "UNSATISFIABLE" => Some(false),
                other => return Err(SolveError::External(format!("unexpected status `{other}`"))),
            };
        } else if let Some(v) = line.strip_prefix("v ") {
            for tok in v.split_whitespace() {
                let lit: i64 = tok
                    .parse()
                    .map_err(|_| SolveError::External(format!("bad model literal `{tok}`")))?;
                let idx = lit.unsigned_abs() as usize;
                if idx == 0 {
                    continue;
                }
                if idx > num_vars {
                    return Err(SolveError::External(format!("model literal {lit} out of range")));
                }
                model[idx - 1] = lit > 0;
            }
        }
    }
    match verdict {
        Some(true) => Ok(SolveStatus::Sat(model)),
        Some(false) => Ok(SolveStatus::Unsat),
        None => Err(SolveError::External("no status line".into())),
    }
}
