// SPDX-License-Identifier: Apache-2.0

//! CNF formulas, Tseitin encoding of circuits, and the two-key miter used by
//! the SAT attack.

mod encode;
mod miter;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Not;

use thiserror::Error;

pub use encode::{encode_circuit, tseitin, CircuitVars};
pub use miter::{build_miter, MiterContext};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("literal references variable {var} but the formula has {num_vars}")]
    VariableOutOfRange { var: u32, num_vars: u32 },
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("circuit has no key bits")]
    NoKeyBits,
    #[error("DIMACS line {line}: {message}")]
    Dimacs { line: usize, message: String },
}

/// A propositional variable, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variables are numbered from 1");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing assignment vectors.
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }

    pub fn neg(self) -> Lit {
        Lit(-(self.0 as i32))
    }

    pub fn lit(self, positive: bool) -> Lit {
        if positive {
            self.pos()
        } else {
            self.neg()
        }
    }
}

/// A literal in DIMACS sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn from_dimacs(v: i32) -> Lit {
        assert!(v != 0, "0 is not a literal");
        Lit(v)
    }

    pub fn dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Dense code `2·slot + sign`, used by the solver's watch lists.
    pub fn code(self) -> usize {
        2 * self.var().slot() + usize::from(self.0 < 0)
    }

    pub fn from_code(code: usize) -> Lit {
        let v = (code / 2 + 1) as i32;
        Lit(if code % 2 == 1 { -v } else { v })
    }

    /// Truth value under a full assignment indexed by [`Var::slot`].
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var().slot()] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    var_map: BTreeMap<String, Var>,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn var_map(&self) -> &BTreeMap<String, Var> {
        &self.var_map
    }

    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.var_map.get(name).copied()
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars)
    }

    pub fn new_vars(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.new_var()).collect()
    }

    pub fn name_var(&mut self, name: impl Into<String>, v: Var) {
        self.var_map.insert(name.into(), v);
    }

    pub fn add_clause(&mut self, lits: impl Into<Vec<Lit>>) -> Result<(), CnfError> {
        let lits = lits.into();
        if lits.is_empty() {
            return Err(CnfError::EmptyClause(self.clauses.len()));
        }
        if let Some(l) = lits.iter().find(|l| l.var().0 > self.num_vars) {
            return Err(CnfError::VariableOutOfRange {
                var: l.var().0,
                num_vars: self.num_vars,
            });
        }
        self.clauses.push(lits);
        Ok(())
    }

    /// Appends a clause over variables this formula allocated itself.
    pub(crate) fn push(&mut self, lits: Vec<Lit>) {
        debug_assert!(!lits.is_empty());
        debug_assert!(lits.iter().all(|l| l.var().0 <= self.num_vars));
        self.clauses.push(lits);
    }

    pub fn unit(&mut self, lit: Lit) {
        self.push(vec![lit]);
    }

    /// Checks a full assignment clause by clause.
    pub fn evaluate(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(model)))
    }
}

/// DIMACS text: `p cnf V C` header then one zero-terminated clause per line.
pub fn to_dimacs(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            out.push_str(&l.0.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let err = |line: usize, message: &str| CnfError::Dimacs {
        line,
        message: message.to_string(),
    };
    let mut header: Option<(u32, usize)> = None;
    let mut f = CnfFormula::new();
    let mut current: Vec<Lit> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" || header.is_some() {
                return Err(err(lineno, "malformed problem line"));
            }
            let v = parts[2].parse().map_err(|_| err(lineno, "bad variable count"))?;
            let c = parts[3].parse().map_err(|_| err(lineno, "bad clause count"))?;
            header = Some((v, c));
            f.num_vars = v;
            continue;
        }
        if header.is_none() {
            return Err(err(lineno, "clause before problem line"));
        }
        for tok in line.split_whitespace() {
            let v: i32 = tok.parse().map_err(|_| err(lineno, "bad literal"))?;
            if v == 0 {
                let clause = std::mem::take(&mut current);
                f.add_clause(clause).map_err(|e| err(lineno, &e.to_string()))?;
            } else {
                current.push(Lit(v));
            }
        }
    }
    if !current.is_empty() {
        f.add_clause(current).map_err(|e| err(0, &e.to_string()))?;
    }
    match header {
        None => Err(err(0, "missing problem line")),
        Some((_, c)) if c != f.clauses.len() => Err(err(
            0,
            &format!("header declares {c} clauses, found {}", f.clauses.len()),
        )),
        Some(_) => Ok(f),
    }
}
