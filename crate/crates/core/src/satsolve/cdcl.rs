// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::heap::VarHeap;
use super::{SolveError, SolveResult, SolveStatus, SolverConfig, SolverStats};
use crate::cnf::{CnfFormula, Lit};

const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const RESTART_UNIT: u64 = 100;
const RESCALE: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    True,
    False,
    Undef,
}

#[inline]
fn lit_value(assign: &[Value], code: usize) -> Value {
    match assign[code >> 1] {
        Value::Undef => Value::Undef,
        Value::True if code & 1 == 0 => Value::True,
        Value::False if code & 1 == 1 => Value::True,
        _ => Value::False,
    }
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<usize>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

/// Literal codes as in [`Lit::code`]: `2·var + sign`.
#[inline]
fn neg(code: usize) -> usize {
    code ^ 1
}

#[inline]
fn var_of(code: usize) -> usize {
    code >> 1
}

/// The `i`-th element (0-based) of the Luby sequence 1 1 2 1 1 2 4 ...
fn luby(mut x: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

pub(crate) struct Solver<'a> {
    config: &'a SolverConfig,
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    assign: Vec<Value>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    trail: Vec<usize>,
    trail_lim: Vec<usize>,
    flipped: Vec<bool>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    max_learnts: f64,
    num_learnts: usize,
    stats: SolverStats,
    start: Instant,
    trivially_unsat: bool,
}

impl<'a> Solver<'a> {
    pub fn new(f: &CnfFormula, config: &'a SolverConfig) -> Self {
        let start = Instant::now();
        let n = f.num_vars() as usize;
        let mut activity = vec![0.0; n];
        if config.seed != 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            for a in activity.iter_mut() {
                *a = rng.random::<f64>() * 1e-3;
            }
        }
        let heap = VarHeap::new(n, &activity);
        let mut s = Solver {
            config,
            clauses: Vec::with_capacity(f.num_clauses()),
            watches: vec![Vec::new(); 2 * n],
            assign: vec![Value::Undef; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            flipped: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            heap,
            phase: vec![false; n],
            seen: vec![false; n],
            max_learnts: (f.num_clauses() as f64 / 3.0).max(1000.0),
            num_learnts: 0,
            stats: SolverStats::default(),
            start,
            trivially_unsat: false,
        };
        for c in f.clauses() {
            let mut lits: Vec<usize> = c.iter().map(|l| l.code()).collect();
            lits.sort_unstable();
            lits.dedup();
            if lits.windows(2).any(|w| w[1] == neg(w[0]) && var_of(w[0]) == var_of(w[1])) {
                continue;
            }
            match lits.len() {
                0 => s.trivially_unsat = true,
                1 => match s.value(lits[0]) {
                    Value::False => s.trivially_unsat = true,
                    Value::Undef => s.enqueue(lits[0], None),
                    Value::True => {}
                },
                _ => {
                    s.attach(lits, false);
                }
            }
        }
        s
    }

    #[inline]
    fn value(&self, code: usize) -> Value {
        lit_value(&self.assign, code)
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, code: usize, reason: Option<usize>) {
        let v = var_of(code);
        debug_assert_eq!(self.assign[v], Value::Undef);
        self.assign[v] = if code & 1 == 0 { Value::True } else { Value::False };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(code);
    }

    fn attach(&mut self, lits: Vec<usize>, learnt: bool) -> usize {
        let cref = self.clauses.len();
        self.watches[lits[0]].push(cref);
        self.watches[lits[1]].push(cref);
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.num_learnts += 1;
        }
        cref
    }

    fn propagate(&mut self) -> Option<usize> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = neg(p);
            let mut ws = std::mem::take(&mut self.watches[false_lit]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let cref = ws[i];
                i += 1;
                if self.clauses[cref].deleted {
                    continue;
                }
                let lits = &mut self.clauses[cref].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if lit_value(&self.assign, first) == Value::True {
                    ws[j] = cref;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    let l = lits[k];
                    if lit_value(&self.assign, l) != Value::False {
                        lits.swap(1, k);
                        self.watches[l].push(cref);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = cref;
                j += 1;
                if self.value(first) == Value::False {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > RESCALE {
            for a in self.activity.iter_mut() {
                *a /= RESCALE;
            }
            self.var_inc /= RESCALE;
        }
        self.heap.increased(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: usize) {
        let c = &mut self.clauses[cref];
        c.activity += self.cla_inc;
        if c.activity > RESCALE {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity /= RESCALE;
            }
            self.cla_inc /= RESCALE;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, a literal of the backjump level second) and the
    /// backjump level.
    fn analyze(&mut self, mut cref: usize) -> (Vec<usize>, usize) {
        let current = self.decision_level();
        let mut learnt = vec![usize::MAX];
        let mut path = 0usize;
        let mut idx = self.trail.len();
        let mut p: Option<usize> = None;
        let mut touched = Vec::new();
        loop {
            if self.clauses[cref].learnt {
                self.bump_clause(cref);
            }
            let start = usize::from(p.is_some());
            let lits = self.clauses[cref].lits.clone();
            for &q in &lits[start..] {
                let v = var_of(q);
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                self.seen[v] = true;
                touched.push(v);
                self.bump_var(v);
                if self.level[v] >= current {
                    path += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if self.seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[var_of(lit)] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            cref = self.reason[var_of(lit)].expect("implied literal has a reason");
        }
        learnt[0] = neg(p.expect("at least one literal"));

        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(i, &l)| i == 0 || !self.redundant(l))
            .collect();
        let mut learnt: Vec<usize> = learnt
            .into_iter()
            .zip(keep)
            .filter_map(|(l, k)| k.then_some(l))
            .collect();
        for v in touched {
            self.seen[v] = false;
        }

        let mut bt = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i])] > self.level[var_of(learnt[best])] {
                    best = i;
                }
            }
            learnt.swap(1, best);
            bt = self.level[var_of(learnt[1])];
        }
        (learnt, bt)
    }

    /// A learnt literal is redundant when its reason's other literals are
    /// all already in the clause or fixed at level 0.
    fn redundant(&self, lit: usize) -> bool {
        match self.reason[var_of(lit)] {
            None => false,
            Some(r) => self.clauses[r].lits[1..].iter().all(|&q| {
                let v = var_of(q);
                self.seen[v] || self.level[v] == 0
            }),
        }
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for i in (lim..self.trail.len()).rev() {
            let code = self.trail[i];
            let v = var_of(code);
            self.phase[v] = code & 1 == 0;
            self.assign[v] = Value::Undef;
            self.reason[v] = None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.flipped.truncate(level);
        self.qhead = lim;
    }

    fn locked(&self, cref: usize) -> bool {
        let first = self.clauses[cref].lits[0];
        self.reason[var_of(first)] == Some(cref) && self.value(first) == Value::True
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| {
                let c = &self.clauses[i];
                c.learnt && !c.deleted && c.lits.len() > 2 && !self.locked(i)
            })
            .collect();
        cands.sort_by(|&a, &b| {
            self.clauses[a]
                .activity
                .total_cmp(&self.clauses[b].activity)
                .then(a.cmp(&b))
        });
        for &i in &cands[..cands.len() / 2] {
            let c = &mut self.clauses[i];
            c.deleted = true;
            c.lits = Vec::new();
            self.num_learnts -= 1;
        }
        self.max_learnts *= 1.1;
    }

    fn timed_out(&self) -> bool {
        self.config
            .timeout_seconds
            .is_some_and(|t| self.start.elapsed().as_secs_f64() >= t)
    }

    fn finish(mut self, status: SolveStatus) -> Result<SolveResult, SolveError> {
        self.stats.wall_seconds = self.start.elapsed().as_secs_f64();
        Ok(SolveResult {
            status,
            stats: self.stats,
        })
    }

    /// Chronological backtracking: undo to the latest unflipped decision
    /// and try its other polarity. Returns false when none is left.
    fn dpll_backtrack(&mut self) -> bool {
        while let Some(&lim) = self.trail_lim.last() {
            let decision = self.trail[lim];
            let was_flipped = *self.flipped.last().expect("parallel to trail_lim");
            let lvl = self.decision_level();
            self.cancel_until(lvl - 1);
            if !was_flipped {
                self.trail_lim.push(self.trail.len());
                self.flipped.push(true);
                self.enqueue(neg(decision), None);
                return true;
            }
        }
        false
    }

    pub fn run(mut self) -> Result<SolveResult, SolveError> {
        if self.trivially_unsat {
            return self.finish(SolveStatus::Unsat);
        }
        let learning = self.config.learning;
        let restarts = learning && self.config.restarts;
        let mut restart_idx = 0u64;
        let mut since_restart = 0u64;
        let mut ticks = 0u64;
        loop {
            if ticks % 32 == 0 && self.timed_out() {
                self.stats.wall_seconds = self.start.elapsed().as_secs_f64();
                return Err(SolveError::Timeout { stats: self.stats });
            }
            ticks += 1;

            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                if self.decision_level() == 0 {
                    return self.finish(SolveStatus::Unsat);
                }
                if learning {
                    let (learnt, bt) = self.analyze(confl);
                    self.cancel_until(bt);
                    if learnt.len() == 1 {
                        self.enqueue(learnt[0], None);
                    } else {
                        let first = learnt[0];
                        let cref = self.attach(learnt, true);
                        self.bump_clause(cref);
                        self.enqueue(first, Some(cref));
                    }
                    self.var_inc /= VAR_DECAY;
                    self.cla_inc /= CLAUSE_DECAY;
                    since_restart += 1;
                } else if !self.dpll_backtrack() {
                    return self.finish(SolveStatus::Unsat);
                }
                continue;
            }

            if restarts && since_restart >= luby(restart_idx) * RESTART_UNIT {
                restart_idx += 1;
                since_restart = 0;
                self.cancel_until(0);
                continue;
            }
            if learning && self.num_learnts as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
            }

            let next = loop {
                match self.heap.pop(&self.activity) {
                    Some(v) if self.assign[v] == Value::Undef => break Some(v),
                    Some(_) => continue,
                    None => break None,
                }
            };
            match next {
                None => {
                    let model = self.assign.iter().map(|&v| v == Value::True).collect();
                    return self.finish(SolveStatus::Sat(model));
                }
                Some(v) => {
                    self.stats.decisions += 1;
                    self.trail_lim.push(self.trail.len());
                    self.flipped.push(false);
                    let code = Lit::from_dimacs(v as i32 + 1).code() | usize::from(!self.phase[v]);
                    self.enqueue(code, None);
                }
            }
        }
    }
}
