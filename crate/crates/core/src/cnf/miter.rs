// SPDX-License-Identifier: Apache-2.0

use super::{encode_circuit, CnfError, CnfFormula, Lit, Var};
use crate::netlist::Circuit;

/// Two copies of a locked circuit sharing inputs, with independent keys.
///
/// `formula` holds both copies, the per-output difference variables, and
/// every DIP constraint added so far. The at-least-one-difference clause is
/// kept apart in `difference_clause` so the key-consistency constraints can
/// be solved on their own once no further DIP exists.
#[derive(Debug, Clone)]
pub struct MiterContext {
    pub formula: CnfFormula,
    pub inputs: Vec<Var>,
    pub key1: Vec<Var>,
    pub key2: Vec<Var>,
    pub outputs1: Vec<Var>,
    pub outputs2: Vec<Var>,
    pub diff_vars: Vec<Var>,
    pub difference_clause: Vec<Lit>,
    circuit: Circuit,
    dip_count: usize,
}

pub fn build_miter(obf: &Circuit) -> Result<MiterContext, CnfError> {
    if obf.key_len() == 0 {
        return Err(CnfError::NoKeyBits);
    }
    let mut f = CnfFormula::new();
    let inputs = f.new_vars(obf.primary_inputs().len());
    let key1 = f.new_vars(obf.key_len());
    let key2 = f.new_vars(obf.key_len());
    for (&pi, &v) in obf.primary_inputs().iter().zip(&inputs) {
        f.name_var(format!("x/{}", obf.gates()[pi].name), v);
    }
    for (i, (&a, &b)) in key1.iter().zip(&key2).enumerate() {
        f.name_var(format!("k1[{i}]"), a);
        f.name_var(format!("k2[{i}]"), b);
    }
    let c1 = encode_circuit(&mut f, obf, &inputs, &key1, Some("c1"))?;
    let c2 = encode_circuit(&mut f, obf, &inputs, &key2, Some("c2"))?;

    let mut diff_vars = Vec::with_capacity(c1.outputs.len());
    for (&y1, &y2) in c1.outputs.iter().zip(&c2.outputs) {
        let d = f.new_var();
        let (d, a, b) = (d.pos(), y1.pos(), y2.pos());
        f.push(vec![!d, a, b]);
        f.push(vec![!d, !a, !b]);
        f.push(vec![d, !a, b]);
        f.push(vec![d, a, !b]);
        diff_vars.push(d.var());
    }
    let difference_clause = diff_vars.iter().map(|d| d.pos()).collect();
    Ok(MiterContext {
        formula: f,
        inputs,
        key1,
        key2,
        outputs1: c1.outputs,
        outputs2: c2.outputs,
        diff_vars,
        difference_clause,
        circuit: obf.clone(),
        dip_count: 0,
    })
}

impl MiterContext {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn dip_count(&self) -> usize {
        self.dip_count
    }

    /// The full miter: constraints plus the difference assertion.
    pub fn miter_formula(&self) -> CnfFormula {
        let mut f = self.formula.clone();
        f.push(self.difference_clause.clone());
        f
    }

    /// Constraints only; any model yields a key consistent with every DIP.
    pub fn key_formula(&self) -> &CnfFormula {
        &self.formula
    }

    /// Forces both key copies to reproduce `oracle_out` on input `dip`.
    pub fn add_dip_constraint(&mut self, dip: &[bool], oracle_out: &[bool]) -> Result<(), CnfError> {
        if dip.len() != self.inputs.len() {
            return Err(CnfError::DimensionMismatch {
                what: "DIP",
                expected: self.inputs.len(),
                got: dip.len(),
            });
        }
        if oracle_out.len() != self.outputs1.len() {
            return Err(CnfError::DimensionMismatch {
                what: "oracle output",
                expected: self.outputs1.len(),
                got: oracle_out.len(),
            });
        }
        for key in [self.key1.clone(), self.key2.clone()] {
            let xs = self.formula.new_vars(dip.len());
            for (&v, &bit) in xs.iter().zip(dip) {
                self.formula.unit(v.lit(bit));
            }
            let copy = encode_circuit(&mut self.formula, &self.circuit, &xs, &key, None)?;
            for (&y, &bit) in copy.outputs.iter().zip(oracle_out) {
                self.formula.unit(y.lit(bit));
            }
        }
        self.dip_count += 1;
        Ok(())
    }

    pub fn extract_inputs(&self, model: &[bool]) -> Vec<bool> {
        self.inputs.iter().map(|v| model[v.slot()]).collect()
    }

    pub fn extract_key1(&self, model: &[bool]) -> Vec<bool> {
        self.key1.iter().map(|v| model[v.slot()]).collect()
    }

    pub fn extract_key2(&self, model: &[bool]) -> Vec<bool> {
        self.key2.iter().map(|v| model[v.slot()]).collect()
    }
}
