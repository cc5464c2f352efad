// SPDX-License-Identifier: Apache-2.0

use super::{CnfError, CnfFormula, Lit, Var};
use crate::netlist::{Circuit, GateType};

/// Variables assigned to one encoded copy of a circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitVars {
    /// Indexed by gate id.
    pub nets: Vec<Var>,
    /// In primary-output order.
    pub outputs: Vec<Var>,
}

/// Encodes `c` into `f`, binding primary inputs and key bits to the given
/// variables. Gate outputs get fresh variables in topological order; XOR
/// chains and LUT minterms get auxiliaries afterwards. When `tag` is set,
/// every net is recorded in the formula's var map as `tag/name`.
pub fn encode_circuit(
    f: &mut CnfFormula,
    c: &Circuit,
    inputs: &[Var],
    key: &[Var],
    tag: Option<&str>,
) -> Result<CircuitVars, CnfError> {
    if inputs.len() != c.primary_inputs().len() {
        return Err(CnfError::DimensionMismatch {
            what: "input variables",
            expected: c.primary_inputs().len(),
            got: inputs.len(),
        });
    }
    if key.len() != c.key_len() {
        return Err(CnfError::DimensionMismatch {
            what: "key variables",
            expected: c.key_len(),
            got: key.len(),
        });
    }

    let n = c.len();
    let mut nets: Vec<Option<Var>> = vec![None; n];
    let mut key_offset = vec![usize::MAX; n];
    for slot in c.key_slots() {
        key_offset[slot.gate] = slot.offset;
    }
    for (&pi, &v) in c.primary_inputs().iter().zip(inputs) {
        nets[pi] = Some(v);
    }
    for &k in c.key_inputs() {
        nets[k] = Some(key[key_offset[k]]);
    }
    for &id in c.topological_order() {
        if nets[id].is_none() {
            nets[id] = Some(f.new_var());
        }
    }
    let nets: Vec<Var> = nets.into_iter().map(|v| v.expect("every node visited")).collect();

    for &id in c.topological_order() {
        let g = &c.gates()[id];
        let y = nets[id].pos();
        let ins: Vec<Lit> = g.fanin.iter().map(|&i| nets[i].pos()).collect();
        match g.kind {
            GateType::Input => {}
            GateType::And => and_clauses(f, y, &ins),
            GateType::Nand => and_clauses(f, !y, &ins),
            GateType::Or => or_clauses(f, y, &ins),
            GateType::Nor => or_clauses(f, !y, &ins),
            GateType::Xor => xor_chain(f, y, &ins),
            GateType::Xnor => xor_chain(f, !y, &ins),
            GateType::Not => {
                f.push(vec![y, ins[0]]);
                f.push(vec![!y, !ins[0]]);
            }
            GateType::Buff => {
                f.push(vec![!y, ins[0]]);
                f.push(vec![y, !ins[0]]);
            }
            GateType::Lut => {
                let off = key_offset[id];
                let k = ins.len();
                lut_clauses(f, y, &ins, &key[off..off + (1 << k)]);
            }
        }
    }

    if let Some(tag) = tag {
        for g in c.gates() {
            f.name_var(format!("{tag}/{}", g.name), nets[g.id]);
        }
    }
    let outputs = c.primary_outputs().iter().map(|&o| nets[o]).collect();
    Ok(CircuitVars { nets, outputs })
}

fn and_clauses(f: &mut CnfFormula, y: Lit, ins: &[Lit]) {
    for &a in ins {
        f.push(vec![!y, a]);
    }
    let mut big = vec![y];
    big.extend(ins.iter().map(|&a| !a));
    f.push(big);
}

fn or_clauses(f: &mut CnfFormula, y: Lit, ins: &[Lit]) {
    for &a in ins {
        f.push(vec![y, !a]);
    }
    let mut big = vec![!y];
    big.extend_from_slice(ins);
    f.push(big);
}

fn xor2(f: &mut CnfFormula, y: Lit, a: Lit, b: Lit) {
    f.push(vec![!y, a, b]);
    f.push(vec![!y, !a, !b]);
    f.push(vec![y, !a, b]);
    f.push(vec![y, a, !b]);
}

fn xor_chain(f: &mut CnfFormula, y: Lit, ins: &[Lit]) {
    let mut acc = ins[0];
    for (i, &b) in ins.iter().enumerate().skip(1) {
        let out = if i + 1 == ins.len() { y } else { f.new_var().pos() };
        xor2(f, out, acc, b);
        acc = out;
    }
}

/// `y ⇔ ⋁_j (key_j ∧ ins = j)` with one auxiliary per minterm.
fn lut_clauses(f: &mut CnfFormula, y: Lit, ins: &[Lit], key: &[Var]) {
    let k = ins.len();
    let mut minterms = Vec::with_capacity(key.len());
    for (j, kv) in key.iter().enumerate() {
        let m = f.new_var().pos();
        let pattern: Vec<Lit> = (0..k)
            .map(|i| if (j >> (k - 1 - i)) & 1 == 1 { ins[i] } else { !ins[i] })
            .collect();
        f.push(vec![!m, kv.pos()]);
        for &p in &pattern {
            f.push(vec![!m, p]);
        }
        let mut back = vec![m, kv.neg()];
        back.extend(pattern.iter().map(|&p| !p));
        f.push(back);
        minterms.push(m);
    }
    let mut any = vec![!y];
    any.extend_from_slice(&minterms);
    f.push(any);
    for &m in &minterms {
        f.push(vec![y, !m]);
    }
}

/// Standalone encoding: primary inputs take variables `1..=p`, key bits the
/// next `key_len`, then internal nets in topological order.
pub fn tseitin(c: &Circuit) -> Result<(CnfFormula, CircuitVars), CnfError> {
    let mut f = CnfFormula::new();
    let inputs = f.new_vars(c.primary_inputs().len());
    let key = f.new_vars(c.key_len());
    for (i, &v) in key.iter().enumerate() {
        f.name_var(format!("key[{i}]"), v);
    }
    let vars = encode_circuit(&mut f, c, &inputs, &key, Some("c"))?;
    Ok((f, vars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{bits_msb_first, parse_bench, CircuitBuilder};

    fn models(f: &CnfFormula) -> Vec<Vec<bool>> {
        let n = f.num_vars() as usize;
        (0..1u64 << n)
            .map(|m| bits_msb_first(m, n).into_iter().rev().collect::<Vec<_>>())
            .filter(|m| f.evaluate(m))
            .collect()
    }

    #[test]
    fn and_gate_clauses() {
        let c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        let (f, vars) = tseitin(&c).unwrap();
        let (a, b, y) = (Var::new(1), Var::new(2), vars.outputs[0]);
        assert_eq!(y, Var::new(3));
        assert_eq!(
            f.clauses(),
            &[vec![y.neg(), a.pos()], vec![y.neg(), b.pos()], vec![y.pos(), a.neg(), b.neg()]]
        );
        let ms = models(&f);
        assert_eq!(ms.len(), 4);
        for m in ms {
            assert_eq!(m[2], m[0] && m[1]);
        }
    }

    #[test]
    fn not_gate_clauses() {
        let c = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        let (f, _) = tseitin(&c).unwrap();
        let (a, y) = (Var::new(1), Var::new(2));
        assert_eq!(f.clauses(), &[vec![y.pos(), a.pos()], vec![y.neg(), a.neg()]]);
    }

    #[test]
    fn clause_counts() {
        let c = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(o)\nOUTPUT(x)\no = NOR(a, b, c)\nx = XNOR(a, b)",
        )
        .unwrap();
        let (f, _) = tseitin(&c).unwrap();
        assert_eq!(f.num_clauses(), 4 + 4);
    }

    #[test]
    fn one_input_lut_models() {
        let mut b = CircuitBuilder::new();
        let a = b.input("a");
        let y = b.lut("y", vec![false; 2], &[a]);
        b.output(y);
        let c = b.build().unwrap();
        let (mut f, vars) = tseitin(&c).unwrap();
        f.unit(Var::new(2).pos());
        f.unit(Var::new(3).neg());
        let ms = models(&f);
        assert_eq!(ms.len(), 2);
        for m in ms {
            assert_eq!(m[vars.outputs[0].slot()], !m[0]);
        }
    }

    #[test]
    fn lut_clause_count() {
        let mut b = CircuitBuilder::new();
        let ins: Vec<_> = (0..4).map(|i| b.input(&format!("i{i}"))).collect();
        let y = b.lut("y", vec![false; 16], &ins);
        b.output(y);
        let (f, _) = tseitin(&b.build().unwrap()).unwrap();
        assert_eq!(f.num_clauses(), 16 * (4 + 2) + 16 + 1);
    }

    #[test]
    fn dimension_checks() {
        let c = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        let mut f = CnfFormula::new();
        let v = f.new_vars(2);
        assert!(matches!(
            encode_circuit(&mut f, &c, &v, &[], None),
            Err(CnfError::DimensionMismatch { .. })
        ));
    }
}
