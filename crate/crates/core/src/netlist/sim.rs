// SPDX-License-Identifier: Apache-2.0

use super::{Circuit, GateType, NetlistError};

/// Truth-table index of a fanin pattern; the first fanin is the MSB.
pub(crate) fn lut_index(values: impl IntoIterator<Item = bool>) -> usize {
    values.into_iter().fold(0, |acc, v| (acc << 1) | v as usize)
}

impl Circuit {
    /// Evaluates every net in topological order.
    pub fn evaluate(&self, inputs: &[bool], key: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if inputs.len() != self.primary_inputs().len() {
            return Err(NetlistError::DimensionMismatch {
                what: "primary inputs",
                expected: self.primary_inputs().len(),
                got: inputs.len(),
            });
        }
        if key.len() != self.key_len() {
            return Err(NetlistError::DimensionMismatch {
                what: "key",
                expected: self.key_len(),
                got: key.len(),
            });
        }
        let gates = self.gates();
        let mut values = vec![false; gates.len()];
        let mut key_offset = vec![usize::MAX; gates.len()];
        for slot in self.key_slots() {
            key_offset[slot.gate] = slot.offset;
        }
        for (&pi, &v) in self.primary_inputs().iter().zip(inputs) {
            values[pi] = v;
        }
        for &k in self.key_inputs() {
            values[k] = key[key_offset[k]];
        }
        for &id in self.topological_order() {
            let g = &gates[id];
            values[id] = match g.kind {
                GateType::Input => continue,
                GateType::Lut => {
                    let idx = lut_index(g.fanin.iter().map(|&f| values[f]));
                    key[key_offset[id] + idx]
                }
                kind => kind.eval(g.fanin.iter().map(|&f| values[f])),
            };
        }
        Ok(values)
    }

    /// Primary-output values for the given inputs and key.
    pub fn simulate(&self, inputs: &[bool], key: &[bool]) -> Result<Vec<bool>, NetlistError> {
        let values = self.evaluate(inputs, key)?;
        Ok(self.primary_outputs().iter().map(|&o| values[o]).collect())
    }
}

/// Bits of `value` as a vector of `width` booleans, MSB first.
pub fn bits_msb_first(value: u64, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}
