// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Circuit;
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    #[default]
    Adjacency,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphOptions {
    pub kind: GraphKind,
    pub directed: bool,
    pub self_loops: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            kind: GraphKind::Adjacency,
            directed: false,
            self_loops: true,
        }
    }
}

/// n×n structure matrix of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrix {
    pub options: GraphOptions,
    pub matrix: Matrix,
}

impl GraphMatrix {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }
}

/// Builds the adjacency `W` (w_ij = 1 iff gate j feeds gate i; plus the
/// transpose when undirected; plus the identity with self-loops) or the
/// Laplacian `D − W`, with `D` the row sums of that same `W`.
pub fn graph_matrix(c: &Circuit, options: GraphOptions) -> GraphMatrix {
    let n = c.len();
    let mut w = Matrix::zeros(n, n);
    for g in c.gates() {
        for &f in &g.fanin {
            w[(g.id, f)] = 1.0;
            if !options.directed {
                w[(f, g.id)] = 1.0;
            }
        }
    }
    if options.self_loops {
        for i in 0..n {
            w[(i, i)] = 1.0;
        }
    }
    let matrix = match options.kind {
        GraphKind::Adjacency => w,
        GraphKind::Laplacian => {
            let deg = w.row_sums();
            let mut l = w.scale(-1.0);
            for (i, d) in deg.into_iter().enumerate() {
                l[(i, i)] += d;
            }
            l
        }
    };
    GraphMatrix { options, matrix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn chain() -> Circuit {
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = BUFF(a)").unwrap()
    }

    fn opts(kind: GraphKind, self_loops: bool) -> GraphOptions {
        GraphOptions {
            kind,
            directed: false,
            self_loops,
        }
    }

    #[test]
    fn chain_adjacency_and_laplacian() {
        let c = chain();
        let a = graph_matrix(&c, opts(GraphKind::Adjacency, false));
        assert_eq!(a.matrix.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let l = graph_matrix(&c, opts(GraphKind::Laplacian, false));
        assert_eq!(l.matrix.to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let s = graph_matrix(&c, opts(GraphKind::Adjacency, true));
        assert_eq!(s.matrix.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn directed_keeps_fanin_orientation() {
        let c = chain();
        let d = graph_matrix(
            &c,
            GraphOptions {
                kind: GraphKind::Adjacency,
                directed: true,
                self_loops: false,
            },
        );
        // row = consumer, column = driver
        assert_eq!(d.matrix.to_rows(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
    }
}
