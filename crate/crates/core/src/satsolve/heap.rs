// SPDX-License-Identifier: Apache-2.0

/// Max-heap of variable slots keyed by an external activity array. Ties go
/// to the lower slot.
#[derive(Debug, Clone, Default)]
pub(crate) struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
}

#[inline]
fn before(act: &[f64], a: usize, b: usize) -> bool {
    act[a] > act[b] || (act[a] == act[b] && a < b)
}

impl VarHeap {
    pub fn new(n: usize, act: &[f64]) -> Self {
        let mut h = VarHeap {
            heap: Vec::with_capacity(n),
            pos: vec![None; n],
        };
        for v in 0..n {
            h.insert(v, act);
        }
        h
    }

    pub fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    pub fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    /// Restores order after `act[v]` increased.
    pub fn increased(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.sift_up(i, act);
        }
    }

    pub fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !before(act, v, p) {
                break;
            }
            self.heap[i] = p;
            self.pos[p] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let child = if r < n && before(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            let c = self.heap[child];
            if !before(act, c, v) {
                break;
            }
            self.heap[i] = c;
            self.pos[c] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }
}
