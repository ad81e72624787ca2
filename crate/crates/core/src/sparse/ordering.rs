//! Fill-reducing orderings on the graph of `A + Aᵀ`.
//!
//! Nested dissection with level-set separators: a pseudo-peripheral vertex
//! is found by repeated breadth-first search, the middle level of its level
//! structure is taken as separator, and the two halves are ordered before
//! it. Separator vertices adjacent to only one half are moved into that
//! half, which for high-order elements strips bubbles and back-facing edge
//! functions from the level. Rows much denser than average (port mode unknowns) are ordered last.

use std::collections::VecDeque;

use super::csr::CsrMatrix;

const LEAF: usize = 128;

/// Symmetric adjacency lists without self loops.
pub fn adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let (idx, _) = a.row(i);
        for &j in idx {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

/// Elimination order `perm` (`perm[k]` is the k-th eliminated index).
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows;
    if n == 0 {
        return Vec::new();
    }
    let adj = adjacency(a);
    let mean = adj.iter().map(Vec::len).sum::<usize>() as f64 / n as f64;
    let dense_cut = (8.0 * mean).max(32.0);
    let mut active = vec![true; n];
    let mut dense = Vec::new();
    for i in 0..n {
        if adj[i].len() as f64 > dense_cut {
            active[i] = false;
            dense.push(i);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mark = vec![0usize; n];
    let mut level = vec![0usize; n];
    let mut side = vec![0u8; n];
    let mut stamp = 0usize;
    let verts: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let mut ws = Work {
        adj: &adj,
        active: &mut active,
        mark: &mut mark,
        level: &mut level,
        side: &mut side,
        stamp: &mut stamp,
    };
    dissect(&mut ws, verts, &mut order, 0);
    order.extend(dense);
    order
}

struct Work<'a> {
    adj: &'a [Vec<usize>],
    active: &'a mut [bool],
    mark: &'a mut [usize],
    level: &'a mut [usize],
    side: &'a mut [u8],
    stamp: &'a mut usize,
}

impl Work<'_> {
    fn next_stamp(&mut self) -> usize {
        *self.stamp += 1;
        *self.stamp
    }

    fn components(&mut self, verts: &[usize]) -> Vec<Vec<usize>> {
        let stamp = self.next_stamp();
        let mut comps = Vec::new();
        for &s in verts {
            if self.mark[s] == stamp {
                continue;
            }
            let mut comp = vec![s];
            self.mark[s] = stamp;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &w in &self.adj[u] {
                    if self.active[w] && self.mark[w] != stamp {
                        self.mark[w] = stamp;
                        comp.push(w);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    /// BFS level structure of a connected vertex set rooted at `root`.
    fn levels(&mut self, root: usize) -> Vec<Vec<usize>> {
        let stamp = self.next_stamp();
        let mut out: Vec<Vec<usize>> = vec![vec![root]];
        self.mark[root] = stamp;
        self.level[root] = 0;
        let mut q = VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            for &w in &self.adj[u] {
                if self.active[w] && self.mark[w] != stamp {
                    self.mark[w] = stamp;
                    let l = self.level[u] + 1;
                    self.level[w] = l;
                    if out.len() <= l {
                        out.push(Vec::new());
                    }
                    out[l].push(w);
                    q.push_back(w);
                }
            }
        }
        out
    }

    fn active_degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&w| self.active[w]).count()
    }

    /// Moves separator vertices without neighbours in one half into the
    /// other and returns what remains of the separator.
    fn thin(&mut self, sep: &[usize], left: &mut Vec<usize>, right: &mut Vec<usize>) -> Vec<usize> {
        const LEFT: u8 = 1;
        const SEP: u8 = 2;
        const RIGHT: u8 = 3;
        for &v in left.iter() {
            self.side[v] = LEFT;
        }
        for &v in right.iter() {
            self.side[v] = RIGHT;
        }
        for &v in sep {
            self.side[v] = SEP;
        }
        for (from, to, dest) in [(RIGHT, LEFT, &mut *left), (LEFT, RIGHT, &mut *right)] {
            for &v in sep {
                if self.side[v] != SEP {
                    continue;
                }
                if !self.adj[v].iter().any(|&w| self.active[w] && self.side[w] == from) {
                    self.side[v] = to;
                    dest.push(v);
                }
            }
        }
        let kept: Vec<usize> = sep.iter().copied().filter(|&v| self.side[v] == SEP).collect();
        for v in left.iter().chain(right.iter()).chain(sep) {
            self.side[*v] = 0;
        }
        kept
    }

    fn retire(&mut self, verts: &[usize], order: &mut Vec<usize>) {
        order.extend_from_slice(verts);
        for &v in verts {
            self.active[v] = false;
        }
    }
}

fn dissect(ws: &mut Work<'_>, verts: Vec<usize>, order: &mut Vec<usize>, depth: usize) {
    if verts.len() <= LEAF || depth > 96 {
        ws.retire(&verts, order);
        return;
    }
    let comps = ws.components(&verts);
    if comps.len() > 1 {
        for c in comps {
            dissect(ws, c, order, depth + 1);
        }
        return;
    }
    let mut ls = ws.levels(verts[0]);
    for _ in 0..8 {
        let last = ls.last().unwrap().clone();
        let cand = *last.iter().min_by_key(|&&v| ws.active_degree(v)).unwrap();
        let trial = ws.levels(cand);
        if trial.len() > ls.len() {
            ls = trial;
        } else {
            break;
        }
    }
    if ls.len() < 3 {
        ws.retire(&verts, order);
        return;
    }
    let half = verts.len() / 2;
    let mut acc = 0;
    let mut mid = 1;
    for (l, set) in ls.iter().enumerate() {
        acc += set.len();
        if acc >= half {
            mid = l.clamp(1, ls.len() - 2);
            break;
        }
    }
    let mut left: Vec<usize> = ls[..mid].iter().flatten().copied().collect();
    let mut right: Vec<usize> = ls[mid + 1..].iter().flatten().copied().collect();
    let sep = ws.thin(&ls[mid], &mut left, &mut right);
    for &v in &sep {
        ws.active[v] = false;
    }
    dissect(ws, left, order, depth + 1);
    dissect(ws, right, order, depth + 1);
    order.extend(sep);
}
