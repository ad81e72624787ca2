//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing order; each column of `L` and
//! `U` comes from a sparse triangular solve whose nonzero pattern is found
//! by depth-first search in the graph of the partial `L`.

use num_complex::Complex64;

use super::csr::CsrMatrix;
use super::ordering::nested_dissection;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Factors `P A Q = L U` with unit lower `L`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Column order.
    q: Vec<usize>,
    /// Row `i` of `A` is pivot row `pinv[i]`.
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<Complex64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<Complex64>,
}

impl SparseLu {
    /// Pivot threshold: the diagonal is kept if within this factor of the
    /// column maximum.
    pub const TOL: f64 = 0.1;

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let q = nested_dissection(a);
        Self::factor_with_order(a, q)
    }

    pub fn factor_with_order(a: &CsrMatrix, q: Vec<usize>) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Dimension(format!("LU needs a square matrix, got {}x{}", a.nrows, a.ncols)));
        }
        let n = a.nrows;
        if q.len() != n {
            return Err(Error::Dimension("column order has wrong length".into()));
        }
        let (ap, ai, ax) = a.to_csc();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let guess = 4 * ax.len() + n;
        let mut lp = vec![0usize; n + 1];
        let mut li = Vec::with_capacity(guess);
        let mut lx = Vec::with_capacity(guess);
        let mut up = vec![0usize; n + 1];
        let mut ui = Vec::with_capacity(guess);
        let mut ux = Vec::with_capacity(guess);
        let mut pinv = vec![usize::MAX; n];
        let mut x = vec![ZERO; n];
        let mut xi = vec![0usize; 2 * n];
        let mut marked = vec![false; n];

        for k in 0..n {
            lp[k] = li.len();
            up[k] = ui.len();
            let col = q[k];
            // Reach of column `col` in the graph of L.
            let mut top = n;
            for p in ap[col]..ap[col + 1] {
                let i = ai[p];
                if !marked[i] {
                    top = dfs(i, &lp, &li, &pinv, top, &mut xi, &mut marked);
                }
            }
            for &i in &xi[top..n] {
                marked[i] = false;
                x[i] = ZERO;
            }
            for p in ap[col]..ap[col + 1] {
                x[ai[p]] = ax[p];
            }
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == usize::MAX {
                    continue;
                }
                let xj = x[j];
                for p in lp[jj] + 1..lp[jj + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }
            let mut ipiv = usize::MAX;
            let mut amax = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == usize::MAX {
                    let t = x[i].norm();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == usize::MAX || amax <= 1e-14 * scale {
                return Err(Error::Singular {
                    dof: col,
                    entity: String::new(),
                });
            }
            if pinv[col] == usize::MAX && x[col].norm() >= amax * Self::TOL {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(Complex64::new(1.0, 0.0));
            for &i in &xi[top..n] {
                if pinv[i] == usize::MAX {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = ZERO;
            }
        }
        lp[n] = li.len();
        up[n] = ui.len();
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(SparseLu {
            n,
            q,
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries stored in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!("rhs has {} entries, system has {}", b.len(), self.n)));
        }
        let mut y = vec![ZERO; self.n];
        for (i, v) in b.iter().enumerate() {
            y[self.pinv[i]] = *v;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != ZERO {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let last = self.up[j + 1] - 1;
            y[j] /= self.ux[last];
            let yj = y[j];
            if yj != ZERO {
                for p in self.up[j]..last {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![ZERO; self.n];
        for k in 0..self.n {
            x[self.q[k]] = y[k];
        }
        Ok(x)
    }
}

/// Non-recursive DFS from row `j` through the columns of the partial `L`.
/// Finished nodes are written to `xi[top..n]` in topological order; the
/// DFS stack lives in `xi[..n]` below `top` and the resume positions in
/// `xi[n..]`.
fn dfs(
    j: usize,
    lp: &[usize],
    li: &[usize],
    pinv: &[usize],
    mut top: usize,
    xi: &mut [usize],
    marked: &mut [bool],
) -> usize {
    let n = pinv.len();
    let (stack, pstack) = xi.split_at_mut(n);
    let mut head: isize = 0;
    stack[0] = j;
    while head >= 0 {
        let h = head as usize;
        let jj = stack[h];
        let col = pinv[jj];
        if !marked[jj] {
            marked[jj] = true;
            pstack[h] = if col == usize::MAX { 0 } else { lp[col] };
        }
        let mut done = true;
        let end = if col == usize::MAX { 0 } else { lp[col + 1] };
        let mut p = pstack[h];
        while p < end {
            let i = li[p];
            if !marked[i] {
                pstack[h] = p;
                head += 1;
                stack[head as usize] = i;
                done = false;
                break;
            }
            p += 1;
        }
        if done {
            head -= 1;
            top -= 1;
            stack[top] = jj;
        }
    }
    top
}
