//! Restarted GMRES with optional Jacobi (diagonal) right preconditioning.

use num_complex::Complex64;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative residual target `‖b - A x‖ / ‖b‖`.
    pub tol: f64,
    pub jacobi: bool,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 200,
            max_iter: 20_000,
            tol: 1e-10,
            jacobi: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn gmres(a: &CsrMatrix, b: &[Complex64], opts: GmresOptions) -> Result<GmresResult> {
    let n = a.nrows;
    if b.len() != n || a.ncols != n {
        return Err(Error::Dimension("GMRES needs a square system matching the rhs".into()));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(GmresResult {
            x: vec![ZERO; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dinv: Vec<Complex64> = if opts.jacobi {
        a.diagonal()
            .iter()
            .map(|d| if d.norm() > 0.0 { d.inv() } else { Complex64::new(1.0, 0.0) })
            .collect()
    } else {
        vec![Complex64::new(1.0, 0.0); n]
    };
    let m = opts.restart.max(1);
    let mut x = vec![ZERO; n];
    let mut iters = 0;
    loop {
        let ax = a.matvec(&x)?;
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let beta = norm(&r);
        if beta / bnorm <= opts.tol {
            return Ok(GmresResult {
                x,
                iterations: iters,
                residual: beta / bnorm,
            });
        }
        if iters >= opts.max_iter {
            return Err(Error::NoConvergence(format!(
                "GMRES stopped after {iters} iterations at relative residual {:.3e}",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let z: Vec<Complex64> = v[k].iter().zip(&dinv).map(|(a, d)| a * d).collect();
            let mut w = a.matvec(&z)?;
            for (i, vi) in v.iter().enumerate() {
                let hij = dotc(vi, &w);
                h[i][k] = hij;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hij * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            iters += 1;
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= opts.tol * 0.5 || hn == 0.0 || iters >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += dinv[i] * v[j][i] * yj;
            }
        }
    }
}

/// Rotation with real cosine annihilating `b` against `a`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, (b / bn).conj());
    }
    let r = (an * an + bn * bn).sqrt();
    let phase = a / an;
    (an / r, phase * b.conj() / r)
}
