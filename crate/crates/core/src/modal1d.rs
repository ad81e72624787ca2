//! Scalar TE modes of a slab cross-section.
//!
//! On a line `Γ` with transverse stretch `s_x` the mode `E(x) e^{-jβz}`
//! satisfies `A e = -β² B e` with
//!
//! ```text
//! A_ij = ∫ (1/s_x) φ_i' φ_j' - k0² n² s_x φ_i φ_j dx,    B_ij = ∫ s_x φ_i φ_j dx,
//! ```
//!
//! and homogeneous Dirichlet conditions at both ends. `A` and `B` are
//! complex symmetric, so modes are orthogonal under the non-conjugated
//! product `e_mᵀ B e_n`. Modal amplitudes are normalised with
//! `κ_m = β_m e_mᵀ B e_m` (the scalar cross-power with `1/(ωμ0)` dropped).

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, EigGeneralized, GeneralizedEigenvalue};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::ShapeBasis;
use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, PmlZone};
use crate::pml::{Stretch, PML_EXTRA_DEGREE};
use crate::quadrature::QuadRule;
use crate::sparse::{CsrMatrix, SparseLu, Triplets};
use crate::{refractive_index, Materials};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Geometric entity carrying a 1D degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEntity {
    /// Node index in the 1D mesh.
    Vertex(usize),
    /// Segment index and hierarchical index `k - 2`.
    Edge(usize, usize),
}

/// H1 space of order `p` on a 1D mesh with both end nodes fixed to zero.
///
/// Full numbering: node `i` → `i`; segment `s`, function `j` →
/// `n_nodes + s (p - 1) + j`. Free dofs keep the full order with the two
/// end nodes removed.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    pub order: usize,
    pub n_nodes: usize,
    pub n_segs: usize,
    pub free_of: Vec<Option<usize>>,
    pub full_of: Vec<usize>,
    flips: Vec<bool>,
}

impl TraceSpace {
    pub fn new(mesh: &Mesh1D, order: usize) -> Result<Self> {
        if mesh.segments.is_empty() {
            return Err(Error::InvalidInput("empty 1D mesh".into()));
        }
        if order == 0 {
            return Err(Error::InvalidInput("polynomial order must be >= 1".into()));
        }
        let n_nodes = mesh.nodes.len();
        let n_segs = mesh.segments.len();
        let n_full = n_nodes + n_segs * (order - 1);
        let mut free_of = vec![None; n_full];
        let mut full_of = Vec::with_capacity(n_full);
        for (i, slot) in free_of.iter_mut().enumerate() {
            if i == 0 || i == n_nodes - 1 {
                continue;
            }
            *slot = Some(full_of.len());
            full_of.push(i);
        }
        Ok(TraceSpace {
            order,
            n_nodes,
            n_segs,
            free_of,
            full_of,
            flips: (0..n_segs).map(|s| mesh.flip(s)).collect(),
        })
    }

    pub fn n_full(&self) -> usize {
        self.free_of.len()
    }

    pub fn n_free(&self) -> usize {
        self.full_of.len()
    }

    /// Full dof indices of segment `s` in local basis order.
    pub fn seg_dofs(&self, s: usize) -> Vec<usize> {
        let p = self.order;
        let mut d = vec![s, s + 1];
        d.extend((0..p - 1).map(|j| self.n_nodes + s * (p - 1) + j));
        d
    }

    pub fn flip(&self, s: usize) -> bool {
        self.flips[s]
    }

    pub fn entity(&self, full: usize) -> TraceEntity {
        if full < self.n_nodes {
            TraceEntity::Vertex(full)
        } else {
            let k = full - self.n_nodes;
            TraceEntity::Edge(k / (self.order - 1), k % (self.order - 1))
        }
    }

    /// Field value at `x` from free coefficients.
    pub fn eval(&self, mesh: &Mesh1D, coeffs: ArrayView1<Complex64>, x: f64) -> Complex64 {
        let s = match mesh.nodes.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.n_segs - 1),
        };
        let [a, b] = mesh.segments[s];
        let t = (x - mesh.nodes[a]) / (mesh.nodes[b] - mesh.nodes[a]);
        let vals = ShapeBasis::segment(self.order).eval([t, 0.0], &[self.flips[s]]);
        self.seg_dofs(s)
            .iter()
            .zip(&vals.values)
            .filter_map(|(d, v)| self.free_of[*d].map(|f| coeffs[f] * v))
            .sum()
    }
}

/// Discrete modal problem on one cross-section.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// Unweighted L2 mass matrix, used for field norms on the line.
    pub mass: CsrMatrix,
    pub space: TraceSpace,
    pub mesh: Mesh1D,
    pub k0: f64,
    pub n_max: f64,
}

impl ModalSystem {
    pub fn dim(&self) -> usize {
        self.space.n_free()
    }
}

pub fn assemble_modal(mesh: &Mesh1D, materials: &Materials, k0: f64, order: usize, stretch: &Stretch) -> Result<ModalSystem> {
    if !(k0 > 0.0) {
        return Err(Error::InvalidInput(format!("k0 must be positive, got {k0}")));
    }
    let space = TraceSpace::new(mesh, order)?;
    let n_of_seg = mesh
        .seg_region
        .iter()
        .map(|&r| refractive_index(materials, &mesh.regions[r]))
        .collect::<Result<Vec<f64>>>()?;
    let n_max = n_of_seg.iter().copied().fold(0.0, f64::max);
    let basis = ShapeBasis::segment(order);
    let quad = QuadRule::segment(order + 2);
    let quad_pml = QuadRule::segment_for_degree(2 * order + 2 + PML_EXTRA_DEGREE);
    let nf = space.n_free();

    let locals: Vec<[Vec<(usize, usize, Complex64)>; 3]> = (0..mesh.segments.len())
        .into_par_iter()
        .map(|s| {
            let [i0, i1] = mesh.segments[s];
            let (x0, x1) = (mesh.nodes[i0], mesh.nodes[i1]);
            let hl = x1 - x0;
            let n = n_of_seg[s];
            let dofs = space.seg_dofs(s);
            let nb = dofs.len();
            let mut ka = vec![ZERO; nb * nb];
            let mut kb = vec![ZERO; nb * nb];
            let mut km = vec![ZERO; nb * nb];
            let pml = !stretch.is_trivial() && mesh.regions[mesh.seg_region[s]].zone != PmlZone::None;
            let rule = if pml { &quad_pml } else { &quad };
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let x = x0 + pt[0] * hl;
                let sx = stretch.sx(x);
                let v = basis.eval(*pt, &[space.flip(s)]);
                let wx = w * hl;
                for i in 0..nb {
                    let di = v.grads[i][0] / hl;
                    for j in 0..nb {
                        let dj = v.grads[j][0] / hl;
                        let mm = v.values[i] * v.values[j] * wx;
                        ka[i * nb + j] += di * dj * wx / sx - k0 * k0 * n * n * sx * mm;
                        kb[i * nb + j] += sx * mm;
                        km[i * nb + j] += mm;
                    }
                }
            }
            let mut out: [Vec<(usize, usize, Complex64)>; 3] = Default::default();
            for i in 0..nb {
                let Some(fi) = space.free_of[dofs[i]] else { continue };
                for j in 0..nb {
                    let Some(fj) = space.free_of[dofs[j]] else { continue };
                    out[0].push((fi, fj, ka[i * nb + j]));
                    out[1].push((fi, fj, kb[i * nb + j]));
                    out[2].push((fi, fj, Complex64::new(km[i * nb + j].re, 0.0)));
                }
            }
            out
        })
        .collect();
    let mut ts = [Triplets::new(nf, nf), Triplets::new(nf, nf), Triplets::new(nf, nf)];
    for l in locals {
        for (t, entries) in ts.iter_mut().zip(l) {
            for (i, j, v) in entries {
                t.push(i, j, v);
            }
        }
    }
    let [ta, tb, tm] = ts;
    Ok(ModalSystem {
        a: ta.to_csr(),
        b: tb.to_csr(),
        mass: tm.to_csr(),
        space,
        mesh: mesh.clone(),
        k0,
        n_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eigensolver {
    /// Dense QZ for small systems, shift-invert Arnoldi above
    /// [`ModeOptions::dense_limit`].
    Auto,
    Dense,
    ShiftInvert,
}

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions {
    /// Target for `-β²`; defaults to `-(k0 n_max)²`.
    pub target: Option<Complex64>,
    pub solver: Eigensolver,
    pub dense_limit: usize,
    /// Inverse-iteration refinement steps per mode.
    pub polish_steps: usize,
    pub max_krylov: usize,
    pub tol: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            target: None,
            solver: Eigensolver::Auto,
            dense_limit: 2000,
            polish_steps: 1,
            max_krylov: 500,
            tol: 1e-12,
        }
    }
}

/// Modes of one cross-section, sorted by decreasing `Re β`.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub beta: Vec<Complex64>,
    /// Free-dof coefficients, one column per mode.
    pub vectors: Array2<Complex64>,
    pub kappa: Option<Vec<Complex64>>,
    /// `‖A e + β² B e‖ / (‖B e‖ ‖A‖_∞)` per mode.
    pub residuals: Vec<f64>,
    pub k0: f64,
    pub target: Complex64,
    pub b: CsrMatrix,
    pub mass: CsrMatrix,
    pub space: TraceSpace,
    pub mesh: Mesh1D,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, j: usize) -> ArrayView1<'_, Complex64> {
        self.vectors.column(j)
    }

    /// `uᵀ B v` (no conjugation).
    pub fn bdot(&self, u: ArrayView1<Complex64>, v: ArrayView1<Complex64>) -> Complex64 {
        bilinear(&self.b, u, v, false)
    }

    /// First `n` modes.
    pub fn truncated(&self, n: usize) -> Result<ModeSet> {
        if n > self.len() {
            return Err(Error::InvalidInput(format!("requested {n} modes, only {} available", self.len())));
        }
        let mut out = self.clone();
        out.beta.truncate(n);
        out.vectors = self.vectors.slice(ndarray::s![.., ..n]).to_owned();
        out.residuals.truncate(n);
        if let Some(k) = &mut out.kappa {
            k.truncate(n);
        }
        Ok(out)
    }

    /// Mode table with header `index,re_beta,im_beta,re_kappa,im_kappa,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re_beta,im_beta,re_kappa,im_kappa,residual\n");
        for j in 0..self.len() {
            let k = self.kappa.as_ref().map(|k| k[j]).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            let _ = writeln!(
                s,
                "{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e}",
                self.beta[j].re, self.beta[j].im, k.re, k.im, self.residuals[j]
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `uᵀ M v`, or `u^H M v` when `conjugate` is set.
pub fn bilinear(m: &CsrMatrix, u: ArrayView1<Complex64>, v: ArrayView1<Complex64>, conjugate: bool) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..m.nrows {
        let (idx, val) = m.row(i);
        let mv: Complex64 = idx.iter().zip(val).map(|(j, a)| a * v[*j]).sum();
        acc += if conjugate { u[i].conj() } else { u[i] } * mv;
    }
    acc
}

pub(crate) fn csr_mul(m: &CsrMatrix, v: ArrayView1<Complex64>) -> Array1<Complex64> {
    Array1::from_iter((0..m.nrows).map(|i| {
        let (idx, val) = m.row(i);
        idx.iter().zip(val).map(|(j, a)| a * v[*j]).sum::<Complex64>()
    }))
}

fn norm(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inf_norm(m: &CsrMatrix) -> f64 {
    (0..m.nrows)
        .map(|i| m.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Principal root with `Re β ≥ 0`; purely evanescent roots get `Im β ≤ 0`.
pub fn beta_from_squared(beta2: Complex64) -> Complex64 {
    let mut b = beta2.sqrt();
    if b.re < 0.0 {
        b = -b;
    }
    if b.re.abs() < 1e-12 * b.norm() && b.im > 0.0 {
        b = -b;
        b.re = b.re.abs();
    }
    b
}

/// Slowest decay first: ascending `|Im β|`, near-ties (guided or
/// lossless propagating modes) broken by descending `Re β`.
pub fn mode_order(a: &Complex64, b: &Complex64) -> Ordering {
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    if (a.im.abs() - b.im.abs()).abs() > 1e-8 * scale {
        a.im.abs().total_cmp(&b.im.abs())
    } else {
        b.re.total_cmp(&a.re)
    }
}

fn phase_normalize(mut v: ndarray::ArrayViewMut1<Complex64>) {
    let mut best = ZERO;
    for z in v.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() > 0.0 {
        let ph = best.norm() / best;
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z * ph / nrm);
    }
}

/// Eigenpairs `(λ = -β², e)` closest to the target.
fn dense_pairs(sys: &ModalSystem) -> Result<Vec<(Complex64, Array1<Complex64>)>> {
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let (vals, vecs) = (a, b)
        .eig_generalized(None)
        .map_err(|e| Error::Eigen(format!("QZ failed: {e}")))?;
    let mut out = Vec::with_capacity(vals.len());
    for (k, gv) in vals.iter().enumerate() {
        match gv {
            GeneralizedEigenvalue::Finite(l, _) => out.push((*l, vecs.column(k).to_owned())),
            GeneralizedEigenvalue::Indeterminate(_) => {
                return Err(Error::Eigen("indeterminate generalized eigenvalue".into()));
            }
        }
    }
    Ok(out)
}

/// Shift-invert Arnoldi on `(A - σB)⁻¹ B` with full reorthogonalisation.
fn shift_invert_pairs(sys: &ModalSystem, n_modes: usize, sigma: Complex64, opts: &ModeOptions) -> Result<Vec<(Complex64, Array1<Complex64>)>> {
    let n = sys.dim();
    let shifted = sys.a.add_scaled(&sys.b, -sigma)?;
    let lu = SparseLu::factor(&shifted).map_err(|e| Error::Eigen(format!("shift factorisation failed: {e}")))?;
    let mut m = (2 * n_modes + 20).min(n).min(opts.max_krylov.max(n_modes + 1));
    loop {
        let mut v: Vec<Array1<Complex64>> = Vec::with_capacity(m + 1);
        let mut start = Array1::from_iter((0..n).map(|i| Complex64::new(1.0 + ((i * 7919) % 13) as f64 * 0.01, 0.0)));
        let s0 = norm(start.view());
        start.mapv_inplace(|z| z / s0);
        v.push(start);
        let mut h = Array2::<Complex64>::zeros((m + 1, m));
        let mut steps = m;
        for k in 0..m {
            let bv = csr_mul(&sys.b, v[k].view());
            let mut w = Array1::from(lu.solve(bv.as_slice().unwrap())?);
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c: Complex64 = vi.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                    h[[i, k]] += c;
                    w.zip_mut_with(vi, |a, b| *a -= c * b);
                }
            }
            let hn = norm(w.view());
            h[[k + 1, k]] = Complex64::new(hn, 0.0);
            if hn < 1e-14 {
                steps = k + 1;
                break;
            }
            if k + 1 < m {
                v.push(w.mapv(|z| z / hn));
            }
        }
        let hk = h.slice(ndarray::s![..steps, ..steps]).to_owned();
        let (theta, y) = hk.eig().map_err(|e| Error::Eigen(format!("Hessenberg eigensolve failed: {e}")))?;
        let mut idx: Vec<usize> = (0..steps).collect();
        idx.sort_by(|&i, &j| theta[j].norm().total_cmp(&theta[i].norm()));
        let take = n_modes.min(steps);
        let mut pairs = Vec::with_capacity(take);
        let mut worst = 0.0f64;
        for &i in idx.iter().take(take) {
            let mut x = Array1::<Complex64>::zeros(n);
            for (j, vj) in v.iter().enumerate().take(steps) {
                let c = y[[j, i]];
                x.zip_mut_with(vj, |a, b| *a += c * b);
            }
            let ritz_res = (h[[steps.min(m), steps - 1]] * y[[steps - 1, i]]).norm() / theta[i].norm().max(1e-300);
            worst = worst.max(ritz_res);
            pairs.push((sigma + theta[i].inv(), x));
        }
        if worst < 1e-8 || m >= n || m >= opts.max_krylov || steps < m {
            if pairs.len() < n_modes {
                return Err(Error::Eigen(format!(
                    "Krylov space exhausted after {} vectors, {} modes requested",
                    pairs.len(),
                    n_modes
                )));
            }
            return Ok(pairs);
        }
        m = (2 * m).min(n).min(opts.max_krylov);
    }
}

/// Rayleigh quotient `eᵀAe / eᵀBe`.
fn rayleigh(sys: &ModalSystem, e: ArrayView1<Complex64>) -> Complex64 {
    bilinear(&sys.a, e, e, false) / bilinear(&sys.b, e, e, false)
}

fn residual(sys: &ModalSystem, lambda: Complex64, e: ArrayView1<Complex64>, anorm: f64) -> f64 {
    let ae = csr_mul(&sys.a, e);
    let be = csr_mul(&sys.b, e);
    let r: f64 = ae.iter().zip(be.iter()).map(|(x, y)| (x - lambda * y).norm_sqr()).sum::<f64>().sqrt();
    r / (norm(be.view()) * anorm).max(f64::MIN_POSITIVE)
}

/// Computes `n_modes` eigenpairs closest to the target, converted to `β`
/// and sorted with [`mode_order`].
/// Computes `n_modes` eigenpairs closest to the target, converted to `β`
/// and sorted with [`mode_order`].
pub fn solve_modes(sys: &ModalSystem, n_modes: usize, opts: &ModeOptions) -> Result<ModeSet> {
    let n = sys.dim();
    if n_modes == 0 || n_modes > n {
        return Err(Error::InvalidInput(format!("n_modes must lie in 1..={n}, got {n_modes}")));
    }
    let target = opts
        .target
        .unwrap_or_else(|| Complex64::new(-(sys.k0 * sys.n_max).powi(2), 0.0));
    let dense = match opts.solver {
        Eigensolver::Dense => true,
        Eigensolver::ShiftInvert => false,
        Eigensolver::Auto => n <= opts.dense_limit || n_modes == n,
    };
    let mut pairs = if dense {
        dense_pairs(sys)?
    } else {
        let want = (2 * n_modes).max(n_modes + 20).min(n);
        shift_invert_pairs(sys, want, target, opts)?
    };
    // Candidates nearest the target, then the first `n_modes` in mode order.
    pairs.sort_by(|a, b| (a.0 - target).norm().total_cmp(&(b.0 - target).norm()));
    pairs.truncate((2 * n_modes).max(n_modes + 20).min(n));
    pairs.sort_by(|a, b| mode_order(&beta_from_squared(-a.0), &beta_from_squared(-b.0)));
    pairs.truncate(n_modes);

    let anorm = inf_norm(&sys.a).max(f64::MIN_POSITIVE);
    let lambdas: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let isolated: Vec<bool> = (0..lambdas.len())
        .map(|i| {
            (0..lambdas.len()).all(|j| i == j || (lambdas[i] - lambdas[j]).norm() > 1e-8 * lambdas[i].norm().max(1e-300))
        })
        .collect();
    let refined: Vec<(Complex64, Array1<Complex64>, f64)> = pairs
        .into_par_iter()
        .zip(isolated)
        .map(|((mut lam, mut e), iso)| {
            phase_normalize(e.view_mut());
            let mut res = residual(sys, lam, e.view(), anorm);
            if iso && res > opts.tol * 1e-2 {
                for _ in 0..opts.polish_steps {
                    match polish(sys, lam, e.view()) {
                        Some((l2, e2)) => {
                            let r2 = residual(sys, l2, e2.view(), anorm);
                            if r2 < res {
                                lam = l2;
                                e = e2;
                                res = r2;
                            } else {
                                break;
                            }
                        }
                        None => break,
                    }
                }
            }
            (lam, e, res)
        })
        .collect();
    let refined = ritz_refine(sys, refined, anorm, opts.tol)?;

    let mut modes: Vec<(Complex64, Array1<Complex64>, f64)> = refined
        .into_iter()
        .map(|(lam, e, r)| (beta_from_squared(-lam), e, r))
        .collect();
    modes.sort_by(|a, b| mode_order(&a.0, &b.0));
    let mut vectors = Array2::<Complex64>::zeros((n, modes.len()));
    for (j, m) in modes.iter().enumerate() {
        vectors.column_mut(j).assign(&m.1);
    }
    Ok(ModeSet {
        beta: modes.iter().map(|m| m.0).collect(),
        residuals: modes.iter().map(|m| m.2).collect(),
        vectors,
        kappa: None,
        k0: sys.k0,
        target,
        b: sys.b.clone(),
        mass: sys.mass.clone(),
        space: sys.space.clone(),
        mesh: sys.mesh.clone(),
    })
}

/// One inverse-iteration step with a slightly offset shift followed by a
/// Rayleigh-quotient update.
/// Relative `λ` spread of the clusters re-solved by [`ritz_refine`].
const RITZ_CLUSTER: f64 = 5e-3;

/// Non-conjugated Rayleigh–Ritz inside clusters of close eigenvalues.
/// Vectors computed one at a time mix within a cluster by `O(ε ‖A‖ / gap)`;
/// the projected pencil is small, so its own error scales with `|λ|`
/// instead. A cluster is kept as computed if any residual exceeds the
/// solver tolerance.
fn ritz_refine(sys: &ModalSystem, mut pairs: Vec<(Complex64, Array1<Complex64>, f64)>, anorm: f64, tol: f64) -> Result<Vec<(Complex64, Array1<Complex64>, f64)>> {
    let k = pairs.len();
    let mut cluster: Vec<usize> = (0..k).collect();
    for i in 0..k {
        for j in 0..i {
            if (pairs[i].0 - pairs[j].0).norm() <= RITZ_CLUSTER * pairs[i].0.norm() {
                let (ci, cj) = (cluster[i], cluster[j]);
                cluster.iter_mut().filter(|c| **c == ci).for_each(|c| *c = cj);
            }
        }
    }
    let n = sys.dim();
    for root in 0..k {
        let members: Vec<usize> = (0..k).filter(|&i| cluster[i] == root).collect();
        let m = members.len();
        if m < 2 {
            continue;
        }
        let mut v = Array2::<Complex64>::zeros((n, m));
        let mut av = Array2::<Complex64>::zeros((n, m));
        let mut bv = Array2::<Complex64>::zeros((n, m));
        for (c, &i) in members.iter().enumerate() {
            v.column_mut(c).assign(&pairs[i].1);
            av.column_mut(c).assign(&csr_mul(&sys.a, pairs[i].1.view()));
            bv.column_mut(c).assign(&csr_mul(&sys.b, pairs[i].1.view()));
        }
        let mut ah = v.t().dot(&av);
        let mut bh = v.t().dot(&bv);
        for i in 0..m {
            for j in 0..i {
                let a = 0.5 * (ah[[i, j]] + ah[[j, i]]);
                ah[[i, j]] = a;
                ah[[j, i]] = a;
                let b = 0.5 * (bh[[i, j]] + bh[[j, i]]);
                bh[[i, j]] = b;
                bh[[j, i]] = b;
            }
        }
        let Ok((vals, ys)) = (ah, bh).eig_generalized(None) else {
            continue;
        };
        let worst = members.iter().map(|&i| pairs[i].2).fold(0.0, f64::max);
        let mut fresh = Vec::with_capacity(m);
        for (c, gv) in vals.iter().enumerate() {
            let GeneralizedEigenvalue::Finite(lam, _) = gv else {
                break;
            };
            let mut e = v.dot(&ys.column(c));
            phase_normalize(e.view_mut());
            let res = residual(sys, *lam, e.view(), anorm);
            if res > (10.0 * worst).max(tol) {
                break;
            }
            fresh.push((*lam, e, res));
        }
        if fresh.len() == m {
            for (&i, p) in members.iter().zip(fresh) {
                pairs[i] = p;
            }
        }
    }
    Ok(pairs)
}

fn polish(sys: &ModalSystem, lambda: Complex64, e: ArrayView1<Complex64>) -> Option<(Complex64, Array1<Complex64>)> {
    let shift = lambda + Complex64::new(1e-9, 1e-9) * lambda.norm().max(1.0);
    let k = sys.a.add_scaled(&sys.b, -shift).ok()?;
    let lu = SparseLu::factor(&k).ok()?;
    let be = csr_mul(&sys.b, e);
    let mut y = Array1::from(lu.solve(be.as_slice()?).ok()?);
    phase_normalize(y.view_mut());
    let lam = rayleigh(sys, y.view());
    Some((lam, y))
}

/// Non-conjugated Gram–Schmidt inside groups with
/// `|β_m² - β_n²| ≤ tol |β_m²|`. Other modes are left untouched.
pub fn orthogonalize_degenerate(ms: &ModeSet, tol: f64) -> Result<ModeSet> {
    let n = ms.len();
    let b2: Vec<Complex64> = ms.beta.iter().map(|b| b * b).collect();
    let mut group = (0..n).collect::<Vec<usize>>();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (b2[i] - b2[j]).norm() <= tol * b2[i].norm() {
                let (ri, rj) = (find(&mut group, i), find(&mut group, j));
                if ri != rj {
                    group[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut out = ms.clone();
    let bnorm = ms.b.max_abs();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut group, i) == root).collect();
        if members.len() < 2 {
            continue;
        }
        for (a, &i) in members.iter().enumerate() {
            let mut ei = out.vectors.column(i).to_owned();
            for &j in &members[..a] {
                let ej = out.vectors.column(j).to_owned();
                let c = bilinear(&ms.b, ej.view(), ei.view(), false) / bilinear(&ms.b, ej.view(), ej.view(), false);
                ei.zip_mut_with(&ej, |x, y| *x -= c * y);
            }
            let self_prod = bilinear(&ms.b, ei.view(), ei.view(), false);
            let en = norm(ei.view());
            if self_prod.norm() <= 1e-13 * bnorm * en * en {
                return Err(Error::SelfOrthogonal {
                    mode: i,
                    value: self_prod.norm(),
                });
            }
            out.vectors.column_mut(i).assign(&ei);
        }
    }
    out.kappa = None;
    if n > 0 && out.vectors == ms.vectors {
        out.kappa = ms.kappa.clone();
    }
    Ok(out)
}

/// `κ_m = β_m e_mᵀ B e_m`; fails if any `|κ_m| < 1e-13 max |κ|`.
pub fn compute_kappa(ms: &ModeSet) -> Result<Vec<Complex64>> {
    let kappa: Vec<Complex64> = (0..ms.len())
        .map(|j| ms.beta[j] * ms.bdot(ms.vector(j), ms.vector(j)))
        .collect();
    let kmax = kappa.iter().map(|k| k.norm()).fold(0.0, f64::max);
    let bad: Vec<usize> = (0..kappa.len()).filter(|&j| kappa[j].norm() < 1e-13 * kmax || kappa[j].norm() == 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::UnusableModes(bad));
    }
    Ok(kappa)
}

pub fn with_kappa(mut ms: ModeSet) -> Result<ModeSet> {
    ms.kappa = Some(compute_kappa(&ms)?);
    Ok(ms)
}

/// Scales each mode so that `κ_m = 1`.
pub fn normalize_modes(ms: &ModeSet) -> Result<ModeSet> {
    let kappa = match &ms.kappa {
        Some(k) => k.clone(),
        None => compute_kappa(ms)?,
    };
    let mut out = ms.clone();
    for (j, k) in kappa.iter().enumerate() {
        if k.norm() == 0.0 {
            return Err(Error::UnusableModes(vec![j]));
        }
        if (*k - ONE).norm() > 1e-15 {
            let s = k.sqrt();
            out.vectors.column_mut(j).mapv_inplace(|z| z / s);
        }
    }
    out.kappa = Some(compute_kappa(&out)?);
    Ok(out)
}

/// Normalised cross-power matrix `β_n ẽ_mᵀ B e_n / (√κ_m √κ_n)`, with
/// `ẽ_m = conj(e_m)` in the conjugated variant.
pub fn biorthogonality_matrix(ms: &ModeSet, conjugated: bool) -> Result<Array2<Complex64>> {
    let kappa = match &ms.kappa {
        Some(k) => k.clone(),
        None => compute_kappa(ms)?,
    };
    let n = ms.len();
    let sq: Vec<Complex64> = kappa.iter().map(|k| k.sqrt()).collect();
    let bv: Vec<Array1<Complex64>> = (0..n).into_par_iter().map(|j| csr_mul(&ms.b, ms.vector(j))).collect();
    let mut out = Array2::zeros((n, n));
    for m in 0..n {
        let em = ms.vector(m);
        for k in 0..n {
            let p: Complex64 = em
                .iter()
                .zip(bv[k].iter())
                .map(|(a, b)| if conjugated { a.conj() * b } else { a * b })
                .sum();
            out[[m, k]] = ms.beta[k] * p / (sq[m] * sq[k]);
        }
    }
    Ok(out)
}

/// Largest off-diagonal magnitude.
pub fn max_off_diagonal(m: &Array2<Complex64>) -> f64 {
    let mut w = 0.0f64;
    for ((i, j), v) in m.indexed_iter() {
        if i != j {
            w = w.max(v.norm());
        }
    }
    w
}

/// Relative `β²` spread below which modes are treated as degenerate.
pub const TOL_DEGEN: f64 = 1e-8;

/// Spread used by [`port_modes`]: mirror-image PML modes of symmetric
/// cross-sections split by about `TOL_DEGEN`, and their separately computed
/// vectors are mixed by `O(ε ‖A‖ / gap)`.
pub const TOL_CLUSTER: f64 = 1e-6;

/// Solves, biorthogonalises and normalises in one call.
pub fn port_modes(sys: &ModalSystem, n_modes: usize, opts: &ModeOptions) -> Result<ModeSet> {
    let ms = solve_modes(sys, n_modes, opts)?;
    let ms = orthogonalize_degenerate(&ms, TOL_CLUSTER)?;
    let ms = with_kappa(ms)?;
    normalize_modes(&ms)
}
