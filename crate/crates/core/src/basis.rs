//! Hierarchical H1-conforming shape functions on segments and triangles.
//!
//! Functions are ordered vertices first, then edge-interior functions edge by
//! edge, then face bubbles. Edge functions are integrated Legendre
//! polynomials blended with the two barycentric coordinates of the edge,
//!
//! ```text
//! φ_k = -4 λa λb P'_{k-1}(λb - λa) / (k (k - 1)),   k = 2..=p,
//! ```
//!
//! so their restriction to the edge is exactly the 1D function of the same
//! index. Edge orientation follows the global convention (lower node id to
//! higher node id); reversing an edge multiplies `φ_k` by `(-1)^k`.
//!
//! Triangle edges are numbered `e0 = (v0, v1)`, `e1 = (v1, v2)`,
//! `e2 = (v2, v0)`. Reference coordinates: segment `t ∈ [0, 1]` with
//! `λ0 = 1 - t`, `λ1 = t`; triangle `(ξ, η)` with `λ0 = 1 - ξ - η`,
//! `λ1 = ξ`, `λ2 = η`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Segment,
    Triangle,
}

/// Hierarchical basis of polynomial order `order` on one reference element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeBasis {
    pub kind: ElementKind,
    pub order: usize,
}

/// Values and reference gradients at one point. For segments only the
/// first gradient component is meaningful.
#[derive(Debug, Clone, Default)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

const TRI_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
const GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

impl ShapeBasis {
    pub fn segment(order: usize) -> Self {
        assert!(order >= 1, "polynomial order must be at least 1");
        ShapeBasis {
            kind: ElementKind::Segment,
            order,
        }
    }

    pub fn triangle(order: usize) -> Self {
        assert!(order >= 1, "polynomial order must be at least 1");
        ShapeBasis {
            kind: ElementKind::Triangle,
            order,
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self.kind {
            ElementKind::Segment => 2,
            ElementKind::Triangle => 3,
        }
    }

    pub fn edge_count(&self) -> usize {
        match self.kind {
            ElementKind::Segment => 1,
            ElementKind::Triangle => 3,
        }
    }

    /// Interior functions per edge.
    pub fn per_edge(&self) -> usize {
        self.order - 1
    }

    pub fn face_count(&self) -> usize {
        match self.kind {
            ElementKind::Segment => 0,
            ElementKind::Triangle => {
                if self.order < 3 {
                    0
                } else {
                    (self.order - 1) * (self.order - 2) / 2
                }
            }
        }
    }

    /// Total number of functions; equals `dim P_p` on the element.
    pub fn len(&self) -> usize {
        self.vertex_count() + self.edge_count() * self.per_edge() + self.face_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Local index of the `j`-th interior function (`j = k - 2`) of `edge`.
    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        self.vertex_count() + edge * self.per_edge() + j
    }

    pub fn face_offset(&self) -> usize {
        self.vertex_count() + self.edge_count() * self.per_edge()
    }

    /// Local indices of every function with a non-vanishing trace on `edge`:
    /// the two edge vertices followed by the edge-interior functions.
    pub fn trace_dofs(&self, edge: usize) -> Result<Vec<usize>> {
        if edge >= self.edge_count() {
            return Err(Error::InvalidInput(format!(
                "edge index {edge} out of range for {:?}",
                self.kind
            )));
        }
        let (a, b) = match self.kind {
            ElementKind::Segment => (0, 1),
            ElementKind::Triangle => TRI_EDGES[edge],
        };
        let mut dofs = vec![a, b];
        dofs.extend((0..self.per_edge()).map(|j| self.edge_dof(edge, j)));
        Ok(dofs)
    }

    /// Evaluate all functions at a reference point. `flips[e]` reverses the
    /// orientation of edge `e`.
    pub fn eval(&self, point: [f64; 2], flips: &[bool]) -> ShapeValues {
        let mut out = ShapeValues::default();
        self.eval_into(point, flips, &mut out);
        out
    }

    pub fn eval_into(&self, point: [f64; 2], flips: &[bool], out: &mut ShapeValues) {
        out.values.clear();
        out.grads.clear();
        match self.kind {
            ElementKind::Segment => self.eval_segment(point[0], flips.first().copied().unwrap_or(false), out),
            ElementKind::Triangle => self.eval_triangle(point, flips, out),
        }
    }

    fn eval_segment(&self, t: f64, flip: bool, out: &mut ShapeValues) {
        let lam = [1.0 - t, t];
        let dlam = [-1.0, 1.0];
        out.values.extend_from_slice(&lam);
        out.grads.push([dlam[0], 0.0]);
        out.grads.push([dlam[1], 0.0]);
        let (a, b) = if flip { (1, 0) } else { (0, 1) };
        let s = lam[b] - lam[a];
        let ds = dlam[b] - dlam[a];
        let leg = Legendre::new(self.order, s);
        for k in 2..=self.order {
            let c = -4.0 / (k * (k - 1)) as f64;
            let prod = lam[a] * lam[b];
            let dprod = dlam[a] * lam[b] + lam[a] * dlam[b];
            let (d1, d2) = (leg.d1[k - 1], leg.d2[k - 1]);
            out.values.push(c * prod * d1);
            out.grads.push([c * (dprod * d1 + prod * d2 * ds), 0.0]);
        }
    }

    fn eval_triangle(&self, p: [f64; 2], flips: &[bool], out: &mut ShapeValues) {
        let lam = [1.0 - p[0] - p[1], p[0], p[1]];
        for v in 0..3 {
            out.values.push(lam[v]);
            out.grads.push(GRAD_LAMBDA[v]);
        }
        for (e, &(v0, v1)) in TRI_EDGES.iter().enumerate() {
            let flip = flips.get(e).copied().unwrap_or(false);
            let (a, b) = if flip { (v1, v0) } else { (v0, v1) };
            let s = lam[b] - lam[a];
            let ds = sub(GRAD_LAMBDA[b], GRAD_LAMBDA[a]);
            let prod = lam[a] * lam[b];
            let dprod = add(scale(GRAD_LAMBDA[a], lam[b]), scale(GRAD_LAMBDA[b], lam[a]));
            let leg = Legendre::new(self.order, s);
            for k in 2..=self.order {
                let c = -4.0 / (k * (k - 1)) as f64;
                let (d1, d2) = (leg.d1[k - 1], leg.d2[k - 1]);
                out.values.push(c * prod * d1);
                out.grads
                    .push(scale(add(scale(dprod, d1), scale(ds, prod * d2)), c));
            }
        }
        if self.order >= 3 {
            let bubble = lam[0] * lam[1] * lam[2];
            let dbubble = add(
                add(
                    scale(GRAD_LAMBDA[0], lam[1] * lam[2]),
                    scale(GRAD_LAMBDA[1], lam[0] * lam[2]),
                ),
                scale(GRAD_LAMBDA[2], lam[0] * lam[1]),
            );
            let s1 = lam[1] - lam[0];
            let ds1 = sub(GRAD_LAMBDA[1], GRAD_LAMBDA[0]);
            let s2 = 2.0 * lam[2] - 1.0;
            let ds2 = scale(GRAD_LAMBDA[2], 2.0);
            let l1 = Legendre::new(self.order, s1);
            let l2 = Legendre::new(self.order, s2);
            for n in 0..=(self.order - 3) {
                for j in 0..=n {
                    let i = n - j;
                    let u = l1.p[i];
                    let v = l2.p[j];
                    let du = scale(ds1, l1.d1[i]);
                    let dv = scale(ds2, l2.d1[j]);
                    out.values.push(bubble * u * v);
                    let g = add(
                        scale(dbubble, u * v),
                        add(scale(du, bubble * v), scale(dv, bubble * u)),
                    );
                    out.grads.push(g);
                }
            }
        }
    }
}

/// Legendre polynomials with first and second derivatives, degrees `0..=n`.
pub(crate) struct Legendre {
    pub p: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Legendre {
    pub fn new(n: usize, s: f64) -> Self {
        let m = n.max(1) + 1;
        let mut p = vec![0.0; m];
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        p[0] = 1.0;
        p[1] = s;
        d1[1] = 1.0;
        for k in 1..m - 1 {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * s * p[k] - kf * p[k - 1]) / (kf + 1.0);
            d1[k + 1] = d1[k - 1] + (2.0 * kf + 1.0) * p[k];
            d2[k + 1] = d2[k - 1] + (2.0 * kf + 1.0) * d1[k];
        }
        Legendre { p, d1, d2 }
    }
}

#[inline]
fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}
#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
fn scale(a: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] * s, a[1] * s]
}
