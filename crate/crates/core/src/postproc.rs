//! Evaluation on lines and field export.
//!
//! A [`LineField`] lives in the same 1D space as the modes of the line it
//! was taken from, so traces on an evaluation line can be compared with
//! modes computed on the port line when both lines share their x-nodes.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, SVD, UPLO};
use num_complex::Complex64;

use crate::basis::ShapeBasis;
use crate::error::{Error, Result};
use crate::mesh::{extract_trace, Mesh1D};
use crate::modal1d::{bilinear, ModeSet, TraceSpace};
use crate::scatter2d::{ScatterSolution, ScatterSystem};
use crate::sparse::CsrMatrix;
use crate::vtk;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative singular value below which the mode span is rank deficient.
pub const PROJECTION_RANK_TOL: f64 = 1e-13;

/// Field on a line, in free trace coefficients.
#[derive(Debug, Clone)]
pub struct LineField {
    pub mesh: Mesh1D,
    pub space: TraceSpace,
    /// Unweighted 1D mass matrix.
    pub mass: CsrMatrix,
    pub coeffs: Array1<Complex64>,
}

impl LineField {
    /// Field in the space of `ms`.
    pub fn in_space_of(ms: &ModeSet, coeffs: Array1<Complex64>) -> Result<LineField> {
        if coeffs.len() != ms.dim() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a line space of dimension {}",
                coeffs.len(),
                ms.dim()
            )));
        }
        Ok(LineField {
            mesh: ms.mesh.clone(),
            space: ms.space.clone(),
            mass: ms.mass.clone(),
            coeffs,
        })
    }

    /// `‖u‖_{L2(Γ)}`.
    pub fn norm(&self) -> f64 {
        bilinear(&self.mass, self.coeffs.view(), self.coeffs.view(), true).re.max(0.0).sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> LineField {
        LineField {
            coeffs: self.coeffs.mapv(|z| z * c),
            ..self.clone()
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.space.eval(&self.mesh, self.coeffs.view(), x)
    }

    /// `x,re,im` at `per_segment` equispaced points per segment plus the
    /// last node.
    pub fn to_csv(&self, per_segment: usize) -> String {
        let k = per_segment.max(1);
        let mut s = String::from("x,re,im\n");
        for &[a, b] in &self.mesh.segments {
            let (xa, xb) = (self.mesh.nodes[a], self.mesh.nodes[b]);
            for i in 0..k {
                let x = xa + (xb - xa) * i as f64 / k as f64;
                let v = self.eval(x);
                let _ = writeln!(s, "{x:.17e},{:.17e},{:.17e}", v.re, v.im);
            }
        }
        if let Some(&x) = self.mesh.nodes.last() {
            let v = self.eval(x);
            let _ = writeln!(s, "{x:.17e},{:.17e},{:.17e}", v.re, v.im);
        }
        s
    }

    pub fn write_csv(&self, path: &Path, per_segment: usize) -> Result<()> {
        std::fs::write(path, self.to_csv(per_segment)).map_err(|e| Error::io(path, e))
    }

    fn same_space(&self, other: &LineField) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len()
            || self.space.order != other.space.order
            || self.mesh.nodes.len() != other.mesh.nodes.len()
            || self.mesh.nodes.iter().zip(&other.mesh.nodes).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::Dimension("line fields live in different 1D spaces".into()));
        }
        Ok(())
    }
}

/// Trace of a global solution on `line`, expressed in the space of `like`
/// (modes computed on the same line or on a line with matching nodes).
pub fn line_trace(sys: &ScatterSystem, full: &[Complex64], line: &str, like: &ModeSet) -> Result<LineField> {
    if full.len() != sys.dofs.n_dofs() {
        return Err(Error::Dimension(format!(
            "solution has {} coefficients, the space has {}",
            full.len(),
            sys.dofs.n_dofs()
        )));
    }
    let trace = extract_trace(&sys.mesh, line)?;
    if trace.nodes.len() != like.mesh.nodes.len()
        || trace.nodes.iter().zip(&like.mesh.nodes).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::Mesh(format!("nodes of line `{line}` do not match the mode cross-section")));
    }
    if like.space.order != sys.dofs.order || (0..trace.segments.len()).any(|s| trace.flip(s) != like.space.flip(s)) {
        return Err(Error::Mesh(format!(
            "trace space of line `{line}` differs from the mode space (order or edge orientation)"
        )));
    }
    let ids = sys.dofs.trace_dofs(&trace)?;
    LineField::in_space_of(like, ids.iter().map(|&g| full[g]).collect())
}

fn port_index(sys: &ScatterSystem, line: &str) -> Result<usize> {
    sys.ports
        .iter()
        .position(|p| p.line == line)
        .ok_or_else(|| Error::InvalidInput(format!("line `{line}` carries no waveguide port")))
}

/// Mode unknowns of the port on `line`: total amplitudes in the port plane.
pub fn extract_port_amplitudes(sys: &ScatterSystem, sol: &ScatterSolution, line: &str) -> Result<Vec<Complex64>> {
    let p = port_index(sys, line)?;
    sol.amplitudes
        .get(p)
        .cloned()
        .ok_or_else(|| Error::Dimension(format!("solution carries no amplitudes for port `{line}`")))
}

/// Outgoing amplitudes: total minus incident.
pub fn outgoing_amplitudes(sys: &ScatterSystem, sol: &ScatterSolution, line: &str) -> Result<Vec<Complex64>> {
    let p = port_index(sys, line)?;
    let a = extract_port_amplitudes(sys, sol, line)?;
    Ok(a.iter().zip(&sys.ports[p].incident).map(|(t, i)| t - i).collect())
}

/// `Σ_k α_k e^{-jβ_k d} e_k`.
pub fn reference_field(ms: &ModeSet, alpha: &[Complex64], d: f64) -> Result<LineField> {
    if !(d >= 0.0) {
        return Err(Error::InvalidInput(format!("propagation distance must be >= 0, got {d}")));
    }
    if alpha.len() > ms.len() {
        return Err(Error::Dimension(format!("{} amplitudes for {} modes", alpha.len(), ms.len())));
    }
    let mut u = Array1::<Complex64>::zeros(ms.dim());
    for (k, a) in alpha.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let c = a * (-Complex64::i() * ms.beta[k] * d).exp();
        u.zip_mut_with(&ms.vector(k), |x, e| *x += c * e);
    }
    LineField::in_space_of(ms, u)
}

/// `‖u - v‖ / ‖v‖` in `L2(Γ)`.
pub fn line_relative_error(u: &LineField, v: &LineField) -> Result<f64> {
    u.same_space(v)?;
    let den = v.norm();
    if den == 0.0 {
        return Err(Error::InvalidInput("reference field is zero; relative error undefined".into()));
    }
    let diff = LineField {
        coeffs: &u.coeffs - &v.coeffs,
        ..u.clone()
    };
    Ok(diff.norm() / den)
}

/// `r = ‖u_p - u‖ / ‖u‖`, where `u_p` is the `L2(Γ)` projection of `u`
/// onto the span of the modes.
///
/// With `M = Rᴴ R` the projection is the least-squares fit of `R u` by the
/// columns of `R E`, computed from an SVD of `R E`.
pub fn mode_projection_residual(u: &LineField, ms: &ModeSet) -> Result<f64> {
    if u.coeffs.len() != ms.dim() {
        return Err(Error::Dimension(format!(
            "field has {} coefficients, modes have {}",
            u.coeffs.len(),
            ms.dim()
        )));
    }
    let un = u.norm();
    if un == 0.0 {
        return Err(Error::InvalidInput("field is zero; projection residual undefined".into()));
    }
    if ms.is_empty() {
        return Ok(1.0);
    }
    let r = u.mass.to_dense().cholesky(UPLO::Upper)?;
    let a = r.dot(&ms.vectors);
    let b = r.dot(&u.coeffs);
    let (Some(q), s, _) = a.svd(true, false)? else {
        return Err(Error::Lapack("SVD returned no left singular vectors".into()));
    };
    let smax = s.iter().copied().fold(0.0, f64::max);
    let rank = s.iter().filter(|&&v| v > PROJECTION_RANK_TOL * smax).count();
    if rank < ms.len() {
        return Err(Error::ProjectionRank { rank, modes: ms.len() });
    }
    let q: Array2<Complex64> = q.slice(ndarray::s![.., ..rank]).to_owned();
    let c = q.t().mapv(|z| z.conj()).dot(&b);
    let res = &b - &q.dot(&c);
    Ok(res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / un)
}

/// Samples the field on an order-`k` sub-triangulation of every triangle
/// (points are not shared between triangles).
pub fn sample_field(sys: &ScatterSystem, full: &[Complex64], k: usize) -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>, Vec<Complex64>)> {
    if full.len() != sys.dofs.n_dofs() {
        return Err(Error::Dimension(format!(
            "solution has {} coefficients, the space has {}",
            full.len(),
            sys.dofs.n_dofs()
        )));
    }
    let k = k.max(1);
    let mesh = &sys.mesh;
    let basis: &ShapeBasis = &sys.dofs.basis;
    let lattice: Vec<[f64; 2]> = (0..=k)
        .flat_map(|j| (0..=k - j).map(move |i| [i as f64 / k as f64, j as f64 / k as f64]))
        .collect();
    // Row j of the lattice starts after rows 0..j of lengths k+1, k, ...
    let row_start: Vec<usize> = (0..=k)
        .scan(0, |acc, j| {
            let s = *acc;
            *acc += k + 1 - j;
            Some(s)
        })
        .collect();
    let mut local_tris = Vec::new();
    for j in 0..k {
        for i in 0..k - j {
            let a = row_start[j] + i;
            let b = a + 1;
            let c = row_start[j + 1] + i;
            local_tris.push([a, b, c]);
            if i + 1 < k - j {
                local_tris.push([b, row_start[j + 1] + i + 1, c]);
            }
        }
    }
    let np = lattice.len();
    let mut points = Vec::with_capacity(mesh.triangles.len() * np);
    let mut cells = Vec::with_capacity(mesh.triangles.len() * local_tris.len());
    let mut values = Vec::with_capacity(points.capacity());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [p0, p1, p2] = tri.map(|n| mesh.nodes[n]);
        let dofs = sys.dofs.element_dofs(mesh, t);
        let flips = sys.dofs.flips(t);
        let base = points.len();
        for pt in &lattice {
            points.push([
                p0[0] + (p1[0] - p0[0]) * pt[0] + (p2[0] - p0[0]) * pt[1],
                p0[1] + (p1[1] - p0[1]) * pt[0] + (p2[1] - p0[1]) * pt[1],
            ]);
            let v = basis.eval(*pt, &flips);
            values.push(dofs.iter().zip(&v.values).map(|(&g, &w)| full[g] * w).sum());
        }
        cells.extend(local_tris.iter().map(|c| c.map(|l| base + l)));
    }
    Ok((points, cells, values))
}

/// Legacy VTK file with point scalars `re`, `im` and `abs` sampled on an
/// order-`p` sub-triangulation.
pub fn field_to_vtk(sys: &ScatterSystem, full: &[Complex64]) -> Result<String> {
    let (points, cells, values) = sample_field(sys, full, sys.dofs.order)?;
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    let ab: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let mut s = String::new();
    vtk::write_header(&mut s, "E_y", &points, &cells);
    vtk::write_point_scalars(&mut s, &[("re", &re), ("im", &im), ("abs", &ab)]);
    Ok(s)
}

pub fn export_field(sys: &ScatterSystem, full: &[Complex64], path: &Path) -> Result<()> {
    let s = field_to_vtk(sys, full)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
