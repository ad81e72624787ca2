//! Waveguide ports imposed by restricting the approximation space.
//!
//! On a port line the trace of the field is confined to the span of the
//! retained modes, `u_Γ = D a`, where column `k` of `D` holds the trace
//! coefficients of mode `k`. Element contributions are transformed as
//! `D_e† K_e D_e` and every port carries one unknown per mode.
//!
//! With the phase reference at the port plane and the outward derivative of
//! `Σ (a_k - 2 α_k) e_k e^{±jβ_k z}`, the boundary term contributes
//!
//! ```text
//! M_ik = jβ_k e_iᴴ B e_k,        g_i = 2 Σ_k α_k jβ_k e_iᴴ B e_k,
//! ```
//!
//! for either orientation of the port, where `B` is the `s_x`-weighted trace
//! mass matrix of the modal problem. The unknown `a_k` is the total modal
//! amplitude in the port plane; at an input port the reflected amplitude is
//! `a_k - α_k`.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::SVD;
use num_complex::Complex64;

use crate::dofs::DofMap2D;
use crate::error::{Error, Result};
use crate::mesh::Mesh2D;
use crate::modal1d::{csr_mul, ModeSet};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const J: Complex64 = Complex64::new(0.0, 1.0);

/// Rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-10;

/// Trace dofs of one port expressed through the mode amplitudes.
#[derive(Debug, Clone)]
pub struct RestrictionMap {
    /// Global dof of each free trace dof, in trace order.
    pub constrained: Vec<usize>,
    /// `n_trace × n_modes`.
    pub d: Array2<Complex64>,
}

impl RestrictionMap {
    pub fn n_modes(&self) -> usize {
        self.d.ncols()
    }

    /// Prolongs mode amplitudes to trace coefficients.
    pub fn prolong(&self, a: ArrayView1<Complex64>) -> Array1<Complex64> {
        self.d.dot(&a)
    }
}

/// Builds `D` from the mode vectors and checks that it has full column rank.
pub fn build_restriction(trace_dofs: &[usize], ms: &ModeSet) -> Result<RestrictionMap> {
    if trace_dofs.len() != ms.dim() {
        return Err(Error::Dimension(format!(
            "port has {} trace dofs but the modes live in a space of dimension {}",
            trace_dofs.len(),
            ms.dim()
        )));
    }
    if ms.len() > trace_dofs.len() {
        return Err(Error::InvalidInput(format!(
            "{} modes requested on a trace with {} dofs",
            ms.len(),
            trace_dofs.len()
        )));
    }
    let d = ms.vectors.clone();
    check_rank(&d)?;
    Ok(RestrictionMap {
        constrained: trace_dofs.to_vec(),
        d,
    })
}

fn check_rank(d: &Array2<Complex64>) -> Result<()> {
    let n = d.ncols();
    if n == 0 {
        return Ok(());
    }
    let (_, s, _) = d.svd(false, false)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    if smax > 0.0 && smin > RANK_TOL * smax {
        return Ok(());
    }
    let norms: Vec<f64> = d.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    if let Some(k) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::RankDeficient { first: k, second: k });
    }
    let mut worst = (0, 0, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let c: Complex64 = d.column(i).iter().zip(d.column(j).iter()).map(|(a, b)| a.conj() * b).sum();
            let cos = c.norm() / (norms[i] * norms[j]);
            if cos > worst.2 {
                worst = (i, j, cos);
            }
        }
    }
    Err(Error::RankDeficient {
        first: worst.0,
        second: worst.1,
    })
}

/// `D_e† K_e D_e`.
pub fn restrict_element(k: &Array2<Complex64>, d: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    if k.nrows() != k.ncols() || k.nrows() != d.nrows() {
        return Err(Error::Dimension(format!(
            "element matrix {}x{} does not match dependency matrix {}x{}",
            k.nrows(),
            k.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let dh = d.t().mapv(|z| z.conj());
    Ok(dh.dot(&k.dot(d)))
}

/// `D_e† f_e`.
pub fn restrict_vector(f: &Array1<Complex64>, d: &Array2<Complex64>) -> Result<Array1<Complex64>> {
    if f.len() != d.nrows() {
        return Err(Error::Dimension(format!(
            "load vector of length {} does not match dependency matrix {}x{}",
            f.len(),
            d.nrows(),
            d.ncols()
        )));
    }
    Ok(d.t().mapv(|z| z.conj()).dot(f))
}

/// One waveguide port.
#[derive(Debug, Clone)]
pub struct Port {
    pub line: String,
    /// `-1.0` for a port whose outward normal is `-ẑ`, `+1.0` for `+ẑ`.
    pub normal: f64,
    pub z: f64,
    /// Normalised, biorthogonalised modes.
    pub modes: ModeSet,
    pub restriction: RestrictionMap,
    /// Incident amplitudes; all zero on an output port.
    pub incident: Vec<Complex64>,
    pub is_input: bool,
}

impl Port {
    /// Port on line `line` of `mesh`, with modes computed on the trace of
    /// that line.
    pub fn new(mesh: &Mesh2D, dofs: &DofMap2D, line: &str, normal: f64, modes: ModeSet, incident: Option<Vec<Complex64>>) -> Result<Port> {
        if normal != 1.0 && normal != -1.0 {
            return Err(Error::InvalidInput("port normal must be +1 or -1".into()));
        }
        let ids = mesh.line(line)?;
        let z = mesh.nodes[ids[0]][1];
        let trace = crate::mesh::extract_trace(mesh, line)?;
        if trace.nodes.len() != modes.mesh.nodes.len()
            || trace.nodes.iter().zip(&modes.mesh.nodes).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::Mesh(format!("modes of port `{line}` were computed on a different cross-section mesh")));
        }
        if modes.space.order != dofs.order || (0..trace.segments.len()).any(|s| trace.flip(s) != modes.space.flip(s)) {
            return Err(Error::Mesh(format!(
                "trace space of port `{line}` does not match the 2D space (order or edge orientation)"
            )));
        }
        let trace_dofs = dofs.trace_dofs(&trace)?;
        let restriction = build_restriction(&trace_dofs, &modes)?;
        let n = modes.len();
        let is_input = incident.is_some();
        let incident = match incident {
            Some(a) if a.len() > n => {
                return Err(Error::InvalidInput(format!(
                    "{} incident amplitudes given for {} modes on port `{line}`",
                    a.len(),
                    n
                )));
            }
            Some(mut a) => {
                a.resize(n, ZERO);
                a
            }
            None => vec![ZERO; n],
        };
        Ok(Port {
            line: line.to_string(),
            normal,
            z,
            modes,
            restriction,
            incident,
            is_input,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }
}

/// `C_ik = e_iᴴ B e_k`.
fn conjugated_cross(ms: &ModeSet) -> Result<Array2<Complex64>> {
    if ms.kappa.is_none() {
        return Err(Error::InvalidInput("port modes have no normalisation constants".into()));
    }
    let n = ms.len();
    let mut c = Array2::zeros((n, n));
    let bv: Vec<Array1<Complex64>> = (0..n).map(|k| csr_mul(&ms.b, ms.vector(k))).collect();
    for i in 0..n {
        let ei = ms.vector(i);
        for k in 0..n {
            c[[i, k]] = ei.iter().zip(bv[k].iter()).map(|(a, b)| a.conj() * b).sum();
        }
    }
    Ok(c)
}

/// `M_ik = jβ_k e_iᴴ B e_k`.
pub fn port_boundary_matrix(port: &Port) -> Result<Array2<Complex64>> {
    let mut c = conjugated_cross(&port.modes)?;
    for ((_, k), v) in c.indexed_iter_mut() {
        *v *= J * port.modes.beta[k];
    }
    Ok(c)
}

/// `g_i = 2 Σ_k α_k jβ_k e_iᴴ B e_k`.
pub fn port_source_vector(port: &Port) -> Result<Array1<Complex64>> {
    if !port.is_input && port.incident.iter().any(|a| *a != ZERO) {
        return Err(Error::InvalidInput(format!(
            "incident amplitudes given on output port `{}`",
            port.line
        )));
    }
    let m = port_boundary_matrix(port)?;
    let a = Array1::from(port.incident.clone());
    Ok(m.dot(&a).mapv(|z| 2.0 * z))
}

/// Load of a current sheet on an interior line that launches
/// `Σ α_k e_k e^{-jβ_k |z - z0|}` to both sides:
/// `f_t = Σ_k 2 jβ_k α_k (B e_k)_t` on the trace dofs of the line.
pub fn current_plane_source(ms: &ModeSet, alpha: &[Complex64], trace_dofs: &[usize]) -> Result<Vec<(usize, Complex64)>> {
    if alpha.len() > ms.len() {
        return Err(Error::InvalidInput(format!(
            "{} amplitudes for {} modes",
            alpha.len(),
            ms.len()
        )));
    }
    if trace_dofs.len() != ms.dim() {
        return Err(Error::Dimension(format!(
            "source line has {} trace dofs, modes have {}",
            trace_dofs.len(),
            ms.dim()
        )));
    }
    let mut v = Array1::<Complex64>::zeros(ms.dim());
    for (k, a) in alpha.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let c = 2.0 * J * ms.beta[k] * a;
        v.zip_mut_with(&ms.vector(k), |x, e| *x += c * e);
    }
    let bv = csr_mul(&ms.b, v.view());
    Ok(trace_dofs.iter().copied().zip(bv).collect())
}

/// Granularity at which port-adjacent elements are restricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "size")]
pub enum PatchGrouping {
    PerElement,
    /// Consecutive elements along the port, this many per patch.
    Grouped(usize),
    PerPort,
}

/// Elements per patch unless configured.
pub const DEFAULT_PATCH_SIZE: usize = 8;

impl Default for PatchGrouping {
    fn default() -> Self {
        PatchGrouping::Grouped(DEFAULT_PATCH_SIZE)
    }
}

/// Elements touching the port's trace dofs, ordered along the line and
/// split into patches.
pub fn group_port_patches(mesh: &Mesh2D, dofs: &DofMap2D, port: &Port, grouping: PatchGrouping) -> Result<Vec<Vec<usize>>> {
    let mut elems = dofs.touching(mesh, &port.restriction.constrained);
    let cx = |t: usize| mesh.triangles[t].iter().map(|&n| mesh.nodes[n][0]).sum::<f64>();
    elems.sort_by(|&a, &b| cx(a).total_cmp(&cx(b)).then(a.cmp(&b)));
    Ok(match grouping {
        PatchGrouping::PerElement => elems.into_iter().map(|t| vec![t]).collect(),
        PatchGrouping::Grouped(0) => {
            return Err(Error::InvalidInput("patch size must be positive".into()));
        }
        PatchGrouping::Grouped(n) => elems.chunks(n).map(|c| c.to_vec()).collect(),
        PatchGrouping::PerPort => {
            if elems.is_empty() {
                Vec::new()
            } else {
                vec![elems]
            }
        }
    })
}
