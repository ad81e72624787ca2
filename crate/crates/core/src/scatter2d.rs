//! Scalar TE scattering problem on a triangle mesh.
//!
//! Weak form over the mesh with stretched coordinates:
//!
//! ```text
//! ∫ c_xx ∂_xE ∂_xφ* + c_zz ∂_zE ∂_zφ* - k0² n² c_mass E φ* dΩ = ∫ f φ* dΩ
//! ```
//!
//! with homogeneous Dirichlet conditions on the chosen boundary tags. Element
//! blocks are kept after assembly so that ports can later be imposed by
//! restricting the elements that touch them.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::Inverse;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dofs::DofMap2D;
use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, PmlZone};
use crate::pml::{scalar_coeffs, Stretch, PML_EXTRA_DEGREE};
use crate::quadrature::QuadRule;
use crate::sparse::{gmres, CsrMatrix, GmresOptions, SparseLu, Triplets};
use crate::wpbc::{
    group_port_patches, port_boundary_matrix, port_source_vector, restrict_element, restrict_vector, PatchGrouping, Port,
};
use crate::{refractive_index, Materials};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Volume source `f(x, z)`.
pub type Source<'a> = &'a (dyn Fn(f64, f64) -> Complex64 + Sync);

#[derive(Clone, Copy, Default)]
pub struct AssemblyOptions<'a> {
    /// Eliminate element bubbles before the global assembly.
    pub condense: bool,
    pub grouping: PatchGrouping,
    pub source: Option<Source<'a>>,
}

/// Role of a global dof in the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofStatus {
    Free,
    Dirichlet,
    /// Row `row` of the restriction of port `port`.
    Constrained { port: usize, row: usize },
    /// Bubble eliminated at element level.
    Condensed,
}

#[derive(Debug, Clone)]
struct Condensed {
    face: Vec<usize>,
    /// `K_ff⁻¹ K_fb`.
    kinv_kfb: Array2<Complex64>,
    /// `K_ff⁻¹ f_f`.
    kinv_f: Array1<Complex64>,
}

/// Element matrix and load on the dofs the element contributes to.
#[derive(Debug, Clone)]
pub struct ElementBlock {
    pub tri: usize,
    pub dofs: Vec<usize>,
    pub k: Array2<Complex64>,
    pub f: Array1<Complex64>,
    condensed: Option<Condensed>,
}

/// Unknown of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    Dof(usize),
    Mode { port: usize, mode: usize },
}

#[derive(Debug, Clone)]
pub struct ScatterSystem {
    pub mesh: Mesh2D,
    pub dofs: DofMap2D,
    pub elements: Vec<ElementBlock>,
    pub status: Vec<DofStatus>,
    pub ports: Vec<Port>,
    pub grouping: PatchGrouping,
    /// Loads on global dofs, e.g. current sheets.
    pub line_loads: Vec<(usize, Complex64)>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<Complex64>,
    /// Reduced index of each global dof (`usize::MAX` if none).
    pub reduced_of: Vec<usize>,
    /// Offset of each port's mode unknowns.
    pub master_offset: Vec<usize>,
    pub unknowns: Vec<Unknown>,
    /// Human-readable list of applied conditions.
    pub applied: Vec<String>,
}

impl ScatterSystem {
    pub fn dim(&self) -> usize {
        self.unknowns.len()
    }

    /// Location of a reduced unknown.
    pub fn describe(&self, r: usize) -> String {
        match self.unknowns.get(r) {
            Some(Unknown::Dof(g)) => self.dofs.describe(&self.mesh, *g),
            Some(Unknown::Mode { port, mode }) => {
                format!("mode {mode} of port `{}`", self.ports[*port].line)
            }
            None => format!("unknown {r} (out of range)"),
        }
    }

    /// Global coefficients from a reduced solution.
    pub fn prolong(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "solution has {} entries, system has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut full = vec![ZERO; self.dofs.n_dofs()];
        for (g, st) in self.status.iter().enumerate() {
            match *st {
                DofStatus::Free => full[g] = x[self.reduced_of[g]],
                DofStatus::Dirichlet => full[g] = ZERO,
                DofStatus::Constrained { port, row } => {
                    let off = self.master_offset[port];
                    let d = &self.ports[port].restriction.d;
                    full[g] = (0..d.ncols()).map(|k| d[[row, k]] * x[off + k]).sum();
                }
                DofStatus::Condensed => {}
            }
        }
        for el in &self.elements {
            if let Some(c) = &el.condensed {
                let xb = Array1::from_iter(el.dofs.iter().map(|&g| full[g]));
                let xf = &c.kinv_f - &c.kinv_kfb.dot(&xb);
                for (&g, v) in c.face.iter().zip(xf.iter()) {
                    full[g] = *v;
                }
            }
        }
        Ok(full)
    }

    fn build(&mut self) -> Result<()> {
        // Numbering: free and Dirichlet dofs in global order, then modes.
        let n = self.dofs.n_dofs();
        self.reduced_of = vec![usize::MAX; n];
        self.unknowns.clear();
        for g in 0..n {
            if matches!(self.status[g], DofStatus::Free | DofStatus::Dirichlet) {
                self.reduced_of[g] = self.unknowns.len();
                self.unknowns.push(Unknown::Dof(g));
            }
        }
        self.master_offset.clear();
        for (p, port) in self.ports.iter().enumerate() {
            self.master_offset.push(self.unknowns.len());
            self.unknowns.extend((0..port.n_modes()).map(|mode| Unknown::Mode { port: p, mode }));
        }
        let dim = self.unknowns.len();

        let mut claimed = vec![false; self.elements.len()];
        let by_tri: HashMap<usize, usize> = self.elements.iter().enumerate().map(|(i, e)| (e.tri, i)).collect();
        let mut patches: Vec<Vec<usize>> = Vec::new();
        for port in &self.ports {
            for patch in group_port_patches(&self.mesh, &self.dofs, port, self.grouping)? {
                let ids: Vec<usize> = patch
                    .iter()
                    .map(|t| by_tri[t])
                    .filter(|&i| !std::mem::replace(&mut claimed[i], true))
                    .collect();
                if !ids.is_empty() {
                    patches.push(ids);
                }
            }
        }

        let mut trip = Triplets::new(dim, dim);
        let mut rhs = vec![ZERO; dim];
        for (i, el) in self.elements.iter().enumerate() {
            if claimed[i] {
                continue;
            }
            let map: Vec<Option<usize>> = el
                .dofs
                .iter()
                .map(|&g| match self.status[g] {
                    DofStatus::Free => Some(self.reduced_of[g]),
                    _ => None,
                })
                .collect();
            for (a, ra) in map.iter().enumerate() {
                let Some(ra) = *ra else { continue };
                rhs[ra] += el.f[a];
                for (b, rb) in map.iter().enumerate() {
                    if let Some(rb) = *rb {
                        trip.push(ra, rb, el.k[[a, b]]);
                    }
                }
            }
        }

        let restricted: Vec<Restricted> = patches
            .par_iter()
            .map(|ids| self.restrict_patch(ids))
            .collect::<Result<_>>()?;
        for r in restricted {
            for (a, &ra) in r.cols.iter().enumerate() {
                rhs[ra] += r.f[a];
                for (b, &rb) in r.cols.iter().enumerate() {
                    if r.pattern[[a, b]] {
                        trip.push(ra, rb, r.k[[a, b]]);
                    }
                }
            }
        }

        for (p, port) in self.ports.iter().enumerate() {
            let off = self.master_offset[p];
            let m = port_boundary_matrix(port)?;
            let g = port_source_vector(port)?;
            for ((i, k), v) in m.indexed_iter() {
                trip.push(off + i, off + k, *v);
            }
            for (i, v) in g.iter().enumerate() {
                rhs[off + i] += v;
            }
        }

        for &(g, v) in &self.line_loads {
            match self.status[g] {
                DofStatus::Free => rhs[self.reduced_of[g]] += v,
                DofStatus::Constrained { port, row } => {
                    let off = self.master_offset[port];
                    let d = &self.ports[port].restriction.d;
                    for k in 0..d.ncols() {
                        rhs[off + k] += d[[row, k]].conj() * v;
                    }
                }
                DofStatus::Dirichlet => {}
                DofStatus::Condensed => {
                    return Err(Error::InvalidInput(format!(
                        "load on condensed dof {}",
                        self.dofs.describe(&self.mesh, g)
                    )));
                }
            }
        }

        for g in 0..n {
            if self.status[g] == DofStatus::Dirichlet {
                trip.push(self.reduced_of[g], self.reduced_of[g], ONE);
            }
        }
        self.matrix = trip.to_csr();
        self.rhs = rhs;
        Ok(())
    }

    /// Sums the elements of a patch and restricts the sum.
    fn restrict_patch(&self, ids: &[usize]) -> Result<Restricted> {
        let mut local: Vec<usize> = Vec::new();
        let mut index: HashMap<usize, usize> = HashMap::new();
        for &i in ids {
            for &g in &self.elements[i].dofs {
                if self.status[g] == DofStatus::Dirichlet {
                    continue;
                }
                index.entry(g).or_insert_with(|| {
                    local.push(g);
                    local.len() - 1
                });
            }
        }
        let np = local.len();
        let mut k = Array2::<Complex64>::zeros((np, np));
        let mut s = Array2::<f64>::zeros((np, np));
        let mut f = Array1::<Complex64>::zeros(np);
        for &i in ids {
            let el = &self.elements[i];
            for (a, ga) in el.dofs.iter().enumerate() {
                let Some(&la) = index.get(ga) else { continue };
                f[la] += el.f[a];
                for (b, gb) in el.dofs.iter().enumerate() {
                    if let Some(&lb) = index.get(gb) {
                        k[[la, lb]] += el.k[[a, b]];
                        s[[la, lb]] = 1.0;
                    }
                }
            }
        }
        let mut cols: Vec<usize> = Vec::new();
        let mut col_of: HashMap<usize, usize> = HashMap::new();
        let mut ports_seen: Vec<usize> = Vec::new();
        for &g in &local {
            match self.status[g] {
                DofStatus::Free => {
                    col_of.insert(self.reduced_of[g], cols.len());
                    cols.push(self.reduced_of[g]);
                }
                DofStatus::Constrained { port, .. } if !ports_seen.contains(&port) => {
                    ports_seen.push(port);
                    let off = self.master_offset[port];
                    for m in 0..self.ports[port].n_modes() {
                        col_of.insert(off + m, cols.len());
                        cols.push(off + m);
                    }
                }
                _ => {}
            }
        }
        let mut d = Array2::<Complex64>::zeros((np, cols.len()));
        for (l, &g) in local.iter().enumerate() {
            match self.status[g] {
                DofStatus::Free => d[[l, col_of[&self.reduced_of[g]]]] = ONE,
                DofStatus::Constrained { port, row } => {
                    let off = self.master_offset[port];
                    let dp = &self.ports[port].restriction.d;
                    for m in 0..dp.ncols() {
                        d[[l, col_of[&(off + m)]]] = dp[[row, m]];
                    }
                }
                _ => {}
            }
        }
        // Structural pattern of the restricted block: |D|ᵀ S |D| > 0.
        let dabs = d.mapv(|z| if z == ZERO { 0.0 } else { 1.0 });
        let pattern = dabs.t().dot(&s.dot(&dabs)).mapv(|v| v > 0.0);
        Ok(Restricted {
            k: restrict_element(&k, &d)?,
            f: restrict_vector(&f, &d)?,
            cols,
            pattern,
        })
    }
}

struct Restricted {
    /// Reduced ids of the block's rows and columns.
    cols: Vec<usize>,
    k: Array2<Complex64>,
    f: Array1<Complex64>,
    pattern: Array2<bool>,
}

/// Element matrix and load of triangle `t`.
pub fn element_system(
    mesh: &Mesh2D,
    dofs: &DofMap2D,
    t: usize,
    k0: f64,
    n: f64,
    stretch: &Stretch,
    quad: &QuadRule,
    source: Option<Source<'_>>,
) -> (Array2<Complex64>, Array1<Complex64>) {
    let [a, b, c] = mesh.triangles[t];
    let (p0, p1, p2) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    // Rows of J⁻ᵀ map reference gradients to physical ones.
    let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
    let nb = dofs.basis.len();
    let flips = dofs.flips(t);
    let mut k = Array2::<Complex64>::zeros((nb, nb));
    let mut f = Array1::<Complex64>::zeros(nb);
    let mut gx = vec![0.0; nb];
    let mut gz = vec![0.0; nb];
    let k2 = k0 * k0 * n * n;
    for (pt, w) in quad.points.iter().zip(&quad.weights) {
        let x = p0[0] + jac[0][0] * pt[0] + jac[0][1] * pt[1];
        let z = p0[1] + jac[1][0] * pt[0] + jac[1][1] * pt[1];
        let (cxx, czz, cm) = scalar_coeffs(stretch.sx(x), stretch.sz(z)).unwrap_or((ONE, ONE, ONE));
        let v = dofs.basis.eval(*pt, &flips);
        let wd = w * det.abs();
        for i in 0..nb {
            let g = v.grads[i];
            gx[i] = inv_t[0][0] * g[0] + inv_t[0][1] * g[1];
            gz[i] = inv_t[1][0] * g[0] + inv_t[1][1] * g[1];
        }
        for i in 0..nb {
            for j in 0..nb {
                k[[i, j]] += (cxx * (gx[i] * gx[j]) + czz * (gz[i] * gz[j]) - cm * (k2 * v.values[i] * v.values[j])) * wd;
            }
        }
        if let Some(src) = source {
            let s = src(x, z) * wd;
            for i in 0..nb {
                f[i] += s * v.values[i];
            }
        }
    }
    (k, f)
}

/// Assembles the volume problem with Dirichlet conditions on
/// `dirichlet_tags` and no ports.
pub fn assemble_scatter(
    mesh: &Mesh2D,
    materials: &Materials,
    k0: f64,
    order: usize,
    stretch: &Stretch,
    dirichlet_tags: &[&str],
    opts: AssemblyOptions<'_>,
) -> Result<ScatterSystem> {
    if !(k0 >= 0.0) {
        return Err(Error::InvalidInput(format!("k0 must be non-negative, got {k0}")));
    }
    let dofs = DofMap2D::new(mesh, order, dirichlet_tags)?;
    let n_of_tri = mesh
        .tri_region
        .iter()
        .map(|&r| {
            mesh.regions
                .get(r)
                .ok_or_else(|| Error::Mesh(format!("triangle refers to undefined region {r}")))
                .and_then(|reg| refractive_index(materials, reg))
        })
        .collect::<Result<Vec<f64>>>()?;
    let quad = QuadRule::triangle_for_degree(2 * order + 2);
    let quad_pml = QuadRule::triangle_for_degree(2 * order + 2 + PML_EXTRA_DEGREE);
    let in_pml: Vec<bool> = mesh.tri_region.iter().map(|&r| mesh.regions[r].zone != PmlZone::None).collect();
    let face_start = dofs.basis.face_offset();
    let condense = opts.condense && dofs.n_faces > 0;

    let elements: Vec<ElementBlock> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let rule = if in_pml[t] && !stretch.is_trivial() { &quad_pml } else { &quad };
            let (k, f) = element_system(mesh, &dofs, t, k0, n_of_tri[t], stretch, rule, opts.source);
            let all = dofs.element_dofs(mesh, t);
            if !condense {
                return Ok(ElementBlock {
                    tri: t,
                    dofs: all,
                    k,
                    f,
                    condensed: None,
                });
            }
            let nb = all.len();
            let (bi, fi) = (0..face_start, face_start..nb);
            let kbb = k.slice(ndarray::s![bi.clone(), bi.clone()]).to_owned();
            let kbf = k.slice(ndarray::s![bi.clone(), fi.clone()]).to_owned();
            let kfb = k.slice(ndarray::s![fi.clone(), bi.clone()]).to_owned();
            let kff = k.slice(ndarray::s![fi.clone(), fi.clone()]).to_owned();
            let kff_inv = kff.inv().map_err(|e| Error::Singular {
                dof: dofs.face_dof(t, 0),
                entity: format!("bubble block of triangle {t}: {e}"),
            })?;
            let kinv_kfb = kff_inv.dot(&kfb);
            let kinv_f = kff_inv.dot(&f.slice(ndarray::s![fi.clone()]));
            let kr = &kbb - &kbf.dot(&kinv_kfb);
            let fr = &f.slice(ndarray::s![bi.clone()]) - &kbf.dot(&kinv_f);
            Ok(ElementBlock {
                tri: t,
                dofs: all[bi].to_vec(),
                k: kr,
                f: fr,
                condensed: Some(Condensed {
                    face: all[fi].to_vec(),
                    kinv_kfb,
                    kinv_f,
                }),
            })
        })
        .collect::<Result<_>>()?;

    let status: Vec<DofStatus> = (0..dofs.n_dofs())
        .map(|g| {
            if dofs.dirichlet[g] {
                DofStatus::Dirichlet
            } else if condense && g >= dofs.face_dof(0, 0) {
                DofStatus::Condensed
            } else {
                DofStatus::Free
            }
        })
        .collect();
    let mut applied = Vec::new();
    if !dirichlet_tags.is_empty() {
        applied.push(format!("dirichlet on {}", dirichlet_tags.join(", ")));
    }
    if condense {
        applied.push("static condensation of bubbles".into());
    }
    let mut sys = ScatterSystem {
        mesh: mesh.clone(),
        dofs,
        elements,
        status,
        ports: Vec::new(),
        grouping: opts.grouping,
        line_loads: Vec::new(),
        matrix: CsrMatrix::zeros(0, 0),
        rhs: Vec::new(),
        reduced_of: Vec::new(),
        master_offset: Vec::new(),
        unknowns: Vec::new(),
        applied,
    };
    sys.build()?;
    Ok(sys)
}

/// Imposes waveguide ports by restricting their trace dofs to the mode
/// span and adding the port terms.
pub fn apply_wpbc(mut sys: ScatterSystem, ports: Vec<Port>) -> Result<ScatterSystem> {
    for port in ports {
        let p = sys.ports.len();
        for (row, &g) in port.restriction.constrained.iter().enumerate() {
            match sys.status.get(g) {
                Some(DofStatus::Free) => sys.status[g] = DofStatus::Constrained { port: p, row },
                Some(DofStatus::Constrained { port: q, .. }) => {
                    return Err(Error::InvalidInput(format!(
                        "{} belongs to both port `{}` and port `{}`",
                        sys.dofs.describe(&sys.mesh, g),
                        sys.ports[*q].line,
                        port.line
                    )));
                }
                Some(st) => {
                    return Err(Error::InvalidInput(format!(
                        "trace dof {} of port `{}` is {:?}",
                        sys.dofs.describe(&sys.mesh, g),
                        port.line,
                        st
                    )));
                }
                None => {
                    return Err(Error::Mesh(format!(
                        "port `{}` refers to dof {g} outside the mesh space",
                        port.line
                    )));
                }
            }
        }
        sys.applied.push(format!(
            "port `{}` with {} modes{}",
            port.line,
            port.n_modes(),
            if port.is_input { " (input)" } else { "" }
        ));
        sys.ports.push(port);
    }
    sys.build()?;
    Ok(sys)
}

/// Adds loads on global dofs (e.g. from a current sheet).
pub fn add_loads(mut sys: ScatterSystem, loads: Vec<(usize, Complex64)>, label: &str) -> Result<ScatterSystem> {
    let n = sys.dofs.n_dofs();
    if let Some(&(g, _)) = loads.iter().find(|(g, _)| *g >= n) {
        return Err(Error::Dimension(format!("load on dof {g} beyond {n} dofs")));
    }
    sys.line_loads.extend(loads);
    sys.applied.push(label.to_string());
    sys.build()?;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, Default)]
pub enum LinearSolver {
    #[default]
    Direct,
    Gmres(GmresOptions),
}

#[derive(Debug, Clone)]
pub struct ScatterSolution {
    /// Reduced unknowns.
    pub reduced: Vec<Complex64>,
    /// Coefficients of every global dof.
    pub full: Vec<Complex64>,
    /// Mode unknowns of each port.
    pub amplitudes: Vec<Vec<Complex64>>,
    /// `‖A x - b‖ / ‖b‖`.
    pub residual: f64,
    pub iterations: Option<usize>,
}

pub fn solve(sys: &ScatterSystem, solver: LinearSolver) -> Result<ScatterSolution> {
    let a = &sys.matrix;
    let b = &sys.rhs;
    let (x, iterations) = match solver {
        LinearSolver::Direct => {
            let lu = SparseLu::factor(a).map_err(|e| match e {
                Error::Singular { dof, .. } => Error::Singular {
                    dof,
                    entity: sys.describe(dof),
                },
                other => other,
            })?;
            (lu.solve(b)?, None)
        }
        LinearSolver::Gmres(opts) => {
            let r = gmres(a, b, opts)?;
            (r.x, Some(r.iterations))
        }
    };
    let ax = a.matvec(&x)?;
    let bn = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let rn = ax.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    let residual = if bn > 0.0 { rn / bn } else { rn };
    let full = sys.prolong(&x)?;
    let amplitudes = sys
        .ports
        .iter()
        .enumerate()
        .map(|(p, port)| x[sys.master_offset[p]..sys.master_offset[p] + port.n_modes()].to_vec())
        .collect();
    Ok(ScatterSolution {
        reduced: x,
        full,
        amplitudes,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_materials() -> Materials {
        [("air".to_string(), 1.0)].into_iter().collect()
    }

    #[test]
    fn laplacian_limit() {
        let m = Mesh2D::rectangle(1.0, 1.0, 2, 2, "air").unwrap();
        let sys = assemble_scatter(&m, &unit_materials(), 0.0, 2, &Stretch::none(), &[], AssemblyOptions::default()).unwrap();
        // Constants lie in the kernel of the pure stiffness matrix.
        let ones: Vec<Complex64> = (0..sys.dim())
            .map(|r| match sys.unknowns[r] {
                Unknown::Dof(g) if g < m.nodes.len() => ONE,
                _ => ZERO,
            })
            .collect();
        let y = sys.matrix.matvec(&ones).unwrap();
        assert!(y.iter().all(|v| v.norm() < 1e-12));
        assert!(sys.matrix.symmetry_defect() < 1e-14);
    }

    #[test]
    fn reference_element_stiffness() {
        // Right triangle (0,0), (1,0), (0,1) with p = 1.
        let mesh = Mesh2D {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            tri_region: vec![0],
            boundary_edges: vec![],
            regions: vec![crate::mesh::Region {
                name: "air".into(),
                material: "air".into(),
                zone: crate::mesh::PmlZone::None,
            }],
            lines: Default::default(),
            pml_strips: vec![],
        };
        let dofs = DofMap2D::new(&mesh, 1, &[]).unwrap();
        let q = QuadRule::triangle_for_degree(4);
        let (k, _) = element_system(&mesh, &dofs, 0, 0.0, 1.0, &Stretch::none(), &q, None);
        let hand = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[[i, j]].re - hand[i][j]).abs() < 1e-14);
            }
        }
        // Mass part: area/12 (1 + δ_ij), with k0 n = 1.
        let (k1, _) = element_system(&mesh, &dofs, 0, 1.0, 1.0, &Stretch::none(), &q, None);
        let m01 = -(k1[[0, 1]].re - k[[0, 1]].re);
        assert!((m01 - 0.5 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_rows_are_identity() {
        let m = Mesh2D::rectangle(1.0, 1.0, 3, 3, "air").unwrap();
        let sys = assemble_scatter(
            &m,
            &unit_materials(),
            2.0,
            3,
            &Stretch::none(),
            &["left", "right", "bottom", "top"],
            AssemblyOptions::default(),
        )
        .unwrap();
        for g in 0..sys.dofs.n_dofs() {
            if sys.status[g] == DofStatus::Dirichlet {
                let r = sys.reduced_of[g];
                let (cols, vals) = sys.matrix.row(r);
                assert_eq!(cols, &[r]);
                assert_eq!(vals, &[ONE]);
            }
        }
        assert!(sys.matrix.is_pattern_symmetric());
    }

    #[test]
    fn missing_material_is_reported() {
        let m = Mesh2D::rectangle(1.0, 1.0, 1, 1, "glass").unwrap();
        let err = assemble_scatter(&m, &unit_materials(), 1.0, 1, &Stretch::none(), &[], AssemblyOptions::default()).unwrap_err();
        assert!(err.to_string().contains("glass"));
    }
}
