//! Global numbering of the hierarchical H1 space on a triangle mesh.
//!
//! Vertex `v` → `v`; edge `e`, function `j` → `n_v + e (p - 1) + j`;
//! face `t`, bubble `f` → `n_v + n_e (p - 1) + t n_f + f`.

use std::collections::BTreeSet;

use crate::basis::ShapeBasis;
use crate::error::{Error, Result};
use crate::mesh::{EdgeTopology, Mesh1D, Mesh2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofEntity {
    Vertex(usize),
    /// Global edge and hierarchical index `k - 2`.
    Edge(usize, usize),
    /// Triangle and bubble index.
    Face(usize, usize),
}

#[derive(Debug, Clone)]
pub struct DofMap2D {
    pub order: usize,
    pub basis: ShapeBasis,
    pub topo: EdgeTopology,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_faces: usize,
    /// Dofs fixed to zero.
    pub dirichlet: Vec<bool>,
}

impl DofMap2D {
    /// Numbering for `mesh` with homogeneous Dirichlet conditions on the
    /// boundary edges carrying any of `dirichlet_tags`.
    pub fn new(mesh: &Mesh2D, order: usize, dirichlet_tags: &[&str]) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("polynomial order must be >= 1".into()));
        }
        if mesh.triangles.is_empty() {
            return Err(Error::InvalidInput("mesh has no triangles".into()));
        }
        let basis = ShapeBasis::triangle(order);
        let topo = mesh.edge_topology();
        let n_vertices = mesh.nodes.len();
        let n_edges = topo.edges.len();
        let mut map = DofMap2D {
            order,
            n_faces: basis.face_count(),
            basis,
            topo,
            n_vertices,
            n_edges,
            dirichlet: Vec::new(),
        };
        let mut fixed = vec![false; map.len(mesh)];
        for be in &mesh.boundary_edges {
            if !dirichlet_tags.contains(&be.tag.as_str()) {
                continue;
            }
            let e = map.topo.find(be.nodes[0], be.nodes[1]).ok_or_else(|| {
                Error::Mesh(format!("boundary edge {:?} is not a mesh edge", be.nodes))
            })?;
            fixed[be.nodes[0]] = true;
            fixed[be.nodes[1]] = true;
            for j in 0..order - 1 {
                fixed[map.edge_dof(e, j)] = true;
            }
        }
        map.dirichlet = fixed;
        Ok(map)
    }

    /// Total number of dofs, Dirichlet ones included.
    pub fn len(&self, mesh: &Mesh2D) -> usize {
        self.n_vertices + self.n_edges * (self.order - 1) + mesh.triangles.len() * self.n_faces
    }

    pub fn n_dofs(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn edge_dof(&self, e: usize, j: usize) -> usize {
        self.n_vertices + e * (self.order - 1) + j
    }

    pub fn face_dof(&self, t: usize, f: usize) -> usize {
        self.n_vertices + self.n_edges * (self.order - 1) + t * self.n_faces + f
    }

    /// Global dofs of triangle `t` in local basis order.
    pub fn element_dofs(&self, mesh: &Mesh2D, t: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.basis.len());
        d.extend_from_slice(&mesh.triangles[t]);
        for &e in &self.topo.tri_edges[t] {
            d.extend((0..self.order - 1).map(|j| self.edge_dof(e, j)));
        }
        d.extend((0..self.n_faces).map(|f| self.face_dof(t, f)));
        d
    }

    pub fn flips(&self, t: usize) -> [bool; 3] {
        self.topo.tri_flips[t]
    }

    pub fn entity(&self, dof: usize) -> DofEntity {
        let p1 = self.order - 1;
        if dof < self.n_vertices {
            DofEntity::Vertex(dof)
        } else if dof < self.n_vertices + self.n_edges * p1 {
            let k = dof - self.n_vertices;
            DofEntity::Edge(k / p1, k % p1)
        } else {
            let k = dof - self.n_vertices - self.n_edges * p1;
            DofEntity::Face(k / self.n_faces, k % self.n_faces)
        }
    }

    /// Human-readable location of a dof.
    pub fn describe(&self, mesh: &Mesh2D, dof: usize) -> String {
        match self.entity(dof) {
            DofEntity::Vertex(v) => {
                let [x, z] = mesh.nodes[v];
                format!("vertex {v} at (x={x}, z={z})")
            }
            DofEntity::Edge(e, j) => {
                let [a, b] = self.topo.edges[e];
                format!("edge {e} ({a}-{b}), function {}", j + 2)
            }
            DofEntity::Face(t, f) => format!("triangle {t}, bubble {f}"),
        }
    }

    /// Global dof of every free 1D dof of a trace extracted from this mesh,
    /// in the free order of a [`crate::modal1d::TraceSpace`] of the same
    /// order.
    pub fn trace_dofs(&self, trace: &Mesh1D) -> Result<Vec<usize>> {
        let n = trace.nodes.len();
        if trace.global_ids.len() != n {
            return Err(Error::Mesh("trace mesh carries no parent node ids".into()));
        }
        let p1 = self.order - 1;
        let mut full = Vec::with_capacity(n + trace.segments.len() * p1);
        full.extend_from_slice(&trace.global_ids);
        for &[a, b] in &trace.segments {
            let (ga, gb) = (trace.global_ids[a], trace.global_ids[b]);
            let e = self
                .topo
                .find(ga, gb)
                .ok_or_else(|| Error::Mesh(format!("trace segment {ga}-{gb} is not a mesh edge")))?;
            full.extend((0..p1).map(|j| self.edge_dof(e, j)));
        }
        // Free order drops the two end nodes and keeps the rest in place.
        Ok(full
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 0 && *i != n - 1)
            .map(|(_, d)| *d)
            .collect())
    }

    /// Triangles that own at least one of `dofs`.
    pub fn touching(&self, mesh: &Mesh2D, dofs: &[usize]) -> Vec<usize> {
        let set: BTreeSet<usize> = dofs.iter().copied().collect();
        (0..mesh.triangles.len())
            .filter(|&t| self.element_dofs(mesh, t).iter().any(|d| set.contains(d)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_dirichlet() {
        let m = Mesh2D::rectangle(1.0, 1.0, 2, 2, "air").unwrap();
        let d = DofMap2D::new(&m, 3, &["left", "right", "bottom", "top"]).unwrap();
        // 9 vertices, 16 edges, 8 triangles with one bubble each.
        assert_eq!(d.n_dofs(), 9 + 16 * 2 + 8);
        let free = d.dirichlet.iter().filter(|f| !**f).count();
        // Interior: 1 vertex, 8 interior edges (2 dofs each), 8 bubbles.
        assert_eq!(free, 1 + 8 * 2 + 8);
        for t in 0..8 {
            let e = d.element_dofs(&m, t);
            assert_eq!(e.len(), 10);
            assert!(e.iter().all(|&g| g < d.n_dofs()));
        }
        assert!(matches!(d.entity(9 + 32), DofEntity::Face(0, 0)));
    }

    #[test]
    fn trace_dofs_follow_line() {
        let mut m = Mesh2D::rectangle(1.0, 1.0, 3, 2, "air").unwrap();
        m.add_line_at_z("mid", 0.5).unwrap();
        let d = DofMap2D::new(&m, 4, &[]).unwrap();
        let tr = crate::mesh::extract_trace(&m, "mid").unwrap();
        let td = d.trace_dofs(&tr).unwrap();
        // 4 nodes, 3 segments with 3 functions; two end nodes removed.
        assert_eq!(td.len(), 4 + 9 - 2);
        assert_eq!(&td[..2], &tr.global_ids[1..3]);
        assert!(matches!(d.entity(td[2]), DofEntity::Edge(_, 0)));
        // The two corner triangles meeting the line only at an end node
        // carry no free trace dof.
        assert_eq!(d.touching(&m, &td).len(), 10);
    }
}
