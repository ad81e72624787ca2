//! Structured triangular meshes of slab waveguides, 1D port traces, and
//! plain-text import.
//!
//! Coordinates are `(x, z)` in µm: `x` is transverse, `z` the propagation
//! direction. Each rectangular cell is split along its `(x0, z0)–(x1, z1)`
//! diagonal, so every triangle is positively oriented.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pml::Axis;

/// Which PML stretch, if any, is active in a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmlZone {
    None,
    X,
    Z,
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub material: String,
    pub zone: PmlZone,
}

/// Geometric placement of one absorbing strip; the absorption strength is
/// chosen later from the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlStrip {
    pub axis: Axis,
    pub start: f64,
    pub width: f64,
    pub outward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: String,
}

#[derive(Debug, Clone, Default)]
pub struct Mesh2D {
    /// `(x, z)` node coordinates.
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Index into `regions` per triangle.
    pub tri_region: Vec<usize>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub regions: Vec<Region>,
    /// Named lines of constant `z`, node ids ordered by increasing `x`.
    pub lines: BTreeMap<String, Vec<usize>>,
    pub pml_strips: Vec<PmlStrip>,
}

/// Edge connectivity derived from the triangles. Edges are stored as
/// `[lo, hi]` node pairs, which is also their global orientation.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    pub edges: Vec<[usize; 2]>,
    pub tri_edges: Vec<[usize; 3]>,
    /// `true` where the local edge direction opposes the global one.
    pub tri_flips: Vec<[bool; 3]>,
    pub edge_tris: Vec<Vec<usize>>,
    lookup: HashMap<[usize; 2], usize>,
}

impl EdgeTopology {
    pub fn find(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&[a.min(b), a.max(b)]).copied()
    }
}

pub const LOCAL_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl Mesh2D {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn edge_topology(&self) -> EdgeTopology {
        let mut lookup = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        let mut tri_flips = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut te = [0; 3];
            let mut tf = [false; 3];
            for (e, &(i, j)) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (tri[i], tri[j]);
                let key = [a.min(b), a.max(b)];
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_tris.push(Vec::new());
                    edges.len() - 1
                });
                edge_tris[id].push(t);
                te[e] = id;
                tf[e] = a > b;
            }
            tri_edges.push(te);
            tri_flips.push(tf);
        }
        EdgeTopology {
            edges,
            tri_edges,
            tri_flips,
            edge_tris,
            lookup,
        }
    }

    /// Checks orientation, boundary-edge ownership, conformity and the
    /// matching of paired port/evaluation lines.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is not positively oriented")));
            }
            if self.tri_region[t] >= self.regions.len() {
                return Err(Error::Mesh(format!("triangle {t} has an undefined region")));
            }
        }
        let topo = self.edge_topology();
        for (e, tris) in topo.edge_tris.iter().enumerate() {
            if tris.len() > 2 {
                return Err(Error::Mesh(format!("edge {:?} is shared by {} triangles", topo.edges[e], tris.len())));
            }
        }
        for be in &self.boundary_edges {
            match topo.find(be.nodes[0], be.nodes[1]) {
                Some(e) if topo.edge_tris[e].len() == 1 => {}
                _ => {
                    return Err(Error::Mesh(format!(
                        "boundary edge {:?} does not belong to exactly one triangle",
                        be.nodes
                    )))
                }
            }
        }
        for (name, ids) in &self.lines {
            if let Some(pair) = self.lines.get(&format!("{name}_e")) {
                if pair.len() != ids.len() {
                    return Err(Error::Mesh(format!("lines {name} and {name}_e have different node counts")));
                }
                for (a, b) in ids.iter().zip(pair) {
                    if (self.nodes[*a][0] - self.nodes[*b][0]).abs() > 1e-12 {
                        return Err(Error::Mesh(format!("lines {name} and {name}_e do not match in x")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn line(&self, tag: &str) -> Result<&[usize]> {
        self.lines
            .get(tag)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownLine(tag.to_string()))
    }

    pub fn region_index(&self, name: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.name == name)
    }

    /// Nodes lying on boundary edges with one of the given tags.
    pub fn nodes_on_boundary(&self, tags: &[&str]) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| tags.contains(&e.tag.as_str()))
            .flat_map(|e| e.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Registers the row of nodes at height `z` as a named line.
    pub fn add_line_at_z(&mut self, name: &str, z: f64) -> Result<()> {
        let mut ids: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| (self.nodes[i][1] - z).abs() < 1e-9)
            .collect();
        if ids.len() < 2 {
            return Err(Error::Mesh(format!("no node row at z = {z} for line `{name}`")));
        }
        ids.sort_by(|a, b| self.nodes[*a][0].total_cmp(&self.nodes[*b][0]));
        self.lines.insert(name.to_string(), ids);
        Ok(())
    }

    /// Rectangle `[0, lx] × [0, lz]` with `nx × nz` cells and one material.
    /// Boundary tags: `left` (x = 0), `right`, `bottom` (z = 0), `top`.
    pub fn rectangle(lx: f64, lz: f64, nx: usize, nz: usize, material: &str) -> Result<Mesh2D> {
        if !(lx > 0.0 && lz > 0.0) || nx == 0 || nz == 0 {
            return Err(Error::InvalidInput("rectangle needs positive size and cell counts".into()));
        }
        let xs: Vec<f64> = (0..=nx).map(|i| lx * i as f64 / nx as f64).collect();
        let zs: Vec<f64> = (0..=nz).map(|i| lz * i as f64 / nz as f64).collect();
        let region = Region {
            name: material.to_string(),
            material: material.to_string(),
            zone: PmlZone::None,
        };
        Ok(structured(&xs, &zs, vec![region], |_, _| 0, Vec::new()))
    }
}

/// Tensor grid split into triangles; `region_of(xc, zc)` picks the region
/// of each triangle from its centroid.
fn structured(
    xs: &[f64],
    zs: &[f64],
    regions: Vec<Region>,
    region_of: impl Fn(f64, f64) -> usize,
    pml_strips: Vec<PmlStrip>,
) -> Mesh2D {
    let nx = xs.len();
    let nz = zs.len();
    let mut nodes = Vec::with_capacity(nx * nz);
    for &z in zs {
        for &x in xs {
            nodes.push([x, z]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (nz - 1));
    let mut tri_region = Vec::with_capacity(triangles.capacity());
    for iz in 0..nz - 1 {
        for ix in 0..nx - 1 {
            let n00 = iz * nx + ix;
            let n10 = n00 + 1;
            let n01 = n00 + nx;
            let n11 = n01 + 1;
            for tri in [[n00, n10, n11], [n00, n11, n01]] {
                let xc = (nodes[tri[0]][0] + nodes[tri[1]][0] + nodes[tri[2]][0]) / 3.0;
                let zc = (nodes[tri[0]][1] + nodes[tri[1]][1] + nodes[tri[2]][1]) / 3.0;
                triangles.push(tri);
                tri_region.push(region_of(xc, zc));
            }
        }
    }
    let mut boundary_edges = Vec::new();
    for ix in 0..nx - 1 {
        boundary_edges.push(BoundaryEdge {
            nodes: [ix, ix + 1],
            tag: "bottom".into(),
        });
        let top = (nz - 1) * nx;
        boundary_edges.push(BoundaryEdge {
            nodes: [top + ix, top + ix + 1],
            tag: "top".into(),
        });
    }
    for iz in 0..nz - 1 {
        boundary_edges.push(BoundaryEdge {
            nodes: [iz * nx, (iz + 1) * nx],
            tag: "left".into(),
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [iz * nx + nx - 1, (iz + 1) * nx + nx - 1],
            tag: "right".into(),
        });
    }
    Mesh2D {
        nodes,
        triangles,
        tri_region,
        boundary_edges,
        regions,
        lines: BTreeMap::new(),
        pml_strips,
    }
}

/// How the slab's longitudinal ends are terminated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PortLayout {
    /// Domain `[0, L]` with waveguide ports on both ends.
    Wpbc,
    /// Domain `[-d_z, L + d_z]` with z-PML strips behind both port planes.
    PmlBacked { pml_width_z: f64 },
}

/// Straight slab or a single core-width step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    pub core_width: f64,
    /// Core width for `z > discontinuity_z`.
    #[serde(default)]
    pub second_core_width: Option<f64>,
    #[serde(default)]
    pub discontinuity_z: Option<f64>,
    /// Cladding thickness between the widest core and the x-PML.
    pub cladding: f64,
    pub pml_width_x: f64,
    /// Distance between the two port planes.
    pub length: f64,
    /// Distance from each port plane to its evaluation line.
    pub eval_offset: f64,
    /// Target element size.
    pub h: f64,
    pub layout: PortLayout,
}

/// Region names produced by [`build_slab_mesh`].
pub const CORE: &str = "core";
pub const CLADDING: &str = "cladding";

impl SlabGeometry {
    /// Half-width of the interior (non-PML) cross-section.
    pub fn half_extent(&self) -> f64 {
        self.max_core_width() / 2.0 + self.cladding
    }

    pub fn max_core_width(&self) -> f64 {
        self.core_width.max(self.second_core_width.unwrap_or(0.0))
    }

    pub fn core_width_at(&self, z: f64) -> f64 {
        match (self.second_core_width, self.discontinuity_z) {
            (Some(w2), Some(zd)) if z > zd => w2,
            _ => self.core_width,
        }
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("core_width", self.core_width),
            ("cladding", self.cladding),
            ("pml_width_x", self.pml_width_x),
            ("length", self.length),
            ("eval_offset", self.eval_offset),
            ("h", self.h),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.second_core_width.is_some() != self.discontinuity_z.is_some() {
            return Err(Error::InvalidInput(
                "second_core_width and discontinuity_z must be given together".into(),
            ));
        }
        if let Some(w2) = self.second_core_width {
            if !(w2 > 0.0) {
                return Err(Error::InvalidInput(format!("second_core_width must be positive, got {w2}")));
            }
        }
        if let Some(zd) = self.discontinuity_z {
            if !(zd > self.eval_offset && zd < self.length - self.eval_offset) {
                return Err(Error::InvalidInput(format!(
                    "discontinuity at z = {zd} must lie strictly between the evaluation lines"
                )));
            }
        }
        if 2.0 * self.eval_offset > self.length {
            return Err(Error::InvalidInput(format!(
                "evaluation offset {} exceeds half the port distance {}",
                self.eval_offset, self.length
            )));
        }
        if let PortLayout::PmlBacked { pml_width_z } = self.layout {
            if !(pml_width_z > 0.0) {
                return Err(Error::InvalidInput(format!("pml_width_z must be positive, got {pml_width_z}")));
            }
        }
        Ok(())
    }
}

fn steps_of(len: f64, h: f64, what: &str) -> Result<usize> {
    let k = len / h;
    let r = k.round();
    if (k - r).abs() > 1e-8 * k.max(1.0) || r < 1.0 {
        return Err(Error::InvalidInput(format!(
            "{what} = {len} is not a positive multiple of the element size h = {h}; \
             choose h so that every port and evaluation offset falls on a node row"
        )));
    }
    Ok(r as usize)
}

fn graded_axis(breaks: &mut Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=n {
            out.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
        }
    }
    out
}

/// Structured mesh of a slab waveguide with lines `in` (z = 0), `out`
/// (z = L), `in_e` (z = d) and `out_e` (z = L - d).
///
/// Regions: `core`, `cladding`, and for PML strips `<material>_pml_x`,
/// `<material>_pml_z`, `<material>_pml_corner`. Boundary tags `left`,
/// `right`, `bottom`, `top`.
pub fn build_slab_mesh(geom: &SlabGeometry) -> Result<Mesh2D> {
    geom.check()?;
    let h = geom.h;
    let xi = geom.half_extent();
    let xo = xi + geom.pml_width_x;
    let mut xb = vec![-xo, -xi, xi, xo, -geom.core_width / 2.0, geom.core_width / 2.0];
    if let Some(w2) = geom.second_core_width {
        xb.push(-w2 / 2.0);
        xb.push(w2 / 2.0);
    }
    let xs = graded_axis(&mut xb, h);

    let l = geom.length;
    let d = geom.eval_offset;
    let nl = steps_of(l, h, "port distance")?;
    steps_of(d, h, "evaluation offset")?;
    if let Some(zd) = geom.discontinuity_z {
        steps_of(zd, h, "discontinuity position")?;
    }
    let (z0, nz) = match geom.layout {
        PortLayout::Wpbc => (0.0, nl),
        PortLayout::PmlBacked { pml_width_z } => {
            let nd = steps_of(pml_width_z, h, "pml_width_z")?;
            (-(nd as f64) * h, nl + 2 * nd)
        }
    };
    let zs: Vec<f64> = (0..=nz)
        .map(|i| {
            let z = z0 + i as f64 * h;
            if (z - l).abs() < 1e-9 * l.max(1.0) {
                l
            } else if z.abs() < 1e-12 {
                0.0
            } else {
                z
            }
        })
        .collect();

    let mut regions = Vec::new();
    let mut index = HashMap::new();
    let zones = [
        (PmlZone::None, ""),
        (PmlZone::X, "_pml_x"),
        (PmlZone::Z, "_pml_z"),
        (PmlZone::Corner, "_pml_corner"),
    ];
    for (zone, suffix) in zones {
        for mat in [CORE, CLADDING] {
            if mat == CORE && matches!(zone, PmlZone::X | PmlZone::Corner) {
                continue;
            }
            index.insert((mat, zone), regions.len());
            regions.push(Region {
                name: format!("{mat}{suffix}"),
                material: mat.to_string(),
                zone,
            });
        }
    }
    let pml_z = !matches!(geom.layout, PortLayout::Wpbc);
    let region_of = |x: f64, z: f64| {
        let in_x = x.abs() > xi;
        let in_z = pml_z && (z < 0.0 || z > l);
        let zone = match (in_x, in_z) {
            (false, false) => PmlZone::None,
            (true, false) => PmlZone::X,
            (false, true) => PmlZone::Z,
            (true, true) => PmlZone::Corner,
        };
        let mat = if x.abs() < geom.core_width_at(z) / 2.0 { CORE } else { CLADDING };
        index[&(mat, zone)]
    };

    let mut strips = vec![
        PmlStrip {
            axis: Axis::X,
            start: xi,
            width: geom.pml_width_x,
            outward: 1.0,
        },
        PmlStrip {
            axis: Axis::X,
            start: -xi,
            width: geom.pml_width_x,
            outward: -1.0,
        },
    ];
    if let PortLayout::PmlBacked { pml_width_z } = geom.layout {
        strips.push(PmlStrip {
            axis: Axis::Z,
            start: 0.0,
            width: pml_width_z,
            outward: -1.0,
        });
        strips.push(PmlStrip {
            axis: Axis::Z,
            start: l,
            width: pml_width_z,
            outward: 1.0,
        });
    }

    let mut mesh = structured(&xs, &zs, regions, region_of, strips);
    mesh.add_line_at_z("in", 0.0)?;
    mesh.add_line_at_z("out", l)?;
    mesh.add_line_at_z("in_e", d)?;
    mesh.add_line_at_z("out_e", l - d)?;
    mesh.validate()?;
    Ok(mesh)
}

/// Cross-section of the slab at height `z` on the same x-grid as
/// [`build_slab_mesh`], with local node ids.
pub fn slab_cross_section(geom: &SlabGeometry, z: f64) -> Result<Mesh1D> {
    geom.check()?;
    let xi = geom.half_extent();
    let xo = xi + geom.pml_width_x;
    let w = geom.core_width_at(z);
    let mut xb = vec![-xo, -xi, xi, xo, -geom.core_width / 2.0, geom.core_width / 2.0];
    if let Some(w2) = geom.second_core_width {
        xb.push(-w2 / 2.0);
        xb.push(w2 / 2.0);
    }
    let xs = graded_axis(&mut xb, geom.h);
    let regions = vec![
        Region {
            name: CORE.into(),
            material: CORE.into(),
            zone: PmlZone::None,
        },
        Region {
            name: CLADDING.into(),
            material: CLADDING.into(),
            zone: PmlZone::None,
        },
        Region {
            name: format!("{CLADDING}_pml_x"),
            material: CLADDING.into(),
            zone: PmlZone::X,
        },
    ];
    let seg_region = xs
        .windows(2)
        .map(|p| {
            let xc = 0.5 * (p[0] + p[1]);
            if xc.abs() > xi {
                2
            } else if xc.abs() < w / 2.0 {
                0
            } else {
                1
            }
        })
        .collect();
    let mut m = Mesh1D::from_breaks(xs, seg_region, regions)?;
    m.pml_strips = vec![
        PmlStrip {
            axis: Axis::X,
            start: xi,
            width: geom.pml_width_x,
            outward: 1.0,
        },
        PmlStrip {
            axis: Axis::X,
            start: -xi,
            width: geom.pml_width_x,
            outward: -1.0,
        },
    ];
    Ok(m)
}

/// One-dimensional cross-section mesh.
#[derive(Debug, Clone, Default)]
pub struct Mesh1D {
    /// Strictly increasing node coordinates.
    pub nodes: Vec<f64>,
    /// Node ids in the parent 2D mesh; defines edge orientation.
    pub global_ids: Vec<usize>,
    /// `(left, right)` node indices per segment.
    pub segments: Vec<[usize; 2]>,
    pub seg_region: Vec<usize>,
    pub regions: Vec<Region>,
    pub pml_strips: Vec<PmlStrip>,
}

impl Mesh1D {
    /// Interval `[a, b]` split into `n` segments of the given material,
    /// with the parent ids equal to the local ones.
    pub fn interval(a: f64, b: f64, n: usize, material: &str) -> Result<Mesh1D> {
        if !(b > a) || n == 0 {
            return Err(Error::InvalidInput("interval needs b > a and n >= 1".into()));
        }
        let nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        Ok(Mesh1D {
            global_ids: (0..=n).collect(),
            segments: (0..n).map(|i| [i, i + 1]).collect(),
            seg_region: vec![0; n],
            regions: vec![Region {
                name: material.to_string(),
                material: material.to_string(),
                zone: PmlZone::None,
            }],
            nodes,
            pml_strips: Vec::new(),
        })
    }

    /// Nodes at the given coordinates (strictly increasing) with per-segment
    /// regions.
    pub fn from_breaks(nodes: Vec<f64>, seg_region: Vec<usize>, regions: Vec<Region>) -> Result<Mesh1D> {
        if nodes.len() < 2 || seg_region.len() != nodes.len() - 1 {
            return Err(Error::Dimension("segment regions must be one fewer than nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Mesh("1D nodes must be strictly increasing".into()));
        }
        if seg_region.iter().any(|&r| r >= regions.len()) {
            return Err(Error::Mesh("segment references an undefined region".into()));
        }
        let n = nodes.len();
        Ok(Mesh1D {
            global_ids: (0..n).collect(),
            segments: (0..n - 1).map(|i| [i, i + 1]).collect(),
            seg_region,
            regions,
            nodes,
            pml_strips: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `true` when the parent orientation of segment `s` runs right to left.
    pub fn flip(&self, s: usize) -> bool {
        let [a, b] = self.segments[s];
        self.global_ids[a] > self.global_ids[b]
    }
}

/// Cross-section along a named line. Each segment takes the region of the
/// adjacent triangle on the `+z` side, or the `-z` side at the top boundary.
pub fn extract_trace(mesh: &Mesh2D, tag: &str) -> Result<Mesh1D> {
    let ids = mesh.line(tag)?.to_vec();
    let topo = mesh.edge_topology();
    let z = mesh.nodes[ids[0]][1];
    let mut seg_region = Vec::with_capacity(ids.len() - 1);
    for w in ids.windows(2) {
        let e = topo
            .find(w[0], w[1])
            .ok_or_else(|| Error::Mesh(format!("line `{tag}` does not follow mesh edges")))?;
        let tris = &topo.edge_tris[e];
        let centroid_z = |t: usize| mesh.triangles[t].iter().map(|&n| mesh.nodes[n][1]).sum::<f64>() / 3.0;
        let t = tris
            .iter()
            .copied()
            .find(|&t| centroid_z(t) > z)
            .unwrap_or(tris[0]);
        seg_region.push(mesh.tri_region[t]);
    }
    let nodes: Vec<f64> = ids.iter().map(|&i| mesh.nodes[i][0]).collect();
    let mut m = Mesh1D::from_breaks(nodes, seg_region, mesh.regions.clone())?;
    m.global_ids = ids;
    m.pml_strips = mesh.pml_strips.iter().copied().filter(|s| s.axis == Axis::X).collect();
    Ok(m)
}

/// Reads the plain-text mesh format described in the README.
pub fn read_mesh(path: &Path) -> Result<Mesh2D> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let mut mesh = Mesh2D::default();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut region_tags: BTreeMap<String, usize> = BTreeMap::new();
    let mut declared_regions: Vec<(String, Region)> = Vec::new();
    let mut tri_tags: Vec<String> = Vec::new();

    let bad = |ln: usize, msg: &str| Error::Mesh(format!("line {}: {msg}", ln + 1));
    while let Some((ln, header)) = lines.next() {
        let mut h = header.split_whitespace();
        let section = h.next().unwrap_or("");
        let count: usize = h
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(ln, "expected `<section> <count>`"))?;
        for _ in 0..count {
            let (ln, row) = lines.next().ok_or_else(|| bad(ln, "unexpected end of file"))?;
            let f: Vec<&str> = row.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(ln, "malformed number"))
            };
            let id = |i: usize| -> Result<i64> {
                f.get(i)
                    .and_then(|s| s.parse::<i64>().ok())
                    .ok_or_else(|| bad(ln, "malformed id"))
            };
            let node = |i: usize, map: &HashMap<i64, usize>| -> Result<usize> {
                let raw = id(i)?;
                map.get(&raw).copied().ok_or_else(|| bad(ln, &format!("unknown node {raw}")))
            };
            match section {
                "nodes" => {
                    node_ids.insert(id(0)?, mesh.nodes.len());
                    mesh.nodes.push([num(1)?, num(2)?]);
                }
                "triangles" => {
                    mesh.triangles.push([node(1, &node_ids)?, node(2, &node_ids)?, node(3, &node_ids)?]);
                    tri_tags.push(f.get(4).ok_or_else(|| bad(ln, "missing region tag"))?.to_string());
                }
                "edges" => {
                    mesh.boundary_edges.push(BoundaryEdge {
                        nodes: [node(1, &node_ids)?, node(2, &node_ids)?],
                        tag: f.get(3).ok_or_else(|| bad(ln, "missing boundary tag"))?.to_string(),
                    });
                }
                "regions" => {
                    if f.len() < 3 {
                        return Err(bad(ln, "expected `tag name material [zone]`"));
                    }
                    let zone = match f.get(3).copied().unwrap_or("none") {
                        "none" => PmlZone::None,
                        "x" => PmlZone::X,
                        "z" => PmlZone::Z,
                        "corner" => PmlZone::Corner,
                        other => return Err(bad(ln, &format!("unknown PML zone `{other}`"))),
                    };
                    declared_regions.push((
                        f[0].to_string(),
                        Region {
                            name: f[1].to_string(),
                            material: f[2].to_string(),
                            zone,
                        },
                    ));
                }
                "lines" => {
                    let name = f.first().ok_or_else(|| bad(ln, "missing line name"))?;
                    let ids = (1..f.len())
                        .map(|i| node(i, &node_ids))
                        .collect::<Result<Vec<_>>>()?;
                    mesh.lines.insert(name.to_string(), ids);
                }
                other => return Err(bad(ln, &format!("unknown section `{other}`"))),
            }
        }
    }
    for (tag, region) in declared_regions {
        region_tags.insert(tag, mesh.regions.len());
        mesh.regions.push(region);
    }
    for tag in &tri_tags {
        if !region_tags.contains_key(tag) {
            region_tags.insert(tag.clone(), mesh.regions.len());
            mesh.regions.push(Region {
                name: tag.clone(),
                material: tag.clone(),
                zone: PmlZone::None,
            });
        }
    }
    mesh.tri_region = tri_tags.iter().map(|t| region_tags[t]).collect();
    for ids in mesh.lines.values_mut() {
        ids.sort_by(|a, b| mesh.nodes[*a][0].total_cmp(&mesh.nodes[*b][0]));
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Legacy VTK ASCII unstructured grid of the mesh, with the region index
/// as cell data.
pub fn mesh_to_vtk(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    crate::vtk::write_header(&mut s, "slab mesh", &mesh.nodes, &mesh.triangles);
    s.push_str(&format!("CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default\n", mesh.triangles.len()));
    for r in &mesh.tri_region {
        s.push_str(&format!("{r}\n"));
    }
    s
}
