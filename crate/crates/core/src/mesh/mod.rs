//! Simplicial meshes: closed polylines (n = 1), closed triangle surfaces
//! (n = 2) and planar triangle domains with labelled boundary.

mod fields;
mod generate;
mod io;
mod measure;

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use fields::{scaled_sphere_with_analytic_fields, FieldSource, ImmersionFields, SphereResolution};
pub use generate::{
    gen_annulus, gen_circle, gen_disk, gen_ellipse_curve, gen_ellipse_domain, gen_icosphere, gen_perturbed_sphere,
    gen_sector, gen_wedge, gen_wedge_off_center, gen_wedge_with_cutoff,
};
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use measure::{cell_measures, weighted_measure, weighted_measure_with};

pub type Vec3 = Vector3<f64>;

/// Minimum admissible cell quality `inradius / circumradius`.
pub const QUALITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Curve,
    Surface,
    PlanarDomain,
}

/// Boundary part of a planar domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryLabel {
    /// The free hypersurface `M` (Dirichlet part).
    #[serde(rename = "M")]
    M,
    /// A face of the ambient cone (natural boundary condition).
    #[serde(rename = "cone-face")]
    ConeFace,
    /// The ring cutting the cone vertex out of the domain.
    #[serde(rename = "cutoff")]
    Cutoff,
}

/// A boundary edge oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub verts: [usize; 2],
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    vertices: Vec<Vec3>,
    kind: CellKind,
    segments: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    vertex_labels: BTreeMap<usize, BoundaryLabel>,
}

/// `inradius / circumradius` of a triangle (1/2 for equilateral).
pub fn triangle_quality(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (la, lb, lc) = ((b - c).norm(), (c - a).norm(), (a - b).norm());
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let denom = la * lb * lc * (la + lb + lc);
    if denom == 0.0 {
        0.0
    } else {
        8.0 * area * area / denom
    }
}

fn signed_area_xy(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

fn edge_label(a: Option<BoundaryLabel>, b: Option<BoundaryLabel>) -> BoundaryLabel {
    use BoundaryLabel::*;
    match (a, b) {
        (Some(M), Some(M)) => M,
        (Some(Cutoff), _) | (_, Some(Cutoff)) => Cutoff,
        (None, None) => M,
        _ => ConeFace,
    }
}

impl SimplicialMesh {
    /// Closed, consistently oriented polyline.
    pub fn curve(vertices: Vec<Vec3>, segments: Vec<[usize; 2]>) -> Result<Self> {
        let mesh = SimplicialMesh {
            vertices,
            kind: CellKind::Curve,
            segments,
            triangles: Vec::new(),
            boundary: Vec::new(),
            vertex_labels: BTreeMap::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Closed, consistently oriented triangle surface.
    pub fn surface(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = SimplicialMesh {
            vertices,
            kind: CellKind::Surface,
            segments: Vec::new(),
            triangles,
            boundary: Vec::new(),
            vertex_labels: BTreeMap::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Planar triangulated domain in the `z = 0` plane. Boundary edges get
    /// their labels from the vertex labels; unlabelled boundaries are `M`.
    pub fn planar_domain(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        vertex_labels: BTreeMap<usize, BoundaryLabel>,
    ) -> Result<Self> {
        let mut mesh = SimplicialMesh {
            vertices,
            kind: CellKind::PlanarDomain,
            segments: Vec::new(),
            triangles,
            boundary: Vec::new(),
            vertex_labels,
        };
        mesh.validate()?;
        mesh.boundary = mesh.extract_boundary()?;
        if mesh.vertex_labels.is_empty() {
            for e in &mesh.boundary {
                for v in e.verts {
                    mesh.vertex_labels.insert(v, BoundaryLabel::M);
                }
            }
        } else {
            for e in &mesh.boundary {
                for v in e.verts {
                    if !mesh.vertex_labels.contains_key(&v) {
                        return Err(LabError::MissingLabels(format!("boundary vertex {v} has no label")));
                    }
                }
            }
        }
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if nv == 0 {
            return Err(LabError::InvalidTopology("mesh has no vertices".into()));
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(LabError::InvalidTopology("non-finite vertex coordinate".into()));
        }
        let mut used = vec![false; nv];
        match self.kind {
            CellKind::Curve => {
                if self.segments.is_empty() {
                    return Err(LabError::InvalidTopology("curve has no segments".into()));
                }
                let mut outgoing = vec![0usize; nv];
                let mut incoming = vec![0usize; nv];
                for (k, s) in self.segments.iter().enumerate() {
                    if s[0] >= nv || s[1] >= nv || s[0] == s[1] {
                        return Err(LabError::InvalidTopology(format!("segment {k} has invalid vertices {s:?}")));
                    }
                    if (self.vertices[s[0]] - self.vertices[s[1]]).norm() == 0.0 {
                        return Err(LabError::DegenerateCell { cell: k, reason: "zero-length segment".into() });
                    }
                    outgoing[s[0]] += 1;
                    incoming[s[1]] += 1;
                    used[s[0]] = true;
                    used[s[1]] = true;
                }
                for v in 0..nv {
                    if outgoing[v] != 1 || incoming[v] != 1 {
                        return Err(LabError::InvalidTopology(format!(
                            "curve vertex {v} has {} outgoing and {} incoming segments",
                            outgoing[v], incoming[v]
                        )));
                    }
                }
            }
            CellKind::Surface | CellKind::PlanarDomain => {
                if self.triangles.is_empty() {
                    return Err(LabError::InvalidTopology("mesh has no triangles".into()));
                }
                let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
                for (k, t) in self.triangles.iter().enumerate() {
                    if t.iter().any(|&i| i >= nv) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                        return Err(LabError::InvalidTopology(format!("triangle {k} has invalid vertices {t:?}")));
                    }
                    let (a, b, c) = (&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]);
                    let q = triangle_quality(a, b, c);
                    if q < QUALITY_FLOOR {
                        return Err(LabError::DegenerateCell { cell: k, reason: format!("quality {q:e} below floor") });
                    }
                    if self.kind == CellKind::PlanarDomain {
                        if a.z != 0.0 || b.z != 0.0 || c.z != 0.0 {
                            return Err(LabError::InvalidTopology("planar domain vertex off the z = 0 plane".into()));
                        }
                        if signed_area_xy(a, b, c) <= 0.0 {
                            return Err(LabError::InvalidTopology(format!("triangle {k} is not counter-clockwise")));
                        }
                    }
                    for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                        if directed.insert(e, k).is_some() {
                            return Err(LabError::InvalidTopology(format!(
                                "directed edge {e:?} repeated: inconsistent orientation or non-manifold edge"
                            )));
                        }
                    }
                    t.iter().for_each(|&i| used[i] = true);
                }
                if self.kind == CellKind::Surface {
                    for &(a, b) in directed.keys() {
                        if !directed.contains_key(&(b, a)) {
                            return Err(LabError::InvalidTopology(format!(
                                "edge ({a}, {b}) belongs to a single triangle; closed surfaces need two"
                            )));
                        }
                    }
                }
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(LabError::InvalidTopology(format!("vertex {v} is not used by any cell")));
        }
        Ok(())
    }

    fn extract_boundary(&self) -> Result<Vec<BoundaryEdge>> {
        let mut directed = std::collections::HashSet::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                directed.insert(e);
            }
        }
        let mut edges: Vec<BoundaryEdge> = Vec::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if !directed.contains(&(b, a)) {
                    let label = edge_label(self.vertex_labels.get(&a).copied(), self.vertex_labels.get(&b).copied());
                    edges.push(BoundaryEdge { verts: [a, b], label });
                }
            }
        }
        if edges.is_empty() {
            return Err(LabError::InvalidTopology("planar domain has no boundary".into()));
        }
        // boundary must be a disjoint union of loops
        let mut out_count: HashMap<usize, usize> = HashMap::new();
        let mut in_count: HashMap<usize, usize> = HashMap::new();
        for e in &edges {
            *out_count.entry(e.verts[0]).or_default() += 1;
            *in_count.entry(e.verts[1]).or_default() += 1;
        }
        for (v, c) in &out_count {
            if *c != 1 || in_count.get(v) != Some(&1) {
                return Err(LabError::InvalidTopology(format!("boundary is pinched at vertex {v}")));
            }
        }
        Ok(edges)
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn segments(&self) -> &[[usize; 2]] {
        &self.segments
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn cell_count(&self) -> usize {
        match self.kind {
            CellKind::Curve => self.segments.len(),
            _ => self.triangles.len(),
        }
    }

    /// Cells as vertex index lists (2 or 3 entries).
    pub fn cells(&self) -> Vec<Vec<usize>> {
        match self.kind {
            CellKind::Curve => self.segments.iter().map(|s| s.to_vec()).collect(),
            _ => self.triangles.iter().map(|t| t.to_vec()).collect(),
        }
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn vertex_labels(&self) -> &BTreeMap<usize, BoundaryLabel> {
        &self.vertex_labels
    }

    pub fn vertex_label(&self, v: usize) -> Option<BoundaryLabel> {
        self.vertex_labels.get(&v).copied()
    }

    pub fn is_closed(&self) -> bool {
        self.kind != CellKind::PlanarDomain
    }

    /// Intrinsic dimension `n` of the cells.
    pub fn cell_dim(&self) -> usize {
        match self.kind {
            CellKind::Curve => 1,
            _ => 2,
        }
    }

    /// Dimension of the Euclidean space the mesh lives in (2 when planar).
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            CellKind::PlanarDomain => 2,
            _ if self.vertices.iter().all(|v| v.z == 0.0) => 2,
            _ => 3,
        }
    }

    /// Vertex `i` as a point of `R^ambient_dim`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let v = &self.vertices[i];
        match self.ambient_dim() {
            2 => vec![v.x, v.y],
            _ => vec![v.x, v.y, v.z],
        }
    }

    /// Longest edge length.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in self.cells() {
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    h = h.max((self.vertices[c[i]] - self.vertices[c[j]]).norm());
                }
            }
        }
        h
    }

    pub fn min_quality(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_quality(&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertices.len() as i64;
        match self.kind {
            CellKind::Curve => v - self.segments.len() as i64,
            _ => {
                let mut edges = std::collections::HashSet::new();
                for t in &self.triangles {
                    for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                        edges.insert((a.min(b), a.max(b)));
                    }
                }
                v - edges.len() as i64 + self.triangles.len() as i64
            }
        }
    }

    /// Applies a vertex map, keeping connectivity and labels. The map must
    /// preserve orientation.
    pub fn mapped(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        let vertices: Vec<Vec3> = self.vertices.iter().map(f).collect();
        match self.kind {
            CellKind::Curve => SimplicialMesh::curve(vertices, self.segments.clone()),
            CellKind::Surface => SimplicialMesh::surface(vertices, self.triangles.clone()),
            CellKind::PlanarDomain => {
                SimplicialMesh::planar_domain(vertices, self.triangles.clone(), self.vertex_labels.clone())
            }
        }
    }

    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        let tv = Vec3::new(
            t.first().copied().unwrap_or(0.0),
            t.get(1).copied().unwrap_or(0.0),
            if self.kind == CellKind::PlanarDomain { 0.0 } else { t.get(2).copied().unwrap_or(0.0) },
        );
        self.mapped(|v| v + tv)
    }

    /// For each vertex of a curve, its (previous, next) neighbours.
    pub fn curve_neighbours(&self) -> Vec<(usize, usize)> {
        let mut prev = vec![usize::MAX; self.vertices.len()];
        let mut next = vec![usize::MAX; self.vertices.len()];
        for s in &self.segments {
            next[s[0]] = s[1];
            prev[s[1]] = s[0];
        }
        prev.into_iter().zip(next).collect()
    }

    /// For each boundary vertex of a planar domain: (previous, next) along
    /// the oriented boundary and the labels of the incoming/outgoing edges.
    pub fn boundary_neighbours(&self) -> BTreeMap<usize, BoundaryVertex> {
        let mut out: BTreeMap<usize, BoundaryVertex> = BTreeMap::new();
        for e in &self.boundary {
            let [a, b] = e.verts;
            out.entry(a).or_insert_with(BoundaryVertex::empty).next = Some((b, e.label));
            out.entry(b).or_insert_with(BoundaryVertex::empty).prev = Some((a, e.label));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVertex {
    pub prev: Option<(usize, BoundaryLabel)>,
    pub next: Option<(usize, BoundaryLabel)>,
}

impl BoundaryVertex {
    fn empty() -> Self {
        BoundaryVertex { prev: None, next: None }
    }
}
