//! Density-weighted P1 operators on simplicial meshes: stiffness and mass
//! matrices, the drift Laplacian, mean curvature and the f-divergence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{LabError, Result};
use crate::mesh::{cell_measures, CellKind, FieldSource, ImmersionFields, SimplicialMesh, Vec3};
use crate::quadrature::{gauss_legendre, TriangleRule};
use crate::spaceform::{AmbientSpace, Tangent};
use crate::sparse::CsrMatrix;

/// Smallest admissible interior angle (radians) before cotangent weights
/// are considered overflowed.
pub const MIN_ANGLE: f64 = 1e-6;

/// Tolerance of the tangency precondition of [`f_divergence`].
pub const TANGENCY_TOL: f64 = 1e-8;

/// How `e^{-f}` is sampled inside each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightQuadrature {
    #[default]
    Midpoint,
    ThreePoint,
}

/// Source of the density `f`.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    /// Evaluated pointwise in the Euclidean coordinates of the mesh.
    Field(&'a DensityField),
    /// Vertex values of `f`, interpolated linearly.
    Vertex(&'a [f64]),
}

impl<'a> From<&'a DensityField> for Weight<'a> {
    fn from(f: &'a DensityField) -> Self {
        Weight::Field(f)
    }
}

impl<'a> From<&'a ImmersionFields> for Weight<'a> {
    fn from(f: &'a ImmersionFields) -> Self {
        Weight::Vertex(&f.f_val)
    }
}

#[derive(Debug, Clone)]
pub struct OperatorPack {
    /// `∫⟨∇φ_i, ∇φ_j⟩ e^{-f}`.
    pub stiffness: CsrMatrix,
    /// `∫φ_i φ_j e^{-f}`.
    pub mass: CsrMatrix,
    /// Row sums of `mass`.
    pub lumped: Vec<f64>,
    /// Per-cell factor multiplying the unweighted stiffness.
    pub cell_weights: Vec<f64>,
    pub vertex_count: usize,
}

fn coords(p: &Vec3, dim: usize) -> Vec<f64> {
    p.as_slice()[..dim].to_vec()
}

/// Gradients of the hat functions of a cell (constant inside the cell).
pub fn hat_gradients(mesh: &SimplicialMesh, cell: usize) -> Result<Vec<Vec3>> {
    let v = mesh.vertices();
    match mesh.kind() {
        CellKind::Curve => {
            let [a, b] = mesh.segments()[cell];
            let e = v[b] - v[a];
            let l2 = e.norm_squared();
            Ok(vec![-e / l2, e / l2])
        }
        _ => {
            let t = mesh.triangles()[cell];
            let (p0, p1, p2) = (v[t[0]], v[t[1]], v[t[2]]);
            let n = (p1 - p0).cross(&(p2 - p0));
            let twice_area = n.norm();
            for k in 0..3 {
                let a = v[t[k]];
                let b = v[t[(k + 1) % 3]];
                let c = v[t[(k + 2) % 3]];
                let cos = (b - a).normalize().dot(&(c - a).normalize()).clamp(-1.0, 1.0);
                let ang = cos.acos();
                if !(ang >= MIN_ANGLE) {
                    return Err(LabError::DegenerateCell { cell, reason: format!("interior angle {ang:e} rad") });
                }
            }
            let nu = n / twice_area;
            Ok((0..3)
                .map(|k| {
                    let e = v[t[(k + 2) % 3]] - v[t[(k + 1) % 3]];
                    nu.cross(&e) / twice_area
                })
                .collect())
        }
    }
}

fn quadrature_points(mesh: &SimplicialMesh, mode: WeightQuadrature) -> Vec<(Vec<f64>, f64)> {
    // barycentric coordinates and weights
    match (mesh.kind(), mode) {
        (CellKind::Curve, WeightQuadrature::Midpoint) => vec![(vec![0.5, 0.5], 1.0)],
        (CellKind::Curve, WeightQuadrature::ThreePoint) => gauss_legendre(2)
            .into_iter()
            .map(|(x, w)| {
                let t = 0.5 * (x + 1.0);
                (vec![1.0 - t, t], 0.5 * w)
            })
            .collect(),
        (_, WeightQuadrature::Midpoint) => vec![(vec![1.0 / 3.0; 3], 1.0)],
        (_, WeightQuadrature::ThreePoint) => {
            TriangleRule::ThreePoint.points().into_iter().map(|(b, w)| (b.to_vec(), w)).collect()
        }
    }
}

fn density_at(mesh: &SimplicialMesh, cell: &[usize], bary: &[f64], weight: Weight<'_>) -> f64 {
    match weight {
        Weight::Field(field) => {
            let v = mesh.vertices();
            let mut p = Vec3::zeros();
            for (k, &i) in cell.iter().enumerate() {
                p += v[i] * bary[k];
            }
            (-field.value(&coords(&p, mesh.ambient_dim()))).exp()
        }
        Weight::Vertex(f) => (-cell.iter().zip(bary).map(|(&i, b)| f[i] * b).sum::<f64>()).exp(),
    }
}

/// Assembles the weighted stiffness and mass matrices.
pub fn assemble<'a>(mesh: &SimplicialMesh, weight: impl Into<Weight<'a>>) -> Result<OperatorPack> {
    assemble_with(mesh, weight, WeightQuadrature::default())
}

pub fn assemble_with<'a>(
    mesh: &SimplicialMesh,
    weight: impl Into<Weight<'a>>,
    mode: WeightQuadrature,
) -> Result<OperatorPack> {
    let weight = weight.into();
    if let Weight::Vertex(f) = weight {
        if f.len() != mesh.vertex_count() {
            return Err(LabError::InvalidParams(format!(
                "{} vertex weights for {} vertices",
                f.len(),
                mesh.vertex_count()
            )));
        }
    }
    let nv = mesh.vertex_count();
    let cells = mesh.cells();
    let measures = cell_measures(mesh);
    let qp = quadrature_points(mesh, mode);
    let mut s_trip = Vec::with_capacity(cells.len() * 9);
    let mut m_trip = Vec::with_capacity(cells.len() * 9);
    let mut cell_weights = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let grads = hat_gradients(mesh, c)?;
        let area = measures[c];
        let samples: Vec<f64> = qp.iter().map(|(b, _)| density_at(mesh, cell, b, weight)).collect();
        let w: f64 = qp.iter().zip(&samples).map(|((_, qw), s)| qw * s).sum();
        cell_weights.push(w);
        let k = cell.len();
        for a in 0..k {
            for b in 0..k {
                s_trip.push((cell[a], cell[b], w * area * grads[a].dot(&grads[b])));
                let m = match mode {
                    WeightQuadrature::Midpoint => {
                        // exact P1 mass times the midpoint weight
                        let (diag, off) = if k == 2 { (1.0 / 3.0, 1.0 / 6.0) } else { (1.0 / 6.0, 1.0 / 12.0) };
                        w * area * if a == b { diag } else { off }
                    }
                    WeightQuadrature::ThreePoint => {
                        area * qp.iter().zip(&samples).map(|((bc, qw), s)| qw * s * bc[a] * bc[b]).sum::<f64>()
                    }
                };
                m_trip.push((cell[a], cell[b], m));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(nv, nv, &s_trip);
    let mass = CsrMatrix::from_triplets(nv, nv, &m_trip);
    let lumped = mass.row_sums();
    Ok(OperatorPack { stiffness, mass, lumped, cell_weights, vertex_count: nv })
}

impl OperatorPack {
    /// `Δ_f u = −M_L^{-1} S u` with the lumped mass.
    pub fn drift_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let su = self.stiffness.mul_vec(u);
        su.iter().zip(&self.lumped).map(|(s, m)| -s / m).collect()
    }

    /// Total weighted measure (sum of the lumped mass).
    pub fn total_measure(&self) -> f64 {
        self.lumped.iter().sum()
    }

    /// Writes `stiffness.mtx` and `mass.mtx` into `dir`.
    pub fn dump_matrix_market(&self, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, m) in [("stiffness", &self.stiffness), ("mass", &self.mass)] {
            let f = std::fs::File::create(dir.join(format!("{prefix}{name}.mtx")))?;
            let mut w = std::io::BufWriter::new(f);
            m.write_matrix_market(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Per-cell gradient of a P1 function.
pub fn cell_gradients(mesh: &SimplicialMesh, u: &[f64]) -> Result<Vec<Vec3>> {
    let cells = mesh.cells();
    let mut out = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let g = hat_gradients(mesh, c)?;
        out.push(cell.iter().zip(&g).map(|(&i, gi)| gi * u[i]).sum());
    }
    Ok(out)
}

/// Vertex gradients recovered by measure-weighted averaging of cell gradients.
pub fn vertex_gradients(mesh: &SimplicialMesh, u: &[f64]) -> Result<Vec<Vec3>> {
    let cg = cell_gradients(mesh, u)?;
    let meas = cell_measures(mesh);
    let mut acc = vec![Vec3::zeros(); mesh.vertex_count()];
    let mut wsum = vec![0.0; mesh.vertex_count()];
    for (c, cell) in mesh.cells().iter().enumerate() {
        for &i in cell {
            acc[i] += cg[c] * meas[c];
            wsum[i] += meas[c];
        }
    }
    Ok(acc.into_iter().zip(wsum).map(|(a, w)| a / w).collect())
}

/// Dual (mixed Voronoi) vertex areas for surfaces; half the adjacent
/// segment lengths for curves.
pub fn dual_areas(mesh: &SimplicialMesh) -> Vec<f64> {
    let v = mesh.vertices();
    let mut area = vec![0.0; mesh.vertex_count()];
    match mesh.kind() {
        CellKind::Curve => {
            for s in mesh.segments() {
                let l = (v[s[1]] - v[s[0]]).norm();
                area[s[0]] += 0.5 * l;
                area[s[1]] += 0.5 * l;
            }
        }
        _ => {
            for t in mesh.triangles() {
                let p = [v[t[0]], v[t[1]], v[t[2]]];
                let a = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
                let dots: Vec<f64> = (0..3).map(|k| (p[(k + 1) % 3] - p[k]).dot(&(p[(k + 2) % 3] - p[k]))).collect();
                if let Some(obtuse) = dots.iter().position(|&d| d < 0.0) {
                    for k in 0..3 {
                        area[t[k]] += if k == obtuse { 0.5 * a } else { 0.25 * a };
                    }
                } else {
                    for k in 0..3 {
                        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                        let cot_j = dots[j] / (2.0 * a);
                        let cot_l = dots[l] / (2.0 * a);
                        area[t[k]] += ((p[k] - p[l]).norm_squared() * cot_j + (p[k] - p[j]).norm_squared() * cot_l) / 8.0;
                    }
                }
            }
        }
    }
    area
}

/// Mean curvature vector `Δ_M X` per vertex, from the cotangent Laplacian of
/// the coordinates. Points inward on convex bodies; `|H| = n/ρ` on round
/// spheres. On planar domains only interior vertices are meaningful.
pub fn mean_curvature_vector(mesh: &SimplicialMesh) -> Result<Vec<Vec3>> {
    let pack = assemble(mesh, &DensityField::zero())?;
    let area = dual_areas(mesh);
    let v = mesh.vertices();
    let mut out = vec![Vec3::zeros(); v.len()];
    for axis in 0..3 {
        let x: Vec<f64> = v.iter().map(|p| p[axis]).collect();
        let sx = pack.stiffness.mul_vec(&x);
        for i in 0..v.len() {
            out[i][axis] = -sx[i] / area[i];
        }
    }
    Ok(out)
}

/// Signed enclosed area (curves) or volume (surfaces); positive when the
/// orientation of the cells makes the right-hand normals point outward.
pub fn enclosed_measure(mesh: &SimplicialMesh) -> f64 {
    let v = mesh.vertices();
    match mesh.kind() {
        CellKind::Curve => mesh.segments().iter().map(|s| 0.5 * (v[s[0]].x * v[s[1]].y - v[s[1]].x * v[s[0]].y)).sum(),
        _ => mesh.triangles().iter().map(|t| v[t[0]].dot(&v[t[1]].cross(&v[t[2]])) / 6.0).sum(),
    }
}

/// Outward unit normals of a closed curve in the plane or closed surface in
/// space (angle/area weighted averages of the cell normals).
pub fn outward_normals(mesh: &SimplicialMesh) -> Result<Vec<Vec3>> {
    if !mesh.is_closed() {
        return Err(LabError::InvalidTopology("outward normals need a closed hypersurface".into()));
    }
    let v = mesh.vertices();
    let sign = if enclosed_measure(mesh) >= 0.0 { 1.0 } else { -1.0 };
    let mut acc = vec![Vec3::zeros(); v.len()];
    match mesh.kind() {
        CellKind::Curve => {
            if mesh.ambient_dim() != 2 {
                return Err(LabError::Unsupported("curve normals need a planar curve".into()));
            }
            for s in mesh.segments() {
                let e = v[s[1]] - v[s[0]];
                let n = Vec3::new(e.y, -e.x, 0.0);
                acc[s[0]] += n;
                acc[s[1]] += n;
            }
        }
        _ => {
            for t in mesh.triangles() {
                let n = (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]]));
                for &i in t {
                    acc[i] += n;
                }
            }
        }
    }
    Ok(acc.into_iter().map(|a| a.normalize() * sign).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Outward,
    Inward,
}

/// Per-vertex extrinsic fields of a closed hypersurface embedded in
/// Euclidean space (curve in `R^2` or surface in `R^3`).
pub fn immersion_fields(mesh: &SimplicialMesh, field: &DensityField) -> Result<ImmersionFields> {
    let dim = mesh.ambient_dim();
    if mesh.cell_dim() + 1 != dim {
        return Err(LabError::Unsupported("embedded fields need a hypersurface of the ambient space".into()));
    }
    let space = AmbientSpace::euclidean(dim);
    let hv = mean_curvature_vector(mesh)?;
    let nu = outward_normals(mesh)?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut frames = Vec::new();
    let mut h = Vec::new();
    for i in 0..mesh.vertex_count() {
        let n = nu[i];
        points.push(Tangent::from_vec(mesh.point(i)));
        normals.push(Tangent::from_vec(coords(&n, dim)));
        h.push(-hv[i].dot(&n));
        let frame: Vec<Vec3> = if dim == 2 {
            vec![Vec3::new(-n.y, n.x, 0.0)]
        } else {
            let k = (0..3).min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
            let t1 = (Vec3::ith(k, 1.0) - n * n[k]).normalize();
            vec![t1, n.cross(&t1)]
        };
        frames.push(frame.iter().map(|t| Tangent::from_vec(coords(t, dim))).collect());
    }
    ImmersionFields::from_geometry(space, points, normals, frames, h, field, FieldSource::Computed)
}

/// `H_f = H − ⟨∇̄f, ν⟩` with `H = div_M ν`; inward orientation negates it.
pub fn weighted_mean_curvature(mesh: &SimplicialMesh, field: &DensityField, orientation: Orientation) -> Result<Vec<f64>> {
    let fields = immersion_fields(mesh, field)?;
    Ok(match orientation {
        Orientation::Outward => fields.hf,
        Orientation::Inward => fields.hf.iter().map(|h| -h).collect(),
    })
}

/// `|H_f − ∇̄f|² = |H|² + |(∇̄f)^⊤|²` per vertex.
pub fn hf_minus_gradf_sq(mesh: &SimplicialMesh, field: &DensityField) -> Result<Vec<f64>> {
    Ok(immersion_fields(mesh, field)?.hf_minus_gradf_sq)
}

/// A tangent vector field given per vertex (interpolated linearly) or per
/// cell (constant).
#[derive(Debug, Clone, Copy)]
pub enum TangentField<'a> {
    PerVertex(&'a [Vec3]),
    PerCell(&'a [Vec3]),
}

/// `D_f Y = div_M Y − ⟨∇̄f, Y⟩` in weak form: the vertex values satisfy
/// `Σ_i m_i (D_f Y)_i v_i = −∫⟨Y, ∇v⟩ dμ` for every P1 function `v`.
pub fn f_divergence(mesh: &SimplicialMesh, pack: &OperatorPack, y: TangentField<'_>) -> Result<Vec<f64>> {
    let cells = mesh.cells();
    let meas = cell_measures(mesh);
    let v = mesh.vertices();
    let check = |vec: &Vec3, normal_of: &dyn Fn(&Vec3) -> f64, vertex: usize| -> Result<()> {
        let nc = normal_of(vec);
        if nc.abs() > TANGENCY_TOL * vec.norm().max(1.0) {
            return Err(LabError::NonTangent { vertex, normal_component: nc });
        }
        Ok(())
    };
    let cell_vectors: Vec<Vec3> = match y {
        TangentField::PerCell(ys) => {
            if ys.len() != cells.len() {
                return Err(LabError::InvalidParams("one vector per cell expected".into()));
            }
            for (c, cell) in cells.iter().enumerate() {
                let vecs = cell_tangent_check(mesh, c);
                check(&ys[c], &|w| vecs(w), cell[0])?;
            }
            ys.to_vec()
        }
        TangentField::PerVertex(ys) => {
            if ys.len() != mesh.vertex_count() {
                return Err(LabError::InvalidParams("one vector per vertex expected".into()));
            }
            if mesh.is_closed() && mesh.cell_dim() + 1 == mesh.ambient_dim() {
                let nu = outward_normals(mesh)?;
                for i in 0..ys.len() {
                    check(&ys[i], &|w| w.dot(&nu[i]), i)?;
                }
            }
            cells
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    let mean: Vec3 = cell.iter().map(|&i| ys[i]).sum::<Vec3>() / cell.len() as f64;
                    project_to_cell(mesh, c, &mean)
                })
                .collect()
        }
    };
    let mut acc = vec![0.0; v.len()];
    for (c, cell) in cells.iter().enumerate() {
        let g = hat_gradients(mesh, c)?;
        for (k, &i) in cell.iter().enumerate() {
            acc[i] -= pack.cell_weights[c] * meas[c] * cell_vectors[c].dot(&g[k]);
        }
    }
    Ok(acc.iter().zip(&pack.lumped).map(|(a, m)| a / m).collect())
}

fn cell_tangent_check(mesh: &SimplicialMesh, c: usize) -> impl Fn(&Vec3) -> f64 + '_ {
    move |w: &Vec3| {
        let p = project_to_cell(mesh, c, w);
        let r = w - p;
        r.norm()
    }
}

fn project_to_cell(mesh: &SimplicialMesh, c: usize, w: &Vec3) -> Vec3 {
    let v = mesh.vertices();
    match mesh.kind() {
        CellKind::Curve => {
            let [a, b] = mesh.segments()[c];
            let e = (v[b] - v[a]).normalize();
            e * e.dot(w)
        }
        _ => {
            let t = mesh.triangles()[c];
            let n = (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]])).normalize();
            w - n * n.dot(w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_circle, gen_disk, gen_ellipse_curve, gen_icosphere, gen_perturbed_sphere};
    use crate::sparse::dot;
    use std::f64::consts::PI;

    fn generalized_lowest_nonzero(pack: &OperatorPack) -> f64 {
        // dense oracle for small meshes
        let n = pack.vertex_count;
        let mut s = nalgebra::DMatrix::zeros(n, n);
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, x) in pack.stiffness.row(i) {
                s[(i, j)] = x;
            }
            for (j, x) in pack.mass.row(i) {
                m[(i, j)] = x;
            }
        }
        let l = m.cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let a = &li * s * li.transpose();
        let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    }

    #[test]
    fn circle_spectrum_oracle() {
        let m = gen_circle(1.0, 64).unwrap();
        let pack = assemble(&m, &DensityField::zero()).unwrap();
        let l1 = generalized_lowest_nonzero(&pack);
        assert!((l1 - 1.0).abs() < 2e-3, "{l1}");
    }

    #[test]
    fn pack_invariants() {
        for mesh in [gen_icosphere(1.0, 2).unwrap(), gen_perturbed_sphere(1.0, 2, 0.1, 3).unwrap()] {
            let field = DensityField::Linear { v: vec![0.3, -0.2, 0.5], offset: 0.1 };
            let pack = assemble(&mesh, &field).unwrap();
            assert!(pack.stiffness.asymmetry() < 1e-14);
            assert!(pack.mass.asymmetry() < 1e-14);
            let ones = vec![1.0; mesh.vertex_count()];
            assert!(crate::sparse::norm2(&pack.stiffness.mul_vec(&ones)) < 1e-10 * pack.stiffness.norm());
            assert!(pack.lumped.iter().all(|&m| m > 0.0));
            let p3 = assemble_with(&mesh, &field, WeightQuadrature::ThreePoint).unwrap();
            let wm = crate::mesh::weighted_measure(&mesh, &field);
            assert!((p3.total_measure() - wm).abs() < 1e-12 * wm);
        }
    }

    #[test]
    fn constant_weight_scales_exactly() {
        let mesh = gen_icosphere(1.0, 1).unwrap();
        let a = assemble(&mesh, &DensityField::zero()).unwrap();
        let b = assemble(&mesh, &DensityField::constant(0.7)).unwrap();
        let s = (-0.7f64).exp();
        assert_eq!(a.stiffness.nnz(), b.stiffness.nnz());
        for i in 0..a.stiffness.values().len() {
            assert!((b.stiffness.values()[i] - s * a.stiffness.values()[i]).abs() < 1e-15);
            assert!((b.mass.values()[i] - s * a.mass.values()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn rigid_motion_invariance() {
        let mesh = gen_icosphere(1.0, 2).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let t = Vec3::new(0.3, -1.0, 2.0);
        let moved = mesh.mapped(|p| Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + t).unwrap();
        let f = DensityField::gaussian(0.4);
        let a = assemble(&mesh, &f).unwrap();
        let b = assemble(&moved, &f.translated(&[t.x, t.y, t.z])).unwrap();
        for i in 0..a.stiffness.values().len() {
            assert!((a.stiffness.values()[i] - b.stiffness.values()[i]).abs() < 1e-12);
            assert!((a.mass.values()[i] - b.mass.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_curvature() {
        let m = gen_circle(2.0, 256).unwrap();
        let h = mean_curvature_vector(&m).unwrap();
        for (i, hv) in h.iter().enumerate() {
            assert!((hv.norm() - 0.5).abs() < 0.005);
            // points to the centre
            assert!(hv.dot(&m.vertices()[i]) < 0.0);
        }
    }

    #[test]
    fn icosphere_curvature() {
        let m = gen_icosphere(1.0, 4).unwrap();
        let h = mean_curvature_vector(&m).unwrap();
        let worst = h.iter().map(|v| (v.norm() - 2.0).abs() / 2.0).fold(0.0, f64::max);
        assert!(worst < 0.02, "worst relative error {worst}");
    }

    #[test]
    fn flat_patch_is_minimal() {
        let m = gen_disk(1.0, 6).unwrap();
        let h = mean_curvature_vector(&m).unwrap();
        let boundary: std::collections::BTreeSet<usize> =
            m.boundary().iter().flat_map(|e| e.verts).collect();
        for (i, hv) in h.iter().enumerate() {
            if !boundary.contains(&i) {
                assert!(hv.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn weighted_mean_curvature_examples() {
        let c = gen_circle(1.0, 128).unwrap();
        let hf = weighted_mean_curvature(&c, &DensityField::zero(), Orientation::Outward).unwrap();
        assert!(hf.iter().all(|h| (h - 1.0).abs() < 1e-12));
        let s = gen_icosphere(2.0, 4).unwrap();
        let hf = weighted_mean_curvature(&s, &DensityField::gaussian(0.25), Orientation::Outward).unwrap();
        assert!(hf.iter().all(|h| h.abs() < 0.01));
        let s = gen_icosphere(3.0, 3).unwrap();
        let out = weighted_mean_curvature(&s, &DensityField::zero(), Orientation::Outward).unwrap();
        let inw = weighted_mean_curvature(&s, &DensityField::zero(), Orientation::Inward).unwrap();
        for (a, b) in out.iter().zip(&inw) {
            assert_eq!(*a, -*b);
            assert!((b + 2.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn reversed_curve_keeps_outward_sign() {
        let c = gen_circle(1.0, 64).unwrap();
        let v = c.vertices().to_vec();
        let segs = c.segments().iter().map(|s| [s[1], s[0]]).collect();
        let rev = SimplicialMesh::curve(v, segs).unwrap();
        let h = weighted_mean_curvature(&rev, &DensityField::zero(), Orientation::Outward).unwrap();
        assert!(h.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn hf_minus_gradf_examples() {
        let c = gen_circle(1.0, 256).unwrap();
        let q = hf_minus_gradf_sq(&c, &DensityField::linear(vec![1.0, 0.0])).unwrap();
        for (i, p) in c.vertices().iter().enumerate() {
            let th = p.y.atan2(p.x);
            assert!((q[i] - (1.0 + th.sin().powi(2))).abs() < 1e-9);
        }
        let q = hf_minus_gradf_sq(&gen_circle(0.5, 64).unwrap(), &DensityField::gaussian(1.3)).unwrap();
        assert!(q.iter().all(|x| (x - 4.0).abs() < 1e-9));
    }

    #[test]
    fn divergence_of_gradient_is_drift_laplacian() {
        let mesh = gen_perturbed_sphere(1.0, 3, 0.1, 11).unwrap();
        let field = DensityField::Linear { v: vec![0.4, 0.1, -0.3], offset: 0.0 };
        let pack = assemble(&mesh, &field).unwrap();
        let u: Vec<f64> = mesh.vertices().iter().map(|p| p.x * p.y + p.z * p.z * p.z).collect();
        let g = cell_gradients(&mesh, &u).unwrap();
        let d = f_divergence(&mesh, &pack, TangentField::PerCell(&g)).unwrap();
        let l = pack.drift_laplacian(&u);
        let scale = l.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in d.iter().zip(&l) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
        // integration by parts against v
        let v: Vec<f64> = mesh.vertices().iter().map(|p| (2.0 * p.x).sin()).collect();
        let lhs: f64 = (0..v.len()).map(|i| pack.lumped[i] * d[i] * v[i]).sum();
        let rhs = -dot(&v, &pack.stiffness.mul_vec(&u));
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        // Stokes: the drift Laplacian integrates to zero
        let total: f64 = (0..v.len()).map(|i| pack.lumped[i] * l[i]).sum();
        assert!(total.abs() < 1e-8 * crate::sparse::norm2(&u));
    }

    #[test]
    fn divergence_preconditions() {
        let mesh = gen_circle(1.0, 32).unwrap();
        let pack = assemble(&mesh, &DensityField::zero()).unwrap();
        let zero = vec![Vec3::zeros(); 32];
        assert!(f_divergence(&mesh, &pack, TangentField::PerVertex(&zero)).unwrap().iter().all(|x| *x == 0.0));
        let radial: Vec<Vec3> = mesh.vertices().to_vec();
        assert!(matches!(
            f_divergence(&mesh, &pack, TangentField::PerVertex(&radial)),
            Err(LabError::NonTangent { .. })
        ));
        // tangential part of the position field vanishes on a centred circle
        let nu = outward_normals(&mesh).unwrap();
        let xt: Vec<Vec3> = mesh.vertices().iter().zip(&nu).map(|(p, n)| p - n * n.dot(p)).collect();
        let d = f_divergence(&mesh, &pack, TangentField::PerVertex(&xt)).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn ellipse_normals_point_outward() {
        let m = gen_ellipse_curve(2.0, 1.0, 64).unwrap();
        let nu = outward_normals(&m).unwrap();
        for (p, n) in m.vertices().iter().zip(&nu) {
            assert!(p.dot(n) > 0.0);
        }
        assert!((enclosed_measure(&m) - 2.0 * PI).abs() < 0.02);
    }
}
