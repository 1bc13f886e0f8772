use serde::{Deserialize, Serialize};

use super::{gen_circle, gen_icosphere, SimplicialMesh};
use crate::density::DensityField;
use crate::error::{LabError, Result};
use crate::spaceform::{AmbientSpace, Point, Tangent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Computed,
    Analytic,
}

/// Resolution of a generated round sphere: segments for circles,
/// icosahedral subdivisions for 2-spheres.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereResolution {
    Segments(usize),
    Subdivisions(usize),
}

/// Per-vertex extrinsic data of a hypersurface `M^n` in a space form.
///
/// Points and vectors are expressed in the embedding coordinates of
/// `space`. `h_mean` is `div_M ν` for the outward normal `ν`, so round
/// spheres have positive mean curvature; `hf = h_mean − ⟨∇̄f, ν⟩`.
#[derive(Debug, Clone)]
pub struct ImmersionFields {
    pub space: AmbientSpace,
    pub points: Vec<Point>,
    pub normals: Vec<Tangent>,
    /// Orthonormal basis of `T_x M` at each vertex.
    pub frames: Vec<Vec<Tangent>>,
    pub h_mean: Vec<f64>,
    pub f_val: Vec<f64>,
    pub grad_f: Vec<Tangent>,
    pub hf: Vec<f64>,
    pub hf_minus_gradf_sq: Vec<f64>,
    pub base: Point,
    pub r: Vec<f64>,
    pub source: FieldSource,
}

impl ImmersionFields {
    /// Assembles the derived quantities from points, normals, frames and
    /// mean curvature.
    pub fn from_geometry(
        space: AmbientSpace,
        points: Vec<Point>,
        normals: Vec<Tangent>,
        frames: Vec<Vec<Tangent>>,
        h_mean: Vec<f64>,
        field: &DensityField,
        source: FieldSource,
    ) -> Result<Self> {
        let mut f_val = Vec::with_capacity(points.len());
        let mut grad_f = Vec::with_capacity(points.len());
        let mut hf = Vec::with_capacity(points.len());
        let mut sq = Vec::with_capacity(points.len());
        for i in 0..points.len() {
            let g = field.gradient_in(&space, &points[i])?;
            let gn = space.inner(&g, &normals[i]);
            let gt2: f64 = frames[i].iter().map(|t| space.inner(&g, t).powi(2)).sum();
            f_val.push(field.value_in(&space, &points[i])?);
            hf.push(h_mean[i] - gn);
            sq.push(h_mean[i] * h_mean[i] + gt2);
            grad_f.push(g);
        }
        let base = space.origin();
        let mut out = ImmersionFields {
            space,
            points,
            normals,
            frames,
            h_mean,
            f_val,
            grad_f,
            hf,
            hf_minus_gradf_sq: sq,
            base: base.clone(),
            r: Vec::new(),
            source,
        };
        out.set_base(base)?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension `n` of the hypersurface.
    pub fn n(&self) -> usize {
        self.space.dim() - 1
    }

    /// Re-measures `r` from a new base point.
    pub fn set_base(&mut self, base: Point) -> Result<()> {
        self.r = self.points.iter().map(|p| self.space.distance(&base, p)).collect();
        self.base = base;
        Ok(())
    }

    /// Component of `v` tangent to `M` at vertex `i`.
    pub fn tangential(&self, i: usize, v: &Tangent) -> Tangent {
        let mut out = Tangent::zeros(v.len());
        for t in &self.frames[i] {
            out += t * self.space.inner(v, t);
        }
        out
    }

    /// The vector `H_f − ∇̄f = −H ν − (∇̄f)^⊤` at vertex `i`.
    pub fn hf_minus_gradf(&self, i: usize) -> Tangent {
        -(&self.normals[i] * self.h_mean[i]) - self.tangential(i, &self.grad_f[i])
    }

    /// Reverses the orientation: normals and mean curvatures change sign.
    pub fn flipped(&self) -> Result<Self> {
        let normals: Vec<Tangent> = self.normals.iter().map(|n| -n).collect();
        let h: Vec<f64> = self.h_mean.iter().map(|h| -h).collect();
        let mut out = self.clone();
        out.normals = normals;
        out.h_mean = h;
        for i in 0..out.len() {
            out.hf[i] = out.h_mean[i] - self.space.inner(&out.grad_f[i], &out.normals[i]);
        }
        Ok(out)
    }
}

fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    match u.len() {
        2 => vec![vec![-u[1], u[0]]],
        _ => {
            let k = (0..3).min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
            let mut e = vec![0.0; 3];
            e[k] = 1.0;
            let d: f64 = e.iter().zip(u).map(|(a, b)| a * b).sum();
            let mut t1: Vec<f64> = e.iter().zip(u).map(|(a, b)| a - d * b).collect();
            let n1 = t1.iter().map(|x| x * x).sum::<f64>().sqrt();
            t1.iter_mut().for_each(|x| *x /= n1);
            let t2 = vec![u[1] * t1[2] - u[2] * t1[1], u[2] * t1[0] - u[0] * t1[2], u[0] * t1[1] - u[1] * t1[0]];
            vec![t1, t2]
        }
    }
}

/// The geodesic sphere of radius `rho` about the origin of `space`, meshed
/// intrinsically as the round sphere of radius `s_δ(ρ)` in `R^d`, with
/// closed-form extrinsic fields.
pub fn scaled_sphere_with_analytic_fields(
    space: &AmbientSpace,
    rho: f64,
    resolution: SphereResolution,
    field: &DensityField,
) -> Result<(SimplicialMesh, ImmersionFields)> {
    let d = space.dim();
    if !(d == 2 || d == 3) {
        return Err(LabError::Unsupported(format!("geodesic spheres are meshed only in dimension 2 or 3, got {d}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(LabError::InvalidParams(format!("geodesic radius must be positive, got {rho}")));
    }
    if space.delta() > 0.0 && rho >= 0.5 * space.injectivity_radius() {
        return Err(LabError::Domain(format!(
            "geodesic radius {rho} must be below π/(2√δ) = {}",
            0.5 * space.injectivity_radius()
        )));
    }
    let s = space.s(rho);
    let mesh = match (d, resolution) {
        (2, SphereResolution::Segments(k)) => gen_circle(s, k)?,
        (3, SphereResolution::Subdivisions(k)) => gen_icosphere(s, k)?,
        _ => {
            return Err(LabError::InvalidParams(format!("resolution {resolution:?} does not match dimension {d}")));
        }
    };
    let n = (d - 1) as f64;
    let h = n * space.c(rho) / s;
    let o = space.origin();
    let mut points = Vec::with_capacity(mesh.vertex_count());
    let mut normals = Vec::with_capacity(mesh.vertex_count());
    let mut frames = Vec::with_capacity(mesh.vertex_count());
    for i in 0..mesh.vertex_count() {
        let x = mesh.point(i);
        let len = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let u: Vec<f64> = x.iter().map(|a| a / len).collect();
        let coords: Vec<f64> = u.iter().map(|a| a * rho).collect();
        let p = space.from_origin_coordinates(&coords);
        normals.push(space.grad_distance(&o, &p)?);
        frames.push(orthonormal_complement(&u).iter().map(|t| space.lift_origin_tangent(t)).collect());
        points.push(p);
    }
    let fields = ImmersionFields::from_geometry(
        space.clone(),
        points,
        normals,
        frames,
        vec![h; mesh.vertex_count()],
        field,
        FieldSource::Analytic,
    )?;
    Ok((mesh, fields))
}
