//! Finite elements on planar domains: drift Poisson problems, the weighted
//! Reilly identity, the pointwise Bochner-type inequality, and the
//! isoperimetric checks for domains, cones and balls.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::{certify_nonneg_be, BakryEmeryParams, DensityField, MParam, SampleRegion};
use crate::error::{LabError, Result};
use crate::mesh::{weighted_measure_with, BoundaryLabel, CellKind, SimplicialMesh, Vec3};
use crate::ops::assemble;
use crate::quadrature::{integrate_composite, TriangleRule};
use crate::report::{CheckReport, HypothesisState};
use crate::spaceform::AmbientSpace;
use crate::sparse::{conjugate_gradient, norm2};

/// A smooth function with closed-form derivatives on `R^d`.
pub trait AnalyticFunction {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// `u(x) = c + ⟨b, x⟩ + ½ xᵀ A x` with symmetric `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadratic {
    pub c: f64,
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
}

impl Quadratic {
    pub fn new(c: f64, b: Vec<f64>, a: Vec<Vec<f64>>) -> Result<Self> {
        let d = b.len();
        if a.len() != d || a.iter().any(|row| row.len() != d) {
            return Err(LabError::InvalidParams("quadratic: A must be d x d with d = len(b)".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if (a[i][j] - a[j][i]).abs() > 1e-14 * (1.0 + a[i][j].abs()) {
                    return Err(LabError::InvalidParams("quadratic: A must be symmetric".into()));
                }
            }
        }
        Ok(Quadratic { c, b, a })
    }

    /// `(|x|² − R²)/(2d)`: solves `Δu = 1` in the ball of radius `R`
    /// with zero boundary values.
    pub fn ball_torsion(radius: f64, d: usize) -> Self {
        let k = 1.0 / d as f64;
        let a = (0..d).map(|i| (0..d).map(|j| if i == j { k } else { 0.0 }).collect()).collect();
        Quadratic { c: -radius * radius * k / 2.0, b: vec![0.0; d], a }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

fn comp(x: &[f64], i: usize) -> f64 {
    x.get(i).copied().unwrap_or(0.0)
}

impl AnalyticFunction for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut v = self.c;
        for i in 0..d {
            v += self.b[i] * comp(x, i);
            for j in 0..d {
                v += 0.5 * self.a[i][j] * comp(x, i) * comp(x, j);
            }
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(d, |i, _| self.b[i] + (0..d).map(|j| self.a[i][j] * comp(x, j)).sum::<f64>())
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.a[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: Vec<f64>,
    /// Outward normal derivative at the vertices of the Dirichlet boundary.
    pub u_nu: BTreeMap<usize, f64>,
    /// Relative residual of the reduced linear system.
    pub residual: f64,
    pub bc_kind: BcKind,
    /// Load vector `b_i = ∫ φ_i dμ̄`.
    pub load: Vec<f64>,
    /// `uᵀ S u` for the energy identity `uᵀSu = −uᵀb`.
    pub energy: f64,
}

fn require_planar(domain: &SimplicialMesh) -> Result<()> {
    if domain.kind() != CellKind::PlanarDomain {
        return Err(LabError::InvalidParams("a planar triangulated domain is required".into()));
    }
    Ok(())
}

fn solve_with(domain: &SimplicialMesh, field: &DensityField, dirichlet_edge: impl Fn(BoundaryLabel) -> bool, kind: BcKind) -> Result<PoissonSolution> {
    let nv = domain.vertex_count();
    let pack = assemble(domain, field)?;
    let load = pack.lumped.clone();
    let mut clamped = vec![false; nv];
    for e in domain.boundary() {
        if dirichlet_edge(e.label) {
            clamped[e.verts[0]] = true;
            clamped[e.verts[1]] = true;
        }
    }
    if !clamped.iter().any(|&c| c) {
        return Err(LabError::MissingLabels("no Dirichlet boundary".into()));
    }
    let keep: Vec<bool> = clamped.iter().map(|c| !c).collect();
    let (s_ii, idx) = pack.stiffness.principal_submatrix(&keep);
    let rhs: Vec<f64> = idx.iter().map(|&i| -load[i]).collect();
    let mut ui = vec![0.0; idx.len()];
    if !idx.is_empty() {
        conjugate_gradient(&s_ii, &rhs, &mut ui, 1e-14, 20 * nv + 1000)?;
    }
    let mut u = vec![0.0; nv];
    for (k, &i) in idx.iter().enumerate() {
        u[i] = ui[k];
    }
    let su = pack.stiffness.mul_vec(&u);
    let residual = if idx.is_empty() {
        0.0
    } else {
        let r: Vec<f64> = idx.iter().map(|&i| su[i] + load[i]).collect();
        norm2(&r) / norm2(&rhs)
    };
    // flux extraction: (S u + b)_i = ∫_∂ φ_i u_ν dμ on the Dirichlet part
    let v = domain.vertices();
    let mut bweight: BTreeMap<usize, f64> = BTreeMap::new();
    for e in domain.boundary() {
        if dirichlet_edge(e.label) {
            let [a, b] = e.verts;
            let mid = (v[a] + v[b]) * 0.5;
            let w = 0.5 * (v[b] - v[a]).norm() * (-field.value(&[mid.x, mid.y])).exp();
            *bweight.entry(a).or_default() += w;
            *bweight.entry(b).or_default() += w;
        }
    }
    let u_nu = bweight.iter().map(|(&i, &w)| (i, (su[i] + load[i]) / w)).collect();
    let energy = crate::sparse::dot(&u, &su);
    Ok(PoissonSolution { u, u_nu, residual, bc_kind: kind, load, energy })
}

/// Solves `Δ̄_f u = 1` with `u = 0` on the whole boundary.
pub fn solve_dirichlet(domain: &SimplicialMesh, field: &DensityField) -> Result<PoissonSolution> {
    require_planar(domain)?;
    solve_with(domain, field, |_| true, BcKind::Dirichlet)
}

/// Solves `Δ̄_f u = 1` with `u = 0` on the `M` part of the boundary and the
/// natural condition `u_ν = 0` elsewhere (cone faces and cutoff).
pub fn solve_mixed(domain: &SimplicialMesh, field: &DensityField) -> Result<PoissonSolution> {
    require_planar(domain)?;
    let labels: Vec<BoundaryLabel> = domain.boundary().iter().map(|e| e.label).collect();
    if !labels.contains(&BoundaryLabel::ConeFace) {
        return Err(LabError::MissingLabels("mixed problem needs cone-face boundary edges".into()));
    }
    if !labels.contains(&BoundaryLabel::M) {
        return Err(LabError::MissingLabels("mixed problem needs M boundary edges".into()));
    }
    solve_with(domain, field, |l| l == BoundaryLabel::M, BcKind::Mixed)
}

/// Discrete geometry of the `M` part of a planar domain boundary at one vertex.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub vertex: usize,
    pub position: Vec3,
    /// Half the length of the adjacent `M` edges.
    pub weight: f64,
    /// Outward unit normal.
    pub normal: Vec3,
    /// Curvature `div ν` (positive on convex boundaries).
    pub kappa: f64,
}

impl BoundaryPoint {
    /// Unit tangent with the domain on its left.
    pub fn tangent(&self) -> Vec3 {
        Vec3::new(-self.normal.y, self.normal.x, 0.0)
    }
}

fn edge_normal(a: &Vec3, b: &Vec3) -> Vec3 {
    let e = b - a;
    Vec3::new(e.y, -e.x, 0.0).normalize()
}

/// Signed curvature of the circle through three consecutive points.
fn circumcurvature(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (u, w) = (b - a, c - b);
    let cross = u.x * w.y - u.y * w.x;
    2.0 * cross / (u.norm() * w.norm() * (c - a).norm())
}

/// Outward normals, dual lengths and curvatures along the `M` boundary.
/// Interior points of `M` use the coordinate Laplacian (as for closed
/// curves); endpoints of open arcs use the circle through three points.
pub fn boundary_points(domain: &SimplicialMesh) -> Result<Vec<BoundaryPoint>> {
    require_planar(domain)?;
    let v = domain.vertices();
    let nb = domain.boundary_neighbours();
    let is_m = |l: Option<(usize, BoundaryLabel)>| matches!(l, Some((_, BoundaryLabel::M)));
    let mut out = Vec::new();
    for (&i, bv) in &nb {
        let (prev_m, next_m) = (is_m(bv.prev), is_m(bv.next));
        if !prev_m && !next_m {
            continue;
        }
        let p = v[i];
        let mut weight = 0.0;
        let mut normal = Vec3::zeros();
        if let (true, Some((a, _))) = (prev_m, bv.prev) {
            weight += 0.5 * (p - v[a]).norm();
            normal += edge_normal(&v[a], &p);
        }
        if let (true, Some((b, _))) = (next_m, bv.next) {
            weight += 0.5 * (v[b] - p).norm();
            normal += edge_normal(&p, &v[b]);
        }
        let normal = normal.normalize();
        let kappa = if prev_m && next_m {
            let (a, b) = (v[bv.prev.unwrap().0], v[bv.next.unwrap().0]);
            let (l1, l2) = ((p - a).norm(), (b - p).norm());
            let hv = ((a - p) / l1 + (b - p) / l2) / (0.5 * (l1 + l2));
            -hv.dot(&normal)
        } else if next_m {
            let b = bv.next.unwrap().0;
            let c = nb[&b].next.filter(|x| x.1 == BoundaryLabel::M).map(|x| x.0).ok_or_else(|| {
                LabError::DegenerateInput("M arc needs at least two segments".into())
            })?;
            circumcurvature(&p, &v[b], &v[c])
        } else {
            let a = bv.prev.unwrap().0;
            let z = nb[&a].prev.filter(|x| x.1 == BoundaryLabel::M).map(|x| x.0).ok_or_else(|| {
                LabError::DegenerateInput("M arc needs at least two segments".into())
            })?;
            circumcurvature(&v[z], &v[a], &p)
        };
        out.push(BoundaryPoint { vertex: i, position: p, weight, normal, kappa });
    }
    Ok(out)
}

fn xy(p: &Vec3) -> [f64; 2] {
    [p.x, p.y]
}

fn quad_form(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            s += m[(i, j)] * a[i] * b[j];
        }
    }
    s
}

/// Both sides of the weighted Reilly identity on a planar domain whose whole
/// boundary is `M`, for an analytic `u`:
/// `∫_Ω ((Δ̄_f u)² − |∇̄²u|² − Ric_f(∇̄u,∇̄u)) dμ̄ = ∫_M (2 u_ν Δ_f u + u_ν² H_f + ⟨A∇u,∇u⟩) dμ`.
pub fn reilly_residual(
    domain: &SimplicialMesh,
    field: &DensityField,
    u: &dyn AnalyticFunction,
    rel_tol: f64,
) -> Result<CheckReport> {
    require_planar(domain)?;
    if domain.boundary().iter().any(|e| e.label != BoundaryLabel::M) {
        return Err(LabError::InvalidParams("the Reilly identity needs the whole boundary labelled M".into()));
    }
    let v = domain.vertices();
    let rule = TriangleRule::SevenPoint.points();
    let mut lhs = 0.0;
    for t in domain.triangles() {
        let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        for (bc, w) in &rule {
            let p = a * bc[0] + b * bc[1] + c * bc[2];
            let x = xy(&p);
            let g = u.gradient(&x);
            let h = u.hessian(&x);
            let gf = field.gradient(&x, 2);
            let hf = field.hessian(&x, 2);
            let lap_f = h.trace() - gf.dot(&g);
            let hess_sq = h.norm_squared();
            let ric_f = quad_form(&hf, g.as_slice(), g.as_slice());
            lhs += w * area * (lap_f * lap_f - hess_sq - ric_f) * (-field.value(&x)).exp();
        }
    }
    let mut rhs = 0.0;
    for bp in boundary_points(domain)? {
        let x = xy(&bp.position);
        let nu = [bp.normal.x, bp.normal.y];
        let tau = [bp.tangent().x, bp.tangent().y];
        let g = u.gradient(&x);
        let h = u.hessian(&x);
        let gf = field.gradient(&x, 2);
        let u_nu = g[0] * nu[0] + g[1] * nu[1];
        let u_tau = g[0] * tau[0] + g[1] * tau[1];
        let f_tau = gf[0] * tau[0] + gf[1] * tau[1];
        let f_nu = gf[0] * nu[0] + gf[1] * nu[1];
        // Laplacian of u restricted to the curve, then its drift version
        let lap_m = quad_form(&h, &tau, &tau) - bp.kappa * u_nu;
        let lap_f_m = lap_m - f_tau * u_tau;
        let h_f = bp.kappa - f_nu;
        let integrand = 2.0 * u_nu * lap_f_m + u_nu * u_nu * h_f + bp.kappa * u_tau * u_tau;
        rhs += bp.weight * integrand * (-field.value(&x)).exp();
    }
    let scale = lhs.abs().max(rhs.abs());
    Ok(CheckReport::identity("reilly", lhs, rhs, rel_tol * scale + 1e-14).detail("h", domain.mesh_size()))
}

/// The defect `[|∇̄²u|² + Ric_f(∇̄u,∇̄u)] − [(Δ̄_f u)²/m + Ric_f^m(∇̄u,∇̄u)]`
/// at a point of `R^d` (flat ambient, `d = params.d`).
pub fn bochner_gap(field: &DensityField, params: &BakryEmeryParams, x: &[f64], u: &dyn AnalyticFunction) -> Result<f64> {
    params.validate(field)?;
    let d = params.d;
    if x.len() != d {
        return Err(LabError::InvalidParams(format!("point has {} coordinates, expected {d}", x.len())));
    }
    let space = AmbientSpace::euclidean(d);
    let g = u.gradient(x);
    let h = u.hessian(x);
    let gf = field.gradient(x, d);
    let hf = field.hessian(x, d);
    let lap_f = h.trace() - gf.dot(&g);
    let gn = g.norm();
    let ric_f = quad_form(&hf, g.as_slice(), g.as_slice());
    let ric_f_m = if gn == 0.0 {
        0.0
    } else {
        let p = DVector::from_column_slice(x);
        crate::density::bakry_emery_m(&space, field, params, &p, &(&g / gn))? * gn * gn
    };
    Ok(h.norm_squared() + ric_f - lap_f * lap_f * params.m.inverse() - ric_f_m)
}

/// Tolerances shared by the isoperimetric checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOptions {
    /// Pass when `lhs ≤ rhs + tolerance·|lhs|`.
    pub tolerance: f64,
    /// Equality flag when `|gap| < equality_tol·|lhs|`.
    pub equality_tol: f64,
    /// Samples for the Bakry–Émery advisory.
    pub be_samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { tolerance: 1e-3, equality_tol: 1e-2, be_samples: 512 }
    }
}

fn be_advisory(
    report: CheckReport,
    domain: &SimplicialMesh,
    field: &DensityField,
    params: &BakryEmeryParams,
    samples: usize,
) -> Result<CheckReport> {
    let space = AmbientSpace::euclidean(2);
    let radius = domain.vertices().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let be = certify_nonneg_be(&space, field, params, &SampleRegion { center: vec![], radius }, samples)?;
    let mut report = report.detail("be_min", be.rhs);
    report = if be.pass {
        report.hypothesis("be_nonnegative", HypothesisState::Satisfied)
    } else {
        report.hypothesis("be_nonnegative", HypothesisState::Failed).note("Bakry-Emery tensor negative somewhere in the domain")
    };
    if params.m == MParam::Infinite {
        report = report
            .hypothesis("finite_m", HypothesisState::Limit)
            .note("limit case, outside theorem hypotheses (m = infinity, factor (m-1)/m read as 1)");
    }
    Ok(report)
}

fn hf_at(field: &DensityField, bp: &BoundaryPoint) -> f64 {
    let g = field.gradient(&xy(&bp.position), 2);
    bp.kappa - (g[0] * bp.normal.x + g[1] * bp.normal.y)
}

fn isoperimetric(
    check: &str,
    domain: &SimplicialMesh,
    field: &DensityField,
    params: &BakryEmeryParams,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    params.validate(field)?;
    let lhs = weighted_measure_with(domain, field, TriangleRule::SevenPoint);
    let pts = boundary_points(domain)?;
    let mut rhs = 0.0;
    let mut bad: Option<(usize, f64)> = None;
    let mut min_hf = f64::INFINITY;
    for bp in &pts {
        let hf = hf_at(field, bp);
        min_hf = min_hf.min(hf);
        if hf <= 0.0 && bad.is_none() {
            bad = Some((bp.vertex, hf));
        }
        rhs += bp.weight * (-field.value(&xy(&bp.position))).exp() / hf;
    }
    rhs *= params.m.ros_factor();
    let mut report = CheckReport::inequality(check, lhs, rhs, opts.tolerance * lhs.abs())
        .with_equality_tolerance(opts.equality_tol)
        .detail("min_hf", min_hf)
        .detail("h", domain.mesh_size())
        .detail("m_factor", params.m.ros_factor());
    report = match bad {
        Some((vertex, hf)) => report
            .hypothesis("hf_positive", HypothesisState::Failed)
            .note(format!("H_f = {hf:e} is not positive at boundary vertex {vertex}"))
            .detail("offending_vertex", vertex as f64),
        None => report.hypothesis("hf_positive", HypothesisState::Satisfied),
    };
    be_advisory(report, domain, field, params, opts.be_samples)
}

/// `Vol_f(Ω) ≤ ((m−1)/m) ∫_M dμ / H_f` for a domain bounded by `M`.
pub fn check_ros(domain: &SimplicialMesh, field: &DensityField, params: &BakryEmeryParams, opts: &CheckOptions) -> Result<CheckReport> {
    require_planar(domain)?;
    isoperimetric("ros", domain, field, params, opts)
}

/// Opening angle of a wedge domain, measured between its two cone faces.
pub fn cone_opening_angle(domain: &SimplicialMesh) -> Result<f64> {
    require_planar(domain)?;
    let v = domain.vertices();
    let nb = domain.boundary_neighbours();
    // the M arc ends where the boundary turns onto a cone face
    let end = nb
        .iter()
        .find(|(_, bv)| matches!(bv.prev, Some((_, BoundaryLabel::M))) && !matches!(bv.next, Some((_, BoundaryLabel::M))))
        .map(|(&i, _)| i)
        .ok_or_else(|| LabError::MissingLabels("no transition from M to the cone faces".into()))?;
    let start = nb
        .iter()
        .find(|(_, bv)| matches!(bv.next, Some((_, BoundaryLabel::M))) && !matches!(bv.prev, Some((_, BoundaryLabel::M))))
        .map(|(&i, _)| i)
        .ok_or_else(|| LabError::MissingLabels("no transition from the cone faces to M".into()))?;
    let first = nb[&end].next.unwrap().0;
    let last = nb[&start].prev.unwrap().0;
    if nb[&end].next.unwrap().1 != BoundaryLabel::ConeFace || nb[&start].prev.unwrap().1 != BoundaryLabel::ConeFace {
        return Err(LabError::MissingLabels("M arc must be adjacent to cone-face edges".into()));
    }
    // rays pointing away from the apex
    let r1 = v[end] - v[first];
    let r2 = v[start] - v[last];
    let ang = (r2.x * r1.y - r2.y * r1.x).atan2(r2.dot(&r1));
    Ok(if ang <= 0.0 { ang + 2.0 * PI } else { ang })
}

/// Unit tangent at `p` of the circle through `p`, `q`, `r`, pointing toward `q`.
fn circle_tangent(p: &Vec3, q: &Vec3, r: &Vec3) -> Vec3 {
    let (a, b) = (q - p, r - p);
    let d = 2.0 * (a.x * b.y - a.y * b.x);
    let chord = a.normalize();
    if d.abs() < 1e-14 * a.norm() * b.norm() {
        return chord;
    }
    let (a2, b2) = (a.norm_squared(), b.norm_squared());
    let c = Vec3::new((b.y * a2 - a.y * b2) / d, (a.x * b2 - b.x * a2) / d, 0.0);
    let t = Vec3::new(-c.y, c.x, 0.0).normalize();
    if t.dot(&chord) < 0.0 {
        -t
    } else {
        t
    }
}

fn turn(d_in: &Vec3, d_out: &Vec3) -> f64 {
    (d_in.x * d_out.y - d_in.y * d_out.x).atan2(d_in.dot(d_out))
}

/// Interior angles of the domain where the `M` arc meets the cone faces.
pub fn contact_angles(domain: &SimplicialMesh) -> Result<Vec<(usize, f64)>> {
    require_planar(domain)?;
    let v = domain.vertices();
    let nb = domain.boundary_neighbours();
    let is_m = |l: Option<(usize, BoundaryLabel)>| matches!(l, Some((_, BoundaryLabel::M)));
    let short = || LabError::DegenerateInput("M arc needs at least two segments".into());
    let mut out = Vec::new();
    for (&i, bv) in &nb {
        let p = v[i];
        let angle = match (is_m(bv.prev), is_m(bv.next)) {
            (true, false) => {
                let a = bv.prev.unwrap().0;
                let z = nb[&a].prev.filter(|x| x.1 == BoundaryLabel::M).ok_or_else(short)?.0;
                let d_in = -circle_tangent(&p, &v[a], &v[z]);
                PI - turn(&d_in, &(v[bv.next.unwrap().0] - p))
            }
            (false, true) => {
                let b = bv.next.unwrap().0;
                let c = nb[&b].next.filter(|x| x.1 == BoundaryLabel::M).ok_or_else(short)?.0;
                let d_out = circle_tangent(&p, &v[b], &v[c]);
                PI - turn(&(p - v[bv.prev.unwrap().0]), &d_out)
            }
            _ => continue,
        };
        out.push((i, angle));
    }
    Ok(out)
}

/// Slack on the right-angle bound for discrete contact angles.
pub const CONTACT_ANGLE_SLACK: f64 = 1e-2;

/// `Vol_f(Ω) ≤ ((m−1)/m) ∫_M dμ / H_f` for `Ω` cut from a convex cone by `M`.
///
/// The underlying integral identity needs the mixed problem to have an `H²`
/// solution, which fails when `M` meets a cone face at an obtuse interior
/// angle. Such domains are reported as a failed hypothesis.
pub fn check_cone(domain: &SimplicialMesh, field: &DensityField, params: &BakryEmeryParams, opts: &CheckOptions) -> Result<CheckReport> {
    require_planar(domain)?;
    if !domain.boundary().iter().any(|e| e.label == BoundaryLabel::ConeFace) {
        return Err(LabError::MissingLabels("cone check needs cone-face boundary edges".into()));
    }
    let angle = cone_opening_angle(domain)?;
    if angle > PI + 1e-9 {
        return Err(LabError::NonConvexCone { angle });
    }
    let cutoff: f64 = {
        let v = domain.vertices();
        domain
            .boundary()
            .iter()
            .filter(|e| e.label == BoundaryLabel::Cutoff)
            .map(|e| (v[e.verts[1]] - v[e.verts[0]]).norm())
            .sum()
    };
    // the apex sits at the origin
    let cutoff_radius = domain
        .vertex_labels()
        .iter()
        .filter(|(_, l)| **l == BoundaryLabel::Cutoff)
        .map(|(&i, _)| domain.vertices()[i].norm())
        .fold(0.0, f64::max);
    let mut report = isoperimetric("cone", domain, field, params, opts)?
        .detail("opening_angle", angle)
        .detail("cutoff_length", cutoff)
        .detail("cutoff_radius", cutoff_radius);
    let contact = contact_angles(domain)?;
    let worst = contact.iter().copied().fold((usize::MAX, 0.0), |w, c| if c.1 > w.1 { c } else { w });
    report = report.detail("max_contact_angle", worst.1);
    report = if worst.1 > PI / 2.0 + CONTACT_ANGLE_SLACK {
        report
            .hypothesis("contact_angle_acute", HypothesisState::Failed)
            .note(format!("M meets the cone boundary at an obtuse angle {:.4} at vertex {}", worst.1, worst.0))
    } else {
        report.hypothesis("contact_angle_acute", HypothesisState::Satisfied)
    };
    Ok(report)
}

/// Relative spread above which `H_f` is not considered constant.
pub const CMC_SPREAD: f64 = 1e-6;

/// `H_f Vol_f(Ω) ≤ ((m−1)/m) Vol_f(M)` for a domain whose boundary has
/// constant weighted mean curvature.
pub fn check_linear_isoperimetric(
    domain: &SimplicialMesh,
    field: &DensityField,
    params: &BakryEmeryParams,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    require_planar(domain)?;
    params.validate(field)?;
    let pts = boundary_points(domain)?;
    let hfs: Vec<f64> = pts.iter().map(|bp| hf_at(field, bp)).collect();
    let (lo, hi) = hfs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = hfs.iter().sum::<f64>() / hfs.len() as f64;
    let spread = (hi - lo) / mean.abs();
    if !(spread <= CMC_SPREAD) {
        return Err(LabError::NotCmc { spread });
    }
    let vol = weighted_measure_with(domain, field, TriangleRule::SevenPoint);
    let area_m: f64 = pts.iter().map(|bp| bp.weight * (-field.value(&xy(&bp.position))).exp()).sum();
    let lhs = mean * vol;
    let rhs = params.m.ros_factor() * area_m;
    let report = CheckReport::inequality("linear_isoperimetric", lhs, rhs, opts.tolerance * lhs.abs())
        .with_equality_tolerance(opts.equality_tol)
        .detail("hf", mean)
        .detail("hf_spread", spread)
        .detail("h", domain.mesh_size());
    be_advisory(report, domain, field, params, opts.be_samples)
}

/// Weighted volume, weighted boundary area and `H_f` of the Euclidean ball of
/// given radius in `R^d`, for a radial density, by Gauss–Legendre
/// quadrature of the radial profile.
pub fn ball_quantities(radius: f64, d: usize, field: &DensityField) -> Result<(f64, f64, f64)> {
    if !field.is_radial() {
        return Err(LabError::Unsupported("the analytic ball path needs a radial density".into()));
    }
    if !(radius > 0.0) || d < 2 {
        return Err(LabError::InvalidParams("ball needs positive radius and d >= 2".into()));
    }
    let sphere_area = 2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d);
    let at = |r: f64| {
        let mut x = vec![0.0; d];
        x[0] = r;
        x
    };
    let vol = sphere_area * integrate_composite(0.0, radius, 16, 20, |r| (-field.value(&at(r))).exp() * r.powi(d as i32 - 1));
    let area = sphere_area * radius.powi(d as i32 - 1) * (-field.value(&at(radius))).exp();
    let df = field.gradient(&at(radius), d)[0];
    let hf = (d as f64 - 1.0) / radius - df;
    Ok((vol, area, hf))
}

/// `Γ(d/2)` for integer `d ≥ 1`.
fn gamma_half_integer(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        // Γ(1/2) = √π, Γ(k + 1/2) = (k − 1/2) Γ(k − 1/2)
        let mut g = PI.sqrt();
        let mut s = 0.5;
        while s + 1.0 <= d as f64 / 2.0 + 1e-12 {
            g *= s;
            s += 1.0;
        }
        g
    }
}

/// Linear isoperimetric check on the ball of `R^d` without meshing.
pub fn check_linear_isoperimetric_ball(
    radius: f64,
    d: usize,
    field: &DensityField,
    params: &BakryEmeryParams,
    tolerance: f64,
) -> Result<CheckReport> {
    params.validate(field)?;
    let (vol, area, hf) = ball_quantities(radius, d, field)?;
    let lhs = hf * vol;
    let rhs = params.m.ros_factor() * area;
    Ok(CheckReport::inequality("linear_isoperimetric", lhs, rhs, tolerance * lhs.abs())
        .with_equality_tolerance(tolerance)
        .detail("hf", hf)
        .detail("volume", vol)
        .detail("boundary_area", area)
        .note("analytic ball, radial quadrature"))
}

/// Ros inequality on the ball of `R^d` without meshing.
pub fn check_ros_ball(
    radius: f64,
    d: usize,
    field: &DensityField,
    params: &BakryEmeryParams,
    tolerance: f64,
) -> Result<CheckReport> {
    params.validate(field)?;
    let (vol, area, hf) = ball_quantities(radius, d, field)?;
    if hf <= 0.0 {
        return Ok(CheckReport::inequality("ros", vol, f64::MAX, 0.0)
            .hypothesis("hf_positive", HypothesisState::Failed)
            .detail("hf", hf));
    }
    let rhs = params.m.ros_factor() * area / hf;
    Ok(CheckReport::inequality("ros", vol, rhs, tolerance * vol)
        .with_equality_tolerance(tolerance)
        .hypothesis("hf_positive", HypothesisState::Satisfied)
        .detail("hf", hf)
        .note("analytic ball, radial quadrature"))
}
