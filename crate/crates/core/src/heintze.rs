//! First-eigenvalue bounds for closed hypersurfaces of space forms: the
//! weighted center of mass, normal-coordinate test functions, the integral
//! inequalities behind the bounds, the bounds themselves, and the shrinker radius.

use std::f64::consts::PI;

use serde::Serialize;

use crate::density::DensityField;
use crate::error::{LabError, Result};
use crate::mesh::{gen_circle, gen_icosphere, scaled_sphere_with_analytic_fields, FieldSource, ImmersionFields, SimplicialMesh, SphereResolution};
use crate::ops::{assemble, cell_gradients, OperatorPack};
use crate::report::{CheckReport, HypothesisState};
use crate::spaceform::{s_delta_primitive, AmbientSpace, Model, Point, Tangent};
use crate::spectrum::{lambda1_drift_with, lambda1_lumped, EigenOptions, EigenResult};

/// A closed hypersurface with its extrinsic fields and weighted operators.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub mesh: SimplicialMesh,
    pub fields: ImmersionFields,
    pub pack: OperatorPack,
}

impl Hypersurface {
    pub fn new(mesh: SimplicialMesh, fields: ImmersionFields) -> Result<Self> {
        if fields.len() != mesh.vertex_count() {
            return Err(LabError::InvalidParams("fields and mesh disagree on the vertex count".into()));
        }
        if !mesh.is_closed() {
            return Err(LabError::InvalidTopology("a closed hypersurface is required".into()));
        }
        let pack = assemble(&mesh, &fields)?;
        Ok(Hypersurface { mesh, fields, pack })
    }

    /// Euclidean hypersurface with fields computed from the mesh.
    pub fn embedded(mesh: SimplicialMesh, field: &DensityField) -> Result<Self> {
        let fields = crate::ops::immersion_fields(&mesh, field)?;
        Hypersurface::new(mesh, fields)
    }

    /// Geodesic sphere of radius `rho` about the origin with analytic fields.
    pub fn geodesic_sphere(space: &AmbientSpace, rho: f64, resolution: SphereResolution, field: &DensityField) -> Result<Self> {
        let (mesh, fields) = scaled_sphere_with_analytic_fields(space, rho, resolution, field)?;
        Hypersurface::new(mesh, fields)
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.fields.space
    }

    pub fn n(&self) -> usize {
        self.fields.n()
    }

    /// Vertex quadrature weights of `dμ = e^{-f} dA`.
    pub fn weights(&self) -> &[f64] {
        &self.pack.lumped
    }

    pub fn volume(&self) -> f64 {
        self.pack.total_measure()
    }

    /// `∫_M g dμ` by vertex quadrature.
    pub fn integrate(&self, g: impl Fn(usize) -> f64) -> f64 {
        self.weights().iter().enumerate().map(|(i, w)| w * g(i)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterOfMass {
    /// Embedding coordinates of the center.
    #[serde(skip)]
    pub point: Point,
    /// `‖∫ (s_δ(r)/r) log_p x dμ‖ / Vol_f(M)`: the condition that makes the
    /// test functions mean-free.
    pub gradient_norm: f64,
    /// `‖∫ log_p x dμ‖ / Vol_f(M)`, the Riemannian (Karcher) condition.
    pub karcher_residual: f64,
    pub iterations: usize,
    pub max_distance: f64,
}

/// Iteration cap for the center of mass.
pub const CENTER_MAX_ITER: usize = 200;

fn weighted_sum(hs: &Hypersurface, g: impl Fn(usize) -> Tangent) -> Tangent {
    let dim = hs.fields.points[0].len();
    let mut acc = Tangent::zeros(dim);
    for (i, w) in hs.weights().iter().enumerate() {
        acc += g(i) * *w;
    }
    acc
}

/// Normalises an embedding vector onto the model (time-like future vectors
/// on the hyperboloid).
fn to_model(space: &AmbientSpace, q: &Point) -> Option<Point> {
    match space.model() {
        Model::Euclidean => Some(q.clone()),
        Model::SphereEmbedded => {
            let n = q.norm();
            (n > 1e-12).then(|| q * (space.curvature_radius() / n))
        }
        Model::HyperboloidEmbedded => {
            let qq = -space.inner(q, q);
            (qq > 0.0 && q[0] > 0.0).then(|| q * (space.curvature_radius() / qq.sqrt()))
        }
    }
}

fn center_residuals(hs: &Hypersurface, p: &Point) -> Result<(Tangent, f64, f64, f64)> {
    let space = hs.space();
    let vol = hs.volume();
    let mut heintze = Tangent::zeros(p.len());
    let mut karcher = Tangent::zeros(p.len());
    let mut c_mass = 0.0;
    let mut rmax: f64 = 0.0;
    for (i, w) in hs.weights().iter().enumerate() {
        let l = space.log_map(p, &hs.fields.points[i])?;
        let r = space.norm(&l);
        rmax = rmax.max(r);
        let ratio = if r > 1e-9 { space.s(r) / r } else { 1.0 };
        heintze += &l * (w * ratio);
        karcher += &l * *w;
        c_mass += w * space.c(r);
    }
    let step = &heintze / c_mass;
    Ok((step, space.norm(&heintze) / vol, space.norm(&karcher) / vol, rmax))
}

/// The point `p` with `∫ (s_δ(r)/r) log_p x dμ = 0`, found by the fixed-point
/// iteration `p ← exp_p(∫ (s_δ/r) log_p x dμ / ∫ c_δ dμ)` started from the
/// normalised weighted mean of the embedding coordinates.
pub fn weighted_center_of_mass(hs: &Hypersurface) -> Result<CenterOfMass> {
    let space = hs.space();
    let vol = hs.volume();
    let mean = weighted_sum(hs, |i| hs.fields.points[i].clone()) / vol;
    let mut p = to_model(space, &mean).ok_or(LabError::OutOfBall { radius: f64::INFINITY, limit: 0.5 * space.injectivity_radius() })?;
    let mut damping = 1.0;
    let (mut step, mut g, mut k, mut rmax) = center_residuals(hs, &p)?;
    let mut iterations = 0;
    while space.norm(&step) > 1e-12 {
        if iterations == CENTER_MAX_ITER {
            return Err(LabError::NoConvergence { iterations, residual: g });
        }
        iterations += 1;
        let trial = to_model(space, &space.exp_map(&p, &(&step * damping))).unwrap_or(p.clone());
        let next = center_residuals(hs, &trial)?;
        if next.1 > g && damping > 0.5 {
            damping = 0.5;
            continue;
        }
        p = trial;
        (step, g, k, rmax) = next;
    }
    if space.delta() > 0.0 && rmax >= 0.5 * space.injectivity_radius() {
        return Err(LabError::OutOfBall { radius: rmax, limit: 0.5 * space.injectivity_radius() });
    }
    let _ = vol;
    Ok(CenterOfMass { point: p, gradient_norm: g, karcher_residual: k, iterations, max_distance: rmax })
}

/// Per-vertex values of the test functions: columns `φ_i = (s_δ(r)/r) x_i`
/// for the normal coordinates `x_i` about `center`, then for `δ > 0` the
/// column `φ_0 = (c_δ(r) − c̄)/√δ` with `c̄` the weighted mean of `c_δ(r)`.
pub fn test_functions(hs: &Hypersurface, center: &Point) -> Result<Vec<Vec<f64>>> {
    let space = hs.space();
    let basis = space.tangent_basis(center);
    let nv = hs.fields.len();
    let mut cols = vec![vec![0.0; nv]; basis.len()];
    let mut c_vals = vec![0.0; nv];
    for i in 0..nv {
        let l = space.log_map(center, &hs.fields.points[i])?;
        let r = space.norm(&l);
        let ratio = if r < 1e-9 { 1.0 } else { space.s(r) / r };
        for (k, e) in basis.iter().enumerate() {
            cols[k][i] = ratio * space.inner(&l, e);
        }
        c_vals[i] = space.c(r);
    }
    if space.delta() > 0.0 {
        let cbar = hs.integrate(|i| c_vals[i]) / hs.volume();
        let sd = space.delta().sqrt();
        cols.push(c_vals.iter().map(|c| (c - cbar) / sd).collect());
    }
    Ok(cols)
}

/// Per-vertex geometry about a center: `r`, `s_δ(r)`, `c_δ(r)`, `∇̄r` and
/// `V = H_f − ∇̄f`.
struct Radial {
    r: Vec<f64>,
    s: Vec<f64>,
    c: Vec<f64>,
    grad_r: Vec<Tangent>,
    v: Vec<Tangent>,
}

fn radial(hs: &Hypersurface, center: &Point) -> Result<Radial> {
    let space = hs.space();
    let nv = hs.fields.len();
    let mut out = Radial { r: vec![], s: vec![], c: vec![], grad_r: vec![], v: vec![] };
    for i in 0..nv {
        let q = &hs.fields.points[i];
        let r = space.distance(center, q);
        out.r.push(r);
        out.s.push(space.s(r));
        out.c.push(space.c(r));
        out.grad_r.push(space.grad_distance(center, q)?);
        out.v.push(hs.fields.hf_minus_gradf(i));
    }
    Ok(out)
}

/// Relative tolerance for the chain checks on meshes whose fields are computed
/// from the discretisation; analytic fields use [`ANALYTIC_TOL`].
pub const COMPUTED_TOL: f64 = 1e-2;
pub const ANALYTIC_TOL: f64 = 1e-9;

fn chain_tol(hs: &Hypersurface) -> f64 {
    match hs.fields.source {
        FieldSource::Computed => COMPUTED_TOL,
        FieldSource::Analytic => ANALYTIC_TOL,
    }
}

/// The chain `n∫c_δ dμ ≤ −∫s_δ⟨H_f−∇̄f, ∇̄r⟩ dμ ≤ ∫s_δ|H_f−∇̄f| dμ`.
/// Reports the outer terms as lhs/rhs and the middle one as a detail,
/// together with the ratio middle/right (1 when `X` is parallel to
/// `H_f − ∇̄f`).
pub fn radial_chain_check(hs: &Hypersurface, center: &Point) -> Result<CheckReport> {
    let space = hs.space().clone();
    let rad = radial(hs, center)?;
    let n = hs.n() as f64;
    let left = n * hs.integrate(|i| rad.c[i]);
    let middle = -hs.integrate(|i| rad.s[i] * space.inner(&rad.v[i], &rad.grad_r[i]));
    let right = hs.integrate(|i| rad.s[i] * space.norm(&rad.v[i]));
    let tol = chain_tol(hs) * right.abs().max(left.abs());
    let mut report = CheckReport::inequality("radial_chain", left, right, tol)
        .with_equality_tolerance(tol / left.abs().max(1e-300))
        .detail("middle", middle)
        .detail("ratio_middle_right", middle / right)
        .detail("first_gap", middle - left)
        .detail("second_gap", right - middle);
    if !(middle - left >= -tol && right - middle >= -tol) {
        report.pass = false;
        report.status = crate::report::Status::Fail;
    }
    if rad.r.iter().any(|&r| r < 1e-9) {
        report = report.note("center lies on the hypersurface");
    }
    Ok(report)
}

/// Gradient-operator tolerance for the sum of squared gradients of the test
/// functions: exact in the smooth setting, so only roundoff is allowed.
pub fn gradient_sum_tolerance(n: usize) -> f64 {
    1e-9 * n as f64
}

/// `Σ_i |∇(s_δ x_i / r)|² + δ|X^⊤|² ≤ n` (max over the mesh) and, for
/// `δ ≤ 0`, `∫s dμ ∫sc dμ ≤ ∫s² dμ ∫c dμ`.
pub fn gradient_sum_check(hs: &Hypersurface, center: &Point) -> Result<CheckReport> {
    let space = hs.space().clone();
    let n = hs.n();
    let delta = space.delta();
    let eps = gradient_sum_tolerance(n);
    let max_sum = match (hs.fields.source, space.model()) {
        (FieldSource::Computed, Model::Euclidean) => {
            // P1 gradients of the coordinate functions, cell by cell
            let phis = test_functions(hs, center)?;
            let grads: Vec<_> = phis.iter().map(|p| cell_gradients(&hs.mesh, p)).collect::<Result<_>>()?;
            (0..hs.mesh.cell_count()).map(|c| grads.iter().map(|g| g[c].norm_squared()).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
        }
        _ => {
            // gradient of φ_i = ⟨q, e_i⟩ is the tangential part of e_i
            let basis = space.tangent_basis(center);
            let mut max = f64::NEG_INFINITY;
            for i in 0..hs.fields.len() {
                let mut sum: f64 = basis.iter().map(|e| space.norm(&hs.fields.tangential(i, e)).powi(2)).sum();
                if delta != 0.0 {
                    let x = space.radial_field(center, &hs.fields.points[i])?;
                    sum += delta * space.norm(&hs.fields.tangential(i, &x)).powi(2);
                }
                max = max.max(sum);
            }
            max
        }
    };
    let part1 = CheckReport::inequality("gradient_sum", max_sum, n as f64, eps);
    let mut report = part1.clone().detail("epsilon_h", eps).detail("max_gradient_sum", max_sum);
    if delta <= 0.0 {
        let rad = radial(hs, center)?;
        let l = hs.integrate(|i| rad.s[i]) * hs.integrate(|i| rad.s[i] * rad.c[i]);
        let r = hs.integrate(|i| rad.s[i] * rad.s[i]) * hs.integrate(|i| rad.c[i]);
        let tol = 1e-12 * r.abs();
        let pass2 = r - l >= -tol;
        report = report.detail("product_lhs", l).detail("product_rhs", r).detail("product_gap", r - l);
        if !pass2 {
            report.pass = false;
            report.status = crate::report::Status::Fail;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub eigen: EigenOptions,
    pub equality_tol: f64,
    /// Multiple of the measured eigenvalue discretisation error used as
    /// tolerance.
    pub error_factor: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { eigen: EigenOptions::default(), equality_tol: 2e-2, error_factor: 3.0 }
    }
}

fn eigen_with_estimate(hs: &Hypersurface, opts: &BoundOptions) -> Result<(EigenResult, f64)> {
    let consistent = lambda1_drift_with(&hs.pack, opts.eigen)?;
    let lumped = lambda1_lumped(&hs.pack)?;
    Ok((consistent.clone(), (consistent.lambda1 - lumped.lambda1).abs()))
}

fn bound_report(check: &str, hs: &Hypersurface, rhs: f64, opts: &BoundOptions) -> Result<CheckReport> {
    let (eig, err) = eigen_with_estimate(hs, opts)?;
    let tol = opts.error_factor * err + 1e-9 * rhs.abs();
    let mut report = CheckReport::inequality(check, eig.lambda1, rhs, tol)
        .with_equality_tolerance(opts.equality_tol)
        .detail("lambda2", eig.lambda2)
        .detail("eigen_residual", eig.residual)
        .detail("discretization_error", err)
        .detail("h", hs.mesh.mesh_size());
    if eig.near_degenerate {
        report = report.note("first eigenvalue is (nearly) multiple");
    }
    Ok(report)
}

/// `λ₁ ≤ nδ + (1/n) max_M |H_f − ∇̄f|²` for `δ < 0`.
pub fn lambda1_max_bound(hs: &Hypersurface, opts: &BoundOptions) -> Result<CheckReport> {
    let space = hs.space().clone();
    let delta = space.delta();
    if delta >= 0.0 {
        return Err(LabError::WrongCurvatureSign { delta });
    }
    let n = hs.n() as f64;
    let max_sq = hs.fields.hf_minus_gradf_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rhs = n * delta + max_sq / n;
    let com = weighted_center_of_mass(hs)?;
    let rad = radial(hs, &com.point)?;
    // integrals of the intermediate inequality, for inspection
    let xt2 = hs.integrate(|i| {
        let x = space.radial_field(&com.point, &hs.fields.points[i]).unwrap_or_else(|_| Tangent::zeros(rad.v[i].len()));
        space.norm(&hs.fields.tangential(i, &x)).powi(2)
    });
    let l32_lhs = delta * xt2;
    let l32_rhs = n * hs.integrate(|i| rad.c[i] * rad.c[i]) - hs.integrate(|i| rad.c[i] * rad.s[i] * space.norm(&rad.v[i]));
    Ok(bound_report("lambda1_max_bound", hs, rhs, opts)?
        .detail("max_hf_minus_gradf_sq", max_sq)
        .detail("intermediate_lhs", l32_lhs)
        .detail("intermediate_rhs", l32_rhs)
        .detail("center_residual", com.gradient_norm))
}

/// `λ₁ ≤ nδ + (1/(n Vol_f)) ∫ |H_f − ∇̄f|² dμ` for `δ ≥ 0`, with `M` inside
/// a geodesic ball of radius `π/(4√δ)` about its center of mass.
pub fn lambda1_mean_bound(hs: &Hypersurface, opts: &BoundOptions) -> Result<CheckReport> {
    let delta = hs.space().delta();
    if delta < 0.0 {
        return Err(LabError::WrongCurvatureSign { delta });
    }
    let com = weighted_center_of_mass(hs)?;
    if delta > 0.0 {
        let limit = PI / (4.0 * delta.sqrt());
        if com.max_distance > limit + 1e-12 {
            return Err(LabError::OutOfBall { radius: com.max_distance, limit });
        }
    }
    let n = hs.n() as f64;
    let mean_sq = hs.integrate(|i| hs.fields.hf_minus_gradf_sq[i]) / hs.volume();
    let rhs = n * delta + mean_sq / n;
    Ok(bound_report("lambda1_mean_bound", hs, rhs, opts)?
        .detail("mean_hf_minus_gradf_sq", mean_sq)
        .detail("max_distance_to_center", com.max_distance)
        .detail("center_residual", com.gradient_norm)
        .hypothesis("ball_containment", HypothesisState::Satisfied))
}

/// Threshold on `Var(f)` below which the multiplier is not identifiable.
pub const CONSTANT_F_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct EqualityDiagnostic {
    /// Fitted `λ` in `s_δ ∇̄r = λ (H_f − ∇̄f)`; `None` when `f` is constant.
    pub lambda: Option<f64>,
    /// Weighted standard deviation of `F = λ f + ∫₀^r s_δ` over `M`.
    pub deviation: f64,
    pub f_variance: f64,
    pub relative_gap: f64,
}

fn weighted_std(hs: &Hypersurface, v: &[f64]) -> f64 {
    let vol = hs.volume();
    let mean = hs.integrate(|i| v[i]) / vol;
    (hs.integrate(|i| (v[i] - mean).powi(2)) / vol).max(0.0).sqrt()
}

/// Checks the equality structure of the `δ ≥ 0` bound on a run whose
/// relative gap is below `equality_tol`.
pub fn equality_diagnostic(hs: &Hypersurface, bound: &CheckReport, equality_tol: f64) -> Result<EqualityDiagnostic> {
    if !(bound.relative_gap.abs() < equality_tol) {
        return Err(LabError::NotNearEquality { relative_gap: bound.relative_gap, tolerance: equality_tol });
    }
    let space = hs.space().clone();
    let com = weighted_center_of_mass(hs)?;
    let rad = radial(hs, &com.point)?;
    let f_variance = weighted_std(hs, &hs.fields.f_val).powi(2);
    let lambda = if f_variance < CONSTANT_F_VARIANCE {
        None
    } else {
        // least squares for s ∇̄r ≈ λ V
        let num = hs.integrate(|i| rad.s[i] * space.inner(&rad.grad_r[i], &rad.v[i]));
        let den = hs.integrate(|i| space.inner(&rad.v[i], &rad.v[i]));
        Some(num / den)
    };
    let lam = lambda.unwrap_or(0.0);
    let big_f: Vec<f64> = (0..hs.fields.len()).map(|i| lam * hs.fields.f_val[i] + s_delta_primitive(space.delta(), rad.r[i])).collect();
    Ok(EqualityDiagnostic { lambda, deviation: weighted_std(hs, &big_f), f_variance, relative_gap: bound.relative_gap })
}

/// Positive root of `r s_δ(r) = 2n c_δ(r)`: the radius at which the sphere
/// about the origin has zero weighted mean curvature for `f = r²/4`.
pub fn shrinker_radius(delta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(LabError::InvalidParams("dimension must be positive".into()));
    }
    let nn = 2.0 * n as f64;
    if delta == 0.0 {
        return Ok(nn.sqrt());
    }
    let g = |r: f64| r * crate::spaceform::s_delta(delta, r) - nn * crate::spaceform::c_delta(delta, r);
    let (mut lo, mut hi) = (0.0, if delta > 0.0 { PI / (2.0 * delta.sqrt()) } else { nn.sqrt() });
    if delta < 0.0 {
        while g(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(LabError::NoRoot("bracket expansion failed".into()));
            }
        }
    } else if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(LabError::NoRoot(format!("no sign change on (0, π/(2√δ)) for δ = {delta}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = if g(lo).abs() < g(hi).abs() { lo } else { hi };
    if g(r).abs() >= 1e-12 * (1.0 + nn * crate::spaceform::c_delta(delta, r).abs()) {
        return Err(LabError::NoRoot(format!("residual {} after bisection", g(r))));
    }
    Ok(r)
}

/// On the Euclidean sphere of the shrinker radius with `f = |x|²/4`,
/// `H_f ≡ 0` while `|H_f − ∇̄f|² = |H|² > 0`: the bound cannot be stated
/// with `|H_f|²` alone, since that would give `λ₁ ≤ 0`.
pub fn shrinker_report(n: usize, resolution: usize) -> Result<CheckReport> {
    let r0 = shrinker_radius(0.0, n)?;
    let space = AmbientSpace::euclidean(n + 1);
    let res = match n {
        1 => SphereResolution::Segments(resolution),
        2 => SphereResolution::Subdivisions(resolution),
        _ => return Err(LabError::Unsupported("shrinker spheres are meshed for n = 1, 2".into())),
    };
    let hs = Hypersurface::geodesic_sphere(&space, r0, res, &DensityField::gaussian(0.25))?;
    let max_hf = hs.fields.hf.iter().map(|h| h.abs()).fold(0.0, f64::max);
    let min_q = hs.fields.hf_minus_gradf_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_hf_sq = hs.integrate(|i| hs.fields.hf[i].powi(2)) / hs.volume();
    let mean_q = hs.integrate(|i| hs.fields.hf_minus_gradf_sq[i]) / hs.volume();
    let eig = lambda1_drift_with(&hs.pack, EigenOptions::default())?;
    let nf = n as f64;
    // λ₁ must exceed the bound built from |H_f|² alone
    Ok(CheckReport::inequality("shrinker_sphere", mean_hf_sq / nf, eig.lambda1, 0.0)
        .detail("radius", r0)
        .detail("max_abs_hf", max_hf)
        .detail("min_hf_minus_gradf_sq", min_q)
        .detail("bound_with_hf_minus_gradf", mean_q / nf)
        .detail("bound_with_hf_only", mean_hf_sq / nf)
        .detail("lambda1", eig.lambda1)
        .note("weighted mean curvature vanishes, so |H_f|^2 cannot replace |H_f - grad f|^2"))
}

/// Round sphere or circle of radius `radius` about the origin with fields
/// computed from the mesh.
pub fn embedded_sphere(n: usize, radius: f64, resolution: usize, field: &DensityField) -> Result<Hypersurface> {
    let mesh = match n {
        1 => gen_circle(radius, resolution)?,
        2 => gen_icosphere(radius, resolution)?,
        _ => return Err(LabError::Unsupported("embedded spheres exist for n = 1, 2".into())),
    };
    Hypersurface::embedded(mesh, field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_ellipse_curve, gen_perturbed_sphere};
    use crate::quadrature::integrate_composite;
    use crate::report::Status;

    fn circle(n: usize, f: &DensityField) -> Hypersurface {
        embedded_sphere(1, 1.0, n, f).unwrap()
    }

    #[test]
    fn center_of_mass_symmetry_and_translation() {
        let hs = circle(64, &DensityField::zero());
        let c = weighted_center_of_mass(&hs).unwrap();
        assert!(c.point.norm() < 1e-14);
        let moved = Hypersurface::embedded(gen_circle(1.0, 64).unwrap().translated(&[1.0, 0.0]).unwrap(), &DensityField::zero()).unwrap();
        let c = weighted_center_of_mass(&moved).unwrap();
        assert!((c.point[0] - 1.0).abs() < 1e-12 && c.point[1].abs() < 1e-12);
    }

    #[test]
    fn center_of_mass_linear_weight_oracle() {
        // ∫ cos θ e^{-cos θ} dθ / ∫ e^{-cos θ} dθ = −I1(1)/I0(1)
        let hs = circle(1024, &DensityField::linear(vec![1.0, 0.0]));
        let c = weighted_center_of_mass(&hs).unwrap();
        let num = integrate_composite(0.0, 2.0 * PI, 32, 10, |t| t.cos() * (-t.cos()).exp());
        let den = integrate_composite(0.0, 2.0 * PI, 32, 10, |t| (-t.cos()).exp());
        assert!(c.point[0] < 0.0);
        assert!((c.point[0] - num / den).abs() < 1e-4, "{} {}", c.point[0], num / den);
    }

    #[test]
    fn curved_center_is_origin_for_geodesic_spheres() {
        for (delta, rho) in [(1.0, PI / 6.0), (-1.0, 1f64.asinh())] {
            let space = AmbientSpace::new(delta, 3).unwrap();
            let hs = Hypersurface::geodesic_sphere(&space, rho, SphereResolution::Subdivisions(2), &DensityField::zero()).unwrap();
            let c = weighted_center_of_mass(&hs).unwrap();
            assert!(space.distance(&c.point, &space.origin()) < 1e-10);
            assert!(c.gradient_norm < 1e-12 && c.karcher_residual < 1e-9);
        }
    }

    #[test]
    fn curved_center_of_off_center_cloud() {
        // a geodesic sphere moved away from the origin by an isometry
        let space = AmbientSpace::new(1.0, 3).unwrap();
        let mut hs = Hypersurface::geodesic_sphere(&space, 0.4, SphereResolution::Subdivisions(2), &DensityField::zero()).unwrap();
        let (a, b) = (0.3f64.cos(), 0.3f64.sin());
        for p in hs.fields.points.iter_mut() {
            let (x0, x1) = (p[0], p[1]);
            p[0] = a * x0 - b * x1;
            p[1] = b * x0 + a * x1;
        }
        let c = weighted_center_of_mass(&hs).unwrap();
        let expected = Point::from_vec(vec![a, b, 0.0, 0.0]);
        assert!(space.distance(&c.point, &expected) < 1e-10);
        let phis = test_functions(&hs, &c.point).unwrap();
        for col in &phis {
            let m = hs.integrate(|i| col[i]);
            assert!(m.abs() < 1e-10);
        }
    }

    #[test]
    fn test_function_identities() {
        let hs = Hypersurface::embedded(gen_ellipse_curve(2.0, 1.0, 128).unwrap(), &DensityField::linear(vec![0.3, 0.1])).unwrap();
        let c = weighted_center_of_mass(&hs).unwrap();
        let phis = test_functions(&hs, &c.point).unwrap();
        assert_eq!(phis.len(), 2);
        for i in 0..hs.fields.len() {
            let r = hs.space().distance(&c.point, &hs.fields.points[i]);
            let s: f64 = phis.iter().map(|p| p[i] * p[i]).sum();
            assert!((s - r * r).abs() < 1e-12);
        }
        for col in &phis {
            let max = col.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(hs.integrate(|i| col[i]).abs() < 1e-8 * hs.volume() * max);
        }
        let space = AmbientSpace::new(1.0, 2).unwrap();
        let hs = Hypersurface::geodesic_sphere(&space, PI / 6.0, SphereResolution::Segments(64), &DensityField::zero()).unwrap();
        let phis = test_functions(&hs, &space.origin()).unwrap();
        assert_eq!(phis.len(), 3);
        assert!(phis[2].iter().all(|x| x.abs() < 1e-14));
        for i in 0..hs.fields.len() {
            let s: f64 = phis[..2].iter().map(|p| p[i] * p[i]).sum();
            assert!((s - space.s(PI / 6.0).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_chain_sphere_equality_and_ellipse_strict() {
        let space = AmbientSpace::euclidean(3);
        let hs = Hypersurface::geodesic_sphere(&space, 1.5, SphereResolution::Subdivisions(2), &DensityField::zero()).unwrap();
        let c = weighted_center_of_mass(&hs).unwrap();
        let r = radial_chain_check(&hs, &c.point).unwrap();
        assert!(r.pass && r.gap.abs() < 1e-10 * r.rhs);
        assert!((r.details["ratio_middle_right"] - 1.0).abs() < 1e-12);
        let e = Hypersurface::embedded(gen_ellipse_curve(2.0, 1.0, 256).unwrap(), &DensityField::zero()).unwrap();
        let c = weighted_center_of_mass(&e).unwrap();
        let r = radial_chain_check(&e, &c.point).unwrap();
        assert!(r.pass && r.details["ratio_middle_right"] < 1.0 && r.gap > 0.0, "{r:?}");
        assert!(r.details["first_gap"] > -1e-3 * r.lhs);
    }

    #[test]
    fn gradient_sum_parts() {
        for hs in [
            Hypersurface::embedded(gen_perturbed_sphere(1.0, 2, 0.1, 7).unwrap(), &DensityField::gaussian(0.2)).unwrap(),
            Hypersurface::embedded(gen_ellipse_curve(2.0, 1.0, 64).unwrap(), &DensityField::zero()).unwrap(),
        ] {
            let c = weighted_center_of_mass(&hs).unwrap();
            let r = gradient_sum_check(&hs, &c.point).unwrap();
            assert!(r.pass, "{r:?}");
            assert!((r.details["max_gradient_sum"] - hs.n() as f64).abs() < 1e-10);
            assert!(r.details["product_gap"] > 0.0);
        }
        let space = AmbientSpace::new(-1.0, 3).unwrap();
        let hs = Hypersurface::geodesic_sphere(&space, 1f64.asinh(), SphereResolution::Subdivisions(2), &DensityField::zero()).unwrap();
        let c = weighted_center_of_mass(&hs).unwrap();
        let r = gradient_sum_check(&hs, &c.point).unwrap();
        assert!(r.pass && (r.details["max_gradient_sum"] - 2.0).abs() < 1e-8, "{r:?}");
        assert!(r.details["product_gap"].abs() < 1e-10 * r.details["product_rhs"]);
    }

    #[test]
    fn mean_bound_flat_equality() {
        let hs = circle(512, &DensityField::zero());
        let r = lambda1_mean_bound(&hs, &BoundOptions::default()).unwrap();
        assert!(r.pass && r.equality, "{r:?}");
        assert!((r.lhs - 1.0).abs() < 5e-3 && (r.rhs - 1.0).abs() < 5e-3);
        let d = equality_diagnostic(&hs, &r, 2e-2).unwrap();
        assert!(d.lambda.is_none() && d.deviation < 1e-10);
        let hs = embedded_sphere(2, 1.0, 4, &DensityField::zero()).unwrap();
        let r = lambda1_mean_bound(&hs, &BoundOptions::default()).unwrap();
        assert!(r.pass && (r.lhs - 2.0).abs() < 0.02 * 2.0 && (r.rhs - 2.0).abs() < 0.02 * 2.0, "{r:?}");
    }

    #[test]
    fn mean_bound_strict_and_spherical() {
        let hs = circle(512, &DensityField::linear(vec![0.3, 0.0]));
        let r = lambda1_mean_bound(&hs, &BoundOptions::default()).unwrap();
        assert!(r.pass && r.gap > 0.0 && !r.equality, "{r:?}");
        let space = AmbientSpace::new(1.0, 3).unwrap();
        let rho = PI / 6.0;
        let hs = Hypersurface::geodesic_sphere(&space, rho, SphereResolution::Subdivisions(4), &DensityField::zero()).unwrap();
        let r = lambda1_mean_bound(&hs, &BoundOptions::default()).unwrap();
        let bound = 2.0 / space.s(rho).powi(2);
        assert!((r.rhs - bound).abs() < 1e-10 * bound);
        assert!(r.pass && (r.lhs - bound).abs() < 0.02 * bound, "{r:?}");
        let hs = Hypersurface::geodesic_sphere(&space, 1.0, SphereResolution::Subdivisions(1), &DensityField::zero()).unwrap();
        assert!(matches!(lambda1_mean_bound(&hs, &BoundOptions::default()), Err(LabError::OutOfBall { .. })));
        let hyp = Hypersurface::geodesic_sphere(&AmbientSpace::new(-1.0, 2).unwrap(), 1.0, SphereResolution::Segments(32), &DensityField::zero()).unwrap();
        assert!(matches!(lambda1_mean_bound(&hyp, &BoundOptions::default()), Err(LabError::WrongCurvatureSign { .. })));
    }

    #[test]
    fn perturbed_sphere_is_strict() {
        let hs = Hypersurface::embedded(gen_perturbed_sphere(1.0, 3, 0.2, 11).unwrap(), &DensityField::zero()).unwrap();
        let r = lambda1_mean_bound(&hs, &BoundOptions::default()).unwrap();
        assert!(r.pass && r.relative_gap > 0.02, "{r:?}");
        assert!(matches!(equality_diagnostic(&hs, &r, 2e-2), Err(LabError::NotNearEquality { .. })));
    }

    #[test]
    fn max_bound_hyperbolic_equality() {
        let rho = 1f64.asinh();
        for (d, res) in [(2, SphereResolution::Segments(512)), (3, SphereResolution::Subdivisions(4))] {
            let space = AmbientSpace::new(-1.0, d).unwrap();
            let hs = Hypersurface::geodesic_sphere(&space, rho, res, &DensityField::zero()).unwrap();
            let r = lambda1_max_bound(&hs, &BoundOptions::default()).unwrap();
            let n = (d - 1) as f64;
            let bound = n / rho.sinh().powi(2);
            assert!((r.rhs - bound).abs() < 1e-10 * bound);
            assert!(r.pass && (r.lhs - bound).abs() < 0.02 * bound, "{r:?}");
        }
        let space = AmbientSpace::new(-1.0, 3).unwrap();
        // a centred Gaussian is constant on the sphere and keeps equality
        let g = DensityField::Gaussian { a: 1.0, center: vec![0.8, 0.0, 0.0] };
        let hs = Hypersurface::geodesic_sphere(&space, rho, SphereResolution::Subdivisions(3), &g).unwrap();
        let r = lambda1_max_bound(&hs, &BoundOptions::default()).unwrap();
        assert!(r.pass && r.relative_gap > 0.02, "{r:?}");
        let flat = circle(64, &DensityField::zero());
        assert!(matches!(lambda1_max_bound(&flat, &BoundOptions::default()), Err(LabError::WrongCurvatureSign { .. })));
    }

    #[test]
    fn shrinker_radii() {
        assert_eq!(shrinker_radius(0.0, 2).unwrap(), 2.0);
        assert!((shrinker_radius(0.0, 1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        for (delta, n) in [(-1.0, 1), (-0.5, 2), (1.0, 1), (4.0, 3)] {
            let r = shrinker_radius(delta, n).unwrap();
            let g = r * crate::spaceform::s_delta(delta, r) - 2.0 * n as f64 * crate::spaceform::c_delta(delta, r);
            assert!(g.abs() < 1e-12, "{delta} {n} {g}");
        }
    }

    #[test]
    fn shrinker_sphere_has_zero_weighted_curvature() {
        for (n, res) in [(1, 256), (2, 3)] {
            let r = shrinker_report(n, res).unwrap();
            assert!(r.details["max_abs_hf"] < 1e-8);
            assert!(r.details["min_hf_minus_gradf_sq"] > 0.1);
            assert!(r.pass && r.status == Status::Pass);
        }
    }
}
