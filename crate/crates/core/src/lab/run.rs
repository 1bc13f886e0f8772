//! Executes resolved scenarios across their refinement ladders.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{CheckId, Geometry, ResolvedScenario};
use crate::density::{certify_nonneg_be, SampleRegion};
use crate::error::{LabError, Result};
use crate::heintze::{
    equality_diagnostic, gradient_sum_check, lambda1_max_bound, lambda1_mean_bound, radial_chain_check, shrinker_radius,
    shrinker_report, weighted_center_of_mass, BoundOptions, Hypersurface,
};
use crate::mesh::{
    gen_annulus, gen_circle, gen_disk, gen_ellipse_curve, gen_ellipse_domain, gen_icosphere, gen_perturbed_sphere, gen_wedge_off_center,
    gen_wedge_with_cutoff, load_mesh, CellKind, SimplicialMesh, SphereResolution,
};
use crate::ops::assemble;
use crate::reilly::{
    bochner_gap, check_cone, check_linear_isoperimetric, check_linear_isoperimetric_ball, check_ros, check_ros_ball, reilly_residual,
    solve_dirichlet, CheckOptions, Quadratic,
};
use crate::report::{CheckReport, HypothesisState, LevelRecord, Status};
use crate::spectrum::SEED;

/// Quadrature tolerance of the mesh-free ball checks.
pub const ANALYTIC_BALL_TOL: f64 = 1e-10;

/// A geometry instantiated at one refinement level.
pub enum Built {
    None,
    Domain(SimplicialMesh),
    Surface(Box<Hypersurface>),
    Ball { radius: f64 },
}

impl Built {
    pub fn mesh(&self) -> Option<&SimplicialMesh> {
        match self {
            Built::Domain(m) => Some(m),
            Built::Surface(h) => Some(&h.mesh),
            _ => None,
        }
    }

    fn h(&self) -> f64 {
        self.mesh().map_or(0.0, |m| m.mesh_size())
    }
}

/// Generates the plain mesh of a mesh geometry (no fields attached).
pub fn generate_mesh(g: &Geometry) -> Result<SimplicialMesh> {
    match g {
        Geometry::Circle { radius, n_segments } => gen_circle(*radius, *n_segments),
        Geometry::EllipseCurve { a, b, n_segments } => gen_ellipse_curve(*a, *b, *n_segments),
        Geometry::Icosphere { radius, subdivisions } => gen_icosphere(*radius, *subdivisions),
        Geometry::PerturbedSphere { radius, subdivisions, amplitude, seed } => gen_perturbed_sphere(*radius, *subdivisions, *amplitude, *seed),
        Geometry::Disk { radius, n_rings } => gen_disk(*radius, *n_rings),
        Geometry::EllipseDomain { a, b, n_rings } => gen_ellipse_domain(*a, *b, *n_rings),
        Geometry::Annulus { r_in, r_out, n_rings } => gen_annulus(*r_in, *r_out, *n_rings),
        Geometry::Wedge { radius, opening_angle, n_rings, cutoff_ratio } => gen_wedge_with_cutoff(*radius, *opening_angle, *n_rings, *cutoff_ratio),
        Geometry::WedgeOffCenter { center, radius, opening_angle, n_rings, cutoff_ratio } => {
            gen_wedge_off_center(*center, *radius, *opening_angle, *n_rings, *cutoff_ratio)
        }
        Geometry::File { path } => load_mesh(path),
        Geometry::None | Geometry::Ball { .. } | Geometry::GeodesicSphere { .. } => {
            Err(LabError::InvalidParams("this geometry is not a standalone mesh".into()))
        }
    }
}

pub fn build(sc: &ResolvedScenario, level: usize) -> Result<Built> {
    let g = sc.geometry.at_level(level, sc.ambient.dim);
    let f = sc.translated_density();
    let built = match &g {
        Geometry::None => Built::None,
        Geometry::Ball { radius } => Built::Ball { radius: *radius },
        Geometry::GeodesicSphere { rho, resolution } => {
            let res = if sc.ambient.dim == 2 { SphereResolution::Segments(*resolution) } else { SphereResolution::Subdivisions(*resolution) };
            Built::Surface(Box::new(Hypersurface::geodesic_sphere(&sc.space(), *rho, res, &f)?))
        }
        _ => {
            let mut mesh = generate_mesh(&g)?;
            if !sc.translate.is_empty() {
                mesh = mesh.translated(&sc.translate)?;
            }
            match mesh.kind() {
                CellKind::PlanarDomain => Built::Domain(mesh),
                _ => {
                    if mesh.ambient_dim() != sc.ambient.dim {
                        return Err(LabError::InvalidParams(format!(
                            "mesh lives in dimension {}, ambient has {}",
                            mesh.ambient_dim(),
                            sc.ambient.dim
                        )));
                    }
                    Built::Surface(Box::new(Hypersurface::embedded(mesh, &f)?))
                }
            }
        }
    };
    Ok(built)
}

fn wrong_geometry(check: CheckId) -> LabError {
    LabError::InvalidParams(format!("check '{}' does not apply to this geometry", check.name()))
}

fn sample_radius(built: &Built) -> f64 {
    match built {
        Built::Domain(m) => m.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max),
        Built::Surface(h) => {
            let space = h.space();
            let o = space.origin();
            h.fields.points.iter().map(|p| space.distance(&o, p)).fold(0.0, f64::max)
        }
        Built::Ball { radius } => *radius,
        Built::None => 1.0,
    }
}

fn bochner_sampled(sc: &ResolvedScenario) -> Result<CheckReport> {
    let d = sc.ambient.dim;
    let params = sc.params();
    let f = sc.translated_density();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut min_gap = f64::INFINITY;
    for _ in 0..sc.tolerances.bochner_samples {
        let mut a = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i..d {
                let v = rng.gen_range(-2.0..2.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u = Quadratic::new(0.0, b, a)?;
        min_gap = min_gap.min(bochner_gap(&f, &params, &x, &u)?);
    }
    Ok(CheckReport::inequality("bochner_sampled", 0.0, min_gap, 1e-12)
        .detail("samples", sc.tolerances.bochner_samples as f64)
        .detail("min_gap", min_gap))
}

fn equality_report(hs: &Hypersurface, sc: &ResolvedScenario, eq_tol: f64) -> Result<CheckReport> {
    let opts = BoundOptions { equality_tol: eq_tol, error_factor: sc.tolerances.error_factor, ..Default::default() };
    let bound = if hs.space().delta() < 0.0 { lambda1_max_bound(hs, &opts)? } else { lambda1_mean_bound(hs, &opts)? };
    match equality_diagnostic(hs, &bound, eq_tol) {
        Ok(d) => {
            let mut r = CheckReport::identity("equality_diagnostic", d.deviation, 0.0, 1e-8)
                .detail("deviation", d.deviation)
                .detail("f_variance", d.f_variance)
                .detail("bound_relative_gap", d.relative_gap)
                .hypothesis("near_equality", HypothesisState::Satisfied);
            r = match d.lambda {
                Some(l) => r.detail("lambda", l),
                None => r.note("f is constant on M: the multiplier is unconstrained"),
            };
            Ok(r)
        }
        Err(LabError::NotNearEquality { relative_gap, tolerance }) => Ok(CheckReport::identity("equality_diagnostic", 0.0, 0.0, 0.0)
            .detail("bound_relative_gap", relative_gap)
            .detail("equality_tol", tolerance)
            .hypothesis("near_equality", HypothesisState::Failed)
            .note("the eigenvalue bound is not attained within tolerance; no equality structure to test")),
        Err(e) => Err(e),
    }
}

/// Runs one check on one level.
pub fn run_check(sc: &ResolvedScenario, built: &Built, check: CheckId, eq_tol: f64) -> Result<CheckReport> {
    let f = sc.translated_density();
    let params = sc.params();
    let t = &sc.tolerances;
    let opts = CheckOptions { tolerance: t.tolerance, equality_tol: eq_tol, be_samples: t.be_samples };
    let d = sc.ambient.dim;
    match (check, built) {
        (CheckId::Ros, Built::Domain(m)) => check_ros(m, &f, &params, &opts),
        (CheckId::Ros, Built::Ball { radius }) => check_ros_ball(*radius, d, &f, &params, ANALYTIC_BALL_TOL),
        (CheckId::Cone, Built::Domain(m)) => check_cone(m, &f, &params, &opts),
        (CheckId::LinearIsoperimetric, Built::Domain(m)) => check_linear_isoperimetric(m, &f, &params, &opts),
        (CheckId::LinearIsoperimetric, Built::Ball { radius }) => {
            check_linear_isoperimetric_ball(*radius, d, &f, &params, ANALYTIC_BALL_TOL)
        }
        (CheckId::Reilly, Built::Domain(m)) => reilly_residual(m, &f, &sc.u, t.tolerance),
        (CheckId::EnergyIdentity, Built::Domain(m)) => {
            let sol = solve_dirichlet(m, &f)?;
            let rhs = -crate::sparse::dot(&sol.u, &sol.load);
            Ok(CheckReport::identity("energy_identity", sol.energy, rhs, 1e-9 * sol.energy.abs().max(rhs.abs()))
                .detail("solver_residual", sol.residual)
                .detail("h", m.mesh_size()))
        }
        (CheckId::BeCertificate, _) => {
            let region = SampleRegion { center: vec![], radius: sample_radius(built) };
            let mut r = certify_nonneg_be(&sc.space(), &f, &params, &region, t.be_samples)?;
            r = r.detail("sample_radius", region.radius);
            if !r.pass {
                r = r.hypothesis("be_nonnegative", HypothesisState::Failed);
            }
            Ok(r)
        }
        (CheckId::BochnerSampled, _) => bochner_sampled(sc),
        (CheckId::Lambda1MaxBound | CheckId::Lambda1MeanBound, Built::Surface(hs)) => {
            let bopts = BoundOptions { equality_tol: eq_tol, error_factor: t.error_factor, ..Default::default() };
            if check == CheckId::Lambda1MaxBound {
                lambda1_max_bound(hs, &bopts)
            } else {
                lambda1_mean_bound(hs, &bopts)
            }
        }
        (CheckId::RadialChain | CheckId::GradientSum, Built::Surface(hs)) => {
            let com = weighted_center_of_mass(hs)?;
            let r = if check == CheckId::RadialChain { radial_chain_check(hs, &com.point)? } else { gradient_sum_check(hs, &com.point)? };
            Ok(r.detail("center_residual", com.gradient_norm).detail("h", hs.mesh.mesh_size()))
        }
        (CheckId::EqualityDiagnostic, Built::Surface(hs)) => equality_report(hs, sc, eq_tol),
        (CheckId::ShrinkerSphere, Built::None) => {
            let n = d - 1;
            let res = if n == 1 { 256 } else { 3 };
            Ok(shrinker_report(n, res)?.detail("shrinker_radius_formula", shrinker_radius(0.0, n)?))
        }
        (c, _) => Err(wrong_geometry(c)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckError {
    pub kind: String,
    pub message: String,
}

impl From<&LabError> for CheckError {
    fn from(e: &LabError) -> Self {
        let dbg = format!("{e:?}");
        let kind = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string();
        CheckError { kind, message: e.to_string() }
    }
}

#[derive(Debug, Clone)]
pub enum CheckOutcome {
    Report(Box<CheckReport>),
    Error(CheckError),
}

impl CheckOutcome {
    pub fn failed(&self) -> bool {
        match self {
            CheckOutcome::Report(r) => r.status == Status::Fail,
            CheckOutcome::Error(_) => true,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CheckOutcome::Report(r) => serde_json::to_value(r).unwrap_or(Value::Null),
            CheckOutcome::Error(e) => json!({ "error": e }),
        }
    }
}

pub struct ScenarioOutcome {
    pub scenario: ResolvedScenario,
    pub checks: BTreeMap<CheckId, CheckOutcome>,
    pub wall_time: BTreeMap<String, f64>,
}

impl ScenarioOutcome {
    pub fn failed(&self) -> bool {
        self.checks.values().any(CheckOutcome::failed)
    }

    /// The deterministic part of the report.
    pub fn data(&self) -> Value {
        let checks: serde_json::Map<String, Value> = self.checks.iter().map(|(k, v)| (k.name(), v.to_json())).collect();
        json!({
            "scenario": self.scenario.name,
            "config": self.scenario,
            "checks": checks,
            "status": if self.failed() { "fail" } else { "pass" },
        })
    }

    pub fn timing(&self) -> Value {
        json!({ "wall_time_s": self.wall_time })
    }
}

/// Runs every check of a scenario on each level of its ladder. The report of
/// the finest level is kept, with the per-level history attached.
pub fn run_scenario(sc: &ResolvedScenario, dump_dir: Option<&Path>) -> ScenarioOutcome {
    let start = Instant::now();
    let levels = sc.refinement_levels;
    let mut per_check: BTreeMap<CheckId, (Vec<LevelRecord>, Option<CheckOutcome>)> = BTreeMap::new();
    let mut times: BTreeMap<String, f64> = BTreeMap::new();
    for level in 0..levels {
        let t0 = Instant::now();
        let built = build(sc, level);
        *times.entry("build".into()).or_default() += t0.elapsed().as_secs_f64();
        let built = match built {
            Ok(b) => b,
            Err(e) => {
                for &c in &sc.checks {
                    per_check.entry(c).or_default().1 = Some(CheckOutcome::Error((&e).into()));
                }
                break;
            }
        };
        if let (Some(dir), Some(mesh)) = (dump_dir, built.mesh()) {
            let pack = match &built {
                Built::Surface(h) => Ok(h.pack.clone()),
                _ => assemble(mesh, &sc.translated_density()),
            };
            if let Ok(pack) = pack {
                let _ = std::fs::create_dir_all(dir);
                let _ = pack.dump_matrix_market(dir, &format!("{}_level{}", sc.name, level));
            }
        }
        let last = level + 1 == levels;
        let eq_tol = if last { sc.tolerances.finest_equality_tol } else { sc.tolerances.equality_tol };
        let h = built.h();
        for &c in &sc.checks {
            let entry = per_check.entry(c).or_default();
            if matches!(entry.1, Some(CheckOutcome::Error(_))) {
                continue;
            }
            let t1 = Instant::now();
            let result = run_check(sc, &built, c, eq_tol);
            *times.entry(c.name()).or_default() += t1.elapsed().as_secs_f64();
            match result {
                Ok(r) => {
                    entry.0.push(LevelRecord { level, h, lhs: r.lhs, rhs: r.rhs, gap: r.gap });
                    entry.1 = Some(CheckOutcome::Report(Box::new(r)));
                }
                Err(e) => entry.1 = Some(CheckOutcome::Error((&e).into())),
            }
        }
    }
    times.insert("total".into(), start.elapsed().as_secs_f64());
    let checks = per_check
        .into_iter()
        .map(|(c, (history, outcome))| {
            let outcome = match outcome {
                Some(CheckOutcome::Report(mut r)) => {
                    r.history = history;
                    CheckOutcome::Report(r)
                }
                Some(other) => other,
                None => CheckOutcome::Error(CheckError { kind: "NotRun".into(), message: "check did not run".into() }),
            };
            (c, outcome)
        })
        .collect();
    ScenarioOutcome { scenario: sc.clone(), checks, wall_time: times }
}

/// Least-squares slope of `log|gap|` against `log h`; `None` with fewer
/// than two usable levels.
pub fn fitted_order(history: &[LevelRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        history.iter().filter(|r| r.h > 0.0 && r.gap != 0.0 && r.gap.is_finite()).map(|r| (r.h.ln(), r.gap.abs().ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit() {
        let hist: Vec<LevelRecord> = (0..3)
            .map(|k| {
                let h = 0.1 / 2f64.powi(k);
                LevelRecord { level: k as usize, h, lhs: 0.0, rhs: 0.0, gap: 3.0 * h * h }
            })
            .collect();
        assert!((fitted_order(&hist).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&hist[..1]).is_none());
    }
}
