//! Scenario configuration: JSON schema, defaults and validation.
//!
//! Unknown keys are rejected everywhere so that a misspelt tolerance cannot
//! silently fall back to its default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::{BakryEmeryParams, DensityField, MParam};
use crate::error::{LabError, Result};
use crate::reilly::Quadratic;
use crate::spaceform::AmbientSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ambient {
    #[serde(default)]
    pub delta: f64,
    pub dim: usize,
}

/// Geometry generators. Resolution parameters are those of level 0; each
/// refinement level doubles segment and ring counts and adds one
/// subdivision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// No mesh: pointwise and analytic checks only.
    None,
    Circle { radius: f64, n_segments: usize },
    EllipseCurve { a: f64, b: f64, n_segments: usize },
    Icosphere { radius: f64, subdivisions: usize },
    PerturbedSphere { radius: f64, subdivisions: usize, amplitude: f64, seed: u64 },
    /// Geodesic sphere of radius `rho` about the origin of the ambient space,
    /// with analytic fields. `resolution` is a segment count for circles and
    /// a subdivision level for 2-spheres.
    GeodesicSphere { rho: f64, resolution: usize },
    Disk { radius: f64, n_rings: usize },
    EllipseDomain { a: f64, b: f64, n_rings: usize },
    Annulus { r_in: f64, r_out: f64, n_rings: usize },
    Wedge {
        radius: f64,
        opening_angle: f64,
        n_rings: usize,
        #[serde(default = "default_cutoff")]
        cutoff_ratio: f64,
    },
    WedgeOffCenter {
        center: [f64; 2],
        radius: f64,
        opening_angle: f64,
        n_rings: usize,
        #[serde(default = "default_cutoff")]
        cutoff_ratio: f64,
    },
    /// Euclidean ball, evaluated from its radial profile without meshing.
    Ball { radius: f64 },
    File { path: PathBuf },
}

fn default_cutoff() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Ros,
    Cone,
    LinearIsoperimetric,
    Reilly,
    EnergyIdentity,
    BeCertificate,
    BochnerSampled,
    Lambda1MaxBound,
    Lambda1MeanBound,
    RadialChain,
    GradientSum,
    EqualityDiagnostic,
    ShrinkerSphere,
}

impl CheckId {
    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the isoperimetric and identity checks.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Relative gap below which equality is flagged.
    #[serde(default)]
    pub equality_tol: Option<f64>,
    /// Multiple of the eigenvalue discretisation estimate allowed as slack.
    #[serde(default)]
    pub error_factor: Option<f64>,
    #[serde(default)]
    pub be_samples: Option<usize>,
    #[serde(default)]
    pub bochner_samples: Option<usize>,
}

/// Tolerances with every default filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedTolerances {
    pub tolerance: f64,
    pub equality_tol: f64,
    /// Equality threshold used at the finest level of a multi-level ladder.
    pub finest_equality_tol: f64,
    pub error_factor: f64,
    pub be_samples: usize,
    pub bochner_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub geometry: Geometry,
    #[serde(default)]
    pub ambient: Option<Ambient>,
    #[serde(default = "DensityField::zero")]
    pub density: DensityField,
    #[serde(default)]
    pub m: Option<MParam>,
    pub checks: Vec<CheckId>,
    #[serde(default = "one")]
    pub refinement_levels: usize,
    /// Rigid translation applied to Euclidean meshes and to the density.
    #[serde(default)]
    pub translate: Option<Vec<f64>>,
    /// Test function for the integral identity check.
    #[serde(default)]
    pub u: Option<Quadratic>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> usize {
    1
}

/// A validated scenario with all defaults expanded; echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedScenario {
    pub name: String,
    pub geometry: Geometry,
    pub ambient: Ambient,
    pub density: DensityField,
    pub m: MParam,
    pub checks: Vec<CheckId>,
    pub refinement_levels: usize,
    pub translate: Vec<f64>,
    pub u: Quadratic,
    pub tolerances: ResolvedTolerances,
}

impl ResolvedScenario {
    pub fn space(&self) -> AmbientSpace {
        AmbientSpace::new(self.ambient.delta, self.ambient.dim).expect("validated ambient")
    }

    pub fn params(&self) -> BakryEmeryParams {
        BakryEmeryParams::new(self.m, self.ambient.dim)
    }

    pub fn translated_density(&self) -> DensityField {
        if self.translate.iter().all(|t| *t == 0.0) {
            self.density.clone()
        } else {
            self.density.translated(&self.translate)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    NoMesh,
    Hypersurface,
    Domain,
    Ball,
}

impl Geometry {
    fn kind(&self) -> Kind {
        match self {
            Geometry::None => Kind::NoMesh,
            Geometry::Circle { .. }
            | Geometry::EllipseCurve { .. }
            | Geometry::Icosphere { .. }
            | Geometry::PerturbedSphere { .. }
            | Geometry::GeodesicSphere { .. } => Kind::Hypersurface,
            Geometry::Disk { .. }
            | Geometry::EllipseDomain { .. }
            | Geometry::Annulus { .. }
            | Geometry::Wedge { .. }
            | Geometry::WedgeOffCenter { .. } => Kind::Domain,
            Geometry::Ball { .. } => Kind::Ball,
            // decided after loading; validated against the checks at run time
            Geometry::File { .. } => Kind::NoMesh,
        }
    }

    /// Natural ambient dimension of the generated geometry, if fixed.
    fn natural_dim(&self) -> Option<usize> {
        match self {
            Geometry::Circle { .. } | Geometry::EllipseCurve { .. } => Some(2),
            Geometry::Icosphere { .. } | Geometry::PerturbedSphere { .. } => Some(3),
            Geometry::Disk { .. }
            | Geometry::EllipseDomain { .. }
            | Geometry::Annulus { .. }
            | Geometry::Wedge { .. }
            | Geometry::WedgeOffCenter { .. } => Some(2),
            _ => None,
        }
    }

    /// The geometry at refinement level `level`.
    pub fn at_level(&self, level: usize, dim: usize) -> Geometry {
        let x2 = |n: usize| n << level;
        match self.clone() {
            Geometry::Circle { radius, n_segments } => Geometry::Circle { radius, n_segments: x2(n_segments) },
            Geometry::EllipseCurve { a, b, n_segments } => Geometry::EllipseCurve { a, b, n_segments: x2(n_segments) },
            Geometry::Icosphere { radius, subdivisions } => Geometry::Icosphere { radius, subdivisions: subdivisions + level },
            Geometry::PerturbedSphere { radius, subdivisions, amplitude, seed } => {
                Geometry::PerturbedSphere { radius, subdivisions: subdivisions + level, amplitude, seed }
            }
            Geometry::GeodesicSphere { rho, resolution } => {
                Geometry::GeodesicSphere { rho, resolution: if dim == 2 { x2(resolution) } else { resolution + level } }
            }
            Geometry::Disk { radius, n_rings } => Geometry::Disk { radius, n_rings: x2(n_rings) },
            Geometry::EllipseDomain { a, b, n_rings } => Geometry::EllipseDomain { a, b, n_rings: x2(n_rings) },
            Geometry::Annulus { r_in, r_out, n_rings } => Geometry::Annulus { r_in, r_out, n_rings: x2(n_rings) },
            Geometry::Wedge { radius, opening_angle, n_rings, cutoff_ratio } => {
                Geometry::Wedge { radius, opening_angle, n_rings: x2(n_rings), cutoff_ratio }
            }
            Geometry::WedgeOffCenter { center, radius, opening_angle, n_rings, cutoff_ratio } => {
                Geometry::WedgeOffCenter { center, radius, opening_angle, n_rings: x2(n_rings), cutoff_ratio }
            }
            other => other,
        }
    }
}

fn invalid(scenario: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::InvalidParams(format!("scenario '{scenario}': {msg}"))
}

fn check_sizes(name: &str, g: &Geometry) -> Result<()> {
    let min_segments = 8;
    let ok = match g {
        Geometry::Circle { n_segments, .. } | Geometry::EllipseCurve { n_segments, .. } => *n_segments >= min_segments,
        Geometry::Disk { n_rings, .. }
        | Geometry::EllipseDomain { n_rings, .. }
        | Geometry::Annulus { n_rings, .. }
        | Geometry::Wedge { n_rings, .. }
        | Geometry::WedgeOffCenter { n_rings, .. } => *n_rings >= 2,
        _ => true,
    };
    if !ok {
        return Err(invalid(name, "mesh resolution below the minimum (8 segments, 2 rings)"));
    }
    Ok(())
}

fn check_sphere_resolution(name: &str, g: &Geometry, dim: usize) -> Result<()> {
    if let Geometry::GeodesicSphere { rho, resolution } = g {
        if !(dim == 2 || dim == 3) {
            return Err(invalid(name, "geodesic spheres need ambient dimension 2 or 3"));
        }
        if dim == 2 && *resolution < 8 {
            return Err(invalid(name, "mesh resolution below the minimum (8 segments, 2 rings)"));
        }
        if dim == 3 && *resolution > 7 {
            return Err(invalid(name, "at most 7 subdivisions"));
        }
        if !(*rho > 0.0) {
            return Err(invalid(name, "rho must be positive"));
        }
    }
    if let Geometry::Wedge { opening_angle, .. } | Geometry::WedgeOffCenter { opening_angle, .. } = g {
        if !(*opening_angle > 0.0 && *opening_angle < 2.0 * std::f64::consts::PI) {
            return Err(invalid(name, "opening angle must lie in (0, 2π)"));
        }
    }
    Ok(())
}

fn allowed(kind: Kind, check: CheckId, g: &Geometry) -> bool {
    use CheckId::*;
    match check {
        BeCertificate | BochnerSampled => true,
        ShrinkerSphere => kind == Kind::NoMesh && !matches!(g, Geometry::File { .. }),
        Ros | LinearIsoperimetric => matches!(kind, Kind::Domain | Kind::Ball) || matches!(g, Geometry::File { .. }),
        Cone => matches!(g, Geometry::Wedge { .. } | Geometry::WedgeOffCenter { .. } | Geometry::File { .. }),
        Reilly | EnergyIdentity => kind == Kind::Domain || matches!(g, Geometry::File { .. }),
        Lambda1MaxBound | Lambda1MeanBound | RadialChain | GradientSum | EqualityDiagnostic => {
            kind == Kind::Hypersurface || matches!(g, Geometry::File { .. })
        }
    }
}

impl Scenario {
    /// Validates the scenario and expands defaults.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let name = &self.name;
        if name.is_empty() || name.chars().any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')) {
            return Err(invalid(name, "names may contain only ASCII letters, digits, '-', '_' and '.'"));
        }
        if self.checks.is_empty() {
            return Err(invalid(name, "no checks requested"));
        }
        if self.refinement_levels == 0 || self.refinement_levels > 8 {
            return Err(invalid(name, "refinement_levels must lie in 1..=8"));
        }
        let g = &self.geometry;
        check_sizes(name, g)?;
        let dim = match (self.ambient, g.natural_dim()) {
            (Some(a), Some(d)) if a.dim != d => return Err(invalid(name, format!("geometry lives in dimension {d}, ambient has {}", a.dim))),
            (Some(a), _) => a.dim,
            (None, Some(d)) => d,
            (None, None) => match g {
                Geometry::File { .. } => 3,
                _ => return Err(invalid(name, "ambient.dim is required for this geometry")),
            },
        };
        let delta = self.ambient.map_or(0.0, |a| a.delta);
        AmbientSpace::new(delta, dim).map_err(|e| invalid(name, e))?;
        check_sphere_resolution(name, g, dim)?;
        if delta != 0.0 && !matches!(g, Geometry::GeodesicSphere { .. } | Geometry::None) {
            return Err(invalid(name, "curved ambients support only geodesic spheres or mesh-free checks"));
        }
        if matches!(g, Geometry::File { .. } | Geometry::Ball { .. } | Geometry::None) && self.refinement_levels != 1 {
            return Err(invalid(name, "this geometry has no refinement ladder; use refinement_levels = 1"));
        }
        let kind = g.kind();
        let mut seen = BTreeSet::new();
        for &c in &self.checks {
            if !seen.insert(c) {
                return Err(invalid(name, format!("check '{}' listed twice", c.name())));
            }
            if !allowed(kind, c, g) {
                return Err(invalid(name, format!("check '{}' does not apply to this geometry", c.name())));
            }
            match c {
                CheckId::Lambda1MaxBound if delta >= 0.0 => {
                    return Err(invalid(name, "lambda1_max_bound needs negative curvature (delta < 0)"));
                }
                CheckId::Lambda1MeanBound if delta < 0.0 => {
                    return Err(invalid(name, "lambda1_mean_bound needs delta >= 0"));
                }
                CheckId::ShrinkerSphere if !(delta == 0.0 && (dim == 2 || dim == 3)) => {
                    return Err(invalid(name, "shrinker_sphere runs in flat ambients of dimension 2 or 3"));
                }
                _ => {}
            }
        }
        let m = self.m.unwrap_or(if self.density.is_constant() { MParam::Finite(dim as f64) } else { MParam::Infinite });
        BakryEmeryParams::new(m, dim).validate(&self.density).map_err(|e| invalid(name, e))?;
        let translate = self.translate.clone().unwrap_or_default();
        if !translate.is_empty() {
            if translate.len() != dim || delta != 0.0 {
                return Err(invalid(name, "translate needs one component per ambient coordinate in a flat ambient"));
            }
        }
        let t = self.tolerances;
        let tolerances = ResolvedTolerances {
            tolerance: t.tolerance.unwrap_or(1e-3),
            equality_tol: t.equality_tol.unwrap_or(1e-2),
            finest_equality_tol: t.equality_tol.unwrap_or(if self.refinement_levels > 1 { 1e-3 } else { 1e-2 }),
            error_factor: t.error_factor.unwrap_or(3.0),
            be_samples: t.be_samples.unwrap_or(512),
            bochner_samples: t.bochner_samples.unwrap_or(10_000),
        };
        for (label, v) in [("tolerance", tolerances.tolerance), ("equality_tol", tolerances.equality_tol), ("error_factor", tolerances.error_factor)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("{label} must be a non-negative number")));
            }
        }
        if tolerances.be_samples == 0 || tolerances.bochner_samples == 0 {
            return Err(invalid(name, "sample counts must be positive"));
        }
        let u = match &self.u {
            Some(q) => Quadratic::new(q.c, q.b.clone(), q.a.clone()).map_err(|e| invalid(name, e))?,
            None => Quadratic::ball_torsion(1.0, 2),
        };
        if u.dim() != 2 && self.checks.contains(&CheckId::Reilly) {
            return Err(invalid(name, "u must be a function of two variables"));
        }
        Ok(ResolvedScenario {
            name: name.clone(),
            geometry: g.clone(),
            ambient: Ambient { delta, dim },
            density: self.density.clone(),
            m,
            checks: self.checks.clone(),
            refinement_levels: self.refinement_levels,
            translate,
            u,
            tolerances,
        })
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Parse { line: e.line(), message: e.to_string() })
    }

    /// Reads a config; relative mesh-file paths are resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = SuiteConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.scenarios {
            if let Geometry::File { path: p } = &mut s.geometry {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<Vec<ResolvedScenario>> {
        if self.scenarios.is_empty() {
            return Err(LabError::InvalidParams("config has no scenarios".into()));
        }
        let mut names = BTreeSet::new();
        let mut out = Vec::with_capacity(self.scenarios.len());
        for s in &self.scenarios {
            if !names.insert(s.name.clone()) {
                return Err(invalid(&s.name, "duplicate scenario name"));
            }
            out.push(s.resolve()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<ResolvedScenario>> {
        SuiteConfig::from_json(s)?.resolve()
    }

    #[test]
    fn defaults_are_expanded() {
        let r = parse(r#"{"scenarios": [{"name": "d", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4}, "checks": ["ros"]}]}"#).unwrap();
        assert_eq!(r[0].ambient, Ambient { delta: 0.0, dim: 2 });
        assert_eq!(r[0].m, MParam::Finite(2.0));
        assert_eq!(r[0].tolerances.tolerance, 1e-3);
        assert_eq!(r[0].refinement_levels, 1);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = parse(r#"{"scenarios": [{"name": "d", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4}, "checks": ["ros"], "tolerances": {"tolerence": 1}}]}"#);
        assert!(matches!(e, Err(LabError::Parse { .. })));
        let e = parse(r#"{"scenarios": [{"name": "d", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4, "rings": 2}, "checks": ["ros"]}]}"#);
        assert!(matches!(e, Err(LabError::Parse { .. })));
        let e = parse(r#"{"scenarios": [{"name": "d", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4}, "checks": ["rso"]}]}"#);
        assert!(matches!(e, Err(LabError::Parse { .. })));
    }

    #[test]
    fn curvature_sign_is_validated() {
        let e = parse(r#"{"scenarios": [{"name": "c", "geometry": {"generator": "circle", "radius": 1.0, "n_segments": 64}, "checks": ["lambda1_max_bound"]}]}"#).unwrap_err();
        assert!(e.to_string().contains("delta < 0"));
        let e = parse(r#"{"scenarios": [{"name": "c", "geometry": {"generator": "circle", "radius": 1.0, "n_segments": 64}, "checks": ["ros"]}]}"#).unwrap_err();
        assert!(e.to_string().contains("does not apply"));
        let e = parse(r#"{"scenarios": [{"name": "c", "geometry": {"generator": "circle", "radius": 1.0, "n_segments": 4}, "checks": ["lambda1_mean_bound"]}]}"#).unwrap_err();
        assert!(e.to_string().contains("minimum"));
    }

    #[test]
    fn m_and_density_compatibility() {
        let e = parse(r#"{"scenarios": [{"name": "g", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4}, "density": {"kind": "gaussian", "a": 0.25}, "m": 2, "checks": ["ros"]}]}"#);
        assert!(e.is_err());
        let r = parse(r#"{"scenarios": [{"name": "g", "geometry": {"generator": "disk", "radius": 1.0, "n_rings": 4}, "density": {"kind": "gaussian", "a": 0.25}, "checks": ["ros"]}]}"#).unwrap();
        assert_eq!(r[0].m, MParam::Infinite);
    }

    #[test]
    fn refinement_scaling() {
        let g = Geometry::Disk { radius: 1.0, n_rings: 4 };
        assert_eq!(g.at_level(2, 2), Geometry::Disk { radius: 1.0, n_rings: 16 });
        let g = Geometry::Icosphere { radius: 1.0, subdivisions: 1 };
        assert_eq!(g.at_level(2, 3), Geometry::Icosphere { radius: 1.0, subdivisions: 3 });
    }
}
