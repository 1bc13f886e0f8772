//! Analytic weights `f`, the weighted volume element `e^{-f}`, and the
//! m-Bakry–Émery tensor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::halton;
use crate::report::CheckReport;
use crate::spaceform::{AmbientSpace, Model, Point, Tangent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Analytic weight. Coordinates beyond a vector's length are read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityField {
    /// `f = c`.
    Constant { c: f64 },
    /// `f = a |x - center|^2`; in curved models `|x - center|` is the
    /// geodesic distance to the point with normal coordinates `center`.
    Gaussian {
        a: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `f = <v, x> + offset`.
    Linear {
        v: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `f = sum coeff * prod (x_i - center_i)^powers_i`.
    Polynomial {
        terms: Vec<Monomial>,
        #[serde(default)]
        center: Vec<f64>,
    },
}

fn comp(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

impl DensityField {
    pub fn zero() -> Self {
        DensityField::Constant { c: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        DensityField::Constant { c }
    }

    pub fn gaussian(a: f64) -> Self {
        DensityField::Gaussian { a, center: Vec::new() }
    }

    pub fn linear(v: Vec<f64>) -> Self {
        DensityField::Linear { v, offset: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            DensityField::Constant { .. } => true,
            DensityField::Gaussian { a, .. } => *a == 0.0,
            DensityField::Linear { v, .. } => v.iter().all(|&x| x == 0.0),
            DensityField::Polynomial { terms, .. } => {
                terms.iter().all(|t| t.coeff == 0.0 || t.powers.iter().all(|&p| p == 0))
            }
        }
    }

    /// Radial about the origin of normal coordinates (constant or centred Gaussian).
    pub fn is_radial(&self) -> bool {
        match self {
            DensityField::Constant { .. } => true,
            DensityField::Gaussian { center, .. } => center.iter().all(|&c| c == 0.0),
            _ => self.is_constant(),
        }
    }

    /// `x -> f(x - t)`: the field carried along a translation by `t`.
    pub fn translated(&self, t: &[f64]) -> Self {
        let shift = |c: &[f64]| -> Vec<f64> {
            let n = c.len().max(t.len());
            (0..n).map(|i| comp(c, i) + comp(t, i)).collect()
        };
        match self {
            DensityField::Constant { c } => DensityField::Constant { c: *c },
            DensityField::Gaussian { a, center } => DensityField::Gaussian { a: *a, center: shift(center) },
            DensityField::Linear { v, offset } => {
                let vt: f64 = (0..v.len()).map(|i| v[i] * comp(t, i)).sum();
                DensityField::Linear { v: v.clone(), offset: offset - vt }
            }
            DensityField::Polynomial { terms, center } => {
                DensityField::Polynomial { terms: terms.clone(), center: shift(center) }
            }
        }
    }

    /// `f(x)` in Euclidean coordinates.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            DensityField::Constant { c } => *c,
            DensityField::Gaussian { a, center } => {
                let n = x.len().max(center.len());
                a * (0..n).map(|i| (comp(x, i) - comp(center, i)).powi(2)).sum::<f64>()
            }
            DensityField::Linear { v, offset } => offset + (0..v.len()).map(|i| v[i] * comp(x, i)).sum::<f64>(),
            DensityField::Polynomial { terms, center } => terms
                .iter()
                .map(|t| {
                    t.coeff
                        * t.powers
                            .iter()
                            .enumerate()
                            .map(|(i, &p)| (comp(x, i) - comp(center, i)).powi(p as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    /// Euclidean gradient, with `dim` components.
    pub fn gradient(&self, x: &[f64], dim: usize) -> DVector<f64> {
        match self {
            DensityField::Constant { .. } => DVector::zeros(dim),
            DensityField::Gaussian { a, center } => {
                DVector::from_fn(dim, |i, _| 2.0 * a * (comp(x, i) - comp(center, i)))
            }
            DensityField::Linear { v, .. } => DVector::from_fn(dim, |i, _| comp(v, i)),
            DensityField::Polynomial { terms, center } => {
                let y: Vec<f64> = (0..dim).map(|i| comp(x, i) - comp(center, i)).collect();
                let mut g = DVector::zeros(dim);
                for t in terms {
                    for k in 0..dim.min(t.powers.len()) {
                        let pk = t.powers[k];
                        if pk == 0 {
                            continue;
                        }
                        let mut prod = t.coeff * pk as f64;
                        for (i, &p) in t.powers.iter().enumerate() {
                            let e = if i == k { p - 1 } else { p };
                            prod *= comp(&y, i).powi(e as i32);
                        }
                        g[k] += prod;
                    }
                }
                g
            }
        }
    }

    /// Euclidean Hessian, `dim x dim`.
    pub fn hessian(&self, x: &[f64], dim: usize) -> DMatrix<f64> {
        match self {
            DensityField::Constant { .. } | DensityField::Linear { .. } => DMatrix::zeros(dim, dim),
            DensityField::Gaussian { a, .. } => DMatrix::identity(dim, dim) * (2.0 * a),
            DensityField::Polynomial { terms, center } => {
                let y: Vec<f64> = (0..dim).map(|i| comp(x, i) - comp(center, i)).collect();
                let mut h = DMatrix::zeros(dim, dim);
                for t in terms {
                    let np = dim.min(t.powers.len());
                    for j in 0..np {
                        for k in 0..np {
                            let mut pw: Vec<i64> = t.powers.iter().map(|&p| p as i64).collect();
                            let mut c = t.coeff;
                            c *= pw[j] as f64;
                            pw[j] -= 1;
                            c *= pw[k] as f64;
                            pw[k] -= 1;
                            if c == 0.0 || pw.iter().any(|&p| p < 0) {
                                continue;
                            }
                            let prod: f64 = pw.iter().enumerate().map(|(i, &p)| comp(&y, i).powi(p as i32)).product();
                            h[(j, k)] += c * prod;
                        }
                    }
                }
                h
            }
        }
    }

    fn curved_center(&self, space: &AmbientSpace) -> Point {
        match self {
            DensityField::Gaussian { center, .. } => {
                let c: Vec<f64> = (0..space.dim()).map(|i| comp(center, i)).collect();
                space.from_origin_coordinates(&c)
            }
            _ => space.origin(),
        }
    }

    fn require_supported(&self, space: &AmbientSpace) -> Result<()> {
        if space.model() == Model::Euclidean || self.is_constant() || matches!(self, DensityField::Gaussian { .. }) {
            Ok(())
        } else {
            Err(LabError::Unsupported(
                "curved ambients support only constant and Gaussian (distance-squared) weights".into(),
            ))
        }
    }

    /// `f(x)` for a point of `space`.
    pub fn value_in(&self, space: &AmbientSpace, x: &Point) -> Result<f64> {
        self.require_supported(space)?;
        match (space.model(), self) {
            (Model::Euclidean, _) => Ok(self.value(x.as_slice())),
            (_, DensityField::Gaussian { a, .. }) => {
                let r = space.distance(&self.curved_center(space), x);
                Ok(a * r * r)
            }
            _ => Ok(self.value(&[])),
        }
    }

    /// Riemannian gradient `∇f` at `x` as an embedding vector.
    pub fn gradient_in(&self, space: &AmbientSpace, x: &Point) -> Result<Tangent> {
        self.require_supported(space)?;
        match (space.model(), self) {
            (Model::Euclidean, _) => Ok(self.gradient(x.as_slice(), space.dim())),
            (_, DensityField::Gaussian { a, .. }) => {
                let q = self.curved_center(space);
                Ok(space.log_map(x, &q)? * (-2.0 * a))
            }
            _ => Ok(Tangent::zeros(x.len())),
        }
    }

    /// `∇²f(v, v)` at `x`.
    pub fn hessian_vv_in(&self, space: &AmbientSpace, x: &Point, v: &Tangent) -> Result<f64> {
        self.require_supported(space)?;
        match (space.model(), self) {
            (Model::Euclidean, _) => {
                let h = self.hessian(x.as_slice(), space.dim());
                Ok(v.dot(&(&h * v)))
            }
            (_, DensityField::Gaussian { a, .. }) => {
                let q = self.curved_center(space);
                let r = space.distance(&q, x);
                let vv = space.inner(v, v);
                if r == 0.0 {
                    return Ok(2.0 * a * vv);
                }
                let dr = space.inner(&space.grad_distance(&q, x)?, v);
                // ∇²(r²/2) = dr⊗dr + r (c/s)(g − dr⊗dr)
                let ratio = r * space.c(r) / space.s(r);
                Ok(2.0 * a * (dr * dr + ratio * (vv - dr * dr)))
            }
            _ => Ok(0.0),
        }
    }
}

/// The density `e^{-f(x)}` of the weighted volume element.
pub fn weighted_element(field: &DensityField, x: &[f64]) -> f64 {
    (-field.value(x)).exp()
}

/// The dimension parameter `m` of the Bakry–Émery tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MParam {
    Finite(f64),
    Infinite,
}

impl MParam {
    /// `(m - 1)/m`, read as 1 in the infinite limit.
    pub fn ros_factor(self) -> f64 {
        match self {
            MParam::Finite(m) => (m - 1.0) / m,
            MParam::Infinite => 1.0,
        }
    }

    pub fn inverse(self) -> f64 {
        match self {
            MParam::Finite(m) => 1.0 / m,
            MParam::Infinite => 0.0,
        }
    }
}

impl Serialize for MParam {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MParam::Finite(m) => s.serialize_f64(*m),
            MParam::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for MParam {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(m) => Ok(MParam::Finite(m)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(MParam::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid m value {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BakryEmeryParams {
    pub m: MParam,
    pub d: usize,
}

impl BakryEmeryParams {
    pub fn new(m: MParam, d: usize) -> Self {
        BakryEmeryParams { m, d }
    }

    pub fn validate(&self, field: &DensityField) -> Result<()> {
        match self.m {
            MParam::Infinite => Ok(()),
            MParam::Finite(m) if !m.is_finite() => Err(LabError::InvalidParams(format!("m = {m}"))),
            MParam::Finite(m) if m < self.d as f64 => {
                Err(LabError::InvalidParams(format!("m = {m} is below the dimension {}", self.d)))
            }
            MParam::Finite(m) if m == self.d as f64 && !field.is_constant() => Err(LabError::InvalidParams(
                "m equal to the dimension requires a constant weight".into(),
            )),
            MParam::Finite(_) => Ok(()),
        }
    }

    /// `1/(m-d)`, zero when the term is absent (infinite m, or m = d with constant f).
    fn drift_coefficient(&self) -> f64 {
        match self.m {
            MParam::Infinite => 0.0,
            MParam::Finite(m) if m == self.d as f64 => 0.0,
            MParam::Finite(m) => 1.0 / (m - self.d as f64),
        }
    }
}

/// `Ric_f^m(v, v) = Ric(v,v) + ∇²f(v,v) - <∇f, v>^2/(m - d)` for a unit vector `v`.
pub fn bakry_emery_m(
    space: &AmbientSpace,
    field: &DensityField,
    params: &BakryEmeryParams,
    x: &Point,
    v: &Tangent,
) -> Result<f64> {
    params.validate(field)?;
    let vn = space.norm(v);
    if (vn - 1.0).abs() > 1e-8 {
        return Err(LabError::InvalidParams(format!("direction must be a unit vector (norm {vn})")));
    }
    let ric = space.ricci(v);
    let hess = field.hessian_vv_in(space, x, v)?;
    let k = params.drift_coefficient();
    let drift = if k == 0.0 {
        0.0
    } else {
        let g = space.inner(&field.gradient_in(space, x)?, v);
        k * g * g
    };
    Ok(ric + hess - drift)
}

/// A geodesic ball around the point with normal coordinates `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRegion {
    #[serde(default)]
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Threshold below which a sampled Bakry–Émery value counts as negative.
pub const BE_NEGATIVITY_TOL: f64 = 1e-10;

/// Samples `Ric_f^m` on `n_samples` quasi-random (point, unit direction) pairs
/// and reports the minimum. This is evidence, not a proof.
pub fn certify_nonneg_be(
    space: &AmbientSpace,
    field: &DensityField,
    params: &BakryEmeryParams,
    region: &SampleRegion,
    n_samples: usize,
) -> Result<CheckReport> {
    if n_samples == 0 {
        return Err(LabError::InvalidParams("n_samples must be at least 1".into()));
    }
    params.validate(field)?;
    let d = space.dim();
    let center: Vec<f64> = (0..d).map(|i| comp(&region.center, i)).collect();
    let mut min = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut taken = 0usize;
    let mut index = 0u64;
    while taken < n_samples {
        let h = halton(index, 2 * d);
        index += 1;
        // point: Halton in the cube, rejected outside the unit ball
        let u: Vec<f64> = h[..d].iter().map(|t| 2.0 * t - 1.0).collect();
        if u.iter().map(|t| t * t).sum::<f64>() > 1.0 {
            continue;
        }
        let coords: Vec<f64> = (0..d).map(|i| center[i] + region.radius * u[i]).collect();
        let x = space.from_origin_coordinates(&coords);
        // direction: Box–Muller on the remaining coordinates, then normalised
        let mut dir = vec![0.0; d];
        for k in 0..d {
            let (a, b) = (h[d + k].max(1e-12), h[d + (k + 1) % d]);
            dir[k] = (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos() + 1e-3 * (k as f64 + 1.0);
        }
        let basis = space.tangent_basis(&x);
        let mut v = Tangent::zeros(x.len());
        for (b, c) in basis.iter().zip(&dir) {
            v += b * *c;
        }
        let v = &v / space.norm(&v);
        let val = bakry_emery_m(space, field, params, &x, &v)?;
        if val < min {
            min = val;
            argmin = coords.clone();
        }
        taken += 1;
    }
    let mut report = CheckReport::inequality("be_nonnegative", 0.0, min, BE_NEGATIVITY_TOL)
        .detail("min_value", min)
        .detail("n_samples", n_samples as f64)
        .detail("region_radius", region.radius);
    for (i, c) in argmin.iter().enumerate() {
        report = report.detail(&format!("argmin_{i}"), *c);
    }
    Ok(report)
}
