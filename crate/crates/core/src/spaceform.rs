//! Simply connected space forms of constant curvature `delta`, realised by
//! explicit embeddings so that distance, log and exp are closed-form:
//!
//! * `delta = 0`: Euclidean space `R^d`;
//! * `delta > 0`: the sphere `|x| = R` in `R^{d+1}`, `R = 1/sqrt(delta)`;
//! * `delta < 0`: the upper sheet of `<x,x>_L = -R^2` in Minkowski space
//!   `R^{1,d}`, `R = 1/sqrt(-delta)`.
//!
//! In the curved models the distinguished base point is `o = (R, 0, ..., 0)`,
//! whose tangent space is spanned by the last `d` embedding axes. Normal
//! coordinates around `o` are therefore just those axes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub type Point = DVector<f64>;
pub type Tangent = DVector<f64>;

/// Below this `|delta|` the comparison functions switch to their Taylor series.
pub const TAYLOR_DELTA: f64 = 1e-8;

/// Distances within this margin of the cut locus are rejected.
pub const CUT_LOCUS_MARGIN: f64 = 1e-9;

/// `s_delta(t)`: solution of `g'' + delta g = 0`, `g(0) = 0`, `g'(0) = 1`.
pub fn s_delta(delta: f64, t: f64) -> f64 {
    if delta.abs() < TAYLOR_DELTA {
        let t2 = t * t;
        t * (1.0 - delta * t2 / 6.0 + delta * delta * t2 * t2 / 120.0
            - delta * delta * delta * t2 * t2 * t2 / 5040.0)
    } else if delta > 0.0 {
        let k = delta.sqrt();
        (k * t).sin() / k
    } else {
        let k = (-delta).sqrt();
        (k * t).sinh() / k
    }
}

/// `c_delta(t) = s_delta'(t)`.
pub fn c_delta(delta: f64, t: f64) -> f64 {
    if delta.abs() < TAYLOR_DELTA {
        let t2 = t * t;
        1.0 - delta * t2 / 2.0 + delta * delta * t2 * t2 / 24.0
            - delta * delta * delta * t2 * t2 * t2 / 720.0
    } else if delta > 0.0 {
        (delta.sqrt() * t).cos()
    } else {
        ((-delta).sqrt() * t).cosh()
    }
}

/// `∫_0^r s_delta(t) dt`, i.e. `(1 - c_delta(r)) / delta`, with the flat limit `r^2/2`.
pub fn s_delta_primitive(delta: f64, r: f64) -> f64 {
    if delta.abs() < TAYLOR_DELTA {
        let r2 = r * r;
        r2 / 2.0 - delta * r2 * r2 / 24.0 + delta * delta * r2 * r2 * r2 / 720.0
    } else {
        (1.0 - c_delta(delta, r)) / delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Euclidean,
    SphereEmbedded,
    HyperboloidEmbedded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSpace {
    delta: f64,
    dim: usize,
    model: Model,
}

impl AmbientSpace {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::InvalidParams(format!("ambient dimension {dim} < 2")));
        }
        if !delta.is_finite() {
            return Err(LabError::InvalidParams("curvature must be finite".into()));
        }
        let model = if delta == 0.0 {
            Model::Euclidean
        } else if delta > 0.0 {
            Model::SphereEmbedded
        } else {
            Model::HyperboloidEmbedded
        };
        Ok(AmbientSpace { delta, dim, model })
    }

    pub fn euclidean(dim: usize) -> Self {
        AmbientSpace::new(0.0, dim).expect("valid euclidean space")
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn embedding_dim(&self) -> usize {
        match self.model {
            Model::Euclidean => self.dim,
            _ => self.dim + 1,
        }
    }

    /// Curvature radius `1/sqrt|delta|`; infinite for the flat model.
    pub fn curvature_radius(&self) -> f64 {
        if self.delta == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.delta.abs().sqrt()
        }
    }

    /// Injectivity radius: `pi/sqrt(delta)` on spheres, infinite otherwise.
    pub fn injectivity_radius(&self) -> f64 {
        if self.delta > 0.0 {
            std::f64::consts::PI / self.delta.sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        s_delta(self.delta, t)
    }

    pub fn c(&self, t: f64) -> f64 {
        c_delta(self.delta, t)
    }

    /// The distinguished base point.
    pub fn origin(&self) -> Point {
        let mut o = Point::zeros(self.embedding_dim());
        if self.model != Model::Euclidean {
            o[0] = self.curvature_radius();
        }
        o
    }

    /// Riemannian inner product of two tangent vectors (ambient Minkowski form
    /// on the hyperboloid, Euclidean otherwise).
    pub fn inner(&self, a: &Tangent, b: &Tangent) -> f64 {
        match self.model {
            Model::HyperboloidEmbedded => -a[0] * b[0] + a.rows(1, a.len() - 1).dot(&b.rows(1, b.len() - 1)),
            _ => a.dot(b),
        }
    }

    pub fn norm(&self, v: &Tangent) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Residual of the model constraint at `p` (zero for points of the space).
    pub fn constraint_residual(&self, p: &Point) -> f64 {
        match self.model {
            Model::Euclidean => 0.0,
            Model::SphereEmbedded => (p.dot(p) - 1.0 / self.delta).abs(),
            Model::HyperboloidEmbedded => (self.inner(p, p) - 1.0 / self.delta).abs() + if p[0] > 0.0 { 0.0 } else { 1.0 },
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        match self.model {
            Model::Euclidean => (a - b).norm(),
            Model::SphereEmbedded => {
                let r = self.curvature_radius();
                2.0 * r * (a - b).norm().atan2((a + b).norm())
            }
            Model::HyperboloidEmbedded => {
                let r = self.curvature_radius();
                let d = a - b;
                let chord = self.inner(&d, &d).max(0.0).sqrt();
                2.0 * r * (chord / (2.0 * r)).asinh()
            }
        }
    }

    /// Orthogonal projection of an embedding vector onto `T_p`.
    pub fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> Tangent {
        match self.model {
            Model::Euclidean => v.clone(),
            Model::SphereEmbedded => v - p * (v.dot(p) * self.delta),
            // <p,p>_L = 1/delta, so the coefficient is <v,p>_L * delta
            Model::HyperboloidEmbedded => v - p * (self.inner(v, p) * self.delta),
        }
    }

    fn check_cut_locus(&self, distance: f64) -> Result<()> {
        if self.delta > 0.0 {
            let limit = self.injectivity_radius();
            if distance >= limit - CUT_LOCUS_MARGIN {
                return Err(LabError::AntipodalPoint { distance, limit });
            }
        }
        Ok(())
    }

    /// Riemannian logarithm `log_base(target)`.
    pub fn log_map(&self, base: &Point, target: &Point) -> Result<Tangent> {
        let d = self.distance(base, target);
        self.check_cut_locus(d)?;
        match self.model {
            Model::Euclidean => Ok(target - base),
            _ => {
                let v = self.project_tangent(base, &(target - base));
                let nv = self.norm(&v);
                if nv == 0.0 || d == 0.0 {
                    return Ok(Tangent::zeros(base.len()));
                }
                Ok(v * (d / nv))
            }
        }
    }

    /// Riemannian exponential `exp_base(v)`.
    pub fn exp_map(&self, base: &Point, v: &Tangent) -> Point {
        match self.model {
            Model::Euclidean => base + v,
            Model::SphereEmbedded => {
                let r = self.curvature_radius();
                let nv = self.norm(v);
                if nv == 0.0 {
                    return base.clone();
                }
                let th = nv / r;
                base * th.cos() + v * (r * th.sin() / nv)
            }
            Model::HyperboloidEmbedded => {
                let r = self.curvature_radius();
                let nv = self.norm(v);
                if nv == 0.0 {
                    return base.clone();
                }
                let th = nv / r;
                base * th.cosh() + v * (r * th.sinh() / nv)
            }
        }
    }

    /// Gradient of `r = distance(base, ·)` at `p`; zero at `p = base`.
    pub fn grad_distance(&self, base: &Point, p: &Point) -> Result<Tangent> {
        let r = self.distance(base, p);
        if r == 0.0 {
            return Ok(Tangent::zeros(p.len()));
        }
        let l = self.log_map(p, base)?;
        Ok(l * (-1.0 / r))
    }

    /// The comparison field `X = s_delta(r) ∇r`, `r` measured from `base`.
    pub fn radial_field(&self, base: &Point, p: &Point) -> Result<Tangent> {
        let r = self.distance(base, p);
        if r == 0.0 {
            return Ok(Tangent::zeros(p.len()));
        }
        Ok(self.grad_distance(base, p)? * self.s(r))
    }

    /// An orthonormal basis of `T_p`, deterministic in `p`.
    pub fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        let n = self.embedding_dim();
        let mut basis: Vec<Tangent> = Vec::with_capacity(self.dim);
        // for curved models start with the spatial axes so that the basis at
        // the origin is exactly e_1..e_d
        let order: Vec<usize> = match self.model {
            Model::Euclidean => (0..n).collect(),
            _ => (1..n).chain(std::iter::once(0)).collect(),
        };
        for k in order {
            if basis.len() == self.dim {
                break;
            }
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let mut v = self.project_tangent(p, &e);
            for b in &basis {
                let c = self.inner(&v, b);
                v -= b * c;
            }
            let nv = self.norm(&v);
            if nv > 1e-6 {
                basis.push(v / nv);
            }
        }
        basis
    }

    /// Coordinates of `log_p(target)` in `tangent_basis(p)`.
    pub fn normal_coordinates(&self, p: &Point, basis: &[Tangent], target: &Point) -> Result<Vec<f64>> {
        let l = self.log_map(p, target)?;
        Ok(basis.iter().map(|b| self.inner(&l, b)).collect())
    }

    /// The point with normal coordinates `coords` around the origin.
    pub fn from_origin_coordinates(&self, coords: &[f64]) -> Point {
        assert_eq!(coords.len(), self.dim);
        let o = self.origin();
        let v = self.lift_origin_tangent(coords);
        self.exp_map(&o, &v)
    }

    /// Embeds coordinates in `T_o` as an embedding vector.
    pub fn lift_origin_tangent(&self, coords: &[f64]) -> Tangent {
        let n = self.embedding_dim();
        let mut v = DVector::zeros(n);
        let shift = n - self.dim;
        for (i, c) in coords.iter().enumerate() {
            v[i + shift] = *c;
        }
        v
    }

    /// Ricci curvature `Ric(v, v)` for a tangent vector `v`.
    pub fn ricci(&self, v: &Tangent) -> f64 {
        self.delta * (self.dim as f64 - 1.0) * self.inner(v, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    // power series oracles, independent of the library's sinh/cosh path
    fn sinh_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..30 {
            term *= x * x / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    }

    fn cosh_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= x * x / ((2 * k - 1) as f64 * (2 * k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn comparison_function_examples() {
        assert_eq!(s_delta(0.0, 2.5), 2.5);
        assert!((s_delta(1.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((s_delta(-1.0, 1.0) - sinh_series(1.0)).abs() < 1e-14);
        assert!((s_delta(-1.0, 1.0) - 1.175_201_193_643_801_4).abs() < 1e-14);
        assert_eq!(c_delta(0.0, 7.0), 1.0);
        assert!(c_delta(1.0, PI / 2.0).abs() < 1e-15);
        assert!((c_delta(-1.0, 1.0) - cosh_series(1.0)).abs() < 1e-14);
    }

    #[test]
    fn pythagorean_identity() {
        for &delta in &[-4.0, -1.0, -1e-3, -1e-9, 0.0, 3e-9, 1e-3, 1.0, 2.5] {
            for i in 0..50 {
                let t = i as f64 * 0.04;
                let s = s_delta(delta, t);
                let c = c_delta(delta, t);
                assert!((c * c + delta * s * s - 1.0).abs() < 1e-12, "delta={delta} t={t}");
            }
        }
    }

    #[test]
    fn ode_residual_by_central_differences() {
        let h = 1e-5;
        for &delta in &[-2.0, -1.0, -5e-9, 0.0, 5e-9, 0.7, 1.0] {
            for i in 1..40 {
                let t = i as f64 * 0.05;
                // g'' from the derivative pair, g' from s itself
                let g2 = (c_delta(delta, t + h) - c_delta(delta, t - h)) / (2.0 * h);
                let scale = 1.0 + c_delta(delta, t).abs();
                assert!((g2 + delta * s_delta(delta, t)).abs() < 1e-8 * scale);
                let g1 = (s_delta(delta, t + h) - s_delta(delta, t - h)) / (2.0 * h);
                assert!((g1 - c_delta(delta, t)).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn continuity_in_delta_is_linear() {
        for i in 1..=20 {
            let t = i as f64 * 0.1;
            for &d in &[1e-2, 1e-4, 1e-7, 1e-9] {
                for sgn in [-1.0, 1.0] {
                    let diff = (s_delta(sgn * d, t) - t).abs();
                    assert!(diff <= d * t.powi(3) / 6.0 * 1.1 + 1e-15, "t={t} d={d}");
                }
            }
        }
    }

    #[test]
    fn taylor_branch_matches_closed_form_at_switch() {
        for &d in &[TAYLOR_DELTA * 0.999, -TAYLOR_DELTA * 0.999] {
            let k = d.abs().sqrt();
            let t = 1.3;
            let closed = if d > 0.0 { (k * t).sin() / k } else { (k * t).sinh() / k };
            assert!((s_delta(d, t) - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn log_map_examples() {
        let e = AmbientSpace::euclidean(3);
        let o = Point::zeros(3);
        let p = Point::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(e.log_map(&o, &p).unwrap(), p);

        let s = AmbientSpace::new(1.0, 2).unwrap();
        let north = Point::from_vec(vec![0.0, 0.0, 1.0]);
        let x = Point::from_vec(vec![1.0, 0.0, 0.0]);
        let v = s.log_map(&north, &x).unwrap();
        assert!((v.norm() - PI / 2.0).abs() < 1e-14);
        assert!((v[0] - PI / 2.0).abs() < 1e-14 && v[1].abs() < 1e-15 && v[2].abs() < 1e-15);

        let south = Point::from_vec(vec![0.0, 0.0, -1.0]);
        assert!(matches!(s.log_map(&north, &south), Err(LabError::AntipodalPoint { .. })));
    }

    fn random_point(space: &AmbientSpace, rng: &mut ChaCha8Rng, max_r: f64) -> Point {
        let coords: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = coords.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
        let r = rng.gen_range(0.0..max_r);
        space.from_origin_coordinates(&coords.iter().map(|c| c / n * r).collect::<Vec<_>>())
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (delta, max_r) in [(0.0, 5.0), (1.0, 1.4), (4.0, 0.7), (-1.0, 2.0), (-0.25, 3.0)] {
            for dim in [2usize, 3] {
                let space = AmbientSpace::new(delta, dim).unwrap();
                for _ in 0..1000 {
                    let a = random_point(&space, &mut rng, max_r);
                    let b = random_point(&space, &mut rng, max_r);
                    assert!(space.constraint_residual(&a) < 1e-12);
                    let v = space.log_map(&a, &b).unwrap();
                    assert!((space.norm(&v) - space.distance(&a, &b)).abs() < 1e-10);
                    let back = space.exp_map(&a, &v);
                    assert!((back - &b).norm() < 1e-10, "delta={delta}");
                }
            }
        }
    }

    #[test]
    fn hyperboloid_round_trip_from_apex() {
        let space = AmbientSpace::new(-1.0, 3).unwrap();
        let o = space.origin();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let b = random_point(&space, &mut rng, 2.5);
            let v = space.log_map(&o, &b).unwrap();
            assert!((space.exp_map(&o, &v) - &b).norm() < 1e-12);
        }
    }

    #[test]
    fn distance_is_a_semi_metric_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for delta in [0.0, 1.0, -1.0] {
            let space = AmbientSpace::new(delta, 2).unwrap();
            for _ in 0..200 {
                let a = random_point(&space, &mut rng, 1.5);
                let b = random_point(&space, &mut rng, 1.5);
                let dab = space.distance(&a, &b);
                assert!(dab >= 0.0);
                assert!((dab - space.distance(&b, &a)).abs() < 1e-14);
                assert_eq!(space.distance(&a, &a), 0.0);
            }
        }
    }

    #[test]
    fn radial_field_examples() {
        let e = AmbientSpace::euclidean(2);
        let o = Point::zeros(2);
        let p = Point::from_vec(vec![1.5, -0.5]);
        assert!((e.radial_field(&o, &p).unwrap() - &p).norm() < 1e-15);
        assert_eq!(e.radial_field(&p, &p).unwrap().norm(), 0.0);

        let s = AmbientSpace::new(1.0, 2).unwrap();
        let base = s.origin();
        let q = s.from_origin_coordinates(&[PI / 2.0, 0.0]);
        let x = s.radial_field(&base, &q).unwrap();
        assert!((s.norm(&x) - s_delta(1.0, PI / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for delta in [0.0, 1.0, -1.0] {
            let space = AmbientSpace::new(delta, 3).unwrap();
            let p = space.from_origin_coordinates(&[0.2, -0.4, 0.1]);
            let b = space.tangent_basis(&p);
            assert_eq!(b.len(), 3);
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((space.inner(&b[i], &b[j]) - want).abs() < 1e-12);
                }
                assert!(space.inner(&b[i], &p).abs() < 1e-12 || delta == 0.0);
            }
        }
    }
}
