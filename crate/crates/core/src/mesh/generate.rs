use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryLabel, SimplicialMesh, Vec3};
use crate::error::{LabError, Result};

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParams(format!("{name} must be positive, got {x}")))
    }
}

/// Regular `n_segments`-gon inscribed in the circle of given radius,
/// counter-clockwise.
pub fn gen_circle(radius: f64, n_segments: usize) -> Result<SimplicialMesh> {
    gen_ellipse_curve(radius, radius, n_segments)
}

pub fn gen_ellipse_curve(a: f64, b: f64, n_segments: usize) -> Result<SimplicialMesh> {
    positive("semi-axis a", a)?;
    positive("semi-axis b", b)?;
    if n_segments < 3 {
        return Err(LabError::InvalidParams(format!("need at least 3 segments, got {n_segments}")));
    }
    let vertices = (0..n_segments)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n_segments as f64;
            Vec3::new(a * t.cos(), b * t.sin(), 0.0)
        })
        .collect();
    let segments = (0..n_segments).map(|k| [k, (k + 1) % n_segments]).collect();
    SimplicialMesh::curve(vertices, segments)
}

/// Subdivided icosahedron projected onto the sphere: `10·4^s + 2` vertices.
pub fn gen_icosphere(radius: f64, subdivisions: usize) -> Result<SimplicialMesh> {
    positive("radius", radius)?;
    if subdivisions > 8 {
        return Err(LabError::InvalidParams(format!("subdivisions {subdivisions} too large (max 8)")));
    }
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    SimplicialMesh::surface(verts, faces)
}

/// Icosphere with a smooth radial perturbation `r = R (1 + amplitude g(x̂))`,
/// `g` a seeded random polynomial of degree ≤ 3 with `max |g| ≤ 1`.
pub fn gen_perturbed_sphere(radius: f64, subdivisions: usize, amplitude: f64, seed: u64) -> Result<SimplicialMesh> {
    if !(0.0..0.5).contains(&amplitude) {
        return Err(LabError::InvalidParams(format!("amplitude must lie in [0, 0.5), got {amplitude}")));
    }
    let base = gen_icosphere(radius, subdivisions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<([i32; 3], f64)> = Vec::new();
    for i in 0..=3 {
        for j in 0..=(3 - i) {
            for k in 0..=(3 - i - j) {
                if i + j + k >= 1 {
                    terms.push(([i, j, k], rng.gen_range(-1.0..1.0)));
                }
            }
        }
    }
    let raw = |u: &Vec3| -> f64 { terms.iter().map(|(p, c)| c * u.x.powi(p[0]) * u.y.powi(p[1]) * u.z.powi(p[2])).sum::<f64>() };
    // normalised so that the largest vertex displacement is exactly `amplitude·R`
    let scale = base.vertices().iter().map(|v| raw(&v.normalize()).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(LabError::DegenerateInput("perturbation polynomial vanishes on the sphere".into()));
    }
    let g = |u: &Vec3| raw(u) / scale;
    base.mapped(|v| {
        let u = v.normalize();
        u * (radius * (1.0 + amplitude * g(&u)))
    })
}

/// Triangulates the band between two open or closed chains of points given
/// by their normalised positions in `[0, 1]`.
fn zipper(outer: &[(usize, f64)], inner: &[(usize, f64)], tris: &mut Vec<[usize; 3]>) {
    let (mut i, mut j) = (0, 0);
    let (na, nb) = (outer.len() - 1, inner.len() - 1);
    while i < na || j < nb {
        let advance_outer = j == nb || (i < na && outer[i + 1].1 <= inner[j + 1].1);
        if advance_outer {
            tris.push([outer[i].0, outer[i + 1].0, inner[j].0]);
            i += 1;
        } else {
            tris.push([inner[j + 1].0, inner[j].0, outer[i].0]);
            j += 1;
        }
    }
}

fn orient_ccw(verts: &[Vec3], tris: &mut [[usize; 3]]) {
    for t in tris.iter_mut() {
        if super::signed_area_xy(&verts[t[0]], &verts[t[1]], &verts[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
}

/// Disk of the given radius from `n_rings` concentric rings of `6k` vertices.
pub fn gen_disk(radius: f64, n_rings: usize) -> Result<SimplicialMesh> {
    positive("radius", radius)?;
    if n_rings < 1 {
        return Err(LabError::InvalidParams("need at least one ring".into()));
    }
    let mut verts = vec![Vec3::zeros()];
    let mut rings: Vec<Vec<(usize, f64)>> = vec![vec![(0, 0.0), (0, 1.0)]];
    for k in 1..=n_rings {
        let r = radius * k as f64 / n_rings as f64;
        let n = 6 * k;
        let start = verts.len();
        let mut ring = Vec::with_capacity(n + 1);
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            verts.push(Vec3::new(r * t.cos(), r * t.sin(), 0.0));
            ring.push((start + i, i as f64 / n as f64));
        }
        ring.push((start, 1.0));
        rings.push(ring);
    }
    let mut tris = Vec::new();
    for k in 1..=n_rings {
        if k == 1 {
            for w in rings[1].windows(2) {
                tris.push([0, w[0].0, w[1].0]);
            }
        } else {
            zipper(&rings[k], &rings[k - 1], &mut tris);
        }
    }
    orient_ccw(&verts, &mut tris);
    SimplicialMesh::planar_domain(verts, tris, BTreeMap::new())
}

/// Axis-aligned elliptical domain with semi-axes `a`, `b`.
pub fn gen_ellipse_domain(a: f64, b: f64, n_rings: usize) -> Result<SimplicialMesh> {
    positive("semi-axis a", a)?;
    positive("semi-axis b", b)?;
    gen_disk(1.0, n_rings)?.mapped(|v| Vec3::new(a * v.x, b * v.y, 0.0))
}

/// Annulus `r_in ≤ |x| ≤ r_out`; both boundary circles are labelled `M`.
pub fn gen_annulus(r_in: f64, r_out: f64, n_rings: usize) -> Result<SimplicialMesh> {
    positive("inner radius", r_in)?;
    if r_out <= r_in {
        return Err(LabError::InvalidParams(format!("outer radius {r_out} must exceed inner radius {r_in}")));
    }
    if n_rings < 1 {
        return Err(LabError::InvalidParams("need at least one radial layer".into()));
    }
    let h = (r_out - r_in) / n_rings as f64;
    let mut verts = Vec::new();
    let mut rings: Vec<Vec<(usize, f64)>> = Vec::new();
    for k in 0..=n_rings {
        let r = r_in + h * k as f64;
        let n = ((2.0 * PI * r / h).round() as usize).max(8);
        let start = verts.len();
        let mut ring = Vec::with_capacity(n + 1);
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            verts.push(Vec3::new(r * t.cos(), r * t.sin(), 0.0));
            ring.push((start + i, i as f64 / n as f64));
        }
        ring.push((start, 1.0));
        rings.push(ring);
    }
    let mut tris = Vec::new();
    for k in 1..=n_rings {
        zipper(&rings[k], &rings[k - 1], &mut tris);
    }
    orient_ccw(&verts, &mut tris);
    SimplicialMesh::planar_domain(verts, tris, BTreeMap::new())
}

/// Star-shaped sector `{t ρ(θ) (cos θ, sin θ) : θ ∈ [0, angle], t ∈ [t0, 1]}`
/// with the apex removed at relative radius `t0`. The outer arc is labelled
/// `M`, the two rays `cone-face` and the inner arc `cutoff`. Rings are
/// uniform away from the apex and geometrically graded towards it.
pub fn gen_sector(angle: f64, rho: impl Fn(f64) -> f64, n_rings: usize, t0: f64) -> Result<SimplicialMesh> {
    positive("opening angle", angle)?;
    if angle >= 2.0 * PI {
        return Err(LabError::InvalidParams(format!("opening angle {angle} must be below 2π")));
    }
    if n_rings < 2 {
        return Err(LabError::InvalidParams(format!("need at least 2 rings, got {n_rings}")));
    }
    if !(t0 > 0.0 && t0 < 0.5) {
        return Err(LabError::InvalidParams(format!("cutoff ratio {t0} must lie in (0, 0.5)")));
    }
    let h = 1.0 / n_rings as f64;
    let n_min = ((angle / (PI / 8.0)).ceil() as usize).max(2);
    // ring positions, outer to inner
    let mut ts = vec![1.0];
    loop {
        let t = *ts.last().unwrap();
        let step = h.min(angle * t / n_min as f64);
        let next = t - step;
        if next <= t0 * (1.0 + 0.5 * angle / n_min as f64) {
            break;
        }
        ts.push(next);
    }
    ts.push(t0);
    let mut verts = Vec::new();
    let mut labels = BTreeMap::new();
    let mut rings: Vec<Vec<(usize, f64)>> = Vec::new();
    let last = ts.len() - 1;
    for (k, &t) in ts.iter().enumerate() {
        let n = ((angle * t / h).round() as usize).max(n_min);
        let mut ring = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let th = angle * s;
            let r = t * rho(th);
            if !(r.is_finite() && r > 0.0) {
                return Err(LabError::InvalidParams(format!("sector radius function not positive at θ = {th}")));
            }
            let idx = verts.len();
            verts.push(Vec3::new(r * th.cos(), r * th.sin(), 0.0));
            let label = if k == 0 {
                BoundaryLabel::M
            } else if i == 0 || i == n {
                BoundaryLabel::ConeFace
            } else if k == last {
                BoundaryLabel::Cutoff
            } else {
                ring.push((idx, s));
                continue;
            };
            labels.insert(idx, label);
            ring.push((idx, s));
        }
        rings.push(ring);
    }
    let mut tris = Vec::new();
    for k in 1..rings.len() {
        zipper(&rings[k - 1], &rings[k], &mut tris);
    }
    orient_ccw(&verts, &mut tris);
    SimplicialMesh::planar_domain(verts, tris, labels)
}

fn check_wedge_angle(angle: f64) -> Result<()> {
    if !(angle > 0.0 && angle <= PI + 1e-12) {
        return Err(LabError::InvalidParams(format!("wedge opening angle {angle} must lie in (0, π]")));
    }
    Ok(())
}

/// Wedge of opening `angle` cut by the circle of given radius about the
/// apex; the apex is cut off at `1e-3 · radius`.
pub fn gen_wedge(radius: f64, angle: f64, n_rings: usize) -> Result<SimplicialMesh> {
    gen_wedge_with_cutoff(radius, angle, n_rings, 1e-3)
}

pub fn gen_wedge_with_cutoff(radius: f64, angle: f64, n_rings: usize, cutoff_ratio: f64) -> Result<SimplicialMesh> {
    positive("radius", radius)?;
    check_wedge_angle(angle)?;
    gen_sector(angle, |_| radius, n_rings, cutoff_ratio)
}

/// Wedge cut by a circle of radius `radius` centred at `center`, which must
/// contain the apex.
pub fn gen_wedge_off_center(
    center: [f64; 2],
    radius: f64,
    angle: f64,
    n_rings: usize,
    cutoff_ratio: f64,
) -> Result<SimplicialMesh> {
    positive("radius", radius)?;
    check_wedge_angle(angle)?;
    let p2 = center[0] * center[0] + center[1] * center[1];
    if p2.sqrt() >= radius {
        return Err(LabError::InvalidParams("the cutting circle must contain the cone apex".into()));
    }
    gen_sector(
        angle,
        |th| {
            let up = th.cos() * center[0] + th.sin() * center[1];
            up + (up * up - p2 + radius * radius).sqrt()
        },
        n_rings,
        cutoff_ratio,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CellKind;

    #[test]
    fn icosphere_counts_and_topology() {
        for s in 0..4 {
            let m = gen_icosphere(1.0, s).unwrap();
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s as u32) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            for v in m.vertices() {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            // outward orientation
            for t in m.triangles() {
                let (a, b, c) = (m.vertices()[t[0]], m.vertices()[t[1]], m.vertices()[t[2]]);
                assert!((b - a).cross(&(c - a)).dot(&(a + b + c)) > 0.0);
            }
        }
    }

    #[test]
    fn circle_vertices_on_circle() {
        let m = gen_circle(2.0, 16).unwrap();
        assert_eq!(m.kind(), CellKind::Curve);
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.vertices().iter().all(|v| (v.norm() - 2.0).abs() < 1e-14));
        assert!(gen_circle(1.0, 2).is_err());
    }

    #[test]
    fn disk_topology() {
        let m = gen_disk(1.0, 6).unwrap();
        assert_eq!(m.vertex_count(), 1 + 3 * 6 * 7);
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary().len(), 36);
        assert!(m.boundary().iter().all(|e| e.label == BoundaryLabel::M));
        assert!(m.min_quality() > 0.2);
    }

    #[test]
    fn annulus_has_two_boundary_loops() {
        let m = gen_annulus(0.5, 1.0, 4).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn wedge_labels() {
        let m = gen_wedge(1.0, PI / 2.0, 8).unwrap();
        assert_eq!(m.euler_characteristic(), 1);
        let mut len = BTreeMap::new();
        for e in m.boundary() {
            let l = (m.vertices()[e.verts[0]] - m.vertices()[e.verts[1]]).norm();
            *len.entry(e.label).or_insert(0.0) += l;
        }
        assert!((len[&BoundaryLabel::M] - PI / 2.0).abs() < 0.01);
        assert!((len[&BoundaryLabel::ConeFace] - 2.0 * (1.0 - 1e-3)).abs() < 1e-9);
        assert!(len[&BoundaryLabel::Cutoff] < 2e-3);
        assert!(m.min_quality() > 0.05);
        assert!(gen_wedge(1.0, 4.0, 8).is_err());
    }

    #[test]
    fn off_center_wedge_arc_on_circle() {
        let c = [0.2, 0.1];
        let m = gen_wedge_off_center(c, 1.0, PI / 2.0, 8, 1e-3).unwrap();
        for (&v, &l) in m.vertex_labels() {
            if l == BoundaryLabel::M {
                let p = m.vertices()[v];
                assert!(((p.x - c[0]).hypot(p.y - c[1]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbed_sphere_is_star_shaped() {
        let m = gen_perturbed_sphere(1.0, 2, 0.1, 7).unwrap();
        let radii: Vec<f64> = m.vertices().iter().map(|v| v.norm()).collect();
        assert!(radii.iter().all(|&r| (0.9 - 1e-12..=1.1 + 1e-12).contains(&r)));
        assert!(radii.iter().any(|&r| (r - 1.0).abs() > 1e-3));
        let again = gen_perturbed_sphere(1.0, 2, 0.1, 7).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn ellipse_domain_maps_boundary() {
        let m = gen_ellipse_domain(2.0, 1.0, 5).unwrap();
        for e in m.boundary() {
            let p = m.vertices()[e.verts[0]];
            assert!(((p.x / 2.0).powi(2) + p.y.powi(2) - 1.0).abs() < 1e-12);
        }
    }
}
