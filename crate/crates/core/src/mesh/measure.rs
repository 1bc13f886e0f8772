use super::{CellKind, SimplicialMesh, Vec3};
use crate::density::{weighted_element, DensityField};
use crate::quadrature::{gauss_legendre, TriangleRule};

/// Length of each segment or area of each triangle.
pub fn cell_measures(mesh: &SimplicialMesh) -> Vec<f64> {
    let v = mesh.vertices();
    match mesh.kind() {
        CellKind::Curve => mesh.segments().iter().map(|s| (v[s[1]] - v[s[0]]).norm()).collect(),
        _ => mesh
            .triangles()
            .iter()
            .map(|t| 0.5 * (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]])).norm())
            .collect(),
    }
}

fn coords(p: &Vec3, dim: usize) -> Vec<f64> {
    p.as_slice()[..dim].to_vec()
}

/// `∫ e^{-f} dA` over the cells with the default three-point triangle rule
/// (two-point Gauss on segments).
pub fn weighted_measure(mesh: &SimplicialMesh, field: &DensityField) -> f64 {
    weighted_measure_with(mesh, field, TriangleRule::default())
}

pub fn weighted_measure_with(mesh: &SimplicialMesh, field: &DensityField, rule: TriangleRule) -> f64 {
    let v = mesh.vertices();
    let dim = mesh.ambient_dim();
    let areas = cell_measures(mesh);
    match mesh.kind() {
        CellKind::Curve => {
            let gl = gauss_legendre(2);
            mesh.segments()
                .iter()
                .zip(&areas)
                .map(|(s, len)| {
                    gl.iter()
                        .map(|&(x, w)| {
                            let t = 0.5 * (x + 1.0);
                            let p = v[s[0]] * (1.0 - t) + v[s[1]] * t;
                            0.5 * w * weighted_element(field, &coords(&p, dim))
                        })
                        .sum::<f64>()
                        * len
                })
                .sum()
        }
        _ => {
            let pts = rule.points();
            mesh.triangles()
                .iter()
                .zip(&areas)
                .map(|(t, area)| {
                    pts.iter()
                        .map(|(b, w)| {
                            let p = v[t[0]] * b[0] + v[t[1]] * b[1] + v[t[2]] * b[2];
                            w * weighted_element(field, &coords(&p, dim))
                        })
                        .sum::<f64>()
                        * area
                })
                .sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_circle, gen_disk, gen_icosphere};
    use std::f64::consts::PI;

    #[test]
    fn unweighted_measures() {
        let n = 64;
        let c = gen_circle(1.0, n).unwrap();
        let exact_perimeter = 2.0 * n as f64 * (PI / n as f64).sin();
        assert!((weighted_measure(&c, &DensityField::zero()) - exact_perimeter).abs() < 1e-12);
        let d = gen_disk(1.0, 10).unwrap();
        let poly_area = 0.5 * 60.0 * (2.0 * PI / 60.0).sin();
        assert!((weighted_measure(&d, &DensityField::zero()) - poly_area).abs() < 1e-12);
    }

    #[test]
    fn constant_weight_scales() {
        let s = gen_icosphere(1.0, 3).unwrap();
        let a = weighted_measure(&s, &DensityField::zero());
        let b = weighted_measure(&s, &DensityField::constant(2.0));
        assert!((b - a * (-2.0f64).exp()).abs() < 1e-12);
        assert!((a - 4.0 * PI).abs() < 0.02 * 4.0 * PI);
    }

    #[test]
    fn gaussian_weight_on_circle() {
        // |x|^2 = 1 on the inscribed polygon vertices only; use fine mesh
        let c = gen_circle(1.0, 4096).unwrap();
        let w = weighted_measure(&c, &DensityField::gaussian(0.5));
        assert!((w - 2.0 * PI * (-0.5f64).exp()).abs() < 1e-5);
    }
}
