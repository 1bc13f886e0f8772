//! First nonzero eigenvalue of the drift Laplacian on closed meshes, and
//! weighted Rayleigh quotients.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::ops::OperatorPack;
use crate::sparse::{conjugate_gradient, dot, norm2, CsrMatrix};

pub const SEED: u64 = 0x5EED;

/// Relative spectral gap below which the first eigenvalue is flagged as
/// (nearly) multiple.
pub const NEAR_DEGENERATE: f64 = 1e-6;

/// Relative accuracy of the inner shifted solves. Tighter values sit at the
/// roundoff floor `ε·cond(S + σM)` on fine meshes and stall.
pub const INNER_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Target for `‖Sv − λMv‖ / ‖Mv‖`, relative to `max(λ, 1)`.
    pub tolerance: f64,
    pub max_iter: usize,
    pub block: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: 1e-9, max_iter: 10_000, block: 8, seed: SEED }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Next Ritz value, used for the degeneracy flag.
    pub lambda2: f64,
    pub eigenvector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub near_degenerate: bool,
}

fn m_dot(m: &CsrMatrix, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &m.mul_vec(b))
}

/// Removes the M-mean: `v ← v − (1ᵀMv / 1ᵀM1) 1`.
fn deflate(mass_rows: &[f64], total: f64, v: &mut [f64]) {
    let c = dot(mass_rows, v) / total;
    v.iter_mut().for_each(|x| *x -= c);
}

/// M-orthonormalises the columns in place; columns that collapse are
/// replaced by fresh random vectors.
fn m_orthonormalize(
    m: &CsrMatrix,
    mass_rows: &[f64],
    total: f64,
    cols: &mut [Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mscale = m.diagonal().iter().cloned().fold(0.0, f64::max).sqrt();
    for k in 0..cols.len() {
        for attempt in 0..5 {
            deflate(mass_rows, total, &mut cols[k]);
            for _ in 0..2 {
                for j in 0..k {
                    let c = m_dot(m, &cols[j], &cols[k]);
                    let (head, tail) = cols.split_at_mut(k);
                    tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nrm = m_dot(m, &cols[k], &cols[k]).max(0.0).sqrt();
            let scale = norm2(&cols[k]).max(f64::MIN_POSITIVE);
            if nrm > 1e-10 * scale * mscale {
                cols[k].iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            if attempt == 4 {
                return Err(LabError::SingularSystem("could not build an M-orthonormal block".into()));
            }
            cols[k] = (0..cols[k].len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
    }
    Ok(())
}

/// `λ₁` of `(S, M)` on the M-orthogonal complement of constants by block
/// inverse iteration with Rayleigh–Ritz.
pub fn lambda1_drift(pack: &OperatorPack) -> Result<EigenResult> {
    lambda1_drift_with(pack, EigenOptions::default())
}

pub fn lambda1_drift_with(pack: &OperatorPack, opts: EigenOptions) -> Result<EigenResult> {
    let n = pack.vertex_count;
    if n < 3 {
        return Err(LabError::DegenerateInput(format!("{n} vertices are too few for an eigenproblem")));
    }
    let s = &pack.stiffness;
    let m = &pack.mass;
    let ones = vec![1.0; n];
    let mass_rows = m.mul_vec(&ones);
    let total: f64 = mass_rows.iter().sum();
    let k = opts.block.clamp(2, n - 1);
    let trace_ratio = s.diagonal().iter().sum::<f64>() / m.diagonal().iter().sum::<f64>();
    let sigma = 1e-3 * trace_ratio.max(1e-12);
    let a = s.linear_combination(1.0, m, sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cols: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    m_orthonormalize(m, &mass_rows, total, &mut cols, &mut rng)?;
    let cg_max = 20 * n + 1000;
    let mut best = f64::INFINITY;
    for it in 1..=opts.max_iter {
        // Y = A^{-1} M X
        let mut next = Vec::with_capacity(k);
        for x in &cols {
            let b = m.mul_vec(x);
            let mut y = x.clone();
            conjugate_gradient(&a, &b, &mut y, INNER_TOL, cg_max)?;
            next.push(y);
        }
        m_orthonormalize(m, &mass_rows, total, &mut next, &mut rng)?;
        // Rayleigh–Ritz on span(Y), which is M-orthonormal
        let sy: Vec<Vec<f64>> = next.iter().map(|y| s.mul_vec(y)).collect();
        let proj = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&next[i], &sy[j]) + dot(&next[j], &sy[i])));
        let eig = proj.symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut ritz = Vec::with_capacity(k);
        let mut ritz_s = Vec::with_capacity(k);
        for &c in &order {
            let mut v = vec![0.0; n];
            let mut sv = vec![0.0; n];
            for j in 0..k {
                let w = eig.eigenvectors[(j, c)];
                v.iter_mut().zip(&next[j]).for_each(|(a, b)| *a += w * b);
                sv.iter_mut().zip(&sy[j]).for_each(|(a, b)| *a += w * b);
            }
            ritz.push(v);
            ritz_s.push(sv);
        }
        let values: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c].max(0.0)).collect();
        let residual_of = |idx: usize| -> f64 {
            let mv = m.mul_vec(&ritz[idx]);
            let r: Vec<f64> = ritz_s[idx].iter().zip(&mv).map(|(a, b)| a - values[idx] * b).collect();
            norm2(&r) / norm2(&mv)
        };
        let r1 = residual_of(0);
        let r2 = residual_of(1);
        best = best.min(r1);
        let tol1 = opts.tolerance * values[0].max(1.0);
        let tol2 = opts.tolerance * values[1].max(1.0);
        if r1 <= tol1 && r2 <= tol2 {
            let mut v = ritz.swap_remove(0);
            deflate(&mass_rows, total, &mut v);
            let nrm = m_dot(m, &v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            return Ok(EigenResult {
                lambda1: values[0],
                lambda2: values[1],
                eigenvector: v,
                residual: r1,
                iterations: it,
                near_degenerate: values[1] - values[0] < NEAR_DEGENERATE * values[0],
            });
        }
        cols = ritz;
    }
    Err(LabError::SolverStall { iterations: opts.max_iter, best_residual: best })
}

/// `λ₁` computed with the lumped (diagonal) mass in place of the consistent
/// one. The difference to [`lambda1_drift`] estimates the discretisation
/// error of `λ₁`.
pub fn lambda1_lumped(pack: &OperatorPack) -> Result<EigenResult> {
    let mut lumped = pack.clone();
    lumped.mass = CsrMatrix::diagonal_matrix(&pack.lumped);
    lambda1_drift(&lumped)
}

/// `φ̂ᵀSφ̂ / φ̂ᵀMφ̂` for the M-mean-free part `φ̂` of `phi`.
pub fn rayleigh_quotient(pack: &OperatorPack, phi: &[f64]) -> Result<f64> {
    if phi.len() != pack.vertex_count {
        return Err(LabError::InvalidParams("function length differs from vertex count".into()));
    }
    let ones = vec![1.0; pack.vertex_count];
    let mass_rows = pack.mass.mul_vec(&ones);
    let total: f64 = mass_rows.iter().sum();
    let before = m_dot(&pack.mass, phi, phi);
    let mut p = phi.to_vec();
    deflate(&mass_rows, total, &mut p);
    let den = m_dot(&pack.mass, &p, &p);
    if !(den > 1e-24 * before) || den == 0.0 {
        return Err(LabError::ZeroFunction);
    }
    Ok(m_dot(&pack.stiffness, &p, &p) / den)
}
