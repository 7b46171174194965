//! Pointwise evaluation of finite-element fields at tabulated points.

use super::basis::QuadPoint;

/// Value and gradient (`grad[i][j] = ∂_j u_i`) of an interleaved vector field.
pub fn vector_at(q: &QuadPoint, dofs: &[usize; 6], n: usize, coeffs: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for k in 0..n {
        let (ux, uy) = (coeffs[2 * dofs[k]], coeffs[2 * dofs[k] + 1]);
        v[0] += ux * q.phi[k];
        v[1] += uy * q.phi[k];
        for d in 0..2 {
            g[0][d] += ux * q.grad[k][d];
            g[1][d] += uy * q.grad[k][d];
        }
    }
    (v, g)
}

pub fn scalar_at(q: &QuadPoint, dofs: &[usize; 6], n: usize, coeffs: &[f64]) -> (f64, [f64; 2]) {
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for k in 0..n {
        let c = coeffs[dofs[k]];
        v += c * q.phi[k];
        g[0] += c * q.grad[k][0];
        g[1] += c * q.grad[k][1];
    }
    (v, g)
}

/// Symmetric part of a gradient.
pub fn strain(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let off = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], off], [off, g[1][1]]]
}

pub fn frobenius2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]
}
