//! Nodal interpolation onto the discrete spaces and error norms against
//! analytic fields.

use thiserror::Error;

use super::basis::Lagrange;
use super::eval::{scalar_at, vector_at};
use super::quadrature::QuadratureRule;
use super::space::{p2_node_point, CoupledSpace, NodeSet};
use crate::assembly::tabulate;
use crate::mesh::{MixedMesh, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpolationError {
    #[error("field does not vanish on the fluid wall: |v| = {magnitude:e} at ({x}, {y})")]
    NonzeroOnWall { magnitude: f64, x: f64, y: f64 },
}

fn node_point(mesh: &MixedMesh, nodes: &NodeSet, i: usize) -> Point {
    match nodes.kind() {
        Lagrange::P1 => mesh.vertices()[nodes.global(i)],
        Lagrange::P2 => p2_node_point(mesh, nodes.global(i)),
    }
}

/// Interleaved nodal values of a vector field on every node of `nodes`.
pub fn nodal_vector(mesh: &MixedMesh, nodes: &NodeSet, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * nodes.len()];
    for i in 0..nodes.len() {
        let v = f(node_point(mesh, nodes, i));
        out[2 * i] = v[0];
        out[2 * i + 1] = v[1];
    }
    out
}

pub fn nodal_scalar(mesh: &MixedMesh, nodes: &NodeSet, f: impl Fn(Point) -> f64) -> Vec<f64> {
    (0..nodes.len()).map(|i| f(node_point(mesh, nodes, i))).collect()
}

/// Interpolant Π_f^h onto X_fh, realized as P2 nodal interpolation.
///
/// Fails when `v` does not vanish on Γ_f, since the result would leave X_fh.
pub fn scott_zhang_interpolate(space: &CoupledSpace, v: impl Fn(Point) -> [f64; 2]) -> Result<Vec<f64>, InterpolationError> {
    let nodes = space.velocity();
    let out = nodal_vector(space.mesh(), nodes, v);
    let scale = out.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for i in 0..nodes.len() {
        if nodes.is_fixed(i) {
            let mag = out[2 * i].hypot(out[2 * i + 1]);
            if mag > 1e-12 * scale {
                let p = space.velocity_node_point(i);
                return Err(InterpolationError::NonzeroOnWall { magnitude: mag, x: p[0], y: p[1] });
            }
        }
    }
    Ok(out)
}

/// L² and H¹-seminorm errors of a vector field on `nodes` over `triangles`.
pub fn vector_errors(
    mesh: &MixedMesh,
    triangles: &[usize],
    nodes: &NodeSet,
    coeffs: &[f64],
    exact: impl Fn(Point) -> [f64; 2],
    exact_grad: impl Fn(Point) -> [[f64; 2]; 2],
) -> (f64, f64) {
    let rule = QuadratureRule::degree9();
    let kind = nodes.kind();
    let (mut l2, mut h1) = (0.0, 0.0);
    for &t in triangles {
        let d = nodes.element_dofs(mesh, t);
        for q in tabulate(mesh, t, kind, &rule).1 {
            let (v, g) = vector_at(&q, &d, kind.local_count(), coeffs);
            let (ve, ge) = (exact(q.x), exact_grad(q.x));
            l2 += q.weight * ((v[0] - ve[0]).powi(2) + (v[1] - ve[1]).powi(2));
            for a in 0..2 {
                for b in 0..2 {
                    h1 += q.weight * (g[a][b] - ge[a][b]).powi(2);
                }
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// L² and H¹-seminorm errors of a scalar field.
pub fn scalar_errors(
    mesh: &MixedMesh,
    triangles: &[usize],
    nodes: &NodeSet,
    coeffs: &[f64],
    exact: impl Fn(Point) -> f64,
    exact_grad: impl Fn(Point) -> [f64; 2],
) -> (f64, f64) {
    let rule = QuadratureRule::degree9();
    let kind = nodes.kind();
    let (mut l2, mut h1) = (0.0, 0.0);
    for &t in triangles {
        let d = nodes.element_dofs(mesh, t);
        for q in tabulate(mesh, t, kind, &rule).1 {
            let (v, g) = scalar_at(&q, &d, kind.local_count(), coeffs);
            let ge = exact_grad(q.x);
            l2 += q.weight * (v - exact(q.x)).powi(2);
            h1 += q.weight * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;
    use std::f64::consts::PI;

    fn bump(x: Point) -> [f64; 2] {
        [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.0]
    }

    fn bump_grad(x: Point) -> [[f64; 2]; 2] {
        [
            [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
            [0.0, 0.0],
        ]
    }

    #[test]
    fn discrete_fields_are_reproduced() {
        let space = CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap());
        // a quadratic field vanishing on the wall is in X_fh
        let f = |x: Point| {
            let w = x[0] * (1.0 - x[0]) * (2.0 - x[1]);
            [w, -0.5 * w]
        };
        let u = scott_zhang_interpolate(&space, f).unwrap();
        let again = nodal_vector(space.mesh(), space.velocity(), |x| {
            // evaluate the discrete field through its nodal values
            let i = (0..space.velocity().len())
                .find(|&i| space.velocity_node_point(i) == x)
                .unwrap();
            [u[2 * i], u[2 * i + 1]]
        });
        assert_eq!(u, again);
        let fluid = space.fluid_triangles();
        let (l2, h1) = vector_errors(space.mesh(), fluid, space.velocity(), &u, |x| {
            let w = x[0] * (1.0 - x[0]) * (2.0 - x[1]);
            [w, -0.5 * w]
        }, |x| {
            let (a, b) = (x[0] * (1.0 - x[0]), 1.0 - 2.0 * x[0]);
            let gx = b * (2.0 - x[1]);
            let gy = -a;
            [[gx, gy], [-0.5 * gx, -0.5 * gy]]
        });
        // cubic field, so only approximately reproduced; quadratic part exact
        assert!(l2 < 1e-2 && h1 < 1e-1);
        let zero = scott_zhang_interpolate(&space, |_| [0.0, 0.0]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_field_nonzero_on_wall() {
        let space = CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap());
        assert!(matches!(
            scott_zhang_interpolate(&space, |_| [1.0, 0.0]),
            Err(InterpolationError::NonzeroOnWall { .. })
        ));
    }

    #[test]
    fn l2_error_drops_by_eight_per_halving() {
        // the bump vanishes on the fluid wall of (0,1)x(1,2)
        let mut mesh = build_rectangle_mesh(2, 4, 1.0).unwrap();
        let mut errors = Vec::new();
        for _ in 0..3 {
            let space = CoupledSpace::new(mesh.clone());
            let u = scott_zhang_interpolate(&space, bump).unwrap();
            let (l2, h1) = vector_errors(space.mesh(), space.fluid_triangles(), space.velocity(), &u, bump, bump_grad);
            errors.push((l2, h1));
            mesh = mesh.refine_uniform();
        }
        for w in errors.windows(2) {
            let r_l2 = w[0].0 / w[1].0;
            let r_h1 = w[0].1 / w[1].1;
            // at least the factor 4 asked of a quasi-interpolant; P2 gives about 8
            assert!(r_l2 > 4.0, "L2 ratio {r_l2}");
            assert!(r_h1 > 3.5, "H1 ratio {r_h1}");
        }
    }
}
