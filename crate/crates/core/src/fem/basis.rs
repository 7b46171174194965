//! Lagrange P1 and P2 shape functions on affine triangles.
//!
//! P2 local node order: the three vertices, then the midpoints of local edges
//! (0,1), (1,2), (2,0).

use super::quadrature::QuadratureRule;
use crate::mesh::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lagrange {
    P1,
    P2,
}

impl Lagrange {
    pub fn local_count(self) -> usize {
        match self {
            Lagrange::P1 => 3,
            Lagrange::P2 => 6,
        }
    }

    pub fn values(self, l: [f64; 3]) -> [f64; 6] {
        match self {
            Lagrange::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
            Lagrange::P2 => p2_values(l),
        }
    }

    pub fn gradients(self, l: [f64; 3], grad_lambda: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
        match self {
            Lagrange::P1 => [grad_lambda[0], grad_lambda[1], grad_lambda[2], [0.0; 2], [0.0; 2], [0.0; 2]],
            Lagrange::P2 => p2_gradients(l, grad_lambda),
        }
    }
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let vertex = |i: usize| {
        let s = 4.0 * l[i] - 1.0;
        [s * g[i][0], s * g[i][1]]
    };
    let edge = |i: usize, j: usize| {
        [
            4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
            4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
        ]
    };
    [vertex(0), vertex(1), vertex(2), edge(0, 1), edge(1, 2), edge(2, 0)]
}

/// Affine triangle geometry.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub points: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(points: [Point; 3]) -> Self {
        let [a, b, c] = points;
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let grad_lambda = [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ];
        Element {
            points,
            area: 0.5 * two_area,
            grad_lambda,
        }
    }

    pub fn map(&self, l: [f64; 3]) -> Point {
        let p = &self.points;
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    pub fn centroid(&self) -> Point {
        self.map([1.0 / 3.0; 3])
    }

    /// Values and gradients of `kind` at every point of `rule`, with
    /// physical weights.
    pub fn tabulate(&self, kind: Lagrange, rule: &QuadratureRule) -> Vec<QuadPoint> {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&l, &w)| QuadPoint {
                x: self.map(l),
                weight: 2.0 * self.area * w,
                lambda: l,
                phi: kind.values(l),
                grad: kind.gradients(l, &self.grad_lambda),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
    pub lambda: [f64; 3],
    pub phi: [f64; 6],
    pub grad: [[f64; 2]; 6],
}

/// Barycentric coordinates of the P2 local nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let e = Element::new([[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]]);
        for rule in [QuadratureRule::degree6(), QuadratureRule::degree9()] {
            for kind in [Lagrange::P1, Lagrange::P2] {
                for q in e.tabulate(kind, &rule) {
                    let s: f64 = q.phi.iter().sum();
                    assert!((s - 1.0).abs() < 1e-14);
                    let gx: f64 = q.grad.iter().map(|g| g[0]).sum();
                    let gy: f64 = q.grad.iter().map(|g| g[1]).sum();
                    assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn p2_is_nodal() {
        for (i, &l) in P2_NODES.iter().enumerate() {
            let v = p2_values(l);
            for (j, &vj) in v.iter().enumerate() {
                assert_eq!(vj, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = Element::new([[0.0, 0.0], [2.0, 0.5], [0.3, 1.1]]);
        // barycentric coordinates of a physical point, solved independently
        let bary = |p: Point| {
            let [a, b, c] = e.points;
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            [1.0 - l1 - l2, l1, l2]
        };
        let x = [0.7, 0.4];
        let g = p2_gradients(bary(x), &e.grad_lambda);
        let h = 1e-6;
        for k in 0..6 {
            for d in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                let fd = (p2_values(bary(xp))[k] - p2_values(bary(xm))[k]) / (2.0 * h);
                assert!((fd - g[k][d]).abs() < 1e-8, "node {k} dir {d}");
            }
        }
    }
}
