//! Bilinear, trilinear and interface forms of the coupled problem.
//!
//! Every matrix is assembled over the full node set of its space (fixed
//! nodes included); restriction to free unknowns happens in the solver.
//! Vector-valued fields are stored interleaved: component `a` of local node
//! `i` sits at index `2i + a`.

use crate::fem::eval::vector_at;
use crate::fem::{EdgeRule, Element, Lagrange, NodeSet, QuadPoint, QuadratureRule};
use crate::mesh::{BoundaryTag, InterfaceEdge, MixedMesh, Point};
use crate::model::ModelParams;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::CoupledSpace;

pub(crate) fn tabulate(mesh: &MixedMesh, t: usize, kind: Lagrange, rule: &QuadratureRule) -> (Element, Vec<QuadPoint>) {
    let e = Element::new(mesh.triangle_points(t));
    let q = e.tabulate(kind, rule);
    (e, q)
}

/// c·(D(u), D(v)) over `triangles` for a vector field on `nodes`.
pub fn strain_matrix(mesh: &MixedMesh, triangles: &[usize], nodes: &NodeSet, coef: f64) -> CsrMatrix {
    let kind = nodes.kind();
    let n = kind.local_count();
    let rule = QuadratureRule::degree6();
    let mut t = TripletBuilder::with_capacity(2 * nodes.len(), 2 * nodes.len(), triangles.len() * 4 * n * n);
    for &tri in triangles {
        let dofs = nodes.element_dofs(mesh, tri);
        let (_, qp) = tabulate(mesh, tri, kind, &rule);
        let mut local = [[0.0; 12]; 12];
        for q in &qp {
            for a in 0..n {
                for b in 0..n {
                    let ga = q.grad[a];
                    let gb = q.grad[b];
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    for al in 0..2 {
                        for be in 0..2 {
                            let delta = if al == be { dot } else { 0.0 };
                            local[2 * a + al][2 * b + be] += q.weight * 0.5 * (delta + gb[al] * ga[be]);
                        }
                    }
                }
            }
        }
        for a in 0..2 * n {
            for b in 0..2 * n {
                t.push(2 * dofs[a / 2] + a % 2, 2 * dofs[b / 2] + b % 2, coef * local[a][b]);
            }
        }
    }
    t.build()
}

/// (q, ∇·v) with rows on `pressure` (P1) and columns on `velocity`.
pub fn divergence_matrix(mesh: &MixedMesh, triangles: &[usize], pressure: &NodeSet, velocity: &NodeSet) -> CsrMatrix {
    let kind = velocity.kind();
    let n = kind.local_count();
    let rule = QuadratureRule::degree6();
    let mut t = TripletBuilder::with_capacity(pressure.len(), 2 * velocity.len(), triangles.len() * 6 * n);
    for &tri in triangles {
        let pd = pressure.element_dofs(mesh, tri);
        let vd = velocity.element_dofs(mesh, tri);
        let (_, qp) = tabulate(mesh, tri, kind, &rule);
        let mut local = [[0.0; 12]; 3];
        for q in &qp {
            for (k, row) in local.iter_mut().enumerate() {
                for j in 0..n {
                    row[2 * j] += q.weight * q.lambda[k] * q.grad[j][0];
                    row[2 * j + 1] += q.weight * q.lambda[k] * q.grad[j][1];
                }
            }
        }
        for k in 0..3 {
            for j in 0..2 * n {
                t.push(pd[k], 2 * vd[j / 2] + j % 2, local[k][j]);
            }
        }
    }
    t.build()
}

/// P1 mass matrix over `triangles`.
pub fn p1_mass_matrix(mesh: &MixedMesh, triangles: &[usize], nodes: &NodeSet) -> CsrMatrix {
    let mut t = TripletBuilder::with_capacity(nodes.len(), nodes.len(), 9 * triangles.len());
    for &tri in triangles {
        let d = nodes.element_dofs(mesh, tri);
        let area = mesh.triangle_area(tri);
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                t.push(d[i], d[j], m);
            }
        }
    }
    t.build()
}

/// 2ν(D(u), D(v)) on the fluid velocity space.
pub fn assemble_viscous(space: &CoupledSpace, params: &ModelParams) -> CsrMatrix {
    strain_matrix(space.mesh(), space.fluid_triangles(), space.velocity(), 2.0 * params.nu)
}

/// (D(u), D(v)) on the fluid velocity space; the energy inner product of X_f.
pub fn assemble_strain_inner(space: &CoupledSpace) -> CsrMatrix {
    strain_matrix(space.mesh(), space.fluid_triangles(), space.velocity(), 1.0)
}

/// 2σ(D(u), D(v)) on the auxiliary porous velocity space.
pub fn assemble_aux_viscous(space: &CoupledSpace, sigma: f64) -> CsrMatrix {
    strain_matrix(space.mesh(), space.porous_triangles(), space.aux(), 2.0 * sigma)
}

/// (q, ∇·u) over Ω_f: pressure rows, velocity columns.
pub fn assemble_divergence(space: &CoupledSpace) -> CsrMatrix {
    divergence_matrix(space.mesh(), space.fluid_triangles(), space.pressure(), space.velocity())
}

/// (q, ∇·v) over Ω_p on the auxiliary velocity with P1 test functions on every porous vertex.
pub fn assemble_porous_divergence(space: &CoupledSpace, porous_pressure: &NodeSet) -> CsrMatrix {
    divergence_matrix(space.mesh(), space.porous_triangles(), porous_pressure, space.aux())
}

pub fn assemble_pressure_mass(space: &CoupledSpace) -> CsrMatrix {
    p1_mass_matrix(space.mesh(), space.fluid_triangles(), space.pressure())
}

/// ∫ q_i over Ω_f for each pressure basis function.
pub fn pressure_mass_vector(space: &CoupledSpace) -> Vec<f64> {
    p1_integrals(space.mesh(), space.fluid_triangles(), space.pressure())
}

pub fn p1_integrals(mesh: &MixedMesh, triangles: &[usize], nodes: &NodeSet) -> Vec<f64> {
    let mut m = vec![0.0; nodes.len()];
    for &tri in triangles {
        let a = mesh.triangle_area(tri) / 3.0;
        for d in nodes.element_dofs(mesh, tri).iter().take(3) {
            m[*d] += a;
        }
    }
    m
}

fn head_stiffness(space: &CoupledSpace, k: impl Fn(usize) -> [[f64; 2]; 2]) -> CsrMatrix {
    let mesh = space.mesh();
    let nodes = space.head();
    let mut t = TripletBuilder::with_capacity(nodes.len(), nodes.len(), 9 * space.porous_triangles().len());
    for &tri in space.porous_triangles() {
        let e = Element::new(mesh.triangle_points(tri));
        let d = nodes.element_dofs(mesh, tri);
        let kk = k(tri);
        for i in 0..3 {
            for j in 0..3 {
                let gi = e.grad_lambda[i];
                let gj = e.grad_lambda[j];
                let kg = [kk[0][0] * gj[0] + kk[0][1] * gj[1], kk[1][0] * gj[0] + kk[1][1] * gj[1]];
                t.push(d[i], d[j], e.area * (kg[0] * gi[0] + kg[1] * gi[1]));
            }
        }
    }
    t.build()
}

/// (𝕂∇φ, ∇ψ) with 𝕂 sampled at triangle barycenters.
pub fn assemble_darcy(space: &CoupledSpace, params: &ModelParams) -> CsrMatrix {
    head_stiffness(space, |t| params.permeability_at(space.mesh(), t))
}

/// (∇φ, ∇ψ) on the head space.
pub fn assemble_head_laplacian(space: &CoupledSpace) -> CsrMatrix {
    head_stiffness(space, |_| [[1.0, 0.0], [0.0, 1.0]])
}

/// N(w)[u, v] = ((w·∇)u, v) + ½(∇·w, u·v).
pub fn assemble_convection(space: &CoupledSpace, w: &[f64]) -> CsrMatrix {
    let mesh = space.mesh();
    let nodes = space.velocity();
    let rule = QuadratureRule::degree6();
    let mut t = TripletBuilder::with_capacity(2 * nodes.len(), 2 * nodes.len(), space.fluid_triangles().len() * 72);
    for &tri in space.fluid_triangles() {
        let d = nodes.element_dofs(mesh, tri);
        let (_, qp) = tabulate(mesh, tri, Lagrange::P2, &rule);
        let mut local = [[0.0; 6]; 6];
        for q in &qp {
            let (wv, wg) = vector_at(q, &d, 6, w);
            let div = wg[0][0] + wg[1][1];
            for i in 0..6 {
                for j in 0..6 {
                    let adv = wv[0] * q.grad[j][0] + wv[1] * q.grad[j][1];
                    local[i][j] += q.weight * q.phi[i] * (adv + 0.5 * div * q.phi[j]);
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for a in 0..2 {
                    t.push(2 * d[i] + a, 2 * d[j] + a, local[i][j]);
                }
            }
        }
    }
    t.build()
}

/// Derivative of u ↦ N(u)[u, ·] in the wind slot: ((δ·∇)w, v) + ½(∇·δ, w·v).
pub fn assemble_convection_derivative(space: &CoupledSpace, w: &[f64]) -> CsrMatrix {
    let mesh = space.mesh();
    let nodes = space.velocity();
    let rule = QuadratureRule::degree6();
    let mut t = TripletBuilder::with_capacity(2 * nodes.len(), 2 * nodes.len(), space.fluid_triangles().len() * 144);
    for &tri in space.fluid_triangles() {
        let d = nodes.element_dofs(mesh, tri);
        let (_, qp) = tabulate(mesh, tri, Lagrange::P2, &rule);
        let mut local = [[0.0; 12]; 12];
        for q in &qp {
            let (wv, wg) = vector_at(q, &d, 6, w);
            for i in 0..6 {
                for j in 0..6 {
                    for a in 0..2 {
                        for b in 0..2 {
                            local[2 * i + a][2 * j + b] += q.weight
                                * q.phi[i]
                                * (q.phi[j] * wg[a][b] + 0.5 * q.grad[j][b] * wv[a]);
                        }
                    }
                }
            }
        }
        for a in 0..12 {
            for b in 0..12 {
                t.push(2 * d[a / 2] + a % 2, 2 * d[b / 2] + b % 2, local[a][b]);
            }
        }
    }
    t.build()
}

/// ((w·∇)u, v) over Ω_p on the auxiliary velocity space, wind on the same nodes.
pub fn assemble_aux_convection(space: &CoupledSpace, wind: &[f64]) -> CsrMatrix {
    let mesh = space.mesh();
    let nodes = space.aux();
    let rule = QuadratureRule::degree6();
    let mut t = TripletBuilder::with_capacity(2 * nodes.len(), 2 * nodes.len(), space.porous_triangles().len() * 72);
    for &tri in space.porous_triangles() {
        let d = nodes.element_dofs(mesh, tri);
        let (_, qp) = tabulate(mesh, tri, Lagrange::P2, &rule);
        let mut local = [[0.0; 6]; 6];
        for q in &qp {
            let (wv, _) = vector_at(q, &d, 6, wind);
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += q.weight * q.phi[i] * (wv[0] * q.grad[j][0] + wv[1] * q.grad[j][1]);
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for a in 0..2 {
                    t.push(2 * d[i] + a, 2 * d[j] + a, local[i][j]);
                }
            }
        }
    }
    t.build()
}

/// Barycentric coordinates along an interface or boundary edge, seen from triangle `t`.
pub(crate) fn edge_barycentric(mesh: &MixedMesh, t: usize, a: usize, b: usize, s: f64) -> [f64; 3] {
    let v = mesh.triangles()[t].vertices;
    let mut l = [0.0; 3];
    for k in 0..3 {
        if v[k] == a {
            l[k] = 1.0 - s;
        } else if v[k] == b {
            l[k] = s;
        }
    }
    l
}

/// Quadrature point on an interface edge, tabulated in the fluid and the
/// porous neighbour.
pub struct InterfacePoint {
    pub x: Point,
    pub weight: f64,
    pub fluid: QuadPoint,
    pub porous_p1: QuadPoint,
    pub porous_p2: QuadPoint,
}

pub fn interface_points(mesh: &MixedMesh, e: &InterfaceEdge, rule: &EdgeRule) -> Vec<InterfacePoint> {
    let [a, b] = e.vertices;
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    let ef = Element::new(mesh.triangle_points(e.fluid_triangle));
    let ep = Element::new(mesh.triangle_points(e.porous_triangle));
    let at = |el: &Element, kind: Lagrange, l: [f64; 3], w: f64| QuadPoint {
        x: el.map(l),
        weight: w,
        lambda: l,
        phi: kind.values(l),
        grad: kind.gradients(l, &el.grad_lambda),
    };
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let lf = edge_barycentric(mesh, e.fluid_triangle, a, b, s);
            let lp = edge_barycentric(mesh, e.porous_triangle, a, b, s);
            let weight = w * len;
            InterfacePoint {
                x: [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]],
                weight,
                fluid: at(&ef, Lagrange::P2, lf, weight),
                porous_p1: at(&ep, Lagrange::P1, lp, weight),
                porous_p2: at(&ep, Lagrange::P2, lp, weight),
            }
        })
        .collect()
}

/// Interface blocks of the coupled form.
#[derive(Clone, Debug)]
pub struct InterfaceBlocks {
    /// (ψ, v·n_f)_Γ: velocity rows, head columns.
    pub coupling: CsrMatrix,
    /// G(u·τ, v·τ)_Γ on the velocity space.
    pub tangential: CsrMatrix,
}

impl InterfaceBlocks {
    /// Square operator on [velocity; head] with the skew normal pair and the
    /// BJS block: [[T, C], [-Cᵀ, 0]].
    pub fn combined(&self) -> CsrMatrix {
        let nu = self.coupling.nrows();
        let nh = self.coupling.ncols();
        let mut t = TripletBuilder::new(nu + nh, nu + nh);
        t.add_block(&self.tangential, 0, 0, 1.0);
        t.add_block(&self.coupling, 0, nu, 1.0);
        t.add_block_transposed(&self.coupling, nu, 0, -1.0);
        t.build()
    }
}

pub fn assemble_interface(space: &CoupledSpace, params: &ModelParams) -> InterfaceBlocks {
    let mesh = space.mesh();
    let (vel, head) = (space.velocity(), space.head());
    let rule = EdgeRule::gauss4();
    let mut c = TripletBuilder::new(2 * vel.len(), head.len());
    let mut tt = TripletBuilder::new(2 * vel.len(), 2 * vel.len());
    for e in mesh.interface_edges() {
        let vd = vel.element_dofs(mesh, e.fluid_triangle);
        let hd = head.element_dofs(mesh, e.porous_triangle);
        let n = e.normal;
        let tau = e.tangent();
        for ip in interface_points(mesh, e, &rule) {
            for i in 0..6 {
                let fi = ip.fluid.phi[i];
                if fi == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    let pk = ip.porous_p1.phi[k];
                    for a in 0..2 {
                        c.push(2 * vd[i] + a, hd[k], ip.weight * pk * fi * n[a]);
                    }
                }
                for j in 0..6 {
                    let fj = ip.fluid.phi[j];
                    for a in 0..2 {
                        for b in 0..2 {
                            tt.push(
                                2 * vd[i] + a,
                                2 * vd[j] + b,
                                params.friction * ip.weight * fi * fj * tau[a] * tau[b],
                            );
                        }
                    }
                }
            }
        }
    }
    InterfaceBlocks {
        coupling: c.build(),
        tangential: tt.build(),
    }
}

/// Right-hand sides on the full velocity and head node sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Loads {
    pub velocity: Vec<f64>,
    pub head: Vec<f64>,
}

/// (g_f, v) + (g_p, ψ), plus Neumann flux on Γ_pn and manufactured interface loads.
pub fn assemble_loads(space: &CoupledSpace, params: &ModelParams) -> Loads {
    let mesh = space.mesh();
    let (vel, head) = (space.velocity(), space.head());
    let mut fv = vec![0.0; 2 * vel.len()];
    let mut fh = vec![0.0; head.len()];
    let rule = QuadratureRule::degree9();
    if let Some(g) = &params.g_f {
        for &tri in space.fluid_triangles() {
            let d = vel.element_dofs(mesh, tri);
            for q in tabulate(mesh, tri, Lagrange::P2, &rule).1 {
                let gv = g(q.x);
                for i in 0..6 {
                    fv[2 * d[i]] += q.weight * gv[0] * q.phi[i];
                    fv[2 * d[i] + 1] += q.weight * gv[1] * q.phi[i];
                }
            }
        }
    }
    if let Some(g) = &params.g_p {
        for &tri in space.porous_triangles() {
            let d = head.element_dofs(mesh, tri);
            for q in tabulate(mesh, tri, Lagrange::P1, &rule).1 {
                let gv = g(q.x);
                for i in 0..3 {
                    fh[d[i]] += q.weight * gv * q.phi[i];
                }
            }
        }
    }
    let edge_rule = EdgeRule::gauss(6);
    if let Some(flux) = &params.neumann_flux {
        for (k, be) in mesh.boundary_edges().iter().enumerate() {
            if be.tag != BoundaryTag::PorousNeumann {
                continue;
            }
            let normal = mesh.boundary_normal(k);
            let [a, b] = be.vertices;
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            for (&s, &w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let x = [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]];
                let g = flux(x, normal) * w * len;
                fh[head.local(a).expect("porous vertex")] += g * (1.0 - s);
                fh[head.local(b).expect("porous vertex")] += g * s;
            }
        }
    }
    if let Some(loads) = &params.interface_loads {
        for e in mesh.interface_edges() {
            let vd = vel.element_dofs(mesh, e.fluid_triangle);
            let hd = head.element_dofs(mesh, e.porous_triangle);
            let (n, tau) = (e.normal, e.tangent());
            for ip in interface_points(mesh, e, &edge_rule) {
                let rn = (loads.r_normal)(ip.x, n);
                let rt = (loads.r_tangential)(ip.x, n);
                let rm = (loads.r_mass)(ip.x, n);
                for i in 0..6 {
                    for a in 0..2 {
                        fv[2 * vd[i] + a] -= ip.weight * ip.fluid.phi[i] * (rn * n[a] + rt * tau[a]);
                    }
                }
                for k in 0..3 {
                    fh[hd[k]] -= ip.weight * rm * ip.porous_p1.phi[k];
                }
            }
        }
    }
    Loads { velocity: fv, head: fh }
}
