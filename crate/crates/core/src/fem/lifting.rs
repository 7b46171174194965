//! Discrete Stokes extension of interface traces into the porous region.
//!
//! Minimizes ‖D(w)‖² over the auxiliary P2 space subject to the trace on Γ,
//! w = 0 on Γ_p, and (∇·w, q) = 0 for every zero-mean porous P1 function q.
//! When the trace carries zero net flux the constraint holds for constants
//! too, so w is weakly divergence-free against the whole P1 space.

use super::space::CoupledSpace;
use crate::assembly::{assemble_porous_divergence, interface_points, p1_integrals, strain_matrix};
use crate::fem::eval::vector_at;
use crate::fem::EdgeRule;
use crate::mesh::Point;
use crate::sparse::{LinearSolveError, LinearSolver, TripletBuilder};

#[derive(Clone, Debug)]
pub struct Lifting {
    /// Interleaved values on every auxiliary node.
    pub coefficients: Vec<f64>,
    /// ∫_Γ trace·n_p ds.
    pub net_flux: f64,
    /// Set when the net flux exceeds tolerance, so the divergence constraint
    /// could only be imposed against zero-mean test functions.
    pub flux_warning: Option<String>,
}

/// Lift a trace given as a field on Γ (evaluated at interface nodes).
pub fn discrete_lifting(space: &CoupledSpace, trace: impl Fn(Point) -> [f64; 2]) -> Result<Lifting, LinearSolveError> {
    let aux = space.aux();
    let mut values = vec![0.0; 2 * aux.len()];
    for &g in space.interface_nodes() {
        let i = aux.local(g).expect("interface node in porous space");
        let v = trace(space.aux_node_point(i));
        values[2 * i] = v[0];
        values[2 * i + 1] = v[1];
    }
    lift_nodal_trace(space, values)
}

/// Lift the Γ trace of a fluid velocity coefficient vector.
pub fn lifting_of_velocity(space: &CoupledSpace, u_f: &[f64]) -> Result<Lifting, LinearSolveError> {
    let (vel, aux) = (space.velocity(), space.aux());
    let mut values = vec![0.0; 2 * aux.len()];
    for &g in space.interface_nodes() {
        let i = aux.local(g).expect("interface node in porous space");
        let j = vel.local(g).expect("interface node in fluid space");
        values[2 * i] = u_f[2 * j];
        values[2 * i + 1] = u_f[2 * j + 1];
    }
    lift_nodal_trace(space, values)
}

/// `values` holds the trace on interface nodes and zero elsewhere.
fn lift_nodal_trace(space: &CoupledSpace, mut values: Vec<f64>) -> Result<Lifting, LinearSolveError> {
    let mesh = space.mesh();
    let aux = space.aux();
    let pn = space.porous_vertices();
    // Γ ∩ Γ_p endpoints belong to Γ_p
    let on_gamma: std::collections::HashSet<usize> = space.interface_nodes().iter().copied().collect();
    for i in 0..aux.len() {
        if aux.is_fixed(i) && !on_gamma.contains(&aux.global(i)) {
            values[2 * i] = 0.0;
            values[2 * i + 1] = 0.0;
        }
    }
    let net_flux = interface_flux(space, &values);
    let scale = interface_abs_flux(space, &values);
    if scale == 0.0 {
        return Ok(Lifting { coefficients: values, net_flux, flux_warning: None });
    }

    let a = strain_matrix(mesh, space.porous_triangles(), aux, 1.0);
    let b = assemble_porous_divergence(space, pn);
    let m = p1_integrals(mesh, space.porous_triangles(), pn);

    let nfree = 2 * aux.free_count();
    let np = pn.len();
    let n = nfree + np + 1;
    let map: Vec<Option<usize>> = (0..2 * aux.len())
        .map(|k| aux.free_index(k / 2).map(|f| 2 * f + k % 2))
        .collect();
    let mut t = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for r in 0..2 * aux.len() {
        let Some(fr) = map[r] else { continue };
        for (c, v) in a.row(r) {
            match map[c] {
                Some(fc) => t.push(fr, fc, v),
                None => rhs[fr] -= v * values[c],
            }
        }
    }
    for q in 0..np {
        for (c, v) in b.row(q) {
            match map[c] {
                Some(fc) => {
                    t.push(nfree + q, fc, v);
                    t.push(fc, nfree + q, v);
                }
                None => rhs[nfree + q] -= v * values[c],
            }
        }
        t.push(nfree + q, nfree + q, 0.0);
        t.push(nfree + q, n - 1, m[q]);
        t.push(n - 1, nfree + q, m[q]);
    }
    t.push(n - 1, n - 1, 0.0);
    let x = LinearSolver::DirectLu.solve(&t.build(), &rhs)?;
    for k in 0..2 * aux.len() {
        if let Some(f) = map[k] {
            values[k] = x[f];
        }
    }
    let flux_warning = (net_flux.abs() > 1e-10 * scale).then(|| {
        format!("trace has net flux {net_flux:e}; divergence is constrained against zero-mean tests only")
    });
    Ok(Lifting { coefficients: values, net_flux, flux_warning })
}

fn interface_integral(space: &CoupledSpace, values: &[f64], f: impl Fn([f64; 2], [f64; 2]) -> f64) -> f64 {
    let mesh = space.mesh();
    let rule = EdgeRule::gauss4();
    let mut s = 0.0;
    for e in mesh.interface_edges() {
        let d = space.aux().element_dofs(mesh, e.porous_triangle);
        for ip in interface_points(mesh, e, &rule) {
            let (v, _) = vector_at(&ip.porous_p2, &d, 6, values);
            s += ip.weight * f(v, e.porous_normal());
        }
    }
    s
}

/// ∫_Γ w·n_p for an auxiliary-space field.
pub fn interface_flux(space: &CoupledSpace, values: &[f64]) -> f64 {
    interface_integral(space, values, |v, n| v[0] * n[0] + v[1] * n[1])
}

fn interface_abs_flux(space: &CoupledSpace, values: &[f64]) -> f64 {
    interface_integral(space, values, |v, _| v[0].hypot(v[1]))
}

/// (∇·w, q_i) for every porous vertex function q_i.
pub fn divergence_pairing(space: &CoupledSpace, values: &[f64]) -> Vec<f64> {
    assemble_porous_divergence(space, space.porous_vertices()).matvec(values)
}

/// Largest |(∇·w, q)| over zero-mean P1 test functions q_i - mean(q_i).
pub fn zero_mean_divergence_defect(space: &CoupledSpace, values: &[f64]) -> f64 {
    let pairing = divergence_pairing(space, values);
    let m = p1_integrals(space.mesh(), space.porous_triangles(), space.porous_vertices());
    let area: f64 = m.iter().sum();
    let total: f64 = pairing.iter().sum();
    pairing
        .iter()
        .zip(&m)
        .map(|(p, mi)| (p - mi / area * total).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;

    fn space() -> CoupledSpace {
        CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap().refine_uniform())
    }

    #[test]
    fn zero_trace_gives_zero() {
        let s = space();
        let l = discrete_lifting(&s, |_| [0.0, 0.0]).unwrap();
        assert!(l.coefficients.iter().all(|&v| v == 0.0));
        assert!(l.flux_warning.is_none());
    }

    #[test]
    fn tangential_bump_is_weakly_divergence_free() {
        let s = space();
        let l = discrete_lifting(&s, |x| [(x[0] * (1.0 - x[0])) * 4.0, 0.0]).unwrap();
        assert!(l.net_flux.abs() < 1e-14);
        assert!(l.flux_warning.is_none());
        let pairing = divergence_pairing(&s, &l.coefficients);
        let worst = pairing.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-10, "{worst}");
        assert!(l.coefficients.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn trace_is_imposed_exactly() {
        let s = space();
        let trace = |x: Point| [x[0] * (1.0 - x[0]), (std::f64::consts::PI * x[0]).sin()];
        let l = discrete_lifting(&s, trace).unwrap();
        for &g in s.interface_nodes() {
            let i = s.aux().local(g).unwrap();
            let p = s.aux_node_point(i);
            assert_eq!([l.coefficients[2 * i], l.coefficients[2 * i + 1]], trace(p));
        }
        for i in 0..s.aux().len() {
            let p = s.aux_node_point(i);
            if p[1] == 0.0 || ((p[0] == 0.0 || p[0] == 1.0) && p[1] < 1.0) {
                assert_eq!(l.coefficients[2 * i], 0.0);
                assert_eq!(l.coefficients[2 * i + 1], 0.0);
            }
        }
        // sin(πx) in the normal direction carries net flux
        assert!(l.flux_warning.is_some());
        assert!(zero_mean_divergence_defect(&s, &l.coefficients) < 1e-10);
    }
}
