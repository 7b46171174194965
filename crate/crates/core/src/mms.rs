//! Manufactured solutions: closed-form exact fields, the data they induce,
//! a weak-consistency check and convergence studies.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::assembly::{interface_points, tabulate};
use crate::fem::eval::strain;
use crate::fem::interpolate::{scalar_errors, vector_errors};
use crate::fem::{EdgeRule, Lagrange, QuadratureRule};
use crate::mesh::{BoundaryTag, MixedMesh, Point};
use crate::model::{BoundaryField, InterfaceLoads, ModelParams, ScalarField, TensorField, VectorField};
use crate::solver::{solve_coupled, SolveError, SolverConfig};
use crate::CoupledSpace;

#[derive(Debug, Error)]
pub enum MmsError {
    #[error("exact velocity is not divergence-free: div u = {divergence:e} at ({x}, {y})")]
    NotDivergenceFree { x: f64, y: f64, divergence: f64 },
    #[error("a convergence study needs at least {needed} levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },
    #[error("level {level}: weak residual of the exact fields is {residual:e}")]
    Inconsistent { level: usize, residual: f64 },
    #[error("level {level}: {source}")]
    Solve { level: usize, source: SolveError },
}

/// Exact fields and the derivatives needed to build the data.
#[derive(Clone)]
pub struct ExactFields {
    pub u: VectorField,
    /// `grad_u(x)[i][j] = ∂_j u_i`.
    pub grad_u: TensorField,
    pub laplacian_u: VectorField,
    pub p: ScalarField,
    pub grad_p: VectorField,
    pub phi: ScalarField,
    pub grad_phi: VectorField,
    pub hessian_phi: TensorField,
}

/// Physical constants of a manufactured case; 𝕂 is constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MmsSetup {
    pub nu: f64,
    pub permeability: [[f64; 2]; 2],
    pub friction: f64,
    pub convection: bool,
}

impl MmsSetup {
    pub fn new(nu: f64) -> Self {
        MmsSetup {
            nu,
            permeability: [[1.0, 0.0], [0.0, 1.0]],
            friction: 1.0,
            convection: true,
        }
    }
}

/// Exact fields together with the sources and interface loads they induce.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub fields: ExactFields,
    pub setup: MmsSetup,
    pub g_f: VectorField,
    pub g_p: ScalarField,
    pub interface_loads: InterfaceLoads,
}

fn matvec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Cauchy stress 2νD(u) − pI.
fn stress(f: &ExactFields, nu: f64, x: Point) -> [[f64; 2]; 2] {
    let d = strain(&(f.grad_u)(x));
    let p = (f.p)(x);
    [[2.0 * nu * d[0][0] - p, 2.0 * nu * d[0][1]], [2.0 * nu * d[1][0], 2.0 * nu * d[1][1] - p]]
}

/// Build g_f, g_p and the interface loads for the given exact fields.
///
/// The divergence of `u` is sampled on a grid over (0,1)×(0,2).
pub fn derive_sources(name: &str, fields: ExactFields, setup: MmsSetup) -> Result<ManufacturedCase, MmsError> {
    for i in 0..=20 {
        for j in 0..=40 {
            let x = [i as f64 / 20.0, j as f64 / 20.0];
            let g = (fields.grad_u)(x);
            let div = g[0][0] + g[1][1];
            let scale = g.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            if div.abs() > 1e-12 * scale {
                return Err(MmsError::NotDivergenceFree { x: x[0], y: x[1], divergence: div });
            }
        }
    }
    let MmsSetup { nu, permeability: k, friction: g, convection } = setup;

    let f = fields.clone();
    let g_f: VectorField = Arc::new(move |x| {
        let lap = (f.laplacian_u)(x);
        let gp = (f.grad_p)(x);
        let mut out = [-nu * lap[0] + gp[0], -nu * lap[1] + gp[1]];
        if convection {
            let adv = matvec((f.grad_u)(x), (f.u)(x));
            out[0] += adv[0];
            out[1] += adv[1];
        }
        out
    });
    let f = fields.clone();
    let g_p: ScalarField = Arc::new(move |x| {
        let h = (f.hessian_phi)(x);
        -(k[0][0] * h[0][0] + k[0][1] * h[1][0] + k[1][0] * h[0][1] + k[1][1] * h[1][1])
    });

    let f = fields.clone();
    let r_mass: BoundaryField = Arc::new(move |x, n| {
        // n_p = -n_f
        dot2((f.u)(x), n) + dot2(matvec(k, (f.grad_phi)(x)), n)
    });
    let f = fields.clone();
    let r_normal: BoundaryField = Arc::new(move |x, n| -dot2(matvec(stress(&f, nu, x), n), n) - (f.phi)(x));
    let f = fields.clone();
    let r_tangential: BoundaryField = Arc::new(move |x, n| {
        let tau = [-n[1], n[0]];
        -dot2(matvec(stress(&f, nu, x), n), tau) - g * dot2((f.u)(x), tau)
    });

    Ok(ManufacturedCase {
        name: name.to_string(),
        fields,
        setup,
        g_f,
        g_p,
        interface_loads: InterfaceLoads { r_mass, r_normal, r_tangential },
    })
}

impl ManufacturedCase {
    /// Model data reproducing the exact fields: sources, interface loads,
    /// exact Dirichlet values and the exact Neumann flux.
    pub fn params(&self) -> ModelParams {
        let k = self.setup.permeability;
        let mean = 0.5 * (k[0][0] + k[1][1]);
        let r = (0.25 * (k[0][0] - k[1][1]).powi(2) + k[0][1] * k[1][0]).max(0.0).sqrt();
        let mut p = ModelParams::new(self.setup.nu)
            .with_permeability(Arc::new(move |_| k), mean - r, mean + r)
            .with_friction(self.setup.friction)
            .with_fluid_force(Arc::clone(&self.g_f))
            .with_porous_source(Arc::clone(&self.g_p));
        p.convection = self.setup.convection;
        p.velocity_bc = Some(Arc::clone(&self.fields.u));
        p.head_bc = Some(Arc::clone(&self.fields.phi));
        let grad_phi = Arc::clone(&self.fields.grad_phi);
        p.neumann_flux = Some(Arc::new(move |x, n| dot2(matvec(k, grad_phi(x)), n)));
        p.interface_loads = Some(self.interface_loads.clone());
        p
    }

    /// Same exact fields with a different viscosity.
    pub fn with_nu(&self, nu: f64) -> ManufacturedCase {
        let setup = MmsSetup { nu, ..self.setup };
        derive_sources(&self.name, self.fields.clone(), setup).expect("fields already checked")
    }
}

/// u = p = φ = 0.
pub fn zero_case() -> ManufacturedCase {
    let fields = ExactFields {
        u: Arc::new(|_| [0.0, 0.0]),
        grad_u: Arc::new(|_| [[0.0; 2]; 2]),
        laplacian_u: Arc::new(|_| [0.0, 0.0]),
        p: Arc::new(|_| 0.0),
        grad_p: Arc::new(|_| [0.0, 0.0]),
        phi: Arc::new(|_| 0.0),
        grad_phi: Arc::new(|_| [0.0, 0.0]),
        hessian_phi: Arc::new(|_| [[0.0; 2]; 2]),
    };
    derive_sources("zero", fields, MmsSetup::new(1.0)).expect("zero field is divergence-free")
}

/// Fields inside the discrete spaces: u = (x², −2xy), p = x − ½, φ = y.
pub fn representable_case(setup: MmsSetup) -> ManufacturedCase {
    let fields = ExactFields {
        u: Arc::new(|x| [x[0] * x[0], -2.0 * x[0] * x[1]]),
        grad_u: Arc::new(|x| [[2.0 * x[0], 0.0], [-2.0 * x[1], -2.0 * x[0]]]),
        laplacian_u: Arc::new(|_| [2.0, 0.0]),
        p: Arc::new(|x| x[0] - 0.5),
        grad_p: Arc::new(|_| [1.0, 0.0]),
        phi: Arc::new(|x| x[1]),
        grad_phi: Arc::new(|_| [0.0, 1.0]),
        hessian_phi: Arc::new(|_| [[0.0; 2]; 2]),
    };
    derive_sources("representable", fields, setup).expect("representable field is divergence-free")
}

/// Amplitude of the head in [`smooth_case`]. The P1 head error is O(h²) on Γ
/// and feeds the velocity through the normal-stress coupling, so a unit
/// amplitude caps the velocity L² order at 2 on practical meshes.
pub const SMOOTH_HEAD_AMPLITUDE: f64 = 0.01;

/// Trigonometric fields with anisotropic 𝕂 = diag(1, ½):
/// u = (sin πx cos πy, −cos πx sin πy), p = cos πx sin πy,
/// φ = a cos πx sin(πy/2) with a = [`SMOOTH_HEAD_AMPLITUDE`].
pub fn smooth_case(nu: f64) -> ManufacturedCase {
    const A: f64 = SMOOTH_HEAD_AMPLITUDE;
    let fields = ExactFields {
        u: Arc::new(|x| {
            let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
            [sx * cy, -cx * sy]
        }),
        grad_u: Arc::new(|x| {
            let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
            [[PI * cx * cy, -PI * sx * sy], [PI * sx * sy, -PI * cx * cy]]
        }),
        laplacian_u: Arc::new(|x| {
            let (sx, cx, sy, cy) = ((PI * x[0]).sin(), (PI * x[0]).cos(), (PI * x[1]).sin(), (PI * x[1]).cos());
            [-2.0 * PI * PI * sx * cy, 2.0 * PI * PI * cx * sy]
        }),
        p: Arc::new(|x| (PI * x[0]).cos() * (PI * x[1]).sin()),
        grad_p: Arc::new(|x| {
            [-PI * (PI * x[0]).sin() * (PI * x[1]).sin(), PI * (PI * x[0]).cos() * (PI * x[1]).cos()]
        }),
        phi: Arc::new(|x| A * (PI * x[0]).cos() * (0.5 * PI * x[1]).sin()),
        grad_phi: Arc::new(|x| {
            [
                -A * PI * (PI * x[0]).sin() * (0.5 * PI * x[1]).sin(),
                0.5 * A * PI * (PI * x[0]).cos() * (0.5 * PI * x[1]).cos(),
            ]
        }),
        hessian_phi: Arc::new(|x| {
            let phi = A * (PI * x[0]).cos() * (0.5 * PI * x[1]).sin();
            let xy = -0.5 * A * PI * PI * (PI * x[0]).sin() * (0.5 * PI * x[1]).cos();
            [[-PI * PI * phi, xy], [xy, -0.25 * PI * PI * phi]]
        }),
    };
    let setup = MmsSetup {
        permeability: [[1.0, 0.0], [0.0, 0.5]],
        ..MmsSetup::new(nu)
    };
    derive_sources("smooth", fields, setup).expect("smooth field is divergence-free")
}

/// Relative weak residual of the exact fields against every free discrete
/// test function, with the case's data.
pub fn consistency_residual(space: &CoupledSpace, case: &ManufacturedCase) -> f64 {
    let mesh = space.mesh();
    let f = &case.fields;
    let MmsSetup { nu, permeability: k, friction: g, convection } = case.setup;
    let (vel, pres, head) = (space.velocity(), space.pressure(), space.head());
    // residual and sum of magnitudes of its contributions
    let mut rv = vec![0.0; 2 * vel.len()];
    let mut sv = vec![0.0; 2 * vel.len()];
    let mut rp = vec![0.0; pres.len()];
    let mut sp = vec![0.0; pres.len()];
    let mut rh = vec![0.0; head.len()];
    let mut sh = vec![0.0; head.len()];
    let add = |r: &mut [f64], s: &mut [f64], i: usize, terms: &[f64]| {
        for t in terms {
            r[i] += t;
            s[i] += t.abs();
        }
    };

    // composite rule keeps the quadrature error well below the tolerance on coarse meshes
    let rule = QuadratureRule::degree9().subdivided(2);
    for &t in space.fluid_triangles() {
        let vd = vel.element_dofs(mesh, t);
        let pd = pres.element_dofs(mesh, t);
        for q in tabulate(mesh, t, Lagrange::P2, &rule).1 {
            let u = (f.u)(q.x);
            let gu = (f.grad_u)(q.x);
            let d = strain(&gu);
            let p = (f.p)(q.x);
            let div = gu[0][0] + gu[1][1];
            let gf = (case.g_f)(q.x);
            let adv = matvec(gu, u);
            for i in 0..6 {
                for a in 0..2 {
                    let grad = q.grad[i];
                    let visc = 2.0 * nu * (d[a][0] * grad[0] + d[a][1] * grad[1]);
                    let conv = if convection { (adv[a] + 0.5 * div * u[a]) * q.phi[i] } else { 0.0 };
                    let w = q.weight;
                    add(&mut rv, &mut sv, 2 * vd[i] + a, &[w * visc, -w * p * grad[a], w * conv, -w * gf[a] * q.phi[i]]);
                }
            }
            for kk in 0..3 {
                add(&mut rp, &mut sp, pd[kk], &[q.weight * div * q.lambda[kk]]);
            }
        }
    }
    for &t in space.porous_triangles() {
        let hd = head.element_dofs(mesh, t);
        for q in tabulate(mesh, t, Lagrange::P1, &rule).1 {
            let kg = matvec(k, (f.grad_phi)(q.x));
            let gp = (case.g_p)(q.x);
            for i in 0..3 {
                add(&mut rh, &mut sh, hd[i], &[q.weight * dot2(kg, q.grad[i]), -q.weight * gp * q.phi[i]]);
            }
        }
    }
    let edge_rule = EdgeRule::gauss(8);
    let loads = &case.interface_loads;
    for e in mesh.interface_edges() {
        let vd = vel.element_dofs(mesh, e.fluid_triangle);
        let hd = head.element_dofs(mesh, e.porous_triangle);
        let (n, tau) = (e.normal, e.tangent());
        for ip in interface_points(mesh, e, &edge_rule) {
            let u = (f.u)(ip.x);
            let phi = (f.phi)(ip.x);
            let (rn, rt, rm) = ((loads.r_normal)(ip.x, n), (loads.r_tangential)(ip.x, n), (loads.r_mass)(ip.x, n));
            let w = ip.weight;
            for i in 0..6 {
                let fi = ip.fluid.phi[i];
                for a in 0..2 {
                    add(&mut rv, &mut sv, 2 * vd[i] + a, &[
                        w * phi * n[a] * fi,
                        w * g * dot2(u, tau) * tau[a] * fi,
                        w * (rn * n[a] + rt * tau[a]) * fi,
                    ]);
                }
            }
            for kk in 0..3 {
                let psi = ip.porous_p1.phi[kk];
                add(&mut rh, &mut sh, hd[kk], &[-w * dot2(u, n) * psi, w * rm * psi]);
            }
        }
    }
    for (bi, be) in mesh.boundary_edges().iter().enumerate() {
        if be.tag != BoundaryTag::PorousNeumann {
            continue;
        }
        let n = mesh.boundary_normal(bi);
        let [a, b] = be.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        for (&s, &w) in edge_rule.points.iter().zip(&edge_rule.weights) {
            let x = [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]];
            let flux = dot2(matvec(k, (f.grad_phi)(x)), n) * w * len;
            let (ia, ib) = (head.local(a).expect("porous vertex"), head.local(b).expect("porous vertex"));
            add(&mut rh, &mut sh, ia, &[-flux * (1.0 - s)]);
            add(&mut rh, &mut sh, ib, &[-flux * s]);
        }
    }

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..vel.len() {
        if !vel.is_fixed(i) {
            for a in 0..2 {
                num += rv[2 * i + a].powi(2);
                den += sv[2 * i + a].powi(2);
            }
        }
    }
    for i in 0..pres.len() {
        num += rp[i].powi(2);
        den += sp[i].powi(2);
    }
    for i in 0..head.len() {
        if !head.is_fixed(i) {
            num += rh[i].powi(2);
            den += sh[i].powi(2);
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Largest admissible weak residual of the exact fields.
pub const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub level: usize,
    pub h: f64,
    pub err_u_h1: f64,
    pub err_u_l2: f64,
    pub err_p_l2: f64,
    pub err_phi_h1: f64,
    /// Observed orders against the previous level, in column order.
    pub rates: Option<[f64; 4]>,
    pub consistency: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub case: String,
    pub rows: Vec<RateRow>,
}

pub const CSV_HEADER: &str = "level,h,err_u_h1,err_u_l2,err_p_l2,err_phi_h1,rate_u_h1,rate_u_l2,rate_p_l2,rate_phi_h1";

/// Expected orders and tolerances for P2/P1/P1.
pub const EXPECTED_RATES: [(f64, f64); 4] = [(2.0, 0.25), (3.0, 0.3), (2.0, 0.3), (1.0, 0.2)];
pub const RATE_NAMES: [&str; 4] = ["u_h1", "u_l2", "p_l2", "phi_h1"];

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{:e},{:e},{:e},{:e},{:e}", r.level, r.h, r.err_u_h1, r.err_u_l2, r.err_p_l2, r.err_phi_h1);
            match r.rates {
                Some(rates) => rates.iter().for_each(|v| {
                    let _ = write!(out, ",{v:.4}");
                }),
                None => out.push_str(",,,,"),
            }
            out.push('\n');
        }
        out
    }

    /// Rates between the last two levels.
    pub fn final_rates(&self) -> Option<[f64; 4]> {
        self.rows.last().and_then(|r| r.rates)
    }

    /// Names of the rates outside their tolerance band; needs three levels.
    pub fn rate_failures(&self) -> Result<Vec<String>, MmsError> {
        if self.rows.len() < 3 {
            return Err(MmsError::TooFewLevels { needed: 3, got: self.rows.len() });
        }
        let rates = self.final_rates().expect("rows after the first carry rates");
        Ok(rates
            .iter()
            .zip(EXPECTED_RATES)
            .zip(RATE_NAMES)
            .filter(|((r, (e, tol)), _)| !((*r - e).abs() <= *tol))
            .map(|((r, (e, tol)), name)| format!("{name}: observed {r:.3}, expected {e} ± {tol}"))
            .collect())
    }

    pub fn max_error(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.err_u_h1, r.err_u_l2, r.err_p_l2, r.err_phi_h1])
            .fold(0.0, f64::max)
    }
}

/// Solve on `levels` successive uniform refinements of `base` and tabulate
/// errors against the exact fields.
pub fn convergence_study(
    case: &ManufacturedCase,
    base: &MixedMesh,
    levels: usize,
    config: &SolverConfig,
) -> Result<RateTable, MmsError> {
    if levels == 0 {
        return Err(MmsError::TooFewLevels { needed: 1, got: 0 });
    }
    let params = case.params();
    let f = &case.fields;
    let mut rows: Vec<RateRow> = Vec::with_capacity(levels);
    let mut mesh = base.clone();
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let space = CoupledSpace::new(mesh.clone());
        let consistency = consistency_residual(&space, case);
        if consistency > CONSISTENCY_TOL {
            return Err(MmsError::Inconsistent { level, residual: consistency });
        }
        let state = solve_coupled(&space, &params, config).map_err(|source| MmsError::Solve { level, source })?;
        let m = space.mesh();
        let (u_l2, u_h1) = vector_errors(m, space.fluid_triangles(), space.velocity(), &state.u_f, &*f.u, &*f.grad_u);
        let (p_l2, _) = scalar_errors(m, space.fluid_triangles(), space.pressure(), &state.p_f, &*f.p, &*f.grad_p);
        let (phi_l2, phi_h1) =
            scalar_errors(m, space.porous_triangles(), space.head(), &state.phi_p, &*f.phi, &*f.grad_phi);
        let mut row = RateRow {
            level,
            h: m.h(),
            err_u_h1: u_l2.hypot(u_h1),
            err_u_l2: u_l2,
            err_p_l2: p_l2,
            err_phi_h1: phi_l2.hypot(phi_h1),
            rates: None,
            consistency,
            iterations: state.iterations,
        };
        if let Some(prev) = rows.last() {
            let rate = |a: f64, b: f64| (a / b).log2() / (prev.h / row.h).log2();
            row.rates = Some([
                rate(prev.err_u_h1, row.err_u_h1),
                rate(prev.err_u_l2, row.err_u_l2),
                rate(prev.err_p_l2, row.err_p_l2),
                rate(prev.err_phi_h1, row.err_phi_h1),
            ]);
        }
        rows.push(row);
    }
    Ok(RateTable { case: case.name.clone(), rows })
}
