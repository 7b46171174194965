//! Quantities appearing in the stability and uniqueness estimates, computed
//! on discrete states: dual norms of the data, energy balance, the
//! compensation of interface convection, the discrete inf-sup constant, and
//! the pressure and uniqueness checks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble_aux_convection, assemble_convection, assemble_darcy, assemble_head_laplacian, assemble_interface,
    assemble_loads, assemble_pressure_mass, assemble_strain_inner, divergence_matrix, interface_points,
    p1_mass_matrix, strain_matrix,
};
use crate::fem::eval::vector_at;
use crate::fem::{EdgeRule, NodeSet};
use crate::mesh::{MixedMesh, Point};
use crate::model::{ModelParams, ScalarField, TensorField, VectorField};
use crate::solver::{aux_operator, solve_auxiliary, solve_coupled, solve_coupled_from, AuxiliaryField, CoupledState, SolveError, SolverConfig};
use crate::sparse::{dot, CsrMatrix, LinearSolveError, LinearSolver};
use crate::{CoupledSpace, PressureNormalization};

/// Multiplier applied to every estimate whose constant is unspecified.
pub const DEFAULT_C_MULT: f64 = 4.0;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("state has no auxiliary field")]
    MissingAuxiliary,
    #[error("eigensolver failed: {0}")]
    Eigen(String),
}

/// Discrete dual norm with its Riesz representative on free nodes.
#[derive(Clone, Debug)]
pub struct DualNorm {
    pub value: f64,
    /// Representative on the full node set (zero on fixed nodes).
    pub representative: Vec<f64>,
    /// Load vector (g, v_i) on the full node set.
    pub load: Vec<f64>,
}

fn free_map(nodes: &NodeSet, width: usize) -> (Vec<Option<usize>>, usize) {
    let map = (0..width * nodes.len())
        .map(|k| nodes.free_index(k / width).map(|f| width * f + k % width))
        .collect();
    (map, width * nodes.free_count())
}

fn riesz(gram: &CsrMatrix, load: Vec<f64>, map: &[Option<usize>], nf: usize) -> Result<DualNorm, AnalysisError> {
    let mut b = vec![0.0; nf];
    for (k, slot) in map.iter().enumerate() {
        if let Some(f) = slot {
            b[*f] = load[k];
        }
    }
    if b.iter().all(|&v| v == 0.0) {
        return Ok(DualNorm { value: 0.0, representative: vec![0.0; load.len()], load });
    }
    let z = LinearSolver::DirectLu.solve(&gram.select(map, nf, map, nf), &b)?;
    let value = dot(&z, &b).max(0.0).sqrt();
    let mut representative = vec![0.0; load.len()];
    for (k, slot) in map.iter().enumerate() {
        if let Some(f) = slot {
            representative[k] = z[*f];
        }
    }
    Ok(DualNorm { value, representative, load })
}

/// ‖g_f‖ dual to ‖D(·)‖ on X_fh.
pub fn dual_norm_fluid(space: &CoupledSpace, g_f: Option<&VectorField>) -> Result<DualNorm, AnalysisError> {
    let mut p = ModelParams::new(1.0);
    p.g_f = g_f.cloned();
    let load = assemble_loads(space, &p).velocity;
    let (map, nf) = free_map(space.velocity(), 2);
    riesz(&assemble_strain_inner(space), load, &map, nf)
}

/// ‖g_p‖ dual to ‖∇·‖ on X_ph; λ_min enters the bound separately.
pub fn dual_norm_porous(space: &CoupledSpace, g_p: Option<&ScalarField>) -> Result<DualNorm, AnalysisError> {
    let mut p = ModelParams::new(1.0);
    p.g_p = g_p.cloned();
    let load = assemble_loads(space, &p).head;
    let (map, nf) = free_map(space.head(), 1);
    riesz(&assemble_head_laplacian(space), load, &map, nf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub c_mult: f64,
    /// Inf-sup constant to store in the report, if already known.
    pub beta: Option<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { c_mult: DEFAULT_C_MULT, beta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_fluid: f64,
    pub e_darcy: f64,
    pub e_aux: Option<f64>,
    pub e_bjs: f64,
    pub dual_gf: f64,
    pub dual_gp: f64,
    #[serde(rename = "C_sq")]
    pub c_sq: f64,
    pub bound_ratio: f64,
    pub uniqueness_number: f64,
    pub pressure_norm: f64,
    pub beta: Option<f64>,
    pub gamma_term: f64,
    pub compensation_residual: Option<f64>,
    pub bound_ok: bool,
    pub c_mult: f64,
}

/// ν‖D(u)‖² of a velocity coefficient vector.
pub fn fluid_energy(space: &CoupledSpace, params: &ModelParams, u: &[f64]) -> f64 {
    params.nu * assemble_strain_inner(space).form(u, u)
}

/// ½∫_Γ |u|² u·n_f.
pub fn gamma_term(space: &CoupledSpace, u: &[f64]) -> f64 {
    let mesh = space.mesh();
    let rule = EdgeRule::gauss4();
    let mut s = 0.0;
    for e in mesh.interface_edges() {
        let d = space.velocity().element_dofs(mesh, e.fluid_triangle);
        for ip in interface_points(mesh, e, &rule) {
            let (v, _) = vector_at(&ip.fluid, &d, 6, u);
            s += ip.weight * 0.5 * (v[0] * v[0] + v[1] * v[1]) * (v[0] * e.normal[0] + v[1] * e.normal[1]);
        }
    }
    s
}

pub fn pressure_l2(space: &CoupledSpace, p: &[f64]) -> f64 {
    assemble_pressure_mass(space).form(p, p).max(0.0).sqrt()
}

/// Energies, dual norms and the a priori bound for a converged state.
pub fn verify_energy_estimate(
    space: &CoupledSpace,
    params: &ModelParams,
    state: &CoupledState,
    cfg: &ReportConfig,
) -> Result<EnergyReport, AnalysisError> {
    let e_fluid = fluid_energy(space, params, &state.u_f);
    let e_darcy = assemble_darcy(space, params).form(&state.phi_p, &state.phi_p);
    let e_bjs = assemble_interface(space, params).tangential.form(&state.u_f, &state.u_f);
    let e_aux = state.aux.as_ref().map(|a| {
        let s = strain_matrix(space.mesh(), space.porous_triangles(), space.aux(), 1.0);
        a.sigma * s.form(&a.u_ph, &a.u_ph)
    });
    let dual_gf = dual_norm_fluid(space, params.g_f.as_ref())?.value;
    let dual_gp = dual_norm_porous(space, params.g_p.as_ref())?.value;
    let (nu, lmin) = (params.nu, params.lambda_min);
    let c_sq = dual_gf * dual_gf / nu + dual_gp * dual_gp / lmin;
    let lhs = e_fluid + e_darcy;
    let bound_ratio = if c_sq > 0.0 { lhs / c_sq } else { 0.0 };
    let compensation = match &state.aux {
        Some(_) => Some(compensation_residual(space, state)?.residual),
        None => None,
    };
    Ok(EnergyReport {
        e_fluid,
        e_darcy,
        e_aux,
        e_bjs,
        dual_gf,
        dual_gp,
        c_sq,
        bound_ratio,
        uniqueness_number: dual_gf / (nu * nu) + dual_gp / (nu.powf(1.5) * lmin.sqrt()),
        pressure_norm: pressure_l2(space, &state.p_f),
        beta: cfg.beta,
        gamma_term: gamma_term(space, &state.u_f),
        compensation_residual: compensation,
        bound_ok: lhs <= cfg.c_mult * c_sq,
        c_mult: cfg.c_mult,
    })
}

/// Terms of the energy equation obtained by testing with the solution itself.
/// Valid for homogeneous Dirichlet data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// 2ν‖D(u)‖² + ‖𝕂^{1/2}∇φ‖² + G‖u·τ‖²_Γ.
    pub dissipation: f64,
    pub gamma_term: f64,
    /// Work of the data against the state.
    pub work: f64,
    pub residual: f64,
    pub relative: f64,
}

pub fn energy_balance(space: &CoupledSpace, params: &ModelParams, state: &CoupledState) -> EnergyBalance {
    let e_fluid = fluid_energy(space, params, &state.u_f);
    let e_darcy = assemble_darcy(space, params).form(&state.phi_p, &state.phi_p);
    let e_bjs = assemble_interface(space, params).tangential.form(&state.u_f, &state.u_f);
    let dissipation = 2.0 * e_fluid + e_darcy + e_bjs;
    let gamma = if params.convection { gamma_term(space, &state.u_f) } else { 0.0 };
    let loads = assemble_loads(space, params);
    let work = dot(&loads.velocity, &state.u_f) + dot(&loads.head, &state.phi_p);
    let residual = dissipation + gamma - work;
    let scale = dissipation.abs().max(work.abs()).max(gamma.abs());
    EnergyBalance {
        dissipation,
        gamma_term: gamma,
        work,
        residual,
        relative: if scale > 0.0 { residual.abs() / scale } else { 0.0 },
    }
}

/// Interface convection of the fluid and the auxiliary convection it is meant to cancel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Compensation {
    /// ((u·∇)u, u) + ½(∇·u, |u|²) over Ω_f.
    pub t_fluid: f64,
    /// ((u_p⁰·∇)u_ph, u_ph) over Ω_p.
    pub t_porous: f64,
    /// |T_f + T_p| / max(1, |T_f|).
    pub residual: f64,
}

pub fn compensation_of(space: &CoupledSpace, u_f: &[f64], aux: &AuxiliaryField) -> Compensation {
    let t_fluid = assemble_convection(space, u_f).form(u_f, u_f);
    let t_porous = assemble_aux_convection(space, &aux.wind).form(&aux.u_ph, &aux.u_ph);
    Compensation {
        t_fluid,
        t_porous,
        residual: (t_fluid + t_porous).abs() / t_fluid.abs().max(1.0),
    }
}

pub fn compensation_residual(space: &CoupledSpace, state: &CoupledState) -> Result<Compensation, AnalysisError> {
    let aux = state.aux.as_ref().ok_or(AnalysisError::MissingAuxiliary)?;
    Ok(compensation_of(space, &state.u_f, aux))
}

/// Terms of the auxiliary energy identity.
///
/// `flux` is the discrete boundary flux Σ_Γ u_i (K u)_i of the assembled
/// operator K, which makes the identity exact up to the linear solve.
/// `traction_flux` evaluates ∫_Γ 2σ D(u_ph) n_p · u_ph from element gradients
/// and only converges to `flux` with refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuxEnergyIdentity {
    pub strain: f64,
    pub convection: f64,
    pub flux: f64,
    pub traction_flux: f64,
    pub relative: f64,
}

pub fn aux_energy_identity(space: &CoupledSpace, aux: &AuxiliaryField) -> AuxEnergyIdentity {
    let mesh = space.mesh();
    let nodes = space.aux();
    let strain = 2.0 * aux.sigma * strain_matrix(mesh, space.porous_triangles(), nodes, 1.0).form(&aux.u_ph, &aux.u_ph);
    let convection = assemble_aux_convection(space, &aux.wind).form(&aux.u_ph, &aux.u_ph);
    let ku = aux_operator(space, aux.sigma, &aux.wind).matvec(&aux.u_ph);
    let mut flux = 0.0;
    for &g in space.interface_nodes() {
        let i = nodes.local(g).expect("interface node in porous space");
        flux += aux.u_ph[2 * i] * ku[2 * i] + aux.u_ph[2 * i + 1] * ku[2 * i + 1];
    }
    let rule = EdgeRule::gauss4();
    let mut traction_flux = 0.0;
    for e in mesh.interface_edges() {
        let d = nodes.element_dofs(mesh, e.porous_triangle);
        let n = e.porous_normal();
        for ip in interface_points(mesh, e, &rule) {
            let (v, g) = vector_at(&ip.porous_p2, &d, 6, &aux.u_ph);
            let dn = [
                g[0][0] * n[0] + 0.5 * (g[0][1] + g[1][0]) * n[1],
                0.5 * (g[0][1] + g[1][0]) * n[0] + g[1][1] * n[1],
            ];
            traction_flux += ip.weight * 2.0 * aux.sigma * (dn[0] * v[0] + dn[1] * v[1]);
        }
    }
    let scale = strain.abs().max(convection.abs()).max(flux.abs());
    let relative = if scale > 0.0 { (strain + convection - flux).abs() / scale } else { 0.0 };
    AuxEnergyIdentity { strain, convection, flux, traction_flux, relative }
}

/// Velocity/pressure pair for the inf-sup computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfSupPair {
    #[default]
    TaylorHood,
    /// P1/P1, unstable; used as a negative control.
    EqualOrderP1,
}

#[derive(Clone, Debug)]
pub struct InfSup {
    pub beta: f64,
    /// Smallest generalized eigenvalue on zero-mean pressures.
    pub lambda_min: f64,
    /// Minimizing pressure, normalized to unit L² norm.
    pub pressure: Vec<f64>,
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const ZERO_EIGENVALUE: f64 = 1e-12;

/// β_h² = min over zero-mean q of (B A⁻¹ Bᵀ q, q) / (M q, q), with A the
/// Gram matrix of ‖D(·)‖ on the free velocity nodes.
pub fn compute_inf_sup(space: &CoupledSpace, pair: InfSupPair) -> Result<InfSup, AnalysisError> {
    let mesh = space.mesh();
    let fluid = space.fluid_triangles();
    let p1;
    let velocity = match pair {
        InfSupPair::TaylorHood => space.velocity(),
        InfSupPair::EqualOrderP1 => {
            p1 = space.equal_order_velocity();
            &p1
        }
    };
    let pressure = space.pressure();
    let np = pressure.len();
    let (vmap, nf) = free_map(velocity, 2);
    let all: Vec<Option<usize>> = (0..np).map(Some).collect();
    let a = strain_matrix(mesh, fluid, velocity, 1.0).select(&vmap, nf, &vmap, nf).to_dense();
    let b = divergence_matrix(mesh, fluid, pressure, velocity).select(&all, np, &vmap, nf).to_dense();
    let m = p1_mass_matrix(mesh, fluid, pressure).to_dense();

    let s = if nf == 0 {
        DMatrix::zeros(np, np)
    } else {
        let chol = a.cholesky().ok_or_else(|| AnalysisError::Eigen("velocity Gram matrix not SPD".into()))?;
        let x = chol.solve(&b.transpose());
        let s = &b * x;
        (&s + s.transpose()) * 0.5
    };
    let l = m
        .clone()
        .cholesky()
        .ok_or_else(|| AnalysisError::Eigen("pressure mass matrix not SPD".into()))?
        .l();
    let y = l
        .solve_lower_triangular(&s)
        .ok_or_else(|| AnalysisError::Eigen("singular mass factor".into()))?;
    let z = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| AnalysisError::Eigen("singular mass factor".into()))?;
    let z = (&z + z.transpose()) * 0.5;

    // constants in M-coordinates; pushed to the top of the spectrum
    let mut c = l.transpose() * DVector::from_element(np, 1.0);
    c /= c.norm();
    let proj = DMatrix::identity(np, np) - &c * c.transpose();
    let shift = z.trace().abs() + 1.0;
    let h = &proj * &z * &proj + &c * c.transpose() * shift;
    let eig = SymmetricEigen::new(h);
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| AnalysisError::Eigen("empty pressure space".into()))?;
    let top = SymmetricEigen::new(z).eigenvalues.max();
    let lambda_min = if lambda <= ZERO_EIGENVALUE * top.max(f64::MIN_POSITIVE) { 0.0 } else { lambda };
    let q = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors.column(k).into_owned())
        .ok_or_else(|| AnalysisError::Eigen("singular mass factor".into()))?;
    let qn = (q.transpose() * &m * &q)[(0, 0)].sqrt();
    Ok(InfSup {
        beta: lambda_min.sqrt(),
        lambda_min,
        pressure: q.iter().map(|v| v / qn).collect(),
    })
}

/// sup over free v of (q, ∇·v) / (‖q‖ ‖D(v)‖) for a Taylor-Hood pressure.
pub fn inf_sup_quotient(space: &CoupledSpace, q: &[f64]) -> Result<f64, AnalysisError> {
    let (vmap, nf) = free_map(space.velocity(), 2);
    let bt_q = crate::assembly::assemble_divergence(space).matvec_transpose(q);
    let d = riesz(&assemble_strain_inner(space), bt_q, &vmap, nf)?;
    Ok(d.value / pressure_l2(space, q))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub uniqueness_number: f64,
    /// Energy norm of the difference between solves from two initial guesses.
    pub energy_difference: Option<f64>,
    pub unique: bool,
}

/// ν⁻² ‖g_f‖ + ν^{-3/2} λ_min^{-1/2} ‖g_p‖.
pub fn uniqueness_number(space: &CoupledSpace, params: &ModelParams) -> Result<f64, AnalysisError> {
    let gf = dual_norm_fluid(space, params.g_f.as_ref())?.value;
    let gp = dual_norm_porous(space, params.g_p.as_ref())?.value;
    Ok(gf / (params.nu * params.nu) + gp / (params.nu.powf(1.5) * params.lambda_min.sqrt()))
}

/// sqrt(ν‖D(u₁−u₂)‖² + ‖𝕂^{1/2}∇(φ₁−φ₂)‖²).
pub fn energy_distance(space: &CoupledSpace, params: &ModelParams, a: &CoupledState, b: &CoupledState) -> f64 {
    let du: Vec<f64> = a.u_f.iter().zip(&b.u_f).map(|(x, y)| x - y).collect();
    let dp: Vec<f64> = a.phi_p.iter().zip(&b.phi_p).map(|(x, y)| x - y).collect();
    (fluid_energy(space, params, &du) + assemble_darcy(space, params).form(&dp, &dp)).max(0.0).sqrt()
}

/// Random initial guess with unit energy, zero on fixed nodes.
pub fn random_initial_state(space: &CoupledSpace, params: &ModelParams, seed: u64) -> CoupledState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CoupledState::zeros(space);
    for i in 0..space.velocity().len() {
        if !space.velocity().is_fixed(i) {
            s.u_f[2 * i] = rng.random_range(-1.0..1.0);
            s.u_f[2 * i + 1] = rng.random_range(-1.0..1.0);
        }
    }
    for i in 0..space.head().len() {
        if !space.head().is_fixed(i) {
            s.phi_p[i] = rng.random_range(-1.0..1.0);
        }
    }
    let zero = CoupledState::zeros(space);
    let e = energy_distance(space, params, &s, &zero);
    if e > 0.0 {
        s.u_f.iter_mut().chain(s.phi_p.iter_mut()).for_each(|v| *v /= e);
    }
    s
}

/// Uniqueness number and, when `seed` is given, a double solve from zero and
/// from a random guess.
pub fn check_uniqueness(
    space: &CoupledSpace,
    params: &ModelParams,
    config: &SolverConfig,
    c_mult: f64,
    seed: Option<u64>,
) -> Result<UniquenessReport, AnalysisError> {
    let number = uniqueness_number(space, params)?;
    let energy_difference = match seed {
        Some(seed) => {
            let first = solve_coupled(space, params, config)?;
            let guess = random_initial_state(space, params, seed);
            let second = solve_coupled_from(space, params, config, &guess)?;
            Some(energy_distance(space, params, &first, &second))
        }
        None => None,
    };
    Ok(UniquenessReport {
        uniqueness_number: number,
        energy_difference,
        unique: number * c_mult < 1.0 && energy_difference.is_none_or(|d| d < 1e-8),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PressureBound {
    pub pressure_norm: f64,
    /// β⁻¹ C (1 + C) with C = sqrt(C_sq).
    pub bound: f64,
    pub ratio: f64,
    pub ok: bool,
}

pub fn pressure_bound_report(report: &EnergyReport, beta: f64, c_mult: f64) -> PressureBound {
    let c = report.c_sq.sqrt();
    let bound = if beta > 0.0 { c * (1.0 + c) / beta } else { f64::INFINITY };
    let ratio = if report.pressure_norm == 0.0 { 0.0 } else { report.pressure_norm / bound };
    PressureBound {
        pressure_norm: report.pressure_norm,
        bound,
        ratio,
        ok: ratio <= c_mult,
    }
}

/// One data set of the built-in verification suite.
#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub name: &'static str,
    pub params: ModelParams,
}

/// Five small-data configurations on the stacked unit squares.
pub fn builtin_suite() -> Vec<SuiteCase> {
    use std::f64::consts::PI;
    let aniso: TensorField = Arc::new(|_: Point| [[2.0, 0.0], [0.0, 0.5]]);
    vec![
        SuiteCase {
            name: "uniform_push",
            params: ModelParams::new(1.0).with_fluid_force(Arc::new(|_| [1.0, 0.0])),
        },
        SuiteCase {
            name: "swirl",
            params: ModelParams::new(0.5).with_fluid_force(Arc::new(|x| [x[1] - 1.5, 0.5 - x[0]])),
        },
        SuiteCase {
            name: "porous_source",
            params: ModelParams::new(1.0)
                .with_porous_source(Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin())),
        },
        SuiteCase {
            name: "anisotropic",
            params: ModelParams::new(1.0)
                .with_permeability(aniso, 0.5, 2.0)
                .with_fluid_force(Arc::new(|_| [0.0, -1.0]))
                .with_porous_source(Arc::new(|x| x[0])),
        },
        SuiteCase {
            name: "mixed",
            params: ModelParams::new(0.5)
                .with_friction(2.0)
                .with_fluid_force(Arc::new(|x| [0.5 * (PI * x[1]).cos(), 0.5 * (PI * x[0]).sin()]))
                .with_porous_source(Arc::new(|_| 1.0)),
        },
    ]
}

/// Fluid driven by a tangential lid velocity 16x²(1−x)² on the top wall
/// y = 2 of the built-in rectangle, with no forcing.
pub fn lid_driven_case(nu: f64) -> ModelParams {
    let mut p = ModelParams::new(nu);
    p.velocity_bc = Some(Arc::new(|x: Point| {
        if (x[1] - 2.0).abs() < 1e-12 {
            [16.0 * x[0] * x[0] * (1.0 - x[0]) * (1.0 - x[0]), 0.0]
        } else {
            [0.0, 0.0]
        }
    }));
    p
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompensationPoint {
    pub level: usize,
    pub h: f64,
    pub t_fluid: f64,
    pub t_porous: f64,
    pub residual: f64,
    pub divergence_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompensationSweep {
    pub points: Vec<CompensationPoint>,
    /// `None` when fewer than two levels were run.
    pub monotone: Option<bool>,
}

/// Allowed growth between consecutive levels of a compensation sweep.
pub const MONOTONE_SLACK: f64 = 0.2;

/// Solve on `levels` uniform refinements of `mesh` with unconstrained
/// pressure (so the interface carries zero net flux), attach the auxiliary
/// field and record the compensation residual on each level.
pub fn compensation_sweep(
    mesh: &MixedMesh,
    levels: usize,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<CompensationSweep, AnalysisError> {
    let mut points = Vec::with_capacity(levels);
    let mut current = mesh.clone();
    for level in 0..levels {
        if level > 0 {
            current = current.refine_uniform();
        }
        let space = CoupledSpace::with_normalization(current.clone(), PressureNormalization::Unconstrained);
        let mut state = solve_coupled(&space, params, config)?;
        let aux = solve_auxiliary(&space, params, &state.u_f)?;
        let divergence_defect = aux.divergence_defect;
        state.aux = Some(aux);
        let c = compensation_residual(&space, &state)?;
        points.push(CompensationPoint {
            level,
            h: current.h(),
            t_fluid: c.t_fluid,
            t_porous: c.t_porous,
            residual: c.residual,
            divergence_defect,
        });
    }
    let monotone = (points.len() >= 2).then(|| {
        points
            .windows(2)
            .all(|w| w[1].residual <= (1.0 + MONOTONE_SLACK) * w[0].residual)
    });
    Ok(CompensationSweep { points, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate::nodal_vector;
    use crate::mesh::build_rectangle_mesh;

    fn space() -> CoupledSpace {
        CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap())
    }

    #[test]
    fn dual_norms_vanish_and_scale() {
        let s = space();
        assert_eq!(dual_norm_fluid(&s, None).unwrap().value, 0.0);
        assert_eq!(dual_norm_porous(&s, None).unwrap().value, 0.0);
        let g: VectorField = Arc::new(|x| [x[1], 1.0 - x[0]]);
        let g3: VectorField = Arc::new(|x| [-3.0 * x[1], -3.0 * (1.0 - x[0])]);
        let a = dual_norm_fluid(&s, Some(&g)).unwrap().value;
        let b = dual_norm_fluid(&s, Some(&g3)).unwrap().value;
        assert!(a > 0.0 && (b - 3.0 * a).abs() < 1e-12 * b);
        let q: ScalarField = Arc::new(|x| x[0] * x[1]);
        let q2: ScalarField = Arc::new(|x| 2.0 * x[0] * x[1]);
        let a = dual_norm_porous(&s, Some(&q)).unwrap().value;
        let b = dual_norm_porous(&s, Some(&q2)).unwrap().value;
        assert!(a > 0.0 && (b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn zero_state_report_is_all_zero() {
        let s = space();
        let p = ModelParams::new(1.0);
        let state = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        let r = verify_energy_estimate(&s, &p, &state, &ReportConfig::default()).unwrap();
        assert_eq!((r.e_fluid, r.e_darcy, r.c_sq, r.bound_ratio, r.uniqueness_number), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(r.bound_ok);
        assert_eq!(pressure_bound_report(&r, 0.5, 4.0).ratio, 0.0);
    }

    #[test]
    fn report_keys_are_stable() {
        let s = space();
        let p = ModelParams::new(1.0);
        let state = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        let r = verify_energy_estimate(&s, &p, &state, &ReportConfig::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut expected = vec![
            "C_sq", "beta", "bound_ok", "bound_ratio", "c_mult", "compensation_residual", "dual_gf", "dual_gp",
            "e_aux", "e_bjs", "e_darcy", "e_fluid", "gamma_term", "pressure_norm", "uniqueness_number",
        ];
        expected.sort();
        assert_eq!(keys, expected);
    }

    #[test]
    fn energy_balance_holds_at_the_solution() {
        let s = space();
        for case in builtin_suite() {
            let state = solve_coupled(&s, &case.params, &SolverConfig::default()).unwrap();
            let b = energy_balance(&s, &case.params, &state);
            assert!(b.relative < 1e-9, "{}: {b:?}", case.name);
        }
    }

    #[test]
    fn linear_bound_ratio_is_scale_invariant() {
        let s = space();
        let p = builtin_suite().remove(4).params.without_convection();
        let cfg = SolverConfig::default();
        let r1 = verify_energy_estimate(&s, &p, &solve_coupled(&s, &p, &cfg).unwrap(), &ReportConfig::default()).unwrap();
        let q = p.scaled_data(3.0);
        let r3 = verify_energy_estimate(&s, &q, &solve_coupled(&s, &q, &cfg).unwrap(), &ReportConfig::default()).unwrap();
        assert!((r1.bound_ratio - r3.bound_ratio).abs() < 1e-10 * r1.bound_ratio);
        assert!((r3.uniqueness_number - 3.0 * r1.uniqueness_number).abs() < 1e-10 * r3.uniqueness_number);
    }

    #[test]
    fn compensation_vanishes_for_zero_velocity_and_needs_aux() {
        let s = space();
        let p = ModelParams::new(1.0);
        let mut state = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        assert!(matches!(compensation_residual(&s, &state), Err(AnalysisError::MissingAuxiliary)));
        state.aux = Some(solve_auxiliary(&s, &p, &state.u_f).unwrap());
        let c = compensation_residual(&s, &state).unwrap();
        assert_eq!((c.t_fluid, c.t_porous, c.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn auxiliary_identity_on_a_lifted_trace() {
        let s = CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap().refine_uniform());
        let p = ModelParams::new(1.0);
        let u = nodal_vector(s.mesh(), s.velocity(), |x| {
            let b = x[0] * (1.0 - x[0]) * (2.0 - x[1]);
            [4.0 * b, 0.0]
        });
        let aux = solve_auxiliary(&s, &p, &u).unwrap();
        let id = aux_energy_identity(&s, &aux);
        assert!(id.relative < 1e-10, "{id:?}");
        assert!(id.strain > 0.0);
    }

    #[test]
    fn taylor_hood_is_stable_and_equal_order_is_not() {
        let s = space();
        let th = compute_inf_sup(&s, InfSupPair::TaylorHood).unwrap();
        assert!(th.beta > 0.2, "{}", th.beta);
        let q = inf_sup_quotient(&s, &th.pressure).unwrap();
        assert!((q - th.beta).abs() < 1e-8 * th.beta, "{q} vs {}", th.beta);
        let p1 = compute_inf_sup(&s, InfSupPair::EqualOrderP1).unwrap();
        assert!(p1.beta < 1e-6, "{}", p1.beta);
    }

    #[test]
    fn uniqueness_number_is_homogeneous() {
        let s = space();
        let p = builtin_suite().remove(3).params;
        let a = uniqueness_number(&s, &p).unwrap();
        let b = uniqueness_number(&s, &p.scaled_data(0.25)).unwrap();
        assert!((b - 0.25 * a).abs() < 1e-12 * a);
        let zero = check_uniqueness(&s, &ModelParams::new(1.0), &SolverConfig::default(), 4.0, Some(3)).unwrap();
        assert_eq!(zero.uniqueness_number, 0.0);
        assert_eq!(zero.energy_difference, Some(0.0));
        assert!(zero.unique);
    }
}
