//! Nonlinear solver for the coupled system and the linear auxiliary problem.
//!
//! The coupled problem is solved monolithically with explicit pressure.
//! Unknowns are laid out as `[u | p | φ | μ]` (see [`DofOffsets`]); μ only
//! exists for zero-mean pressure and enforces `∫ p = 0` exactly.
//!
//! [`DofOffsets`]: crate::fem::DofOffsets

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble_aux_convection, assemble_aux_viscous, assemble_convection, assemble_convection_derivative,
    assemble_darcy, assemble_divergence, assemble_interface, assemble_loads, assemble_viscous,
    pressure_mass_vector,
};
use crate::fem::lifting::{lifting_of_velocity, zero_mean_divergence_defect};
use crate::fem::PressureNormalization;
use crate::model::{ModelError, ModelParams};
use crate::sparse::{norm2, CsrMatrix, LinearSolveError, LinearSolver, TripletBuilder};
use crate::CoupledSpace;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Picard,
    Newton,
    /// Picard until the relative residual drops below 1e-3, then Newton.
    PicardThenNewton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub tol_rel: f64,
    pub max_iters: usize,
    pub linear_solver: LinearSolver,
    /// Fixed relaxation factor; `None` means undamped with automatic fallback.
    pub damping: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Picard,
            tol_rel: 1e-10,
            max_iters: 50,
            linear_solver: LinearSolver::DirectLu,
            damping: None,
        }
    }
}

/// Relaxation used once the residual has grown twice.
pub const FALLBACK_DAMPING: f64 = 0.7;
const NEWTON_SWITCH: f64 = 1e-3;

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol_rel > 0.0 && self.tol_rel.is_finite()) {
            return Err(SolveError::InvalidConfig(format!("tol_rel must be positive, got {}", self.tol_rel)));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(SolveError::InvalidConfig(format!("damping must lie in (0, 1], got {d}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no convergence after {iterations} iterations: residual {residual:e} (relative {relative:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        relative: f64,
        last: Box<CoupledState>,
    },
    #[error("singular linear system{context}: {source}")]
    SingularLinearSystem {
        source: LinearSolveError,
        context: String,
    },
    #[error("auxiliary field missing from state")]
    MissingAuxiliary,
}

impl SolveError {
    fn linear(source: LinearSolveError) -> Self {
        SolveError::SingularLinearSystem { source, context: String::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Picard,
    Newton,
}

/// One line of the iteration transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub step: StepKind,
    pub residual: f64,
    pub relative: f64,
    pub damping: f64,
    /// ν‖D(u_f)‖².
    pub e_fluid: f64,
    /// ‖𝕂^{1/2}∇φ_p‖².
    pub e_darcy: f64,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let step = match self.step {
            StepKind::Picard => "picard",
            StepKind::Newton => "newton",
        };
        write!(
            f,
            "iter={} step={} residual={:.6e} relative={:.6e} damping={} e_fluid={:.6e} e_darcy={:.6e}",
            self.iter, step, self.residual, self.relative, self.damping, self.e_fluid, self.e_darcy
        )
    }
}

/// Solution of the auxiliary porous problem with its wind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryField {
    /// u_ph on every auxiliary node, interleaved.
    pub u_ph: Vec<f64>,
    /// The lifting u_p⁰ used as convecting field.
    pub wind: Vec<f64>,
    pub sigma: f64,
    /// ∫_Γ u_f·n_p of the lifted trace.
    pub net_flux: f64,
    pub flux_warning: Option<String>,
    /// Largest |(∇·u_p⁰, q)| over zero-mean porous P1 tests.
    pub divergence_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    /// Velocity on every fluid P2 node, interleaved.
    pub u_f: Vec<f64>,
    /// Pressure on every fluid vertex.
    pub p_f: Vec<f64>,
    /// Head on every porous vertex.
    pub phi_p: Vec<f64>,
    pub multiplier: Option<f64>,
    pub aux: Option<AuxiliaryField>,
    /// Euclidean norm of the residual on free rows.
    pub residual_norm: f64,
    pub relative_residual: f64,
    /// Number of linear solves.
    pub iterations: usize,
    pub transcript: Vec<IterationRecord>,
}

impl CoupledState {
    /// All-zero coefficients for `space` (Dirichlet data not applied).
    pub fn zeros(space: &CoupledSpace) -> Self {
        CoupledState {
            u_f: vec![0.0; 2 * space.velocity().len()],
            p_f: vec![0.0; space.pressure().len()],
            phi_p: vec![0.0; space.head().len()],
            multiplier: space.offsets().multiplier.map(|_| 0.0),
            aux: None,
            residual_norm: 0.0,
            relative_residual: 0.0,
            iterations: 0,
            transcript: Vec::new(),
        }
    }
}

/// Assembled linear part of the coupled problem with its boundary data.
pub struct CoupledSystem<'a> {
    space: &'a CoupledSpace,
    params: &'a ModelParams,
    viscous: CsrMatrix,
    darcy: CsrMatrix,
    base: CsrMatrix,
    rhs: Vec<f64>,
    boundary: Vec<f64>,
    free_map: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl<'a> CoupledSystem<'a> {
    pub fn new(space: &'a CoupledSpace, params: &'a ModelParams) -> Self {
        let off = space.offsets();
        let n = off.total;
        let viscous = assemble_viscous(space, params);
        let darcy = assemble_darcy(space, params);
        let b = assemble_divergence(space);
        let iface = assemble_interface(space, params);

        let mut t = TripletBuilder::new(n, n);
        t.add_block(&viscous, off.velocity, off.velocity, 1.0);
        t.add_block(&iface.tangential, off.velocity, off.velocity, 1.0);
        t.add_block_transposed(&b, off.velocity, off.pressure, -1.0);
        t.add_block(&iface.coupling, off.velocity, off.head, 1.0);
        t.add_block(&b, off.pressure, off.velocity, 1.0);
        t.add_block_transposed(&iface.coupling, off.head, off.velocity, -1.0);
        t.add_block(&darcy, off.head, off.head, 1.0);
        for i in 0..space.pressure().len() {
            t.push(off.pressure + i, off.pressure + i, 0.0);
        }
        if let Some(mu) = off.multiplier {
            for (i, m) in pressure_mass_vector(space).into_iter().enumerate() {
                t.push(off.pressure + i, mu, m);
                t.push(mu, off.pressure + i, m);
            }
            t.push(mu, mu, 0.0);
        }
        let base = t.build();

        let loads = assemble_loads(space, params);
        let mut rhs = vec![0.0; n];
        rhs[off.velocity..off.velocity + loads.velocity.len()].copy_from_slice(&loads.velocity);
        rhs[off.head..off.head + loads.head.len()].copy_from_slice(&loads.head);

        let mut boundary = vec![0.0; n];
        let mut free_map = vec![None; n];
        let vel = space.velocity();
        for i in 0..vel.len() {
            if vel.is_fixed(i) {
                if let Some(g) = &params.velocity_bc {
                    let v = g(space.velocity_node_point(i));
                    boundary[off.velocity + 2 * i] = v[0];
                    boundary[off.velocity + 2 * i + 1] = v[1];
                }
            }
        }
        let head = space.head();
        for i in 0..head.len() {
            if head.is_fixed(i) {
                if let Some(g) = &params.head_bc {
                    boundary[off.head + i] = g(space.head_node_point(i));
                }
            }
        }
        let mut free = Vec::new();
        for (k, slot) in free_map.iter_mut().enumerate() {
            let fixed = if k < off.pressure {
                vel.is_fixed((k - off.velocity) / 2)
            } else if k >= off.head && k < off.head + head.len() {
                head.is_fixed(k - off.head)
            } else {
                false
            };
            if !fixed {
                *slot = Some(free.len());
                free.push(k);
            }
        }
        CoupledSystem { space, params, viscous, darcy, base, rhs, boundary, free_map, free }
    }

    pub fn space(&self) -> &CoupledSpace {
        self.space
    }

    /// Number of unknowns including fixed ones.
    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// Full indices of the free unknowns.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Linear operator without convection.
    pub fn base_matrix(&self) -> &CsrMatrix {
        &self.base
    }

    /// Full right-hand side `[F_vel, 0, F_head, 0]`.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Full vector carrying the Dirichlet data and zero in free slots.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary
    }

    /// K₀ + N(w) with the wind read from the velocity block of `x`.
    pub fn operator(&self, x: &[f64]) -> CsrMatrix {
        if !self.params.convection {
            return self.base.clone();
        }
        let off = self.space.offsets();
        let nv = 2 * self.space.velocity().len();
        let n = assemble_convection(self.space, &x[off.velocity..off.velocity + nv]);
        let mut t = TripletBuilder::new(self.dim(), self.dim());
        t.add_block(&self.base, 0, 0, 1.0);
        t.add_block(&n, off.velocity, off.velocity, 1.0);
        t.build()
    }

    /// Derivative of x ↦ L(x)x.
    pub fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        let l = self.operator(x);
        if !self.params.convection {
            return l;
        }
        let off = self.space.offsets();
        let nv = 2 * self.space.velocity().len();
        let m = assemble_convection_derivative(self.space, &x[off.velocity..off.velocity + nv]);
        let mut t = TripletBuilder::new(self.dim(), self.dim());
        t.add_block(&l, 0, 0, 1.0);
        t.add_block(&m, off.velocity, off.velocity, 1.0);
        t.build()
    }

    fn free_residual(&self, op: &CsrMatrix, x: &[f64]) -> Vec<f64> {
        let lx = op.matvec(x);
        self.free.iter().map(|&k| lx[k] - self.rhs[k]).collect()
    }

    /// L(x)x − F restricted to free rows.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.free_residual(&self.operator(x), x)
    }

    fn restrict(&self, m: &CsrMatrix) -> CsrMatrix {
        let nf = self.free.len();
        m.select(&self.free_map, nf, &self.free_map, nf)
    }

    /// Solve L_ff x_f = F_f − L_fc x_c for the operator frozen at `x`.
    fn picard_step(&self, x: &[f64], solver: &LinearSolver) -> Result<Vec<f64>, SolveError> {
        let op = self.operator(x);
        let lift = op.matvec(&self.boundary);
        let b: Vec<f64> = self.free.iter().map(|&k| self.rhs[k] - lift[k]).collect();
        let xf = solver.solve(&self.restrict(&op), &b).map_err(SolveError::linear)?;
        let mut out = self.boundary.clone();
        for (&k, v) in self.free.iter().zip(xf) {
            out[k] = v;
        }
        Ok(out)
    }

    fn newton_step(&self, x: &[f64], solver: &LinearSolver) -> Result<Vec<f64>, SolveError> {
        let r = self.residual(x);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solver.solve(&self.restrict(&self.jacobian(x)), &neg).map_err(SolveError::linear)?;
        let mut out = x.to_vec();
        for (&k, d) in self.free.iter().zip(delta) {
            out[k] += d;
        }
        Ok(out)
    }

    /// (ν‖D(u)‖², ‖𝕂^{1/2}∇φ‖²) of a full vector.
    pub fn energies(&self, x: &[f64]) -> (f64, f64) {
        let off = self.space.offsets();
        let nv = 2 * self.space.velocity().len();
        let nh = self.space.head().len();
        let u = &x[off.velocity..off.velocity + nv];
        let phi = &x[off.head..off.head + nh];
        (0.5 * self.viscous.form(u, u), self.darcy.form(phi, phi))
    }

    /// Pack a state into a full vector, overwriting fixed slots with the Dirichlet data.
    pub fn pack(&self, state: &CoupledState) -> Vec<f64> {
        let off = self.space.offsets();
        let mut x = vec![0.0; self.dim()];
        x[off.velocity..off.velocity + state.u_f.len()].copy_from_slice(&state.u_f);
        x[off.pressure..off.pressure + state.p_f.len()].copy_from_slice(&state.p_f);
        x[off.head..off.head + state.phi_p.len()].copy_from_slice(&state.phi_p);
        if let (Some(mu), Some(v)) = (off.multiplier, state.multiplier) {
            x[mu] = v;
        }
        for (k, slot) in self.free_map.iter().enumerate() {
            if slot.is_none() {
                x[k] = self.boundary[k];
            }
        }
        x
    }

    /// Split a full vector into a state with zero-mean pressure when required.
    pub fn unpack(&self, x: &[f64]) -> CoupledState {
        let off = self.space.offsets();
        let mut s = CoupledState::zeros(self.space);
        let (nv, np, nh) = (s.u_f.len(), s.p_f.len(), s.phi_p.len());
        s.u_f.copy_from_slice(&x[off.velocity..off.velocity + nv]);
        s.p_f.copy_from_slice(&x[off.pressure..off.pressure + np]);
        s.phi_p.copy_from_slice(&x[off.head..off.head + nh]);
        s.multiplier = off.multiplier.map(|mu| x[mu]);
        if self.space.normalization() == PressureNormalization::ZeroMean {
            let m = pressure_mass_vector(self.space);
            let mean = s.p_f.iter().zip(&m).map(|(p, w)| p * w).sum::<f64>() / m.iter().sum::<f64>();
            s.p_f.iter_mut().for_each(|p| *p -= mean);
        }
        s
    }
}

/// Solve the coupled problem from the zero state.
pub fn solve_coupled(space: &CoupledSpace, params: &ModelParams, config: &SolverConfig) -> Result<CoupledState, SolveError> {
    solve_coupled_from(space, params, config, &CoupledState::zeros(space))
}

/// Solve the coupled problem from a given initial guess. Fixed values of the
/// guess are replaced by the boundary data.
pub fn solve_coupled_from(
    space: &CoupledSpace,
    params: &ModelParams,
    config: &SolverConfig,
    initial: &CoupledState,
) -> Result<CoupledState, SolveError> {
    config.validate()?;
    params.validate(space.mesh())?;
    let sys = CoupledSystem::new(space, params);
    let reference = norm2(&sys.residual(sys.boundary_values()));
    let threshold = config.tol_rel * reference;
    let relative = |r: f64| if reference > 0.0 { r / reference } else { r };

    let mut x = sys.pack(initial);
    let mut transcript = Vec::new();
    let mut prev = f64::INFINITY;
    let mut increases = 0;
    let mut damping = config.damping;
    let mut newton = config.method == Method::Newton;
    let mut residual = f64::INFINITY;

    for iter in 1..=config.max_iters {
        let step = if newton || !params.convection && config.method == Method::Newton {
            StepKind::Newton
        } else {
            StepKind::Picard
        };
        let proposal = match step {
            StepKind::Picard => sys.picard_step(&x, &config.linear_solver)?,
            StepKind::Newton => sys.newton_step(&x, &config.linear_solver)?,
        };
        let theta = damping.unwrap_or(1.0);
        if theta == 1.0 {
            x = proposal;
        } else {
            for &k in sys.free_dofs() {
                x[k] = theta * proposal[k] + (1.0 - theta) * x[k];
            }
        }
        residual = norm2(&sys.residual(&x));
        let (e_fluid, e_darcy) = sys.energies(&x);
        transcript.push(IterationRecord {
            iter,
            step,
            residual,
            relative: relative(residual),
            damping: theta,
            e_fluid,
            e_darcy,
        });
        if residual <= threshold {
            let mut state = sys.unpack(&x);
            state.residual_norm = residual;
            state.relative_residual = relative(residual);
            state.iterations = iter;
            state.transcript = transcript;
            return Ok(state);
        }
        if residual > prev {
            increases += 1;
            if increases >= 2 && damping.is_none() {
                damping = Some(FALLBACK_DAMPING);
            }
        }
        prev = residual;
        if config.method == Method::PicardThenNewton && relative(residual) <= NEWTON_SWITCH {
            newton = true;
        }
    }
    let mut last = sys.unpack(&x);
    last.residual_norm = residual;
    last.relative_residual = relative(residual);
    last.iterations = config.max_iters;
    last.transcript = transcript;
    Err(SolveError::NonConvergence {
        iterations: config.max_iters,
        residual,
        relative: relative(residual),
        last: Box::new(last),
    })
}

/// Solve the auxiliary problem with wind u_p⁰ = lifting of u_f|_Γ.
pub fn solve_auxiliary(space: &CoupledSpace, params: &ModelParams, u_f: &[f64]) -> Result<AuxiliaryField, SolveError> {
    let lifting = lifting_of_velocity(space, u_f).map_err(|source| SolveError::SingularLinearSystem {
        source,
        context: " (lifting)".into(),
    })?;
    let sigma = params.sigma_on(space.mesh());
    let defect = zero_mean_divergence_defect(space, &lifting.coefficients);
    let u_ph = solve_aux_system(space, sigma, &lifting.coefficients, &lifting.coefficients, defect)?;
    Ok(AuxiliaryField {
        u_ph,
        wind: lifting.coefficients,
        sigma,
        net_flux: lifting.net_flux,
        flux_warning: lifting.flux_warning,
        divergence_defect: defect,
    })
}

/// Solve the auxiliary problem with a prescribed wind on the auxiliary nodes.
/// The Γ trace of `u_f` is imposed strongly and u_ph vanishes on Γ_p.
pub fn solve_auxiliary_with_wind(
    space: &CoupledSpace,
    sigma: f64,
    wind: &[f64],
    u_f: &[f64],
) -> Result<AuxiliaryField, SolveError> {
    let (vel, aux) = (space.velocity(), space.aux());
    let mut fixed = vec![0.0; 2 * aux.len()];
    let mut flux = 0.0;
    for &g in space.interface_nodes() {
        let i = aux.local(g).expect("interface node in porous space");
        let j = vel.local(g).expect("interface node in fluid space");
        fixed[2 * i] = u_f[2 * j];
        fixed[2 * i + 1] = u_f[2 * j + 1];
    }
    for i in 0..aux.len() {
        if aux.is_fixed(i) && !space.interface_nodes().contains(&aux.global(i)) {
            fixed[2 * i] = 0.0;
            fixed[2 * i + 1] = 0.0;
        }
    }
    flux += crate::fem::lifting::interface_flux(space, &fixed);
    let defect = zero_mean_divergence_defect(space, wind);
    let u_ph = solve_aux_system(space, sigma, wind, &fixed, defect)?;
    Ok(AuxiliaryField {
        u_ph,
        wind: wind.to_vec(),
        sigma,
        net_flux: flux,
        flux_warning: None,
        divergence_defect: defect,
    })
}

/// 2σ(D u, D v) + ((w·∇)u, v) = 0 for free v, with fixed values taken from `fixed`.
fn solve_aux_system(space: &CoupledSpace, sigma: f64, wind: &[f64], fixed: &[f64], defect: f64) -> Result<Vec<f64>, SolveError> {
    let aux = space.aux();
    let k = aux_operator(space, sigma, wind);
    let map: Vec<Option<usize>> = (0..2 * aux.len())
        .map(|c| aux.free_index(c / 2).map(|f| 2 * f + c % 2))
        .collect();
    let mut boundary = vec![0.0; 2 * aux.len()];
    for c in 0..boundary.len() {
        if map[c].is_none() {
            boundary[c] = fixed[c];
        }
    }
    let nf = 2 * aux.free_count();
    let lift = k.matvec(&boundary);
    let mut b = vec![0.0; nf];
    for c in 0..boundary.len() {
        if let Some(f) = map[c] {
            b[f] = -lift[c];
        }
    }
    let mut u = boundary;
    if nf > 0 {
        let x = LinearSolver::DirectLu
            .solve(&k.select(&map, nf, &map, nf), &b)
            .map_err(|source| SolveError::SingularLinearSystem {
                source,
                context: format!(" (auxiliary Oseen operator, lifting divergence defect {defect:e})"),
            })?;
        for c in 0..u.len() {
            if let Some(f) = map[c] {
                u[c] = x[f];
            }
        }
    }
    Ok(u)
}

/// 2σ strain plus aux convection on the full auxiliary node set.
pub fn aux_operator(space: &CoupledSpace, sigma: f64, wind: &[f64]) -> CsrMatrix {
    assemble_aux_viscous(space, sigma).add(1.0, &assemble_aux_convection(space, wind), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate::nodal_vector;
    use crate::mesh::build_rectangle_mesh;
    use std::sync::Arc;

    fn space() -> CoupledSpace {
        CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap())
    }

    fn forced(nu: f64, amp: f64) -> ModelParams {
        ModelParams::new(nu)
            .with_fluid_force(Arc::new(move |x| [amp * x[1], -amp * x[0]]))
            .with_porous_source(Arc::new(move |x| amp * (x[0] - 0.3)))
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { tol_rel: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(SolveError::InvalidConfig(_))));
        let bad = SolverConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { damping: Some(1.5), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_data_gives_zero_in_one_iteration() {
        let s = space();
        let state = solve_coupled(&s, &ModelParams::new(1.0), &SolverConfig::default()).unwrap();
        assert_eq!(state.iterations, 1);
        assert!(state.u_f.iter().chain(&state.p_f).chain(&state.phi_p).all(|&v| v == 0.0));
    }

    #[test]
    fn stokes_darcy_limit_is_one_linear_solve() {
        let s = space();
        let p = forced(1.0, 1.0).without_convection();
        let state = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        assert_eq!(state.iterations, 1);
        // compare with a direct solve of the restricted linear system
        let sys = CoupledSystem::new(&s, &p);
        let x = sys.picard_step(sys.boundary_values(), &LinearSolver::DirectLu).unwrap();
        assert_eq!(sys.unpack(&x).u_f, state.u_f);
    }

    #[test]
    fn picard_and_newton_agree() {
        let s = space();
        let p = forced(0.5, 2.0);
        let picard = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        let newton = solve_coupled(&s, &p, &SolverConfig { method: Method::Newton, ..Default::default() }).unwrap();
        let mixed = solve_coupled(&s, &p, &SolverConfig { method: Method::PicardThenNewton, ..Default::default() }).unwrap();
        assert!(newton.iterations <= picard.iterations);
        for other in [&newton, &mixed] {
            let d = picard.u_f.iter().zip(&other.u_f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(d < 1e-9, "{d}");
        }
        assert!(picard.relative_residual <= 1e-10);
    }

    #[test]
    fn pressure_has_zero_mean_and_divergence_vanishes_weakly() {
        let s = space();
        let p = forced(1.0, 1.0);
        let state = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        let m = pressure_mass_vector(&s);
        let mean: f64 = state.p_f.iter().zip(&m).map(|(a, b)| a * b).sum();
        assert!(mean.abs() < 1e-12);
        // (∇·u, q) = 0 for zero-mean q
        let bu = assemble_divergence(&s).matvec(&state.u_f);
        let area: f64 = m.iter().sum();
        let total: f64 = bu.iter().sum();
        for (b, w) in bu.iter().zip(&m) {
            assert!((b - w / area * total).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_matches_direct() {
        let s = space();
        let p = forced(1.0, 1.0);
        let direct = solve_coupled(&s, &p, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig { linear_solver: LinearSolver::gmres_default(), ..Default::default() };
        let iterative = solve_coupled(&s, &p, &cfg).unwrap();
        let d = direct.u_f.iter().zip(&iterative.u_f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn reports_nonconvergence_with_last_state() {
        let s = space();
        let cfg = SolverConfig { max_iters: 1, ..Default::default() };
        match solve_coupled(&s, &forced(0.05, 50.0), &cfg) {
            Err(SolveError::NonConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.transcript.len(), 1);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn transcript_lines_are_parseable() {
        let s = space();
        let state = solve_coupled(&s, &forced(1.0, 1.0), &SolverConfig::default()).unwrap();
        assert_eq!(state.transcript.len(), state.iterations);
        let line = state.transcript[0].to_string();
        assert!(line.starts_with("iter=1 step=picard residual="));
        assert_eq!(line.split_whitespace().count(), 7);
    }

    #[test]
    fn auxiliary_zero_trace_and_trace_reproduction() {
        let s = space();
        let p = ModelParams::new(1.0);
        let zero = solve_auxiliary(&s, &p, &vec![0.0; 2 * s.velocity().len()]).unwrap();
        assert!(zero.u_ph.iter().all(|&v| v == 0.0));

        let u_f = nodal_vector(s.mesh(), s.velocity(), |x| {
            let b = 4.0 * x[0] * (1.0 - x[0]);
            [b, 0.3 * b]
        });
        let aux = solve_auxiliary(&s, &p, &u_f).unwrap();
        for &g in s.interface_nodes() {
            let i = s.aux().local(g).unwrap();
            let j = s.velocity().local(g).unwrap();
            assert_eq!(aux.u_ph[2 * i], u_f[2 * j]);
            assert_eq!(aux.u_ph[2 * i + 1], u_f[2 * j + 1]);
        }
        assert!(aux.flux_warning.is_some());
        assert_eq!(aux.sigma, s.mesh().h());
    }
}
