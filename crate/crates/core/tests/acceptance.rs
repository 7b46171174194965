//! Acceptance gate: runs the ten verification criteria in order, prints one
//! PASS/FAIL line for each and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nsdarcy::analysis::{
    aux_energy_identity, builtin_suite, check_uniqueness, compensation_of, compensation_sweep, compute_inf_sup,
    energy_balance, lid_driven_case, pressure_bound_report, uniqueness_number, verify_energy_estimate, InfSupPair,
    ReportConfig, DEFAULT_C_MULT,
};
use nsdarcy::assembly::assemble_convection;
use nsdarcy::fem::basis::p2_values;
use nsdarcy::fem::interpolate::nodal_vector;
use nsdarcy::fem::{EdgeRule, Element};
use nsdarcy::mesh::BoundaryTag;
use nsdarcy::mms::{convergence_study, representable_case, smooth_case, MmsSetup, RATE_NAMES};
use nsdarcy::solver::{solve_auxiliary, solve_auxiliary_with_wind, solve_coupled, CoupledSystem, Method, SolverConfig};
use nsdarcy::{build_rectangle_mesh, CoupledSpace, MixedMesh, ModelParams, PressureNormalization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn base() -> MixedMesh {
    build_rectangle_mesh(2, 4, 1.0).unwrap()
}

/// Base for the refinement-independence checks; the 2×4 grid leaves only
/// 2×2 cells in the fluid and is pre-asymptotic.
fn sweep_base() -> MixedMesh {
    build_rectangle_mesh(4, 8, 1.0).unwrap()
}

fn levels(n: usize) -> Vec<MixedMesh> {
    refinements(base(), n)
}

fn refinements(first: MixedMesh, n: usize) -> Vec<MixedMesh> {
    let mut out = vec![first];
    while out.len() < n {
        let next = out.last().unwrap().refine_uniform();
        out.push(next);
    }
    out
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / min.abs()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// ∮_{∂Ω_f} (u·v)(w·n) with the outward normal of the fluid region, by
/// Gauss quadrature on boundary and interface edges.
fn fluid_boundary_flux(space: &CoupledSpace, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let mesh = space.mesh();
    let mut owner = std::collections::HashMap::new();
    for &t in space.fluid_triangles() {
        let vs = mesh.triangles()[t].vertices;
        for k in 0..3 {
            let (a, b) = (vs[k], vs[(k + 1) % 3]);
            owner.insert((a.min(b), a.max(b)), t);
        }
    }
    let mut edges: Vec<([usize; 2], [f64; 2])> = Vec::new();
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        if e.tag == BoundaryTag::FluidWall {
            edges.push((e.vertices, mesh.boundary_normal(i)));
        }
    }
    for e in mesh.interface_edges() {
        edges.push((e.vertices, e.normal));
    }
    let rule = EdgeRule::gauss(5);
    let mut total = 0.0;
    for ([a, b], n) in edges {
        let t = owner[&(a.min(b), a.max(b))];
        let el = Element::new(mesh.triangle_points(t));
        let dofs = space.velocity().element_dofs(mesh, t);
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        for (&s, &wt) in rule.points.iter().zip(&rule.weights) {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let l = barycentric(&el, x);
            let phi = p2_values(l);
            let eval = |c: &[f64]| {
                let mut r = [0.0; 2];
                for k in 0..6 {
                    r[0] += phi[k] * c[2 * dofs[k]];
                    r[1] += phi[k] * c[2 * dofs[k] + 1];
                }
                r
            };
            let (wu, uu, vu) = (eval(w), eval(u), eval(v));
            total += wt * len * (uu[0] * vu[0] + uu[1] * vu[1]) * (wu[0] * n[0] + wu[1] * n[1]);
        }
    }
    total
}

fn barycentric(el: &Element, x: [f64; 2]) -> [f64; 3] {
    let p0 = el.points[0];
    let g = el.grad_lambda;
    let l1 = g[1][0] * (x[0] - p0[0]) + g[1][1] * (x[1] - p0[1]);
    let l2 = g[2][0] * (x[0] - p0[0]) + g[2][1] * (x[1] - p0[1]);
    [1.0 - l1 - l2, l1, l2]
}

fn skew_identity() -> Outcome {
    let space = CoupledSpace::new(levels(3).pop().unwrap());
    let n = 2 * space.velocity().len();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (w, u, v) = (random(&mut rng, n), random(&mut rng, n), random(&mut rng, n));
        let nw = assemble_convection(&space, &w);
        let (uv, vu) = (nw.form(&v, &u), nw.form(&u, &v));
        let boundary = fluid_boundary_flux(&space, &w, &u, &v);
        let scale = uv.abs() + vu.abs() + boundary.abs();
        worst = worst.max((uv + vu - boundary).abs() / scale);
    }
    check(worst <= 1e-11, format!("worst relative residual {worst:.2e} (tol 1e-11)"))
}

fn interface_antisymmetry() -> Outcome {
    let space = CoupledSpace::new(levels(2).pop().unwrap());
    let params = ModelParams::new(1.0).with_friction(1.5);
    let sys = CoupledSystem::new(&space, &params);
    let l = sys.base_matrix();
    let off = space.offsets();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random(&mut rng, off.total);
        let mut xu = vec![0.0; off.total];
        let mut xh = vec![0.0; off.total];
        xu[off.velocity..off.pressure].copy_from_slice(&x[off.velocity..off.pressure]);
        let head_end = off.multiplier.unwrap_or(off.total);
        xh[off.head..head_end].copy_from_slice(&x[off.head..head_end]);
        let (a, b) = (l.form(&xu, &xh), l.form(&xh, &xu));
        worst = worst.max((a + b).abs() / (a.abs() + b.abs()));
    }
    check(worst <= 1e-14, format!("worst relative diagonal contribution {worst:.2e}"))
}

fn energy_balance_gate() -> Outcome {
    let space = CoupledSpace::new(levels(2).pop().unwrap());
    let mut worst = 0.0f64;
    for case in builtin_suite() {
        let state = solve_coupled(&space, &case.params, &SolverConfig::default()).map_err(|e| e.to_string())?;
        worst = worst.max(energy_balance(&space, &case.params, &state).relative);
    }
    check(worst <= 1e-9, format!("worst relative imbalance {worst:.2e} over the suite (tol 1e-9)"))
}

fn a_priori_bound() -> Outcome {
    let meshes = refinements(sweep_base(), 3);
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for case in builtin_suite() {
        let mut ratios = Vec::new();
        for mesh in &meshes {
            let space = CoupledSpace::new(mesh.clone());
            let state = solve_coupled(&space, &case.params, &SolverConfig::default()).map_err(|e| e.to_string())?;
            let r = verify_energy_estimate(&space, &case.params, &state, &ReportConfig::default())
                .map_err(|e| e.to_string())?;
            ratios.push(r.bound_ratio);
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let var = spread(&ratios);
        if max > DEFAULT_C_MULT || var >= 0.1 {
            failures.push(format!("{} ratios {ratios:.4?}", case.name));
        }
        summary.push(format!("{} {max:.3}/{:.1}%", case.name, 100.0 * var));
    }
    let mut detail = format!("max ratio/variation: {}", summary.join(", "));
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    check(failures.is_empty(), detail)
}

fn compensation() -> Outcome {
    let sweep = compensation_sweep(&base(), 3, &lid_driven_case(1.0), &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    let residuals: Vec<String> = sweep.points.iter().map(|p| format!("{:.3e}", p.residual)).collect();

    let space = CoupledSpace::new(levels(2).pop().unwrap());
    let profile = |x: [f64; 2]| -2.0 * x[0] * (1.0 - x[0]);
    let wind = nodal_vector(space.mesh(), space.aux(), |x| [0.0, profile(x)]);
    let u_f = nodal_vector(space.mesh(), space.velocity(), |x| [0.0, profile(x) * (2.0 - x[1])]);
    let aux = solve_auxiliary_with_wind(&space, 0.1, &wind, &u_f).map_err(|e| e.to_string())?;
    let exact = compensation_of(&space, &u_f, &aux);

    check(
        sweep.monotone == Some(true) && exact.residual <= 1e-12,
        format!(
            "driven residuals [{}]; constructed wind residual {:.2e} (T_f {:.3e})",
            residuals.join(", "),
            exact.residual,
            exact.t_fluid
        ),
    )
}

fn auxiliary_identity() -> Outcome {
    let space = CoupledSpace::new(levels(2).pop().unwrap());
    let mut worst = 0.0f64;
    for case in builtin_suite() {
        let state = solve_coupled(&space, &case.params, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let aux = solve_auxiliary(&space, &case.params, &state.u_f).map_err(|e| e.to_string())?;
        worst = worst.max(aux_energy_identity(&space, &aux).relative);
    }
    check(worst <= 1e-10, format!("worst relative residual {worst:.2e} (tol 1e-10)"))
}

fn inf_sup() -> Outcome {
    let mut betas = Vec::new();
    for mesh in refinements(sweep_base(), 3) {
        let space = CoupledSpace::new(mesh);
        betas.push(compute_inf_sup(&space, InfSupPair::TaylorHood).map_err(|e| e.to_string())?.beta);
    }
    let control = compute_inf_sup(&CoupledSpace::new(base()), InfSupPair::EqualOrderP1)
        .map_err(|e| e.to_string())?
        .beta;
    let min = betas.iter().copied().fold(f64::MAX, f64::min);
    let var = spread(&betas);
    check(
        min > 0.2 && var < 0.1 && control < 1e-6,
        format!("Taylor-Hood beta {betas:.4?} (spread {:.1}%); P1/P1 beta {control:.2e}", 100.0 * var),
    )
}

fn uniqueness() -> Outcome {
    let space = CoupledSpace::new(levels(2).pop().unwrap());
    let beta = compute_inf_sup(&space, InfSupPair::TaylorHood).map_err(|e| e.to_string())?.beta;
    let cfg = SolverConfig::default();
    let mut worst_diff = 0.0f64;
    let mut worst_pressure = 0.0f64;
    for (k, case) in builtin_suite().into_iter().enumerate() {
        let number = uniqueness_number(&space, &case.params).map_err(|e| e.to_string())?;
        let small = case.params.scaled_data(0.05 / number);
        let u = check_uniqueness(&space, &small, &cfg, 1.0, Some(10 + k as u64)).map_err(|e| e.to_string())?;
        if u.uniqueness_number >= 0.1 {
            return Err(format!("{}: scaled uniqueness number {}", case.name, u.uniqueness_number));
        }
        worst_diff = worst_diff.max(u.energy_difference.unwrap_or(f64::INFINITY));
        for params in [&case.params, &small] {
            let state = solve_coupled(&space, params, &cfg).map_err(|e| e.to_string())?;
            let report =
                verify_energy_estimate(&space, params, &state, &ReportConfig { beta: Some(beta), ..Default::default() })
                    .map_err(|e| e.to_string())?;
            worst_pressure = worst_pressure.max(pressure_bound_report(&report, beta, DEFAULT_C_MULT).ratio);
        }
    }
    check(
        worst_diff < 1e-8 && worst_pressure <= DEFAULT_C_MULT,
        format!("worst energy difference {worst_diff:.2e} (tol 1e-8); worst pressure ratio {worst_pressure:.3} (c_mult 4)"),
    )
}

fn mms() -> Outcome {
    let tight = SolverConfig { tol_rel: 1e-12, ..Default::default() };
    let table = convergence_study(&smooth_case(1.0), &base(), 4, &tight).map_err(|e| e.to_string())?;
    let failures = table.rate_failures().map_err(|e| e.to_string())?;
    let rates = table.final_rates().unwrap();
    let exact = convergence_study(&representable_case(MmsSetup::new(1.0)), &base(), 3, &tight)
        .map_err(|e| e.to_string())?
        .max_error();
    let shown: Vec<String> = RATE_NAMES.iter().zip(rates).map(|(n, r)| format!("{n} {r:.3}")).collect();
    let mut detail = format!("rates {}; representable error {exact:.2e} (tol 1e-9)", shown.join(", "));
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    check(failures.is_empty() && exact <= 1e-9, detail)
}

fn zero_data() -> Outcome {
    let mut meshes = levels(3);
    meshes.push(build_rectangle_mesh(1, 2, 1.0).unwrap());
    meshes.push(build_rectangle_mesh(3, 4, 1.0).unwrap());
    let mut runs = 0;
    for mesh in &meshes {
        for norm in [PressureNormalization::ZeroMean, PressureNormalization::Unconstrained] {
            let space = CoupledSpace::with_normalization(mesh.clone(), norm);
            for method in [Method::Picard, Method::Newton] {
                let cfg = SolverConfig { method, ..Default::default() };
                let s = solve_coupled(&space, &ModelParams::new(1.0), &cfg).map_err(|e| e.to_string())?;
                let all_zero = s.u_f.iter().chain(&s.p_f).chain(&s.phi_p).all(|&v| v == 0.0);
                if !all_zero || s.iterations != 1 {
                    return Err(format!("{} cells, {norm:?}, {method:?}: iterations {}", mesh.triangles().len(), s.iterations));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("exact zero in one iteration on {runs} mesh/normalization/method combinations"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("skew identity of the convection form", skew_identity),
        ("interface antisymmetry", interface_antisymmetry),
        ("energy balance at the solution", energy_balance_gate),
        ("a priori energy bound", a_priori_bound),
        ("compensation of interface convection", compensation),
        ("auxiliary energy identity", auxiliary_identity),
        ("discrete inf-sup", inf_sup),
        ("uniqueness and pressure bound", uniqueness),
        ("manufactured-solution convergence", mms),
        ("zero-data oracle", zero_data),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
