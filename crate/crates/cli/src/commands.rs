use std::fs;
use std::path::Path;

use nsdarcy::analysis::{
    aux_energy_identity, builtin_suite, check_uniqueness, compensation_sweep, compute_inf_sup, energy_balance,
    lid_driven_case, pressure_bound_report, uniqueness_number, verify_energy_estimate, AnalysisError, InfSupPair,
    ReportConfig,
};
use nsdarcy::mms::{
    convergence_study, representable_case, smooth_case, MmsError, MmsSetup, EXPECTED_RATES, RATE_NAMES,
};
use nsdarcy::solver::{solve_auxiliary, solve_coupled, SolveError, SolverConfig};
use nsdarcy::vtk::write_vtk;
use nsdarcy::{CoupledSpace, MixedMesh, Subdomain};
use serde_json::{json, Value};

use crate::config::{ConfigError, MmsKind, RunConfig};

/// Uniqueness checks rescale each suite case to this uniqueness number.
const SMALL_DATA_NUMBER: f64 = 0.05;
const BALANCE_TOL: f64 = 1e-9;
const AUX_IDENTITY_TOL: f64 = 1e-10;
const INF_SUP_MIN: f64 = 0.2;
const REPRODUCTION_TOL: f64 = 1e-9;
const SWEEP_LEVELS: usize = 3;
const MMS_LEVELS: usize = 4;

#[derive(Debug)]
pub enum Failure {
    /// Exit code 3.
    Config(String),
    /// Exit code 2.
    Solver(String),
    /// Exit code 1; outputs were written.
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InvalidConfig(_) | SolveError::Model(_) => Failure::Config(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solve(s) => s.into(),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

pub fn mesh_summary(mesh: &MixedMesh) -> Value {
    let tag_count = |name: &str| mesh.boundary_edges().iter().filter(|e| e.tag.name() == name).count();
    json!({
        "vertices": mesh.vertices().len(),
        "triangles": { "fluid": mesh.count(Subdomain::Fluid), "porous": mesh.count(Subdomain::Porous) },
        "boundary_edges": {
            "gamma_f": tag_count("gamma_f"),
            "gamma_pd": tag_count("gamma_pd"),
            "gamma_pn": tag_count("gamma_pn"),
        },
        "interface_edges": mesh.interface_edges().len(),
        "h": mesh.h(),
        "area": { "fluid": mesh.subdomain_area(Subdomain::Fluid), "porous": mesh.subdomain_area(Subdomain::Porous) },
        "interface_length": mesh.interface_length(),
    })
}

pub fn mesh_info(cfg: &RunConfig) -> Result<Value, Failure> {
    let mesh = cfg.load_mesh()?;
    let space = CoupledSpace::with_normalization(mesh.clone(), cfg.pressure);
    let mut info = mesh_summary(&mesh);
    info["dofs"] = json!({
        "velocity": space.velocity_dim(),
        "pressure": space.pressure_dim(),
        "head": space.head_dim(),
        "aux_velocity": 2 * space.aux().free_count(),
    });
    Ok(info)
}

pub fn solve(cfg: &RunConfig) -> Result<Value, Failure> {
    let mesh = cfg.load_mesh()?;
    let params = cfg.params();
    params.validate(&mesh).map_err(|e| Failure::Config(e.to_string()))?;
    let space = CoupledSpace::with_normalization(mesh, cfg.pressure);
    let mut state = solve_coupled(&space, &params, &cfg.solver_or(SolverConfig::default()))?;
    state.aux = Some(solve_auxiliary(&space, &params, &state.u_f)?);
    let report = verify_energy_estimate(&space, &params, &state, &ReportConfig { c_mult: cfg.c_mult, beta: None })?;
    // the balance tests with the solution itself, which needs homogeneous Dirichlet data
    let balance = params.velocity_bc.is_none().then(|| energy_balance(&space, &params, &state));
    let summary = json!({
        "command": "solve",
        "config": cfg,
        "mesh": mesh_summary(space.mesh()),
        "iterations": state.iterations,
        "residual_norm": state.residual_norm,
        "relative_residual": state.relative_residual,
        "transcript": state.transcript,
        "report": report,
        "energy_balance": balance,
        "auxiliary": state.aux.as_ref().map(|a| json!({
            "sigma": a.sigma,
            "net_flux": a.net_flux,
            "flux_warning": a.flux_warning,
            "divergence_defect": a.divergence_defect,
        })),
    });
    write(&cfg.out, "solution.json", &pretty(&summary))?;
    write(&cfg.out, "state.json", &pretty(&state))?;
    write(&cfg.out, "solution.vtk", &write_vtk(&space, &state))?;
    Ok(summary)
}

fn criterion(pass: bool, detail: Value) -> Value {
    let mut v = detail;
    v["pass"] = json!(pass);
    v
}

pub fn verify(cfg: &RunConfig) -> Result<Value, Failure> {
    let solver = cfg.solver_or(SolverConfig::default());
    let mesh = cfg.load_mesh()?;
    let space = CoupledSpace::new(mesh.clone());
    let suite: Vec<_> = builtin_suite()
        .into_iter()
        .map(|c| (c.name, cfg.adjust(c.params)))
        .collect();
    for (_, p) in &suite {
        p.validate(&mesh).map_err(|e| Failure::Config(e.to_string()))?;
    }

    let pair = compute_inf_sup(&space, cfg.pair)?;
    let beta = match cfg.pair {
        InfSupPair::TaylorHood => pair.beta,
        _ => compute_inf_sup(&space, InfSupPair::TaylorHood)?.beta,
    };
    let inf_sup = criterion(
        pair.beta > INF_SUP_MIN,
        json!({ "pair": cfg.pair, "beta": pair.beta, "threshold": INF_SUP_MIN }),
    );

    let mut bound_cases = Vec::new();
    let mut balance_cases = Vec::new();
    let mut aux_cases = Vec::new();
    let mut unique_cases = Vec::new();
    let mut pressure_cases = Vec::new();
    let report_cfg = ReportConfig { c_mult: cfg.c_mult, beta: Some(beta) };
    for (k, (name, params)) in suite.iter().enumerate() {
        let state = solve_coupled(&space, params, &solver)?;
        let report = verify_energy_estimate(&space, params, &state, &report_cfg)?;
        bound_cases.push(json!({ "case": name, "bound_ratio": report.bound_ratio, "ok": report.bound_ok }));
        let balance = energy_balance(&space, params, &state);
        balance_cases.push(json!({ "case": name, "relative": balance.relative, "ok": balance.relative <= BALANCE_TOL }));
        let aux = solve_auxiliary(&space, params, &state.u_f)?;
        let identity = aux_energy_identity(&space, &aux);
        aux_cases.push(json!({ "case": name, "relative": identity.relative, "ok": identity.relative <= AUX_IDENTITY_TOL }));
        let pressure = pressure_bound_report(&report, beta, cfg.c_mult);
        pressure_cases.push(json!({ "case": name, "ratio": pressure.ratio, "ok": pressure.ok }));

        let number = uniqueness_number(&space, params)?;
        let scale = if number > 0.0 { SMALL_DATA_NUMBER / number } else { 1.0 };
        let small = params.scaled_data(scale);
        let seed = cfg.seed.wrapping_add(k as u64);
        let u = check_uniqueness(&space, &small, &solver, cfg.c_mult, Some(seed))?;
        unique_cases.push(json!({
            "case": name,
            "scale": scale,
            "uniqueness_number": u.uniqueness_number,
            "energy_difference": u.energy_difference,
            "ok": u.unique,
        }));
    }
    let all_ok = |cases: &[Value]| cases.iter().all(|c| c["ok"] == json!(true));

    let levels = cfg.levels.unwrap_or(SWEEP_LEVELS);
    let sweep = compensation_sweep(&mesh, levels, &cfg.adjust(lid_driven_case(1.0)), &solver)?;
    let status = match sweep.monotone {
        None => "insufficient levels",
        Some(true) => "monotone",
        Some(false) => "not monotone",
    };
    let compensation = criterion(sweep.monotone != Some(false), json!({ "status": status, "points": sweep.points }));

    let criteria = json!({
        "inf_sup": inf_sup,
        "energy_bound": criterion(all_ok(&bound_cases), json!({ "c_mult": cfg.c_mult, "cases": bound_cases })),
        "energy_balance": criterion(all_ok(&balance_cases), json!({ "tol": BALANCE_TOL, "cases": balance_cases })),
        "auxiliary_identity": criterion(all_ok(&aux_cases), json!({ "tol": AUX_IDENTITY_TOL, "cases": aux_cases })),
        "uniqueness": criterion(all_ok(&unique_cases), json!({ "target_number": SMALL_DATA_NUMBER, "cases": unique_cases })),
        "pressure_bound": criterion(all_ok(&pressure_cases), json!({ "beta": beta, "cases": pressure_cases })),
        "compensation": compensation,
    });
    let pass = criteria.as_object().unwrap().values().all(|c| c["pass"] == json!(true));
    let bundle = json!({
        "command": "verify",
        "config": cfg,
        "mesh": mesh_summary(&mesh),
        "criteria": criteria,
        "pass": pass,
    });
    write(&cfg.out, "verify.json", &pretty(&bundle))?;
    Ok(bundle)
}

pub fn mms(cfg: &RunConfig) -> Result<Value, Failure> {
    let levels = cfg.levels.unwrap_or(MMS_LEVELS);
    if cfg.assert_rates && cfg.mms_case == MmsKind::Smooth && levels < 3 {
        return Err(Failure::Config(format!("rate assertions need at least 3 levels, got {levels}")));
    }
    let solver = cfg.solver_or(SolverConfig { tol_rel: 1e-12, ..Default::default() });
    let mesh = cfg.load_mesh()?;
    let case = match cfg.mms_case {
        MmsKind::Smooth => smooth_case(cfg.nu),
        MmsKind::Representable => representable_case(MmsSetup::new(cfg.nu)),
    };
    let table = convergence_study(&case, &mesh, levels, &solver).map_err(|e| match e {
        MmsError::Solve { .. } => Failure::Solver(e.to_string()),
        MmsError::TooFewLevels { .. } => Failure::Config(e.to_string()),
        other => Failure::Verification(other.to_string()),
    })?;
    let (pass, failures) = match cfg.mms_case {
        MmsKind::Smooth if cfg.assert_rates => {
            let f = table.rate_failures().map_err(|e| Failure::Config(e.to_string()))?;
            (f.is_empty(), f)
        }
        MmsKind::Smooth => (true, Vec::new()),
        MmsKind::Representable => {
            let err = table.max_error();
            let ok = err <= REPRODUCTION_TOL;
            (ok, if ok { Vec::new() } else { vec![format!("max error {err:e} exceeds {REPRODUCTION_TOL:e}")] })
        }
    };
    let expected: Vec<Value> = RATE_NAMES
        .iter()
        .zip(EXPECTED_RATES)
        .map(|(n, (rate, tol))| json!({ "name": n, "rate": rate, "tol": tol }))
        .collect();
    let summary = json!({
        "command": "mms",
        "config": cfg,
        "case": table.case,
        "rows": table.rows,
        "final_rates": table.final_rates(),
        "expected": expected,
        "max_error": table.max_error(),
        "failures": failures,
        "pass": pass,
    });
    write(&cfg.out, "rates.csv", &table.to_csv())?;
    write(&cfg.out, "mms.json", &pretty(&summary))?;
    if pass {
        Ok(summary)
    } else {
        Err(Failure::Verification(failures.join("; ")))
    }
}
