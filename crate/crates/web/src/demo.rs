//! The computations behind the browser exports, kept free of JS types so
//! they run and test natively.

use nsdarcy::analysis::{builtin_suite, compute_inf_sup, lid_driven_case, verify_energy_estimate, InfSupPair, ReportConfig};
use nsdarcy::mms::{convergence_study, smooth_case};
use nsdarcy::solver::{solve_auxiliary, solve_coupled, SolverConfig};
use nsdarcy::vtk::VertexFields;
use nsdarcy::{build_rectangle_mesh, CoupledSpace, MixedMesh, ModelParams, Subdomain};
use serde::Serialize;
use serde_json::{json, Value};

/// Cells across the unit width; larger meshes make the page unresponsive.
pub const MAX_CELLS: usize = 16;
pub const MAX_LEVELS: usize = 4;

pub const CASES: [&str; 6] = ["uniform_push", "swirl", "porous_source", "anisotropic", "mixed", "lid_driven"];

fn mesh(cells: usize) -> Result<MixedMesh, String> {
    if !(1..=MAX_CELLS).contains(&cells) {
        return Err(format!("cells must be between 1 and {MAX_CELLS}, got {cells}"));
    }
    build_rectangle_mesh(cells, 2 * cells, 1.0).map_err(|e| e.to_string())
}

fn check_levels(levels: usize, min: usize) -> Result<(), String> {
    if (min..=MAX_LEVELS).contains(&levels) {
        Ok(())
    } else {
        Err(format!("levels must be between {min} and {MAX_LEVELS}, got {levels}"))
    }
}

fn case_params(name: &str) -> Result<ModelParams, String> {
    if name == "lid_driven" {
        return Ok(lid_driven_case(1.0));
    }
    builtin_suite()
        .into_iter()
        .find(|c| c.name == name)
        .map(|c| c.params)
        .ok_or_else(|| format!("unknown case `{name}`"))
}

/// Solve a named case and return the mesh, vertex fields and energy report.
pub fn solve_case(case: &str, cells: usize, amplitude: f64, convection: bool) -> Result<Value, String> {
    if !amplitude.is_finite() {
        return Err("amplitude must be finite".into());
    }
    let mesh = mesh(cells)?;
    let mut params = case_params(case)?.scaled_data(amplitude);
    if !convection {
        params = params.without_convection();
    }
    params.validate(&mesh).map_err(|e| e.to_string())?;
    let space = CoupledSpace::new(mesh);
    let mut state = solve_coupled(&space, &params, &SolverConfig::default()).map_err(|e| e.to_string())?;
    state.aux = Some(solve_auxiliary(&space, &params, &state.u_f).map_err(|e| e.to_string())?);
    let report = verify_energy_estimate(&space, &params, &state, &ReportConfig::default()).map_err(|e| e.to_string())?;
    let m = space.mesh();
    Ok(json!({
        "vertices": m.vertices(),
        "triangles": m.triangles().iter().map(|t| t.vertices).collect::<Vec<_>>(),
        "porous": m.triangles().iter().map(|t| t.subdomain == Subdomain::Porous).collect::<Vec<_>>(),
        "fields": VertexFields::sample(&space, &state),
        "iterations": state.iterations,
        "relative_residual": state.relative_residual,
        "report": report,
    }))
}

#[derive(Debug, Serialize)]
pub struct InfSupRow {
    pub level: usize,
    pub h: f64,
    pub taylor_hood: f64,
    pub equal_order: f64,
}

/// Discrete inf-sup constants of both pairs under uniform refinement.
pub fn inf_sup_sweep(cells: usize, levels: usize) -> Result<Vec<InfSupRow>, String> {
    check_levels(levels, 1)?;
    let mut mesh = mesh(cells)?;
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let space = CoupledSpace::new(mesh.clone());
        let beta = |pair| compute_inf_sup(&space, pair).map(|r| r.beta).map_err(|e| e.to_string());
        rows.push(InfSupRow {
            level,
            h: mesh.h(),
            taylor_hood: beta(InfSupPair::TaylorHood)?,
            equal_order: beta(InfSupPair::EqualOrderP1)?,
        });
    }
    Ok(rows)
}

/// Errors and observed orders of the smooth manufactured solution.
pub fn mms_rates(cells: usize, levels: usize) -> Result<Value, String> {
    check_levels(levels, 2)?;
    let table = convergence_study(&smooth_case(1.0), &mesh(cells)?, levels, &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    serde_json::to_value(&table).map_err(|e| e.to_string())
}
