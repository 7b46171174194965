//! Legacy ASCII VTK output of a coupled state on the linear triangulation.
//!
//! Quadratic fields are sampled at vertices. Fields defined on one region
//! only are written as zero on the other.

use std::fmt::Write as _;

use serde::Serialize;

use crate::fem::NodeSet;
use crate::mesh::Subdomain;
use crate::solver::CoupledState;
use crate::CoupledSpace;

/// Solution fields at mesh vertices, zero where a field is not defined.
#[derive(Clone, Debug, Serialize)]
pub struct VertexFields {
    pub velocity: Vec<[f64; 2]>,
    pub aux_velocity: Option<Vec<[f64; 2]>>,
    pub pressure: Vec<f64>,
    pub head: Vec<f64>,
}

impl VertexFields {
    pub fn sample(space: &CoupledSpace, state: &CoupledState) -> Self {
        let nv = space.mesh().vertices().len();
        let vector = |nodes: &NodeSet, coeffs: &[f64]| {
            (0..nv)
                .map(|g| nodes.local(g).map_or([0.0; 2], |i| [coeffs[2 * i], coeffs[2 * i + 1]]))
                .collect()
        };
        let scalar = |nodes: &NodeSet, coeffs: &[f64]| (0..nv).map(|g| nodes.local(g).map_or(0.0, |i| coeffs[i])).collect();
        VertexFields {
            velocity: vector(space.velocity(), &state.u_f),
            aux_velocity: state.aux.as_ref().map(|a| vector(space.aux(), &a.u_ph)),
            pressure: scalar(space.pressure(), &state.p_f),
            head: scalar(space.head(), &state.phi_p),
        }
    }
}

pub fn write_vtk(space: &CoupledSpace, state: &CoupledState) -> String {
    let mesh = space.mesh();
    let nv = mesh.vertices().len();
    let nt = mesh.triangles().len();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "coupled free flow and porous flow");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "CELL_DATA {nt}");
    let _ = writeln!(out, "SCALARS subdomain int 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for t in mesh.triangles() {
        let _ = writeln!(out, "{}", u8::from(t.subdomain == Subdomain::Porous));
    }

    let _ = writeln!(out, "POINT_DATA {nv}");
    let fields = VertexFields::sample(space, state);
    let mut vectors = vec![("velocity", fields.velocity)];
    if let Some(aux) = fields.aux_velocity {
        vectors.push(("aux_velocity", aux));
    }
    for (name, v) in vectors {
        let _ = writeln!(out, "VECTORS {name} double");
        for [x, y] in v {
            let _ = writeln!(out, "{x:e} {y:e} 0");
        }
    }
    for (name, v) in [("pressure", fields.pressure), ("head", fields.head)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for x in v {
            let _ = writeln!(out, "{x:e}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;

    #[test]
    fn sections_have_matching_counts() {
        let space = CoupledSpace::new(build_rectangle_mesh(2, 4, 1.0).unwrap());
        let mut state = CoupledState::zeros(&space);
        state.p_f.iter_mut().enumerate().for_each(|(i, p)| *p = i as f64);
        let text = write_vtk(&space, &state);
        let lines: Vec<&str> = text.lines().collect();
        let nv = space.mesh().vertices().len();
        let nt = space.mesh().triangles().len();
        assert_eq!(lines[4], format!("POINTS {nv} double"));
        let find = |prefix: &str| lines.iter().position(|l| l.starts_with(prefix)).unwrap();
        assert_eq!(find("CELLS") - find("POINTS"), nv + 1);
        assert_eq!(find("CELL_TYPES") - find("CELLS"), nt + 1);
        assert!(lines.contains(&format!("POINT_DATA {nv}").as_str()));
        let p = find("SCALARS pressure");
        let values: Vec<f64> = lines[p + 2..p + 2 + nv].iter().map(|l| l.parse().unwrap()).collect();
        assert_eq!(values.iter().filter(|&&v| v != 0.0).count(), space.pressure().len() - 1);
        assert!(!text.contains("aux_velocity"));
    }
}
