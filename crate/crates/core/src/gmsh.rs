//! Reader for the ASCII Gmsh MSH 2.2 subset used by this crate.
//!
//! Only 2-node lines (type 1) and 3-node triangles (type 2) are accepted.
//! Physical group names must come from the fixed vocabulary
//! `fluid`, `porous`, `gamma_f`, `gamma_pd`, `gamma_pn`, `interface`.

use std::collections::HashMap;
use std::path::Path;

use crate::mesh::{BoundaryEdge, BoundaryTag, MeshError, MixedMesh, Subdomain, Triangle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    Region(Subdomain),
    Boundary(BoundaryTag),
    Interface,
}

fn group_from_name(name: &str) -> Option<Group> {
    match name {
        "fluid" => Some(Group::Region(Subdomain::Fluid)),
        "porous" => Some(Group::Region(Subdomain::Porous)),
        "interface" => Some(Group::Interface),
        other => BoundaryTag::from_name(other).map(Group::Boundary),
    }
}

pub fn load_gmsh_subset(path: impl AsRef<Path>) -> Result<MixedMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_gmsh_subset(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            self.last = i + 1;
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        self.next().ok_or(MeshError::Parse {
            line: self.last,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn perr(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
    s.parse().map_err(|_| perr(line, format!("cannot parse '{s}'")))
}

pub fn parse_gmsh_subset(text: &str) -> Result<MixedMesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut raw_elements: Vec<(usize, u32, i64, Vec<i64>)> = Vec::new();
    let (mut seen_format, mut seen_nodes, mut seen_elements) = (false, false, false);

    while let Some((ln, l)) = lines.next() {
        match l {
            "$MeshFormat" => {
                let (ln, f) = lines.expect("format line")?;
                let version = f.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(perr(ln, format!("unsupported MSH version {version}")));
                }
                if f.split_whitespace().nth(1) != Some("0") {
                    return Err(perr(ln, "only ASCII files are supported"));
                }
                lines.expect("$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (ln, c) = lines.expect("physical name count")?;
                let n: usize = parse_num(ln, c)?;
                for _ in 0..n {
                    let (ln, p) = lines.expect("physical name")?;
                    let mut it = p.splitn(3, char::is_whitespace);
                    let _dim: u32 = parse_num(ln, it.next().unwrap_or(""))?;
                    let tag: i64 = parse_num(ln, it.next().unwrap_or("").trim())?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    if group_from_name(&name).is_none() {
                        return Err(MeshError::UnknownPhysicalName(name));
                    }
                    names.insert(tag, name);
                }
                lines.expect("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let (ln, c) = lines.expect("node count")?;
                let n: usize = parse_num(ln, c)?;
                for _ in 0..n {
                    let (ln, p) = lines.expect("node")?;
                    let f: Vec<&str> = p.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(perr(ln, "node needs id and coordinates"));
                    }
                    let id: i64 = parse_num(ln, f[0])?;
                    let x: f64 = parse_num(ln, f[1])?;
                    let y: f64 = parse_num(ln, f[2])?;
                    if node_ids.insert(id, vertices.len()).is_some() {
                        return Err(perr(ln, format!("duplicate node id {id}")));
                    }
                    vertices.push([x, y]);
                }
                let (ln, end) = lines.expect("$EndNodes")?;
                if end != "$EndNodes" {
                    return Err(perr(ln, "node count does not match section length"));
                }
                seen_nodes = true;
            }
            "$Elements" => {
                let (ln, c) = lines.expect("element count")?;
                let n: usize = parse_num(ln, c)?;
                for _ in 0..n {
                    let (ln, p) = lines.expect("element")?;
                    let f: Vec<i64> = p
                        .split_whitespace()
                        .map(|s| parse_num(ln, s))
                        .collect::<Result<_, _>>()?;
                    if f.len() < 3 {
                        return Err(perr(ln, "truncated element record"));
                    }
                    let elm_type = f[1] as u32;
                    let ntags = f[2] as usize;
                    if f.len() < 3 + ntags {
                        return Err(perr(ln, "truncated element tags"));
                    }
                    let physical = if ntags > 0 { f[3] } else { 0 };
                    raw_elements.push((f[0] as usize, elm_type, physical, f[3 + ntags..].to_vec()));
                }
                let (ln, end) = lines.expect("$EndElements")?;
                if end != "$EndElements" {
                    return Err(perr(ln, "element count does not match section length"));
                }
                seen_elements = true;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // skip unknown sections
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => return Err(perr(ln, format!("unexpected line '{l}'"))),
        }
    }
    if !seen_format {
        return Err(MeshError::MissingSection("$MeshFormat"));
    }
    if !seen_nodes {
        return Err(MeshError::MissingSection("$Nodes"));
    }
    if !seen_elements {
        return Err(MeshError::MissingSection("$Elements"));
    }
    if raw_elements.is_empty() {
        return Err(MeshError::EmptyElements);
    }

    let lookup = |element: usize, id: i64| {
        node_ids.get(&id).copied().ok_or(MeshError::Parse {
            line: 0,
            message: format!("element {element} references unknown node {id}"),
        })
    };
    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    let mut interface = Vec::new();
    for (element, elm_type, physical, nodes) in raw_elements {
        let group = names
            .get(&physical)
            .ok_or(MeshError::UnnamedPhysicalTag { element, tag: physical })?;
        let group_kind = group_from_name(group).expect("validated above");
        match elm_type {
            2 => {
                let Group::Region(subdomain) = group_kind else {
                    return Err(MeshError::WrongGroupDimension { name: group.clone() });
                };
                if nodes.len() != 3 {
                    return Err(perr(0, format!("triangle {element} needs 3 nodes")));
                }
                let mut v = [lookup(element, nodes[0])?, lookup(element, nodes[1])?, lookup(element, nodes[2])?];
                let [a, b, c] = v.map(|i| vertices[i]);
                if crate::mesh::signed_area(a, b, c) < 0.0 {
                    v.swap(1, 2);
                }
                triangles.push(Triangle { vertices: v, subdomain });
            }
            1 => {
                if nodes.len() != 2 {
                    return Err(perr(0, format!("line {element} needs 2 nodes")));
                }
                let v = [lookup(element, nodes[0])?, lookup(element, nodes[1])?];
                match group_kind {
                    Group::Boundary(tag) => boundary.push(BoundaryEdge { vertices: v, tag }),
                    Group::Interface => interface.push(v),
                    Group::Region(_) => {
                        return Err(MeshError::WrongGroupDimension { name: group.clone() })
                    }
                }
            }
            // quadrangles and higher-order triangles
            3 | 9 | 10 | 16 | 20 | 21 | 22 | 23 | 24 | 25 => {
                return Err(MeshError::NonTriangleElement { element, elm_type })
            }
            _ => return Err(MeshError::UnsupportedElement { element, elm_type }),
        }
    }
    MixedMesh::from_parts(vertices, triangles, boundary, interface)
}

/// Write a mesh in the same MSH 2.2 subset.
pub fn write_gmsh_subset(mesh: &MixedMesh) -> String {
    use std::fmt::Write;
    let mut s = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n6\n");
    let groups = ["fluid", "porous", "gamma_f", "gamma_pd", "gamma_pn", "interface"];
    let dims = [2, 2, 1, 1, 1, 1];
    for (k, (name, dim)) in groups.iter().zip(dims).enumerate() {
        let _ = writeln!(s, "{dim} {} \"{name}\"", k + 1);
    }
    s.push_str("$EndPhysicalNames\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.vertices().len());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, p[0], p[1]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let total = mesh.triangles().len() + mesh.boundary_edges().len() + mesh.interface_edges().len();
    let _ = writeln!(s, "{total}");
    let mut id = 1;
    for e in mesh.boundary_edges() {
        let tag = 3 + e.tag as usize;
        let _ = writeln!(s, "{id} 1 2 {tag} {tag} {} {}", e.vertices[0] + 1, e.vertices[1] + 1);
        id += 1;
    }
    for e in mesh.interface_edges() {
        let _ = writeln!(s, "{id} 1 2 6 6 {} {}", e.vertices[0] + 1, e.vertices[1] + 1);
        id += 1;
    }
    for t in mesh.triangles() {
        let tag = if t.subdomain == Subdomain::Fluid { 1 } else { 2 };
        let [a, b, c] = t.vertices;
        let _ = writeln!(s, "{id} 2 2 {tag} {tag} {} {} {}", a + 1, b + 1, c + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;

    // Hand-written encoding of build_rectangle_mesh(1, 2, 1.0) with shuffled
    // node numbering and clockwise triangles.
    const SMALL: &str = r#"$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
6
2 1 "fluid"
2 2 "porous"
1 3 "gamma_f"
1 4 "gamma_pd"
1 5 "gamma_pn"
1 6 "interface"
$EndPhysicalNames
$Nodes
6
10 0 2 0
11 1 2 0
12 0 1 0
13 1 1 0
14 0 0 0
15 1 0 0
$EndNodes
$Elements
11
1 1 2 4 4 14 15
2 1 2 5 5 15 13
3 1 2 5 5 12 14
4 1 2 3 3 13 11
5 1 2 3 3 11 10
6 1 2 3 3 10 12
7 1 2 6 6 12 13
8 2 2 2 2 14 13 15
9 2 2 2 2 14 12 13
10 2 2 1 1 12 13 10
11 2 2 1 1 13 11 10
$EndElements
"#;

    fn canonical(m: &MixedMesh) -> Vec<(Vec<[i64; 2]>, &'static str)> {
        let key = |p: [f64; 2]| [(p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64];
        let mut out: Vec<_> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut pts: Vec<_> = t.vertices.iter().map(|&v| key(m.vertices()[v])).collect();
                pts.sort();
                (pts, t.subdomain.name())
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn hand_written_file_matches_builder() {
        let loaded = parse_gmsh_subset(SMALL).unwrap();
        let built = build_rectangle_mesh(1, 2, 1.0).unwrap();
        assert_eq!(canonical(&loaded), canonical(&built));
        assert_eq!(loaded.interface_edges().len(), 1);
        assert_eq!(loaded.interface_edges()[0].normal, [0.0, -1.0]);
        assert_eq!(loaded.boundary_edges().len(), built.boundary_edges().len());
    }

    #[test]
    fn writer_round_trip() {
        let built = build_rectangle_mesh(2, 4, 1.0).unwrap().refine_uniform();
        let loaded = parse_gmsh_subset(&write_gmsh_subset(&built)).unwrap();
        assert_eq!(canonical(&loaded), canonical(&built));
        assert_eq!(loaded.interface_edges().len(), built.interface_edges().len());
    }

    #[test]
    fn interface_inside_fluid_is_rejected() {
        // tag the fluid diagonal (13, 10) as interface
        let bad = SMALL.replace("$Elements\n11\n", "$Elements\n12\n").replace(
            "11 2 2 1 1 13 11 10\n",
            "11 2 2 1 1 13 11 10\n12 1 2 6 6 13 10\n",
        );
        assert!(matches!(parse_gmsh_subset(&bad), Err(MeshError::UnmatchedInterface(..))));
    }

    #[test]
    fn empty_elements_is_an_error() {
        let start = SMALL.find("$Elements").unwrap();
        let bad = format!("{}$Elements\n0\n$EndElements\n", &SMALL[..start]);
        assert!(matches!(parse_gmsh_subset(&bad), Err(MeshError::EmptyElements)));
    }

    #[test]
    fn unknown_physical_name() {
        let bad = SMALL.replace("\"gamma_pn\"", "\"outlet\"");
        assert!(matches!(parse_gmsh_subset(&bad), Err(MeshError::UnknownPhysicalName(n)) if n == "outlet"));
    }

    #[test]
    fn quadrilateral_is_rejected() {
        let bad = SMALL.replace("9 2 2 2 2 14 12 13", "9 3 2 2 2 14 12 13 15");
        assert!(matches!(
            parse_gmsh_subset(&bad),
            Err(MeshError::NonTriangleElement { element: 9, elm_type: 3 })
        ));
    }

    #[test]
    fn missing_tag_on_boundary_edge() {
        let bad = SMALL.replace("$Elements\n11\n1 1 2 4 4 14 15\n", "$Elements\n10\n");
        assert!(matches!(parse_gmsh_subset(&bad), Err(MeshError::UntaggedBoundary(..))));
    }
}
