//! Two-subdomain triangulations of a fluid region stacked on a porous region.
//!
//! A [`MixedMesh`] is a single conforming triangulation whose triangles carry a
//! [`Subdomain`] tag. Outer boundary edges carry a [`BoundaryTag`]; the edges
//! shared by a fluid and a porous triangle form the interface and store both
//! neighbours together with the unit normal pointing out of the fluid region.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh dimensions: {0}")]
    InvalidDimensions(String),
    #[error("split line y = {split_y} does not coincide with a horizontal mesh line")]
    SplitNotOnMeshLine { split_y: f64 },
    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    NonPositiveArea { triangle: usize, area: f64 },
    #[error("vertices {first} and {second} coincide within tolerance")]
    DuplicateVertex { first: usize, second: usize },
    #[error("vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("interface edge ({0}, {1}) does not separate exactly one fluid and one porous triangle")]
    UnmatchedInterface(usize, usize),
    #[error("edge ({0}, {1}) separates fluid and porous triangles but is not tagged as interface")]
    UntaggedInterface(usize, usize),
    #[error("boundary edge ({0}, {1}) carries no boundary tag")]
    UntaggedBoundary(usize, usize),
    #[error("edge ({a}, {b}) tagged {tag} is not a boundary edge of an adjacent {expected:?} triangle")]
    MisplacedBoundaryTag {
        a: usize,
        b: usize,
        tag: BoundaryTag,
        expected: Subdomain,
    },
    #[error("boundary part {0} is empty")]
    EmptyBoundary(BoundaryTag),
    #[error("mesh has no {0:?} triangles")]
    EmptySubdomain(Subdomain),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown physical group name '{0}'")]
    UnknownPhysicalName(String),
    #[error("element {element} references physical tag {tag} with no name")]
    UnnamedPhysicalTag { element: usize, tag: i64 },
    #[error("element {element} has 2D type {elm_type}; only 3-node triangles are supported")]
    NonTriangleElement { element: usize, elm_type: u32 },
    #[error("element {element} has unsupported type {elm_type}")]
    UnsupportedElement { element: usize, elm_type: u32 },
    #[error("physical group '{name}' used on an element of the wrong dimension")]
    WrongGroupDimension { name: String },
    #[error("$Elements section contains no elements")]
    EmptyElements,
    #[error("missing section {0}")]
    MissingSection(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subdomain {
    Fluid,
    Porous,
}

/// Outer boundary parts: `FluidWall` is Γ_f (no-slip), `PorousDirichlet` is
/// Γ_pd (prescribed head), `PorousNeumann` is Γ_pn (prescribed flux).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    FluidWall,
    PorousDirichlet,
    PorousNeumann,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::FluidWall => "gamma_f",
            BoundaryTag::PorousDirichlet => "gamma_pd",
            BoundaryTag::PorousNeumann => "gamma_pn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gamma_f" => Some(BoundaryTag::FluidWall),
            "gamma_pd" => Some(BoundaryTag::PorousDirichlet),
            "gamma_pn" => Some(BoundaryTag::PorousNeumann),
            _ => None,
        }
    }

    fn side(self) -> Subdomain {
        match self {
            BoundaryTag::FluidWall => Subdomain::Fluid,
            _ => Subdomain::Porous,
        }
    }
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Subdomain {
    pub fn name(self) -> &'static str {
        match self {
            Subdomain::Fluid => "fluid",
            Subdomain::Porous => "porous",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub subdomain: Subdomain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceEdge {
    pub vertices: [usize; 2],
    pub fluid_triangle: usize,
    pub porous_triangle: usize,
    /// Unit normal pointing out of the fluid region (n_f = -n_p).
    pub normal: [f64; 2],
}

impl InterfaceEdge {
    /// Tangent obtained by rotating n_f by +90 degrees.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }

    pub fn porous_normal(&self) -> [f64; 2] {
        [-self.normal[0], -self.normal[1]]
    }
}

/// Conforming triangulation of Ω = Ω_f ∪ Γ ∪ Ω_p.
///
/// Immutable after construction. Besides the tagged entities it stores the
/// global edge list used to number quadratic (edge-midpoint) nodes.
#[derive(Clone, Debug)]
pub struct MixedMesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_edges: Vec<InterfaceEdge>,
    boundary_normals: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_index: HashMap<(usize, usize), usize>,
    h: f64,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Unit normal of edge (a, b) pointing away from `inside`.
fn outward_normal(a: Point, b: Point, inside: Point) -> [f64; 2] {
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    let n = [t[1] / len, -t[0] / len];
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let towards = (inside[0] - mid[0]) * n[0] + (inside[1] - mid[1]) * n[1];
    if towards > 0.0 {
        [-n[0], -n[1]]
    } else {
        n
    }
}

impl MixedMesh {
    /// Assemble a mesh from raw parts and validate every invariant.
    ///
    /// `interface` lists the vertex pairs of Γ; adjacency and normals are
    /// computed here.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<Triangle>,
        boundary_edges: Vec<BoundaryEdge>,
        interface: Vec<[usize; 2]>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for t in &triangles {
            for &v in &t.vertices {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { index: v, count: nv });
                }
            }
        }
        for e in boundary_edges.iter().map(|e| e.vertices).chain(interface.iter().copied()) {
            for v in e {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { index: v, count: nv });
                }
            }
        }

        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        for (ti, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (t.vertices[k], t.vertices[(k + 1) % 3]);
                let id = *edge_index.entry(key(a, b)).or_insert_with(|| {
                    edges.push([a.min(b), a.max(b)]);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[id].push(ti);
                te[k] = id;
            }
            triangle_edges.push(te);
        }

        let mut interface_edges = Vec::with_capacity(interface.len());
        for &[a, b] in &interface {
            let adjacent = edge_index
                .get(&key(a, b))
                .map(|&id| edge_triangles[id].as_slice())
                .unwrap_or(&[]);
            let fluid: Vec<usize> = adjacent
                .iter()
                .copied()
                .filter(|&t| triangles[t].subdomain == Subdomain::Fluid)
                .collect();
            let porous: Vec<usize> = adjacent
                .iter()
                .copied()
                .filter(|&t| triangles[t].subdomain == Subdomain::Porous)
                .collect();
            if fluid.len() != 1 || porous.len() != 1 {
                return Err(MeshError::UnmatchedInterface(a, b));
            }
            let ft = triangles[fluid[0]].vertices;
            let inside = ft.iter().copied().find(|&v| v != a && v != b).unwrap();
            interface_edges.push(InterfaceEdge {
                vertices: [a, b],
                fluid_triangle: fluid[0],
                porous_triangle: porous[0],
                normal: outward_normal(vertices[a], vertices[b], vertices[inside]),
            });
        }

        let h = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.vertices.map(|v| vertices[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max);

        let mut mesh = MixedMesh {
            vertices,
            triangles,
            boundary_edges,
            interface_edges,
            boundary_normals: Vec::new(),
            edges,
            triangle_edges,
            edge_index,
            h,
        };
        mesh.validate_with(&edge_triangles)?;
        mesh.boundary_normals = mesh
            .boundary_edges
            .iter()
            .map(|e| {
                let [a, b] = e.vertices;
                let t = edge_triangles[mesh.edge_index[&key(a, b)]][0];
                let inside = mesh.triangles[t].vertices.into_iter().find(|&v| v != a && v != b).unwrap();
                outward_normal(mesh.vertices[a], mesh.vertices[b], mesh.vertices[inside])
            })
            .collect();
        Ok(mesh)
    }

    fn validate_with(&self, edge_triangles: &[Vec<usize>]) -> Result<(), MeshError> {
        for sub in [Subdomain::Fluid, Subdomain::Porous] {
            if !self.triangles.iter().any(|t| t.subdomain == sub) {
                return Err(MeshError::EmptySubdomain(sub));
            }
        }
        for i in 0..self.triangles.len() {
            let area = self.triangle_area(i);
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { triangle: i, area });
            }
        }
        self.check_duplicate_vertices()?;

        let interface: HashMap<(usize, usize), ()> = self
            .interface_edges
            .iter()
            .map(|e| (key(e.vertices[0], e.vertices[1]), ()))
            .collect();
        let mut tagged: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            let adjacent = self
                .edge_index
                .get(&key(a, b))
                .map(|&id| edge_triangles[id].as_slice())
                .unwrap_or(&[]);
            if adjacent.len() != 1 || self.triangles[adjacent[0]].subdomain != e.tag.side() {
                return Err(MeshError::MisplacedBoundaryTag {
                    a,
                    b,
                    tag: e.tag,
                    expected: e.tag.side(),
                });
            }
            tagged.insert(key(a, b), e.tag);
        }
        for (id, adj) in edge_triangles.iter().enumerate() {
            let [a, b] = self.edges[id];
            match adj.len() {
                1 => {
                    if !tagged.contains_key(&(a, b)) {
                        return Err(MeshError::UntaggedBoundary(a, b));
                    }
                }
                2 => {
                    let s0 = self.triangles[adj[0]].subdomain;
                    let s1 = self.triangles[adj[1]].subdomain;
                    if s0 != s1 && !interface.contains_key(&(a, b)) {
                        return Err(MeshError::UntaggedInterface(a, b));
                    }
                }
                _ => return Err(MeshError::UnmatchedInterface(a, b)),
            }
        }
        for tag in [BoundaryTag::FluidWall, BoundaryTag::PorousDirichlet] {
            if !self.boundary_edges.iter().any(|e| e.tag == tag) {
                return Err(MeshError::EmptyBoundary(tag));
            }
        }
        Ok(())
    }

    fn check_duplicate_vertices(&self) -> Result<(), MeshError> {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let tol = 1e-12 * dist(lo, hi);
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&a, &b| self.vertices[a][0].total_cmp(&self.vertices[b][0]));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if self.vertices[j][0] - self.vertices[i][0] > tol {
                    break;
                }
                if dist(self.vertices[i], self.vertices[j]) <= tol {
                    return Err(MeshError::DuplicateVertex {
                        first: i.min(j),
                        second: i.max(j),
                    });
                }
            }
        }
        Ok(())
    }

    /// Re-run the full invariant check.
    pub fn validate(&self) -> Result<(), MeshError> {
        let mut edge_triangles = vec![Vec::new(); self.edges.len()];
        for (ti, te) in self.triangle_edges.iter().enumerate() {
            for &e in te {
                edge_triangles[e].push(ti);
            }
        }
        self.validate_with(&edge_triangles)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Unit normal of `boundary_edges()[i]` pointing out of the domain.
    pub fn boundary_normal(&self, i: usize) -> [f64; 2] {
        self.boundary_normals[i]
    }

    pub fn interface_edges(&self) -> &[InterfaceEdge] {
        &self.interface_edges
    }

    /// Unique edges as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of a triangle; local edge `k` joins local vertices `k` and `k+1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&key(a, b)).copied()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn subdomain_area(&self, sub: Subdomain) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].subdomain == sub)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|e| dist(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]))
            .sum()
    }

    pub fn count(&self, sub: Subdomain) -> usize {
        self.triangles.iter().filter(|t| t.subdomain == sub).count()
    }

    /// Split every triangle into four through its edge midpoints.
    ///
    /// Children of triangle `k` are stored at indices `4k..4k+4`, so the
    /// parent of child `c` is `c / 4`.
    pub fn refine_uniform(&self) -> MixedMesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for &[a, b] in &self.edges {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        let mid = |a: usize, b: usize| nv + self.edge_index[&key(a, b)];
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let [a, b, c] = t.vertices;
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            for vs in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
                triangles.push(Triangle {
                    vertices: vs,
                    subdomain: t.subdomain,
                });
            }
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            let m = mid(a, b);
            boundary.push(BoundaryEdge { vertices: [a, m], tag: e.tag });
            boundary.push(BoundaryEdge { vertices: [m, b], tag: e.tag });
        }
        let mut interface = Vec::with_capacity(2 * self.interface_edges.len());
        for e in &self.interface_edges {
            let [a, b] = e.vertices;
            let m = mid(a, b);
            interface.push([a, m]);
            interface.push([m, b]);
        }
        MixedMesh::from_parts(vertices, triangles, boundary, interface)
            .expect("uniform refinement of a valid mesh is valid")
    }

    /// Canonical text dump used for golden-file comparisons.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        s.push_str("nsdarcy-mesh 1\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let [a, b, c] = t.vertices;
            let _ = writeln!(s, "{a} {b} {c} {}", t.subdomain.name());
        }
        let _ = writeln!(s, "boundary {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.name());
        }
        let _ = writeln!(s, "interface {}", self.interface_edges.len());
        for e in &self.interface_edges {
            let _ = writeln!(
                s,
                "{} {} {} {} {:.17e} {:.17e}",
                e.vertices[0], e.vertices[1], e.fluid_triangle, e.porous_triangle, e.normal[0], e.normal[1]
            );
        }
        s
    }

    /// Parse the output of [`MixedMesh::to_dump`].
    pub fn from_dump(text: &str) -> Result<MixedMesh, MeshError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            })
        };
        let (ln, header) = next("header")?;
        if header != "nsdarcy-mesh 1" {
            return Err(MeshError::Parse {
                line: ln,
                message: format!("unsupported header '{header}'"),
            });
        }
        let count = |(ln, l): (usize, &str), name: &str| -> Result<usize, MeshError> {
            l.strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or(MeshError::Parse {
                    line: ln,
                    message: format!("expected '{name} <count>'"),
                })
        };
        let parse_err = |ln: usize, m: &str| MeshError::Parse {
            line: ln,
            message: m.to_string(),
        };

        let nv = count(next("vertices")?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("vertex")?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(ln, "bad vertex"))?;
            if v.len() != 2 {
                return Err(parse_err(ln, "vertex needs two coordinates"));
            }
            vertices.push([v[0], v[1]]);
        }
        let nt = count(next("triangles")?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next("triangle")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(ln, "triangle needs 3 indices and a tag"));
            }
            let idx: Vec<usize> = f[..3]
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(ln, "bad triangle index"))?;
            let subdomain = match f[3] {
                "fluid" => Subdomain::Fluid,
                "porous" => Subdomain::Porous,
                other => return Err(MeshError::UnknownPhysicalName(other.to_string())),
            };
            triangles.push(Triangle {
                vertices: [idx[0], idx[1], idx[2]],
                subdomain,
            });
        }
        let nb = count(next("boundary")?, "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (ln, l) = next("boundary edge")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(ln, "boundary edge needs 2 indices and a tag"));
            }
            let a = f[0].parse().map_err(|_| parse_err(ln, "bad index"))?;
            let b = f[1].parse().map_err(|_| parse_err(ln, "bad index"))?;
            let tag = BoundaryTag::from_name(f[2])
                .ok_or_else(|| MeshError::UnknownPhysicalName(f[2].to_string()))?;
            boundary.push(BoundaryEdge { vertices: [a, b], tag });
        }
        let ni = count(next("interface")?, "interface")?;
        let mut interface = Vec::with_capacity(ni);
        for _ in 0..ni {
            let (ln, l) = next("interface edge")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 2 {
                return Err(parse_err(ln, "interface edge needs 2 indices"));
            }
            let a = f[0].parse().map_err(|_| parse_err(ln, "bad index"))?;
            let b = f[1].parse().map_err(|_| parse_err(ln, "bad index"))?;
            interface.push([a, b]);
        }
        MixedMesh::from_parts(vertices, triangles, boundary, interface)
    }
}

/// Structured mesh of an axis-aligned box split horizontally into a fluid
/// part (above `split_y`) and a porous part (below).
#[derive(Clone, Copy, Debug)]
pub struct BoxMesh {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub split_y: f64,
}

impl BoxMesh {
    /// Cell `(i, j)` is cut by the diagonal through its lower-left corner when
    /// `i + j` is even and through its lower-right corner otherwise. With even
    /// cell counts every corner of both subdomains is cut by a diagonal, so no
    /// triangle has two edges on the same corner.
    pub fn build(&self) -> Result<MixedMesh, MeshError> {
        let BoxMesh { x_range, y_range, nx, ny, split_y } = *self;
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidDimensions(format!("nx = {nx}, ny = {ny}")));
        }
        if !(x_range[1] > x_range[0] && y_range[1] > y_range[0]) {
            return Err(MeshError::InvalidDimensions("empty box".into()));
        }
        let dy = (y_range[1] - y_range[0]) / ny as f64;
        let js = (split_y - y_range[0]) / dy;
        let j_split = js.round();
        if (js - j_split).abs() > 1e-9 || j_split < 1.0 || j_split > (ny - 1) as f64 {
            return Err(MeshError::SplitNotOnMeshLine { split_y });
        }
        let j_split = j_split as usize;
        let dx = (x_range[1] - x_range[0]) / nx as f64;
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let y = if j == j_split { split_y } else { y_range[0] + j as f64 * dy };
                vertices.push([x_range[0] + i as f64 * dx, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            let subdomain = if j >= j_split { Subdomain::Fluid } else { Subdomain::Porous };
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let pair = if (i + j) % 2 == 0 {
                    [[a, b, c], [a, c, d]]
                } else {
                    [[a, b, d], [b, c, d]]
                };
                for vertices in pair {
                    triangles.push(Triangle { vertices, subdomain });
                }
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx {
            boundary.push(BoundaryEdge {
                vertices: [id(i, 0), id(i + 1, 0)],
                tag: BoundaryTag::PorousDirichlet,
            });
            boundary.push(BoundaryEdge {
                vertices: [id(i + 1, ny), id(i, ny)],
                tag: BoundaryTag::FluidWall,
            });
        }
        for j in 0..ny {
            let tag = if j >= j_split {
                BoundaryTag::FluidWall
            } else {
                BoundaryTag::PorousNeumann
            };
            boundary.push(BoundaryEdge { vertices: [id(nx, j), id(nx, j + 1)], tag });
            boundary.push(BoundaryEdge { vertices: [id(0, j + 1), id(0, j)], tag });
        }
        let interface = (0..nx).map(|i| [id(i, j_split), id(i + 1, j_split)]).collect();
        MixedMesh::from_parts(vertices, triangles, boundary, interface)
    }
}

/// Structured mesh of (0,1)×(0,2) with the interface on `y = split_y`.
pub fn build_rectangle_mesh(nx: usize, ny: usize, split_y: f64) -> Result<MixedMesh, MeshError> {
    BoxMesh {
        x_range: [0.0, 1.0],
        y_range: [0.0, 2.0],
        nx,
        ny,
        split_y,
    }
    .build()
}
