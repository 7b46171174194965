//! Finite-element spaces on a [`MixedMesh`] and the global unknown layout.
//!
//! P2 nodes are numbered globally as vertices first (`0..nv`) followed by
//! edge midpoints (`nv + edge_id`). Each space keeps its own local numbering
//! of the nodes it touches, so interface nodes of the fluid velocity and the
//! porous auxiliary velocity refer to the same global P2 ids.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::basis::Lagrange;
use crate::mesh::{BoundaryTag, MixedMesh, Point, Subdomain};

const NONE: usize = usize::MAX;

/// Nodes of one scalar Lagrange space restricted to a subdomain.
#[derive(Clone, Debug)]
pub struct NodeSet {
    kind: Lagrange,
    nodes: Vec<usize>,
    local: Vec<usize>,
    fixed: Vec<bool>,
    free_index: Vec<usize>,
    free_count: usize,
}

impl NodeSet {
    fn new(mesh: &MixedMesh, kind: Lagrange, triangles: &[usize], fixed_global: &[bool]) -> Self {
        let total = match kind {
            Lagrange::P1 => mesh.vertices().len(),
            Lagrange::P2 => mesh.vertices().len() + mesh.edges().len(),
        };
        let mut local = vec![NONE; total];
        let mut nodes = Vec::new();
        for &t in triangles {
            for g in element_nodes(mesh, kind, t).iter().take(kind.local_count()) {
                if local[*g] == NONE {
                    local[*g] = nodes.len();
                    nodes.push(*g);
                }
            }
        }
        // sort by global id for a numbering independent of triangle order
        nodes.sort_unstable();
        for (i, &g) in nodes.iter().enumerate() {
            local[g] = i;
        }
        let fixed: Vec<bool> = nodes.iter().map(|&g| fixed_global[g]).collect();
        let mut free_index = vec![NONE; nodes.len()];
        let mut free_count = 0;
        for (i, &f) in fixed.iter().enumerate() {
            if !f {
                free_index[i] = free_count;
                free_count += 1;
            }
        }
        NodeSet {
            kind,
            nodes,
            local,
            fixed,
            free_index,
            free_count,
        }
    }

    pub fn kind(&self) -> Lagrange {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global node id of local node `i`.
    pub fn global(&self, i: usize) -> usize {
        self.nodes[i]
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        match self.local.get(global) {
            Some(&l) if l != NONE => Some(l),
            _ => None,
        }
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    pub fn free_index(&self, i: usize) -> Option<usize> {
        (self.free_index[i] != NONE).then_some(self.free_index[i])
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    /// Local indices of the nodes of triangle `t` in element order.
    pub fn element_dofs(&self, mesh: &MixedMesh, t: usize) -> [usize; 6] {
        let g = element_nodes(mesh, self.kind, t);
        let mut out = [NONE; 6];
        for k in 0..self.kind.local_count() {
            out[k] = self.local[g[k]];
        }
        out
    }
}

/// Global node ids of triangle `t` for the given element kind.
pub fn element_nodes(mesh: &MixedMesh, kind: Lagrange, t: usize) -> [usize; 6] {
    let [a, b, c] = mesh.triangles()[t].vertices;
    match kind {
        Lagrange::P1 => [a, b, c, NONE, NONE, NONE],
        Lagrange::P2 => {
            let nv = mesh.vertices().len();
            let e = mesh.triangle_edges(t);
            [a, b, c, nv + e[0], nv + e[1], nv + e[2]]
        }
    }
}

/// Coordinates of a global P2 node.
pub fn p2_node_point(mesh: &MixedMesh, g: usize) -> Point {
    let nv = mesh.vertices().len();
    if g < nv {
        mesh.vertices()[g]
    } else {
        let [a, b] = mesh.edges()[g - nv];
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }
}

/// How the fluid pressure constant is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureNormalization {
    /// Pressure and continuity test space are L²₀; enforced with one
    /// Lagrange multiplier.
    #[default]
    ZeroMean,
    /// Full P1 pressure; continuity is tested against constants too, which
    /// forces zero net flux through the interface.
    Unconstrained,
}

/// Offsets of the blocks in the full coupled vector `[u | p | φ | μ]`,
/// fixed nodes included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofOffsets {
    pub velocity: usize,
    pub pressure: usize,
    pub head: usize,
    pub multiplier: Option<usize>,
    pub total: usize,
}

/// The discrete spaces X_fh × Q_fh × X_ph plus the auxiliary porous velocity.
#[derive(Clone, Debug)]
pub struct CoupledSpace {
    mesh: Arc<MixedMesh>,
    fluid_triangles: Vec<usize>,
    porous_triangles: Vec<usize>,
    velocity: NodeSet,
    pressure: NodeSet,
    head: NodeSet,
    aux: NodeSet,
    porous_vertices: NodeSet,
    interface_nodes: Vec<usize>,
    normalization: PressureNormalization,
    offsets: DofOffsets,
}

fn mark_edges(mesh: &MixedMesh, kind: Lagrange, edges: impl Iterator<Item = [usize; 2]>) -> Vec<bool> {
    let nv = mesh.vertices().len();
    let total = match kind {
        Lagrange::P1 => nv,
        Lagrange::P2 => nv + mesh.edges().len(),
    };
    let mut marked = vec![false; total];
    for [a, b] in edges {
        marked[a] = true;
        marked[b] = true;
        if kind == Lagrange::P2 {
            marked[nv + mesh.edge_id(a, b).expect("boundary edge belongs to the mesh")] = true;
        }
    }
    marked
}

impl CoupledSpace {
    pub fn new(mesh: impl Into<Arc<MixedMesh>>) -> Self {
        Self::with_normalization(mesh, PressureNormalization::ZeroMean)
    }

    pub fn with_normalization(mesh: impl Into<Arc<MixedMesh>>, normalization: PressureNormalization) -> Self {
        let mesh = mesh.into();
        let m = mesh.as_ref();
        let (mut fluid_triangles, mut porous_triangles) = (Vec::new(), Vec::new());
        for (i, t) in m.triangles().iter().enumerate() {
            match t.subdomain {
                Subdomain::Fluid => fluid_triangles.push(i),
                Subdomain::Porous => porous_triangles.push(i),
            }
        }
        let tagged = |tags: &'static [BoundaryTag]| {
            m.boundary_edges()
                .iter()
                .filter(move |e| tags.contains(&e.tag))
                .map(|e| e.vertices)
        };
        let interface = || m.interface_edges().iter().map(|e| e.vertices);

        let wall = mark_edges(m, Lagrange::P2, tagged(&[BoundaryTag::FluidWall]));
        let velocity = NodeSet::new(m, Lagrange::P2, &fluid_triangles, &wall);
        let pressure = NodeSet::new(m, Lagrange::P1, &fluid_triangles, &vec![false; m.vertices().len()]);
        let dirichlet = mark_edges(m, Lagrange::P1, tagged(&[BoundaryTag::PorousDirichlet]));
        let head = NodeSet::new(m, Lagrange::P1, &porous_triangles, &dirichlet);
        let mut aux_fixed = mark_edges(
            m,
            Lagrange::P2,
            tagged(&[BoundaryTag::PorousDirichlet, BoundaryTag::PorousNeumann]),
        );
        let on_interface = mark_edges(m, Lagrange::P2, interface());
        for (f, g) in aux_fixed.iter_mut().zip(&on_interface) {
            *f |= *g;
        }
        let aux = NodeSet::new(m, Lagrange::P2, &porous_triangles, &aux_fixed);
        let porous_vertices = NodeSet::new(m, Lagrange::P1, &porous_triangles, &vec![false; m.vertices().len()]);
        let interface_nodes = (0..on_interface.len()).filter(|&g| on_interface[g]).collect();

        let nu = 2 * velocity.len();
        let np = pressure.len();
        let nh = head.len();
        let multiplier = match normalization {
            PressureNormalization::ZeroMean => Some(nu + np + nh),
            PressureNormalization::Unconstrained => None,
        };
        let offsets = DofOffsets {
            velocity: 0,
            pressure: nu,
            head: nu + np,
            multiplier,
            total: nu + np + nh + usize::from(multiplier.is_some()),
        };
        CoupledSpace {
            mesh,
            fluid_triangles,
            porous_triangles,
            velocity,
            pressure,
            head,
            aux,
            porous_vertices,
            interface_nodes,
            normalization,
            offsets,
        }
    }

    pub fn mesh(&self) -> &MixedMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<MixedMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn fluid_triangles(&self) -> &[usize] {
        &self.fluid_triangles
    }

    pub fn porous_triangles(&self) -> &[usize] {
        &self.porous_triangles
    }

    /// Vector P2 fluid velocity; nodes on Γ_f are fixed.
    pub fn velocity(&self) -> &NodeSet {
        &self.velocity
    }

    /// P1 fluid pressure on every fluid vertex.
    pub fn pressure(&self) -> &NodeSet {
        &self.pressure
    }

    /// P1 porous head; nodes on Γ_pd are fixed.
    pub fn head(&self) -> &NodeSet {
        &self.head
    }

    /// Vector P2 auxiliary porous velocity; nodes on Γ_p and Γ are fixed.
    pub fn aux(&self) -> &NodeSet {
        &self.aux
    }

    /// P1 nodes on every porous vertex, none fixed (lifting pressure).
    pub fn porous_vertices(&self) -> &NodeSet {
        &self.porous_vertices
    }

    /// Global P2 ids of the nodes on Γ, ascending.
    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface_nodes
    }

    pub fn normalization(&self) -> PressureNormalization {
        self.normalization
    }

    pub fn offsets(&self) -> DofOffsets {
        self.offsets
    }

    /// Dimension of X_fh.
    pub fn velocity_dim(&self) -> usize {
        2 * self.velocity.free_count()
    }

    /// Dimension of Q_fh.
    pub fn pressure_dim(&self) -> usize {
        match self.normalization {
            PressureNormalization::ZeroMean => self.pressure.len() - 1,
            PressureNormalization::Unconstrained => self.pressure.len(),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.head.free_count()
    }

    pub fn velocity_node_point(&self, i: usize) -> Point {
        p2_node_point(&self.mesh, self.velocity.global(i))
    }

    pub fn aux_node_point(&self, i: usize) -> Point {
        p2_node_point(&self.mesh, self.aux.global(i))
    }

    pub fn pressure_node_point(&self, i: usize) -> Point {
        self.mesh.vertices()[self.pressure.global(i)]
    }

    pub fn head_node_point(&self, i: usize) -> Point {
        self.mesh.vertices()[self.head.global(i)]
    }

    /// Sigma default used by the auxiliary system: ν·h.
    /// P1 velocity nodes on the fluid region with the wall fixed; only used
    /// to build the unstable equal-order pair.
    pub fn equal_order_velocity(&self) -> NodeSet {
        let m = &*self.mesh;
        let walls = m
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::FluidWall)
            .map(|e| e.vertices);
        let fixed = mark_edges(m, Lagrange::P1, walls);
        NodeSet::new(m, Lagrange::P1, &self.fluid_triangles, &fixed)
    }

    pub fn default_sigma(&self, nu: f64) -> f64 {
        nu * self.mesh.h()
    }
}
