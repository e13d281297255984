use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scalar_dofs, HpMesh};

/// Degree-of-freedom layout of the ultra-weak trial space on an hp-mesh.
///
/// Per element: `u` and both components of `σ` at order `p_k` (Dubiner). Per edge of order
/// `q_e = max p` of its neighbors: a continuous trace `û` of order `q_e + 1` (shared vertex hats
/// plus `q_e` bubbles) and a flux `σ̂_n` of order `q_e` (`q_e + 1` Legendre modes). The flux is
/// oriented by the first adjacent triangle of the edge; the other side applies a factor `-1`.
///
/// Boundary vertex values are fixed by the Dirichlet data and boundary-edge bubbles are unused
/// by the solver (the data enters the load directly); they are still allocated so that every
/// edge has the same shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceLayout {
    pub orders: Vec<usize>,
    pub delta_p: usize,
    /// Start of the `[u, σx, σy]` block of each element (length `3 T(p_k)`).
    pub field_offset: Vec<usize>,
    pub vertex_dof: Vec<usize>,
    pub edge_order: Vec<usize>,
    /// Start of the `q_e` trace bubbles of each edge.
    pub bubble_offset: Vec<usize>,
    /// Start of the `q_e + 1` flux modes of each edge.
    pub flux_offset: Vec<usize>,
    pub test_order: Vec<usize>,
    pub dirichlet_edge: Vec<bool>,
    pub fixed_vertex: Vec<bool>,
    pub total: usize,
}

impl SpaceLayout {
    pub fn num_elements(&self) -> usize {
        self.orders.len()
    }

    pub fn field_dim(&self, k: usize) -> usize {
        3 * scalar_dofs(self.orders[k])
    }

    pub fn test_dim(&self, k: usize) -> usize {
        3 * scalar_dofs(self.test_order[k])
    }

    /// Number of scalar `u` dofs, the convention used for reporting `ndof`.
    pub fn scalar_field_dofs(&self) -> usize {
        self.orders.iter().map(|&p| scalar_dofs(p)).sum()
    }

    pub fn num_trace_dofs(&self) -> usize {
        self.vertex_dof.len() + self.edge_order.iter().sum::<usize>()
    }

    pub fn num_flux_dofs(&self) -> usize {
        self.edge_order.iter().map(|q| q + 1).sum()
    }

    /// Local trial dimension of element `k` counting every adjacent skeleton dof once.
    pub fn local_trial_dim(&self, mesh: &HpMesh, k: usize) -> usize {
        let edges = mesh.mesh.triangle_edges(k);
        self.field_dim(k) + 3 + edges.iter().map(|&e| 2 * self.edge_order[e] + 1).sum::<usize>()
    }
}

/// Builds the trial layout and the per-element test orders `max(p_k, q_e) + δp`.
/// Fails if an element's test dimension falls below its local trial dimension.
pub fn build_layout(mesh: &HpMesh, delta_p: usize) -> Result<SpaceLayout> {
    if delta_p == 0 {
        return Err(Error::Config("delta_p must be at least 1".into()));
    }
    let m = &mesh.mesh;
    let ne = m.num_triangles();
    let mut total = 0;
    let mut field_offset = Vec::with_capacity(ne);
    for &p in &mesh.p {
        field_offset.push(total);
        total += 3 * scalar_dofs(p);
    }
    let vertex_dof: Vec<usize> = (0..m.num_vertices()).map(|v| total + v).collect();
    total += m.num_vertices();
    let edge_order: Vec<usize> = (0..m.num_edges()).map(|e| mesh.edge_order(e)).collect();
    let mut bubble_offset = Vec::with_capacity(edge_order.len());
    for &q in &edge_order {
        bubble_offset.push(total);
        total += q;
    }
    let mut flux_offset = Vec::with_capacity(edge_order.len());
    for &q in &edge_order {
        flux_offset.push(total);
        total += q + 1;
    }
    let test_order: Vec<usize> = (0..ne)
        .map(|k| {
            let qmax = m.triangle_edges(k).iter().map(|&e| edge_order[e]).max().unwrap_or(0);
            mesh.p[k].max(qmax) + delta_p
        })
        .collect();
    let dirichlet_edge: Vec<bool> = m.edges().iter().map(|e| e.is_boundary()).collect();
    let fixed_vertex = m.boundary_vertices();
    let layout = SpaceLayout {
        orders: mesh.p.clone(),
        delta_p,
        field_offset,
        vertex_dof,
        edge_order,
        bubble_offset,
        flux_offset,
        test_order,
        dirichlet_edge,
        fixed_vertex,
        total,
    };
    for k in 0..ne {
        let (test, trial) = (layout.test_dim(k), layout.local_trial_dim(mesh, k));
        if test < trial {
            return Err(Error::InsufficientEnrichment {
                element: k,
                test,
                trial,
            });
        }
    }
    Ok(layout)
}
