use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::mesh::{HpMesh, Triangulation};
use crate::error::Result;

/// Boundary tag given to patch edges that are interior to the full mesh.
pub const PATCH_INTERFACE_TAG: u32 = 0;

/// Which neighbors join the center element in a patch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchAdjacency {
    /// Elements sharing an edge with the center.
    #[default]
    Edge,
    /// Elements sharing at least a vertex with the center.
    Vertex,
}

/// Where the Dirichlet data on a patch-boundary edge comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceSource {
    /// The globally computed trace `û_h`.
    GlobalTrace,
    /// The physical boundary condition of the problem.
    Physical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchBoundaryEdge {
    pub edge: usize,
    pub source: TraceSource,
}

/// Center element plus neighbors, used for local order-selection solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: usize,
    /// Center first, then neighbors in ascending order.
    pub members: Vec<usize>,
    pub boundary_edges: Vec<PatchBoundaryEdge>,
}

/// Sub-triangulation of a patch together with its maps back into the full mesh.
#[derive(Clone, Debug)]
pub struct PatchMesh {
    pub mesh: Triangulation,
    /// Local vertex id → global vertex id.
    pub vertex_map: Vec<usize>,
    /// Local edge id → global edge id.
    pub edge_map: Vec<usize>,
}

pub fn build_patch(mesh: &HpMesh, k: usize) -> Patch {
    build_patch_with(&mesh.mesh, k, PatchAdjacency::Edge)
}

pub fn build_patch_with(mesh: &Triangulation, k: usize, adjacency: PatchAdjacency) -> Patch {
    let mut neighbors: Vec<usize> = match adjacency {
        PatchAdjacency::Edge => mesh.edge_neighbors(k),
        PatchAdjacency::Vertex => {
            let t = mesh.triangle(k);
            (0..mesh.num_triangles())
                .filter(|&j| j != k && mesh.triangle(j).iter().any(|v| t.contains(v)))
                .collect()
        }
    };
    neighbors.sort_unstable();
    neighbors.dedup();
    let mut members = vec![k];
    members.extend(neighbors);
    let mut boundary_edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for &m in &members {
        for e in mesh.triangle_edges(m) {
            let edge = mesh.edge(e);
            let inside = edge
                .triangles
                .iter()
                .flatten()
                .filter(|t| members.contains(t))
                .count();
            if edge.is_boundary() {
                if seen.insert(e) {
                    boundary_edges.push(PatchBoundaryEdge {
                        edge: e,
                        source: TraceSource::Physical,
                    });
                }
            } else if inside == 1 && seen.insert(e) {
                boundary_edges.push(PatchBoundaryEdge {
                    edge: e,
                    source: TraceSource::GlobalTrace,
                });
            }
        }
    }
    boundary_edges.sort_by_key(|b| b.edge);
    Patch {
        center: k,
        members,
        boundary_edges,
    }
}

impl Patch {
    /// Extracts the patch as a standalone triangulation. Physical boundary edges keep their
    /// tags; the remaining patch-boundary edges are tagged [`PATCH_INTERFACE_TAG`].
    pub fn submesh(&self, mesh: &Triangulation) -> Result<PatchMesh> {
        let mut local_of: HashMap<usize, usize> = HashMap::new();
        let mut vertex_map = Vec::new();
        let mut triangles = Vec::with_capacity(self.members.len());
        for &m in &self.members {
            let t = mesh.triangle(m);
            let mut lt = [0usize; 3];
            for (i, v) in t.iter().enumerate() {
                lt[i] = *local_of.entry(*v).or_insert_with(|| {
                    vertex_map.push(*v);
                    vertex_map.len() - 1
                });
            }
            triangles.push(lt);
        }
        let vertices = vertex_map.iter().map(|&v| mesh.vertex(v)).collect();
        let boundary: Vec<(usize, usize, u32)> = self
            .boundary_edges
            .iter()
            .map(|b| {
                let e = mesh.edge(b.edge);
                let tag = match b.source {
                    TraceSource::Physical => e.boundary_tag.unwrap_or(1),
                    TraceSource::GlobalTrace => PATCH_INTERFACE_TAG,
                };
                (local_of[&e.vertices[0]], local_of[&e.vertices[1]], tag)
            })
            .collect();
        let sub = Triangulation::new(vertices, triangles, &boundary)?;
        let global_edge: HashMap<(usize, usize), usize> = self
            .members
            .iter()
            .flat_map(|&m| mesh.triangle_edges(m))
            .map(|e| (mesh.edge(e).vertices, e))
            .map(|([a, b], e)| ((a, b), e))
            .collect();
        let edge_map = sub
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (vertex_map[e.vertices[0]], vertex_map[e.vertices[1]]);
                global_edge[&(a.min(b), a.max(b))]
            })
            .collect();
        Ok(PatchMesh {
            mesh: sub,
            vertex_map,
            edge_map,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_element_has_four_members() {
        let m = HpMesh::uniform(Triangulation::unit_square(4).unwrap(), 2).unwrap();
        // an element away from the boundary
        let k = (0..m.num_elements())
            .find(|&k| {
                let c = m.mesh.centroid(k);
                (c[0] - 0.5).abs() < 0.2 && (c[1] - 0.5).abs() < 0.2
            })
            .unwrap();
        let p = build_patch(&m, k);
        assert_eq!(p.members.len(), 4);
        assert_eq!(p.members[0], k);
        // 3 neighbors x 2 exterior edges each
        assert_eq!(p.boundary_edges.len(), 6);
        assert!(p.boundary_edges.iter().all(|b| b.source == TraceSource::GlobalTrace));
    }

    #[test]
    fn corner_element_has_one_neighbor() {
        let m = HpMesh::uniform(Triangulation::unit_square(2).unwrap(), 1).unwrap();
        // triangle [a, c, d] of the lower-left cell touches two boundary edges
        let k = (0..m.num_elements())
            .find(|&k| m.mesh.edge_neighbors(k).len() == 1)
            .unwrap();
        let p = build_patch(&m, k);
        assert_eq!(p.members.len(), 2);
        assert!(p.boundary_edges.iter().any(|b| b.source == TraceSource::Physical));
    }

    #[test]
    fn single_element_patch() {
        let t = Triangulation::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &[])
            .unwrap();
        let m = HpMesh::uniform(t, 1).unwrap();
        let p = build_patch(&m, 0);
        assert_eq!(p.members, vec![0]);
        assert_eq!(p.boundary_edges.len(), 3);
        assert!(p.boundary_edges.iter().all(|b| b.source == TraceSource::Physical));
    }

    #[test]
    fn submesh_maps_back() {
        let m = Triangulation::unit_square(4).unwrap();
        let p = build_patch_with(&m, 12, PatchAdjacency::Edge);
        let sub = p.submesh(&m).unwrap();
        assert_eq!(sub.mesh.num_triangles(), p.members.len());
        for (le, &ge) in sub.edge_map.iter().enumerate() {
            let [a, b] = sub.mesh.edge(le).vertices;
            let mut g = [sub.vertex_map[a], sub.vertex_map[b]];
            g.sort();
            assert_eq!(g, m.edge(ge).vertices);
        }
        let vp = build_patch_with(&m, 12, PatchAdjacency::Vertex);
        assert!(vp.members.len() > p.members.len());
        assert!(vp.submesh(&m).is_ok());
    }
}
