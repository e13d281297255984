//! Triangular meshes, hp-meshes, metric tensors and patches.

mod locate;
mod mesh;
mod metric;
mod patch;

pub use locate::{barycentric, PointLocator};
pub use mesh::{
    complexity_of, complexity_weight, mesh_complexity, scalar_dofs, Edge, HpMesh, Triangulation,
    ALPHA, DEFAULT_BOUNDARY_TAG,
};
pub use metric::{
    angle_distance, element_metric, metric_compose, metric_decompose, normalize_angle,
    AnisotropyParams, MetricTensor,
};
pub use patch::{
    build_patch, build_patch_with, Patch, PatchAdjacency, PatchBoundaryEdge, PatchMesh,
    TraceSource, PATCH_INTERFACE_TAG,
};

/// A point or vector in the plane.
pub type Point = [f64; 2];
