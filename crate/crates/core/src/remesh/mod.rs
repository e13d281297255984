//! From a metric field to a new mesh: BAMG interchange files, the internal remesher and the
//! transfer of polynomial orders onto the new mesh.

mod interchange;
mod internal;

pub use interchange::{
    bundle, interchange_read, interchange_write, mesh_to_bamg, metric_to_bamg, parse_bamg_mesh,
    parse_bamg_metric, InterchangeBundle,
};
pub use internal::{
    edge_length_fraction, remesh_internal, remesh_with, unit_edge_metric, MetricField,
    RemeshOptions, RemeshOutput,
};

use crate::geometry::{PointLocator, Triangulation};

/// Each new element takes the order of the old element containing its barycenter, or of the
/// old element with the nearest barycenter when the point falls outside.
pub fn transfer_orders(old: &Triangulation, p_old: &[usize], new: &Triangulation) -> Vec<usize> {
    let loc = PointLocator::new(old);
    (0..new.num_triangles())
        .map(|k| p_old[loc.locate_or_nearest(old, new.centroid(k))])
        .collect()
}

#[cfg(test)]
mod tests;
