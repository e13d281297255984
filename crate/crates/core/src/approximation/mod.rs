//! Reference bases, quadrature and the ultra-weak trial layout.

mod basis;
mod layout;
mod quadrature;

pub use basis::{
    dubiner, dubiner_index, element_table, flux_basis, legendre, trace_basis, BasisKind,
    BasisValues, ElementTable, ReferenceBasis,
};
pub use layout::{build_layout, SpaceLayout};
pub use quadrature::{
    cached_line_rule, cached_rule, quadrature_rule, LineRule, QuadratureRule,
    MAX_TRIANGLE_DEGREE,
};
