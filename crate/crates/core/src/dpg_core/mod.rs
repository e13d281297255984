//! Ultra-weak DPG assembly and solve with optimal test functions, the scaled V-norm Gram,
//! error representation and energy error.

mod local;
mod post;
mod problem;
mod solve;

pub use local::{
    assemble_local, gram_scaled_vnorm, physical_table, test_gram, ElementGeometry, GramFactor,
    LocalSystem, PhysicalTable, TestGram,
};
pub use post::{
    compute_errors, field_at, flux_at, integrate_weighted, sample_raster, trace_at,
    write_element_csv, write_raster_csv, ErrorNorms,
};
pub use problem::{
    BoundaryFn, DirichletData, ExactFn, ProblemDirichlet, ScalarFn, UltraWeakProblem,
};
pub use solve::{
    energy_error, error_representation, solve_global, solve_with, ErrorRepresentation,
    GlobalSolution, SolverOptions,
};
