use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point, Triangulation};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Boundary data as a function of position and boundary tag.
pub type BoundaryFn = Arc<dyn Fn(Point, u32) -> f64 + Send + Sync>;
/// Exact solution: value and gradient.
pub type ExactFn = Arc<dyn Fn(Point) -> (f64, Point) + Send + Sync>;

/// `β·∇u − ε∇²u = s` with Dirichlet data on the whole boundary, written as the first-order
/// system `σ = ∇u`, `∇·(βu − εσ) = s`.
#[derive(Clone)]
pub struct UltraWeakProblem {
    pub beta: Point,
    pub epsilon: f64,
    pub source: ScalarFn,
    pub dirichlet: BoundaryFn,
    pub exact: Option<ExactFn>,
}

impl fmt::Debug for UltraWeakProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UltraWeakProblem")
            .field("beta", &self.beta)
            .field("epsilon", &self.epsilon)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl UltraWeakProblem {
    pub fn new(beta: Point, epsilon: f64, source: ScalarFn, dirichlet: BoundaryFn) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("diffusion must be positive, got {epsilon}")));
        }
        Ok(Self {
            beta,
            epsilon,
            source,
            dirichlet,
            exact: None,
        })
    }

    pub fn with_exact(mut self, exact: ExactFn) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Poisson problem `−∇²u = s`.
    pub fn poisson(source: ScalarFn, dirichlet: BoundaryFn) -> Self {
        Self::new([0.0, 0.0], 1.0, source, dirichlet).expect("unit diffusion")
    }

    /// Poisson problem whose source and boundary data come from a smooth exact solution
    /// `u` with gradient and Laplacian supplied.
    pub fn manufactured(
        beta: Point,
        epsilon: f64,
        u: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Point) -> Point + Send + Sync + 'static,
        laplacian: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let u = Arc::new(u);
        let grad = Arc::new(grad);
        let (u1, g1) = (u.clone(), grad.clone());
        let source: ScalarFn = Arc::new(move |x| {
            let g = g1(x);
            beta[0] * g[0] + beta[1] * g[1] - epsilon * laplacian(x)
        });
        let u2 = u.clone();
        let dirichlet: BoundaryFn = Arc::new(move |x, _| u2(x));
        let exact: ExactFn = Arc::new(move |x| (u1(x), grad(x)));
        Ok(Self::new(beta, epsilon, source, dirichlet)?.with_exact(exact))
    }

    /// Same operator with reversed convection and new data, as used by the adjoint solve.
    pub fn adjoint(&self, source: ScalarFn, dirichlet: BoundaryFn) -> Self {
        Self {
            beta: [-self.beta[0], -self.beta[1]],
            epsilon: self.epsilon,
            source,
            dirichlet,
            exact: None,
        }
    }
}

/// Dirichlet data for the trace on boundary edges of a (sub)mesh.
pub trait DirichletData: Sync {
    /// Value at parameter `t` of boundary edge `e` (measured from its lower vertex).
    fn edge_value(&self, mesh: &Triangulation, e: usize, t: f64) -> f64;
    /// Value imposed on the vertex hat of boundary vertex `v`; `edges` are the boundary edges
    /// meeting at `v`.
    fn vertex_value(&self, mesh: &Triangulation, v: usize, edges: &[usize]) -> f64;
}

/// Boundary data taken from the problem. Vertex values average the data of the adjacent
/// boundary edges, which handles tag-dependent (discontinuous) data at corners.
pub struct ProblemDirichlet<'a>(pub &'a UltraWeakProblem);

impl DirichletData for ProblemDirichlet<'_> {
    fn edge_value(&self, mesh: &Triangulation, e: usize, t: f64) -> f64 {
        let tag = mesh.edge(e).boundary_tag.unwrap_or(0);
        (self.0.dirichlet)(mesh.edge_point(e, t), tag)
    }

    fn vertex_value(&self, mesh: &Triangulation, v: usize, edges: &[usize]) -> f64 {
        let x = mesh.vertex(v);
        if edges.is_empty() {
            return (self.0.dirichlet)(x, 0);
        }
        edges
            .iter()
            .map(|&e| (self.0.dirichlet)(x, mesh.edge(e).boundary_tag.unwrap_or(0)))
            .sum::<f64>()
            / edges.len() as f64
    }
}
