use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{assemble_local, LocalSystem};
use super::problem::{DirichletData, ProblemDirichlet, UltraWeakProblem};
use crate::approximation::{cached_line_rule, trace_basis, SpaceLayout};
use crate::error::{Error, Result};
use crate::geometry::{scalar_dofs, HpMesh, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Eliminate the element field dofs before the global solve.
    pub condense: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { condense: true }
    }
}

/// Riesz representative `φ_h = Σ c_j ψ_j` of the element residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRepresentation {
    pub element: usize,
    pub test_order: usize,
    /// Ordered `[v | τx | τy]`, each block of length `T(test_order)`.
    pub coefficients: Vec<f64>,
    /// `cᵀ G c`.
    pub eta_sq_gram: f64,
    /// `rᵀ c`.
    pub eta_sq_residual: f64,
}

impl ErrorRepresentation {
    fn block(&self, i: usize) -> &[f64] {
        let t = scalar_dofs(self.test_order);
        &self.coefficients[i * t..(i + 1) * t]
    }

    pub fn v_part(&self) -> &[f64] {
        self.block(0)
    }

    pub fn tau_x(&self) -> &[f64] {
        self.block(1)
    }

    pub fn tau_y(&self) -> &[f64] {
        self.block(2)
    }
}

/// Solution of the ultra-weak system together with the element error representations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlobalSolution {
    pub layout: SpaceLayout,
    /// Coefficients over the whole layout, including the fixed boundary values.
    pub coefficients: Vec<f64>,
    pub representations: Vec<ErrorRepresentation>,
    /// Element energy errors `η_k`.
    pub eta: Vec<f64>,
}

impl GlobalSolution {
    /// Global energy error `η = (Σ η_k²)^{1/2}`.
    pub fn energy_error(&self) -> f64 {
        energy_error(self).1
    }

    pub fn local_coefficients(&self, sys: &LocalSystem) -> DVector<f64> {
        DVector::from_iterator(sys.dofs.len(), sys.dofs.iter().map(|&d| self.coefficients[d]))
    }
}

/// Per-element `η_k` and global `η`.
pub fn energy_error(solution: &GlobalSolution) -> (Vec<f64>, f64) {
    let eta = solution.eta.clone();
    let total = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    (eta, total)
}

struct Contribution {
    dofs: Vec<usize>,
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    recovery: Option<Recovery>,
}

struct Recovery {
    field_dofs: Vec<usize>,
    aff: Cholesky<f64, Dyn>,
    afs: DMatrix<f64>,
    bf: DVector<f64>,
}

fn contribution(sys: LocalSystem, condense: bool) -> Result<Contribution> {
    let factor = sys.gram.factor()?;
    let mut w = sys.b;
    factor.half_solve_mut(&mut w);
    let mut wl = DMatrix::from_column_slice(sys.l.len(), 1, sys.l.as_slice());
    factor.half_solve_mut(&mut wl);
    let a = w.tr_mul(&w);
    let b = w.tr_mul(&wl).column(0).into_owned();
    if !condense {
        return Ok(Contribution {
            dofs: sys.dofs,
            matrix: a,
            rhs: b,
            recovery: None,
        });
    }
    let nf = sys.n_field;
    let ns = a.nrows() - nf;
    let aff = a.view((0, 0), (nf, nf)).into_owned();
    let afs = a.view((0, nf), (nf, ns)).into_owned();
    let ass = a.view((nf, nf), (ns, ns)).into_owned();
    let bf = b.rows(0, nf).into_owned();
    let bs = b.rows(nf, ns).into_owned();
    let chol = aff.cholesky().ok_or_else(|| {
        Error::Solver(format!("element {} field block is singular", sys.element))
    })?;
    let x = chol.solve(&afs);
    let y = chol.solve(&bf);
    let schur = &ass - afs.tr_mul(&x);
    let rhs = &bs - afs.tr_mul(&y);
    Ok(Contribution {
        dofs: sys.dofs[nf..].to_vec(),
        matrix: (&schur + schur.transpose()) * 0.5,
        rhs,
        recovery: Some(Recovery {
            field_dofs: sys.dofs[..nf].to_vec(),
            aff: chol,
            afs,
            bf,
        }),
    })
}

/// Boundary edges meeting at each vertex.
pub(crate) fn vertex_boundary_edges(mesh: &Triangulation) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mesh.num_vertices()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.is_boundary() {
            out[edge.vertices[0]].push(e);
            out[edge.vertices[1]].push(e);
        }
    }
    out
}

/// Solves with the problem's own boundary data and default options.
pub fn solve_global(
    mesh: &HpMesh,
    problem: &UltraWeakProblem,
    layout: &SpaceLayout,
) -> Result<GlobalSolution> {
    solve_with(mesh, problem, layout, &ProblemDirichlet(problem), &SolverOptions::default())
}

/// Minimum-residual solve `Σ BᵀG⁻¹B x = Σ BᵀG⁻¹l`, followed by the error representation on
/// every element.
pub fn solve_with(
    mesh: &HpMesh,
    problem: &UltraWeakProblem,
    layout: &SpaceLayout,
    dirichlet: &dyn DirichletData,
    options: &SolverOptions,
) -> Result<GlobalSolution> {
    let m = &mesh.mesh;
    let ne = m.num_triangles();
    let mut x = vec![0.0; layout.total];
    let vb = vertex_boundary_edges(m);
    for v in 0..m.num_vertices() {
        if layout.fixed_vertex[v] {
            let g = dirichlet.vertex_value(m, v, &vb[v]);
            if !g.is_finite() {
                return Err(Error::MissingBoundaryData(vb[v].first().copied().unwrap_or(0)));
            }
            x[layout.vertex_dof[v]] = g;
        }
    }
    // free unknowns of the global system
    const FIXED: usize = usize::MAX;
    let mut free = vec![FIXED; layout.total];
    let mut nfree = 0;
    let mut mark = |d: usize, free: &mut Vec<usize>| {
        free[d] = nfree;
        nfree += 1;
    };
    if !options.condense {
        for k in 0..ne {
            for i in 0..layout.field_dim(k) {
                mark(layout.field_offset[k] + i, &mut free);
            }
        }
    }
    for v in 0..m.num_vertices() {
        if !layout.fixed_vertex[v] {
            mark(layout.vertex_dof[v], &mut free);
        }
    }
    for e in 0..m.num_edges() {
        if !layout.dirichlet_edge[e] {
            for i in 0..layout.edge_order[e] {
                mark(layout.bubble_offset[e] + i, &mut free);
            }
        }
        for i in 0..=layout.edge_order[e] {
            mark(layout.flux_offset[e] + i, &mut free);
        }
    }

    let contributions: Vec<Contribution> = (0..ne)
        .into_par_iter()
        .map(|k| {
            let sys = assemble_local(mesh, k, problem, layout, dirichlet)?;
            contribution(sys, options.condense)
        })
        .collect::<Result<_>>()?;

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; nfree];
    for c in &contributions {
        let n = c.dofs.len();
        for i in 0..n {
            let fi = free[c.dofs[i]];
            if fi == FIXED {
                continue;
            }
            rhs[fi] += c.rhs[i];
            for j in 0..n {
                let fj = free[c.dofs[j]];
                let a = c.matrix[(i, j)];
                if fj == FIXED {
                    rhs[fi] -= a * x[c.dofs[j]];
                } else if a != 0.0 {
                    triplets.push(Triplet::new(fi, fj, a));
                }
            }
        }
    }
    if nfree > 0 {
        // symmetric Jacobi scaling
        let mut diag = vec![0.0; nfree];
        for t in &triplets {
            if t.row == t.col {
                diag[t.row] += t.val;
            }
        }
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Solver(format!("global system has a zero pivot at unknown {i}")));
        }
        let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        for t in triplets.iter_mut() {
            t.val *= scale[t.row] * scale[t.col];
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(nfree, nfree, &triplets)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("global system is singular: {e:?}")))?;
        let b = Mat::from_fn(nfree, 1, |i, _| rhs[i] * scale[i]);
        let sol = llt.solve(&b);
        for d in 0..layout.total {
            let f = free[d];
            if f != FIXED {
                x[d] = sol[(f, 0)] * scale[f];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
    }
    for c in contributions {
        if let Some(r) = c.recovery {
            let xs = DVector::from_iterator(c.dofs.len(), c.dofs.iter().map(|&d| x[d]));
            let xf = r.aff.solve(&(&r.bf - &r.afs * xs));
            for (i, &d) in r.field_dofs.iter().enumerate() {
                x[d] = xf[i];
            }
        }
    }
    fill_boundary_bubbles(m, layout, dirichlet, &mut x);

    let representations: Vec<ErrorRepresentation> = (0..ne)
        .into_par_iter()
        .map(|k| {
            let sys = assemble_local(mesh, k, problem, layout, dirichlet)?;
            let xl = DVector::from_iterator(sys.dofs.len(), sys.dofs.iter().map(|&d| x[d]));
            error_representation(&sys, &xl)
        })
        .collect::<Result<_>>()?;
    let eta = representations.iter().map(|r| r.eta_sq_gram.max(0.0).sqrt()).collect();
    Ok(GlobalSolution {
        layout: layout.clone(),
        coefficients: x,
        representations,
        eta,
    })
}

/// Fills the unused bubble coefficients of Dirichlet edges with the L2 projection of the data
/// minus its vertex interpolant, so the stored trace approximates the data on every edge.
fn fill_boundary_bubbles(
    m: &Triangulation,
    layout: &SpaceLayout,
    dirichlet: &dyn DirichletData,
    x: &mut [f64],
) {
    for e in 0..m.num_edges() {
        let q = layout.edge_order[e];
        if !layout.dirichlet_edge[e] || q == 0 {
            continue;
        }
        let [a, b] = m.edge(e).vertices;
        let (ga, gb) = (x[layout.vertex_dof[a]], x[layout.vertex_dof[b]]);
        let rule = cached_line_rule(q + 6);
        let mut mass = DMatrix::<f64>::zeros(q, q);
        let mut rhs = DVector::<f64>::zeros(q);
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let tb = trace_basis(q + 1, t);
            let r = dirichlet.edge_value(m, e, t) - ga * tb[0] - gb * tb[1];
            for i in 0..q {
                rhs[i] += w * r * tb[2 + i];
                for j in 0..q {
                    mass[(i, j)] += w * tb[2 + i] * tb[2 + j];
                }
            }
        }
        if let Some(ch) = mass.cholesky() {
            let c = ch.solve(&rhs);
            for i in 0..q {
                x[layout.bubble_offset[e] + i] = c[i];
            }
        }
    }
}

/// Solves `G c = r` for the element residual `r = B x − l`, with one step of iterative
/// refinement, and evaluates `η_k²` both as `cᵀGc` and `rᵀc`.
pub fn error_representation(sys: &LocalSystem, x: &DVector<f64>) -> Result<ErrorRepresentation> {
    let r = &sys.b * x - &sys.l;
    let factor = sys.gram.factor()?;
    let mut c = factor.solve(&r);
    let defect = &r - sys.gram.mul(&c);
    c += factor.solve(&defect);
    let gc = sys.gram.mul(&c);
    Ok(ErrorRepresentation {
        element: sys.element,
        test_order: sys.gram.order,
        eta_sq_gram: c.dot(&gc),
        eta_sq_residual: r.dot(&c),
        coefficients: c.as_slice().to_vec(),
    })
}
