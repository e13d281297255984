use nalgebra::{DMatrix, DVector};

use super::problem::{DirichletData, UltraWeakProblem};
use crate::approximation::{
    cached_line_rule, cached_rule, dubiner, element_table, flux_basis, trace_basis, SpaceLayout,
};
use crate::error::{Error, Result};
use crate::geometry::{scalar_dofs, HpMesh, Point, Triangulation};

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)` onto an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    /// Columns are the edge vectors `P1 − P0` and `P2 − P0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    pub fn from_corners(corners: [Point; 3]) -> Self {
        let [a, b, c] = corners;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        Self { corners, jac, det }
    }

    pub fn new(mesh: &Triangulation, k: usize) -> Self {
        Self::from_corners(mesh.corners(k))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn to_physical(&self, r: [f64; 2]) -> Point {
        let a = self.corners[0];
        [
            a[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            a[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let a = self.corners[0];
        let (dx, dy) = (x[0] - a[0], x[1] - a[1]);
        [
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        ]
    }

    /// Physical gradient from a reference gradient.
    pub fn gradient(&self, g: [f64; 2]) -> Point {
        [
            (self.jac[1][1] * g[0] - self.jac[1][0] * g[1]) / self.det,
            (-self.jac[0][1] * g[0] + self.jac[0][0] * g[1]) / self.det,
        ]
    }
}

/// Dubiner basis of one order tabulated at the physical points of a quadrature rule.
/// Matrices are `functions × points`; `weights` already include the Jacobian.
#[derive(Clone, Debug)]
pub struct PhysicalTable {
    pub values: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
}

pub fn physical_table(geo: &ElementGeometry, order: usize, degree: usize) -> PhysicalTable {
    let table = element_table(order, degree);
    let rule = cached_rule(degree);
    let j = geo.jac;
    let inv = 1.0 / geo.det;
    let dx = (&table.d_xi * j[1][1] - &table.d_eta * j[1][0]) * inv;
    let dy = (&table.d_eta * j[0][0] - &table.d_xi * j[0][1]) * inv;
    let weights = rule.weights.iter().map(|w| w * geo.det).collect();
    let points = (0..rule.len()).map(|q| geo.to_physical(rule.xy(q))).collect();
    PhysicalTable {
        values: table.values.clone(),
        dx,
        dy,
        weights,
        points,
    }
}

fn weighted(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (q, &wq) in w.iter().enumerate() {
        out.column_mut(q).scale_mut(wq);
    }
    out
}

/// Gram matrix of the scaled V-norm, split into its two diagonal blocks: the `v` block
/// (`T × T`) and the `τ = (τx, τy)` block (`2T × 2T`). The blocks do not couple.
#[derive(Clone, Debug)]
pub struct TestGram {
    pub order: usize,
    pub v: DMatrix<f64>,
    pub tau: DMatrix<f64>,
}

impl TestGram {
    pub fn dim(&self) -> usize {
        self.v.nrows() + self.tau.nrows()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let t = self.v.nrows();
        let mut g = DMatrix::zeros(3 * t, 3 * t);
        g.view_mut((0, 0), (t, t)).copy_from(&self.v);
        g.view_mut((t, t), (2 * t, 2 * t)).copy_from(&self.tau);
        g
    }

    pub fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = self.v.nrows();
        let mut y = DVector::zeros(3 * t);
        y.rows_mut(0, t).copy_from(&(&self.v * x.rows(0, t)));
        y.rows_mut(t, 2 * t).copy_from(&(&self.tau * x.rows(t, 2 * t)));
        y
    }

    pub fn factor(&self) -> Result<GramFactor> {
        let lv = self
            .v
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("test Gram (v block) not positive definite".into()))?;
        let lt = self
            .tau
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("test Gram (τ block) not positive definite".into()))?;
        Ok(GramFactor {
            lv: lv.l(),
            lt: lt.l(),
        })
    }
}

/// Block Cholesky factors of a [`TestGram`].
#[derive(Clone, Debug)]
pub struct GramFactor {
    lv: DMatrix<f64>,
    lt: DMatrix<f64>,
}

impl GramFactor {
    /// Overwrites `b` with `L⁻¹ b`.
    pub fn half_solve_mut(&self, b: &mut DMatrix<f64>) {
        let t = self.lv.nrows();
        let n = b.ncols();
        let mut top = b.view_mut((0, 0), (t, n));
        self.lv.solve_lower_triangular_mut(&mut top);
        let mut bottom = b.view_mut((t, 0), (2 * t, n));
        self.lt.solve_lower_triangular_mut(&mut bottom);
    }

    /// `G⁻¹ r`.
    pub fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let t = self.lv.nrows();
        let mut x = r.clone();
        {
            let mut top = x.rows_mut(0, t);
            self.lv.solve_lower_triangular_mut(&mut top);
            self.lv.tr_solve_lower_triangular_mut(&mut top);
        }
        {
            let mut bottom = x.rows_mut(t, 2 * t);
            self.lt.solve_lower_triangular_mut(&mut bottom);
            self.lt.tr_solve_lower_triangular_mut(&mut bottom);
        }
        x
    }
}

/// Scaled V-norm Gram on an element for the test pair space of the given order:
/// `(v, v') + (τ, τ') + √|k| ((∇v, ∇v') + (∇·τ, ∇·τ'))`.
pub fn test_gram(geo: &ElementGeometry, order: usize) -> TestGram {
    let tab = physical_table(geo, order, 2 * order + 2);
    gram_from_table(&tab, geo.area().sqrt(), order)
}

fn gram_from_table(tab: &PhysicalTable, s: f64, order: usize) -> TestGram {
    let t = tab.values.nrows();
    let wv = weighted(&tab.values, &tab.weights);
    let wx = weighted(&tab.dx, &tab.weights);
    let wy = weighted(&tab.dy, &tab.weights);
    let mass = &wv * tab.values.transpose();
    let kxx = &wx * tab.dx.transpose();
    let kxy = &wx * tab.dy.transpose();
    let kyy = &wy * tab.dy.transpose();
    let v = &mass + (&kxx + &kyy) * s;
    let mut tau = DMatrix::zeros(2 * t, 2 * t);
    tau.view_mut((0, 0), (t, t)).copy_from(&(&mass + &kxx * s));
    tau.view_mut((t, t), (t, t)).copy_from(&(&mass + &kyy * s));
    let c = &kxy * s;
    tau.view_mut((0, t), (t, t)).copy_from(&c);
    tau.view_mut((t, 0), (t, t)).copy_from(&c.transpose());
    TestGram { order, v, tau }
}

/// Full `M × M` scaled V-norm Gram matrix of the order-`order` test space on an element.
pub fn gram_scaled_vnorm(geo: &ElementGeometry, order: usize) -> Result<DMatrix<f64>> {
    let g = test_gram(geo, order);
    g.factor()?;
    Ok(g.to_matrix())
}

/// Element contribution of the ultra-weak form: Gram, trial-to-test matrix and load.
///
/// Columns are ordered `[u, σx, σy | vertex hats (3) | bubbles of non-Dirichlet edges |
/// flux modes of every edge]`; `dofs` maps them into the layout. Flux orientation signs are
/// folded into the columns. Rows are `[v | τx | τy]`.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub element: usize,
    pub gram: TestGram,
    pub b: DMatrix<f64>,
    pub l: DVector<f64>,
    pub dofs: Vec<usize>,
    /// Number of leading field columns.
    pub n_field: usize,
}

pub fn assemble_local(
    mesh: &HpMesh,
    k: usize,
    problem: &UltraWeakProblem,
    layout: &SpaceLayout,
    dirichlet: &dyn DirichletData,
) -> Result<LocalSystem> {
    let m = &mesh.mesh;
    let geo = ElementGeometry::new(m, k);
    let p = layout.orders[k];
    let r = layout.test_order[k];
    let (t, tp) = (scalar_dofs(r), scalar_dofs(p));
    let tab = physical_table(&geo, r, 2 * r + 2);
    let gram = gram_from_table(&tab, geo.area().sqrt(), r);

    let tri = m.triangle(k);
    let edges = m.triangle_edges(k);
    let mut dofs: Vec<usize> = (0..3 * tp).map(|i| layout.field_offset[k] + i).collect();
    let n_field = dofs.len();
    let vertex_col = dofs.len();
    dofs.extend(tri.iter().map(|&v| layout.vertex_dof[v]));
    let mut bubble_col = [usize::MAX; 3];
    for (j, &e) in edges.iter().enumerate() {
        if !layout.dirichlet_edge[e] {
            bubble_col[j] = dofs.len();
            dofs.extend((0..layout.edge_order[e]).map(|i| layout.bubble_offset[e] + i));
        }
    }
    let mut flux_col = [0; 3];
    for (j, &e) in edges.iter().enumerate() {
        flux_col[j] = dofs.len();
        dofs.extend((0..=layout.edge_order[e]).map(|i| layout.flux_offset[e] + i));
    }
    let n = dofs.len();
    let mut b = DMatrix::zeros(3 * t, n);
    let mut l = DVector::zeros(3 * t);

    // volume terms
    let wv = weighted(&tab.values, &tab.weights);
    let phi_t = tab.values.rows(0, tp).transpose();
    let mass = &wv * &phi_t;
    let gx = weighted(&tab.dx, &tab.weights) * &phi_t;
    let gy = weighted(&tab.dy, &tab.weights) * &phi_t;
    let (bx, by, eps) = (problem.beta[0], problem.beta[1], problem.epsilon);
    b.view_mut((0, 0), (t, tp)).copy_from(&(&gx * (-bx) - &gy * by));
    b.view_mut((0, tp), (t, tp)).copy_from(&(&gx * eps));
    b.view_mut((0, 2 * tp), (t, tp)).copy_from(&(&gy * eps));
    b.view_mut((t, 0), (t, tp)).copy_from(&gx);
    b.view_mut((2 * t, 0), (t, tp)).copy_from(&gy);
    b.view_mut((t, tp), (t, tp)).copy_from(&mass);
    b.view_mut((2 * t, 2 * tp), (t, tp)).copy_from(&mass);
    for (q, x) in tab.points.iter().enumerate() {
        let s = (problem.source)(*x);
        if s != 0.0 {
            for i in 0..t {
                l[i] += wv[(i, q)] * s;
            }
        }
    }

    // skeleton terms
    for (j, &e) in edges.iter().enumerate() {
        let edge = m.edge(e);
        let q = layout.edge_order[e];
        let normal = m.outward_normal(k, j);
        let len = m.edge_length(e);
        let sign = if edge.triangles[0] == Some(k) { 1.0 } else { -1.0 };
        let hat_col = [
            vertex_col + tri.iter().position(|&v| v == edge.vertices[0]).unwrap(),
            vertex_col + tri.iter().position(|&v| v == edge.vertices[1]).unwrap(),
        ];
        let dirichlet_edge = layout.dirichlet_edge[e];
        let rule = cached_line_rule((r + q + 8) / 2 + 1);
        for (&tq, &wq) in rule.points.iter().zip(&rule.weights) {
            let x = m.edge_point(e, tq);
            let xi = geo.to_reference(x);
            let (psi, _) = dubiner(r, xi[0], xi[1]);
            let w = wq * len;
            if dirichlet_edge {
                let g = dirichlet.edge_value(m, e, tq);
                if !g.is_finite() {
                    return Err(Error::MissingBoundaryData(e));
                }
                for i in 0..t {
                    l[t + i] += w * g * psi[i] * normal[0];
                    l[2 * t + i] += w * g * psi[i] * normal[1];
                }
            } else {
                let tb = trace_basis(q + 1, tq);
                for (a, &phi) in tb.iter().enumerate() {
                    let col = if a < 2 { hat_col[a] } else { bubble_col[j] + a - 2 };
                    let c = -w * phi;
                    for i in 0..t {
                        b[(t + i, col)] += c * psi[i] * normal[0];
                        b[(2 * t + i, col)] += c * psi[i] * normal[1];
                    }
                }
            }
            let fb = flux_basis(q, tq);
            for (a, &phi) in fb.iter().enumerate() {
                let c = sign * w * phi;
                let col = flux_col[j] + a;
                for i in 0..t {
                    b[(i, col)] += c * psi[i];
                }
            }
        }
    }
    Ok(LocalSystem {
        element: k,
        gram,
        b,
        l,
        dofs,
        n_field,
    })
}
