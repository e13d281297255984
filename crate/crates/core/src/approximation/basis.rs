//! Hierarchic polynomial bases.
//!
//! Element fields and test functions use the orthonormal Dubiner basis on the reference
//! triangle, ordered by total degree so the first `(p+1)(p+2)/2` functions span `P_p`.
//! Skeleton traces use vertex hats plus edge bubbles; fluxes use Legendre polynomials.

use nalgebra::DMatrix;
use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock, RwLock};

use super::quadrature::cached_rule;
use crate::error::{Error, Result};
use crate::geometry::scalar_dofs;

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    dx: f64,
    dy: f64,
}

impl Dual {
    fn c(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0 }
    }
    fn scale(self, s: f64) -> Self {
        Self {
            v: self.v * s,
            dx: self.dx * s,
            dy: self.dy * s,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
        }
    }
}

/// Index of the Dubiner function with degrees `(p, q)`.
#[inline]
pub fn dubiner_index(p: usize, q: usize) -> usize {
    (p + q) * (p + q + 1) / 2 + q
}

/// Jacobi recurrence coefficients for `P^{(a,b)}_{n+1}`.
fn jacobi_rc(a: f64, b: f64, n: f64) -> (f64, f64, f64) {
    let an = (2.0 * n + 1.0 + a + b) * (2.0 * n + 2.0 + a + b) / (2.0 * (n + 1.0) * (n + 1.0 + a + b));
    let bn = (a * a - b * b) * (2.0 * n + 1.0 + a + b)
        / (2.0 * (n + 1.0) * (2.0 * n + a + b) * (n + 1.0 + a + b));
    let cn = (n + a) * (n + b) * (2.0 * n + 2.0 + a + b)
        / ((n + 1.0) * (n + 1.0 + a + b) * (2.0 * n + a + b));
    (an, bn, cn)
}

/// Orthonormal Dubiner basis of degree `≤ n` at reference point `(ξ, η)`: values and
/// reference gradients. Valid for any point of the plane (polynomial extension).
pub fn dubiner(n: usize, xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let m = scalar_dofs(n);
    let mut r = vec![Dual::c(0.0); m];
    let x = Dual {
        v: 2.0 * xi - 1.0,
        dx: 2.0,
        dy: 0.0,
    };
    let y = Dual {
        v: 2.0 * eta - 1.0,
        dx: 0.0,
        dy: 2.0,
    };
    let one = Dual::c(1.0);
    let f1 = (one + x.scale(2.0) + y).scale(0.5);
    let f2 = (one - y).scale(0.5);
    let f3 = f2 * f2;
    r[0] = one;
    if n >= 1 {
        r[dubiner_index(1, 0)] = f1;
    }
    for p in 1..n {
        let pf = p as f64;
        let a = (2.0 * pf + 1.0) / (pf + 1.0);
        let b = pf / (pf + 1.0);
        r[dubiner_index(p + 1, 0)] =
            (f1 * r[dubiner_index(p, 0)]).scale(a) - (f3 * r[dubiner_index(p - 1, 0)]).scale(b);
    }
    for p in 0..n {
        let pf = p as f64;
        r[dubiner_index(p, 1)] = r[dubiner_index(p, 0)] * (Dual::c(pf + 0.5) + y.scale(pf + 1.5));
    }
    for p in 0..n.saturating_sub(1) {
        for q in 1..(n - p) {
            let (a1, a2, a3) = jacobi_rc(2.0 * p as f64 + 1.0, 0.0, q as f64);
            r[dubiner_index(p, q + 1)] = (y.scale(a1) + Dual::c(a2)) * r[dubiner_index(p, q)]
                - r[dubiner_index(p, q - 1)].scale(a3);
        }
    }
    let mut vals = Vec::with_capacity(m);
    let mut grads = Vec::with_capacity(m);
    for d in 0..=n {
        for q in 0..=d {
            let p = d - q;
            // orthonormal on the reference triangle of area 1/2
            let s = 2.0 * ((p as f64 + 0.5) * (d as f64 + 1.0)).sqrt();
            let f = r[dubiner_index(p, q)].scale(s);
            vals.push(f.v);
            grads.push([f.dx, f.dy]);
        }
    }
    (vals, grads)
}

/// Legendre polynomials `P_0..=P_n` at `x ∈ [-1, 1]`.
pub fn legendre(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 2..=n {
        let kf = k as f64;
        p.push(((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf);
    }
    p
}

/// Continuous trace basis of order `r ≥ 1` on an edge parametrized by `t ∈ [0, 1]`:
/// `[1 - t, t, bubbles...]`, `r + 1` functions.
pub fn trace_basis(r: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(r + 1);
    out.push(1.0 - t);
    out.push(t);
    if r >= 2 {
        let leg = legendre(r - 2, 2.0 * t - 1.0);
        let b = 4.0 * t * (1.0 - t);
        out.extend(leg.into_iter().map(|l| b * l));
    }
    out
}

/// Orthonormal Legendre basis of order `q` on `[0, 1]`, `q + 1` functions.
pub fn flux_basis(q: usize, t: f64) -> Vec<f64> {
    legendre(q, 2.0 * t - 1.0)
        .into_iter()
        .enumerate()
        .map(|(k, l)| (2.0 * k as f64 + 1.0).sqrt() * l)
        .collect()
}

/// Role of a reference basis in the ultra-weak setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    FieldScalar,
    FieldVector,
    Trace,
    Flux,
    TestH1,
    TestHdiv,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisValues {
    Scalar {
        values: Vec<f64>,
        gradients: Vec<[f64; 2]>,
    },
    /// Function `i < n` is `(φ_i, 0)`, function `n + i` is `(0, φ_i)`.
    Vector {
        values: Vec<[f64; 2]>,
        divergence: Vec<f64>,
    },
    Line {
        values: Vec<f64>,
        derivatives: Vec<f64>,
    },
}

/// A reference basis of a given order and kind. Scalar kinds may be switched to a nodal
/// (Lagrange, equispaced) variant, which forms a partition of unity.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    pub order: usize,
    pub kind: BasisKind,
    nodal: Option<DMatrix<f64>>,
}

fn equispaced_nodes(p: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for j in 0..=p {
        for i in 0..=(p - j) {
            out.push([i as f64 / p as f64, j as f64 / p as f64]);
        }
    }
    out
}

impl ReferenceBasis {
    pub fn new(kind: BasisKind, order: usize) -> Self {
        Self {
            order,
            kind,
            nodal: None,
        }
    }

    /// Lagrange basis on equispaced nodes, built from the modal one.
    pub fn nodal(kind: BasisKind, order: usize) -> Result<Self> {
        if !matches!(kind, BasisKind::FieldScalar | BasisKind::TestH1) {
            return Err(Error::Config(format!("nodal mode unsupported for {kind:?}")));
        }
        let nodes = if order == 0 {
            vec![[1.0 / 3.0, 1.0 / 3.0]]
        } else {
            equispaced_nodes(order)
        };
        let n = scalar_dofs(order);
        let mut v = DMatrix::zeros(n, n);
        for (i, x) in nodes.iter().enumerate() {
            let (vals, _) = dubiner(order, x[0], x[1]);
            for j in 0..n {
                v[(i, j)] = vals[j];
            }
        }
        let inv = v
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular Vandermonde".into()))?;
        Ok(Self {
            order,
            kind,
            nodal: Some(inv),
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BasisKind::FieldScalar | BasisKind::TestH1 => scalar_dofs(self.order),
            BasisKind::FieldVector | BasisKind::TestHdiv => 2 * scalar_dofs(self.order),
            BasisKind::Trace => self.order + 1,
            BasisKind::Flux => self.order + 1,
        }
    }

    /// Evaluates at a barycentric point: `(λ0, λ1, λ2)` on the triangle, `(1 - t, t)` on an edge.
    pub fn eval(&self, point: &[f64]) -> Result<BasisValues> {
        let tol = 1e-12;
        match self.kind {
            BasisKind::Trace | BasisKind::Flux => {
                if point.len() != 2 || point.iter().any(|&l| l < -tol) || (point[0] + point[1] - 1.0).abs() > tol {
                    return Err(Error::OutsideReference([point[0], *point.get(1).unwrap_or(&f64::NAN)]));
                }
                let t = point[1];
                let h = 1e-7;
                let f = |t: f64| {
                    if self.kind == BasisKind::Trace {
                        trace_basis(self.order, t)
                    } else {
                        flux_basis(self.order, t)
                    }
                };
                let (a, b) = (f(t - h), f(t + h));
                Ok(BasisValues::Line {
                    values: f(t),
                    derivatives: a.iter().zip(&b).map(|(a, b)| (b - a) / (2.0 * h)).collect(),
                })
            }
            _ => {
                if point.len() != 3
                    || point.iter().any(|&l| l < -tol)
                    || (point.iter().sum::<f64>() - 1.0).abs() > tol
                {
                    return Err(Error::OutsideReference([
                        *point.get(1).unwrap_or(&f64::NAN),
                        *point.get(2).unwrap_or(&f64::NAN),
                    ]));
                }
                let (mut vals, mut grads) = dubiner(self.order, point[1], point[2]);
                if let Some(inv) = &self.nodal {
                    let n = vals.len();
                    let mut nv = vec![0.0; n];
                    let mut ng = vec![[0.0; 2]; n];
                    for i in 0..n {
                        for j in 0..n {
                            nv[i] += inv[(j, i)] * vals[j];
                            ng[i][0] += inv[(j, i)] * grads[j][0];
                            ng[i][1] += inv[(j, i)] * grads[j][1];
                        }
                    }
                    vals = nv;
                    grads = ng;
                }
                match self.kind {
                    BasisKind::FieldScalar | BasisKind::TestH1 => Ok(BasisValues::Scalar {
                        values: vals,
                        gradients: grads,
                    }),
                    _ => {
                        let n = vals.len();
                        let mut values = vec![[0.0; 2]; 2 * n];
                        let mut divergence = vec![0.0; 2 * n];
                        for i in 0..n {
                            values[i] = [vals[i], 0.0];
                            values[n + i] = [0.0, vals[i]];
                            divergence[i] = grads[i][0];
                            divergence[n + i] = grads[i][1];
                        }
                        Ok(BasisValues::Vector { values, divergence })
                    }
                }
            }
        }
    }
}

/// Dubiner values and reference derivatives tabulated at the points of a quadrature rule.
/// Matrices are `functions × points`.
#[derive(Debug)]
pub struct ElementTable {
    pub order: usize,
    pub degree: usize,
    pub values: DMatrix<f64>,
    pub d_xi: DMatrix<f64>,
    pub d_eta: DMatrix<f64>,
}

/// Shared tabulation of the order-`order` Dubiner basis on the degree-`degree` rule.
pub fn element_table(order: usize, degree: usize) -> Arc<ElementTable> {
    type Cache = RwLock<HashMap<(usize, usize), Arc<ElementTable>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.read().unwrap().get(&(order, degree)) {
        return t.clone();
    }
    let rule = cached_rule(degree);
    let n = scalar_dofs(order);
    let nq = rule.len();
    let mut values = DMatrix::zeros(n, nq);
    let mut d_xi = DMatrix::zeros(n, nq);
    let mut d_eta = DMatrix::zeros(n, nq);
    for q in 0..nq {
        let [x, y] = rule.xy(q);
        let (v, g) = dubiner(order, x, y);
        for i in 0..n {
            values[(i, q)] = v[i];
            d_xi[(i, q)] = g[i][0];
            d_eta[(i, q)] = g[i][1];
        }
    }
    let table = Arc::new(ElementTable {
        order,
        degree: rule.degree,
        values,
        d_xi,
        d_eta,
    });
    cache.write().unwrap().entry((order, degree)).or_insert(table).clone()
}
