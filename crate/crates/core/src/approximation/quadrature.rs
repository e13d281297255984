//! Gauss rules on the unit interval and collapsed (Duffy) rules on the reference triangle
//! `(0,0), (1,0), (0,1)`.

use std::sync::{Arc, OnceLock, RwLock};
use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_TRIANGLE_DEGREE: usize = 40;

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl LineRule {
    /// `n`-point Gauss–Legendre, exact for degree `2n - 1`.
    pub fn gauss(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            // map [-1, 1] → [0, 1]
            points[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { points, weights }
    }

    /// Rule exact for polynomials up to `degree` on `[0, 1]`.
    pub fn for_degree(degree: usize) -> Self {
        Self::gauss(degree / 2 + 1)
    }
}

/// Quadrature on the reference triangle; weights sum to `1/2`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub degree: usize,
    /// Barycentric coordinates `(λ0, λ1, λ2)`; the Cartesian point is `(λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Cartesian reference coordinates of point `i`.
    pub fn xy(&self, i: usize) -> [f64; 2] {
        [self.points[i][1], self.points[i][2]]
    }
}

/// Conical product rule exact for all `x^a y^b`, `a + b ≤ degree`, with positive weights.
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    // x = s (1 - t), y = t, Jacobian (1 - t): the t-integrand has degree `degree + 1`
    let rs = LineRule::for_degree(degree);
    let rt = LineRule::for_degree(degree + 1);
    let mut points = Vec::with_capacity(rs.points.len() * rt.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (t, wt) in rt.points.iter().zip(&rt.weights) {
        for (s, ws) in rs.points.iter().zip(&rs.weights) {
            let x = s * (1.0 - t);
            let y = *t;
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

/// Shared `n`-point Gauss rule on `[0, 1]`.
pub fn cached_line_rule(n: usize) -> Arc<LineRule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<LineRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.read().unwrap().get(&n) {
        return r.clone();
    }
    let rule = Arc::new(LineRule::gauss(n.max(1)));
    cache.write().unwrap().entry(n).or_insert(rule).clone()
}

/// Shared, lazily built rule for `degree` (clamped to the supported range).
pub fn cached_rule(degree: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let degree = degree.clamp(1, MAX_TRIANGLE_DEGREE);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.read().unwrap().get(&degree) {
        return r.clone();
    }
    let rule = Arc::new(quadrature_rule(degree).expect("degree in range"));
    cache.write().unwrap().entry(degree).or_insert(rule).clone()
}
