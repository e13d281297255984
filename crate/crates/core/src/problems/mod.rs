//! Benchmark problems: boundary layer, Gaussian-peak target, inverse-tangent flux target and
//! the L-shaped domain.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dpg_core::{BoundaryFn, ExactFn, ScalarFn, UltraWeakProblem};
use crate::dpg_star::TargetFunctional;
use crate::error::{Error, Result};
use crate::geometry::{Point, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    BoundaryLayer,
    GaussianPeak,
    AtanFlux,
    Lshape,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "boundary_layer" => Ok(Self::BoundaryLayer),
            "gaussian_peak" => Ok(Self::GaussianPeak),
            "atan_flux" => Ok(Self::AtanFlux),
            "lshape" => Ok(Self::Lshape),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BoundaryLayer => "boundary_layer",
            Self::GaussianPeak => "gaussian_peak",
            Self::AtanFlux => "atan_flux",
            Self::Lshape => "lshape",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    UnitSquare,
    Lshape,
}

impl Domain {
    /// Structured mesh with `n` cells per unit length.
    pub fn mesh(&self, n: usize) -> Result<Triangulation> {
        match self {
            Domain::UnitSquare => Triangulation::unit_square(n),
            Domain::Lshape => Triangulation::lshape(n),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::Lshape => 3.0,
        }
    }

    /// Elements of [`mesh`](Self::mesh) as a function of `n`.
    pub fn elements(&self, n: usize) -> usize {
        match self {
            Domain::UnitSquare => 2 * n * n,
            Domain::Lshape => 6 * n * n,
        }
    }
}

/// Optional overrides of the case defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub center: Option<Point>,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub case: CaseId,
    pub domain: Domain,
    pub problem: UltraWeakProblem,
    pub target: Option<TargetFunctional>,
    /// `J(u)` of the exact solution when a target is present.
    pub exact_target: Option<f64>,
    pub epsilon: f64,
    pub alpha: Option<f64>,
}

/// One-dimensional boundary-layer profile `t + (e^{t/ε} − 1)/(1 − e^{1/ε})`, written to
/// avoid overflow for small `ε`. Returns value, first and second derivative.
pub fn layer_profile(t: f64, eps: f64) -> (f64, f64, f64) {
    let d = -(-1.0 / eps).exp_m1(); // 1 − e^{−1/ε}
    let a = ((t - 1.0) / eps).exp();
    let b = (-1.0 / eps).exp();
    let f = t - (a - b) / d;
    let f1 = 1.0 - a / (eps * d);
    let f2 = -a / (eps * eps * d);
    (f, f1, f2)
}

/// `atan(α(t − 1/3)) + atan(α(2/3 − t))` with first and second derivatives.
pub fn atan_profile(t: f64, alpha: f64) -> (f64, f64, f64) {
    let (a, b) = (t - 1.0 / 3.0, 2.0 / 3.0 - t);
    let (da, db) = (1.0 + (alpha * a).powi(2), 1.0 + (alpha * b).powi(2));
    let f = (alpha * a).atan() + (alpha * b).atan();
    let f1 = alpha / da - alpha / db;
    let f2 = -2.0 * alpha.powi(3) * a / (da * da) - 2.0 * alpha.powi(3) * b / (db * db);
    (f, f1, f2)
}

/// `∫_0^1 atan_profile`, in closed form.
pub fn atan_profile_integral(alpha: f64) -> f64 {
    // ∫ atan(α(t − c)) dt = (t − c) atan(α(t − c)) − ln(1 + α²(t − c)²)/(2α)
    let prim = |s: f64| s * (alpha * s).atan() - (1.0 + (alpha * s).powi(2)).ln() / (2.0 * alpha);
    let first = prim(1.0 - 1.0 / 3.0) - prim(-1.0 / 3.0);
    // atan(α(2/3 − t)) = −atan(α(t − 2/3))
    let second = -(prim(1.0 - 2.0 / 3.0) - prim(-2.0 / 3.0));
    first + second
}

/// Adaptive Gauss–Legendre integration of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &crate::approximation::LineRule) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| w * f(a + (b - a) * t))
            .sum::<f64>()
            * (b - a)
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize, rule: &crate::approximation::LineRule) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gauss(f, a, m, rule), gauss(f, m, b, rule));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        rec(f, a, m, l, 0.5 * tol, depth - 1, rule) + rec(f, m, b, r, 0.5 * tol, depth - 1, rule)
    }
    let rule = crate::approximation::LineRule::gauss(20);
    let whole = gauss(f, a, b, &rule);
    rec(f, a, b, whole, tol, 40, &rule)
}

fn unit_square_tag_right(tag: u32) -> bool {
    tag == 2
}

pub fn make_problem(case: CaseId, params: &CaseParams) -> Result<ProblemSpec> {
    match case {
        CaseId::BoundaryLayer | CaseId::GaussianPeak => {
            let default_eps = if case == CaseId::BoundaryLayer { 0.1 } else { 0.005 };
            let eps = params.epsilon.unwrap_or(default_eps);
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
            }
            let exact: ExactFn = Arc::new(move |x: Point| {
                let (fx, dfx, _) = layer_profile(x[0], eps);
                let (fy, dfy, _) = layer_profile(x[1], eps);
                (fx * fy, [dfx * fy, fx * dfy])
            });
            let source: ScalarFn = Arc::new(move |x: Point| {
                let (fx, dfx, ddfx) = layer_profile(x[0], eps);
                let (fy, dfy, ddfy) = layer_profile(x[1], eps);
                dfx * fy + fx * dfy - eps * (ddfx * fy + fx * ddfy)
            });
            let dirichlet: BoundaryFn = Arc::new(|_, _| 0.0);
            let problem = UltraWeakProblem::new([1.0, 1.0], eps, source, dirichlet)?.with_exact(exact);
            let (target, exact_target, alpha) = if case == CaseId::GaussianPeak {
                let alpha = params.alpha.unwrap_or(1000.0);
                let c = params.center.unwrap_or([0.99, 0.5]);
                let weight: ScalarFn = Arc::new(move |x: Point| {
                    (-alpha * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))).exp()
                });
                let jx = adaptive_integral(
                    &|t| (-alpha * (t - c[0]).powi(2)).exp() * layer_profile(t, eps).0,
                    0.0,
                    1.0,
                    1e-17,
                );
                let jy = adaptive_integral(
                    &|t| (-alpha * (t - c[1]).powi(2)).exp() * layer_profile(t, eps).0,
                    0.0,
                    1.0,
                    1e-17,
                );
                (Some(TargetFunctional::volume(weight)), Some(jx * jy), Some(alpha))
            } else {
                (None, None, None)
            };
            Ok(ProblemSpec {
                case,
                domain: Domain::UnitSquare,
                problem,
                target,
                exact_target,
                epsilon: eps,
                alpha,
            })
        }
        CaseId::AtanFlux => {
            let eps = params.epsilon.unwrap_or(0.01);
            let alpha = params.alpha.unwrap_or(50.0);
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
            }
            let u = move |x: Point| atan_profile(x[0], alpha).0 * atan_profile(x[1], alpha).0;
            let exact: ExactFn = Arc::new(move |x: Point| {
                let (fx, dfx, _) = atan_profile(x[0], alpha);
                let (fy, dfy, _) = atan_profile(x[1], alpha);
                (fx * fy, [dfx * fy, fx * dfy])
            });
            let source: ScalarFn = Arc::new(move |x: Point| {
                let (fx, dfx, ddfx) = atan_profile(x[0], alpha);
                let (fy, dfy, ddfy) = atan_profile(x[1], alpha);
                dfx * fy + fx * dfy - eps * (ddfx * fy + fx * ddfy)
            });
            let dirichlet: BoundaryFn = Arc::new(move |x, _| u(x));
            let problem = UltraWeakProblem::new([1.0, 1.0], eps, source, dirichlet)?.with_exact(exact);
            let weight: BoundaryFn =
                Arc::new(|_, tag| if unit_square_tag_right(tag) { 1.0 } else { 0.0 });
            // ∇u·n on x = 1 is f'(1) f(y)
            let exact_target = atan_profile(1.0, alpha).1 * atan_profile_integral(alpha);
            Ok(ProblemSpec {
                case,
                domain: Domain::UnitSquare,
                problem,
                target: Some(TargetFunctional::boundary_flux(weight)),
                exact_target: Some(exact_target),
                epsilon: eps,
                alpha: Some(alpha),
            })
        }
        CaseId::Lshape => {
            let exact: ExactFn = Arc::new(lshape_exact);
            let dirichlet: BoundaryFn = Arc::new(|x, _| lshape_exact(x).0);
            // r^{2/3} sin(2θ/3) is harmonic
            let problem = UltraWeakProblem::poisson(Arc::new(|_| 0.0), dirichlet).with_exact(exact);
            Ok(ProblemSpec {
                case,
                domain: Domain::Lshape,
                problem,
                target: None,
                exact_target: None,
                epsilon: 1.0,
                alpha: None,
            })
        }
    }
}

/// `r^{2/3} sin(2θ/3)` with `θ ∈ [0, 2π)`, and its gradient (zero at the origin by convention).
pub fn lshape_exact(x: Point) -> (f64, Point) {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let mut th = x[1].atan2(x[0]);
    if th < 0.0 {
        th += 2.0 * PI;
    }
    let u = r.powf(2.0 / 3.0) * (2.0 * th / 3.0).sin();
    // ∂u/∂r = (2/3) r^{-1/3} sin, (1/r) ∂u/∂θ = (2/3) r^{-1/3} cos
    let a = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
    let (s, c) = (2.0 * th / 3.0).sin_cos();
    let (st, ct) = th.sin_cos();
    let grad = [a * (s * ct - c * st), a * (s * st + c * ct)];
    (u, grad)
}

#[cfg(test)]
mod tests;
