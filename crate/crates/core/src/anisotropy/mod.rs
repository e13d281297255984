//! Optimal element anisotropy from the error representation: an ellipse of fixed area is
//! rotated and stretched to minimize the integral of a nonnegative error surrogate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::approximation::{cached_line_rule, dubiner};
use crate::dpg_core::{ElementGeometry, ErrorRepresentation};
use crate::geometry::{normalize_angle, scalar_dofs, Point, ALPHA};

/// Largest aspect ratio the optimizer may return.
pub const BETA_MAX: f64 = 100.0;

/// Polynomial components `c_i` of the surrogate `q = Σ c_i²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Surrogate {
    /// Terms `(a, b, coef)` of `coef · x^a y^b` in the local frame centered at the barycenter.
    Monomial(Vec<Vec<(u32, u32, f64)>>),
    /// Dubiner coefficients on the element's reference map.
    Dubiner {
        geometry: ElementGeometry,
        order: usize,
        components: Vec<Vec<f64>>,
    },
}

/// Nonnegative error surrogate of one element plus its current density.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalErrorModel {
    pub element: usize,
    pub center: Point,
    pub density: f64,
    pub surrogate: Surrogate,
}

impl LocalErrorModel {
    /// Builds a model from explicit local-frame polynomials.
    pub fn monomial(element: usize, density: f64, components: Vec<Vec<(u32, u32, f64)>>) -> Self {
        Self {
            element,
            center: [0.0, 0.0],
            density,
            surrogate: Surrogate::Monomial(components),
        }
    }

    /// Polynomial degree of `q`.
    pub fn degree(&self) -> usize {
        match &self.surrogate {
            Surrogate::Monomial(c) => {
                2 * c.iter().flatten().map(|t| (t.0 + t.1) as usize).max().unwrap_or(0)
            }
            Surrogate::Dubiner { order, .. } => 2 * order,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.surrogate {
            Surrogate::Monomial(c) => c.iter().flatten().all(|t| t.2 == 0.0),
            Surrogate::Dubiner { components, .. } => components.iter().flatten().all(|c| *c == 0.0),
        }
    }

    /// `q` at a point given relative to the center.
    pub fn eval(&self, y: Point) -> f64 {
        match &self.surrogate {
            Surrogate::Monomial(comps) => comps
                .iter()
                .map(|terms| {
                    terms
                        .iter()
                        .map(|&(a, b, c)| c * y[0].powi(a as i32) * y[1].powi(b as i32))
                        .sum::<f64>()
                        .powi(2)
                })
                .sum(),
            Surrogate::Dubiner {
                geometry,
                order,
                components,
            } => {
                let r = geometry.to_reference([self.center[0] + y[0], self.center[1] + y[1]]);
                let (phi, _) = dubiner(*order, r[0], r[1]);
                components
                    .iter()
                    .map(|c| c.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>().powi(2))
                    .sum()
            }
        }
    }
}

/// Surrogate `q = (ψ_v^hi)² + |ψ_τ^hi|²`, keeping only Dubiner modes of degree above the
/// trial order `p`. The density is that of the element's own ellipse, `d = α/|k|`.
pub fn build_error_model(geometry: &ElementGeometry, element: usize, rep: &ErrorRepresentation, p: usize) -> LocalErrorModel {
    let keep = scalar_dofs(p);
    let strip = |c: &[f64]| {
        let mut v = c.to_vec();
        for x in v.iter_mut().take(keep) {
            *x = 0.0;
        }
        v
    };
    let c = geometry.corners;
    LocalErrorModel {
        element,
        center: [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0],
        density: ALPHA / geometry.area(),
        surrogate: Surrogate::Dubiner {
            geometry: *geometry,
            order: rep.test_order,
            components: vec![strip(rep.v_part()), strip(rep.tau_x()), strip(rep.tau_y())],
        },
    }
}

/// `∫_E q` over the ellipse centered at the barycenter with long axis at angle `θ`,
/// semi-axes `√(β/d)` and `√(1/(βd))`.
pub fn anisotropy_bound(model: &LocalErrorModel, beta: f64, theta: f64) -> f64 {
    let d = model.density;
    let (h1, h2) = ((beta / d).sqrt(), (1.0 / (beta * d)).sqrt());
    let deg = model.degree();
    let radial = cached_line_rule(deg / 2 + 2);
    let nphi = 2 * deg + 4;
    let (s, c) = theta.sin_cos();
    let mut total = 0.0;
    for i in 0..nphi {
        let phi = 2.0 * PI * i as f64 / nphi as f64;
        let (a, b) = (h1 * phi.cos(), h2 * phi.sin());
        let dir = [a * c - b * s, a * s + b * c];
        let mut ring = 0.0;
        for (&rho, &w) in radial.points.iter().zip(&radial.weights) {
            ring += w * rho * model.eval([rho * dir[0], rho * dir[1]]);
        }
        total += ring;
    }
    total * 2.0 * PI / nphi as f64 * h1 * h2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyResult {
    pub beta_star: f64,
    pub theta_star: f64,
    pub bound: f64,
    pub isotropic_bound: f64,
    /// The aspect-ratio cap was reached.
    pub capped: bool,
}

impl AnisotropyResult {
    pub fn isotropic(bound: f64) -> Self {
        Self {
            beta_star: 1.0,
            theta_star: 0.0,
            bound,
            isotropic_bound: bound,
            capped: false,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization on `[a, b]`; returns `(x, f(x))`.
fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best `θ` at fixed `β`: 32 samples on `[0, π)` then golden refinement around the best.
fn search_theta(model: &LocalErrorModel, beta: f64) -> (f64, f64) {
    let n = 32;
    let step = PI / n as f64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..n {
        let th = i as f64 * step;
        let v = anisotropy_bound(model, beta, th);
        if v < best.1 {
            best = (th, v);
        }
    }
    let f = |th: f64| anisotropy_bound(model, beta, th);
    let (th, v) = golden(&f, best.0 - step, best.0 + step, 1e-7);
    if v < best.1 {
        (normalize_angle(th), v)
    } else {
        best
    }
}

/// Best `β ∈ [1, β_max]` at fixed `θ`: coarse scan in `ln β`, then golden refinement.
fn search_beta(model: &LocalErrorModel, theta: f64, beta_max: f64) -> (f64, f64) {
    let lmax = beta_max.ln();
    let n = 24;
    let f = |l: f64| anisotropy_bound(model, l.exp(), theta);
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=n {
        let l = lmax * i as f64 / n as f64;
        let v = f(l);
        if v < best.1 {
            best = (l, v);
        }
    }
    let h = lmax / n as f64;
    let (l, v) = golden(&f, (best.0 - h).max(0.0), (best.0 + h).min(lmax), 1e-9);
    if v < best.1 {
        (l.exp(), v)
    } else {
        (best.0.exp(), best.1)
    }
}

/// Alternating minimization of the bound over `θ` and `β`, starting from the isotropic
/// ellipse. The first `θ` sweep uses a moderate aspect ratio, since the bound does not depend
/// on `θ` at `β = 1`.
pub fn optimize_anisotropy(model: &LocalErrorModel) -> AnisotropyResult {
    optimize_anisotropy_with(model, BETA_MAX)
}

pub fn optimize_anisotropy_with(model: &LocalErrorModel, beta_max: f64) -> AnisotropyResult {
    let iso = anisotropy_bound(model, 1.0, 0.0);
    if model.is_zero() || !(iso > 0.0) {
        return AnisotropyResult::isotropic(iso.max(0.0));
    }
    let mut best = (1.0, 0.0, iso);
    let mut beta = 4f64.min(beta_max);
    for _ in 0..10 {
        let prev = best.2;
        let (theta, v) = search_theta(model, beta);
        if v < best.2 {
            best = (beta, theta, v);
        }
        let (b, v) = search_beta(model, theta, beta_max);
        beta = b;
        if v < best.2 {
            best = (beta, theta, v);
        }
        if (prev - best.2).abs() <= 1e-3 * prev {
            break;
        }
    }
    AnisotropyResult {
        beta_star: best.0,
        theta_star: if best.0 > 1.0 { normalize_angle(best.1) } else { 0.0 },
        bound: best.2,
        isotropic_bound: iso,
        capped: best.0 >= beta_max * (1.0 - 1e-6),
    }
}

/// Per-element optimization; elements with `η_k < 1e-14 max η` stay isotropic.
pub fn optimize_all(models: &[LocalErrorModel], eta: &[f64]) -> Vec<AnisotropyResult> {
    use rayon::prelude::*;
    let max = eta.iter().copied().fold(0.0, f64::max);
    models
        .par_iter()
        .zip(eta.par_iter())
        .map(|(m, &e)| {
            if e < 1e-14 * max || max == 0.0 {
                AnisotropyResult::isotropic(anisotropy_bound(m, 1.0, 0.0))
            } else {
                optimize_anisotropy(m)
            }
        })
        .collect()
}

/// Optional per-element CSV: element id, β*, θ*.
pub fn write_anisotropy_csv(path: impl AsRef<std::path::Path>, results: &[AnisotropyResult]) -> crate::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "element,beta_star,theta_star")?;
    for (k, r) in results.iter().enumerate() {
        writeln!(f, "{k},{:.16e},{:.16e}", r.beta_star, r.theta_star)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
