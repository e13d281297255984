//! Riemannian metric tensors attached to triangles and vertices.
//!
//! An element is identified with its circumscribing ellipse `{x : xᵀ M x = 1}` where every edge
//! vector satisfies `eᵀ M e = C`. For `C = 3` the ellipse area and the triangle area are tied by
//! `|k| = (3√3/4) h1 h2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Point;
use crate::error::{Error, Result};

/// Symmetric 2×2 tensor stored by its three independent entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

/// Geometric reading of a metric: orientation of the long axis, aspect ratio and density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyParams {
    /// Angle of the long ellipse axis, in `[0, π)`.
    pub theta: f64,
    /// `h1 / h2 ≥ 1`.
    pub beta: f64,
    /// `1 / (h1 h2)`.
    pub d: f64,
}

impl AnisotropyParams {
    pub fn new(theta: f64, beta: f64, d: f64) -> Result<Self> {
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(Error::InvalidGeometry(format!("aspect ratio {beta} < 1")));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidGeometry(format!("density {d} not positive")));
        }
        Ok(Self {
            theta: normalize_angle(theta),
            beta,
            d,
        })
    }

    /// Semi-axes `(h1, h2)` of the ellipse.
    pub fn semi_axes(&self) -> (f64, f64) {
        ((self.beta / self.d).sqrt(), (1.0 / (self.beta * self.d)).sqrt())
    }
}

/// Maps an angle onto `[0, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Distance between two orientations, taken modulo π.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

impl MetricTensor {
    pub const IDENTITY: MetricTensor = MetricTensor {
        m11: 1.0,
        m12: 0.0,
        m22: 1.0,
    };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Result<Self> {
        let m = Self { m11, m12, m22 };
        if m.is_spd() {
            Ok(m)
        } else {
            Err(Error::NotSpd(format!("[{m11}, {m12}; {m12}, {m22}]")))
        }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn is_spd(&self) -> bool {
        self.m11.is_finite()
            && self.m12.is_finite()
            && self.m22.is_finite()
            && self.m11 > 0.0
            && self.det() > 0.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            m11: self.m11 * s,
            m12: self.m12 * s,
            m22: self.m22 * s,
        }
    }

    /// `vᵀ M v`.
    pub fn quad(&self, v: Point) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }

    /// Length of `v` measured in this metric.
    pub fn length(&self, v: Point) -> f64 {
        self.quad(v).max(0.0).sqrt()
    }

    /// Eigenvalues in ascending order and the unit eigenvector of the smaller one.
    pub fn eigen(&self) -> ([f64; 2], Point) {
        let half_tr = 0.5 * (self.m11 + self.m22);
        let half_diff = 0.5 * (self.m11 - self.m22);
        let r = half_diff.hypot(self.m12);
        let lo = half_tr - r;
        let hi = half_tr + r;
        let scale = self.m11.abs() + self.m22.abs() + self.m12.abs();
        if r <= 1e-14 * scale {
            return ([lo, hi], [1.0, 0.0]);
        }
        // eigenvector of the smaller eigenvalue; pick the better-conditioned row
        let v = if half_diff <= 0.0 {
            [r - half_diff, -self.m12]
        } else {
            [-self.m12, r + half_diff]
        };
        let n = v[0].hypot(v[1]);
        ([lo, hi], [v[0] / n, v[1] / n])
    }

    /// Builds `R diag(l1, l2) Rᵀ` where `R = [u, u⊥]`.
    pub fn from_eigen(l1: f64, l2: f64, u: Point) -> Self {
        let (c, s) = (u[0], u[1]);
        Self {
            m11: l1 * c * c + l2 * s * s,
            m12: (l1 - l2) * c * s,
            m22: l1 * s * s + l2 * c * c,
        }
    }

    /// Matrix logarithm (symmetric, not necessarily definite).
    pub fn log(&self) -> Result<Self> {
        if !self.is_spd() {
            return Err(Error::NotSpd(format!("{self:?}")));
        }
        let ([l1, l2], u) = self.eigen();
        Ok(Self::from_eigen(l1.ln(), l2.ln(), u))
    }

    /// Matrix exponential of a symmetric tensor.
    pub fn exp(&self) -> Self {
        let ([l1, l2], u) = self.eigen();
        Self::from_eigen(l1.exp(), l2.exp(), u)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            m11: self.m11 + o.m11,
            m12: self.m12 + o.m12,
            m22: self.m22 + o.m22,
        }
    }

    /// Weighted log-Euclidean mean. Weights need not be normalized.
    pub fn log_euclidean_mean(items: &[(f64, MetricTensor)]) -> Result<Self> {
        let total: f64 = items.iter().map(|(w, _)| *w).sum();
        if items.is_empty() || !(total > 0.0) {
            return Err(Error::NotSpd("empty metric average".into()));
        }
        let mut acc = Self {
            m11: 0.0,
            m12: 0.0,
            m22: 0.0,
        };
        for (w, m) in items {
            acc = acc.add(&m.log()?.scaled(*w / total));
        }
        Ok(acc.exp())
    }

    /// Relative Frobenius distance.
    pub fn rel_diff(&self, o: &Self) -> f64 {
        let num = ((self.m11 - o.m11).powi(2)
            + 2.0 * (self.m12 - o.m12).powi(2)
            + (self.m22 - o.m22).powi(2))
        .sqrt();
        let den = (o.m11.powi(2) + 2.0 * o.m12.powi(2) + o.m22.powi(2)).sqrt();
        num / den
    }
}

/// Metric under which all three edges of the triangle have squared length `c`.
pub fn element_metric(tri: [Point; 3], c: f64) -> Result<MetricTensor> {
    if !(c > 0.0) {
        return Err(Error::InvalidGeometry(format!("metric constant {c} must be positive")));
    }
    let e = [
        [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]],
        [tri[2][0] - tri[1][0], tri[2][1] - tri[1][1]],
        [tri[0][0] - tri[2][0], tri[0][1] - tri[2][1]],
    ];
    let area2 = e[0][0] * e[1][1] - e[0][1] * e[1][0];
    let scale: f64 = e.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
    if area2.abs() <= 1e-14 * scale {
        return Err(Error::InvalidGeometry("degenerate triangle".into()));
    }
    // rows: [ex², 2 ex ey, ey²] · (m11, m12, m22) = c
    let a = nalgebra::Matrix3::from_fn(|i, j| match j {
        0 => e[i][0] * e[i][0],
        1 => 2.0 * e[i][0] * e[i][1],
        _ => e[i][1] * e[i][1],
    });
    let rhs = nalgebra::Vector3::repeat(c);
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidGeometry("singular edge system".into()))?;
    MetricTensor::new(sol[0], sol[1], sol[2])
}

/// Spectral reading of a metric. `α1 = 1/h1²` is the smaller eigenvalue and `θ` is the
/// direction of its eigenvector; isotropic metrics report `θ = 0`.
pub fn metric_decompose(m: &MetricTensor) -> Result<AnisotropyParams> {
    if !m.is_spd() {
        return Err(Error::NotSpd(format!("{m:?}")));
    }
    let ([a1, a2], u) = m.eigen();
    let h1 = 1.0 / a1.sqrt();
    let h2 = 1.0 / a2.sqrt();
    let beta = (h1 / h2).max(1.0);
    let theta = if beta - 1.0 <= 1e-13 {
        0.0
    } else {
        normalize_angle(u[1].atan2(u[0]))
    };
    Ok(AnisotropyParams {
        theta,
        beta,
        d: 1.0 / (h1 * h2),
    })
}

/// Inverse of [`metric_decompose`].
pub fn metric_compose(p: &AnisotropyParams) -> MetricTensor {
    let (h1, h2) = p.semi_axes();
    MetricTensor::from_eigen(
        1.0 / (h1 * h1),
        1.0 / (h2 * h2),
        [p.theta.cos(), p.theta.sin()],
    )
}
