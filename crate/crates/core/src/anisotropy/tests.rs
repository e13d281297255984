use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::approximation::cached_rule;
use crate::geometry::angle_distance;

fn directional(phi: f64, power: u32) -> Vec<Vec<(u32, u32, f64)>> {
    // (x cos φ + y sin φ)^power, expanded
    let (s, c) = phi.sin_cos();
    let mut binom = 1.0;
    let mut terms = Vec::new();
    for b in 0..=power {
        terms.push((power - b, b, binom * c.powi((power - b) as i32) * s.powi(b as i32)));
        binom = binom * (power - b) as f64 / (b + 1) as f64;
    }
    vec![terms]
}

#[test]
fn constant_integrand_gives_area() {
    let m = LocalErrorModel::monomial(0, 2.0, vec![vec![(0, 0, 1.0)]]);
    for &(b, t) in &[(1.0, 0.0), (7.0, 0.3), (100.0, 2.9)] {
        assert_relative_eq!(anisotropy_bound(&m, b, t), PI / 2.0, max_relative = 1e-13);
    }
}

#[test]
fn quadratic_along_long_axis() {
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 0, 1.0)]]);
    for &b in &[1.0, 2.5, 10.0, 80.0] {
        assert_relative_eq!(anisotropy_bound(&m, b, 0.0), PI / 4.0 * b, max_relative = 1e-12);
        assert_relative_eq!(anisotropy_bound(&m, b, PI / 2.0), PI / 4.0 / b, max_relative = 1e-12);
    }
}

#[test]
fn rotation_shifts_theta() {
    let base = LocalErrorModel::monomial(0, 3.0, directional(0.0, 3));
    let phi = 0.7;
    let rotated = LocalErrorModel::monomial(0, 3.0, directional(phi, 3));
    for &(b, t) in &[(1.0, 0.0), (4.0, 0.2), (30.0, 1.3)] {
        assert_relative_eq!(
            anisotropy_bound(&rotated, b, t + phi),
            anisotropy_bound(&base, b, t),
            max_relative = 1e-11
        );
    }
}

#[test]
fn zero_model_is_isotropic() {
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 1, 0.0)]]);
    let r = optimize_anisotropy(&m);
    assert_eq!((r.beta_star, r.theta_star, r.bound), (1.0, 0.0, 0.0));
}

#[test]
fn radial_error_stays_isotropic() {
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 0, 1.0)], vec![(0, 1, 1.0)]]);
    let r = optimize_anisotropy(&m);
    assert_relative_eq!(r.beta_star, 1.0, epsilon = 1e-6);
    assert!(!r.capped);
}

fn grid_minimum(m: &LocalErrorModel) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..180 {
        let th = i as f64 * PI / 180.0;
        for j in 0..50 {
            let b = 1.0 + 99.0 * j as f64 / 49.0;
            let v = anisotropy_bound(m, b, th);
            if v < best.2 {
                best = (b, th, v);
            }
        }
    }
    best
}

#[test]
fn x_squared_puts_long_axis_along_y() {
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 0, 1.0)]]);
    let r = optimize_anisotropy(&m);
    assert!(angle_distance(r.theta_star, PI / 2.0) < 1e-4, "{r:?}");
    assert!(r.capped);
    let (_, _, grid) = grid_minimum(&m);
    assert!(r.bound <= 1.01 * grid);
    assert!(r.bound <= r.isotropic_bound);
}

#[test]
fn mixed_error_finds_interior_beta() {
    // q = x² + 0.09 y⁴: stretching along y eventually costs more than it saves
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 0, 1.0)], vec![(0, 2, 0.3)]]);
    let r = optimize_anisotropy(&m);
    let (gb, _, grid) = grid_minimum(&m);
    assert!(!r.capped && r.beta_star > 1.0, "{r:?}");
    assert!(r.bound <= grid * (1.0 + 1e-9), "{} vs {}", r.bound, grid);
    assert!((r.beta_star - gb).abs() < 2.5, "{} vs {gb}", r.beta_star);
}

#[test]
fn error_model_keeps_enriched_modes() {
    let geo = ElementGeometry::from_corners([[0.1, 0.2], [0.6, 0.3], [0.2, 0.9]]);
    let center = [0.3, 1.4 / 3.0];
    let order = 3;
    let t = scalar_dofs(order);
    // coefficients of f(x) = (x - x_c) in the orthonormal basis, f is affine in the reference
    let rule = cached_rule(2 * order);
    let mut coeffs = vec![0.0; 3 * t];
    for i in 0..rule.len() {
        let r = rule.xy(i);
        let x = geo.to_physical(r);
        let (phi, _) = dubiner(order, r[0], r[1]);
        for (j, c) in coeffs.iter_mut().take(t).enumerate() {
            *c += rule.weights[i] * (x[0] - center[0]) * phi[j];
        }
    }
    let rep = ErrorRepresentation {
        element: 0,
        test_order: order,
        coefficients: coeffs,
        eta_sq_gram: 0.0,
        eta_sq_residual: 0.0,
    };
    let hi0 = build_error_model(&geo, 0, &rep, 0);
    let hi1 = build_error_model(&geo, 0, &rep, 1);
    assert!(hi1.is_zero() || (0..3).all(|i| hi1.eval([0.01 * i as f64, 0.02]).abs() < 1e-24));
    for y in [[0.0, 0.0], [0.05, -0.1], [-0.2, 0.13]] {
        assert_relative_eq!(hi0.eval(y), y[0] * y[0], epsilon = 1e-13);
    }
    assert_relative_eq!(hi0.density * geo.area(), ALPHA, max_relative = 1e-14);
}

#[test]
fn skip_small_indicators() {
    let m = LocalErrorModel::monomial(0, 1.0, vec![vec![(1, 0, 1.0)]]);
    let res = optimize_all(&[m.clone(), m], &[1.0, 1e-16]);
    assert!(res[0].beta_star > 1.0);
    assert_eq!(res[1].beta_star, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn directional_error_gives_perpendicular_axis(phi in 0.0..PI, p in 1u32..4) {
        let m = LocalErrorModel::monomial(0, 5.0, directional(phi, p + 1));
        let r = optimize_anisotropy(&m);
        let target = normalize_angle(phi + PI / 2.0);
        prop_assert!(angle_distance(r.theta_star, target) < 2f64.to_radians(), "{:?} vs {}", r, target);
        prop_assert!(r.bound <= r.isotropic_bound + 1e-12);
    }

    #[test]
    fn bound_never_worse_than_isotropic(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64) {
        let m = LocalErrorModel::monomial(0, 2.0, vec![vec![(2, 0, a), (1, 1, b), (0, 2, c)], vec![(1, 0, 1.0)]]);
        let r = optimize_anisotropy(&m);
        prop_assert!(r.bound <= r.isotropic_bound + 1e-12);
        prop_assert!(r.beta_star >= 1.0 && r.beta_star <= BETA_MAX);
        prop_assert!((0.0..PI).contains(&r.theta_star));
    }
}
