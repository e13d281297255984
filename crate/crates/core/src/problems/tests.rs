use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Fourth-order central differences of `u` for `β·∇u − ε∇²u`.
fn fd_operator(u: &dyn Fn(Point) -> f64, x: Point, beta: Point, eps: f64, h: f64) -> f64 {
    let d1 = |dir: usize| {
        let s = |k: f64| {
            let mut y = x;
            y[dir] += k * h;
            u(y)
        };
        (
            (-s(2.0) + 8.0 * s(1.0) - 8.0 * s(-1.0) + s(-2.0)) / (12.0 * h),
            (-s(2.0) + 16.0 * s(1.0) - 30.0 * s(0.0) + 16.0 * s(-1.0) - s(-2.0)) / (12.0 * h * h),
        )
    };
    let (gx, hx) = d1(0);
    let (gy, hy) = d1(1);
    beta[0] * gx + beta[1] * gy - eps * (hx + hy)
}

fn check_source(spec: &ProblemSpec, h: f64, lo: f64, hi: f64) {
    let exact = spec.problem.exact.clone().unwrap();
    let u = move |x: Point| exact(x).0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
        let s = (spec.problem.source)(x);
        let fd = fd_operator(&u, x, spec.problem.beta, spec.problem.epsilon, h);
        assert!((fd - s).abs() <= 1e-4 * s.abs().max(1.0), "{x:?}: {fd} vs {s}");
    }
}

#[test]
fn boundary_layer_source_and_boundary() {
    let spec = make_problem(CaseId::BoundaryLayer, &CaseParams::default()).unwrap();
    check_source(&spec, 1e-3, 0.02, 0.98);
    let exact = spec.problem.exact.clone().unwrap();
    for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
        for x in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
            assert!(exact(x).0.abs() < 1e-14, "{x:?}");
        }
    }
    // small ε does not overflow
    let (f, _, _) = layer_profile(0.5, 1e-4);
    assert!((f - 0.5).abs() < 1e-12);
}

#[test]
fn atan_source_and_target() {
    let spec = make_problem(CaseId::AtanFlux, &CaseParams::default()).unwrap();
    check_source(&spec, 1e-4, 0.02, 0.98);
    // closed-form ∫f against adaptive quadrature
    let num = adaptive_integral(&|t| atan_profile(t, 50.0).0, 0.0, 1.0, 1e-15);
    assert_relative_eq!(num, atan_profile_integral(50.0), max_relative = 1e-12);
    let num_target = atan_profile(1.0, 50.0).1 * num;
    assert_relative_eq!(spec.exact_target.unwrap(), num_target, max_relative = 1e-12);
}

#[test]
fn gaussian_peak_weights_and_target() {
    let spec = make_problem(CaseId::GaussianPeak, &CaseParams::default()).unwrap();
    let t = spec.target.clone().unwrap();
    let w = t.volume.clone().unwrap();
    assert_eq!(w([0.99, 0.5]), 1.0);
    assert_relative_eq!(w([0.99, 0.6]), (-10.0f64).exp(), max_relative = 1e-12);
    // oracle: composite 2D Gauss over a fine tensor grid
    let exact = spec.problem.exact.clone().unwrap();
    let rule = crate::approximation::LineRule::gauss(10);
    let n = 200;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for (tx, wx) in rule.points.iter().zip(&rule.weights) {
                for (ty, wy) in rule.points.iter().zip(&rule.weights) {
                    let x = [(i as f64 + tx) / n as f64, (j as f64 + ty) / n as f64];
                    total += wx * wy * w(x) * exact(x).0;
                }
            }
        }
    }
    total /= (n * n) as f64;
    assert_relative_eq!(spec.exact_target.unwrap(), total, max_relative = 1e-11);
}

#[test]
fn lshape_values() {
    let spec = make_problem(CaseId::Lshape, &CaseParams::default()).unwrap();
    let exact = spec.problem.exact.clone().unwrap();
    assert_relative_eq!(exact([0.0, 1.0]).0, 3f64.sqrt() / 2.0, max_relative = 1e-14);
    // harmonic: zero source, finite differences of u vanish away from the corner
    let u = move |x: Point| exact(x).0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = [rng.random_range(-0.9..-0.2), rng.random_range(-0.9..0.9)];
        assert!(fd_operator(&u, x, [0.0, 0.0], 1.0, 1e-3).abs() < 1e-4);
        assert_eq!((spec.problem.source)(x), 0.0);
    }
    // gradient against finite differences
    let exact = spec.problem.exact.clone().unwrap();
    let x = [-0.4, 0.3];
    let h = 1e-6;
    let gx = (exact([x[0] + h, x[1]]).0 - exact([x[0] - h, x[1]]).0) / (2.0 * h);
    let gy = (exact([x[0], x[1] + h]).0 - exact([x[0], x[1] - h]).0) / (2.0 * h);
    let g = exact(x).1;
    assert!((gx - g[0]).abs() < 1e-7 && (gy - g[1]).abs() < 1e-7);
}

#[test]
fn unknown_case_is_an_error() {
    assert!(matches!(CaseId::parse("nope"), Err(Error::UnknownCase(_))));
    assert_eq!(CaseId::parse("lshape").unwrap(), CaseId::Lshape);
}
