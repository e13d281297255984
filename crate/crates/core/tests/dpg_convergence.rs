use std::f64::consts::PI;

use hpdpg::approximation::build_layout;
use hpdpg::dpg_core::{compute_errors, solve_global, UltraWeakProblem};
use hpdpg::geometry::{HpMesh, Triangulation};

fn sine() -> UltraWeakProblem {
    UltraWeakProblem::manufactured(
        [0.0, 0.0],
        1.0,
        |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        |x| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        },
        |x| -2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
    )
    .unwrap()
}

fn slope(e: &[f64]) -> f64 {
    (e[0] / e[e.len() - 1]).log2() / (e.len() - 1) as f64
}

#[test]
fn uniform_refinement_rates() {
    let pb = sine();
    for p in 1..=3 {
        let mut l2 = Vec::new();
        let mut energy = Vec::new();
        for n in [4, 8, 16] {
            let m = HpMesh::uniform(Triangulation::unit_square(n).unwrap(), p).unwrap();
            let layout = build_layout(&m, 2).unwrap();
            let sol = solve_global(&m, &pb, &layout).unwrap();
            l2.push(compute_errors(&m, &sol, pb.exact.as_ref().unwrap()).l2);
            energy.push(sol.energy_error());
        }
        let (sl, se) = (slope(&l2), slope(&energy));
        println!("p={p} L2 {l2:?} slope {sl:.3}; energy {energy:?} slope {se:.3}");
        assert!((sl - (p + 1) as f64).abs() <= 0.2, "L2 slope {sl} for p={p}");
        // the √|k| weight in the test norm costs half an order in the residual norm
        assert!(se > p as f64 + 0.4 && se < p as f64 + 0.8, "energy slope {se} for p={p}");
    }
}
