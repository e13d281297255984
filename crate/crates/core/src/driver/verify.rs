use serde::{Deserialize, Serialize};

use crate::anisotropy::{optimize_anisotropy, LocalErrorModel};
use crate::approximation::build_layout;
use crate::dpg_core::{compute_errors, solve_global, UltraWeakProblem};
use crate::error::Result;
use crate::geometry::{complexity_weight, normalize_angle, angle_distance, HpMesh, MetricTensor, Triangulation};
use crate::hp_model::{bisect_const, optimal_density, AdaptMode, ContinuousModel};
use crate::problems::{make_problem, CaseId, CaseParams};
use crate::remesh::{mesh_to_bamg, parse_bamg_mesh, remesh_internal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Quick self-checks of the main invariants, each on a small instance.
pub fn run_checks() -> Vec<Check> {
    vec![
        check("polynomial_exactness", || {
            let prob = UltraWeakProblem::manufactured(
                [1.0, -0.5],
                0.2,
                |x| x[0] * x[0] - x[0] * x[1] + 0.5,
                |x| [2.0 * x[0] - x[1], -x[0]],
                |_| 2.0,
            )?;
            let m = HpMesh::uniform(Triangulation::unit_square(2)?, 2)?;
            let sol = solve_global(&m, &prob, &build_layout(&m, 2)?)?;
            let e = compute_errors(&m, &sol, prob.exact.as_ref().expect("exact"));
            let rel = e.l2 / e.l2_exact;
            let eta = sol.energy_error();
            Ok((rel < 1e-9 && eta < 1e-8, format!("rel L2 {rel:.2e}, eta {eta:.2e}")))
        }),
        check("estimator_identity", || {
            let spec = make_problem(CaseId::BoundaryLayer, &CaseParams::default())?;
            let t = Triangulation::structured((0.0, 1.0), (0.0, 1.0), 8, 4, |_| true, |_, _| 1)?;
            let m = HpMesh::uniform(t, 2)?;
            let sol = solve_global(&m, &spec.problem, &build_layout(&m, 2)?)?;
            let worst = sol
                .representations
                .iter()
                .map(|r| (r.eta_sq_gram - r.eta_sq_residual).abs() / r.eta_sq_gram.abs().max(1e-300))
                .fold(0.0, f64::max);
            Ok((worst <= 1e-12, format!("max rel diff {worst:.2e} on {} elements", m.num_elements())))
        }),
        check("density_constraint", || {
            let n = 64;
            let model = ContinuousModel {
                abar: (0..n).map(|k| 1.0 + (k * 37 % 11) as f64).collect(),
                p: (0..n).map(|k| 1 + k % 6).collect(),
                areas: vec![1.0 / n as f64; n],
                n_target: 2000.0,
                mode: AdaptMode::Energy,
            };
            let d = optimal_density(&model, bisect_const(&model)?);
            let total: f64 = (0..n)
                .map(|k| complexity_weight(model.p[k]) * d.density[k] * model.areas[k])
                .sum();
            let rel = (total / 2000.0 - 1.0).abs();
            Ok((rel <= 5e-3, format!("complexity {total:.3} (rel {rel:.1e})")))
        }),
        check("anisotropy_direction", || {
            let phi: f64 = 0.35;
            let (s, c) = phi.sin_cos();
            // (x cos φ + y sin φ)², a single linear component
            let m = LocalErrorModel::monomial(0, 4.0, vec![vec![(1, 0, c), (0, 1, s)]]);
            let r = optimize_anisotropy(&m);
            let err = angle_distance(r.theta_star, normalize_angle(phi + std::f64::consts::FRAC_PI_2));
            Ok((err < 2f64.to_radians(), format!("theta error {:.3} deg", err.to_degrees())))
        }),
        check("interchange_roundtrip", || {
            let t = Triangulation::lshape(2)?;
            let back = parse_bamg_mesh(&mesh_to_bamg(&t), "memory")?;
            let ok = back.vertices() == t.vertices() && back.triangles() == t.triangles();
            Ok((ok, format!("{} vertices", t.num_vertices())))
        }),
        check("remesh_validity", || {
            let t = Triangulation::unit_square(4)?;
            let m = MetricTensor::new(400.0, 0.0, 100.0)?;
            let out = remesh_internal(&t, &vec![m; t.num_vertices()])?;
            let area = out.mesh.total_area();
            Ok(((area - 1.0).abs() < 1e-12, format!("{} elements, {:.0}% edges in band", out.mesh.num_triangles(), 100.0 * out.in_band)))
        }),
    ]
}
