//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL` line; a failing
//! criterion does not abort the others. Runs without the libtest harness so the report is
//! always printed.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime};

use hpdpg::anisotropy::{anisotropy_bound, optimize_anisotropy, LocalErrorModel, BETA_MAX};
use hpdpg::approximation::build_layout;
use hpdpg::driver::{exp_fit, run_adaptation, AdaptConfig, ConvergenceRecord};
use hpdpg::dpg_core::{compute_errors, solve_global, UltraWeakProblem};
use hpdpg::geometry::{angle_distance, complexity_weight, normalize_angle, HpMesh, Triangulation, ALPHA};
use hpdpg::hp_model::{bisect_const, optimal_density, AdaptMode, ContinuousModel};
use hpdpg::problems::{make_problem, CaseId, CaseParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, name: &str, passed: bool, detail: String) {
        let line = format!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((passed, line));
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn run(cfg: AdaptConfig, dir: &Path) -> Vec<ConvergenceRecord> {
    let cfg = AdaptConfig {
        out_dir: dir.to_path_buf(),
        ..cfg
    };
    run_adaptation(&cfg).expect("adaptation run")
}

fn config(pairs: &[(&str, &str)]) -> AdaptConfig {
    let mut cfg = AdaptConfig::default();
    for (k, v) in pairs {
        cfg.set(k, v).expect("config key");
    }
    cfg
}

// Sum of c·x^i·y^j over all i + j ≤ p, with fixed pseudo-random coefficients.
fn polynomial(p: usize) -> UltraWeakProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
    let terms: Vec<(i32, i32, f64)> = (0..=p as i32)
        .flat_map(|i| (0..=p as i32 - i).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.random_range(-1.0..1.0)))
        .collect();
    let pw = |x: f64, k: i32| if k < 0 { 0.0 } else { x.powi(k) };
    let (t0, t1, t2) = (terms.clone(), terms.clone(), terms);
    UltraWeakProblem::manufactured(
        [1.0, -0.5],
        0.2,
        move |x| t0.iter().map(|&(i, j, c)| c * pw(x[0], i) * pw(x[1], j)).sum(),
        move |x| {
            t1.iter().fold([0.0, 0.0], |g, &(i, j, c)| {
                [
                    g[0] + c * i as f64 * pw(x[0], i - 1) * pw(x[1], j),
                    g[1] + c * j as f64 * pw(x[0], i) * pw(x[1], j - 1),
                ]
            })
        },
        move |x| {
            t2.iter()
                .map(|&(i, j, c)| {
                    c * ((i * (i - 1)) as f64 * pw(x[0], i - 2) * pw(x[1], j)
                        + (j * (j - 1)) as f64 * pw(x[0], i) * pw(x[1], j - 2))
                })
                .sum()
        },
    )
    .unwrap()
}

fn exactness(rep: &mut Report) {
    let start = Instant::now();
    let (mut worst_l2, mut worst_eta) = (0.0f64, 0.0f64);
    for p in 1..=4 {
        let prob = polynomial(p);
        for n in [1, 2, 4, 8] {
            let m = HpMesh::uniform(Triangulation::unit_square(n).unwrap(), p).unwrap();
            let sol = solve_global(&m, &prob, &build_layout(&m, 2).unwrap()).unwrap();
            let e = compute_errors(&m, &sol, prob.exact.as_ref().unwrap());
            worst_l2 = worst_l2.max(e.l2 / e.l2_exact);
            worst_eta = worst_eta.max(sol.energy_error());
        }
    }
    let t = secs(start.elapsed());
    rep.record(
        "exactness",
        worst_l2 < 1e-9 && worst_eta < 1e-8 && t < 30.0,
        format!("max rel L2 {worst_l2:.2e} (< 1e-9), max eta {worst_eta:.2e} (< 1e-8), {t:.1} s (< 30 s)"),
    );
}

fn a_priori_rates(rep: &mut Report) {
    let start = Instant::now();
    let prob = UltraWeakProblem::manufactured(
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
    .unwrap();
    let slope = |e: &[f64]| (e[0] / e[2]).log2() / 2.0;
    let mut ok = true;
    let mut detail = Vec::new();
    for p in 1..=3usize {
        let (mut l2, mut energy) = (Vec::new(), Vec::new());
        for n in [4, 8, 16] {
            let m = HpMesh::uniform(Triangulation::unit_square(n).unwrap(), p).unwrap();
            let sol = solve_global(&m, &prob, &build_layout(&m, 2).unwrap()).unwrap();
            l2.push(compute_errors(&m, &sol, prob.exact.as_ref().unwrap()).l2);
            energy.push(sol.energy_error());
        }
        let (sl, se) = (slope(&l2), slope(&energy));
        let target = (p + 1) as f64;
        ok &= (sl - target).abs() <= 0.2 && (se - target).abs() <= 0.3;
        detail.push(format!("p={p} L2 {sl:.2} energy {se:.2}"));
    }
    let t = secs(start.elapsed());
    ok &= t < 120.0;
    rep.record(
        "a_priori_rates",
        ok,
        format!("{} (targets p+1 ± 0.2 / ± 0.3), {t:.1} s (< 120 s)", detail.join(", ")),
    );
}

fn estimator_identity(rep: &mut Report) {
    let spec = make_problem(CaseId::BoundaryLayer, &CaseParams::default()).unwrap();
    let t = Triangulation::structured((0.0, 1.0), (0.0, 1.0), 8, 4, |_| true, |_, _| 1).unwrap();
    let m = HpMesh::uniform(t, 2).unwrap();
    let sol = solve_global(&m, &spec.problem, &build_layout(&m, 2).unwrap()).unwrap();
    let worst = sol
        .representations
        .iter()
        .map(|r| (r.eta_sq_gram - r.eta_sq_residual).abs() / r.eta_sq_gram.abs().max(1e-300))
        .fold(0.0, f64::max);
    rep.record(
        "estimator_identity",
        m.num_elements() == 64 && worst <= 1e-12,
        format!("max rel diff {worst:.2e} (<= 1e-12) on {} elements", m.num_elements()),
    );
}

fn orders_dropped(first: f64, best: f64) -> f64 {
    (first / best).log10()
}

fn lshape(rep: &mut Report, dir: &Path) {
    let start = Instant::now();
    let recs = run(config(&[("case", "lshape"), ("fixed_complexity", "3072"), ("max_adapt", "10")]), dir);
    let t = secs(start.elapsed());
    let l2: Vec<f64> = recs.iter().map(|r| r.l2_error.unwrap()).collect();
    let en: Vec<f64> = recs.iter().map(|r| r.energy_error).collect();
    let last = recs.len() - 1;
    let d_l2 = orders_dropped(l2[0], l2[last]);
    let d_en = orders_dropped(en[0], en[last]);
    let p_avg: Vec<f64> = recs.iter().map(|r| r.p_avg).collect();
    let monotone = p_avg.windows(2).skip(2).all(|w| w[1] >= w[0]);
    rep.record(
        "lshape_hp",
        recs.len() == 11 && d_l2 >= 2.0 && d_en >= 2.0 && monotone && t < 600.0,
        format!(
            "L2 drop {d_l2:.2} orders, energy drop {d_en:.2} orders (>= 2), p_avg {:?} monotone after 2: {monotone}, {t:.0} s (< 600 s)",
            p_avg.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>()
        ),
    );
}

fn boundary_layer(n: usize, max_adapt: usize, dir: &Path) -> Vec<ConvergenceRecord> {
    let (n, max_adapt) = (n.to_string(), max_adapt.to_string());
    run(
        config(&[
            ("case", "boundary_layer"),
            ("epsilon", "0.1"),
            ("growth", "1.3"),
            ("max_adapt", &max_adapt),
            ("initial_n", &n),
        ]),
        dir,
    )
}

fn exponential(rep: &mut Report, recs: &[ConvergenceRecord], t: f64) {
    let fit = exp_fit(recs).unwrap();
    rep.record(
        "exponential_convergence",
        fit.b > 0.0 && fit.r_squared > 0.9 && t < 600.0,
        format!("b {:.3} (> 0), R² {:.3} (> 0.9), {t:.0} s (< 600 s)", fit.b, fit.r_squared),
    );
}

fn goal(rep: &mut Report, dir: &Path) {
    let start = Instant::now();
    let recs = run(
        config(&[
            ("case", "gaussian_peak"),
            ("mode", "goal"),
            ("fixed_complexity", "3072"),
            ("max_adapt", "10"),
        ]),
        dir,
    );
    let t = secs(start.elapsed());
    let errs: Vec<f64> = recs.iter().map(|r| r.goal_error.unwrap()).collect();
    let best = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.record(
        "goal_mode",
        best <= 1e-8 && t < 600.0,
        format!(
            "goal errors {:?}, best {best:.2e} (<= 1e-8), {t:.0} s (< 600 s)",
            errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>()
        ),
    );
}

fn density(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 64;
        let areas: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.8) / n as f64).collect();
        let model = ContinuousModel {
            abar: (0..n).map(|_| 10f64.powf(rng.random_range(-6.0..2.0))).collect(),
            p: (0..n).map(|_| rng.random_range(1..=8)).collect(),
            areas,
            n_target: rng.random_range(500.0..20000.0),
            mode: AdaptMode::Energy,
        };
        let d = optimal_density(&model, bisect_const(&model).unwrap());
        worst = worst.max((d.complexity / model.n_target - 1.0).abs());
    }
    // uniform Ā and p: d = N/(w|Ω|) and const = (p+1) Ā α^{p+1} / (w d^{p+2})
    let (n, p, abar, target) = (64, 3usize, 0.25, 3000.0);
    let model = ContinuousModel {
        abar: vec![abar; n],
        p: vec![p; n],
        areas: vec![1.0 / n as f64; n],
        n_target: target,
        mode: AdaptMode::Energy,
    };
    let c = bisect_const(&model).unwrap();
    let w = complexity_weight(p);
    let d_exact = target / w;
    let c_exact = (p as f64 + 1.0) * abar * ALPHA.powi(p as i32 + 1) / (w * d_exact.powi(p as i32 + 2));
    let d = optimal_density(&model, c);
    let d_err = d.density.iter().map(|x| (x / d_exact - 1.0).abs()).fold(0.0, f64::max);
    let c_err = (c.value() / c_exact - 1.0).abs();
    rep.record(
        "density_optimizer",
        worst <= 5e-3 && d_err <= 1e-6 && c_err <= 1e-6,
        format!("random complexity rel err {worst:.1e} (<= 5e-3), uniform density {d_err:.1e} / constant {c_err:.1e} (<= 1e-6)"),
    );
}

fn grid_minimum(m: &LocalErrorModel) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    for i in 0..180 {
        let th = i as f64 * PI / 180.0;
        for j in 0..50 {
            let b = 1.0 + (BETA_MAX - 1.0) * j as f64 / 49.0;
            let v = anisotropy_bound(m, b, th);
            if v < best.1 {
                best = (th, v);
            }
        }
    }
    best
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn anisotropy(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_bound, mut worst_theta) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let phi: f64 = rng.random_range(0.0..PI);
        let p: u32 = rng.random_range(1..=5);
        let (s, c) = phi.sin_cos();
        // q = ((x cos φ + y sin φ)^{p+1})²
        let n = p + 1;
        let terms = (0..=n)
            .map(|k| (n - k, k, binomial(n, k) * c.powi((n - k) as i32) * s.powi(k as i32)))
            .collect();
        let m = LocalErrorModel::monomial(0, rng.random_range(1.0..100.0), vec![terms]);
        let r = optimize_anisotropy(&m);
        let (theta, bound) = grid_minimum(&m);
        worst_bound = worst_bound.max(r.bound / bound - 1.0);
        worst_theta = worst_theta.max(angle_distance(normalize_angle(r.theta_star), theta));
    }
    rep.record(
        "anisotropy_optimizer",
        worst_bound <= 0.01 && worst_theta <= 2f64.to_radians(),
        format!(
            "max bound excess {:.2e} (<= 1%), max theta diff {:.2} deg (<= 2 deg)",
            worst_bound,
            worst_theta.to_degrees()
        ),
    );
}

// log energy at `ndof`, linear in ∛ndof between neighboring records
fn log_energy_at(recs: &[ConvergenceRecord], ndof: f64) -> f64 {
    let x = ndof.cbrt();
    let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.cbrt_ndof, r.energy_error.ln())).collect();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if (x0 - x) * (x1 - x) <= 0.0 && x0 != x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    pts.iter()
        .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
        .unwrap()
        .1
}

// The 32-element run gets 5 more adaptations so both runs end near the same complexity
// (192·1.3^17 ≈ 768·1.3^12).
fn robustness(rep: &mut Report, coarse: &[ConvergenceRecord], fine: &[ConvergenceRecord]) {
    let ndof = coarse.last().unwrap().ndof.min(fine.last().unwrap().ndof) as f64;
    let ratio = (log_energy_at(coarse, ndof) - log_energy_at(fine, ndof)).abs().exp();
    let early = coarse[12].ndof as f64;
    let early_ratio = (log_energy_at(coarse, early) - log_energy_at(fine, early)).abs().exp();
    rep.record(
        "initial_mesh_robustness",
        coarse[0].ne == 32 && fine[0].ne == 128 && ratio <= 3.0,
        format!(
            "energy ratio {ratio:.2} (<= 3) at final ndof {ndof:.0}; finals {:.2e} / {:.2e}; ratio {early_ratio:.3e} at ndof {early:.0}",
            coarse.last().unwrap().energy_error,
            fine.last().unwrap().energy_error
        ),
    );
}

fn determinism(rep: &mut Report, root: &Path) {
    let mut bytes = Vec::new();
    for threads in ["1", "2"] {
        let dir = root.join(format!("det_{threads}"));
        run(
            config(&[
                ("case", "boundary_layer"),
                ("epsilon", "0.1"),
                ("max_adapt", "3"),
                ("seed", "5"),
                ("threads", threads),
            ]),
            &dir,
        );
        bytes.push(std::fs::read(dir.join("convergence.csv")).expect("convergence.csv"));
    }
    rep.record(
        "determinism",
        !bytes[0].is_empty() && bytes[0] == bytes[1],
        format!("convergence.csv with 1 and 2 threads: {} bytes, identical {}", bytes[0].len(), bytes[0] == bytes[1]),
    );
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut rep = Report { lines: Vec::new() };
    exactness(&mut rep);
    a_priori_rates(&mut rep);
    estimator_identity(&mut rep);
    density(&mut rep);
    anisotropy(&mut rep);
    determinism(&mut rep, root);
    lshape(&mut rep, &root.join("lshape"));
    let start = SystemTime::now();
    let bl32 = root.join("bl32");
    let coarse = boundary_layer(4, 17, &bl32);
    // the 12-adaptation run is the first 13 records of the longer one
    let t12 = std::fs::metadata(bl32.join("mesh_12.mesh"))
        .and_then(|m| m.modified())
        .ok()
        .and_then(|m| m.duration_since(start).ok())
        .map_or(f64::INFINITY, secs);
    exponential(&mut rep, &coarse[..13], t12);
    let fine = boundary_layer(8, 12, &root.join("bl128"));
    robustness(&mut rep, &coarse, &fine);
    goal(&mut rep, &root.join("goal"));
    let passed = rep.lines.iter().filter(|l| l.0).count();
    println!("acceptance: {passed}/{} criteria passed", rep.lines.len());
    for (_, line) in &rep.lines {
        println!("  {line}");
    }
}
