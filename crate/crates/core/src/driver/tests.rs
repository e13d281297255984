use approx::assert_relative_eq;

use super::*;
use crate::hp_model::AdaptMode;
use crate::problems::CaseId;

#[test]
fn config_parses_keys_and_comments() {
    let cfg = AdaptConfig::parse(
        "# run\ncase = lshape\nmode = energy\nfixed_complexity = 3072 # tokens\nmax_adapt=3\n\np_init = 2\nthreads = 2\n",
    )
    .unwrap();
    assert_eq!(cfg.case, CaseId::Lshape);
    assert_eq!(cfg.fixed_complexity, Some(3072.0));
    assert_eq!(cfg.max_adapt, 3);
    assert_eq!(cfg.threads, 2);
    assert_eq!(cfg.delta_p(), 3);
    cfg.validate().unwrap();
}

#[test]
fn config_rejects_bad_input() {
    assert!(matches!(AdaptConfig::parse("colour = red"), Err(crate::Error::Config(_))));
    assert!(matches!(AdaptConfig::parse("growth"), Err(crate::Error::Config(_))));
    assert!(matches!(AdaptConfig::parse("case = sphere"), Err(crate::Error::Config(_))));
    assert!(AdaptConfig::parse("growth = 1.0").unwrap().validate().is_err());
    assert!(AdaptConfig::parse("p_init = 11\np_max = 10").unwrap().validate().is_err());
    assert!(AdaptConfig::parse("remesher = external").unwrap().validate().is_err());
}

#[test]
fn config_text_roundtrip() {
    let mut cfg = AdaptConfig::default();
    for (k, v) in [("case", "gaussian_peak"), ("mode", "goal"), ("alpha", "1000"), ("adapt_p", "false"), ("initial_n", "8")] {
        cfg.set(k, v).unwrap();
    }
    let back = AdaptConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.mode, AdaptMode::Goal);
    assert_eq!(back.delta_p(), 2);
    let text = cfg.to_text();
    let keys: Vec<&str> = text.lines().map(|l| l.split(" =").next().unwrap()).collect();
    assert_eq!(keys, CONFIG_KEYS);
}

fn record(adapt: usize, ndof: usize, energy: f64) -> ConvergenceRecord {
    ConvergenceRecord {
        adapt,
        ne: 10,
        ndof,
        cbrt_ndof: (ndof as f64).cbrt(),
        complexity: ndof as f64,
        p_avg: 2.0,
        l2_error: Some(1e-3),
        energy_error: energy,
        linf_error: None,
        h1_semi_error: None,
        h1_error: None,
        goal_error: None,
        dwr: None,
    }
}

#[test]
fn csv_schema_and_cbrt_column() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![record(0, 343, 0.5)];
    emit_reports(&recs, &AdaptConfig::default(), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "adapt,ne,ndof,cbrt_ndof,complexity,p_avg,l2_error,energy_error,linf_error,h1_semi_error,h1_error,goal_error,dwr"
    );
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols.len(), RECORD_COLUMNS.len());
    let c: f64 = cols[3].parse().unwrap();
    assert!((c - 7.0).abs() < 1e-12);
    assert_eq!(cols[8], "nan");
    let back = read_records_json(dir.path().join("records.json")).unwrap();
    assert_eq!(back, recs);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["records"], 1);
}

#[test]
fn unwritable_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(emit_reports(&[record(0, 8, 1.0)], &AdaptConfig::default(), file.join("sub")).is_err());
}

#[test]
fn exponential_fit_recovers_rate() {
    let recs: Vec<ConvergenceRecord> = (0..6)
        .map(|i| {
            let ndof = 100 + 150 * i;
            record(i, ndof, 3.0 * (-0.8 * (ndof as f64).cbrt()).exp())
        })
        .collect();
    let fit = exp_fit(&recs).unwrap();
    assert_relative_eq!(fit.b, 0.8, max_relative = 1e-10);
    assert_relative_eq!(fit.log_c, 3f64.ln(), max_relative = 1e-9);
    assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
}

fn small_config(dir: &std::path::Path) -> AdaptConfig {
    let mut cfg = AdaptConfig::default();
    cfg.out_dir = dir.to_path_buf();
    cfg.p_init = 1;
    cfg.max_adapt = 0;
    cfg
}

#[test]
fn zero_adaptations_give_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let recs = run_adaptation(&small_config(dir.path())).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].ne, 32);
    assert_eq!(recs[0].ndof, 32 * 3);
    for f in ["convergence.csv", "records.json", "mesh_0.mesh", "pdist_0.csv", "indicators_0.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn short_run_writes_each_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.max_adapt = 2;
    cfg.p_max = 3;
    let recs = run_adaptation(&cfg).unwrap();
    assert_eq!(recs.len(), 3);
    for i in 0..2 {
        assert!(dir.path().join(format!("diagnostics_{i}.csv")).exists());
        assert!(dir.path().join(format!("metric_{i}.mtr")).exists());
    }
    // growth mode: complexity follows initial · 1.3^i within the remesher's tolerance
    for r in &recs[1..] {
        let target = recs[0].complexity * 1.3f64.powi(r.adapt as i32);
        assert!((r.complexity / target - 1.0).abs() < 0.3, "{} vs {target}", r.complexity);
    }
}

#[test]
fn goal_mode_needs_a_target() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.mode = AdaptMode::Goal;
    assert!(matches!(run_adaptation(&cfg), Err(crate::Error::Config(_))));
}

#[test]
fn self_checks_pass() {
    for c in run_checks() {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}
