use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{AdaptConfig, RemesherChoice};
use super::report::{write_convergence_csv, write_records_json};
use crate::anisotropy::{build_error_model, optimize_all, AnisotropyResult};
use crate::approximation::build_layout;
use crate::dpg_core::{
    compute_errors, solve_with, write_element_csv, ElementGeometry, GlobalSolution,
    ProblemDirichlet, SolverOptions,
};
use crate::dpg_star::{dwr_estimate, solve_dual, write_indicator_csv};
use crate::error::{Error, Result};
use crate::geometry::{complexity_of, mesh_complexity, scalar_dofs, HpMesh, MetricTensor, Triangulation, ALPHA};
use crate::hp_model::{
    bisect_const, build_metric_field, compute_abar, keep_orders, optimal_density, select_orders,
    write_diagnostics_csv, AdaptMode, ContinuousModel, OrderSelection,
};
use crate::problems::{make_problem, Domain, ProblemSpec};
use crate::remesh::{
    interchange_read, interchange_write, mesh_to_bamg, metric_to_bamg, remesh_internal,
    transfer_orders, unit_edge_metric,
};

/// One row of the convergence table. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub adapt: usize,
    pub ne: usize,
    pub ndof: usize,
    pub cbrt_ndof: f64,
    pub complexity: f64,
    pub p_avg: f64,
    pub l2_error: Option<f64>,
    pub energy_error: f64,
    pub linf_error: Option<f64>,
    pub h1_semi_error: Option<f64>,
    pub h1_error: Option<f64>,
    pub goal_error: Option<f64>,
    pub dwr: Option<f64>,
}

pub const RECORD_COLUMNS: &[&str] = &[
    "adapt",
    "ne",
    "ndof",
    "cbrt_ndof",
    "complexity",
    "p_avg",
    "l2_error",
    "energy_error",
    "linf_error",
    "h1_semi_error",
    "h1_error",
    "goal_error",
    "dwr",
];

/// Structured initial mesh: `n` from the config, else the one whose complexity is closest to
/// the fixed target, else the built-in default (32 elements on the square).
fn initial_mesh(cfg: &AdaptConfig, domain: Domain) -> Result<Triangulation> {
    if let Some(path) = &cfg.mesh_in {
        let is_bamg = path.extension().is_some_and(|e| e == "mesh");
        return if is_bamg {
            let text = std::fs::read_to_string(path)?;
            crate::remesh::parse_bamg_mesh(&text, &path.display().to_string())
        } else {
            Triangulation::read_native(path)
        };
    }
    let n = match (cfg.initial_n, cfg.fixed_complexity) {
        (Some(n), _) => n,
        (None, Some(target)) => {
            let per = scalar_dofs(cfg.p_init) as f64;
            (1..200)
                .min_by(|&a, &b| {
                    let ea = (domain.elements(a) as f64 * per - target).abs();
                    let eb = (domain.elements(b) as f64 * per - target).abs();
                    ea.total_cmp(&eb)
                })
                .unwrap()
        }
        (None, None) => match domain {
            Domain::UnitSquare => 4,
            Domain::Lshape => 2,
        },
    };
    domain.mesh(n)
}

/// Complexity target of adaptation `i` (the mesh produced after solve `i`).
fn target_complexity(cfg: &AdaptConfig, initial: f64, i: usize) -> f64 {
    match cfg.fixed_complexity {
        Some(n) => n,
        None => initial * cfg.growth.powi(i as i32 + 1),
    }
}

struct Step {
    record: ConvergenceRecord,
    solution: GlobalSolution,
    star: Option<Vec<f64>>,
}

fn solve_step(cfg: &AdaptConfig, spec: &ProblemSpec, hp: &HpMesh, i: usize, opts: &SolverOptions) -> Result<Step> {
    let layout = build_layout(hp, cfg.delta_p())?;
    let sol = solve_with(hp, &spec.problem, &layout, &ProblemDirichlet(&spec.problem), opts)?;
    let energy = sol.energy_error();
    let errs = spec.problem.exact.as_ref().map(|ex| compute_errors(hp, &sol, ex));
    let (mut goal_error, mut dwr, mut star) = (None, None, None);
    if let Some(target) = &spec.target {
        if cfg.mode == AdaptMode::Goal {
            let dual = solve_dual(hp, &spec.problem, target, &layout, opts)?;
            dwr = Some(dwr_estimate(&sol.eta, &dual.star));
            star = Some(dual.star);
        }
        if let Some(j) = spec.exact_target {
            goal_error = Some((j - target.evaluate(hp, &spec.problem, &sol)).abs());
        }
    }
    let ndof = layout.scalar_field_dofs();
    let record = ConvergenceRecord {
        adapt: i,
        ne: hp.num_elements(),
        ndof,
        cbrt_ndof: (ndof as f64).cbrt(),
        complexity: mesh_complexity(hp),
        p_avg: hp.average_order(),
        l2_error: errs.map(|e| e.l2),
        energy_error: energy,
        linf_error: errs.map(|e| e.linf),
        h1_semi_error: errs.map(|e| e.h1_semi),
        h1_error: errs.map(|e| e.h1),
        goal_error,
        dwr,
    };
    Ok(Step {
        record,
        solution: sol,
        star,
    })
}

/// Metric field for the next mesh: order choice, `Ā`, optimal density and anisotropy.
fn next_metric(
    cfg: &AdaptConfig,
    spec: &ProblemSpec,
    hp: &HpMesh,
    step: &Step,
    target: f64,
    opts: &SolverOptions,
) -> Result<(Vec<OrderSelection>, Vec<f64>, Vec<f64>, Vec<MetricTensor>)> {
    let sol = &step.solution;
    let sel = if cfg.adapt_p {
        select_orders(hp, sol, &spec.problem, cfg.delta_p(), cfg.p_min, cfg.p_max, cfg.patch, opts)?
    } else {
        keep_orders(hp, sol)
    };
    let m = &hp.mesh;
    let areas: Vec<f64> = (0..m.num_triangles()).map(|k| m.area(k)).collect();
    let abar: Vec<f64> = sel
        .iter()
        .map(|s| {
            let star = step.star.as_ref().map(|st| st[s.element]);
            compute_abar(areas[s.element], s.p_opt, s.energy_opt, cfg.mode, star)
        })
        .collect();
    let p_opt: Vec<usize> = sel.iter().map(|s| s.p_opt).collect();
    let model = ContinuousModel {
        abar: abar.clone(),
        p: p_opt.clone(),
        areas: areas.clone(),
        n_target: target,
        mode: cfg.mode,
    };
    let density = match bisect_const(&model) {
        Ok(c) => optimal_density(&model, c).density,
        Err(Error::ZeroErrorField) => {
            // no error information: keep the relative sizes, scale to the target
            let current = complexity_of(&p_opt);
            areas.iter().map(|a| ALPHA / a * target / current).collect()
        }
        Err(e) => return Err(e),
    };
    let anis: Vec<AnisotropyResult> = if cfg.anisotropy {
        let models: Vec<_> = (0..m.num_triangles())
            .map(|k| {
                build_error_model(&ElementGeometry::new(m, k), k, &sol.representations[k], hp.p[k])
            })
            .collect();
        optimize_all(&models, &sol.eta)
    } else {
        vec![AnisotropyResult::isotropic(0.0); m.num_triangles()]
    };
    let metrics = build_metric_field(m, &density, &anis)?;
    Ok((sel, abar, density, metrics))
}

fn run_external(cfg: &AdaptConfig, mesh: &Triangulation, metrics: &[MetricTensor], i: usize) -> Result<Triangulation> {
    let unit: Vec<MetricTensor> = metrics.iter().map(unit_edge_metric).collect();
    let input = cfg.out_dir.join(format!("remesh_{i}_in"));
    let output = cfg.out_dir.join(format!("remesh_{i}_out"));
    interchange_write(mesh, &unit, &input)?;
    let cmd = cfg
        .mesher_cmd
        .as_ref()
        .ok_or_else(|| Error::Config("external remesher needs `mesher_cmd`".into()))?
        .replace("{in}", &input.display().to_string())
        .replace("{out}", &output.display().to_string());
    let status = std::process::Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .status()
        .map_err(|e| Error::Remesh(format!("cannot run `{cmd}`: {e}")))?;
    if !status.success() {
        return Err(Error::Remesh(format!("`{cmd}` exited with {status}")));
    }
    interchange_read(&output)
        .map(|(m, _)| m)
        .map_err(|e| Error::Remesh(e.to_string()))
}

/// Remeshes towards `target`, rescaling the metric (up to three times) when the achieved
/// complexity misses the target by more than 5%.
fn remesh_to_target(
    cfg: &AdaptConfig,
    mesh: &Triangulation,
    metrics: &[MetricTensor],
    p_opt: &[usize],
    target: f64,
    i: usize,
) -> Result<HpMesh> {
    let mut scale = 1.0;
    let mut best: Option<(f64, Triangulation, Vec<usize>)> = None;
    for _ in 0..4 {
        let scaled: Vec<MetricTensor> = metrics.iter().map(|m| m.scaled(scale)).collect();
        let new = match cfg.remesher {
            RemesherChoice::Internal => remesh_internal(mesh, &scaled)?.mesh,
            RemesherChoice::External => run_external(cfg, mesh, &scaled, i)?,
        };
        let p = transfer_orders(mesh, p_opt, &new);
        let achieved = complexity_of(&p);
        let miss = (achieved / target - 1.0).abs();
        if best.as_ref().is_none_or(|b| miss < b.0) {
            best = Some((miss, new, p));
        }
        if miss <= 0.05 || cfg.remesher == RemesherChoice::External {
            break;
        }
        scale *= target / achieved;
    }
    let (_, mesh, p) = best.expect("at least one remesh");
    HpMesh::new(mesh, p).map_err(|e| Error::Remesh(e.to_string()))
}

fn write_iteration(dir: &Path, i: usize, hp: &HpMesh, step: &Step) -> Result<()> {
    std::fs::write(dir.join(format!("mesh_{i}.mesh")), mesh_to_bamg(&hp.mesh))?;
    let mut pd = String::from("element,p\n");
    for (k, p) in hp.p.iter().enumerate() {
        pd.push_str(&format!("{k},{p}\n"));
    }
    std::fs::write(dir.join(format!("pdist_{i}.csv")), pd)?;
    match &step.star {
        Some(star) => write_indicator_csv(dir.join(format!("indicators_{i}.csv")), &step.solution.eta, star)?,
        None => write_element_csv(dir.join(format!("indicators_{i}.csv")), hp, &step.solution)?,
    }
    Ok(())
}

/// The adaptation loop. Records and per-iteration files are flushed after every solve, so a
/// failing stage leaves the completed iterations on disk.
pub fn run_adaptation(cfg: &AdaptConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run_inner(cfg))
    } else {
        run_inner(cfg)
    }
}

fn run_inner(cfg: &AdaptConfig) -> Result<Vec<ConvergenceRecord>> {
    let spec = make_problem(cfg.case, &cfg.case_params()).map_err(|e| match e {
        Error::UnknownCase(_) => Error::Config(e.to_string()),
        e => e,
    })?;
    if cfg.mode == AdaptMode::Goal && spec.target.is_none() {
        return Err(Error::Config(format!("case `{}` has no target for goal mode", cfg.case.name())));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let dir = cfg.out_dir.as_path();
    let opts = SolverOptions {
        condense: cfg.condense,
    };
    let mut hp = HpMesh::uniform(initial_mesh(cfg, spec.domain)?, cfg.p_init)?;
    let initial = mesh_complexity(&hp);
    let mut records = Vec::new();
    for i in 0..=cfg.max_adapt {
        let step = solve_step(cfg, &spec, &hp, i, &opts)?;
        info!(
            "adapt {i}: ne {} ndof {} p_avg {:.3} energy {:.3e}",
            step.record.ne, step.record.ndof, step.record.p_avg, step.record.energy_error
        );
        write_iteration(dir, i, &hp, &step)?;
        records.push(step.record.clone());
        write_convergence_csv(dir.join("convergence.csv"), &records)?;
        write_records_json(dir.join("records.json"), &records)?;
        if i == cfg.max_adapt || step.record.energy_error < cfg.error_floor {
            break;
        }
        let target = target_complexity(cfg, initial, i);
        let (sel, abar, density, metrics) = next_metric(cfg, &spec, &hp, &step, target, &opts)?;
        write_diagnostics_csv(dir.join(format!("diagnostics_{i}.csv")), &sel, &abar, &density)?;
        let unit: Vec<MetricTensor> = metrics.iter().map(unit_edge_metric).collect();
        std::fs::write(dir.join(format!("metric_{i}.mtr")), metric_to_bamg(&unit))?;
        let p_opt: Vec<usize> = sel.iter().map(|s| s.p_opt).collect();
        hp = remesh_to_target(cfg, &hp.mesh, &metrics, &p_opt, target, i).map_err(|e| match e {
            Error::Remesh(_) | Error::Io(_) | Error::Config(_) => e,
            other => Error::Remesh(other.to_string()),
        })?;
    }
    Ok(records)
}
