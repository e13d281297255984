//! Continuous hp-mesh model: order selection from local patch solves, the error-density
//! coefficient `Ā`, the optimal density under a complexity constraint and the vertex metric
//! field that feeds the remesher.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anisotropy::AnisotropyResult;
use crate::approximation::build_layout;
use crate::dpg_core::{
    solve_with, trace_at, DirichletData, GlobalSolution, ProblemDirichlet, SolverOptions,
    UltraWeakProblem,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_patch_with, complexity_weight, metric_compose, scalar_dofs, AnisotropyParams, HpMesh,
    MetricTensor, Patch, PatchAdjacency, PatchMesh, Triangulation, ALPHA,
};

pub const P_MIN: usize = 1;
pub const P_MAX: usize = 10;

/// How the error density coefficient is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptMode {
    #[default]
    Energy,
    Goal,
}

impl AdaptMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "energy" => Ok(Self::Energy),
            "goal" => Ok(Self::Goal),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Patch Dirichlet data: the global trace on interface edges, physical data elsewhere. Vertex
/// values are the global trace at the vertex, which already carries the physical average on
/// boundary vertices.
struct PatchDirichlet<'a> {
    patch: &'a PatchMesh,
    global_mesh: &'a Triangulation,
    global: &'a GlobalSolution,
    physical: ProblemDirichlet<'a>,
}

impl DirichletData for PatchDirichlet<'_> {
    fn edge_value(&self, mesh: &Triangulation, e: usize, t: f64) -> f64 {
        let ge = self.patch.edge_map[e];
        if self.global_mesh.edge(ge).is_boundary() {
            return self.physical.edge_value(mesh, e, t);
        }
        let s = self.global_mesh.edge_parameter(ge, mesh.edge_point(e, t));
        trace_at(self.global, self.global_mesh, ge, s)
    }

    fn vertex_value(&self, _mesh: &Triangulation, v: usize, _edges: &[usize]) -> f64 {
        let gv = self.patch.vertex_map[v];
        self.global.coefficients[self.global.layout.vertex_dof[gv]]
    }
}

/// Solves the patch problem with uniform order `q`; returns the energy error of the center
/// element and the cost `N_q = (q+1)(q+2)/2`.
#[allow(clippy::too_many_arguments)]
pub fn solve_patch_at_order(
    mesh: &HpMesh,
    patch: &Patch,
    q: usize,
    global: &GlobalSolution,
    problem: &UltraWeakProblem,
    delta_p: usize,
    options: &SolverOptions,
) -> Result<(f64, usize)> {
    let pm = patch.submesh(&mesh.mesh)?;
    let sub = HpMesh::uniform(pm.mesh.clone(), q)?;
    let layout = build_layout(&sub, delta_p)?;
    let data = PatchDirichlet {
        patch: &pm,
        global_mesh: &mesh.mesh,
        global,
        physical: ProblemDirichlet(problem),
    };
    let sol = solve_with(&sub, problem, &layout, &data, options)?;
    Ok((sol.eta[0], scalar_dofs(q)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub order: usize,
    pub energy: f64,
    pub cost: usize,
    /// Predicted dofs needed by this order to reach the error of the current order.
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub element: usize,
    pub p_old: usize,
    pub candidates: Vec<Candidate>,
    pub p_opt: usize,
    /// Energy error of the element at `p_opt`.
    pub energy_opt: f64,
}

impl OrderSelection {
    pub fn candidate(&self, order: usize) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.order == order)
    }
}

/// Picks the order with the fewest predicted dofs
/// `m_{p+i} = (E_{p+i}/E_p)^{2/(s_i+1)} N_{p+i}`, `s_i = p+i+1`. `energies` are
/// `(order, E)` pairs and must contain `p`; candidates outside `[p_min, p_max]` are ignored.
/// Ties go to the lower order; `E_p = 0` keeps `p`.
pub fn select_order(element: usize, p: usize, energies: &[(usize, f64)], p_min: usize, p_max: usize) -> OrderSelection {
    let ep = energies
        .iter()
        .find(|(q, _)| *q == p)
        .map(|e| e.1)
        .unwrap_or(0.0);
    let mut cands: Vec<Candidate> = energies
        .iter()
        .filter(|(q, _)| (p_min..=p_max).contains(q) && q.abs_diff(p) <= 1)
        .map(|&(q, e)| {
            let n = scalar_dofs(q);
            let m = if q == p {
                n as f64
            } else if ep > 0.0 {
                (e / ep).powf(2.0 / (q as f64 + 2.0)) * n as f64
            } else {
                f64::INFINITY
            };
            Candidate {
                order: q,
                energy: e,
                cost: n,
                m,
            }
        })
        .collect();
    cands.sort_by_key(|c| c.order);
    let mut best = (p, ep, f64::INFINITY);
    if ep > 0.0 {
        for c in &cands {
            if c.m < best.2 {
                best = (c.order, c.energy, c.m);
            }
        }
    }
    OrderSelection {
        element,
        p_old: p,
        candidates: cands,
        p_opt: best.0,
        energy_opt: best.1,
    }
}

/// Local solves at `p-1, p, p+1` for every element (in parallel) and the resulting order
/// choice.
pub fn select_orders(
    mesh: &HpMesh,
    global: &GlobalSolution,
    problem: &UltraWeakProblem,
    delta_p: usize,
    p_min: usize,
    p_max: usize,
    adjacency: PatchAdjacency,
    options: &SolverOptions,
) -> Result<Vec<OrderSelection>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let p = mesh.p[k];
            let patch = build_patch_with(&mesh.mesh, k, adjacency);
            let mut energies = Vec::with_capacity(3);
            for q in p.saturating_sub(1)..=p + 1 {
                if q < p_min.max(1) || q > p_max {
                    continue;
                }
                let (e, _) = solve_patch_at_order(mesh, &patch, q, global, problem, delta_p, options)?;
                energies.push((q, e));
            }
            Ok(select_order(k, p, &energies, p_min, p_max))
        })
        .collect()
}

/// Fixed-order variant: keeps every `p` and uses the global element errors.
pub fn keep_orders(mesh: &HpMesh, global: &GlobalSolution) -> Vec<OrderSelection> {
    (0..mesh.num_elements())
        .map(|k| {
            let p = mesh.p[k];
            select_order(k, p, &[(p, global.eta[k])], p, p)
        })
        .collect()
}

/// `Ā_k = E²/|k|^{p+2}` in energy mode and `η*_k E/|k|^{p+2}` in goal mode.
pub fn compute_abar(area: f64, p_opt: usize, energy: f64, mode: AdaptMode, star: Option<f64>) -> f64 {
    let num = match mode {
        AdaptMode::Energy => energy * energy,
        AdaptMode::Goal => star.unwrap_or(0.0) * energy,
    };
    num / area.powi(p_opt as i32 + 2)
}

/// Inputs of the density optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousModel {
    pub abar: Vec<f64>,
    /// Orders `p_opt`; the error exponent is `s = p + 1`.
    pub p: Vec<usize>,
    pub areas: Vec<f64>,
    pub n_target: f64,
    pub mode: AdaptMode,
}

impl ContinuousModel {
    /// `ln` of `(p+1) Ā α^{p+1} / w(p)`, or `None` for zero `Ā`.
    fn log_coefficient(&self, k: usize) -> Option<f64> {
        let (a, p) = (self.abar[k], self.p[k]);
        (a > 0.0).then(|| {
            let pf = p as f64;
            (pf + 1.0).ln() + a.ln() + (pf + 1.0) * ALPHA.ln() - complexity_weight(p).ln()
        })
    }

    /// Complexity of the zero-error elements, which keep their current density `α/|k|`.
    fn fixed_complexity(&self) -> f64 {
        (0..self.abar.len())
            .filter(|&k| !(self.abar[k] > 0.0))
            .map(|k| ALPHA * complexity_weight(self.p[k]))
            .sum()
    }

    /// Complexity of the active elements for `ln const = t`.
    fn active_complexity(&self, t: f64) -> f64 {
        (0..self.abar.len())
            .filter_map(|k| {
                self.log_coefficient(k).map(|lc| {
                    let s = self.p[k] as f64 + 2.0;
                    self.areas[k] * complexity_weight(self.p[k]) * ((lc - t) / s).exp()
                })
            })
            .sum()
    }
}

/// Lagrange constant, kept in log form because it spans many decades for high orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeConstant {
    pub log_value: f64,
}

impl LagrangeConstant {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Bisection (in `ln const`) for the constant that meets the complexity target. The bracket
/// starts at `[1e-20, 1e20]` and grows geometrically until it holds a sign change.
pub fn bisect_const(model: &ContinuousModel) -> Result<LagrangeConstant> {
    if !(model.n_target > 0.0) {
        return Err(Error::Config(format!("complexity target {} must be positive", model.n_target)));
    }
    if !model.abar.iter().any(|a| *a > 0.0) {
        return Err(Error::ZeroErrorField);
    }
    // zero-error elements are charged their current size; if they already exceed the target
    // the active ones are sized against the full target
    let mut target = model.n_target - model.fixed_complexity();
    if target <= 0.0 {
        target = model.n_target;
    }
    let g = |t: f64| model.active_complexity(t) - target;
    let (mut lo, mut hi) = (-20.0 * std::f64::consts::LN_10, 20.0 * std::f64::consts::LN_10);
    let mut grow = 0;
    while g(lo) < 0.0 {
        lo -= (hi - lo).max(1.0);
        grow += 1;
        if grow > 60 {
            return Err(Error::Solver("complexity bracket not found".into()));
        }
    }
    while g(hi) > 0.0 {
        hi += (hi - lo).max(1.0);
        grow += 1;
        if grow > 60 {
            return Err(Error::Solver("complexity bracket not found".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if gm.abs() <= 1e-13 * target || hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(LagrangeConstant {
        log_value: 0.5 * (lo + hi),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub density: Vec<f64>,
    pub constant: LagrangeConstant,
    /// `Σ w(p_k) d_k |k|`.
    pub complexity: f64,
}

/// `d*_k = ((p+1) Ā α^{p+1}/w)^{1/(p+2)} const^{-1/(p+2)}`; zero-error elements keep their
/// current density.
pub fn optimal_density(model: &ContinuousModel, constant: LagrangeConstant) -> DensityField {
    let density: Vec<f64> = (0..model.abar.len())
        .map(|k| match model.log_coefficient(k) {
            Some(lc) => ((lc - constant.log_value) / (model.p[k] as f64 + 2.0)).exp(),
            None => ALPHA / model.areas[k],
        })
        .collect();
    let complexity = density
        .iter()
        .zip(&model.p)
        .zip(&model.areas)
        .map(|((d, p), a)| complexity_weight(*p) * d * a)
        .sum();
    DensityField {
        density,
        constant,
        complexity,
    }
}

/// Element metrics from `(θ*, β*, d*)` averaged to the vertices in the log-Euclidean sense.
pub fn build_metric_field(mesh: &Triangulation, density: &[f64], anisotropy: &[AnisotropyResult]) -> Result<Vec<MetricTensor>> {
    let elem: Vec<MetricTensor> = density
        .iter()
        .zip(anisotropy)
        .map(|(&d, a)| {
            AnisotropyParams::new(a.theta_star, a.beta_star.max(1.0), d).map(|p| metric_compose(&p))
        })
        .collect::<Result<_>>()?;
    mesh.vertex_triangles()
        .par_iter()
        .map(|ks| {
            let items: Vec<(f64, MetricTensor)> = ks.iter().map(|&k| (1.0, elem[k])).collect();
            MetricTensor::log_euclidean_mean(&items)
        })
        .collect()
}

/// One row per element: orders, candidate energies and `m` values, `Ā` and `d*`.
pub fn write_diagnostics_csv(
    path: impl AsRef<Path>,
    selections: &[OrderSelection],
    abar: &[f64],
    density: &[f64],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "element,p_old,p_opt,E_pm1,E_p,E_pp1,m_pm1,m_p,m_pp1,abar,d_star")?;
    let num = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
    for (k, s) in selections.iter().enumerate() {
        let c = |o: Option<usize>| o.and_then(|o| s.candidate(o));
        let lower = c(s.p_old.checked_sub(1));
        let mid = c(Some(s.p_old));
        let upper = c(Some(s.p_old + 1));
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{:.16e},{:.16e}",
            s.element,
            s.p_old,
            s.p_opt,
            num(lower.map(|c| c.energy)),
            num(mid.map(|c| c.energy)),
            num(upper.map(|c| c.energy)),
            num(lower.map(|c| c.m)),
            num(mid.map(|c| c.m)),
            num(upper.map(|c| c.m)),
            abar[k],
            density[k]
        )?;
    }
    Ok(())
}
