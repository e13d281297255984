//! Adjoint solve, the DPG-star element indicator and goal-oriented indicators.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{cached_line_rule, dubiner, SpaceLayout};
use crate::dpg_core::{
    flux_at, integrate_weighted, physical_table, solve_with, BoundaryFn,
    ElementGeometry, GlobalSolution, ProblemDirichlet, ScalarFn, SolverOptions, UltraWeakProblem,
};
use crate::error::{Error, Result};
use crate::geometry::{scalar_dofs, HpMesh, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    /// `J(u) = ∫_Ω j_Ω u dx`.
    Volume,
    /// `J(u) = ∫_∂Ω j_∂Ω ∇u·n ds`.
    BoundaryFlux,
}

/// Linear target functional with a volume weight and/or a boundary weight.
#[derive(Clone)]
pub struct TargetFunctional {
    pub kind: TargetKind,
    pub volume: Option<ScalarFn>,
    pub boundary: Option<BoundaryFn>,
}

impl std::fmt::Debug for TargetFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunctional")
            .field("kind", &self.kind)
            .field("volume", &self.volume.is_some())
            .field("boundary", &self.boundary.is_some())
            .finish()
    }
}

impl TargetFunctional {
    pub fn volume(weight: ScalarFn) -> Self {
        Self {
            kind: TargetKind::Volume,
            volume: Some(weight),
            boundary: None,
        }
    }

    pub fn boundary_flux(weight: BoundaryFn) -> Self {
        Self {
            kind: TargetKind::BoundaryFlux,
            volume: None,
            boundary: Some(weight),
        }
    }

    /// Dual problem: reversed convection, `j_Ω` as source and `j_∂Ω` as Dirichlet data.
    pub fn dual_problem(&self, primal: &UltraWeakProblem) -> Result<UltraWeakProblem> {
        if self.volume.is_none() && self.boundary.is_none() {
            return Err(Error::UnsupportedTarget("target has neither volume nor boundary weight".into()));
        }
        let source: ScalarFn = self.volume.clone().unwrap_or_else(|| Arc::new(|_| 0.0));
        let data: BoundaryFn = self.boundary.clone().unwrap_or_else(|| Arc::new(|_, _| 0.0));
        Ok(primal.adjoint(source, data))
    }

    /// `J(u_h)`. The flux form uses the discrete flux `σ̂_n ≈ (βu − ε∇u)·n`, so
    /// `∇u·n ≈ (β·n g − σ̂_n)/ε` with `g` the boundary data.
    pub fn evaluate(&self, mesh: &HpMesh, problem: &UltraWeakProblem, sol: &GlobalSolution) -> f64 {
        match self.kind {
            TargetKind::Volume => {
                let w = self.volume.clone().expect("volume weight");
                let max_p = sol.layout.orders.iter().copied().max().unwrap_or(1);
                integrate_weighted(mesh, sol, &*w, 2 * max_p + 14)
            }
            TargetKind::BoundaryFlux => {
                let j = self.boundary.clone().expect("boundary weight");
                let m = &mesh.mesh;
                let mut total = 0.0;
                for e in 0..m.num_edges() {
                    let edge = m.edge(e);
                    if !edge.is_boundary() {
                        continue;
                    }
                    let tag = edge.boundary_tag.unwrap_or(0);
                    let n = m.boundary_normal(e);
                    let bn = problem.beta[0] * n[0] + problem.beta[1] * n[1];
                    let len = m.edge_length(e);
                    let rule = cached_line_rule(sol.layout.edge_order[e] + 8);
                    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                        let x = m.edge_point(e, t);
                        let jw = j(x, tag);
                        if jw == 0.0 {
                            continue;
                        }
                        let g = (problem.dirichlet)(x, tag);
                        total += w * len * jw * (bn * g - flux_at(sol, e, t)) / problem.epsilon;
                    }
                }
                total
            }
        }
    }
}

/// Adjoint fields (`v_z = u`, `τ_z = σ` of the dual solve) and the star indicators.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub solution: GlobalSolution,
    pub star: Vec<f64>,
}

pub fn solve_dual(
    mesh: &HpMesh,
    problem: &UltraWeakProblem,
    target: &TargetFunctional,
    layout: &SpaceLayout,
    options: &SolverOptions,
) -> Result<DualSolution> {
    let dual = target.dual_problem(problem)?;
    let solution = solve_with(mesh, &dual, layout, &ProblemDirichlet(&dual), options)?;
    let star = star_indicator(mesh, &solution, &dual);
    Ok(DualSolution { solution, star })
}

/// Values of `u_h`, `σ_h` of element `k` at a physical point.
fn fields(sol: &GlobalSolution, k: usize, geo: &ElementGeometry, x: Point) -> (f64, Point) {
    let r = geo.to_reference(x);
    let p = sol.layout.orders[k];
    let tp = scalar_dofs(p);
    let (phi, _) = dubiner(p, r[0], r[1]);
    let c = &sol.coefficients[sol.layout.field_offset[k]..];
    let mut out = (0.0, [0.0; 2]);
    for i in 0..tp {
        out.0 += c[i] * phi[i];
        out.1[0] += c[tp + i] * phi[i];
        out.1[1] += c[2 * tp + i] * phi[i];
    }
    out
}

/// `η*_k` for every element of a dual solution of `dual` (convection already reversed):
/// strong first-order residuals `τ − ∇v` and `β·∇v − ε∇·τ − j_Ω`, `h_e`-weighted normal jumps of
/// `τ` on interior edges and `h_e⁻¹`-weighted jumps of `v` on all edges (against `j_∂Ω` on
/// the boundary).
pub fn star_indicator(mesh: &HpMesh, dual: &GlobalSolution, problem: &UltraWeakProblem) -> Vec<f64> {
    let m = &mesh.mesh;
    let layout = &dual.layout;
    (0..m.num_triangles())
        .into_par_iter()
        .map(|k| {
            let geo = ElementGeometry::new(m, k);
            let p = layout.orders[k];
            let tp = scalar_dofs(p);
            let tab = physical_table(&geo, p, (2 * p + 8).min(40));
            let c = &dual.coefficients[layout.field_offset[k]..];
            let mut sum = 0.0;
            for (q, x) in tab.points.iter().enumerate() {
                let (mut gx, mut gy, mut tx, mut ty, mut div) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..tp {
                    let (phi, dx, dy) = (tab.values[(i, q)], tab.dx[(i, q)], tab.dy[(i, q)]);
                    gx += c[i] * dx;
                    gy += c[i] * dy;
                    tx += c[tp + i] * phi;
                    ty += c[2 * tp + i] * phi;
                    div += c[tp + i] * dx + c[2 * tp + i] * dy;
                }
                let r1 = (tx - gx).powi(2) + (ty - gy).powi(2);
                let r2 = problem.beta[0] * gx + problem.beta[1] * gy
                    - problem.epsilon * div
                    - (problem.source)(*x);
                sum += tab.weights[q] * (r1 + r2 * r2);
            }
            for (j, &e) in m.triangle_edges(k).iter().enumerate() {
                let edge = m.edge(e);
                let h = m.edge_length(e);
                let n = m.outward_normal(k, j);
                let other = edge.triangles.iter().flatten().copied().find(|&t| t != k);
                let other_geo = other.map(|o| (o, ElementGeometry::new(m, o)));
                let po = other.map(|o| layout.orders[o]).unwrap_or(0);
                let rule = cached_line_rule(p.max(po) + 4);
                let (mut jv, mut jt) = (0.0, 0.0);
                for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = m.edge_point(e, t);
                    let (v, tau) = fields(dual, k, &geo, x);
                    match &other_geo {
                        Some((o, og)) => {
                            let (vo, to) = fields(dual, *o, og, x);
                            jv += w * (v - vo).powi(2);
                            jt += w * ((tau[0] - to[0]) * n[0] + (tau[1] - to[1]) * n[1]).powi(2);
                        }
                        None => {
                            let g = (problem.dirichlet)(x, edge.boundary_tag.unwrap_or(0));
                            jv += w * (v - g).powi(2);
                        }
                    }
                }
                // ∫_e ds = h ∫_0^1 dt, so h_e ∫|[[τ·n]]|² = h² jt and h_e⁻¹ ∫|[[v]]|² = jv
                sum += h * h * jt + jv;
            }
            sum.max(0.0).sqrt()
        })
        .collect()
}

/// `η_k^goal = η*_k · η_k`.
pub fn goal_indicator(eta: &[f64], star: &[f64]) -> Vec<f64> {
    eta.iter().zip(star).map(|(a, b)| a * b).collect()
}

/// Dual-weighted-residual estimate `Σ_k η*_k η_k`.
pub fn dwr_estimate(eta: &[f64], star: &[f64]) -> f64 {
    goal_indicator(eta, star).iter().sum()
}

/// Per-element indicator CSV: element id, η_k, η*_k, η_k^goal.
pub fn write_indicator_csv(path: impl AsRef<std::path::Path>, eta: &[f64], star: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "element,eta,eta_star,eta_goal")?;
    for (k, (a, b)) in eta.iter().zip(star).enumerate() {
        writeln!(f, "{k},{a:.16e},{b:.16e},{:.16e}", a * b)?;
    }
    Ok(())
}
