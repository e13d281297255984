use std::io::Write;
use std::path::Path;

use super::local::{physical_table, ElementGeometry};
use super::problem::ExactFn;
use super::solve::GlobalSolution;
use crate::approximation::{dubiner, flux_basis, trace_basis};
use crate::error::Result;
use crate::geometry::{scalar_dofs, HpMesh, Point, PointLocator, Triangulation};

/// `u_h` and `σ_h` of element `k` at a reference point.
pub fn field_at(sol: &GlobalSolution, k: usize, r: [f64; 2]) -> (f64, Point) {
    let p = sol.layout.orders[k];
    let tp = scalar_dofs(p);
    let (phi, _) = dubiner(p, r[0], r[1]);
    let c = &sol.coefficients[sol.layout.field_offset[k]..];
    let (mut u, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..tp {
        u += c[i] * phi[i];
        sx += c[tp + i] * phi[i];
        sy += c[2 * tp + i] * phi[i];
    }
    (u, [sx, sy])
}

/// Trace `û_h` on edge `e` at parameter `t`.
pub fn trace_at(sol: &GlobalSolution, mesh: &Triangulation, e: usize, t: f64) -> f64 {
    let l = &sol.layout;
    let q = l.edge_order[e];
    let [a, b] = mesh.edge(e).vertices;
    let tb = trace_basis(q + 1, t);
    let mut v = tb[0] * sol.coefficients[l.vertex_dof[a]] + tb[1] * sol.coefficients[l.vertex_dof[b]];
    for i in 0..q {
        v += tb[2 + i] * sol.coefficients[l.bubble_offset[e] + i];
    }
    v
}

/// Flux `σ̂_n` on edge `e` at parameter `t`, oriented by the normal of the edge's first triangle
/// (the outward normal on boundary edges).
pub fn flux_at(sol: &GlobalSolution, e: usize, t: f64) -> f64 {
    let l = &sol.layout;
    let q = l.edge_order[e];
    flux_basis(q, t)
        .iter()
        .enumerate()
        .map(|(i, f)| f * sol.coefficients[l.flux_offset[e] + i])
        .sum()
}

/// Error norms of `u_h` against an exact solution. The `H¹` seminorm compares `σ_h` with `∇u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
    pub linf: f64,
    /// `‖u‖_{L2}` of the exact solution, for relative errors.
    pub l2_exact: f64,
}

pub fn compute_errors(mesh: &HpMesh, sol: &GlobalSolution, exact: &ExactFn) -> ErrorNorms {
    let m = &mesh.mesh;
    let parts: Vec<[f64; 4]> = (0..m.num_triangles())
        .map(|k| {
            let geo = ElementGeometry::new(m, k);
            let p = sol.layout.orders[k];
            let tp = scalar_dofs(p);
            let tab = physical_table(&geo, p, (2 * p + 10).min(40));
            let c = &sol.coefficients[sol.layout.field_offset[k]..];
            let mut acc = [0.0; 4];
            for (q, x) in tab.points.iter().enumerate() {
                let (mut u, mut sx, mut sy) = (0.0, 0.0, 0.0);
                for i in 0..tp {
                    let phi = tab.values[(i, q)];
                    u += c[i] * phi;
                    sx += c[tp + i] * phi;
                    sy += c[2 * tp + i] * phi;
                }
                let (ue, ge) = exact(*x);
                let w = tab.weights[q];
                acc[0] += w * (u - ue).powi(2);
                acc[1] += w * ((sx - ge[0]).powi(2) + (sy - ge[1]).powi(2));
                acc[2] = f64::max(acc[2], (u - ue).abs());
                acc[3] += w * ue * ue;
            }
            acc
        })
        .collect();
    let l2 = parts.iter().map(|a| a[0]).sum::<f64>().sqrt();
    let h1_semi = parts.iter().map(|a| a[1]).sum::<f64>().sqrt();
    ErrorNorms {
        l2,
        h1_semi,
        h1: (l2 * l2 + h1_semi * h1_semi).sqrt(),
        linf: parts.iter().map(|a| a[2]).fold(0.0, f64::max),
        l2_exact: parts.iter().map(|a| a[3]).sum::<f64>().sqrt(),
    }
}

/// `∫_Ω w u_h dx`.
pub fn integrate_weighted(mesh: &HpMesh, sol: &GlobalSolution, weight: &dyn Fn(Point) -> f64, degree: usize) -> f64 {
    let m = &mesh.mesh;
    (0..m.num_triangles())
        .map(|k| {
            let geo = ElementGeometry::new(m, k);
            let p = sol.layout.orders[k];
            let tab = physical_table(&geo, p, degree.clamp(2 * p, 40));
            let c = &sol.coefficients[sol.layout.field_offset[k]..];
            let mut s = 0.0;
            for (q, x) in tab.points.iter().enumerate() {
                let u: f64 = (0..scalar_dofs(p)).map(|i| c[i] * tab.values[(i, q)]).sum();
                s += tab.weights[q] * weight(*x) * u;
            }
            s
        })
        .sum()
}

/// Per-element CSV: element id, p, |k|, η_k.
pub fn write_element_csv(path: impl AsRef<Path>, mesh: &HpMesh, sol: &GlobalSolution) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "element,p,area,eta")?;
    for k in 0..mesh.num_elements() {
        writeln!(f, "{},{},{:.16e},{:.16e}", k, mesh.p[k], mesh.mesh.area(k), sol.eta[k])?;
    }
    Ok(())
}

/// Samples `u_h` on an `nx × ny` raster over the bounding box; points outside the domain
/// get `NaN`.
pub fn sample_raster(mesh: &HpMesh, sol: &GlobalSolution, nx: usize, ny: usize) -> Vec<[f64; 3]> {
    let m = &mesh.mesh;
    let loc = PointLocator::new(m);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in m.vertices() {
        for d in 0..2 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (nx.max(2) - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (ny.max(2) - 1) as f64,
            ];
            let u = match loc.locate(m, x) {
                Some((k, _)) => {
                    let geo = ElementGeometry::new(m, k);
                    field_at(sol, k, geo.to_reference(x)).0
                }
                None => f64::NAN,
            };
            out.push([x[0], x[1], u]);
        }
    }
    out
}

pub fn write_raster_csv(path: impl AsRef<Path>, samples: &[[f64; 3]]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,u")?;
    for s in samples {
        writeln!(f, "{:.16e},{:.16e},{:.16e}", s[0], s[1], s[2])?;
    }
    Ok(())
}
