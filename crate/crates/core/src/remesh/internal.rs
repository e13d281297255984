//! Fallback metric remesher: edge splits, collapses, flips and vertex smoothing towards a
//! mesh whose edges have unit length in the metric.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{barycentric, MetricTensor, Point, PointLocator, Triangulation};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Knobs of the internal remesher.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemeshOptions {
    pub max_sweeps: usize,
    /// Stop once this fraction of edges lies in `[1/√2, √2]`.
    pub target_fraction: f64,
    pub smoothing_passes: usize,
}

impl Default for RemeshOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 40,
            target_fraction: 0.95,
            smoothing_passes: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RemeshOutput {
    pub mesh: Triangulation,
    pub sweeps: usize,
    /// Fraction of edges with metric length in `[1/√2, √2]`.
    pub in_band: f64,
    /// The band target was not met within the sweep limit.
    pub stalled: bool,
}

/// Metric under which the element described by `m` has unit edges. Element metrics follow the
/// circumscribed-ellipse convention (edges of squared length 3), hence the factor 1/3.
pub fn unit_edge_metric(m: &MetricTensor) -> MetricTensor {
    m.scaled(1.0 / 3.0)
}

/// Metric field on a fixed background mesh, interpolated log-Euclidean.
pub struct MetricField<'a> {
    mesh: &'a Triangulation,
    locator: PointLocator,
    logs: Vec<MetricTensor>,
}

impl<'a> MetricField<'a> {
    pub fn new(mesh: &'a Triangulation, metrics: &[MetricTensor]) -> Result<Self> {
        if metrics.len() != mesh.num_vertices() {
            return Err(Error::Remesh(format!(
                "{} metrics for {} vertices",
                metrics.len(),
                mesh.num_vertices()
            )));
        }
        let logs = metrics.iter().map(|m| m.log()).collect::<Result<_>>()?;
        Ok(Self {
            mesh,
            locator: PointLocator::new(mesh),
            logs,
        })
    }

    /// `log M(x)`.
    pub fn log_at(&self, x: Point) -> MetricTensor {
        let k = self.locator.locate_or_nearest(self.mesh, x);
        let mut l = barycentric(self.mesh.corners(k), x).map(|v| v.max(0.0));
        let s: f64 = l.iter().sum();
        l.iter_mut().for_each(|v| *v /= s);
        let t = self.mesh.triangle(k);
        (0..3).fold(MetricTensor { m11: 0.0, m12: 0.0, m22: 0.0 }, |acc, i| {
            acc.add(&self.logs[t[i]].scaled(l[i]))
        })
    }

    pub fn at(&self, x: Point) -> MetricTensor {
        self.log_at(x).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Interior,
    /// On a straight boundary segment; may slide along `dir`.
    Boundary { dir: Point },
    Corner,
}

struct Work<'a> {
    pts: Vec<Point>,
    /// `log` of the unit-edge metric at each vertex.
    logm: Vec<MetricTensor>,
    kind: Vec<Kind>,
    tris: Vec<[usize; 3]>,
    tags: Vec<u32>,
    alive: Vec<bool>,
    vtri: Vec<Vec<usize>>,
    btag: HashMap<(usize, usize), u32>,
    field: &'a MetricField<'a>,
    scale: f64,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn interp(a: &MetricTensor, b: &MetricTensor, s: f64) -> MetricTensor {
    a.scaled(1.0 - s).add(&b.scaled(s))
}

impl<'a> Work<'a> {
    fn new(mesh: &Triangulation, field: &'a MetricField<'a>, scale: f64) -> Self {
        let nv = mesh.num_vertices();
        let mut btag = HashMap::new();
        let mut bnbr: Vec<Vec<(usize, u32)>> = vec![Vec::new(); nv];
        for (a, b, tag) in mesh.boundary_edges() {
            btag.insert(key(a, b), tag);
            bnbr[a].push((b, tag));
            bnbr[b].push((a, tag));
        }
        let pts = mesh.vertices().to_vec();
        let kind = (0..nv)
            .map(|v| match bnbr[v].as_slice() {
                [] => Kind::Interior,
                [(a, ta), (b, tb)] if ta == tb => {
                    let (pa, pb, pv) = (pts[*a], pts[*b], pts[v]);
                    let da = [pv[0] - pa[0], pv[1] - pa[1]];
                    let db = [pb[0] - pv[0], pb[1] - pv[1]];
                    let cross = da[0] * db[1] - da[1] * db[0];
                    let na = da[0].hypot(da[1]);
                    let nb = db[0].hypot(db[1]);
                    if cross.abs() <= 1e-10 * na * nb && da[0] * db[0] + da[1] * db[1] > 0.0 {
                        Kind::Boundary {
                            dir: [da[0] / na, da[1] / na],
                        }
                    } else {
                        Kind::Corner
                    }
                }
                _ => Kind::Corner,
            })
            .collect();
        let mut vtri = vec![Vec::new(); nv];
        for (k, t) in mesh.triangles().iter().enumerate() {
            for &v in t {
                vtri[v].push(k);
            }
        }
        let logm = pts.iter().map(|&x| Self::metric_log(field, scale, x)).collect();
        Self {
            pts,
            logm,
            kind,
            tris: mesh.triangles().to_vec(),
            tags: mesh.triangle_tags().to_vec(),
            alive: vec![true; mesh.num_triangles()],
            vtri,
            btag,
            field,
            scale,
        }
    }

    fn metric_log(field: &MetricField, scale: f64, x: Point) -> MetricTensor {
        let l = field.log_at(x);
        // log(s M) = log M + ln s · I
        let ls = scale.ln();
        MetricTensor {
            m11: l.m11 + ls,
            m12: l.m12,
            m22: l.m22 + ls,
        }
    }

    fn log_at(&self, x: Point) -> MetricTensor {
        Self::metric_log(self.field, self.scale, x)
    }

    /// Metric length between two positions with endpoint log-metrics, 2-point Gauss.
    fn length_between(pa: Point, la: &MetricTensor, pb: Point, lb: &MetricTensor) -> f64 {
        let e = [pb[0] - pa[0], pb[1] - pa[1]];
        let g = 0.5 / 3f64.sqrt();
        [0.5 - g, 0.5 + g]
            .iter()
            .map(|&s| interp(la, lb, s).exp().length(e))
            .sum::<f64>()
            * 0.5
    }

    fn length(&self, a: usize, b: usize) -> f64 {
        Self::length_between(self.pts[a], &self.logm[a], self.pts[b], &self.logm[b])
    }

    /// Metric length with the background field sampled along the edge (3-point Gauss). Unlike
    /// [`length`](Self::length) this sees a field that varies strongly between the endpoints.
    fn sampled_length(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.pts[a], self.pts[b]);
        let e = [pb[0] - pa[0], pb[1] - pa[1]];
        let g = 0.5 * (0.6f64).sqrt();
        [(0.5 - g, 5.0), (0.5, 8.0), (0.5 + g, 5.0)]
            .iter()
            .map(|&(s, w)| {
                let x = [pa[0] + s * e[0], pa[1] + s * e[1]];
                w * self.log_at(x).exp().length(e)
            })
            .sum::<f64>()
            / 18.0
    }

    /// Metric quality in `(0, 1]`, 1 for a triangle equilateral in the metric.
    fn quality_of(&self, p: [Point; 3], l: [&MetricTensor; 3]) -> f64 {
        let area = signed_area(p[0], p[1], p[2]);
        if area <= 0.0 {
            return area.min(0.0) - 1.0;
        }
        let mean = l[0].add(l[1]).add(l[2]).scaled(1.0 / 3.0);
        let area_m = area * (0.5 * (mean.m11 + mean.m22)).exp();
        let mut sum = 0.0;
        for i in 0..3 {
            let j = (i + 1) % 3;
            sum += Self::length_between(p[i], l[i], p[j], l[j]).powi(2);
        }
        4.0 * 3f64.sqrt() * area_m / sum
    }

    fn quality(&self, t: [usize; 3]) -> f64 {
        self.quality_of(
            [self.pts[t[0]], self.pts[t[1]], self.pts[t[2]]],
            [&self.logm[t[0]], &self.logm[t[1]], &self.logm[t[2]]],
        )
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for (k, t) in self.tris.iter().enumerate() {
            if self.alive[k] {
                for j in 0..3 {
                    set.insert(key(t[j], t[(j + 1) % 3]));
                }
            }
        }
        set.into_iter().collect()
    }

    fn shared(&self, a: usize, b: usize) -> Vec<usize> {
        self.vtri[a]
            .iter()
            .copied()
            .filter(|&k| self.tris[k].contains(&b))
            .collect()
    }

    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.vtri[v]
            .iter()
            .flat_map(|&k| self.tris[k])
            .filter(|&u| u != v)
            .collect()
    }

    fn remove_vtri(&mut self, v: usize, k: usize) {
        if let Some(i) = self.vtri[v].iter().position(|&x| x == k) {
            self.vtri[v].swap_remove(i);
        }
    }

    fn split(&mut self, a: usize, b: usize) -> usize {
        let m = self.pts.len();
        let x = [
            0.5 * (self.pts[a][0] + self.pts[b][0]),
            0.5 * (self.pts[a][1] + self.pts[b][1]),
        ];
        self.pts.push(x);
        self.logm.push(self.log_at(x));
        self.vtri.push(Vec::new());
        let kind = match self.btag.remove(&key(a, b)) {
            Some(tag) => {
                self.btag.insert(key(a, m), tag);
                self.btag.insert(key(m, b), tag);
                let d = [self.pts[b][0] - self.pts[a][0], self.pts[b][1] - self.pts[a][1]];
                let n = d[0].hypot(d[1]);
                Kind::Boundary {
                    dir: [d[0] / n, d[1] / n],
                }
            }
            None => Kind::Interior,
        };
        self.kind.push(kind);
        for k in self.shared(a, b) {
            let t = self.tris[k];
            let j = (0..3)
                .find(|&j| key(t[j], t[(j + 1) % 3]) == key(a, b))
                .expect("edge in triangle");
            let (x0, y0, c) = (t[j], t[(j + 1) % 3], t[(j + 2) % 3]);
            let nk = self.tris.len();
            self.tris[k] = [x0, m, c];
            self.tris.push([m, y0, c]);
            self.tags.push(self.tags[k]);
            self.alive.push(true);
            self.remove_vtri(y0, k);
            self.vtri[y0].push(nk);
            self.vtri[m].push(k);
            self.vtri[m].push(nk);
            self.vtri[c].push(nk);
        }
        m
    }

    /// Collapses `v` onto `w` if topology, orientation and edge lengths allow it.
    fn try_collapse(&mut self, v: usize, w: usize) -> bool {
        match self.kind[v] {
            Kind::Corner => return false,
            Kind::Boundary { .. } if !self.btag.contains_key(&key(v, w)) => return false,
            _ => {}
        }
        let shared = self.shared(v, w);
        let nv = self.neighbors(v);
        let nw = self.neighbors(w);
        let common: BTreeSet<usize> = nv.intersection(&nw).copied().collect();
        let opposite: BTreeSet<usize> = shared
            .iter()
            .flat_map(|&k| self.tris[k])
            .filter(|&u| u != v && u != w)
            .collect();
        if common != opposite {
            return false;
        }
        let mut min_old = f64::INFINITY;
        for &k in &self.vtri[v] {
            min_old = min_old.min(self.quality(self.tris[k]));
        }
        let floor = min_old.min(0.2);
        for &k in &self.vtri[v] {
            if shared.contains(&k) {
                continue;
            }
            let t = self.tris[k].map(|u| if u == v { w } else { u });
            let q = self.quality(t);
            if !(q > 0.0) || q < floor {
                return false;
            }
        }
        for &u in &nv {
            if u != w && !nw.contains(&u) && self.sampled_length(w, u) > SQRT2 {
                return false;
            }
        }
        // boundary bookkeeping: v's other boundary edge now ends at w
        if matches!(self.kind[v], Kind::Boundary { .. }) {
            let tag = self.btag.remove(&key(v, w)).expect("boundary edge");
            let other = nv
                .iter()
                .copied()
                .find(|&u| u != w && self.btag.contains_key(&key(v, u)))
                .expect("second boundary edge");
            self.btag.remove(&key(v, other));
            self.btag.insert(key(w, other), tag);
        }
        for &k in &shared {
            self.alive[k] = false;
            for u in self.tris[k] {
                if u != v {
                    self.remove_vtri(u, k);
                }
            }
        }
        let rest: Vec<usize> = self.vtri[v].iter().copied().filter(|k| !shared.contains(k)).collect();
        for k in rest {
            for u in self.tris[k].iter_mut() {
                if *u == v {
                    *u = w;
                }
            }
            self.vtri[w].push(k);
        }
        self.vtri[v].clear();
        true
    }

    /// With `cap`, flips that would create an edge longer than `max(√2, |ab|)` are refused.
    fn try_flip(&mut self, a: usize, b: usize, cap: bool) -> bool {
        if self.btag.contains_key(&key(a, b)) {
            return false;
        }
        let s = self.shared(a, b);
        if s.len() != 2 {
            return false;
        }
        // t1 runs a→b, t2 runs b→a
        let dir = |t: [usize; 3]| (0..3).any(|j| t[j] == a && t[(j + 1) % 3] == b);
        let (k1, k2) = if dir(self.tris[s[0]]) { (s[0], s[1]) } else { (s[1], s[0]) };
        let third = |t: [usize; 3]| t.into_iter().find(|&u| u != a && u != b).unwrap();
        let c = third(self.tris[k1]);
        let d = third(self.tris[k2]);
        if c == d || self.neighbors(c).contains(&d) {
            return false;
        }
        if cap && self.sampled_length(c, d) > self.sampled_length(a, b).max(SQRT2) {
            return false;
        }
        let n1 = [a, d, c];
        let n2 = [d, b, c];
        let old = self.quality(self.tris[k1]).min(self.quality(self.tris[k2]));
        let new = self.quality(n1).min(self.quality(n2));
        if !(new > old + 1e-8) {
            return false;
        }
        self.tris[k1] = n1;
        self.tris[k2] = n2;
        self.remove_vtri(a, k2);
        self.remove_vtri(b, k1);
        self.vtri[c].push(k2);
        self.vtri[d].push(k1);
        true
    }

    fn smooth_vertex(&mut self, v: usize) -> bool {
        let dir = match self.kind[v] {
            Kind::Corner => return false,
            Kind::Boundary { dir } => Some(dir),
            Kind::Interior => None,
        };
        let nb = self.neighbors(v);
        if nb.is_empty() {
            return false;
        }
        let x = self.pts[v];
        let mut delta = [0.0, 0.0];
        for &u in &nb {
            let l = self.length(v, u).max(1e-12);
            let f = 1.0 - 1.0 / l;
            delta[0] += f * (self.pts[u][0] - x[0]);
            delta[1] += f * (self.pts[u][1] - x[1]);
        }
        delta = [delta[0] / nb.len() as f64, delta[1] / nb.len() as f64];
        if let Some(t) = dir {
            let s = delta[0] * t[0] + delta[1] * t[1];
            delta = [s * t[0], s * t[1]];
        }
        let old: f64 = self.vtri[v]
            .iter()
            .map(|&k| self.quality(self.tris[k]))
            .fold(f64::INFINITY, f64::min);
        let mut step = 1.0;
        for _ in 0..3 {
            let y = [x[0] + step * delta[0], x[1] + step * delta[1]];
            let ly = self.log_at(y);
            let ok = self.vtri[v].iter().all(|&k| {
                let t = self.tris[k];
                let p = t.map(|u| if u == v { y } else { self.pts[u] });
                let l = t.map(|u| if u == v { &ly } else { &self.logm[u] });
                self.quality_of(p, l) >= old.min(0.999) * 0.999
            });
            if ok {
                self.pts[v] = y;
                self.logm[v] = ly;
                return true;
            }
            step *= 0.5;
        }
        false
    }

    fn in_band(&self) -> f64 {
        let edges = self.edges();
        let good = edges
            .iter()
            .filter(|&&(a, b)| {
                let l = self.sampled_length(a, b);
                (1.0 / SQRT2..=SQRT2).contains(&l)
            })
            .count();
        good as f64 / edges.len().max(1) as f64
    }

    /// Splits edges longer than √2, longest first; each triangle is touched at most once.
    fn split_pass(&mut self) -> usize {
        let mut ops = 0;
        let mut long: Vec<(f64, usize, usize)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (self.sampled_length(a, b), a, b))
            .filter(|e| e.0 > SQRT2)
            .collect();
        long.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut touched = vec![false; self.tris.len()];
        for (_, a, b) in long {
            let s = self.shared(a, b);
            if s.is_empty() || s.iter().any(|&k| touched[k]) {
                continue;
            }
            self.split(a, b);
            ops += 1;
            touched.resize(self.tris.len(), true);
            for k in s {
                touched[k] = true;
            }
        }
        ops
    }

    /// Removes the remaining long edges by splitting, without moving vertices. Long edges cost
    /// far more accuracy at high order than short ones do.
    fn split_long(&mut self, passes: usize) {
        for _ in 0..passes {
            if self.split_pass() == 0 {
                break;
            }
            for (a, b) in self.edges() {
                self.try_flip(a, b, true);
            }
        }
    }

    fn sweep(&mut self, opts: &RemeshOptions) -> usize {
        let mut ops = self.split_pass();
        // collapses, shortest first
        let mut short: Vec<(f64, usize, usize)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (self.sampled_length(a, b), a, b))
            .filter(|e| e.0 < 1.0 / SQRT2)
            .collect();
        short.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut vtouched = vec![false; self.pts.len()];
        let rank = |k: Kind| match k {
            Kind::Interior => 0,
            Kind::Boundary { .. } => 1,
            Kind::Corner => 2,
        };
        for (_, a, b) in short {
            if vtouched[a] || vtouched[b] || self.shared(a, b).is_empty() {
                continue;
            }
            let (v, w) = if rank(self.kind[a]) <= rank(self.kind[b]) { (a, b) } else { (b, a) };
            let done = self.try_collapse(v, w) || self.try_collapse(w, v);
            if done {
                ops += 1;
                for u in self.neighbors(a).into_iter().chain(self.neighbors(b)) {
                    vtouched[u] = true;
                }
                vtouched[a] = true;
                vtouched[b] = true;
            }
        }
        // flips until stable
        for _ in 0..4 {
            let mut flips = 0;
            for (a, b) in self.edges() {
                if self.try_flip(a, b, false) {
                    flips += 1;
                }
            }
            ops += flips;
            if flips == 0 {
                break;
            }
        }
        for _ in 0..opts.smoothing_passes {
            for v in 0..self.pts.len() {
                if !self.vtri[v].is_empty() {
                    self.smooth_vertex(v);
                }
            }
        }
        ops
    }

    fn finish(&self) -> Result<Triangulation> {
        let mut map = vec![usize::MAX; self.pts.len()];
        let mut pts = Vec::new();
        for (v, p) in self.pts.iter().enumerate() {
            if !self.vtri[v].is_empty() {
                map[v] = pts.len();
                pts.push(*p);
            }
        }
        let mut tris = Vec::new();
        let mut tags = Vec::new();
        for (k, t) in self.tris.iter().enumerate() {
            if self.alive[k] {
                tris.push(t.map(|u| map[u]));
                tags.push(self.tags[k]);
            }
        }
        let bmap: BTreeMap<(usize, usize), u32> = self.btag.iter().map(|(k, v)| (*k, *v)).collect();
        let boundary: Vec<(usize, usize, u32)> = bmap.iter().map(|(&(a, b), &t)| (map[a], map[b], t)).collect();
        Triangulation::with_tags(pts, tris, tags, &boundary)
    }
}

/// Adapts `mesh` to the vertex metric field `metrics` (element-ellipse convention, see
/// [`unit_edge_metric`]). The field is interpolated from the input mesh throughout.
pub fn remesh_internal(mesh: &Triangulation, metrics: &[MetricTensor]) -> Result<RemeshOutput> {
    remesh_with(mesh, metrics, &RemeshOptions::default())
}

pub fn remesh_with(mesh: &Triangulation, metrics: &[MetricTensor], opts: &RemeshOptions) -> Result<RemeshOutput> {
    if let Some(v) = metrics.iter().position(|m| !m.is_spd()) {
        return Err(Error::NotSpd(format!("vertex {v} metric {:?}", metrics[v])));
    }
    let field = MetricField::new(mesh, metrics)?;
    let mut w = Work::new(mesh, &field, 1.0 / 3.0);
    let mut sweeps = 0;
    let mut frac = w.in_band();
    while sweeps < opts.max_sweeps && frac < opts.target_fraction {
        let ops = w.sweep(opts);
        sweeps += 1;
        frac = w.in_band();
        if ops == 0 {
            break;
        }
    }
    w.split_long(8);
    frac = w.in_band();
    let stalled = frac < opts.target_fraction;
    if stalled {
        warn!("remesher stopped after {sweeps} sweeps with {:.1}% of edges in band", 100.0 * frac);
    }
    let out = w.finish().map_err(|e| Error::Remesh(e.to_string()))?;
    Ok(RemeshOutput {
        mesh: out,
        sweeps,
        in_band: frac,
        stalled,
    })
}

/// Fraction of edges of `mesh` with unit-edge metric length in `[1/√2, √2]`.
pub fn edge_length_fraction(mesh: &Triangulation, metrics: &[MetricTensor]) -> Result<f64> {
    let field = MetricField::new(mesh, metrics)?;
    Ok(Work::new(mesh, &field, 1.0 / 3.0).in_band())
}
