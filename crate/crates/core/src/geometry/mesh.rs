use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

use super::Point;
use crate::error::{Error, Result};

/// Tag assigned to boundary edges that were not listed explicitly.
pub const DEFAULT_BOUNDARY_TAG: u32 = 1;

/// Geometry constant relating triangle area to ellipse density, `|k| = α / d`.
pub const ALPHA: f64 = 3.0 * 1.732_050_807_568_877_2 / 4.0;

/// Complexity weight `w(p) = 2(p+1)(p+2)/(3√3)`; `α·w(p)` is the scalar dof count of order `p`.
pub fn complexity_weight(p: usize) -> f64 {
    let p = p as f64;
    2.0 * (p + 1.0) * (p + 2.0) / (3.0 * 3f64.sqrt())
}

/// Number of polynomials of total degree `≤ p` in two variables.
pub fn scalar_dofs(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Endpoints, lower index first. The edge parameter runs from `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles, lower id first.
    pub triangles: [Option<usize>; 2],
    pub boundary_tag: Option<u32>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

/// A conforming triangulation with derived edge connectivity.
///
/// Local edge `j` of a triangle joins its vertices `j` and `j+1 (mod 3)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    triangle_tags: Vec<u32>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl Triangulation {
    /// Builds the connectivity and validates the mesh. `boundary` lists tagged boundary edges;
    /// untagged boundary edges receive [`DEFAULT_BOUNDARY_TAG`].
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &[(usize, usize, u32)],
    ) -> Result<Self> {
        let tags = vec![0; triangles.len()];
        Self::with_tags(vertices, triangles, tags, boundary)
    }

    pub fn with_tags(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        triangle_tags: Vec<u32>,
        boundary: &[(usize, usize, u32)],
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if triangle_tags.len() != triangles.len() {
            return Err(Error::InvalidMesh("triangle tag count mismatch".into()));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {k} has vertex index out of range")));
            }
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(a > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} has non-positive signed area {a}"
                )));
            }
        }
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        for (k, t) in triangles.iter().enumerate() {
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [None, None],
                        boundary_tag: None,
                    });
                    edges.len() - 1
                });
                let e = &mut edges[id];
                match e.triangles {
                    [None, _] => e.triangles[0] = Some(k),
                    [Some(_), None] => e.triangles[1] = Some(k),
                    _ => {
                        return Err(Error::InvalidMesh(format!(
                            "edge ({}, {}) shared by more than two triangles",
                            key.0, key.1
                        )))
                    }
                }
                triangle_edges[k][j] = id;
            }
        }
        // orientation consistency: an interior edge is traversed in opposite directions
        for (id, e) in edges.iter().enumerate() {
            if let [Some(t0), Some(t1)] = e.triangles {
                let dir = |k: usize| {
                    let j = triangle_edges[k].iter().position(|&x| x == id).unwrap();
                    triangles[k][j] == e.vertices[0]
                };
                if dir(t0) == dir(t1) {
                    return Err(Error::InvalidMesh(format!(
                        "inconsistent orientation across edge {:?}",
                        e.vertices
                    )));
                }
            }
        }
        for &(a, b, tag) in boundary {
            let key = (a.min(b), a.max(b));
            let id = *lookup.get(&key).ok_or_else(|| {
                Error::InvalidMesh(format!("boundary edge ({a}, {b}) is not a mesh edge"))
            })?;
            if !edges[id].is_boundary() {
                return Err(Error::InvalidMesh(format!("edge ({a}, {b}) is not on the boundary")));
            }
            edges[id].boundary_tag = Some(tag);
        }
        for e in edges.iter_mut() {
            if e.is_boundary() && e.boundary_tag.is_none() {
                e.boundary_tag = Some(DEFAULT_BOUNDARY_TAG);
            }
        }
        Ok(Self {
            vertices,
            triangles,
            triangle_tags,
            edges,
            triangle_edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [usize; 3] {
        self.triangles[k]
    }

    pub fn triangle_tag(&self, k: usize) -> u32 {
        self.triangle_tags[k]
    }

    pub fn triangle_tags(&self) -> &[u32] {
        &self.triangle_tags
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.triangle_edges[k]
    }

    pub fn corners(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.corners(k);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.area(k)).sum()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.corners(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Diameter (longest edge) of triangle `k`.
    pub fn diameter(&self, k: usize) -> f64 {
        self.triangle_edges[k]
            .iter()
            .map(|&e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    /// Unit outward normal of local edge `j` of triangle `k`.
    pub fn outward_normal(&self, k: usize, j: usize) -> Point {
        let t = self.triangles[k];
        let (a, b) = (self.vertices[t[j]], self.vertices[t[(j + 1) % 3]]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let l = dx.hypot(dy);
        [dy / l, -dx / l]
    }

    /// Position along edge `e` at parameter `t ∈ [0, 1]`.
    pub fn edge_point(&self, e: usize, t: f64) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }

    /// Edge parameter of a point lying on edge `e`.
    pub fn edge_parameter(&self, e: usize, x: Point) -> f64 {
        let [a, b] = self.edges[e].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let d = [q[0] - p[0], q[1] - p[1]];
        ((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, e: usize) -> Point {
        let k = self.edges[e].triangles[0].expect("edge has a triangle");
        let j = self.local_edge_index(k, e);
        self.outward_normal(k, j)
    }

    pub fn local_edge_index(&self, k: usize, e: usize) -> usize {
        self.triangle_edges[k]
            .iter()
            .position(|&x| x == e)
            .expect("edge belongs to triangle")
    }

    /// Triangles sharing an edge with `k`, in local edge order.
    pub fn edge_neighbors(&self, k: usize) -> Vec<usize> {
        self.triangle_edges[k]
            .iter()
            .filter_map(|&e| {
                let [a, b] = self.edges[e].triangles;
                match (a, b) {
                    (Some(a), Some(b)) => Some(if a == k { b } else { a }),
                    _ => None,
                }
            })
            .collect()
    }

    /// For every vertex, the triangles containing it (ascending ids).
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &v in t {
                out[v].push(k);
            }
        }
        out
    }

    /// Flags vertices touching at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut out = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            out[e.vertices[0]] = true;
            out[e.vertices[1]] = true;
        }
        out
    }

    /// Boundary edges as `(v1, v2, tag)` with the triangle's orientation.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for (k, t) in self.triangles.iter().enumerate() {
            for j in 0..3 {
                let e = &self.edges[self.triangle_edges[k][j]];
                if e.is_boundary() {
                    out.push((t[j], t[(j + 1) % 3], e.boundary_tag.unwrap_or(DEFAULT_BOUNDARY_TAG)));
                }
            }
        }
        out
    }

    /// Reads the native text format: header `nv nt nbe`, then `x y` vertex lines,
    /// `v1 v2 v3 tag` triangle lines and `v1 v2 tag` boundary lines, all 1-based.
    pub fn read_native(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_native(&text, &path.display().to_string())
    }

    pub fn parse_native(text: &str, source: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse {
            path: source.to_string(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next_fields = |n: usize, what: &str| -> Result<(usize, Vec<f64>)> {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(0, &format!("unexpected end of file, expected {what}")))?;
            let vals: std::result::Result<Vec<f64>, _> =
                l.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| perr(ln, &format!("{what}: {e}")))?;
            if vals.len() < n {
                return Err(perr(ln, &format!("{what}: expected {n} fields")));
            }
            Ok((ln, vals))
        };
        let (hl, header) = next_fields(3, "header `nv nt nbe`")?;
        let as_index = |x: f64, ln: usize, n: usize| -> Result<usize> {
            if x.fract() != 0.0 || x < 1.0 || x as usize > n {
                return Err(perr(ln, &format!("index {x} out of range 1..={n}")));
            }
            Ok(x as usize - 1)
        };
        let count = |x: f64| -> Result<usize> {
            if x.fract() != 0.0 || x < 0.0 {
                return Err(perr(hl, "counts must be non-negative integers"));
            }
            Ok(x as usize)
        };
        let (nv, nt, nbe) = (count(header[0])?, count(header[1])?, count(header[2])?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (_, v) = next_fields(2, "vertex `x y`")?;
            vertices.push([v[0], v[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut tags = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, v) = next_fields(4, "triangle `v1 v2 v3 tag`")?;
            triangles.push([as_index(v[0], ln, nv)?, as_index(v[1], ln, nv)?, as_index(v[2], ln, nv)?]);
            tags.push(v[3] as u32);
        }
        let mut boundary = Vec::with_capacity(nbe);
        for _ in 0..nbe {
            let (ln, v) = next_fields(3, "boundary edge `v1 v2 tag`")?;
            boundary.push((as_index(v[0], ln, nv)?, as_index(v[1], ln, nv)?, v[2] as u32));
        }
        Self::with_tags(vertices, triangles, tags, &boundary)
    }

    pub fn to_native(&self) -> String {
        use std::fmt::Write;
        let b = self.boundary_edges();
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.num_vertices(), self.num_triangles(), b.len()).unwrap();
        for v in &self.vertices {
            writeln!(s, "{:e} {:e}", v[0], v[1]).unwrap();
        }
        for (t, tag) in self.triangles.iter().zip(&self.triangle_tags) {
            writeln!(s, "{} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, tag).unwrap();
        }
        for (a, c, tag) in b {
            writeln!(s, "{} {} {}", a + 1, c + 1, tag).unwrap();
        }
        s
    }

    pub fn write_native(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_native())?;
        Ok(())
    }

    /// Structured mesh of `[x0,x1]×[y0,y1]` with `nx × ny` cells, each split along its
    /// lower-left to upper-right diagonal. Cells for which `keep` returns false are skipped.
    pub fn structured(
        x: (f64, f64),
        y: (f64, f64),
        nx: usize,
        ny: usize,
        keep: impl Fn(Point) -> bool,
        tag: impl Fn(Point, Point) -> u32,
    ) -> Result<Self> {
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let coord = |i: usize, j: usize| {
            [
                x.0 + (x.1 - x.0) * i as f64 / nx as f64,
                y.0 + (y.1 - y.0) * j as f64 / ny as f64,
            ]
        };
        let mut used = vec![usize::MAX; (nx + 1) * (ny + 1)];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut id = |i: usize, j: usize, vertices: &mut Vec<Point>| {
            let g = idx(i, j);
            if used[g] == usize::MAX {
                used[g] = vertices.len();
                vertices.push(coord(i, j));
            }
            used[g]
        };
        for j in 0..ny {
            for i in 0..nx {
                let c = coord(i, j);
                let d = coord(i + 1, j + 1);
                if !keep([0.5 * (c[0] + d[0]), 0.5 * (c[1] + d[1])]) {
                    continue;
                }
                let a = id(i, j, &mut vertices);
                let b = id(i + 1, j, &mut vertices);
                let c = id(i + 1, j + 1, &mut vertices);
                let d = id(i, j + 1, &mut vertices);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let untagged = Self::new(vertices.clone(), triangles.clone(), &[])?;
        let boundary: Vec<_> = untagged
            .boundary_edges()
            .into_iter()
            .map(|(a, b, _)| (a, b, tag(vertices[a], vertices[b])))
            .collect();
        Self::new(vertices, triangles, &boundary)
    }

    /// Unit square with `n × n` cells (`2n²` triangles). Tags: 1 bottom, 2 right, 3 top, 4 left.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::structured((0.0, 1.0), (0.0, 1.0), n, n, |_| true, |a, b| {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if m[1] < 1e-12 {
                1
            } else if m[0] > 1.0 - 1e-12 {
                2
            } else if m[1] > 1.0 - 1e-12 {
                3
            } else {
                4
            }
        })
    }

    /// `(-1,1)² \ [0,1]×[-1,0]` with `n × n` cells per unit quadrant (`6n²` triangles).
    /// Tags run counterclockwise from the bottom edge: 1 `y=-1`, 2 `x=0`, 3 `y=0`, 4 `x=1`,
    /// 5 `y=1`, 6 `x=-1`.
    pub fn lshape(n: usize) -> Result<Self> {
        Self::structured(
            (-1.0, 1.0),
            (-1.0, 1.0),
            2 * n,
            2 * n,
            |c| !(c[0] > 0.0 && c[1] < 0.0),
            |a, b| {
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let tol = 1e-12;
                if (m[1] + 1.0).abs() < tol {
                    1
                } else if m[0].abs() < tol && m[1] < 0.0 {
                    2
                } else if m[1].abs() < tol && m[0] > 0.0 {
                    3
                } else if (m[0] - 1.0).abs() < tol {
                    4
                } else if (m[1] - 1.0).abs() < tol {
                    5
                } else {
                    6
                }
            },
        )
    }
}

/// A triangulation together with its per-element polynomial orders.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HpMesh {
    pub mesh: Triangulation,
    pub p: Vec<usize>,
}

impl HpMesh {
    pub fn new(mesh: Triangulation, p: Vec<usize>) -> Result<Self> {
        if p.len() != mesh.num_triangles() {
            return Err(Error::InvalidMesh(format!(
                "order vector has {} entries for {} triangles",
                p.len(),
                mesh.num_triangles()
            )));
        }
        if let Some(k) = p.iter().position(|&q| q == 0) {
            return Err(Error::InvalidMesh(format!("element {k} has order 0")));
        }
        Ok(Self { mesh, p })
    }

    pub fn uniform(mesh: Triangulation, p: usize) -> Result<Self> {
        let n = mesh.num_triangles();
        Self::new(mesh, vec![p; n])
    }

    /// Verifies `p_k ≤ p_max` for every element.
    pub fn check_max_order(&self, p_max: usize) -> Result<()> {
        match self.p.iter().position(|&q| q > p_max) {
            Some(k) => Err(Error::InvalidMesh(format!(
                "element {k} has order {} > p_max = {p_max}",
                self.p[k]
            ))),
            None => Ok(()),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.p.len()
    }

    pub fn average_order(&self) -> f64 {
        self.p.iter().sum::<usize>() as f64 / self.p.len() as f64
    }

    /// Order of the skeleton spaces on edge `e`: the larger order of its neighbors.
    pub fn edge_order(&self, e: usize) -> usize {
        self.mesh.edge(e)
            .triangles
            .iter()
            .flatten()
            .map(|&k| self.p[k])
            .max()
            .unwrap_or(1)
    }
}

/// `Σ_k α·w(p_k)`, i.e. the number of scalar-field degrees of freedom.
pub fn mesh_complexity(mesh: &HpMesh) -> f64 {
    complexity_of(&mesh.p)
}

/// Complexity of an arbitrary set of element orders.
pub fn complexity_of(orders: &[usize]) -> f64 {
    orders.iter().map(|&p| ALPHA * complexity_weight(p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_square_counts() {
        let m = Triangulation::unit_square(4).unwrap();
        assert_eq!(m.num_triangles(), 32);
        assert_eq!(m.num_vertices(), 25);
        assert_eq!(m.num_edges(), 56);
        assert_relative_eq!(m.total_area(), 1.0, epsilon = 1e-14);
        let b = m.edges().iter().filter(|e| e.is_boundary()).count();
        assert_eq!(b, 16);
        for e in m.edges() {
            let n = e.triangles.iter().flatten().count();
            assert_eq!(n, if e.is_boundary() { 1 } else { 2 });
        }
        let tags: Vec<u32> = m.edges().iter().filter_map(|e| e.boundary_tag).collect();
        for t in 1..=4 {
            assert_eq!(tags.iter().filter(|&&x| x == t).count(), 4);
        }
    }

    #[test]
    fn lshape_area_and_tags() {
        let m = Triangulation::lshape(2).unwrap();
        assert_eq!(m.num_triangles(), 24);
        assert_relative_eq!(m.total_area(), 3.0, epsilon = 1e-14);
        let mut tags: Vec<u32> = m.edges().iter().filter_map(|e| e.boundary_tag).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_clockwise_and_bad_indices() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Triangulation::new(v.clone(), vec![[0, 2, 1]], &[]).is_err());
        assert!(Triangulation::new(v.clone(), vec![[0, 1, 3]], &[]).is_err());
        assert!(Triangulation::new(v, vec![[0, 1, 2]], &[(0, 1, 7)]).is_ok());
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0]];
        let t = vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        assert!(Triangulation::new(v, t, &[]).is_err());
    }

    #[test]
    fn native_roundtrip() {
        let m = Triangulation::unit_square(2).unwrap();
        let text = m.to_native();
        let back = Triangulation::parse_native(&text, "mem").unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn native_parse_errors_carry_line() {
        let text = "3 1 0\n0 0\n1 0\n0 1\n1 2 9 0\n";
        match Triangulation::parse_native(text, "bad") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complexity_examples() {
        let hp = HpMesh::uniform(Triangulation::unit_square(4).unwrap(), 2).unwrap();
        assert_relative_eq!(mesh_complexity(&hp), 192.0, max_relative = 1e-14);
        let one = Triangulation::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &[])
            .unwrap();
        let hp = HpMesh::uniform(one, 1).unwrap();
        assert_relative_eq!(mesh_complexity(&hp), 3.0, max_relative = 1e-14);
        let hp = HpMesh::uniform(Triangulation::unit_square(16).unwrap(), 2).unwrap();
        assert_relative_eq!(mesh_complexity(&hp), 3072.0, max_relative = 1e-14);
    }

    #[test]
    fn hp_mesh_invariants() {
        let m = Triangulation::unit_square(1).unwrap();
        assert!(HpMesh::new(m.clone(), vec![1]).is_err());
        assert!(HpMesh::new(m.clone(), vec![0, 1]).is_err());
        let hp = HpMesh::new(m, vec![3, 11]).unwrap();
        assert!(hp.check_max_order(10).is_err());
        let shared = (0..hp.mesh.num_edges())
            .find(|&e| !hp.mesh.edge(e).is_boundary())
            .unwrap();
        assert_eq!(hp.edge_order(shared), 11);
    }

    proptest! {
        #[test]
        fn complexity_additive(a in proptest::collection::vec(1usize..12, 0..40),
                               b in proptest::collection::vec(1usize..12, 0..40)) {
            let mut ab = a.clone();
            ab.extend(&b);
            let lhs = complexity_of(&ab);
            let rhs = complexity_of(&a) + complexity_of(&b);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
            let direct: usize = ab.iter().map(|&p| scalar_dofs(p)).sum();
            prop_assert!((lhs - direct as f64).abs() <= 1e-10 * lhs.max(1.0));
        }
    }
}
