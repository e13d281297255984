use super::mesh::Triangulation;
use super::Point;

/// Bucket grid over triangle bounding boxes for point location.
#[derive(Clone, Debug)]
pub struct PointLocator {
    origin: Point,
    cell: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    centroids: Vec<Point>,
}

/// Barycentric coordinates of `x` in triangle `t`.
pub fn barycentric(t: [Point; 3], x: Point) -> [f64; 3] {
    let det = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
    let l1 = ((x[0] - t[0][0]) * (t[2][1] - t[0][1]) - (x[1] - t[0][1]) * (t[2][0] - t[0][0])) / det;
    let l2 = ((t[1][0] - t[0][0]) * (x[1] - t[0][1]) - (t[1][1] - t[0][1]) * (x[0] - t[0][0])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl PointLocator {
    pub fn new(mesh: &Triangulation) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let n = ((mesh.num_triangles() as f64).sqrt().ceil() as usize).max(1);
        let span = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        let cell = [span[0] / n as f64, span[1] / n as f64];
        let mut buckets = vec![Vec::new(); n * n];
        let clamp = |v: f64, d: usize| (((v - lo[d]) / cell[d]).floor().max(0.0) as usize).min(n - 1);
        for k in 0..mesh.num_triangles() {
            let c = mesh.corners(k);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in c {
                for d in 0..2 {
                    a[d] = a[d].min(p[d]);
                    b[d] = b[d].max(p[d]);
                }
            }
            for j in clamp(a[1], 1)..=clamp(b[1], 1) {
                for i in clamp(a[0], 0)..=clamp(b[0], 0) {
                    buckets[j * n + i].push(k);
                }
            }
        }
        let centroids = (0..mesh.num_triangles()).map(|k| mesh.centroid(k)).collect();
        Self {
            origin: lo,
            cell,
            nx: n,
            ny: n,
            buckets,
            centroids,
        }
    }

    fn bucket(&self, x: Point) -> Option<usize> {
        let i = ((x[0] - self.origin[0]) / self.cell[0]).floor();
        let j = ((x[1] - self.origin[1]) / self.cell[1]).floor();
        let tol = 1e-9;
        if i < -tol || j < -tol || i > self.nx as f64 + tol || j > self.ny as f64 + tol {
            return None;
        }
        let i = (i.max(0.0) as usize).min(self.nx - 1);
        let j = (j.max(0.0) as usize).min(self.ny - 1);
        Some(j * self.nx + i)
    }

    /// Triangle containing `x` (lowest id on ties) and its barycentric coordinates.
    pub fn locate(&self, mesh: &Triangulation, x: Point) -> Option<(usize, [f64; 3])> {
        let b = self.bucket(x)?;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[b] {
            let l = barycentric(mesh.corners(k), x);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= -1e-10 {
                return Some((k, l));
            }
            if m >= -1e-7 && best.as_ref().is_none_or(|(_, _, bm)| m > *bm) {
                best = Some((k, l, m));
            }
        }
        best.map(|(k, l, _)| (k, l))
    }

    /// Like [`locate`](Self::locate) but falls back to the element with the nearest centroid.
    pub fn locate_or_nearest(&self, mesh: &Triangulation, x: Point) -> usize {
        if let Some((k, _)) = self.locate(mesh, x) {
            return k;
        }
        let mut best = (f64::INFINITY, 0);
        for (k, c) in self.centroids.iter().enumerate() {
            let d = (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }
}
