//! BAMG-compatible `.mesh` / `.mtr` ASCII files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{MetricTensor, Triangulation};

/// Serialized mesh and metric files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterchangeBundle {
    pub mesh: String,
    pub metric: String,
}

/// Mesh file text: `Vertices`, `Edges` (boundary, with tags) and `Triangles`, 1-based.
pub fn mesh_to_bamg(mesh: &Triangulation) -> String {
    let mut s = String::new();
    s.push_str("MeshVersionFormatted 1\n\nDimension 2\n\nVertices\n");
    let bverts = mesh.boundary_vertices();
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for (v, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], u32::from(bverts[v]));
    }
    let be = mesh.boundary_edges();
    let _ = writeln!(s, "\nEdges\n{}", be.len());
    for (a, b, tag) in &be {
        let _ = writeln!(s, "{} {} {}", a + 1, b + 1, tag);
    }
    let _ = writeln!(s, "\nTriangles\n{}", mesh.num_triangles());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, mesh.triangle_tag(k));
    }
    s.push_str("\nEnd\n");
    s
}

/// Metric file text: `nv 3` then one `m11 m12 m22` row per vertex.
pub fn metric_to_bamg(metrics: &[MetricTensor]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} 3", metrics.len());
    for m in metrics {
        let _ = writeln!(s, "{} {} {}", m.m11, m.m12, m.m22);
    }
    s
}

pub fn bundle(mesh: &Triangulation, metrics: &[MetricTensor]) -> Result<InterchangeBundle> {
    if metrics.len() != mesh.num_vertices() {
        return Err(Error::Remesh(format!(
            "{} metrics for {} vertices",
            metrics.len(),
            mesh.num_vertices()
        )));
    }
    if let Some(v) = metrics.iter().position(|m| !m.is_spd()) {
        return Err(Error::NotSpd(format!("vertex {v} metric {:?}", metrics[v])));
    }
    Ok(InterchangeBundle {
        mesh: mesh_to_bamg(mesh),
        metric: metric_to_bamg(metrics),
    })
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

/// Writes `<prefix>.mesh` and `<prefix>.mtr`.
pub fn interchange_write(mesh: &Triangulation, metrics: &[MetricTensor], prefix: impl AsRef<Path>) -> Result<()> {
    let b = bundle(mesh, metrics)?;
    std::fs::write(with_ext(prefix.as_ref(), "mesh"), b.mesh)?;
    std::fs::write(with_ext(prefix.as_ref(), "mtr"), b.metric)?;
    Ok(())
}

/// Reads `<prefix>.mesh`, and `<prefix>.mtr` when present.
pub fn interchange_read(prefix: impl AsRef<Path>) -> Result<(Triangulation, Option<Vec<MetricTensor>>)> {
    let mp = with_ext(prefix.as_ref(), "mesh");
    let mesh = parse_bamg_mesh(&std::fs::read_to_string(&mp)?, &mp.display().to_string())?;
    let tp = with_ext(prefix.as_ref(), "mtr");
    let metric = if tp.exists() {
        let m = parse_bamg_metric(&std::fs::read_to_string(&tp)?, &tp.display().to_string())?;
        if m.len() != mesh.num_vertices() {
            return Err(Error::Parse {
                path: tp.display().to_string(),
                line: 1,
                msg: format!("{} metric rows for {} vertices", m.len(), mesh.num_vertices()),
            });
        }
        Some(m)
    } else {
        None
    };
    Ok((mesh, metric))
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    path: &'a str,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str, path: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                l.split_whitespace().map(move |t| (i + 1, t))
            })
            .collect();
        Self { items, pos: 0, path }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or(self.items.last())
            .map(|t| t.0)
            .unwrap_or(1)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.items.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let line = self.line();
        let (line, tok) = self
            .next()
            .ok_or_else(|| self.err(line, format!("unexpected end of file, expected {what}")))?;
        tok.parse()
            .map_err(|_| self.err(line, format!("expected {what}, found `{tok}`")))
    }

    fn index(&mut self, n: usize) -> Result<usize> {
        let line = self.line();
        let i: usize = self.parse("vertex index")?;
        if i == 0 || i > n {
            return Err(self.err(line, format!("vertex index {i} out of range 1..={n}")));
        }
        Ok(i - 1)
    }
}

/// Parses the `.mesh` dialect written by [`mesh_to_bamg`]. Unknown sections are an error.
pub fn parse_bamg_mesh(text: &str, path: &str) -> Result<Triangulation> {
    let mut tk = Tokens::new(text, path);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    let mut edges = Vec::new();
    let mut ended = false;
    while let Some((line, kw)) = tk.next() {
        match kw {
            "MeshVersionFormatted" => {
                tk.parse::<u32>("format version")?;
            }
            "Dimension" => {
                let d: u32 = tk.parse("dimension")?;
                if d != 2 {
                    return Err(tk.err(line, format!("dimension {d} is not 2")));
                }
            }
            "Vertices" => {
                let n: usize = tk.parse("vertex count")?;
                for _ in 0..n {
                    let x: f64 = tk.parse("x coordinate")?;
                    let y: f64 = tk.parse("y coordinate")?;
                    tk.parse::<i64>("vertex reference")?;
                    vertices.push([x, y]);
                }
            }
            "Edges" => {
                let n: usize = tk.parse("edge count")?;
                for _ in 0..n {
                    let a = tk.index(vertices.len())?;
                    let b = tk.index(vertices.len())?;
                    let tag: u32 = tk.parse("edge reference")?;
                    edges.push((a, b, tag));
                }
            }
            "Triangles" => {
                let n: usize = tk.parse("triangle count")?;
                for _ in 0..n {
                    let a = tk.index(vertices.len())?;
                    let b = tk.index(vertices.len())?;
                    let c = tk.index(vertices.len())?;
                    tags.push(tk.parse::<u32>("triangle reference")?);
                    triangles.push([a, b, c]);
                }
            }
            "End" => {
                ended = true;
                break;
            }
            other => return Err(tk.err(line, format!("unknown section `{other}`"))),
        }
    }
    if !ended {
        return Err(tk.err(tk.line(), "missing `End`"));
    }
    Triangulation::with_tags(vertices, triangles, tags, &edges).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: 0,
        msg: e.to_string(),
    })
}

/// Parses a `.mtr` file with three entries per row; every row must be SPD.
pub fn parse_bamg_metric(text: &str, path: &str) -> Result<Vec<MetricTensor>> {
    let mut tk = Tokens::new(text, path);
    let n: usize = tk.parse("metric count")?;
    let line = tk.line();
    let width: usize = tk.parse("metric width")?;
    if width != 3 {
        return Err(tk.err(line, format!("metric width {width} is not 3")));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let line = tk.line();
        let m11: f64 = tk.parse("m11")?;
        let m12: f64 = tk.parse("m12")?;
        let m22: f64 = tk.parse("m22")?;
        let m = MetricTensor { m11, m12, m22 };
        if !m.is_spd() {
            return Err(tk.err(line, format!("metric ({m11}, {m12}, {m22}) is not SPD")));
        }
        out.push(m);
    }
    if let Some((line, tok)) = tk.next() {
        return Err(tk.err(line, format!("trailing data `{tok}`")));
    }
    Ok(out)
}
