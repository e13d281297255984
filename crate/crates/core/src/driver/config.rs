use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PatchAdjacency;
use crate::hp_model::{AdaptMode, P_MAX, P_MIN};
use crate::problems::{CaseId, CaseParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemesherChoice {
    Internal,
    /// Write `.mesh`/`.mtr` files and read the mesher's output back.
    External,
}

/// Run configuration. Read from a flat `key = value` file; every key can be overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub case: CaseId,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub mode: AdaptMode,
    /// Complexity growth per adaptation when no fixed complexity is set.
    pub growth: f64,
    pub fixed_complexity: Option<f64>,
    pub max_adapt: usize,
    pub p_init: usize,
    pub p_min: usize,
    pub p_max: usize,
    /// Test enrichment; defaults to 3 with order adaptation and 2 without.
    pub delta_p: Option<usize>,
    /// Select orders from patch solves (hp); otherwise orders stay fixed (h only).
    pub adapt_p: bool,
    pub anisotropy: bool,
    /// Neighbors in the order-selection patches.
    pub patch: PatchAdjacency,
    pub remesher: RemesherChoice,
    /// Shell command for the external mesher; `{in}` and `{out}` expand to file prefixes.
    pub mesher_cmd: Option<String>,
    pub mesh_in: Option<PathBuf>,
    /// Cells per unit length of the built-in structured initial mesh.
    pub initial_n: Option<usize>,
    pub out_dir: PathBuf,
    /// Worker threads, 0 for the default pool.
    pub threads: usize,
    pub seed: u64,
    pub condense: bool,
    /// Stop once the energy error falls below this value.
    pub error_floor: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            case: CaseId::BoundaryLayer,
            epsilon: None,
            alpha: None,
            mode: AdaptMode::Energy,
            growth: 1.30,
            fixed_complexity: None,
            max_adapt: 10,
            p_init: 2,
            p_min: P_MIN,
            p_max: P_MAX,
            delta_p: None,
            adapt_p: true,
            anisotropy: true,
            patch: PatchAdjacency::Edge,
            remesher: RemesherChoice::Internal,
            mesher_cmd: None,
            mesh_in: None,
            initial_n: None,
            out_dir: PathBuf::from("out"),
            threads: 0,
            seed: 0,
            condense: true,
            error_floor: 1e-14,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "case",
    "epsilon",
    "alpha",
    "mode",
    "growth",
    "fixed_complexity",
    "max_adapt",
    "p_init",
    "p_min",
    "p_max",
    "delta_p",
    "adapt_p",
    "anisotropy",
    "patch",
    "remesher",
    "mesher_cmd",
    "mesh_in",
    "initial_n",
    "out_dir",
    "threads",
    "seed",
    "condense",
    "error_floor",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{v}` for `{key}`"))),
    }
}

impl AdaptConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "case" => {
                self.case = CaseId::parse(v).map_err(|e| Error::Config(e.to_string()))?;
            }
            "epsilon" => self.epsilon = opt(key, v)?,
            "alpha" => self.alpha = opt(key, v)?,
            "mode" => self.mode = AdaptMode::parse(v)?,
            "growth" => self.growth = num(key, v)?,
            "fixed_complexity" => self.fixed_complexity = opt(key, v)?,
            "max_adapt" => self.max_adapt = num(key, v)?,
            "p_init" => self.p_init = num(key, v)?,
            "p_min" => self.p_min = num(key, v)?,
            "p_max" => self.p_max = num(key, v)?,
            "delta_p" => self.delta_p = opt(key, v)?,
            "adapt_p" => self.adapt_p = flag(key, v)?,
            "anisotropy" => self.anisotropy = flag(key, v)?,
            "patch" => {
                self.patch = match v {
                    "edge" => PatchAdjacency::Edge,
                    "vertex" => PatchAdjacency::Vertex,
                    _ => return Err(Error::Config(format!("unknown patch adjacency `{v}`"))),
                }
            }
            "remesher" => {
                self.remesher = match v {
                    "internal" => RemesherChoice::Internal,
                    "external" => RemesherChoice::External,
                    _ => return Err(Error::Config(format!("unknown remesher `{v}`"))),
                }
            }
            "mesher_cmd" => self.mesher_cmd = (!v.is_empty()).then(|| v.to_string()),
            "mesh_in" => self.mesh_in = (!v.is_empty()).then(|| PathBuf::from(v)),
            "initial_n" => self.initial_n = opt(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "threads" => self.threads = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "condense" => self.condense = flag(key, v)?,
            "error_floor" => self.error_floor = num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fixed_complexity.is_none() && !(self.growth > 1.0) {
            return Err(Error::Config(format!("growth {} must exceed 1", self.growth)));
        }
        if let Some(n) = self.fixed_complexity {
            if !(n > 0.0) {
                return Err(Error::Config(format!("fixed_complexity {n} must be positive")));
            }
        }
        if self.p_min < 1 || !(self.p_min <= self.p_init && self.p_init <= self.p_max) {
            return Err(Error::Config(format!(
                "need 1 <= p_min <= p_init <= p_max, got {} {} {}",
                self.p_min, self.p_init, self.p_max
            )));
        }
        if self.p_max > 14 {
            return Err(Error::Config(format!("p_max {} exceeds 14", self.p_max)));
        }
        if self.delta_p == Some(0) {
            return Err(Error::Config("delta_p must be at least 1".into()));
        }
        if self.initial_n == Some(0) {
            return Err(Error::Config("initial_n must be positive".into()));
        }
        if self.remesher == RemesherChoice::External && self.mesher_cmd.is_none() {
            return Err(Error::Config("external remesher needs `mesher_cmd`".into()));
        }
        Ok(())
    }

    pub fn delta_p(&self) -> usize {
        self.delta_p.unwrap_or(if self.adapt_p { 3 } else { 2 })
    }

    pub fn case_params(&self) -> CaseParams {
        CaseParams {
            epsilon: self.epsilon,
            alpha: self.alpha,
            center: None,
        }
    }

    /// The configuration as `key = value` text that [`parse`](Self::parse) reads back.
    pub fn to_text(&self) -> String {
        let o = |x: Option<String>| x.unwrap_or_default();
        let lines = [
            ("case", self.case.name().to_string()),
            ("epsilon", o(self.epsilon.map(|v| v.to_string()))),
            ("alpha", o(self.alpha.map(|v| v.to_string()))),
            ("mode", format!("{:?}", self.mode).to_lowercase()),
            ("growth", self.growth.to_string()),
            ("fixed_complexity", o(self.fixed_complexity.map(|v| v.to_string()))),
            ("max_adapt", self.max_adapt.to_string()),
            ("p_init", self.p_init.to_string()),
            ("p_min", self.p_min.to_string()),
            ("p_max", self.p_max.to_string()),
            ("delta_p", o(self.delta_p.map(|v| v.to_string()))),
            ("adapt_p", self.adapt_p.to_string()),
            ("anisotropy", self.anisotropy.to_string()),
            ("patch", format!("{:?}", self.patch).to_lowercase()),
            ("remesher", format!("{:?}", self.remesher).to_lowercase()),
            ("mesher_cmd", o(self.mesher_cmd.clone())),
            ("mesh_in", o(self.mesh_in.as_ref().map(|p| p.display().to_string()))),
            ("initial_n", o(self.initial_n.map(|v| v.to_string()))),
            ("out_dir", self.out_dir.display().to_string()),
            ("threads", self.threads.to_string()),
            ("seed", self.seed.to_string()),
            ("condense", self.condense.to_string()),
            ("error_floor", self.error_floor.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
