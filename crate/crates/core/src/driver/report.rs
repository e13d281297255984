use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AdaptConfig;
use super::run::{ConvergenceRecord, RECORD_COLUMNS};
use crate::error::{Error, Result};

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_else(|| "nan".into())
}

/// `convergence.csv`: header plus one row per record, columns in [`RECORD_COLUMNS`] order.
pub fn write_convergence_csv(path: impl AsRef<Path>, records: &[ConvergenceRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", RECORD_COLUMNS.join(","))?;
    for r in records {
        let row = [
            r.adapt.to_string(),
            r.ne.to_string(),
            r.ndof.to_string(),
            cell(Some(r.cbrt_ndof)),
            cell(Some(r.complexity)),
            cell(Some(r.p_avg)),
            cell(r.l2_error),
            cell(Some(r.energy_error)),
            cell(r.linf_error),
            cell(r.h1_semi_error),
            cell(r.h1_error),
            cell(r.goal_error),
            cell(r.dwr),
        ];
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_records_json(path: impl AsRef<Path>, records: &[ConvergenceRecord]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(records)?)?;
    Ok(())
}

pub fn read_records_json(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRecord>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Least-squares fit `ln e = ln C − b·∛ndof` of the energy error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub b: f64,
    pub log_c: f64,
    pub r_squared: f64,
}

pub fn exp_fit(records: &[ConvergenceRecord]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.energy_error > 0.0)
        .map(|r| (r.cbrt_ndof, r.energy_error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(ExpFit {
        b: -slope,
        log_c: my - slope * mx,
        r_squared,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: AdaptConfig,
    pub columns: Vec<String>,
    pub records: usize,
    pub cbrt_ndof: Vec<f64>,
    pub exp_fit: Option<ExpFit>,
    pub meshes: Vec<String>,
    pub pdist: Vec<String>,
}

/// Writes `convergence.csv`, `records.json` and `manifest.json` into `dir`.
pub fn emit_reports(records: &[ConvergenceRecord], cfg: &AdaptConfig, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    if records.is_empty() {
        return Err(Error::Config("no records to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    write_convergence_csv(dir.join("convergence.csv"), records)?;
    write_records_json(dir.join("records.json"), records)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        columns: RECORD_COLUMNS.iter().map(|s| s.to_string()).collect(),
        records: records.len(),
        cbrt_ndof: records.iter().map(|r| r.cbrt_ndof).collect(),
        exp_fit: exp_fit(records),
        meshes: records.iter().map(|r| format!("mesh_{}.mesh", r.adapt)).collect(),
        pdist: records.iter().map(|r| format!("pdist_{}.csv", r.adapt)).collect(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
