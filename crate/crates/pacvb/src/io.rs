//! On-disk formats. Every float in CSV output carries 17 significant digits;
//! JSON uses shortest round-trip formatting, which is exact as well.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pacvb_core::certify::BoundReport;
use pacvb_core::conditions::{ConditionReport, ConditionSetup};
use pacvb_core::variational::PosteriorApprox;
use pacvb_core::{FamilyLaw, InitLaw, ModelKind, Trajectory};

use crate::error::CliError;

/// Which files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// A float with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Everything needed to reinterpret a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: ModelKind,
    pub theta: f64,
    pub init: InitLaw,
    pub n: usize,
    pub seed: u64,
}

/// The JSON sidecar sits next to the CSV with the extension swapped.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// `index,state` rows; birth–death states are written as integers.
pub fn write_trajectory(path: &Path, traj: &Trajectory, meta: &TrajectoryMeta) -> Result<(), CliError> {
    let integer = meta.model.is_birth_death();
    let rows = traj.states.iter().enumerate().map(|(i, x)| {
        let state = if integer { format!("{}", *x as u64) } else { num(*x) };
        vec![i.to_string(), state]
    });
    write_rows(path, &["index", "state"], rows)?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory, TrajectoryMeta), CliError> {
    let meta: TrajectoryMeta = read_json(&sidecar_path(path))?;
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    let headers = r.headers().map_err(|e| bad(&e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "state"] {
        return Err(bad(&"expected header index,state"));
    }
    let mut states = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(&e))?;
        let idx: usize = rec[0].trim().parse().map_err(|e| bad(&e))?;
        if idx != i {
            return Err(bad(&format!("row {i} has index {idx}")));
        }
        states.push(rec[1].trim().parse::<f64>().map_err(|e| bad(&e))?);
    }
    let traj = Trajectory::from_states(&meta.model, states).map_err(|e| bad(&e))?;
    Ok((traj, meta))
}

/// Flat JSON form of a fitted law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub family: String,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub c: f64,
    pub alpha: f64,
    pub objective: f64,
    pub converged: bool,
}

impl From<&PosteriorApprox> for PosteriorRecord {
    fn from(p: &PosteriorApprox) -> Self {
        let s = p.law.scaled();
        let family = match p.law {
            FamilyLaw::Beta(_) => "beta",
            FamilyLaw::Scaled(_) => "scaled_beta",
        };
        PosteriorRecord {
            family: family.to_string(),
            a: s.base.a,
            b: s.base.b,
            m: s.m,
            c: s.c,
            alpha: p.alpha,
            objective: p.objective,
            converged: p.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutput {
    pub setup: ConditionSetup,
    pub prior: FamilyLaw,
    pub replications: usize,
    pub seed: u64,
    pub report: ConditionReport,
}

pub fn write_conditions(dir: &Path, out: &ConditionOutput, format: Format) -> Result<(), CliError> {
    if format.csv() {
        let rows = out.report.rows.iter().map(|r| vec![r.n.to_string(), num(r.cond_i), num(r.cond_ii), num(r.cond_iii)]);
        write_rows(&dir.join("conditions.csv"), &["n", "cond_i", "cond_ii", "cond_iii"], rows)?;
    }
    if format.json() {
        write_json(&dir.join("conditions.json"), out)?;
    }
    Ok(())
}

/// `report.json` (everything) and `report.csv` (`rep,lhs,rhs,satisfied`).
pub fn write_report(dir: &Path, report: &BoundReport, format: Format) -> Result<(), CliError> {
    if format.csv() {
        let rows = report.replications.iter().map(|r| vec![r.rep.to_string(), num(r.lhs), num(r.rhs), r.satisfied.to_string()]);
        write_rows(&dir.join("report.csv"), &["rep", "lhs", "rhs", "satisfied"], rows)?;
    }
    if format.json() {
        write_json(&dir.join("report.json"), report)?;
    }
    Ok(())
}
