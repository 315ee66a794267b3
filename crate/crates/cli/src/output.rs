//! File outputs. Every file is written to a sibling temporary and renamed
//! into place, so readers never observe a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use wavelab_core::harness::EstimateReport;
use wavelab_core::spectral::Field;
use wavelab_core::timestep::{MonitorRecord, Trajectory};

pub const MONITORS_HEADER: &str = "t,dt,mass,l2,hs,min_ux,max_abs_u";

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn monitors_csv(records: &[MonitorRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(MONITORS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.t),
            num(r.dt),
            num(r.mass),
            num(r.l2),
            num(r.hs),
            num(r.min_ux),
            num(r.max_abs_u)
        );
    }
    out
}

pub fn snapshot_csv(u: &Field) -> String {
    let mut out = String::from("x,u\n");
    for (x, v) in u.grid().points().zip(u.values()) {
        let _ = writeln!(out, "{},{}", num(x), num(*v));
    }
    out
}

/// One CSV per snapshot under `dir/snapshots/`, plus `index.csv`.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    let mut index = String::from("index,t,file\n");
    for (i, (t, u)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        let file = format!("snap_{i:05}.csv");
        write_atomic(&snap_dir.join(&file), snapshot_csv(u).as_bytes())?;
        let _ = writeln!(index, "{i},{},{file}", num(*t));
    }
    write_atomic(&snap_dir.join("index.csv"), index.as_bytes())
}

pub fn lemmas_jsonl(reports: &[EstimateReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("reports serialize"));
        out.push('\n');
    }
    out
}

/// Rows of a CSV table with a fixed header.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &str) -> Table {
        Table { text: format!("{header}\n") }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, self.text.as_bytes())
    }
}

pub fn cell(v: f64) -> String {
    num(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct FinalNorms {
    pub mass: f64,
    pub l2: f64,
    pub hs: f64,
    pub max_abs_u: f64,
    pub min_ux: f64,
}

impl From<&MonitorRecord> for FinalNorms {
    fn from(r: &MonitorRecord) -> Self {
        FinalNorms { mass: r.mass, l2: r.l2, hs: r.hs, max_abs_u: r.max_abs_u, min_ux: r.min_ux }
    }
}

/// Contents of `run.json`; the only output carrying wall-clock times.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub status: String,
    pub exit_code: i32,
    pub termination: Option<String>,
    pub breaking_time: Option<f64>,
    pub warnings: Vec<String>,
    pub final_norms: Option<FinalNorms>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("run.json");
        let mut text = serde_json::to_string_pretty(self).expect("run record serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
