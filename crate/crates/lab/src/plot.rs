//! CSV plot data from finished reports.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::tasks::{plateau_csv, slice_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    ConeSection,
    ReachSlice,
    LipschitzHist,
    Plateau,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::ConeSection => "cone_section",
            PlotKind::ReachSlice => "reach_slice",
            PlotKind::LipschitzHist => "lipschitz_hist",
            PlotKind::Plateau => "plateau",
        }
    }

    /// Report kinds that carry the data.
    fn sources(self) -> &'static [&'static str] {
        match self {
            PlotKind::ConeSection => &["cone_estimate", "certify"],
            PlotKind::ReachSlice => &["p01a"],
            PlotKind::LipschitzHist => &["lipschitz"],
            PlotKind::Plateau => &["stable_norm"],
        }
    }
}

#[derive(Debug)]
pub struct PlotError(pub String);

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PlotError {}

fn err(msg: impl Into<String>) -> PlotError {
    PlotError(msg.into())
}

fn floats(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

/// CSV text for `kind` from a parsed report. `series` picks the direction of
/// a multi-direction plateau.
pub fn plot_csv(report: &Value, kind: PlotKind, series: usize) -> Result<String, PlotError> {
    let rk = report["kind"].as_str().ok_or_else(|| err("not a task report (no kind field)"))?;
    if !kind.sources().contains(&rk) {
        return Err(err(format!("plot kind {} does not apply to a {rk} report", kind.as_str())));
    }
    if report["status"] != "ok" {
        return Err(err("report holds a failed task"));
    }
    let r = &report["result"];
    match kind {
        PlotKind::ConeSection => {
            let pts = if rk == "certify" {
                &r["certificate"]["cone"]["cross_section"]
            } else {
                &r["estimate"]["cross_section"]
            };
            let pts = pts.as_array().ok_or_else(|| err("report has no cross-section"))?;
            let mut out = String::from("x,y\n");
            for p in pts {
                let v = floats(p).ok_or_else(|| err("malformed cross-section point"))?;
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if v.len() != 2 {
                    return Err(err("cone_section needs a 2D report"));
                }
                if n > 0.0 {
                    out.push_str(&format!("{},{}\n", v[0] / n, v[1] / n));
                }
            }
            Ok(out)
        }
        PlotKind::ReachSlice => {
            let pts: Option<Vec<Vec<f64>>> = r["reach_slice"].as_array().map(|a| a.iter().filter_map(floats).collect());
            Ok(slice_csv(&pts.ok_or_else(|| err("report has no reach slice"))?))
        }
        PlotKind::LipschitzHist => {
            let bins = r["report"]["ratio_histogram"].as_array().ok_or_else(|| err("report has no histogram"))?;
            let mut out = String::from("lo,hi,count\n");
            for b in bins {
                let lo = b[0].as_f64().ok_or_else(|| err("malformed bin"))?;
                let hi = b[1].as_f64().ok_or_else(|| err("malformed bin"))?;
                let c = b[2].as_u64().ok_or_else(|| err("malformed bin"))?;
                out.push_str(&format!("{lo},{hi},{c}\n"));
            }
            Ok(out)
        }
        PlotKind::Plateau => {
            let traces = r["plateau_trace"].as_array().ok_or_else(|| err("report has no plateau trace"))?;
            let tr = traces.get(series).ok_or_else(|| err(format!("series {series} out of range")))?;
            let rows: Option<Vec<(usize, f64)>> = tr[1]
                .as_array()
                .map(|a| a.iter().map(|e| Some((e[0].as_u64()? as usize, e[1].as_f64()?))).collect())
                .unwrap_or(None);
            Ok(plateau_csv(&rows.ok_or_else(|| err("malformed plateau trace"))?))
        }
    }
}

/// Reads `report`, writes the CSV next to it (or to `out`) and returns the path.
pub fn emit_plot_data(report: &Path, kind: PlotKind, series: usize, out: Option<&Path>) -> Result<PathBuf, PlotError> {
    let text = std::fs::read_to_string(report).map_err(|e| err(format!("cannot read {}: {e}", report.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", report.display())))?;
    let csv = plot_csv(&v, kind, series)?;
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            report.with_file_name(format!("{stem}_{}.csv", kind.as_str()))
        }
    };
    std::fs::write(&path, csv).map_err(|e| err(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
