//! Task execution and report files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use classa::certify::{
    certify_class_a, coarse_lipschitz, perturbation_smoke_test, sctp_check, temporal_function_check, FormOptions,
};
use classa::cone_kit::{sector_slopes_2d, PolyCone};
use classa::linalg::normalized;
use classa::reach::{forward_reach, frak_f_many, Window};
use classa::spacetime::MetricField;
use classa::stable::{check_p01a, estimate_stable_cone, estimate_stable_norm, flow_rotation_vector};
use classa::timesep::{min_leg_depth, refinement_trace, time_separation, time_separation_oracle};
use classa::{rng_for, LabError};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{Scenario, Task};

/// Result of one task: JSON payload plus plottable CSV side files.
pub struct TaskOutput {
    pub result: Value,
    pub csv: Vec<(String, String)>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn cone_summary(cone: &PolyCone) -> Value {
    let w = cone.is_compact_cone();
    json!({
        "slopes": sector_slopes_2d(cone),
        "compact": w.compact,
        "compactness_margin": w.margin,
        "central_direction": cone.central_direction(),
    })
}

fn section_csv(points: &[Vec<f64>]) -> String {
    let dim = points.first().map_or(2, |p| p.len());
    let names = ["x", "y", "z"];
    let mut s = names[..dim].join(",");
    s.push('\n');
    for p in points {
        if let Some(u) = normalized(p) {
            let row: Vec<String> = u.iter().map(|x| format!("{x}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
    }
    s
}

/// Runs a single task on a validated metric.
pub fn run_task(m: &MetricField, task: &Task, seed: u64) -> Result<TaskOutput, LabError> {
    match task {
        Task::ConeEstimate(t) => {
            let est = estimate_stable_cone(m, &t.budget, seed)?;
            let csv = vec![("cone_section.csv".to_string(), section_csv(&est.cross_section))];
            Ok(TaskOutput { result: json!({ "estimate": to_value(&est), "summary": cone_summary(&est.cone) }), csv })
        }
        Task::Timesep(t) => {
            let mut rows = Vec::new();
            let mut paths = String::from("pair,vertex");
            for n in ["x", "y", "z"].iter().take(m.dim()) {
                paths.push(',');
                paths.push_str(n);
            }
            paths.push('\n');
            let mut trace_csv = String::from("pair,segments,value\n");
            for (i, pair) in t.pairs.iter().enumerate() {
                let r = time_separation(m, &pair.p, &pair.q, t.segments, t.restarts, seed)?;
                let depth = match &r.path {
                    Some(p) => Some(min_leg_depth(m, p)?),
                    None => None,
                };
                if let Some(path) = &r.path {
                    for (k, v) in path.vertices.iter().enumerate() {
                        let cols: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                        paths.push_str(&format!("{i},{k},{}\n", cols.join(",")));
                    }
                }
                let trace = if t.refine.is_empty() {
                    Vec::new()
                } else {
                    refinement_trace(m, &pair.p, &pair.q, &t.refine, t.restarts, seed)?
                };
                for (s, v) in &trace {
                    trace_csv.push_str(&format!("{i},{s},{v}\n"));
                }
                let oracle = match t.oracle_resolution {
                    Some(res) => Some(time_separation_oracle(m, &pair.p, &pair.q, res)?),
                    None => None,
                };
                rows.push(json!({
                    "p": pair.p, "q": pair.q, "value": r.value, "converged": r.converged,
                    "restarts_used": r.restarts_used, "projection_events": r.projection_events,
                    "min_leg_depth": depth, "refinement": trace, "oracle": oracle,
                }));
            }
            let mut csv = vec![("timesep_paths.csv".to_string(), paths)];
            if !t.refine.is_empty() {
                csv.push(("timesep_refinement.csv".to_string(), trace_csv));
            }
            Ok(TaskOutput { result: json!({ "pairs": rows }), csv })
        }
        Task::Certify(t) => {
            let mut budget = t.budget.clone();
            budget.seed = seed;
            let cert = certify_class_a(m, &budget)?;
            let form = match &t.check_form {
                Some(a) => Some(match temporal_function_check(m, a, &FormOptions::default(), t.chains, seed) {
                    Ok(r) => json!({ "alpha": a, "accepted": true, "check": to_value(&r) }),
                    Err(LabError::RejectedForm { c, point, vector }) => {
                        json!({ "alpha": a, "accepted": false, "c": c, "point": point, "vector": vector })
                    }
                    Err(e) => return Err(e),
                }),
                None => None,
            };
            let mut csv = Vec::new();
            if let Some(c) = &cert.cone {
                csv.push(("cone_section.csv".to_string(), section_csv(&c.cross_section)));
            }
            Ok(TaskOutput { result: json!({ "certificate": to_value(&cert), "form_check": form }), csv })
        }
        Task::Lipschitz(t) => {
            let est = estimate_stable_cone(m, &t.cone_budget, seed)?;
            let rep = coarse_lipschitz(m, &est, t.eps, t.samples, seed, &t.options)?;
            let csv = vec![("lipschitz_hist.csv".to_string(), rep.histogram_csv())];
            Ok(TaskOutput { result: json!({ "report": to_value(&rep), "cone": cone_summary(&est.cone) }), csv })
        }
        Task::Sctp(t) => Ok(TaskOutput { result: to_value(&sctp_check(m, &t.alpha, &t.options)?), csv: Vec::new() }),
        Task::FrakF(t) => {
            let hs = match (&t.hs, &t.random) {
                (Some(hs), _) => hs.clone(),
                (None, Some(r)) => random_lattice(m.dim(), r.count, r.max_norm, seed),
                (None, None) => return Err(LabError::InvalidInput("no lattice classes".into())),
            };
            let fs = frak_f_many(m, &hs, t.resolution, &t.options)?;
            let mut csv = String::from("h,f,boundary_active\n");
            for f in &fs {
                let h: Vec<String> = f.h.iter().map(|x| x.to_string()).collect();
                csv.push_str(&format!("{},{},{}\n", h.join(":"), f.f_of_h, f.boundary_active));
            }
            Ok(TaskOutput { result: json!({ "values": to_value(&fs) }), csv: vec![("frak.csv".to_string(), csv)] })
        }
        Task::StableNorm(t) => {
            let est = estimate_stable_norm(m, &t.hs, t.n_max, t.resolution)?;
            let csv = est
                .plateau_trace
                .iter()
                .map(|(h, tr)| {
                    let name: Vec<String> = h.iter().map(|x| x.to_string()).collect();
                    (format!("plateau_{}.csv", name.join("_")), plateau_csv(tr))
                })
                .collect();
            Ok(TaskOutput { result: to_value(&est), csv })
        }
        Task::P01a(t) => {
            let est = estimate_stable_cone(m, &t.cone_budget, seed)?;
            let rep = check_p01a(m, &est, t.samples, seed, &t.options)?;
            let slice = reach_slice(m, &t.options)?;
            let csv = slice_csv(&slice);
            Ok(TaskOutput {
                result: json!({ "report": to_value(&rep), "cone": cone_summary(&est.cone), "reach_slice": slice }),
                csv: vec![("reach_slice.csv".to_string(), csv)],
            })
        }
        Task::FlowRho(t) => {
            let r = flow_rotation_vector(m, &t.field, &t.x0, t.t, t.dt)?;
            let membership = match &t.cone_budget {
                Some(b) => {
                    let est = estimate_stable_cone(m, b, seed)?;
                    let d = est.cone.boundary_distance(&r.rho, est.norm_model());
                    let signed = if d.outside { -d.value } else { d.value };
                    Some(json!({ "signed_margin": signed, "inside": !d.outside, "cone": cone_summary(&est.cone) }))
                }
                None => None,
            };
            Ok(TaskOutput { result: json!({ "rotation": to_value(&r), "membership": membership }), csv: Vec::new() })
        }
        Task::Perturb(t) => {
            let mut budget = t.budget.clone();
            budget.seed = seed;
            let cert = perturbation_smoke_test(m.spec(), t.amplitude, &budget)?;
            Ok(TaskOutput { result: json!({ "certificate": to_value(&cert) }), csv: Vec::new() })
        }
    }
}

pub fn plateau_csv(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("n,dist_over_n\n");
    for (n, v) in trace {
        s.push_str(&format!("{n},{v}\n"));
    }
    s
}

pub fn slice_csv(points: &[Vec<f64>]) -> String {
    let mut s = String::from("x,y\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    s
}

/// Boundary of the reach set from the origin, in the plane of the first two
/// coordinates.
fn reach_slice(m: &MetricField, opts: &classa::stable::P01aOptions) -> Result<Vec<Vec<f64>>, LabError> {
    let x = vec![0.0; m.dim()];
    let w = Window::cube(m.dim(), (opts.h_norm_max + 1.0).ceil() as i64);
    let grid = forward_reach(m, &x, &w, opts.resolution)?;
    let mut pts: Vec<Vec<f64>> = grid
        .frontier_cells()
        .into_iter()
        .filter(|c| c.iter().skip(2).all(|&k| k == 0))
        .map(|c| grid.point(&c)[..2].to_vec())
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(pts)
}

/// Distinct nonzero lattice classes with euclidean norm ≤ `max_norm`.
pub fn random_lattice(dim: usize, count: usize, max_norm: i64, seed: u64) -> Vec<Vec<i64>> {
    let side = (2 * max_norm + 1) as usize;
    let mut ball: Vec<Vec<i64>> = Vec::new();
    for idx in 0..side.pow(dim as u32) {
        let mut k = idx;
        let h: Vec<i64> = (0..dim)
            .map(|_| {
                let c = (k % side) as i64 - max_norm;
                k /= side;
                c
            })
            .collect();
        let n2: i64 = h.iter().map(|x| x * x).sum();
        if n2 > 0 && n2 <= max_norm * max_norm {
            ball.push(h);
        }
    }
    let mut rng = rng_for(seed, 0);
    ball.choose_multiple(&mut rng, count).cloned().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub kind: String,
    pub report: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub records: Vec<TaskRecord>,
}

impl RunOutcome {
    pub fn errors(&self) -> usize {
        self.records.iter().filter(|r| r.status != "ok").count()
    }

    /// 0 when every task ran, 2 when any task errored.
    pub fn exit_code(&self) -> i32 {
        if self.errors() == 0 {
            0
        } else {
            2
        }
    }
}

fn report_names(s: &Scenario) -> Vec<String> {
    let mut names = Vec::new();
    for (i, t) in s.tasks.iter().enumerate() {
        let stem = t.report_stem();
        let dup = s.tasks.iter().filter(|o| o.report_stem() == stem).count() > 1;
        names.push(if dup { format!("{stem}_{i}") } else { stem.to_string() });
    }
    names
}

fn write_json(path: &Path, v: &Value) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

/// Executes the tasks of a validated scenario and writes reports into `out_dir`.
pub fn run_scenario(s: &Scenario, m: &MetricField, out_dir: &Path, parallel: bool) -> io::Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let resolved = s.resolved();
    let names = report_names(s);
    let run_one = |i: usize| -> io::Result<TaskRecord> {
        let task = &s.tasks[i];
        let seed = s.task_seed(i);
        let (status, error, result, csv) = match run_task(m, task, seed) {
            Ok(out) => ("ok", None, out.result, out.csv),
            Err(e) => ("error", Some(e.to_string()), Value::Null, Vec::new()),
        };
        let prefix = &names[i];
        let mut files = Vec::new();
        for (name, text) in csv {
            let file = if prefix == task.report_stem() { name } else { format!("{prefix}_{name}") };
            fs::write(out_dir.join(&file), text)?;
            files.push(file);
        }
        let report_file = format!("{prefix}.json");
        let report = json!({
            "kind": task.kind(),
            "index": i,
            "preset": to_value(&resolved.preset),
            "seed": seed,
            "config": to_value(task),
            "status": status,
            "error": error,
            "csv": files,
            "result": result,
        });
        write_json(&out_dir.join(&report_file), &report)?;
        Ok(TaskRecord { index: i, kind: task.kind().to_string(), report: report_file, status: status.to_string(), error })
    };
    let records: Vec<TaskRecord> = if parallel {
        (0..s.tasks.len()).into_par_iter().map(run_one).collect::<io::Result<_>>()?
    } else {
        (0..s.tasks.len()).map(run_one).collect::<io::Result<_>>()?
    };
    let summary = json!({
        "scenario": to_value(&resolved),
        "tasks": to_value(&records),
        "errors": records.iter().filter(|r| r.status != "ok").count(),
    });
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { out_dir: out_dir.to_path_buf(), records })
}
