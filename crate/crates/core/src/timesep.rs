//! Time separation on the cover by maximizing Lorentzian length over causal
//! polygonal paths.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{segment_future_causal, PolygonalWorldline};
use crate::linalg::{all_finite, dist, lerp, orthonormal_complement, sub, SymMat};
use crate::reach::{lorentz_edge, reach_with, ReachOptions, Window};
use crate::spacetime::MetricField;
use crate::{rng_for, LabError, Result};

const LEG_SUBDIV: usize = 4;
const MAX_SWEEPS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPathResult {
    /// Certified lower bound for d(p, q).
    pub value: f64,
    pub path: Option<PolygonalWorldline>,
    pub restarts_used: usize,
    pub converged: bool,
    /// Moves cut back because a leg left the causal cone.
    pub projection_events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentOptions {
    pub max_sweeps: usize,
    /// Stop once the step falls below this fraction of |q − p|.
    pub rel_tol: f64,
    /// Jitter of restart initializations as a fraction of the leg length.
    pub jitter: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { max_sweeps: MAX_SWEEPS, rel_tol: 1e-6, jitter: 0.3 }
    }
}

fn leg_len(m: &MetricField, a: &[f64], b: &[f64]) -> f64 {
    lorentz_edge(m, a, b)
}

fn leg_ok(m: &MetricField, a: &[f64], b: &[f64]) -> bool {
    a != b && segment_future_causal(m, a, b, LEG_SUBDIV)
}

fn path_ok(m: &MetricField, v: &[Vec<f64>]) -> bool {
    v.windows(2).all(|w| leg_ok(m, &w[0], &w[1]))
}

fn path_value(m: &MetricField, v: &[Vec<f64>]) -> f64 {
    v.windows(2).map(|w| leg_len(m, &w[0], &w[1])).sum()
}

fn straight(p: &[f64], q: &[f64], segments: usize) -> Vec<Vec<f64>> {
    (0..=segments).map(|i| lerp(p, q, i as f64 / segments as f64)).collect()
}

/// Resamples a vertex chain to `segments` legs by arclength.
fn resample(chain: &[Vec<f64>], segments: usize) -> Vec<Vec<f64>> {
    let mut cum = vec![0.0];
    for w in chain.windows(2) {
        cum.push(cum.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    (0..=segments)
        .map(|i| {
            let s = total * i as f64 / segments as f64;
            let k = cum.partition_point(|&c| c < s).clamp(1, chain.len() - 1);
            let span = cum[k] - cum[k - 1];
            let t = if span > 0.0 { (s - cum[k - 1]) / span } else { 0.0 };
            lerp(&chain[k - 1], &chain[k], t.clamp(0.0, 1.0))
        })
        .collect()
}

/// A causal chain from p to q found on a coarse reach grid, if any.
fn reach_guided_init(m: &MetricField, p: &[f64], q: &[f64], segments: usize) -> Option<Vec<Vec<f64>>> {
    let s = m.lattice_scale();
    let pts = vec![p.iter().map(|x| x / s).collect::<Vec<_>>(), q.iter().map(|x| x / s).collect()];
    let window = Window::covering(&pts, 0.5);
    let grid = reach_with(m, p, &window, 32, &ReachOptions::default()).ok()?;
    let qc = grid.cell_of(q);
    // try the nearest cell, then the cells just before q along the chain
    let chain = grid.chain_to(&qc)?;
    let mut pts: Vec<Vec<f64>> = chain.iter().map(|c| grid.point(c)).collect();
    while pts.len() >= 2 {
        let mut cand = pts.clone();
        *cand.last_mut().unwrap() = q.to_vec();
        if leg_ok(m, &cand[cand.len() - 2], q) {
            cand.dedup();
            let r = resample(&cand, segments);
            if path_ok(m, &r) {
                return Some(r);
            }
            if path_ok(m, &cand) {
                return Some(cand);
            }
        }
        pts.pop();
    }
    None
}

/// Coordinate ascent on interior vertices keeping every leg future causal.
/// Each vertex keeps its own step, grown on success and halved on failure;
/// a finite-difference gradient move is tried next to the axis moves.
fn ascend(m: &MetricField, mut v: Vec<Vec<f64>>, opts: &AscentOptions) -> (Vec<Vec<f64>>, f64, bool, usize) {
    let n = v[0].len();
    let span = dist(&v[0], v.last().unwrap());
    let segments = v.len() - 1;
    let mut steps = vec![0.25 * span / segments as f64; segments];
    let tol = opts.rel_tol * span.max(1e-12);
    let mut events = 0usize;
    let mut converged = false;
    let mut flat_sweeps = 0;
    let mut last = path_value(m, &v);
    for _ in 0..opts.max_sweeps {
        if steps[1..].iter().all(|&h| h < tol) {
            converged = true;
            break;
        }
        let before = v.clone();
        for i in 1..segments {
            let step = steps[i];
            if step < tol {
                continue;
            }
            let local = |x: &[f64], v: &[Vec<f64>]| leg_len(m, &v[i - 1], x) + leg_len(m, x, &v[i + 1]);
            let feasible = |x: &[f64], v: &[Vec<f64>]| leg_ok(m, &v[i - 1], x) && leg_ok(m, x, &v[i + 1]);
            // cut a move back to the causal boundary
            let mut project = |target: Vec<f64>, v: &[Vec<f64>]| -> Option<Vec<f64>> {
                if feasible(&target, v) {
                    return Some(target);
                }
                events += 1;
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(&lerp(&v[i], &target, mid), v) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo > 0.0).then(|| lerp(&v[i], &target, lo))
            };
            let base = local(&v[i], &v);
            let mut best = (base, v[i].clone());
            // sliding along the path leaves the value unchanged: move across it
            let chord = sub(&v[i + 1], &v[i - 1]);
            let dirs = match crate::linalg::normalized(&chord) {
                Some(c) => orthonormal_complement(&SymMat::identity(n), &c),
                None => (0..n).map(|k| (0..n).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).collect(),
            };
            let mut grad = vec![0.0; n];
            for e in &dirs {
                let mut vals = [base; 2];
                for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let target = crate::linalg::axpy(&v[i], sign * step, e);
                    let Some(cand) = project(target, &v) else { continue };
                    let val = local(&cand, &v);
                    vals[k] = val;
                    if val > best.0 + 1e-15 {
                        best = (val, cand);
                    }
                }
                grad = crate::linalg::axpy(&grad, vals[0] - vals[1], e);
            }
            let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gn > 0.0 {
                let target: Vec<f64> = v[i].iter().zip(&grad).map(|(x, g)| x + step * g / gn).collect();
                if let Some(cand) = project(target, &v) {
                    let val = local(&cand, &v);
                    if val > best.0 + 1e-15 {
                        best = (val, cand);
                    }
                }
            }
            if best.0 > base + 1e-15 {
                v[i] = best.1;
                steps[i] = (step * 1.5).min(0.5 * span);
            } else {
                steps[i] = step * 0.5;
            }
        }
        // pattern move: extrapolate the sweep's displacement while it pays
        let delta: Vec<Vec<f64>> = v.iter().zip(&before).map(|(a, b)| sub(a, b)).collect();
        let mut cur = path_value(m, &v);
        let mut lam = 1.0;
        while lam <= 64.0 {
            let cand: Vec<Vec<f64>> = v.iter().zip(&delta).map(|(x, d)| crate::linalg::axpy(x, lam, d)).collect();
            if !path_ok(m, &cand) {
                break;
            }
            let val = path_value(m, &cand);
            if val <= cur + 1e-15 {
                break;
            }
            v = cand;
            cur = val;
            lam *= 2.0;
        }
        flat_sweeps = if cur - last <= 1e-10 * (1.0 + cur.abs()) { flat_sweeps + 1 } else { 0 };
        last = cur;
        if flat_sweeps >= 3 {
            converged = true;
            break;
        }
    }
    let val = path_value(m, &v);
    (v, val, converged, events)
}

/// Nested iteration: solve on every other vertex first, then refine.
fn ascend_nested(m: &MetricField, v: Vec<Vec<f64>>, opts: &AscentOptions) -> (Vec<Vec<f64>>, f64, bool, usize) {
    let segments = v.len() - 1;
    if segments < 4 || segments % 2 == 1 {
        return ascend(m, v, opts);
    }
    let coarse: Vec<Vec<f64>> = v.iter().step_by(2).cloned().collect();
    if !path_ok(m, &coarse) {
        return ascend(m, v, opts);
    }
    let (c, _, _, ev0) = ascend_nested(m, coarse, opts);
    let fine: Vec<Vec<f64>> =
        (0..=segments).map(|i| if i % 2 == 0 { c[i / 2].clone() } else { lerp(&c[i / 2], &c[i / 2 + 1], 0.5) }).collect();
    let start = if path_ok(m, &fine) && path_value(m, &fine) >= path_value(m, &v) { fine } else { v };
    let (v, val, conv, ev1) = ascend(m, start, opts);
    (v, val, conv, ev0 + ev1)
}

/// Maximizes Lorentzian length over `segments`-leg causal paths from p to q.
pub fn time_separation(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    segments: usize,
    restarts: usize,
    seed: u64,
) -> Result<MaxPathResult> {
    time_separation_with(m, p, q, segments, restarts, seed, &AscentOptions::default())
}

pub fn time_separation_with(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    segments: usize,
    restarts: usize,
    seed: u64,
    opts: &AscentOptions,
) -> Result<MaxPathResult> {
    if p.len() != m.dim() || q.len() != m.dim() || !all_finite(p) || !all_finite(q) {
        return Err(LabError::InvalidInput("endpoints must be finite with the metric's dimension".into()));
    }
    if segments < 2 {
        return Err(LabError::InvalidInput("segments must be at least 2".into()));
    }
    if p == q {
        return Ok(MaxPathResult { value: 0.0, path: None, restarts_used: 0, converged: true, projection_events: 0 });
    }
    let line = straight(p, q, segments);
    let base = if path_ok(m, &line) { Some(line) } else { reach_guided_init(m, p, q, segments) };
    let Some(base) = base else {
        return Ok(MaxPathResult { value: 0.0, path: None, restarts_used: 0, converged: true, projection_events: 0 });
    };
    let restarts = restarts.max(1);
    let leg = dist(p, q) / segments as f64;
    let runs: Vec<(f64, usize, usize, Vec<Vec<f64>>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                base.clone()
            } else {
                let mut rng = rng_for(seed, r as u64);
                let jitter: Vec<Vec<f64>> = base
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        if i == 0 || i == segments {
                            x.clone()
                        } else {
                            x.iter().map(|xi| xi + opts.jitter * leg * rng.gen_range(-1.0..1.0)).collect()
                        }
                    })
                    .collect();
                // shrink the jitter until the path is causal
                let mut t = 1.0;
                let mut cand = jitter.clone();
                while !path_ok(m, &cand) && t > 1e-3 {
                    t *= 0.5;
                    cand = base.iter().zip(&jitter).map(|(b, j)| lerp(b, j, t)).collect();
                }
                if path_ok(m, &cand) {
                    cand
                } else {
                    base.clone()
                }
            };
            let (v, val, conv, ev) = ascend_nested(m, init, opts);
            (val, ev, r, v, conv)
        })
        .collect();
    let best = runs
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)))
        .expect("at least one restart");
    let path = PolygonalWorldline::on(m, best.3.clone())?;
    Ok(MaxPathResult {
        value: best.0,
        path: Some(path),
        restarts_used: restarts,
        converged: best.4,
        projection_events: best.1,
    })
}

/// Best-so-far values over increasing segment counts.
pub fn refinement_trace(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    segment_counts: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let mut best: f64 = 0.0;
    let mut out = Vec::new();
    for &s in segment_counts {
        let r = time_separation(m, p, q, s, restarts, seed)?;
        best = best.max(r.value);
        out.push((s, best));
    }
    Ok(out)
}

/// Grid longest-path oracle.
pub fn time_separation_oracle(m: &MetricField, p: &[f64], q: &[f64], resolution: usize) -> Result<f64> {
    crate::reach::grid_time_separation(m, p, q, resolution)
}

/// Smallest relative distance of a leg tangent to the light cone, measured
/// at the leg's start and midpoint.
pub fn min_leg_depth(m: &MetricField, path: &PolygonalWorldline) -> Result<f64> {
    let mut d = f64::INFINITY;
    for (a, b) in path.segments() {
        let v = sub(b, a);
        for t in [0.0, 0.5] {
            let x = lerp(a, b, t);
            if !m.causal_character(&x, &v).is_future_timelike() {
                return Ok(0.0);
            }
            d = d.min(m.light_cone_distance(&x, &v)? / m.r_norm(&x, &v));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{make_preset, PresetName, PresetSpec};

    #[test]
    fn minkowski_value() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let r = time_separation(&m, &[0.0, 0.0], &[2.0, 1.0], 8, 4, 1).unwrap();
        assert!((r.value - 3f64.sqrt()).abs() < 1e-9);
        let s = time_separation(&m, &[0.0, 0.0], &[1.0, 2.0], 8, 4, 1).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.converged);
        assert_eq!(time_separation(&m, &[0.3, 0.0], &[0.3, 0.0], 8, 4, 1).unwrap().value, 0.0);
    }

    #[test]
    fn bent_null_path_is_found_by_reach() {
        // q − p null: only the null tolerance of the causal test lets the
        // ascent gain anything
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let r = time_separation(&m, &[0.0, 0.0], &[1.0, 1.0], 4, 2, 3).unwrap();
        assert!(r.value.abs() < 1e-4, "{}", r.value);
    }
}
