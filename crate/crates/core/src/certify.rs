//! Class A certification, transversal forms, temporal functions, SCTP
//! level sets and the coarse-Lipschitz harness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone_kit::PolyCone;
use crate::linalg::{add, dist, dot, lerp, norm, normalized, scale, sub};
use crate::reach::{chord_length, forward_reach, is_vicious, reach_with, EdgeRule, ReachOptions, ViciousOptions, ViciousReport, Window};
use crate::spacetime::{make_preset, MetricField, PresetSpec};
use crate::stable::{estimate_stable_cone, ConeBudget, StableConeEstimate};
use crate::timesep::time_separation;
use crate::{rng_for, LabError, Result};

/// Default acceptance margin for transversal forms.
pub const DEFAULT_FORM_MARGIN: f64 = 1e-3;
/// Pairing values at or below this count as zero.
pub const REJECT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    ClassA,
    NotClassA(String),
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroExclusion {
    pub excluded: bool,
    /// Min pairing of the witness with the unit generators.
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalForm {
    pub alpha: Vec<f64>,
    /// min α·v/|v| over sampled future causal v.
    pub margin: f64,
    /// min α·r/|r| over the generators of the cone estimate.
    pub dual_margin: f64,
    pub points_checked: usize,
    pub rays_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormSearch {
    pub form: Option<TransversalForm>,
    pub reason: Option<String>,
    pub candidates_tried: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormOptions {
    pub margin: f64,
    /// Grid points per axis; `None` picks 32 in 2D and 14 in 3D.
    pub points_per_axis: Option<usize>,
    /// Null rays sampled per point in 3D before refinement.
    pub rays: usize,
    pub candidates: usize,
}

impl Default for FormOptions {
    fn default() -> Self {
        FormOptions { margin: DEFAULT_FORM_MARGIN, points_per_axis: None, rays: 64, candidates: 32 }
    }
}

impl FormOptions {
    fn points(&self, dim: usize) -> usize {
        self.points_per_axis.unwrap_or(if dim == 2 { 32 } else { 14 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyBudget {
    /// Reach resolution for viciousness; `None` picks 32 in 2D and 28 in 3D.
    pub vicious_resolution: Option<usize>,
    pub vicious: ViciousOptions,
    pub cone: ConeBudget,
    pub form: FormOptions,
    pub seed: u64,
}

impl Default for CertifyBudget {
    fn default() -> Self {
        CertifyBudget {
            vicious_resolution: None,
            vicious: ViciousOptions::default(),
            cone: ConeBudget::default(),
            form: FormOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub preset: PresetSpec,
    pub vicious: ViciousReport,
    pub known_non_vicious: Option<String>,
    pub cone: Option<StableConeEstimate>,
    pub cone_error: Option<String>,
    pub zero_excluded: Option<ZeroExclusion>,
    pub transversal: Option<FormSearch>,
    pub temporal_constant: Option<f64>,
    pub verdict: Verdict,
}

/// Min of α·v over unit-g_R future null v at p, with the minimizing ray.
pub fn min_null_pairing(m: &MetricField, p: &[f64], alpha: &[f64], rays: usize) -> Result<(f64, Vec<f64>)> {
    let (xh, basis) = m.orthonormal_frame(p);
    let at = |th: f64| -> Result<(f64, Vec<f64>)> {
        let v = m.null_ray_from_seed(p, &xh, &m.frame_seed(&basis, th))?;
        Ok((dot(alpha, &v), v))
    };
    if m.dim() == 2 {
        let a = at(0.0)?;
        let b = at(std::f64::consts::PI)?;
        return Ok(if b.0 < a.0 { b } else { a });
    }
    let step = std::f64::consts::TAU / rays as f64;
    let mut best = (f64::INFINITY, Vec::new(), 0.0);
    for k in 0..rays {
        let th = k as f64 * step;
        let (val, v) = at(th)?;
        if val < best.0 {
            best = (val, v, th);
        }
    }
    // golden-section refinement around the best sample
    let (mut lo, mut hi) = (best.2 - step, best.2 + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let mut fc = at(c)?.0;
    let mut fd = at(d)?.0;
    while hi - lo > 1e-10 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = at(c)?.0;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = at(d)?.0;
        }
    }
    let refined = at(0.5 * (lo + hi))?;
    Ok(if refined.0 < best.0 { refined } else { (best.0, best.1) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormCheck {
    /// min α·v/|v|_R over sampled future causal v.
    pub c: f64,
    pub point: Vec<f64>,
    pub vector: Vec<f64>,
    pub points_checked: usize,
    pub rays_checked: usize,
}

/// Pointwise check of a constant covector on the fundamental grid.
pub fn check_form(m: &MetricField, alpha: &[f64], opts: &FormOptions) -> Result<FormCheck> {
    if alpha.len() != m.dim() || !crate::linalg::all_finite(alpha) {
        return Err(LabError::InvalidInput("covector must be finite with the metric's dimension".into()));
    }
    let pts = m.fundamental_grid(opts.points(m.dim()));
    let per: Vec<(f64, Vec<f64>, Vec<f64>, usize)> = pts
        .par_iter()
        .map(|p| -> Result<_> {
            let (mut c, mut v) = min_null_pairing(m, p, alpha, opts.rays)?;
            let mut count = if m.dim() == 2 { 2 } else { opts.rays + 1 };
            // timelike interior samples
            for r in m.cone_rays(p, 2 * m.dim() + 2)? {
                let val = dot(alpha, &r) / m.r_norm(p, &r);
                count += 1;
                if val < c {
                    c = val;
                    v = r;
                }
            }
            Ok((c, p.clone(), v, count))
        })
        .collect::<Result<_>>()?;
    let rays_checked = per.iter().map(|x| x.3).sum();
    let worst = per
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| LabError::EmptySample("empty grid".into()))?;
    Ok(FormCheck { c: worst.0, point: worst.1, vector: worst.2, points_checked: pts.len(), rays_checked })
}

/// Candidate covectors in the interior of the dual cone, deepest first.
fn form_candidates(dual: &PolyCone, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let Some(center) = dual.central_direction() else {
        return out;
    };
    out.push(center.clone());
    let rays = dual.rays().to_vec();
    let per_ray = (count.saturating_sub(1) / rays.len().max(1)).max(1);
    for k in 1..=per_ray {
        let t = k as f64 / (per_ray + 1) as f64;
        for r in &rays {
            if let Some(u) = normalized(r) {
                if let Some(c) = normalized(&lerp(&center, &u, t)) {
                    out.push(c);
                }
            }
        }
    }
    out.truncate(count.max(1));
    out
}

/// Searches constant covectors inside the dual of the estimated cone.
pub fn find_transversal_form(m: &MetricField, cone_est: &StableConeEstimate, opts: &FormOptions) -> Result<FormSearch> {
    let dual = cone_est.cone.dual_cone();
    let cands = form_candidates(&dual, opts.candidates);
    if cands.is_empty() {
        return Ok(FormSearch { form: None, reason: Some("dual cone is trivial".into()), candidates_tried: 0 });
    }
    let units: Vec<Vec<f64>> = cone_est.cone.rays().iter().filter_map(|r| normalized(r)).collect();
    for (i, a) in cands.iter().enumerate() {
        let dual_margin = units.iter().map(|u| dot(a, u)).fold(f64::INFINITY, f64::min);
        if dual_margin <= 0.0 {
            continue;
        }
        let chk = check_form(m, a, opts)?;
        if chk.c >= opts.margin {
            return Ok(FormSearch {
                form: Some(TransversalForm {
                    alpha: a.clone(),
                    margin: chk.c,
                    dual_margin,
                    points_checked: chk.points_checked,
                    rays_checked: chk.rays_checked,
                }),
                reason: None,
                candidates_tried: i + 1,
            });
        }
    }
    Ok(FormSearch { form: None, reason: Some("no constant representative".into()), candidates_tried: cands.len() })
}

/// Runs every sub-check and composes the verdict.
pub fn certify_class_a(m: &MetricField, budget: &CertifyBudget) -> Result<Certificate> {
    let res = budget.vicious_resolution.unwrap_or(if m.dim() == 2 { 32 } else { 28 });
    let vicious = is_vicious(m, res, &budget.vicious)?;
    let known = m.known_non_vicious().map(str::to_string);
    let (cone, cone_error) = match estimate_stable_cone(m, &budget.cone, budget.seed) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let zero_excluded = cone.as_ref().map(|c| {
        let w = c.cone.is_compact_cone();
        ZeroExclusion { excluded: w.compact, margin: w.margin, witness: w.witness }
    });
    let transversal = match &cone {
        Some(c) => Some(find_transversal_form(m, c, &budget.form)?),
        None => None,
    };
    let temporal_constant = transversal.as_ref().and_then(|t| t.form.as_ref()).map(|f| f.margin);
    let has_form = temporal_constant.is_some();
    let zero_ok = zero_excluded.as_ref().is_some_and(|z| z.excluded);
    let verdict = if !vicious.vicious {
        match &known {
            Some(why) => Verdict::NotClassA(format!("viciousness: {why}")),
            None => Verdict::Inconclusive(format!("no timelike loop found at resolution {res}")),
        }
    } else if zero_ok || has_form {
        Verdict::ClassA
    } else {
        Verdict::Inconclusive("zero not excluded and no constant transversal form".into())
    };
    Ok(Certificate {
        preset: m.spec().clone(),
        vicious,
        known_non_vicious: known,
        cone,
        cone_error,
        zero_excluded,
        transversal,
        temporal_constant,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalCheck {
    pub c: f64,
    pub cor110_constant: f64,
    pub witness_point: Vec<f64>,
    pub witness_vector: Vec<f64>,
    pub chains_checked: usize,
    /// Max of L(γ)/(K·dist(endpoints) + slack) over the chains.
    pub max_chain_ratio: f64,
    pub chain_violations: usize,
}

/// Dual norm of a covector with respect to g_R at p.
fn dual_norm(m: &MetricField, p: &[f64], alpha: &[f64]) -> f64 {
    m.g_r(p).inverse().map(|inv| inv.quad(alpha).sqrt()).unwrap_or(f64::INFINITY)
}

/// Positivity constant of a constant covector and the length bound of
/// causal chains it implies.
pub fn temporal_function_check(m: &MetricField, alpha: &[f64], opts: &FormOptions, chains: usize, seed: u64) -> Result<TemporalCheck> {
    let chk = check_form(m, alpha, opts)?;
    if chk.c <= REJECT_TOL {
        return Err(LabError::RejectedForm { c: chk.c, point: chk.point, vector: chk.vector });
    }
    let sup_dual = m
        .fundamental_grid(opts.points(m.dim()))
        .iter()
        .map(|p| dual_norm(m, p, alpha))
        .fold(0.0, f64::max);
    let k = sup_dual / chk.c;
    // reach-grid chains from a few base points
    let bases = 4usize;
    let per = chains.div_ceil(bases);
    let window = Window::cube(m.dim(), 2);
    let res = 16;
    let slack = 1e-9;
    let results: Vec<Vec<f64>> = (0..bases)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let mut rng = rng_for(seed, b as u64);
            let x: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(0.0..m.lattice_scale())).collect();
            let grid = forward_reach(m, &x, &window, res)?;
            let cells: Vec<Vec<i64>> = grid.reached_cells().collect();
            let mut out = Vec::new();
            for _ in 0..per {
                let c = &cells[rng.gen_range(0..cells.len())];
                let Some(chain) = grid.chain_to(c) else { continue };
                let pts: Vec<Vec<f64>> = chain.iter().map(|c| grid.point(c)).collect();
                let len: f64 = pts.windows(2).map(|w| chord_length(m, &w[0], &w[1])).sum();
                let d = dist(&pts[0], pts.last().unwrap());
                out.push(len / (k * d + slack));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = results.into_iter().flatten().collect();
    let viol = ratios.iter().filter(|&&r| r > 1.0 + 1e-9).count();
    Ok(TemporalCheck {
        c: chk.c,
        cor110_constant: k,
        witness_point: chk.point,
        witness_vector: chk.vector,
        chains_checked: ratios.len(),
        max_chain_ratio: ratios.iter().copied().fold(0.0, f64::max),
        chain_violations: viol,
    })
}

/// p/q with q ≤ `max_den` within `tol`, if any.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    for q in 1..=max_den {
        let p = (x * q as f64).round();
        if (p / q as f64 - x).abs() <= tol {
            return Some((p as i64, q));
        }
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SctpReport {
    pub alpha: Vec<f64>,
    /// α paired with the lattice generators, as integers over a common denominator.
    pub pairings: Vec<i64>,
    pub denominator: i64,
    /// Kernel lattice generators (fiber translations).
    pub fiber_lattice: Vec<Vec<i64>>,
    pub graph_ok: bool,
    pub precedes_ok: bool,
    pub precedes_checked: usize,
    pub translation_ok: bool,
    /// Smallest n with the whole level n fiber inside I⁺(p) for every sample.
    pub n0: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SctpOptions {
    pub resolution: usize,
    /// Fiber samples per fiber axis.
    pub fiber_samples: usize,
    pub n_max: usize,
    pub eps_t: f64,
}

impl Default for SctpOptions {
    fn default() -> Self {
        SctpOptions { resolution: 16, fiber_samples: 4, n_max: 4, eps_t: 1e-3 }
    }
}

/// Level sets of τ(x) = α·x checked against the SCTP conditions.
pub fn sctp_check(m: &MetricField, alpha: &[f64], opts: &SctpOptions) -> Result<SctpReport> {
    let dim = m.dim();
    if alpha.len() != dim {
        return Err(LabError::InvalidInput("covector has the wrong dimension".into()));
    }
    let s = m.lattice_scale();
    let mut fr = Vec::new();
    for &a in alpha {
        fr.push(
            rational_approx(a * s, 1000, 1e-9)
                .ok_or_else(|| LabError::InvalidInput(format!("pairing {} is not rational", a * s)))?,
        );
    }
    let den = fr.iter().fold(1i64, |l, &(_, q)| l / gcd(l, q) * q);
    let ints: Vec<i64> = fr.iter().map(|&(p, q)| p * (den / q)).collect();
    let axis = (0..dim).max_by_key(|&i| ints[i].abs()).unwrap();
    if ints[axis] == 0 {
        return Err(LabError::InvalidInput("zero covector".into()));
    }
    // kernel lattice from the pairwise relations
    let mut fiber: Vec<Vec<i64>> = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            let mut v = vec![0i64; dim];
            v[i] = ints[j];
            v[j] = -ints[i];
            let g = v.iter().fold(0, |g, &x| gcd(g, x));
            if g != 0 {
                fiber.push(v.iter().map(|x| x / g).collect());
            }
        }
    }
    let fiber_f: Vec<Vec<f64>> = fiber.iter().map(|v| v.iter().map(|&x| x as f64 * s).collect()).collect();
    let basis: Vec<Vec<f64>> = independent(&fiber_f, dim - 1);
    // (1) level sets are graphs over the fiber with spacelike tangents
    let opts_form = FormOptions { points_per_axis: Some(8), ..FormOptions::default() };
    let form = check_form(m, alpha, &opts_form)?;
    let graph_ok = basis.len() == dim - 1 && form.c > REJECT_TOL;
    // samples on Σ_0 over a fundamental domain of the fiber lattice
    let k = opts.fiber_samples.max(1);
    let total = k.pow((dim - 1) as u32);
    let level_point = |n: f64, idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; dim];
        p[axis] = n / alpha[axis];
        let mut r = idx;
        for b in &basis {
            let t = (r % k) as f64 / k as f64;
            r /= k;
            p = add(&p, &scale(b, t));
        }
        p
    };
    let tau = |x: &[f64]| dot(alpha, x);
    let reach_opts = ReachOptions { rule: EdgeRule::Timelike { eps_t: opts.eps_t }, ..ReachOptions::default() };
    let nmax = opts.n_max as f64;
    let step_alpha = 1.0 / alpha[axis];
    let per_sample: Vec<(bool, Option<usize>)> = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<(bool, Option<usize>)> {
            let p = level_point(0.0, idx);
            let mut corners = vec![p.iter().map(|x| x / s).collect::<Vec<_>>()];
            let mut far = p.clone();
            far[axis] += (nmax + 0.5) * step_alpha;
            corners.push(far.iter().map(|x| x / s).collect());
            let mut w = Window::covering(&corners, 0.0);
            let spread = (nmax as i64 + 2) * basis.iter().map(|b| norm(b) / s).fold(1.0, f64::max).ceil() as i64;
            for i in 0..dim {
                if i != axis {
                    w.lo[i] -= spread;
                    w.hi[i] += spread;
                }
            }
            let grid = reach_with(m, &p, &w, opts.resolution, &reach_opts)?;
            // (2) reaches beyond the next level
            let precedes = grid.reached_cells().any(|c| tau(&grid.point(&c)) >= 1.0);
            // (3) the whole level-n fiber, up to fiber translations
            let mut n0 = None;
            'levels: for n in 1..=opts.n_max {
                for j in 0..total {
                    let q = level_point(n as f64, j);
                    if !covered(&grid, &q, &fiber_f, n as i64 + 2) {
                        continue 'levels;
                    }
                }
                n0 = Some(n);
                break;
            }
            Ok((precedes, n0))
        })
        .collect::<Result<_>>()?;
    let precedes_ok = per_sample.iter().all(|x| x.0);
    let n0 = per_sample.iter().map(|x| x.1).try_fold(0usize, |acc, n| n.map(|n| acc.max(n)));
    let translation_ok = n0.is_some();
    Ok(SctpReport {
        alpha: alpha.to_vec(),
        pairings: ints,
        denominator: den,
        fiber_lattice: fiber,
        graph_ok,
        precedes_ok,
        precedes_checked: total,
        translation_ok,
        n0,
        passed: graph_ok && precedes_ok && translation_ok,
    })
}

/// Some fiber translate of q lands on a reached grid cell.
fn covered(grid: &crate::reach::ReachGrid, q: &[f64], fiber: &[Vec<f64>], range: i64) -> bool {
    let k = fiber.len();
    let side = (2 * range + 1) as usize;
    let total = side.pow(k as u32);
    (0..total).any(|mut idx| {
        let mut p = q.to_vec();
        for f in fiber {
            let c = (idx % side) as i64 - range;
            idx /= side;
            p = add(&p, &scale(f, c as f64));
        }
        let c = grid.cell_of(&p);
        grid.cells.contains(&c) && grid.is_reached(&c)
    })
}

/// First `k` linearly independent vectors (Gram-Schmidt test).
fn independent(vs: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for o in &ortho {
            w = sub(&w, &scale(o, dot(&w, o)));
        }
        if norm(&w) > 1e-9 * norm(v).max(1.0) {
            ortho.push(scale(&w, 1.0 / norm(&w)));
            out.push(v.clone());
            if out.len() == k {
                break;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub d_xy: f64,
    pub d_zw: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub eps: f64,
    pub samples: usize,
    pub max_ratio: f64,
    /// (lower edge, upper edge, count)
    pub ratio_histogram: Vec<(f64, f64, usize)>,
    /// Max |d(x,y) − d(x+k,y+k)| over lattice-translated probes.
    pub noise_bound: f64,
    pub segments: usize,
    pub restarts: usize,
    pub pairs: Vec<LipschitzPair>,
}

impl LipschitzReport {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        for (a, b, c) in &self.ratio_histogram {
            s.push_str(&format!("{a},{b},{c}\n"));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzOptions {
    pub segments: usize,
    pub restarts: usize,
    /// Side of the box (in periods) for base points.
    pub box_periods: f64,
    /// Norm range of y − x in periods.
    pub h_min: f64,
    pub h_max: f64,
    pub bins: usize,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions { segments: 8, restarts: 8, box_periods: 2.0, h_min: 0.5, h_max: 3.0, bins: 20 }
    }
}

/// Random vector of `cone` with norm in `[lo, hi]`.
fn sample_in_cone(cone: &PolyCone, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<f64> {
    let rays = cone.rays();
    let dim = cone.dim();
    let mut v = vec![0.0; dim];
    for _ in 0..dim {
        let r = &rays[rng.gen_range(0..rays.len())];
        let u = normalized(r).unwrap_or_else(|| r.clone());
        v = add(&v, &scale(&u, rng.gen_range(0.0..1.0)));
    }
    match normalized(&v) {
        Some(u) => scale(&u, rng.gen_range(lo..=hi)),
        None => scale(&normalized(&rays[0]).unwrap_or_else(|| rays[0].clone()), lo),
    }
}

/// Samples pairs with displacements in the ε-subcone and compares their
/// time separations.
pub fn coarse_lipschitz(
    m: &MetricField,
    est: &StableConeEstimate,
    eps: f64,
    samples: usize,
    seed: u64,
    opts: &LipschitzOptions,
) -> Result<LipschitzReport> {
    if !(eps > 0.0) {
        return Err(LabError::InvalidInput("eps must be positive".into()));
    }
    let sub_cone = est
        .cone
        .epsilon_subcone(eps, est.norm_model())
        .map_err(|e| LabError::InvalidInput(format!("T_eps unavailable: {e}")))?;
    if sub_cone.is_zero() || sub_cone.rays().is_empty() {
        return Err(LabError::InvalidInput(format!("T_eps is empty at eps = {eps}")));
    }
    let s = m.lattice_scale();
    let dim = m.dim();
    let d = |a: &[f64], b: &[f64], k: u64| time_separation(m, a, b, opts.segments, opts.restarts, seed ^ k).map(|r| r.value);
    let pairs: Vec<LipschitzPair> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<LipschitzPair> {
            let mut rng = rng_for(seed, i as u64);
            let mut pick = || -> (Vec<f64>, Vec<f64>) {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..opts.box_periods * s)).collect();
                let h = sample_in_cone(&sub_cone, &mut rng, opts.h_min * s, opts.h_max * s);
                let y = add(&x, &h);
                (x, y)
            };
            let (x, y) = pick();
            let (z, w) = pick();
            let d_xy = d(&x, &y, 2 * i as u64)?;
            let d_zw = d(&z, &w, 2 * i as u64 + 1)?;
            let ratio = (d_xy - d_zw).abs() / (dist(&x, &z) + dist(&y, &w) + 1.0);
            Ok(LipschitzPair { x, y, z, w, d_xy, d_zw, ratio })
        })
        .collect::<Result<_>>()?;
    // noise from lattice translations of a few pairs
    let probes = pairs.len().min(8);
    let noise: Vec<f64> = pairs[..probes]
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<f64> {
            let mut k = vec![0.0; dim];
            k[i % dim] = s;
            let a = add(&p.x, &k);
            let b = add(&p.y, &k);
            Ok((d(&a, &b, 2 * i as u64)? - p.d_xy).abs())
        })
        .collect::<Result<_>>()?;
    let max_ratio = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let bins = opts.bins.max(1);
    let top = if max_ratio > 0.0 { max_ratio } else { 1.0 };
    let mut hist: Vec<(f64, f64, usize)> =
        (0..bins).map(|b| (top * b as f64 / bins as f64, top * (b + 1) as f64 / bins as f64, 0)).collect();
    for p in &pairs {
        let b = ((p.ratio / top * bins as f64) as usize).min(bins - 1);
        hist[b].2 += 1;
    }
    Ok(LipschitzReport {
        eps,
        samples: pairs.len(),
        max_ratio,
        ratio_histogram: hist,
        noise_bound: noise.into_iter().fold(0.0, f64::max),
        segments: opts.segments,
        restarts: opts.restarts,
        pairs,
    })
}

/// Re-certifies the preset with its smooth periodic bump set to `amplitude`.
pub fn perturbation_smoke_test(base: &PresetSpec, amplitude: f64, budget: &CertifyBudget) -> Result<Certificate> {
    let mut spec = base.clone();
    spec.params.perturbation = amplitude;
    let m = make_preset(&spec)?;
    certify_class_a(&m, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::PresetName;

    #[test]
    fn flat_forms() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let o = FormOptions::default();
        let c = check_form(&m, &[1.0, 0.0], &o).unwrap();
        assert!((c.c - 0.5f64.sqrt()).abs() < 1e-12);
        let bad = check_form(&m, &[0.0, 1.0], &o).unwrap();
        assert!(bad.c < 0.0);
        assert!(matches!(temporal_function_check(&m, &[0.0, 1.0], &o, 10, 0), Err(LabError::RejectedForm { .. })));
    }

    #[test]
    fn rationals() {
        assert_eq!(rational_approx(0.75, 1000, 1e-12), Some((3, 4)));
        assert_eq!(rational_approx(2f64.sqrt(), 1000, 1e-12), None);
    }
}
