//! Stable norm and stable time cone estimation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone_kit::{conic_hull, cross_section_hausdorff_2d, NormModel, PolyCone};
use crate::curves::{causal_walk, geodesic_shoot_length, WalkLaw};
use crate::linalg::{all_finite, dist, dot, lerp, norm, scale, sub};
use crate::reach::{chord_length, forward_reach, frak_f_many, primitive_offsets, FrakOptions, ReachGrid, Window};
use crate::spacetime::MetricField;
use crate::{rng_for, LabError, Result};

#[derive(Clone, Copy, Debug)]
struct Item(f64, u32);
impl PartialEq for Item {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Default stencil radius for the lattice graph (all primitive offsets).
pub fn lattice_stencil_radius(dim: usize) -> usize {
    if dim == 2 {
        4
    } else {
        2
    }
}

/// g_R shortest-path distances on the grid `spacing·ℤⁿ` from the origin to
/// each target cell, restricted to the cell box `[lo, hi]`.
pub fn lattice_distances(
    m: &MetricField,
    resolution: usize,
    lo: &[i64],
    hi: &[i64],
    targets: &[Vec<i64>],
) -> Result<Vec<f64>> {
    let dim = m.dim();
    let h = m.lattice_scale() / resolution as f64;
    let offsets = primitive_offsets(dim, lattice_stencil_radius(dim));
    let widths: Vec<usize> = (0..dim).map(|i| (hi[i] - lo[i] + 1) as usize).collect();
    let total: usize = widths.iter().product();
    if total >= u32::MAX as usize {
        return Err(LabError::WindowOverflow {
            message: "lattice graph too large".into(),
            required: lo.iter().zip(hi).map(|(&a, &b)| (a, b)).collect(),
        });
    }
    let index = |c: &[i64]| -> usize {
        let mut idx = 0usize;
        for i in (0..dim).rev() {
            idx = idx * widths[i] + (c[i] - lo[i]) as usize;
        }
        idx
    };
    let cell = |mut idx: usize| -> Vec<i64> {
        (0..dim)
            .map(|i| {
                let v = idx % widths[i];
                idx /= widths[i];
                lo[i] + v as i64
            })
            .collect()
    };
    let inside = |c: &[i64]| (0..dim).all(|i| c[i] >= lo[i] && c[i] <= hi[i]);
    let origin = vec![0i64; dim];
    if !inside(&origin) || targets.iter().any(|t| !inside(t)) {
        return Err(LabError::WindowOverflow {
            message: "targets outside the lattice window".into(),
            required: lo.iter().zip(hi).map(|(&a, &b)| (a, b)).collect(),
        });
    }
    let identity = m.riemannian_is_identity();
    let unit_len: Vec<f64> = offsets.iter().map(|o| h * (o.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt()).collect();
    let mut d = vec![f64::INFINITY; total];
    let mut is_target = vec![false; total];
    let mut left = 0usize;
    for t in targets {
        let i = index(t);
        if !is_target[i] {
            is_target[i] = true;
            left += 1;
        }
    }
    let mut heap = BinaryHeap::new();
    let s = index(&origin);
    d[s] = 0.0;
    heap.push(Item(0.0, s as u32));
    let mut next = vec![0i64; dim];
    while let Some(Item(du, u)) = heap.pop() {
        let u = u as usize;
        if du > d[u] {
            continue;
        }
        if is_target[u] {
            is_target[u] = false;
            left -= 1;
            if left == 0 {
                break;
            }
        }
        let c = cell(u);
        let pu: Vec<f64> = c.iter().map(|&x| x as f64 * h).collect();
        for (k, o) in offsets.iter().enumerate() {
            for i in 0..dim {
                next[i] = c[i] + o[i];
            }
            if !inside(&next) {
                continue;
            }
            let w = if identity {
                unit_len[k]
            } else {
                let pv: Vec<f64> = next.iter().map(|&x| x as f64 * h).collect();
                chord_length(m, &pu, &pv)
            };
            let j = index(&next);
            let nd = du + w;
            if nd < d[j] {
                d[j] = nd;
                heap.push(Item(nd, j as u32));
            }
        }
    }
    Ok(targets.iter().map(|t| d[index(t)]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableNorm {
    pub h: Vec<i64>,
    pub norm: f64,
    /// (n, dist(0, n·h)/n)
    pub trace: Vec<(usize, f64)>,
    /// max_n |dist(0, n·h) − n·norm|
    pub std_est: f64,
    pub resolution: usize,
}

impl StableNorm {
    /// Running max of |dist(0, n·h) − n·norm| up to each n.
    pub fn deviation_envelope(&self) -> Vec<f64> {
        let mut env = Vec::new();
        let mut best: f64 = 0.0;
        for &(n, v) in &self.trace {
            best = best.max((n as f64 * v - n as f64 * self.norm).abs());
            env.push(best);
        }
        env
    }
}

/// ‖h‖ ≈ dist(0, n_max·h)/n_max on the lattice graph.
pub fn stable_norm(m: &MetricField, h: &[i64], n_max: usize, resolution: usize) -> Result<StableNorm> {
    if n_max < 8 {
        return Err(LabError::InvalidInput("n_max must be at least 8".into()));
    }
    if h.len() != m.dim() || h.iter().all(|&x| x == 0) {
        return Err(LabError::InvalidInput("h must be a nonzero lattice vector of the right dimension".into()));
    }
    let res = resolution as i64;
    let targets: Vec<Vec<i64>> = (1..=n_max as i64).map(|n| h.iter().map(|&x| x * n * res).collect()).collect();
    let far = &targets[n_max - 1];
    let lo: Vec<i64> = far.iter().map(|&x| x.min(0) - res).collect();
    let hi: Vec<i64> = far.iter().map(|&x| x.max(0) + res).collect();
    let d = lattice_distances(m, resolution, &lo, &hi, &targets)?;
    let norm = d[n_max - 1] / n_max as f64;
    let trace: Vec<(usize, f64)> = d.iter().enumerate().map(|(i, v)| (i + 1, v / (i + 1) as f64)).collect();
    let std_est = d.iter().enumerate().map(|(i, v)| (v - (i + 1) as f64 * norm).abs()).fold(0.0, f64::max);
    Ok(StableNorm { h: h.to_vec(), norm, trace, std_est, resolution })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableNormEstimate {
    /// (h, ‖h‖_est)
    pub values: Vec<(Vec<i64>, f64)>,
    /// Max over directions of max_n |dist(0, n·h) − n·‖h‖|.
    pub std_est: f64,
    /// Per direction: (n, dist(0, n·h)/n).
    pub plateau_trace: Vec<(Vec<i64>, Vec<(usize, f64)>)>,
    pub resolution: usize,
    pub n_max: usize,
    /// Euclidean when g_R is the identity, otherwise the polygonal unit
    /// ball spanned by the sampled values.
    pub model: NormModel,
}

impl StableNormEstimate {
    pub fn norm_model(&self) -> &NormModel {
        &self.model
    }

    pub fn value(&self, h: &[i64]) -> Option<f64> {
        self.values.iter().find(|(k, _)| k.as_slice() == h).map(|(_, v)| *v)
    }
}

/// Stable norm over several lattice directions.
pub fn estimate_stable_norm(
    m: &MetricField,
    hs: &[Vec<i64>],
    n_max: usize,
    resolution: usize,
) -> Result<StableNormEstimate> {
    if hs.is_empty() {
        return Err(LabError::EmptySample("no lattice directions".into()));
    }
    let runs: Vec<StableNorm> = hs.par_iter().map(|h| stable_norm(m, h, n_max, resolution)).collect::<Result<_>>()?;
    let std_est = runs.iter().map(|r| r.std_est).fold(0.0, f64::max);
    let model = if m.riemannian_is_identity() {
        NormModel::Euclidean
    } else {
        let s = m.lattice_scale();
        let pts: Vec<Vec<f64>> =
            runs.iter().map(|r| r.h.iter().map(|&x| x as f64 * s / r.norm).collect()).collect();
        NormModel::from_unit_ball_points(&pts)?
    };
    Ok(StableNormEstimate {
        values: runs.iter().map(|r| (r.h.clone(), r.norm)).collect(),
        std_est,
        plateau_trace: runs.iter().map(|r| (r.h.clone(), r.trace.clone())).collect(),
        resolution,
        n_max,
        model,
    })
}

/// Norm model for the stable norm: euclidean when g_R is the identity (the
/// stable norm of a flat metric), otherwise sampled from lattice distances
/// to the primitive classes of max-norm ≤ `radius`.
pub fn stable_norm_model(m: &MetricField, radius: usize, resolution: usize) -> Result<NormModel> {
    if m.riemannian_is_identity() {
        return Ok(NormModel::Euclidean);
    }
    let hs = primitive_offsets(m.dim(), radius);
    Ok(estimate_stable_norm(m, &hs, 8, resolution)?.model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeBudget {
    pub geodesics: usize,
    /// g_R length of each geodesic shot.
    pub geodesic_length: f64,
    pub geodesic_dt: f64,
    pub walks: usize,
    pub walk_steps: usize,
    pub walk_step_len: f64,
    /// Per-step spread of the drifted walks.
    pub walk_jitter: f64,
    /// Max-norm radius of lattice classes scanned with 𝔣.
    pub frak_radius: i64,
    pub frak_resolution: usize,
    /// Minimal g_R length of an admissible sample.
    pub l_min: f64,
}

impl Default for ConeBudget {
    fn default() -> Self {
        ConeBudget {
            geodesics: 512,
            geodesic_length: 200.0,
            geodesic_dt: 0.05,
            walks: 512,
            walk_steps: 10_000,
            walk_step_len: 0.02,
            walk_jitter: 0.05,
            frak_radius: 4,
            frak_resolution: 16,
            l_min: 100.0,
        }
    }
}

impl ConeBudget {
    /// Budget scaled down by `factor` in sample counts and lengths.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = |x: usize| ((x as f64 * factor).round() as usize).max(2);
        ConeBudget {
            geodesics: c(self.geodesics),
            walks: c(self.walks),
            geodesic_length: self.geodesic_length * factor.max(0.05),
            walk_steps: c(self.walk_steps),
            l_min: self.l_min * factor.max(0.05),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Geodesic,
    Walk,
    FrakZero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    pub rho: Vec<f64>,
    /// g_R length of the curve (0 for lattice classes).
    pub length: f64,
    pub source: SampleSource,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub geodesic: usize,
    pub walk: usize,
    pub frak_zero: usize,
    /// Samples dropped for being shorter than l_min.
    pub too_short: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub l_min: f64,
    pub samples: usize,
    /// Cross-section Hausdorff distance to the main estimate (2D only).
    pub hausdorff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableConeEstimate {
    pub cone: PolyCone,
    /// Collected points of 𝔗¹.
    pub cross_section: Vec<Vec<f64>>,
    pub err_est: Option<f64>,
    pub sources: Provenance,
    /// Identification of H₁ with ℝⁿ used for the coordinates.
    pub basis: String,
    pub budget: ConeBudget,
    pub sensitivity: Vec<Sensitivity>,
    #[serde(skip)]
    pub samples: Vec<ConeSample>,
}

impl StableConeEstimate {
    pub fn norm_model(&self) -> &NormModel {
        self.cone.norm_model()
    }
}

/// Random point in the fundamental domain.
fn random_point(m: &MetricField, rng: &mut impl Rng) -> Vec<f64> {
    (0..m.dim()).map(|_| rng.gen_range(0.0..m.lattice_scale())).collect()
}

/// Geodesic rotation vectors (initial directions spread across the cone,
/// including null ones).
fn geodesic_samples(m: &MetricField, budget: &ConeBudget, seed: u64) -> Result<Vec<ConeSample>> {
    let n = budget.geodesics;
    let out: Vec<Option<ConeSample>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<ConeSample>> {
            let mut rng = rng_for(seed, 10_000 + i as u64);
            let x0 = random_point(m, &mut rng);
            let (xh, basis) = m.orthonormal_frame(&x0);
            let dir = if m.dim() == 2 {
                let n0 = m.null_ray_from_seed(&x0, &xh, &basis[0])?;
                let n1 = m.null_ray_from_seed(&x0, &xh, &scale(&basis[0], -1.0))?;
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
                lerp(&n0, &n1, t)
            } else {
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                let s = m.frame_seed(&basis, th);
                let null = m.null_ray_from_seed(&x0, &xh, &s)?;
                // every fourth shot is null
                let mix = if i % 4 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
                lerp(&xh, &null, mix)
            };
            let v = scale(&dir, 1.0 / m.r_norm(&x0, &dir));
            let tr = geodesic_shoot_length(m, &x0, &v, budget.geodesic_length, budget.geodesic_dt, 64)?;
            if tr.truncated.is_some() {
                return Ok(None);
            }
            let c = &tr.curve;
            let len = c
                .segments()
                .map(|(a, b)| chord_length(m, a, b))
                .sum::<f64>()
                .max(tr_length_guard(c.first(), c.last()));
            let rho = scale(&sub(c.last(), c.first()), 1.0 / len);
            Ok(Some(ConeSample { rho, length: len, source: SampleSource::Geodesic }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn tr_length_guard(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b).max(f64::MIN_POSITIVE)
}

/// Rotation vectors of drifted causal walks.
fn walk_samples(m: &MetricField, budget: &ConeBudget, seed: u64) -> Result<Vec<ConeSample>> {
    let n = budget.walks;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, 20_000 + i as u64);
            let x0 = random_point(m, &mut rng);
            let law = if m.dim() == 2 {
                let mix = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
                WalkLaw::Drift { theta: 0.0, mix, jitter: budget.walk_jitter }
            } else {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let mix = if i % 4 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
                WalkLaw::Drift { theta, mix, jitter: budget.walk_jitter }
            };
            let w = causal_walk(m, &x0, budget.walk_steps, budget.walk_step_len, seed ^ (0x9e37 + i as u64), law)?;
            let len: f64 = w.segments().map(|(a, b)| chord_length(m, a, b)).sum();
            let rho = scale(&sub(w.last(), w.first()), 1.0 / len);
            Ok(ConeSample { rho, length: len, source: SampleSource::Walk })
        })
        .collect()
}

/// Lattice classes with 𝔣(h) ≤ 2 cells, scaled to unit lattice distance.
fn frak_zero_samples(m: &MetricField, budget: &ConeBudget) -> Result<Vec<ConeSample>> {
    if budget.frak_radius < 1 {
        return Ok(Vec::new());
    }
    let dim = m.dim();
    let classes = primitive_offsets(dim, budget.frak_radius as usize);
    let fs = frak_f_many(m, &classes, budget.frak_resolution, &FrakOptions { sources_per_axis: 1, stencil_radius: None })?;
    let cell = m.lattice_scale() / budget.frak_resolution as f64;
    let zero: Vec<Vec<i64>> = fs.iter().filter(|f| f.f_of_h <= 2.0 * cell + 1e-12).map(|f| f.h.clone()).collect();
    if zero.is_empty() {
        return Ok(Vec::new());
    }
    let res = 8usize;
    let r = budget.frak_radius;
    let targets: Vec<Vec<i64>> = zero.iter().map(|h| h.iter().map(|x| x * res as i64).collect()).collect();
    let lo = vec![-(r + 1) * res as i64; dim];
    let hi = vec![(r + 1) * res as i64; dim];
    let d = lattice_distances(m, res, &lo, &hi, &targets)?;
    let s = m.lattice_scale();
    Ok(zero
        .iter()
        .zip(d)
        .map(|(h, dh)| ConeSample {
            rho: h.iter().map(|&x| x as f64 * s / dh).collect(),
            length: 0.0,
            source: SampleSource::FrakZero,
        })
        .collect())
}

fn hull_of(m: &MetricField, samples: &[&ConeSample], nm: &NormModel) -> Result<PolyCone> {
    let rays: Vec<Vec<f64>> =
        samples.iter().map(|s| s.rho.clone()).filter(|r| norm(r) > 1e-12 && all_finite(r)).collect();
    if rays.is_empty() {
        return Err(LabError::EmptySample("no admissible rotation vectors".into()));
    }
    let _ = m;
    conic_hull(&rays, nm.clone())
}

/// Empirical stable time cone from geodesics, drifted walks and 𝔣-zero classes.
pub fn estimate_stable_cone(m: &MetricField, budget: &ConeBudget, seed: u64) -> Result<StableConeEstimate> {
    let nm = stable_norm_model(m, if m.dim() == 2 { 3 } else { 1 }, 8)?;
    let mut samples = geodesic_samples(m, budget, seed)?;
    samples.extend(walk_samples(m, budget, seed)?);
    samples.extend(frak_zero_samples(m, budget)?);
    let admissible = |s: &ConeSample, l_min: f64| s.source == SampleSource::FrakZero || s.length >= l_min;
    let mut prov = Provenance::default();
    for s in &samples {
        if !admissible(s, budget.l_min) {
            prov.too_short += 1;
            continue;
        }
        match s.source {
            SampleSource::Geodesic => prov.geodesic += 1,
            SampleSource::Walk => prov.walk += 1,
            SampleSource::FrakZero => prov.frak_zero += 1,
        }
    }
    let kept: Vec<&ConeSample> = samples.iter().filter(|s| admissible(s, budget.l_min)).collect();
    if kept.is_empty() {
        return Err(LabError::EmptySample("no sample reached the admissible length".into()));
    }
    let cone = hull_of(m, &kept, &nm)?;
    let mut sensitivity = Vec::new();
    for factor in [0.5, 1.0, 2.0] {
        let l = budget.l_min * factor;
        let sub: Vec<&ConeSample> = samples.iter().filter(|s| admissible(s, l)).collect();
        let h = if sub.is_empty() {
            None
        } else {
            hull_of(m, &sub, &nm).ok().and_then(|c| cross_section_hausdorff_2d(&c, &cone).ok())
        };
        sensitivity.push(Sensitivity { l_min: l, samples: sub.len(), hausdorff: h });
    }
    Ok(StableConeEstimate {
        cone,
        cross_section: kept.iter().map(|s| s.rho.clone()).collect(),
        err_est: None,
        sources: prov,
        basis: "standard basis of Z^n scaled by the lattice period".into(),
        budget: budget.clone(),
        sensitivity,
        samples,
    })
}

/// 𝔞(h) = dist_{‖·‖}(h, 𝔗), 0 inside the cone.
pub fn a_of_h(est: &StableConeEstimate, norm: &StableNormEstimate, h: &[f64]) -> f64 {
    let nm = norm.norm_model();
    if nm.is_euclidean() {
        est.cone.euclidean_distance(h)
    } else {
        match PolyCone::hull(est.cone.dim(), est.cone.rays(), nm.clone()) {
            Ok(c) => c.distance(h),
            Err(_) => est.cone.distance(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P01aSample {
    pub x: Vec<f64>,
    /// Displacement tested (z − x for side a, h for side b).
    pub v: Vec<f64>,
    pub side: char,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P01aReport {
    pub err_est: f64,
    pub resolution: usize,
    pub h_norm_range: (f64, f64),
    pub per_sample: Vec<P01aSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct P01aOptions {
    pub resolution: usize,
    /// Number of base points x.
    pub base_points: usize,
    /// Upper end of the norm range of sampled h (lower end 1 period).
    pub h_norm_max: f64,
}

impl Default for P01aOptions {
    fn default() -> Self {
        P01aOptions { resolution: 16, base_points: 4, h_norm_max: 4.0 }
    }
}

/// Two-sided bounded-distance check between J⁺(x) − x and the cone.
pub fn check_p01a(
    m: &MetricField,
    est: &StableConeEstimate,
    samples: usize,
    seed: u64,
    opts: &P01aOptions,
) -> Result<P01aReport> {
    let dim = m.dim();
    let s = m.lattice_scale();
    let nm = est.norm_model().clone();
    let r = opts.h_norm_max;
    let window = Window::cube(dim, (r + 1.0).ceil() as i64);
    let per_base = samples.div_ceil(opts.base_points.max(1));
    let mut rng = rng_for(seed, 0);
    let bases: Vec<Vec<f64>> = (0..opts.base_points.max(1)).map(|_| random_point(m, &mut rng)).collect();
    let dirs: Vec<Vec<f64>> = est.cone.rays().to_vec();
    let results: Vec<Result<Vec<P01aSample>>> = bases
        .par_iter()
        .enumerate()
        .map(|(bi, x)| {
            let mut rng = rng_for(seed, 1 + bi as u64);
            let grid: ReachGrid = forward_reach(m, x, &window, opts.resolution)?;
            let reached: Vec<Vec<i64>> = grid.reached_cells().collect();
            let frontier: Vec<Vec<f64>> = grid.frontier_cells().iter().map(|c| grid.point(c)).collect();
            let mut out = Vec::new();
            for _ in 0..per_base {
                // (a) reached z: distance of z − x to the cone
                let c = &reached[rng.gen_range(0..reached.len())];
                let z = grid.point(c);
                let v = sub(&z, x);
                if norm(&v) <= r * s {
                    let d = if nm.is_euclidean() { est.cone.euclidean_distance(&v) } else { est.cone.distance(&v) };
                    out.push(P01aSample { x: x.clone(), v, side: 'a', distance: d });
                }
                // (b) h in the cone: distance to J⁺(x) − x
                let w: Vec<f64> = {
                    let k = dirs.len();
                    let a = &dirs[rng.gen_range(0..k)];
                    let b = &dirs[rng.gen_range(0..k)];
                    let t = rng.gen_range(0.0..1.0);
                    let u = lerp(a, b, t);
                    let len = rng.gen_range(s..=r * s);
                    scale(&u, len / nm.norm(&u))
                };
                let target: Vec<f64> = (0..dim).map(|i| x[i] + w[i]).collect();
                let tc = grid.cell_of(&target);
                let d = if grid.is_reached(&tc) && dist(&grid.point(&tc), &target) < 1e-12 {
                    0.0
                } else {
                    let inside = grid.is_reached(&tc);
                    let near = frontier.iter().map(|z| nm.dist(&target, z)).fold(f64::INFINITY, f64::min);
                    if inside {
                        // target lies between reached cells: distance to the nearest reached cell
                        nm.dist(&target, &grid.point(&tc)).min(near)
                    } else {
                        near
                    }
                };
                out.push(P01aSample { x: x.clone(), v: w, side: 'b', distance: d });
            }
            Ok(out)
        })
        .collect();
    let mut per_sample = Vec::new();
    for r in results {
        per_sample.extend(r?);
    }
    let err_est = per_sample.iter().map(|p| p.distance).fold(0.0, f64::max);
    Ok(P01aReport { err_est, resolution: opts.resolution, h_norm_range: (s, r * s), per_sample })
}

/// Timelike vector field used by [`flow_rotation_vector`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowField {
    Constant { v: Vec<f64> },
    /// The time axis ∂₀.
    TimeAxis,
    /// `∂₀ + kappa·sin(2π x₀/s)·∂₁`.
    Swirl { kappa: f64 },
}

impl FlowField {
    fn eval(&self, m: &MetricField, p: &[f64]) -> Vec<f64> {
        let n = m.dim();
        match self {
            FlowField::Constant { v } => v.clone(),
            FlowField::TimeAxis => {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                e
            }
            FlowField::Swirl { kappa } => {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                e[1] = kappa * (std::f64::consts::TAU * p[0] / m.lattice_scale()).sin();
                e
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRotation {
    pub rho: Vec<f64>,
    pub length: f64,
    pub steps: usize,
}

/// Rotation vector of the flow line of X (unit g_R speed) from x0 for g_R time T.
pub fn flow_rotation_vector(m: &MetricField, field: &FlowField, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowRotation> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(LabError::InvalidInput("T and dt must be positive".into()));
    }
    if let FlowField::Constant { v } = field {
        if v.len() != m.dim() {
            return Err(LabError::InvalidInput("flow vector has the wrong dimension".into()));
        }
    }
    let unit = |p: &[f64]| -> Result<Vec<f64>> {
        let x = field.eval(m, p);
        if !m.causal_character(p, &x).is_future_timelike() {
            return Err(LabError::NotTimelike { point: p.to_vec() });
        }
        Ok(scale(&x, 1.0 / m.r_norm(p, &x)))
    };
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut x = x0.to_vec();
    let mut length = 0.0;
    for _ in 0..steps {
        let k1 = unit(&x)?;
        let k2 = unit(&crate::linalg::axpy(&x, 0.5 * dt, &k1))?;
        let k3 = unit(&crate::linalg::axpy(&x, 0.5 * dt, &k2))?;
        let k4 = unit(&crate::linalg::axpy(&x, dt, &k3))?;
        let nx: Vec<f64> = (0..x.len()).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        length += chord_length(m, &x, &nx);
        x = nx;
    }
    Ok(FlowRotation { rho: scale(&sub(&x, x0), 1.0 / length), length, steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallInclusion {
    pub radius: f64,
    pub k_est: f64,
    pub pairs: usize,
    pub all_included: bool,
    pub failures: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Every grid point of the ball B_R(x+v) reached from x.
fn ball_reached(grid: &ReachGrid, x: &[f64], v: &[f64], r: f64) -> bool {
    let center: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
    let cells = (r / grid.spacing).ceil() as i64 + 1;
    let cc = grid.cell_of(&center);
    let dim = x.len();
    let side = 2 * cells + 1;
    let total = (side as usize).pow(dim as u32);
    (0..total).all(|idx| {
        let mut k = idx as i64;
        let c: Vec<i64> = (0..dim)
            .map(|i| {
                let o = k % side - cells;
                k /= side;
                cc[i] + o
            })
            .collect();
        let p = grid.point(&c);
        dist(&p, &center) > r || grid.is_reached(&c)
    })
}

/// Desk analogue of the ball inclusion B_R(q) ⊆ I⁺(p) for q − p deep in 𝔗:
/// estimates the depth K(R) needed along sampled cone directions, then
/// checks random pairs at that depth.
pub fn ball_inclusion_check(
    m: &MetricField,
    est: &StableConeEstimate,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<BallInclusion> {
    let dim = m.dim();
    let s = m.lattice_scale();
    let nm = est.norm_model().clone();
    let center = est.cone.central_direction().ok_or_else(|| LabError::EmptySample("empty cone".into()))?;
    let rays = est.cone.rays().to_vec();
    let depth_of = |v: &[f64]| est.cone.boundary_distance(v, &nm).value;
    let res = 16;
    let kmax = 4.0 * (radius + 1.0);
    let window = Window::cube(dim, (kmax * 3.0 / s).ceil() as i64 + 1);
    let reach_max = (window.hi[0] as f64) * s - 1.0;
    let mut rng = rng_for(seed, 0);
    let grids: Vec<(Vec<f64>, ReachGrid)> = (0..4)
        .map(|_| random_point(m, &mut rng))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| forward_reach(m, &x, &window, res).map(|g| (x, g)))
        .collect::<Result<_>>()?;
    let unit_depth = |u: &[f64]| depth_of(u) / nm.norm(u);
    const MAX_T: f64 = 0.75;
    // K(R): just past the deepest failure seen along scanned directions
    let mut k_est: f64 = radius;
    for (x, g) in &grids {
        for r in &rays {
            for t in [0.0, 0.25, 0.5, MAX_T] {
                let u = lerp(&center, r, t);
                let ud = unit_depth(&u);
                if ud <= 1e-9 {
                    continue;
                }
                let mut depth = radius;
                while depth <= kmax {
                    let v = scale(&u, depth / ud / nm.norm(&u));
                    if norm(&v) + radius > reach_max {
                        break;
                    }
                    if !ball_reached(g, x, &v, radius) {
                        k_est = k_est.max(depth * 1.05);
                    }
                    depth *= 1.05;
                }
            }
        }
    }
    let mut failures = Vec::new();
    let mut done = 0;
    let mut guard = 0;
    while done < pairs && guard < 100 * pairs {
        guard += 1;
        let (x, g) = &grids[done % grids.len()];
        let a = &rays[rng.gen_range(0..rays.len())];
        let u = lerp(&center, a, rng.gen_range(0.0..MAX_T));
        let ud = unit_depth(&u);
        if ud <= 1e-9 {
            continue;
        }
        let v = scale(&u, k_est * rng.gen_range(1.0..1.5) / ud / nm.norm(&u));
        if norm(&v) + radius > reach_max {
            continue;
        }
        if !ball_reached(g, x, &v, radius) {
            failures.push((x.clone(), v.clone()));
        }
        done += 1;
    }
    Ok(BallInclusion { radius, k_est, pairs: done, all_included: failures.is_empty(), failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetSumReport {
    pub families: usize,
    pub family_size: usize,
    pub eps: f64,
    /// Min over families of the best b-subset depth ratio.
    pub eta: f64,
}

/// Desk analogue of the subset-sum lemma: for random families in 𝔗 with
/// comparable norms whose sum is ε-deep, some `dim`-subset sums into 𝔗_η.
pub fn subset_sum_check(
    est: &StableConeEstimate,
    families: usize,
    family_size: usize,
    eps: f64,
    seed: u64,
) -> Result<SubsetSumReport> {
    let nm = est.norm_model().clone();
    let b = est.cone.dim();
    if family_size < b {
        return Err(LabError::InvalidInput("family smaller than the dimension".into()));
    }
    let rays = est.cone.rays().to_vec();
    let depth = |v: &[f64]| {
        let n = nm.norm(v);
        if n == 0.0 {
            0.0
        } else {
            est.cone.boundary_distance(v, &nm).value / n
        }
    };
    let mut rng = rng_for(seed, 0);
    let mut eta = f64::INFINITY;
    let mut got = 0;
    let mut guard = 0;
    while got < families && guard < 10_000 * families {
        guard += 1;
        let fam: Vec<Vec<f64>> = (0..family_size)
            .map(|_| {
                let a = &rays[rng.gen_range(0..rays.len())];
                let c = &rays[rng.gen_range(0..rays.len())];
                let u = lerp(a, c, rng.gen_range(0.0..1.0));
                scale(&u, rng.gen_range(1.0..2.0) / nm.norm(&u))
            })
            .collect();
        let sum = fam.iter().fold(vec![0.0; b], |acc, h| crate::linalg::add(&acc, h));
        if depth(&sum) < eps {
            continue;
        }
        got += 1;
        let mut best: f64 = 0.0;
        for_each_subset(family_size, b, &mut |idx| {
            let s = idx.iter().fold(vec![0.0; b], |acc, &i| crate::linalg::add(&acc, &fam[i]));
            best = best.max(depth(&s));
        });
        eta = eta.min(best);
    }
    if got == 0 {
        return Err(LabError::EmptySample("no family with an eps-deep sum".into()));
    }
    Ok(SubsetSumReport { families: got, family_size, eps, eta })
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Distance of v to the cone boundary relative to |v| (0 outside).
pub fn relative_depth(cone: &PolyCone, nm: &NormModel, v: &[f64]) -> f64 {
    let n = nm.norm(v);
    if n == 0.0 {
        return 0.0;
    }
    let d = cone.boundary_distance(v, nm);
    if d.outside {
        0.0
    } else {
        d.value / n
    }
}

/// α·v ≥ 0 on every generator of the cone.
pub fn pairs_nonnegative(cone: &PolyCone, alpha: &[f64]) -> bool {
    cone.rays().iter().all(|r| dot(alpha, r) >= -1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{make_preset, PresetName, PresetSpec};

    #[test]
    fn flat_stable_norm_is_euclidean() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let sn = stable_norm(&m, &[3, 4], 8, 4).unwrap();
        assert!((sn.norm - 5.0).abs() < 1e-9);
        assert!(sn.std_est < 1e-9);
    }

    #[test]
    fn flow_on_flat() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let r = flow_rotation_vector(&m, &FlowField::TimeAxis, &[0.0, 0.3], 10.0, 0.1).unwrap();
        assert!((r.rho[0] - 1.0).abs() < 1e-12 && r.rho[1].abs() < 1e-12);
        let bad = flow_rotation_vector(&m, &FlowField::Constant { v: vec![0.0, 1.0] }, &[0.0, 0.0], 1.0, 0.1);
        assert!(matches!(bad, Err(LabError::NotTimelike { .. })));
    }
}
