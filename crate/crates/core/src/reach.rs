//! Grid causal reachability on the cover.
//!
//! The grid has spacing `s/res` (lattice scale `s`) and is anchored at an
//! origin point. An edge `c → c + o` for a primitive stencil offset `o` is
//! accepted when the straight segment is future causal (or timelike with a
//! margin) at every sample point. Since the metric is periodic and the
//! spacing divides the period, acceptance depends only on the residue of `c`
//! modulo `res`, so masks are computed once per residue.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{segment_future_causal, segment_timelike_margin};
use crate::linalg::{dist, lerp, sub};
use crate::spacetime::MetricField;
use crate::{LabError, Result};

/// Default timelike margin for viciousness witnesses.
pub const DEFAULT_EPS_T: f64 = 0.05;

/// Box of fundamental-domain copies, `[lo_i·s, hi_i·s]` on each axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Window {
    pub fn cube(dim: usize, r: i64) -> Self {
        Window { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    /// Smallest integer box containing every given coordinate point (in
    /// units of the lattice scale) plus `margin`.
    pub fn covering(points: &[Vec<f64>], margin: f64) -> Self {
        let n = points[0].len();
        let lo = (0..n)
            .map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min) - margin)
            .map(|x| x.floor() as i64)
            .collect();
        let hi = (0..n)
            .map(|i| points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max) + margin)
            .map(|x| x.ceil() as i64)
            .collect();
        Window { lo, hi }
    }
}

/// Edge acceptance rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeRule {
    Causal,
    Timelike { eps_t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachOptions {
    /// Max-norm radius of the primitive stencil (cells); default 12 in 2D, 3 in 3D.
    pub stencil_radius: Option<usize>,
    pub rule: EdgeRule,
    /// Follow past-directed edges instead.
    pub past: bool,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { stencil_radius: None, rule: EdgeRule::Causal, past: false }
    }
}

fn default_radius(dim: usize) -> usize {
    if dim == 2 {
        12
    } else {
        3
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer offsets with max-norm ≤ r, sorted by length.
pub fn primitive_offsets(dim: usize, r: usize) -> Vec<Vec<i64>> {
    let r = r as i64;
    let side = 2 * r + 1;
    let total = (side as usize).pow(dim as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code as i64;
        let o: Vec<i64> = (0..dim)
            .map(|_| {
                let v = c % side - r;
                c /= side;
                v
            })
            .collect();
        let g = o.iter().fold(0, |g, &x| gcd(g, x));
        if g == 1 {
            out.push(o);
        }
    }
    out.sort_by(|a, b| {
        let na: i64 = a.iter().map(|x| x * x).sum();
        let nb: i64 = b.iter().map(|x| x * x).sum();
        na.cmp(&nb).then(a.cmp(b))
    });
    out
}

/// Per-residue acceptance masks for a stencil.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub dim: usize,
    pub resolution: usize,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub offsets: Vec<Vec<i64>>,
    pub rule: EdgeRule,
    pub past: bool,
    words: usize,
    masks: Vec<u64>,
}

impl Stencil {
    pub fn build(m: &MetricField, origin: &[f64], resolution: usize, opts: &ReachOptions) -> Result<Self> {
        if resolution < 2 {
            return Err(LabError::InvalidInput("resolution must be at least 2".into()));
        }
        let dim = m.dim();
        let radius = opts.stencil_radius.unwrap_or_else(|| default_radius(dim));
        let offsets = primitive_offsets(dim, radius);
        let spacing = m.lattice_scale() / resolution as f64;
        let words = offsets.len().div_ceil(64);
        let residues = resolution.pow(dim as u32);
        let sign = if opts.past { -1.0 } else { 1.0 };
        let masks: Vec<Vec<u64>> = (0..residues)
            .into_par_iter()
            .map(|r| {
                let cell = residue_coords(r, resolution, dim);
                let p: Vec<f64> = (0..dim).map(|i| origin[i] + cell[i] as f64 * spacing).collect();
                let g = m.g(&p);
                let x = m.orientation(&p);
                let mut w = vec![0u64; words];
                for (k, o) in offsets.iter().enumerate() {
                    let d: Vec<f64> = o.iter().map(|&oi| sign * oi as f64 * spacing).collect();
                    // quick rejection at the start point
                    if g.quad(&d) > 1e-9 * crate::linalg::dot(&d, &d) || g.bilinear(&d, &x) >= 0.0 {
                        continue;
                    }
                    let q: Vec<f64> = (0..dim).map(|i| p[i] + d[i]).collect();
                    let sub = o.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(1).max(2);
                    let ok = match opts.rule {
                        EdgeRule::Causal => segment_future_causal(m, &p, &q, sub),
                        EdgeRule::Timelike { eps_t } => segment_timelike_margin(m, &p, &q, sub, eps_t),
                    };
                    if ok {
                        w[k / 64] |= 1 << (k % 64);
                    }
                }
                w
            })
            .collect();
        Ok(Stencil {
            dim,
            resolution,
            spacing,
            origin: origin.to_vec(),
            offsets,
            rule: opts.rule,
            past: opts.past,
            words,
            masks: masks.concat(),
        })
    }

    fn residue(&self, cell: &[i64]) -> usize {
        let r = self.resolution as i64;
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            idx = idx * self.resolution + cell[i].rem_euclid(r) as usize;
        }
        idx
    }

    /// Accepted offset indices at `cell`.
    pub fn accepted(&self, cell: &[i64]) -> impl Iterator<Item = usize> + '_ {
        let base = self.residue(cell) * self.words;
        let words = &self.masks[base..base + self.words];
        (0..self.offsets.len()).filter(move |&k| words[k / 64] >> (k % 64) & 1 == 1)
    }

    pub fn accepts(&self, cell: &[i64], k: usize) -> bool {
        let base = self.residue(cell) * self.words;
        self.masks[base + k / 64] >> (k % 64) & 1 == 1
    }

    pub fn point(&self, cell: &[i64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.origin[i] + cell[i] as f64 * self.spacing).collect()
    }

    /// Signed displacement of offset k (past stencils step backwards).
    pub fn step(&self, k: usize) -> Vec<i64> {
        let s = if self.past { -1 } else { 1 };
        self.offsets[k].iter().map(|&x| s * x).collect()
    }
}

fn residue_coords(r: usize, res: usize, dim: usize) -> Vec<i64> {
    let mut c = r;
    (0..dim)
        .map(|_| {
            let v = c % res;
            c /= res;
            v as i64
        })
        .collect()
}

/// Cell box of a window relative to a stencil's origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CellBox {
    pub fn from_window(st: &Stencil, scale: f64, w: &Window) -> Self {
        let lo = (0..st.dim)
            .map(|i| ((w.lo[i] as f64 * scale - st.origin[i]) / st.spacing - 1e-9).ceil() as i64)
            .collect();
        let hi = (0..st.dim)
            .map(|i| ((w.hi[i] as f64 * scale - st.origin[i]) / st.spacing + 1e-9).floor() as i64)
            .collect();
        CellBox { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1).max(0) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: &[i64]) -> bool {
        c.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| x >= l && x <= h)
    }

    pub fn index(&self, c: &[i64]) -> usize {
        let mut idx = 0usize;
        for i in (0..c.len()).rev() {
            idx = idx * (self.hi[i] - self.lo[i] + 1) as usize + (c[i] - self.lo[i]) as usize;
        }
        idx
    }

    pub fn cell(&self, mut idx: usize) -> Vec<i64> {
        (0..self.lo.len())
            .map(|i| {
                let w = (self.hi[i] - self.lo[i] + 1) as usize;
                let v = idx % w;
                idx /= w;
                self.lo[i] + v as i64
            })
            .collect()
    }

    pub fn on_boundary(&self, c: &[i64]) -> bool {
        c.iter().zip(self.lo.iter().zip(&self.hi)).any(|(x, (l, h))| x == l || x == h)
    }
}

const NONE: u32 = u32::MAX;

/// Reached set with parent chains.
#[derive(Clone, Debug)]
pub struct ReachGrid {
    pub resolution: usize,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub cells: CellBox,
    pub source: Vec<i64>,
    /// Longest stencil step in cells.
    pub step_len: f64,
    reached: Vec<bool>,
    parent: Vec<u32>,
    /// BFS order of reached cells.
    order: Vec<u32>,
}

impl ReachGrid {
    pub fn is_reached(&self, c: &[i64]) -> bool {
        self.cells.contains(c) && self.reached[self.cells.index(c)]
    }

    pub fn point(&self, c: &[i64]) -> Vec<f64> {
        (0..c.len()).map(|i| self.origin[i] + c[i] as f64 * self.spacing).collect()
    }

    /// Cell nearest to a point.
    pub fn cell_of(&self, p: &[f64]) -> Vec<i64> {
        (0..p.len()).map(|i| ((p[i] - self.origin[i]) / self.spacing).round() as i64).collect()
    }

    pub fn reached_count(&self) -> usize {
        self.order.len()
    }

    /// Reached cells in BFS order.
    pub fn reached_cells(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        self.order.iter().map(|&i| self.cells.cell(i as usize))
    }

    pub fn reached_points(&self) -> Vec<Vec<f64>> {
        self.reached_cells().map(|c| self.point(&c)).collect()
    }

    /// Reached cells with an unreached (or out-of-window) axis neighbour.
    pub fn frontier_cells(&self) -> Vec<Vec<i64>> {
        self.reached_cells()
            .filter(|c| {
                (0..c.len()).any(|i| {
                    [-1, 1].iter().any(|d| {
                        let mut n = c.clone();
                        n[i] += d;
                        !self.is_reached(&n)
                    })
                })
            })
            .collect()
    }

    /// Chain of cells from the source to `c` (inclusive).
    pub fn chain_to(&self, c: &[i64]) -> Option<Vec<Vec<i64>>> {
        if !self.is_reached(c) {
            return None;
        }
        let mut out = vec![c.to_vec()];
        let mut i = self.cells.index(c);
        while self.parent[i] != NONE {
            i = self.parent[i] as usize;
            out.push(self.cells.cell(i));
        }
        out.reverse();
        Some(out)
    }

    pub fn touches_boundary(&self) -> bool {
        self.reached_cells().any(|c| self.cells.on_boundary(&c))
    }

    /// Reached points as CSV.
    pub fn to_csv(&self) -> String {
        let n = self.origin.len();
        let mut s = (0..n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        s.push('\n');
        for p in self.reached_points() {
            s.push_str(&p.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Breadth-first propagation from `source`; `stop` is called on each newly
/// reached cell and ends the search when it returns true.
pub fn propagate(
    st: &Stencil,
    cells: &CellBox,
    source: &[i64],
    mut stop: impl FnMut(&[i64]) -> bool,
) -> Result<ReachGrid> {
    if !cells.contains(source) {
        return Err(LabError::InvalidInput("window does not contain the source".into()));
    }
    let total = cells.len();
    if total >= NONE as usize {
        return Err(LabError::InvalidInput("window too large".into()));
    }
    let mut reached = vec![false; total];
    let mut parent = vec![NONE; total];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    let s = cells.index(source);
    reached[s] = true;
    order.push(s as u32);
    queue.push_back(s);
    let steps: Vec<Vec<i64>> = (0..st.offsets.len()).map(|k| st.step(k)).collect();
    let mut done = stop(source);
    let mut next = vec![0i64; st.dim];
    while let Some(i) = queue.pop_front() {
        if done {
            break;
        }
        let c = cells.cell(i);
        for k in st.accepted(&c) {
            for d in 0..st.dim {
                next[d] = c[d] + steps[k][d];
            }
            if !cells.contains(&next) {
                continue;
            }
            let j = cells.index(&next);
            if reached[j] {
                continue;
            }
            reached[j] = true;
            parent[j] = i as u32;
            order.push(j as u32);
            queue.push_back(j);
            if stop(&next) {
                done = true;
                break;
            }
        }
    }
    let radius = st.offsets.iter().map(|o| o.iter().map(|x| x.abs()).max().unwrap_or(0)).max().unwrap_or(0);
    Ok(ReachGrid {
        resolution: st.resolution,
        spacing: st.spacing,
        origin: st.origin.clone(),
        cells: cells.clone(),
        source: source.to_vec(),
        step_len: radius as f64,
        reached,
        parent,
        order,
    })
}

/// Inner approximation of J⁺(x) ∩ window.
pub fn forward_reach(m: &MetricField, x: &[f64], window: &Window, resolution: usize) -> Result<ReachGrid> {
    reach_with(m, x, window, resolution, &ReachOptions::default())
}

pub fn reach_with(
    m: &MetricField,
    x: &[f64],
    window: &Window,
    resolution: usize,
    opts: &ReachOptions,
) -> Result<ReachGrid> {
    check_point(m, x)?;
    if resolution < 16 {
        return Err(LabError::InvalidInput("forward_reach needs resolution >= 16".into()));
    }
    let st = Stencil::build(m, x, resolution, opts)?;
    let cells = CellBox::from_window(&st, m.lattice_scale(), window);
    let src = vec![0i64; m.dim()];
    if !cells.contains(&src) {
        return Err(LabError::InvalidInput("window does not contain x".into()));
    }
    propagate(&st, &cells, &src, |_| false)
}

fn check_point(m: &MetricField, x: &[f64]) -> Result<()> {
    if x.len() != m.dim() || !crate::linalg::all_finite(x) {
        return Err(LabError::InvalidInput("point must be finite with the metric's dimension".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViciousWitness {
    pub point: Vec<f64>,
    /// Lattice class k (integer coordinates) with x + k reached.
    pub class: Vec<i64>,
    pub chain: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViciousReport {
    pub vicious: bool,
    pub resolution: usize,
    pub eps_t: f64,
    pub checked: usize,
    pub witnesses: Vec<ViciousWitness>,
    /// Points without a witness at this resolution and window.
    pub failures: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViciousOptions {
    pub eps_t: f64,
    /// Window half-width in fundamental copies.
    pub window: i64,
    pub stop_at_first_failure: bool,
    pub stencil_radius: Option<usize>,
    /// Check only this many grid points per axis (all when None).
    pub points_per_axis: Option<usize>,
}

impl Default for ViciousOptions {
    fn default() -> Self {
        ViciousOptions {
            eps_t: DEFAULT_EPS_T,
            window: 4,
            stop_at_first_failure: true,
            stencil_radius: None,
            points_per_axis: None,
        }
    }
}

/// Grid cells of the fundamental domain checked as sources.
fn source_cells(dim: usize, res: usize, per_axis: Option<usize>) -> Vec<Vec<i64>> {
    let n = per_axis.unwrap_or(res).clamp(1, res);
    let total = n.pow(dim as u32);
    (0..total)
        .map(|idx| {
            let mut c = idx;
            (0..dim)
                .map(|_| {
                    let v = c % n;
                    c /= n;
                    (v * res / n) as i64
                })
                .collect()
        })
        .collect()
}

/// Viciousness at resolution: every checked grid point reaches a nonzero
/// lattice translate of itself by strictly timelike steps.
pub fn is_vicious(m: &MetricField, resolution: usize, opts: &ViciousOptions) -> Result<ViciousReport> {
    let sources = source_cells(m.dim(), resolution, opts.points_per_axis);
    is_vicious_cells(m, resolution, opts, &sources)
}

/// Viciousness restricted to given points (snapped to the grid anchored at 0).
pub fn is_vicious_at(
    m: &MetricField,
    resolution: usize,
    opts: &ViciousOptions,
    points: &[Vec<f64>],
) -> Result<ViciousReport> {
    let h = m.lattice_scale() / resolution as f64;
    let sources: Vec<Vec<i64>> =
        points.iter().map(|p| p.iter().map(|x| (x / h).round() as i64).collect()).collect();
    is_vicious_cells(m, resolution, opts, &sources)
}

fn is_vicious_cells(
    m: &MetricField,
    resolution: usize,
    opts: &ViciousOptions,
    sources: &[Vec<i64>],
) -> Result<ViciousReport> {
    let dim = m.dim();
    let ropts = ReachOptions {
        stencil_radius: opts.stencil_radius,
        rule: EdgeRule::Timelike { eps_t: opts.eps_t },
        past: false,
    };
    let origin = vec![0.0; dim];
    let st = Stencil::build(m, &origin, resolution, &ropts)?;
    let res = resolution as i64;
    let check = |src: &Vec<i64>| -> Result<std::result::Result<ViciousWitness, Vec<f64>>> {
        let cells = CellBox {
            lo: src.iter().map(|s| s - opts.window * res).collect(),
            hi: src.iter().map(|s| s + opts.window * res).collect(),
        };
        let mut hit: Option<Vec<i64>> = None;
        let grid = propagate(&st, &cells, src, |c| {
            let diff: Vec<i64> = c.iter().zip(src).map(|(a, b)| a - b).collect();
            if diff.iter().any(|&d| d != 0) && diff.iter().all(|&d| d % res == 0) {
                hit = Some(c.to_vec());
                true
            } else {
                false
            }
        })?;
        let p = st.point(src);
        Ok(match hit {
            Some(c) => {
                let class = c.iter().zip(src).map(|(a, b)| (a - b) / res).collect();
                let chain = grid.chain_to(&c).expect("reached").iter().map(|q| st.point(q)).collect();
                Ok(ViciousWitness { point: p, class, chain })
            }
            None => Err(p),
        })
    };
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    let mut checked = 0;
    // chunks keep the early exit on the first failure while running in parallel
    for chunk in sources.chunks(64) {
        let results: Vec<_> = chunk.par_iter().map(check).collect::<Result<Vec<_>>>()?;
        for r in results {
            checked += 1;
            match r {
                Ok(w) => witnesses.push(w),
                Err(p) => failures.push(p),
            }
        }
        if opts.stop_at_first_failure && !failures.is_empty() {
            break;
        }
    }
    Ok(ViciousReport { vicious: failures.is_empty(), resolution, eps_t: opts.eps_t, checked, witnesses, failures })
}

#[derive(Clone, Copy, Debug)]
struct HeapItem(f64, u32);

impl PartialEq for HeapItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// g_R chord length of a straight segment (midpoint rule).
pub fn chord_length(m: &MetricField, a: &[f64], b: &[f64]) -> f64 {
    if m.riemannian_is_identity() {
        return dist(a, b);
    }
    let mid = lerp(a, b, 0.5);
    m.g_r(&mid).quad(&sub(b, a)).max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillEstimate {
    pub fil: f64,
    pub resolution: usize,
    pub sources: usize,
    /// Pair (p, lift of q) attaining the maximum.
    pub worst_pair: (Vec<f64>, Vec<f64>),
}

/// Grid estimate of the fill constant: max over sampled sources p and all
/// fundamental-domain grid targets q of the shortest g_R length of a
/// timelike chain from p to a lift of q.
pub fn fill_constant(m: &MetricField, resolution: usize, sources_per_axis: usize) -> Result<FillEstimate> {
    let vopts = ViciousOptions { points_per_axis: Some(sources_per_axis.min(4)), ..Default::default() };
    let v = is_vicious(m, resolution.min(32), &vopts)?;
    if !v.vicious {
        return Err(LabError::Unavailable("fill constant needs a vicious spacetime".into()));
    }
    let dim = m.dim();
    let ropts = ReachOptions { stencil_radius: None, rule: EdgeRule::Timelike { eps_t: DEFAULT_EPS_T }, past: false };
    let origin = vec![0.0; dim];
    let st = Stencil::build(m, &origin, resolution, &ropts)?;
    let res = resolution as i64;
    let residues = resolution.pow(dim as u32);
    let steps: Vec<Vec<i64>> = (0..st.offsets.len()).map(|k| st.step(k)).collect();
    let sources = source_cells(dim, resolution, Some(sources_per_axis));
    let per: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = sources
        .par_iter()
        .map(|src| {
            let cells = CellBox {
                lo: src.iter().map(|s| s - 4 * res).collect(),
                hi: src.iter().map(|s| s + 4 * res).collect(),
            };
            let mut d = vec![f64::INFINITY; cells.len()];
            let mut settled_res = vec![false; residues];
            let mut left = residues;
            let mut heap = BinaryHeap::new();
            let s = cells.index(src);
            d[s] = 0.0;
            heap.push(HeapItem(0.0, s as u32));
            let mut worst = (0.0, src.clone());
            while let Some(HeapItem(du, u)) = heap.pop() {
                let u = u as usize;
                if du > d[u] {
                    continue;
                }
                let c = cells.cell(u);
                // the source itself only counts once it is revisited as a lift
                if u != s {
                    let r = st.residue(&c);
                    if !settled_res[r] {
                        settled_res[r] = true;
                        left -= 1;
                        if du > worst.0 {
                            worst = (du, c.clone());
                        }
                        if left == 0 {
                            break;
                        }
                    }
                }
                let pu = st.point(&c);
                for k in st.accepted(&c) {
                    let nc: Vec<i64> = (0..dim).map(|i| c[i] + steps[k][i]).collect();
                    if !cells.contains(&nc) {
                        continue;
                    }
                    let j = cells.index(&nc);
                    let nd = du + chord_length(m, &pu, &st.point(&nc));
                    if nd < d[j] {
                        d[j] = nd;
                        heap.push(HeapItem(nd, j as u32));
                    }
                }
            }
            if left > 0 {
                return Err(LabError::WindowOverflow {
                    message: "fill search did not reach every residue".into(),
                    required: (0..dim).map(|_| (-8, 8)).collect(),
                });
            }
            Ok((worst.0, st.point(src), st.point(&worst.1)))
        })
        .collect();
    let mut best = FillEstimate { fil: 0.0, resolution, sources: sources.len(), worst_pair: (vec![], vec![]) };
    for r in per {
        let (f, p, q) = r?;
        if f > best.fil {
            best.fil = f;
            best.worst_pair = (p, q);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrakF {
    pub h: Vec<i64>,
    pub f_of_h: f64,
    pub minimizing_x: Vec<f64>,
    /// Nearest reached point to x + h.
    pub nearest: Vec<f64>,
    pub boundary_active: bool,
    pub window: Window,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrakOptions {
    pub sources_per_axis: usize,
    pub stencil_radius: Option<usize>,
}

impl Default for FrakOptions {
    fn default() -> Self {
        FrakOptions { sources_per_axis: 2, stencil_radius: None }
    }
}

/// 𝔣(h) for one lattice class.
pub fn frak_f(m: &MetricField, h: &[i64], resolution: usize) -> Result<FrakF> {
    Ok(frak_f_many(m, &[h.to_vec()], resolution, &FrakOptions::default())?.remove(0))
}

/// 𝔣 for many lattice classes sharing one reach computation per source.
///
/// The window starts at the default `[−4,4]ⁿ`, is enlarged to contain every
/// ball `B(x+h, |x+h − x|)` (𝔣 never exceeds `|h|` since x ∈ J⁺(x)), and is
/// doubled once if a minimizer still touches the boundary.
pub fn frak_f_many(m: &MetricField, hs: &[Vec<i64>], resolution: usize, opts: &FrakOptions) -> Result<Vec<FrakF>> {
    if hs.is_empty() {
        return Ok(Vec::new());
    }
    let dim = m.dim();
    if hs.iter().any(|h| h.len() != dim) {
        return Err(LabError::InvalidInput("lattice class has the wrong dimension".into()));
    }
    let s = m.lattice_scale();
    let rad = |h: &Vec<i64>| h.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt() * s;
    let mut pts: Vec<Vec<f64>> = vec![vec![-4.0; dim], vec![4.0; dim]];
    for h in hs {
        let r = rad(h) / s + 1.0;
        pts.push(h.iter().map(|&x| x as f64 - r).collect());
        pts.push(h.iter().map(|&x| x as f64 + r).collect());
    }
    let window = Window::covering(&pts, 0.0);
    let out = frak_in_window(m, hs, resolution, opts, &window)?;
    if out.iter().any(|f| f.boundary_active) {
        let doubled = Window {
            lo: window.lo.iter().map(|x| 2 * x).collect(),
            hi: window.hi.iter().map(|x| 2 * x).collect(),
        };
        let again = frak_in_window(m, hs, resolution, opts, &doubled)?;
        if let Some(f) = again.iter().find(|f| f.boundary_active) {
            return Err(LabError::WindowOverflow {
                message: format!("f minimization for h = {:?} still touches the window", f.h),
                required: doubled.lo.iter().zip(&doubled.hi).map(|(l, h)| (2 * l, 2 * h)).collect(),
            });
        }
        return Ok(again);
    }
    Ok(out)
}

fn frak_in_window(
    m: &MetricField,
    hs: &[Vec<i64>],
    resolution: usize,
    opts: &FrakOptions,
    window: &Window,
) -> Result<Vec<FrakF>> {
    let dim = m.dim();
    let s = m.lattice_scale();
    let ropts = ReachOptions { stencil_radius: opts.stencil_radius, rule: EdgeRule::Causal, past: false };
    let origin = vec![0.0; dim];
    let st = Stencil::build(m, &origin, resolution, &ropts)?;
    let sources = source_cells(dim, resolution, Some(opts.sources_per_axis));
    let per_source: Vec<Result<Vec<(f64, Vec<f64>, Vec<f64>, bool)>>> = sources
        .par_iter()
        .map(|src| {
            let x = st.point(src);
            let cells = CellBox::from_window(&st, s, window);
            let grid = propagate(&st, &cells, src, |_| false)?;
            let frontier: Vec<Vec<f64>> = grid.frontier_cells().iter().map(|c| st.point(c)).collect();
            Ok(hs
                .iter()
                .map(|h| {
                    let target: Vec<f64> = (0..dim).map(|i| x[i] + h[i] as f64 * s).collect();
                    let tc = grid.cell_of(&target);
                    if grid.is_reached(&tc) && dist(&grid.point(&tc), &target) < 1e-9 {
                        return (0.0, x.clone(), target, false);
                    }
                    let mut best = (f64::INFINITY, target.clone());
                    for z in &frontier {
                        let d = chord_length(m, &target, z);
                        if d < best.0 {
                            best = (d, z.clone());
                        }
                    }
                    // the ball of radius f around x + h must stay inside the window
                    let inside = (0..dim).all(|i| {
                        target[i] - best.0 > window.lo[i] as f64 * s && target[i] + best.0 < window.hi[i] as f64 * s
                    });
                    (best.0, x.clone(), best.1, !inside)
                })
                .collect())
        })
        .collect();
    let per_source = per_source.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(hs
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let mut best: Option<&(f64, Vec<f64>, Vec<f64>, bool)> = None;
            for ps in &per_source {
                if best.map_or(true, |b| ps[j].0 < b.0) {
                    best = Some(&ps[j]);
                }
            }
            let b = best.expect("at least one source");
            FrakF {
                h: h.clone(),
                f_of_h: b.0,
                minimizing_x: b.1.clone(),
                nearest: b.2.clone(),
                boundary_active: b.3,
                window: window.clone(),
            }
        })
        .collect())
}

/// Longest-path oracle for the time separation on a grid anchored at p:
/// value(c) = max over accepted predecessors of value + Lorentzian edge
/// length. Returns 0 when q is not reached.
pub fn grid_time_separation(m: &MetricField, p: &[f64], q: &[f64], resolution: usize) -> Result<f64> {
    check_point(m, p)?;
    check_point(m, q)?;
    let dim = m.dim();
    let s = m.lattice_scale();
    let h = s / resolution as f64;
    let qc: Vec<i64> = (0..dim).map(|i| ((q[i] - p[i]) / h).round() as i64).collect();
    if qc.iter().all(|&x| x == 0) {
        return Ok(0.0);
    }
    let opts = ReachOptions::default();
    let fwd = Stencil::build(m, p, resolution, &opts)?;
    let radius = default_radius(dim) as i64;
    let cells = CellBox {
        lo: (0..dim).map(|i| qc[i].min(0) - radius).collect(),
        hi: (0..dim).map(|i| qc[i].max(0) + radius).collect(),
    };
    let src = vec![0i64; dim];
    let forward = propagate(&fwd, &cells, &src, |_| false)?;
    if !forward.is_reached(&qc) {
        return Ok(0.0);
    }
    let steps: Vec<Vec<i64>> = (0..fwd.offsets.len()).map(|k| fwd.step(k)).collect();
    // cells that can reach q: reverse search over forward edges
    let total = cells.len();
    let mut coreach = vec![false; total];
    let mut stack = vec![cells.index(&qc)];
    coreach[stack[0]] = true;
    let mut prev = vec![0i64; dim];
    while let Some(j) = stack.pop() {
        let c = cells.cell(j);
        for (k, st) in steps.iter().enumerate() {
            for d in 0..dim {
                prev[d] = c[d] - st[d];
            }
            if !cells.contains(&prev) {
                continue;
            }
            let i = cells.index(&prev);
            if coreach[i] || !forward.reached[i] || !fwd.accepts(&prev, k) {
                continue;
            }
            coreach[i] = true;
            stack.push(i);
        }
    }
    // Kahn order on the sub-DAG of reached ∩ co-reached cells
    let active: Vec<usize> = (0..total).filter(|&i| forward.reached[i] && coreach[i]).collect();
    let mut indeg = vec![0u32; total];
    let mut next = vec![0i64; dim];
    for &i in &active {
        let c = cells.cell(i);
        for k in fwd.accepted(&c) {
            for d in 0..dim {
                next[d] = c[d] + steps[k][d];
            }
            if cells.contains(&next) {
                let j = cells.index(&next);
                if forward.reached[j] && coreach[j] {
                    indeg[j] += 1;
                }
            }
        }
    }
    let mut value = vec![f64::NEG_INFINITY; total];
    value[cells.index(&src)] = 0.0;
    let mut queue: VecDeque<usize> = active.iter().copied().filter(|&i| indeg[i] == 0).collect();
    let mut processed = 0usize;
    while let Some(i) = queue.pop_front() {
        processed += 1;
        let c = cells.cell(i);
        let pc = fwd.point(&c);
        for k in fwd.accepted(&c) {
            for d in 0..dim {
                next[d] = c[d] + steps[k][d];
            }
            if !cells.contains(&next) {
                continue;
            }
            let j = cells.index(&next);
            if !(forward.reached[j] && coreach[j]) {
                continue;
            }
            if value[i] > f64::NEG_INFINITY {
                let w = lorentz_edge(m, &pc, &fwd.point(&next));
                if value[i] + w > value[j] {
                    value[j] = value[i] + w;
                }
            }
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    if processed < active.len() {
        return Err(LabError::Undefined("causal grid graph has a cycle inside the window".into()));
    }
    Ok(value[cells.index(&qc)].max(0.0))
}

/// Lorentzian length of a straight segment by the midpoint rule.
pub fn lorentz_edge(m: &MetricField, a: &[f64], b: &[f64]) -> f64 {
    let n = 4;
    let d: Vec<f64> = sub(b, a).iter().map(|x| x / n as f64).collect();
    (0..n)
        .map(|j| {
            let mid = lerp(a, b, (j as f64 + 0.5) / n as f64);
            (-m.g(&mid).quad(&d)).max(0.0).sqrt()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{make_preset, PresetName, PresetSpec};

    #[test]
    fn primitive_offsets_small() {
        let o = primitive_offsets(2, 1);
        assert_eq!(o.len(), 8);
        assert!(primitive_offsets(2, 2).iter().all(|v| v != &vec![2, 0] && v != &vec![2, 2]));
    }

    #[test]
    fn flat_reach_is_the_light_cone() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let g = forward_reach(&m, &[0.0, 0.0], &Window::cube(2, 1), 16).unwrap();
        for c in g.cells.clone().lo[0]..=g.cells.hi[0] {
            for d in g.cells.lo[1]..=g.cells.hi[1] {
                let inside = c >= d.abs();
                assert_eq!(g.is_reached(&[c, d]), inside, "cell {c},{d}");
            }
        }
        let chain = g.chain_to(&[10, 3]).unwrap();
        assert_eq!(chain[0], vec![0, 0]);
    }

    #[test]
    fn flat_grid_time_separation() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let v = grid_time_separation(&m, &[0.0, 0.0], &[2.0, 1.0], 32).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-9);
        assert_eq!(grid_time_separation(&m, &[0.0, 0.0], &[1.0, 2.0], 32).unwrap(), 0.0);
    }

    #[test]
    fn flat_frak_f() {
        let m = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let f = frak_f(&m, &[0, 1], 16).unwrap();
        assert!((f.f_of_h - 0.5f64.sqrt()).abs() < 2.0 / 16.0);
        assert_eq!(frak_f(&m, &[2, 1], 16).unwrap().f_of_h, 0.0);
    }
}
