//! Finitely generated convex cones in ℝᵇ.
//!
//! A [`PolyCone`] is stored as a set of generating rays normalized in its
//! ambient [`NormModel`]. In dimension 2 the hull is reduced to its extreme
//! rays and all services are exact. In dimension 3 the sampled rays are kept;
//! pointed cones get an exact facet description from a cross-section hull,
//! and duals are sampled on an icosphere.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm, normalized, scale, sub};
use crate::{LabError, Result};

/// Relative membership tolerance used when none is given.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-6;
/// Tolerance for detecting opposite generators.
pub const ANTIPODAL_TOL: f64 = 1e-6;
/// Covector samples on the circle for 2D searches.
pub const CIRCLE_SAMPLES: usize = 720;
/// Icosphere subdivision level for 3D searches (2562 directions).
pub const SPHERE_LEVEL: u32 = 4;

const ANGLE_EPS: f64 = 1e-9;

/// Norm on ℝᵇ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormModel {
    Euclidean,
    /// Symmetric convex body `{x : x·u_k ≤ support_k}`; the norm is its gauge.
    Sampled {
        directions: Vec<Vec<f64>>,
        support: Vec<f64>,
    },
}

impl Default for NormModel {
    fn default() -> Self {
        NormModel::Euclidean
    }
}

impl NormModel {
    /// Builds a sampled norm whose unit ball is the symmetric hull of `points`.
    pub fn from_unit_ball_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| LabError::InvalidInput("no unit-ball points".into()))?;
        if points.iter().any(|p| p.len() != dim || !p.iter().all(|x| x.is_finite())) {
            return Err(LabError::InvalidInput("unit-ball points must be finite and of equal dimension".into()));
        }
        let directions = sphere_directions(dim);
        let support: Vec<f64> = directions
            .iter()
            .map(|u| points.iter().map(|p| dot(u, p).abs()).fold(0.0, f64::max))
            .collect();
        if support.iter().any(|&h| h <= 0.0) {
            return Err(LabError::InvalidInput("unit-ball points do not span the space".into()));
        }
        Ok(NormModel::Sampled { directions, support })
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            NormModel::Euclidean => norm(v),
            NormModel::Sampled { directions, support } => directions
                .iter()
                .zip(support)
                .map(|(u, h)| dot(u, v) / h)
                .fold(0.0, f64::max),
        }
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.norm(&sub(a, b))
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, NormModel::Euclidean)
    }
}

/// Cached geometry of a cone, derived from its rays.
#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Zero,
    /// 2D sector from `lo` counterclockwise to `hi` (unit euclidean), span < π.
    Sector { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed half-space `{v : normal·v ≥ 0}`.
    HalfSpace { normal: Vec<f64> },
    Whole,
    /// Pointed, full-dimensional 3D cone with inward unit facet normals and
    /// extreme rays in cyclic order.
    Polyhedral { extreme: Vec<Vec<f64>>, normals: Vec<Vec<f64>> },
    /// Anything else (lower dimensional or non-pointed in dim ≥ 3).
    General,
}

/// Finitely generated convex cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyConeRecord", into = "PolyConeRecord")]
pub struct PolyCone {
    dim: usize,
    rays: Vec<Vec<f64>>,
    norm: NormModel,
    contains_line: bool,
    is_zero: bool,
    shape: Shape,
}

/// Serialized form `{dim, rays, norm, contains_line, is_zero}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyConeRecord {
    pub dim: usize,
    pub rays: Vec<Vec<f64>>,
    #[serde(default)]
    pub norm: NormModel,
    #[serde(default)]
    pub contains_line: bool,
    #[serde(default)]
    pub is_zero: bool,
}

impl TryFrom<PolyConeRecord> for PolyCone {
    type Error = LabError;
    fn try_from(r: PolyConeRecord) -> Result<Self> {
        if r.rays.is_empty() {
            return Ok(PolyCone::zero(r.dim, r.norm));
        }
        PolyCone::hull(r.dim, &r.rays, r.norm)
    }
}

impl From<PolyCone> for PolyConeRecord {
    fn from(c: PolyCone) -> Self {
        PolyConeRecord { dim: c.dim, rays: c.rays, norm: c.norm, contains_line: c.contains_line, is_zero: c.is_zero }
    }
}

/// Result of [`PolyCone::boundary_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistance {
    pub value: f64,
    pub outside: bool,
}

/// Result of [`PolyCone::is_compact_cone`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessWitness {
    pub compact: bool,
    /// Unit covector maximizing the minimal pairing with the generators.
    pub witness: Option<Vec<f64>>,
    /// Minimal pairing of the witness with the unit generators.
    pub margin: f64,
}

/// Conic hull of `rays` in the given norm.
pub fn conic_hull(rays: &[Vec<f64>], norm: NormModel) -> Result<PolyCone> {
    let dim = rays
        .first()
        .map(|r| r.len())
        .ok_or_else(|| LabError::InvalidInput("conic_hull needs a dimension; use PolyCone::zero for empty sets".into()))?;
    PolyCone::hull(dim, rays, norm)
}

impl PolyCone {
    pub fn zero(dim: usize, norm: NormModel) -> Self {
        PolyCone { dim, rays: Vec::new(), norm, contains_line: false, is_zero: true, shape: Shape::Zero }
    }

    /// Conic hull of `rays` (possibly empty) in ℝ^dim.
    pub fn hull(dim: usize, rays: &[Vec<f64>], norm: NormModel) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidInput("cone dimension must be at least 1".into()));
        }
        if rays.is_empty() {
            return Ok(PolyCone::zero(dim, norm));
        }
        let mut unit = Vec::with_capacity(rays.len());
        for (i, r) in rays.iter().enumerate() {
            if r.len() != dim {
                return Err(LabError::InvalidInput(format!("ray {i} has dimension {} (expected {dim})", r.len())));
            }
            if !r.iter().all(|x| x.is_finite()) {
                return Err(LabError::InvalidInput(format!("ray {i} is not finite")));
            }
            let n = norm.norm(r);
            if n <= 0.0 {
                return Err(LabError::InvalidInput(format!("ray {i} is the zero vector")));
            }
            unit.push(scale(r, 1.0 / n));
        }
        let mut cone = PolyCone { dim, rays: unit, norm, contains_line: false, is_zero: false, shape: Shape::General };
        cone.classify();
        Ok(cone)
    }

    fn classify(&mut self) {
        match self.dim {
            1 => {
                let pos = self.rays.iter().any(|r| r[0] > 0.0);
                let neg = self.rays.iter().any(|r| r[0] < 0.0);
                self.shape = match (pos, neg) {
                    (true, true) => Shape::Whole,
                    (true, false) => Shape::HalfSpace { normal: vec![1.0] },
                    _ => Shape::HalfSpace { normal: vec![-1.0] },
                };
                self.contains_line = pos && neg;
                let mut keep = Vec::new();
                if pos {
                    keep.push(scale(&[1.0], 1.0 / self.norm.norm(&[1.0])));
                }
                if neg {
                    keep.push(scale(&[-1.0], 1.0 / self.norm.norm(&[-1.0])));
                }
                self.rays = keep;
            }
            2 => self.classify_2d(),
            _ => self.classify_nd(),
        }
    }

    fn classify_2d(&mut self) {
        let mut angles: Vec<f64> = self.rays.iter().map(|r| r[1].atan2(r[0])).collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let k = angles.len();
        // largest counterclockwise gap between consecutive angles
        let mut best_gap = -1.0;
        let mut best = 0;
        for i in 0..k {
            let next = if i + 1 < k { angles[i + 1] } else { angles[0] + 2.0 * PI };
            let gap = next - angles[i];
            if gap > best_gap {
                best_gap = gap;
                best = i;
            }
        }
        if k == 1 {
            best_gap = 2.0 * PI;
        }
        let lo_ang = if best + 1 < k { angles[best + 1] } else { angles[0] };
        let hi_ang = angles[best];
        let unit = |a: f64| vec![a.cos(), a.sin()];
        let nrm = self.norm.clone();
        let in_norm = |v: Vec<f64>| {
            let n = nrm.norm(&v);
            scale(&v, 1.0 / n)
        };
        if best_gap > PI + ANGLE_EPS {
            let lo = unit(lo_ang);
            let hi = unit(hi_ang);
            self.rays = if k == 1 { vec![in_norm(lo.clone())] } else { vec![in_norm(lo.clone()), in_norm(hi.clone())] };
            self.shape = Shape::Sector { lo, hi };
            self.contains_line = false;
        } else if best_gap >= PI - ANGLE_EPS && k == 2 {
            // two opposite rays span a line
            self.shape = Shape::General;
            self.contains_line = true;
        } else if best_gap >= PI - ANGLE_EPS {
            // half-plane bounded by the line through lo and hi
            let lo = unit(lo_ang);
            let normal = vec![-lo[1], lo[0]];
            let hi = scale(&lo, -1.0);
            self.rays = vec![in_norm(lo), in_norm(normal.clone()), in_norm(hi)];
            self.shape = Shape::HalfSpace { normal };
            self.contains_line = true;
        } else {
            self.rays = (0..3).map(|i| in_norm(unit(2.0 * PI * i as f64 / 3.0))).collect();
            self.shape = Shape::Whole;
            self.contains_line = true;
        }
    }

    fn classify_nd(&mut self) {
        let unit_rays: Vec<Vec<f64>> = self.rays.iter().filter_map(|r| normalized(r)).collect();
        let antipodal = unit_rays.iter().any(|r| {
            let neg = scale(r, -1.0);
            euclid_dist_to_generated(&unit_rays, &neg) <= ANTIPODAL_TOL
        });
        let w = max_min_pairing(&unit_rays, self.dim);
        if antipodal || w.margin <= 1e-12 {
            self.contains_line = true;
            // whole space if every sphere direction is generated
            let whole = sphere_directions(self.dim)
                .iter()
                .step_by(17)
                .all(|u| euclid_dist_to_generated(&unit_rays, u) <= 1e-9);
            self.shape = if whole { Shape::Whole } else { Shape::General };
            return;
        }
        self.contains_line = false;
        let witness = w.witness.expect("pointed cone has a witness");
        if self.dim != 3 {
            self.shape = Shape::General;
            return;
        }
        // cross-section on the plane witness·x = 1
        let basis = crate::linalg::orthonormal_complement(&crate::linalg::SymMat::identity(3), &witness);
        let pts: Vec<[f64; 2]> = unit_rays
            .iter()
            .map(|r| {
                let s = 1.0 / dot(&witness, r);
                [dot(&basis[0], r) * s, dot(&basis[1], r) * s]
            })
            .collect();
        let hull = convex_hull_2d(&pts);
        if hull.len() < 3 {
            self.shape = Shape::General;
            return;
        }
        let extreme: Vec<Vec<f64>> = hull
            .iter()
            .map(|&i| normalized(&unit_rays[i]).expect("unit ray"))
            .collect();
        let centroid: Vec<f64> = (0..3).map(|j| extreme.iter().map(|r| r[j]).sum::<f64>()).collect();
        let mut normals = Vec::with_capacity(extreme.len());
        for i in 0..extreme.len() {
            let a = &extreme[i];
            let b = &extreme[(i + 1) % extreme.len()];
            let mut nrm = normalized(&cross(a, b)).unwrap_or_else(|| witness.clone());
            if dot(&nrm, &centroid) < 0.0 {
                nrm = scale(&nrm, -1.0);
            }
            normals.push(nrm);
        }
        self.shape = Shape::Polyhedral { extreme, normals };
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rays(&self) -> &[Vec<f64>] {
        &self.rays
    }

    pub fn norm_model(&self) -> &NormModel {
        &self.norm
    }

    pub fn contains_line(&self) -> bool {
        self.contains_line
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    /// Extreme rays (unit euclidean) when known exactly: 2D sectors and
    /// pointed 3D cones.
    pub fn extreme_rays(&self) -> Option<Vec<Vec<f64>>> {
        match &self.shape {
            Shape::Sector { lo, hi } => {
                if lo == hi {
                    Some(vec![lo.clone()])
                } else {
                    Some(vec![lo.clone(), hi.clone()])
                }
            }
            Shape::Polyhedral { extreme, .. } => Some(extreme.clone()),
            _ => None,
        }
    }

    /// Euclidean distance from `v` to the cone.
    pub fn euclidean_distance(&self, v: &[f64]) -> f64 {
        match &self.shape {
            Shape::Zero => norm(v),
            Shape::Whole => 0.0,
            Shape::HalfSpace { normal } => (-dot(normal, v)).max(0.0),
            Shape::Sector { lo, hi } => {
                if in_sector(lo, hi, v) {
                    0.0
                } else {
                    ray_distance(lo, v).min(ray_distance(hi, v))
                }
            }
            Shape::Polyhedral { extreme, normals } => {
                if normals.iter().all(|n| dot(n, v) >= 0.0) {
                    return 0.0;
                }
                let k = extreme.len();
                (0..k)
                    .map(|i| wedge_distance(&extreme[i], &extreme[(i + 1) % k], v))
                    .fold(f64::INFINITY, f64::min)
            }
            Shape::General => euclid_dist_to_generated(&self.rays, v),
        }
    }

    /// Distance from `v` to the cone in the cone's norm.
    pub fn distance(&self, v: &[f64]) -> f64 {
        if self.norm.is_euclidean() {
            return self.euclidean_distance(v);
        }
        if self.euclidean_distance(v) == 0.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => self.norm.norm(v),
            Shape::Whole => 0.0,
            _ => self
                .boundary_rays(16)
                .iter()
                .map(|r| ray_distance_in(&self.norm, r, v))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// True iff `v` lies within `tol·‖v‖` of the cone.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let n = self.norm.norm(v);
        if n == 0.0 {
            return true;
        }
        self.distance(v) <= tol * n
    }

    /// Rays discretizing the boundary (used by non-euclidean paths).
    fn boundary_rays(&self, per_facet: usize) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Sector { lo, hi } => vec![lo.clone(), hi.clone()],
            Shape::HalfSpace { normal } if self.dim == 2 => {
                vec![vec![-normal[1], normal[0]], vec![normal[1], -normal[0]]]
            }
            Shape::Polyhedral { extreme, .. } => {
                let k = extreme.len();
                let mut out = Vec::new();
                for i in 0..k {
                    let a = &extreme[i];
                    let b = &extreme[(i + 1) % k];
                    for j in 0..per_facet {
                        let t = j as f64 / per_facet as f64;
                        out.push(normalized(&crate::linalg::lerp(a, b, t)).expect("facet ray"));
                    }
                }
                out
            }
            _ => self.rays.iter().filter_map(|r| normalized(r)).collect(),
        }
    }

    /// Distance of `v` to the boundary of the cone in the norm `norm`.
    pub fn boundary_distance(&self, v: &[f64], norm_model: &NormModel) -> BoundaryDistance {
        if self.euclidean_distance(v) > DEFAULT_MEMBERSHIP_TOL * norm(v).max(f64::MIN_POSITIVE) {
            return BoundaryDistance { value: 0.0, outside: true };
        }
        let value = if norm_model.is_euclidean() {
            match &self.shape {
                Shape::Zero => 0.0,
                Shape::Whole => f64::INFINITY,
                Shape::HalfSpace { normal } => dot(normal, v).max(0.0),
                Shape::Sector { lo, hi } => {
                    if lo == hi {
                        0.0
                    } else {
                        let n_lo = vec![-lo[1], lo[0]];
                        let n_hi = vec![hi[1], -hi[0]];
                        dot(&n_lo, v).min(dot(&n_hi, v)).max(0.0)
                    }
                }
                Shape::Polyhedral { normals, .. } => {
                    normals.iter().map(|n| dot(n, v)).fold(f64::INFINITY, f64::min).max(0.0)
                }
                Shape::General => 0.0,
            }
        } else {
            match &self.shape {
                Shape::Zero | Shape::General => 0.0,
                Shape::Whole => f64::INFINITY,
                Shape::Sector { lo, hi } if lo == hi => 0.0,
                Shape::HalfSpace { normal } if self.dim != 2 => {
                    // brute force over the boundary hyperplane directions
                    sphere_directions(self.dim)
                        .iter()
                        .filter(|u| dot(u, normal).abs() < 0.05)
                        .map(|u| line_distance_in(norm_model, u, v))
                        .fold(f64::INFINITY, f64::min)
                }
                _ => self
                    .boundary_rays(32)
                    .iter()
                    .map(|r| ray_distance_in(norm_model, r, v))
                    .fold(f64::INFINITY, f64::min),
            }
        };
        BoundaryDistance { value, outside: false }
    }

    /// The subcone `{v : dist(v, ∂K) ≥ eps·|v|}`.
    pub fn epsilon_subcone(&self, eps: f64, norm_model: &NormModel) -> Result<PolyCone> {
        if !(eps >= 0.0) {
            return Err(LabError::InvalidInput(format!("eps must be nonnegative, got {eps}")));
        }
        if eps == 0.0 || self.is_zero {
            return Ok(self.clone());
        }
        if let (Shape::Sector { lo, hi }, true) = (&self.shape, norm_model.is_euclidean()) {
            if eps > 1.0 {
                return Ok(PolyCone::zero(2, self.norm.clone()));
            }
            let a_lo = lo[1].atan2(lo[0]);
            let mut a_hi = hi[1].atan2(hi[0]);
            if a_hi < a_lo {
                a_hi += 2.0 * PI;
            }
            let shrink = eps.asin();
            let (mut new_lo, mut new_hi) = (a_lo + shrink, a_hi - shrink);
            if new_lo > new_hi {
                if new_lo - new_hi <= 1e-12 {
                    let mid = 0.5 * (new_lo + new_hi);
                    new_lo = mid;
                    new_hi = mid;
                } else {
                    return Ok(PolyCone::zero(2, self.norm.clone()));
                }
            }
            let rays = if new_lo == new_hi {
                vec![vec![new_lo.cos(), new_lo.sin()]]
            } else {
                vec![vec![new_lo.cos(), new_lo.sin()], vec![new_hi.cos(), new_hi.sin()]]
            };
            return PolyCone::hull(2, &rays, self.norm.clone());
        }
        if matches!(self.shape, Shape::Whole) {
            return Ok(self.clone());
        }
        // sampled path: keep sphere directions deep enough inside
        let keep: Vec<Vec<f64>> = self
            .interior_samples()
            .into_iter()
            .filter(|u| {
                let d = self.boundary_distance(u, norm_model);
                !d.outside && d.value >= eps * norm_model.norm(u) - 1e-12
            })
            .collect();
        PolyCone::hull(self.dim, &keep, self.norm.clone())
    }

    fn interior_samples(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = sphere_directions(self.dim)
            .into_iter()
            .filter(|u| self.euclidean_distance(u) <= 1e-12)
            .collect();
        if let Some(ext) = self.extreme_rays() {
            out.extend(ext);
        }
        out
    }

    /// Dual cone `{α : α·r ≥ 0 for every generator r}` (euclidean pairing).
    pub fn dual_cone(&self) -> PolyCone {
        let dim = self.dim;
        let nrm = self.norm.clone();
        match &self.shape {
            Shape::Zero => {
                let mut rays = Vec::new();
                for i in 0..dim {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    rays.push(e.clone());
                    e[i] = -1.0;
                    rays.push(e);
                }
                PolyCone::hull(dim, &rays, nrm).expect("unit axes")
            }
            Shape::Whole => PolyCone::zero(dim, nrm),
            Shape::HalfSpace { normal } => PolyCone::hull(dim, &[normal.clone()], nrm).expect("normal"),
            Shape::Sector { lo, hi } => {
                // α ⟂-rotations: hi rotated by −90° and lo rotated by +90°
                let a = vec![hi[1], -hi[0]];
                let b = vec![-lo[1], lo[0]];
                let mut rays = vec![a, b];
                if lo == hi {
                    rays.push(lo.clone());
                }
                PolyCone::hull(2, &rays, nrm).expect("sector dual")
            }
            Shape::Polyhedral { normals, .. } => {
                let mut rays = normals.clone();
                rays.extend(self.sampled_dual_rays());
                PolyCone::hull(dim, &rays, nrm).expect("polyhedral dual")
            }
            Shape::General => {
                let rays = self.sampled_dual_rays();
                if rays.is_empty() {
                    PolyCone::zero(dim, nrm)
                } else {
                    PolyCone::hull(dim, &rays, nrm).expect("sampled dual")
                }
            }
        }
    }

    fn sampled_dual_rays(&self) -> Vec<Vec<f64>> {
        let unit: Vec<Vec<f64>> = self.rays.iter().filter_map(|r| normalized(r)).collect();
        sphere_directions(self.dim)
            .into_iter()
            .filter(|a| unit.iter().all(|r| dot(a, r) >= -1e-12))
            .collect()
    }

    /// Searches a covector strictly positive on every generator.
    pub fn is_compact_cone(&self) -> CompactnessWitness {
        if self.is_zero {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            return CompactnessWitness { compact: true, witness: Some(e), margin: f64::INFINITY };
        }
        let unit: Vec<Vec<f64>> = self.rays.iter().filter_map(|r| normalized(r)).collect();
        let w = max_min_pairing(&unit, self.dim);
        CompactnessWitness { compact: w.margin > 1e-12, witness: if w.margin > 1e-12 { w.witness } else { None }, margin: w.margin }
    }

    /// Unit euclidean direction that is deepest inside the cone among the
    /// compactness witness and the interior samples.
    pub fn central_direction(&self) -> Option<Vec<f64>> {
        match &self.shape {
            Shape::Zero => None,
            Shape::Sector { lo, hi } => normalized(&crate::linalg::add(lo, hi)),
            Shape::HalfSpace { normal } => Some(normal.clone()),
            _ => self.is_compact_cone().witness,
        }
    }
}

/// Hausdorff distance between the unit-circle cross-sections of two 2D
/// pointed cones (chord metric on the circle).
pub fn cross_section_hausdorff_2d(a: &PolyCone, b: &PolyCone) -> Result<f64> {
    let arc = |c: &PolyCone| -> Result<(f64, f64)> {
        match &c.shape {
            Shape::Sector { lo, hi } => {
                let l = lo[1].atan2(lo[0]);
                let mut h = hi[1].atan2(hi[0]);
                if h < l {
                    h += 2.0 * PI;
                }
                Ok((l, h))
            }
            _ => Err(LabError::InvalidInput("cross-section Hausdorff needs pointed 2D cones".into())),
        }
    };
    let (a0, a1) = arc(a)?;
    let (b0, b1) = arc(b)?;
    let chord = |x: f64, y: f64| 2.0 * (0.5 * angle_gap(x, y)).sin();
    let to_arc = |x: f64, lo: f64, hi: f64| {
        let rel = (x - lo).rem_euclid(2.0 * PI);
        if rel <= hi - lo {
            0.0
        } else {
            chord(x, lo).min(chord(x, hi))
        }
    };
    let h = [to_arc(a0, b0, b1), to_arc(a1, b0, b1), to_arc(b0, a0, a1), to_arc(b1, a0, a1)]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(h)
}

/// Slope `a/|b|` of the two extreme rays of a 2D sector around the first axis.
pub fn sector_slopes_2d(c: &PolyCone) -> Option<(f64, f64)> {
    match &c.shape {
        Shape::Sector { lo, hi } => Some((lo[0] / lo[1].abs(), hi[0] / hi[1].abs())),
        _ => None,
    }
}

fn angle_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn in_sector(lo: &[f64], hi: &[f64], v: &[f64]) -> bool {
    let cr = |a: &[f64], b: &[f64]| a[0] * b[1] - a[1] * b[0];
    if lo == hi {
        return cr(lo, v).abs() <= 0.0 && dot(lo, v) >= 0.0;
    }
    cr(lo, v) >= 0.0 && cr(v, hi) >= 0.0
}

fn ray_distance(r: &[f64], v: &[f64]) -> f64 {
    let t = dot(r, v).max(0.0) / dot(r, r);
    norm(&axpy(v, -t, r))
}

/// Euclidean distance from `v` to the 2-generator cone spanned by unit `a`, `b`.
fn wedge_distance(a: &[f64], b: &[f64], v: &[f64]) -> f64 {
    let aa = dot(a, a);
    let bb = dot(b, b);
    let ab = dot(a, b);
    let av = dot(a, v);
    let bv = dot(b, v);
    let det = aa * bb - ab * ab;
    if det > 1e-14 {
        let s = (bb * av - ab * bv) / det;
        let t = (aa * bv - ab * av) / det;
        if s >= 0.0 && t >= 0.0 {
            let p = axpy(&scale(a, s), t, b);
            return norm(&sub(v, &p));
        }
    }
    ray_distance(a, v).min(ray_distance(b, v))
}

/// min over λ ≥ 0 of N(v − λ r), by golden section (convex in λ).
fn ray_distance_in(norm_model: &NormModel, r: &[f64], v: &[f64]) -> f64 {
    let nv = norm_model.norm(v);
    let nr = norm_model.norm(r);
    let f = |l: f64| norm_model.norm(&axpy(v, -l, r));
    golden_min(f, 0.0, 2.0 * nv / nr.max(f64::MIN_POSITIVE) + 1e-12)
}

/// min over λ ∈ ℝ of N(v − λ u).
fn line_distance_in(norm_model: &NormModel, u: &[f64], v: &[f64]) -> f64 {
    let nv = norm_model.norm(v);
    let nu = norm_model.norm(u).max(f64::MIN_POSITIVE);
    let f = |l: f64| norm_model.norm(&axpy(v, -l, u));
    golden_min(f, -2.0 * nv / nu, 2.0 * nv / nu)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(a).min(f(b)).min(fc).min(fd)
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Andrew's monotone chain; returns hull vertex indices counterclockwise.
fn convex_hull_2d(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&i, &j| pts[i][0].total_cmp(&pts[j][0]).then(pts[i][1].total_cmp(&pts[j][1])));
    idx.dedup_by(|a, b| (pts[*a][0] - pts[*b][0]).abs() < 1e-14 && (pts[*a][1] - pts[*b][1]).abs() < 1e-14);
    if idx.len() < 3 {
        return idx;
    }
    let turn = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &p in &idx {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-14 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &p in idx.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-14 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Euclidean distance from `v` to the cone generated by `rays`
/// (nonnegative least squares, Lawson-Hanson).
pub fn euclid_dist_to_generated(rays: &[Vec<f64>], v: &[f64]) -> f64 {
    if rays.is_empty() {
        return norm(v);
    }
    let coef = nnls(rays, v);
    let mut p = vec![0.0; v.len()];
    for (c, r) in coef.iter().zip(rays) {
        if *c > 0.0 {
            p = axpy(&p, *c, r);
        }
    }
    norm(&sub(v, &p))
}

fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let m = b.len();
    let k = cols.len();
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    let residual = |x: &[f64]| {
        let mut r = b.to_vec();
        for (j, c) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                r = axpy(&r, -x[j], c);
            }
        }
        r
    };
    for _outer in 0..(3 * k + 10) {
        let r = residual(&x);
        let w: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let cand = (0..k).filter(|&j| !passive[j]).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = cand else { break };
        if w[j] <= 1e-12 {
            break;
        }
        passive[j] = true;
        for _inner in 0..(3 * k + 10) {
            let pidx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let a = DMatrix::from_fn(m, pidx.len(), |i, c| cols[pidx[c]][i]);
            let bv = DVector::from_column_slice(b);
            let svd = a.svd(true, true);
            let z = match svd.solve(&bv, 1e-12) {
                Ok(z) => z,
                Err(_) => break,
            };
            if z.iter().all(|&zi| zi > 0.0) {
                for (c, &j) in pidx.iter().enumerate() {
                    x[j] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &j) in pidx.iter().enumerate() {
                if z[c] <= 0.0 {
                    let step = x[j] / (x[j] - z[c]);
                    if step < alpha {
                        alpha = step;
                    }
                }
            }
            for (c, &j) in pidx.iter().enumerate() {
                x[j] += alpha * (z[c] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

struct Pairing {
    witness: Option<Vec<f64>>,
    margin: f64,
}

/// Maximizes `min_r α·r` over unit covectors: sampled start, then a
/// shrinking pattern search.
fn max_min_pairing(unit_rays: &[Vec<f64>], dim: usize) -> Pairing {
    if unit_rays.is_empty() {
        return Pairing { witness: None, margin: f64::INFINITY };
    }
    let score = |a: &[f64]| unit_rays.iter().map(|r| dot(a, r)).fold(f64::INFINITY, f64::min);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for a in sphere_directions(dim) {
        let s = score(&a);
        if best.as_ref().map_or(true, |(_, b)| s > *b) {
            best = Some((a, s));
        }
    }
    let (mut a, mut s) = best.expect("directions exist");
    let mut step = if dim == 2 { PI / CIRCLE_SAMPLES as f64 } else { 0.05 };
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut trial = a.clone();
                trial[i] += sign * step;
                let trial = normalized(&trial).expect("nonzero");
                let ts = score(&trial);
                if ts > s + 1e-15 {
                    a = trial;
                    s = ts;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Pairing { witness: Some(a), margin: s }
}

/// Deterministic unit directions: 720 on the circle, an icosphere of level 4
/// on the 2-sphere, ± axes plus random-free lattice directions otherwise.
pub fn sphere_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..CIRCLE_SAMPLES)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / CIRCLE_SAMPLES as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => icosphere(SPHERE_LEVEL),
        _ => {
            // lattice directions with entries in {-2..2}
            let mut out = Vec::new();
            let total = 5usize.pow(dim as u32);
            for code in 0..total {
                let mut c = code;
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let d = (c % 5) as f64 - 2.0;
                        c /= 5;
                        d
                    })
                    .collect();
                if let Some(u) = normalized(&v) {
                    out.push(u);
                }
            }
            out
        }
    }
}

/// Vertices of the subdivided icosahedron (10·4^level + 2 points).
pub fn icosphere(level: u32) -> Vec<Vec<f64>> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let unit = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    for v in verts.iter_mut() {
        *v = unit(*v);
    }
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[e] = *mid.entry(key).or_insert_with(|| {
                    let p = unit([
                        verts[a][0] + verts[b][0],
                        verts[a][1] + verts[b][1],
                        verts[a][2] + verts[b][2],
                    ]);
                    verts.push(p);
                    verts.len() - 1
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    verts.into_iter().map(|v| v.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn light_cone() -> PolyCone {
        conic_hull(&[vec![1.0, 1.0], vec![1.0, -1.0]], NormModel::Euclidean).unwrap()
    }

    #[test]
    fn light_cone_hull_keeps_extreme_rays() {
        let c = conic_hull(
            &[vec![1.0, 1.0], vec![1.0, -1.0], vec![1.0, 0.0], vec![2.0, 0.5]],
            NormModel::Euclidean,
        )
        .unwrap();
        assert_eq!(c.rays().len(), 2);
        let s = 0.5f64.sqrt();
        let mut rays = c.rays().to_vec();
        rays.sort_by(|a, b| a[1].total_cmp(&b[1]));
        assert!((rays[0][0] - s).abs() < 1e-12 && (rays[0][1] + s).abs() < 1e-12);
        assert!((rays[1][0] - s).abs() < 1e-12 && (rays[1][1] - s).abs() < 1e-12);
        assert!(!c.contains_line());
    }

    #[test]
    fn hull_flags() {
        let single = conic_hull(&[vec![1.0, 0.0]], NormModel::Euclidean).unwrap();
        assert!(!single.contains_line());
        let opposite = conic_hull(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], NormModel::Euclidean).unwrap();
        assert!(opposite.contains_line());
        let empty = PolyCone::hull(2, &[], NormModel::Euclidean).unwrap();
        assert!(empty.is_zero());
        let err = conic_hull(&[vec![1.0, 0.0], vec![0.0, 0.0]], NormModel::Euclidean).unwrap_err();
        assert!(matches!(err, LabError::InvalidInput(_)));
    }

    #[test]
    fn membership_examples() {
        let c = light_cone();
        assert!(c.contains(&[1.0, 0.0], 0.0));
        assert!(!c.contains(&[0.0, 1.0], 0.0));
        assert!(c.contains(&[1.0, 1.0 + 1e-9], 1e-6));
        assert!(c.contains(&[0.0, 0.0], 0.0));
    }

    #[test]
    fn duals() {
        let d = light_cone().dual_cone();
        assert!(d.contains(&[1.0, 0.0], 1e-12));
        assert!(d.contains(&[1.0, 1.0], 1e-12));
        assert!(d.contains(&[1.0, -1.0], 1e-12));
        assert!(!d.contains(&[1.0, 1.01], 1e-6));

        let ray = conic_hull(&[vec![1.0, 0.0]], NormModel::Euclidean).unwrap();
        let half = ray.dual_cone();
        assert!(half.contains_line());
        assert!(half.contains(&[0.0, 1.0], 1e-12) && half.contains(&[0.0, -1.0], 1e-12));
        assert!(!half.contains(&[-0.1, 1.0], 1e-6));

        let narrow = conic_hull(&[vec![1.5, 1.0], vec![1.5, -1.0]], NormModel::Euclidean).unwrap();
        let nd = narrow.dual_cone();
        // {1.5 α0 ≥ |α1|}
        assert!(nd.contains(&[1.0, 1.5], 1e-9));
        assert!(!nd.contains(&[1.0, 1.6], 1e-6));

        let z = PolyCone::zero(2, NormModel::Euclidean).dual_cone();
        assert!(z.contains_line());
        assert!(z.contains(&[-3.0, 2.0], 1e-12));
    }

    #[test]
    fn boundary_distance_examples() {
        let c = light_cone();
        let d = c.boundary_distance(&[1.0, 0.0], &NormModel::Euclidean);
        assert!((d.value - 0.5f64.sqrt()).abs() < 1e-12 && !d.outside);
        assert!(c.boundary_distance(&[1.0, 1.0], &NormModel::Euclidean).value.abs() < 1e-12);
        let out = c.boundary_distance(&[0.0, 1.0], &NormModel::Euclidean);
        assert!(out.outside && out.value == 0.0);
    }

    #[test]
    fn epsilon_subcone_examples() {
        let c = light_cone();
        assert_eq!(c.epsilon_subcone(0.0, &NormModel::Euclidean).unwrap(), c);
        let e = c.epsilon_subcone(0.5f64.sqrt(), &NormModel::Euclidean).unwrap();
        assert!(!e.is_zero());
        assert!(e.contains(&[1.0, 0.0], 1e-9));
        assert!(!e.contains(&[1.0, 0.01], 1e-6));
        assert!(c.epsilon_subcone(0.9, &NormModel::Euclidean).unwrap().is_zero());
    }

    #[test]
    fn compactness_examples() {
        let w = light_cone().is_compact_cone();
        assert!(w.compact);
        let a = w.witness.unwrap();
        assert!((a[0] - 1.0).abs() < 1e-9 && a[1].abs() < 1e-9);
        let half = conic_hull(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], NormModel::Euclidean).unwrap();
        assert!(!half.is_compact_cone().compact);
        assert!(PolyCone::zero(2, NormModel::Euclidean).is_compact_cone().compact);
    }

    #[test]
    fn icosphere_count() {
        assert_eq!(icosphere(4).len(), 2562);
        assert_eq!(icosphere(1).len(), 42);
    }

    #[test]
    fn three_dim_light_cone() {
        let rays: Vec<Vec<f64>> = (0..64)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 64.0;
                vec![1.0, a.cos(), a.sin()]
            })
            .collect();
        let c = conic_hull(&rays, NormModel::Euclidean).unwrap();
        assert!(c.contains(&[1.0, 0.0, 0.0], 1e-9));
        assert!(!c.contains(&[0.0, 1.0, 0.0], 1e-6));
        let w = c.is_compact_cone();
        assert!(w.compact);
        let d = c.boundary_distance(&[1.0, 0.0, 0.0], &NormModel::Euclidean).value;
        // polygonal approximation of the round cone: slightly below 1/√2
        assert!(d <= 0.5f64.sqrt() + 1e-12 && d > 0.70);
        let dual = c.dual_cone();
        assert!(dual.contains(&[1.0, 0.0, 0.0], 1e-9));
        assert!(!dual.contains(&[0.0, 0.0, 1.0], 1e-3));
        let eps = c.epsilon_subcone(0.3, &NormModel::Euclidean).unwrap();
        assert!(eps.contains(&[1.0, 0.0, 0.0], 1e-9));
        assert!(!eps.contains(&[1.0, 0.9, 0.0], 1e-6));
    }

    #[test]
    fn sampled_norm_is_symmetric_gauge() {
        let pts = vec![vec![2.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let n = NormModel::from_unit_ball_points(&pts).unwrap();
        assert!((n.norm(&[2.0, 0.0]) - 1.0).abs() < 1e-9);
        assert!((n.norm(&[0.0, -1.0]) - 1.0).abs() < 1e-9);
        assert!((n.norm(&[1.0, 2.0]) - n.norm(&[-1.0, -2.0])).abs() < 1e-12);
    }

    #[test]
    fn json_record_roundtrip() {
        let c = light_cone();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"dim\":2"));
        let back: PolyCone = serde_json::from_str(&s).unwrap();
        assert_eq!(back.rays().len(), 2);
        assert!(back.contains(&[1.0, 0.3], 0.0));
    }

    #[test]
    fn hausdorff_of_sectors() {
        let a = light_cone();
        let b = conic_hull(&[vec![1.0, 0.9], vec![1.0, -1.0]], NormModel::Euclidean).unwrap();
        let h = cross_section_hausdorff_2d(&a, &b).unwrap();
        let expect = 2.0 * (0.5 * (PI / 4.0 - 0.9f64.atan())).sin();
        assert!((h - expect).abs() < 1e-12);
        assert_eq!(cross_section_hausdorff_2d(&a, &a).unwrap(), 0.0);
    }
}
