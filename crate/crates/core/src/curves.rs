//! Polygonal worldlines in the cover: lengths, causality, rotation vectors,
//! geodesic shooting and seeded random causal walks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{add, all_finite, axpy, lerp, scale, sub, SymMat};
use crate::spacetime::MetricField;
use crate::{rng_for, LabError, Result};

/// Midpoint subdivisions per segment used when none is given.
pub const DEFAULT_SUBDIV: usize = 8;
/// Finite-difference step for Christoffel symbols.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonalWorldline {
    pub vertices: Vec<Vec<f64>>,
    pub metric_ref: String,
}

impl PolygonalWorldline {
    pub fn new(vertices: Vec<Vec<f64>>, metric_ref: impl Into<String>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(LabError::InvalidInput("a worldline needs at least two vertices".into()));
        }
        let n = vertices[0].len();
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != n || !all_finite(v) {
                return Err(LabError::InvalidInput(format!("vertex {i} is malformed")));
            }
            if i > 0 && vertices[i - 1] == *v {
                return Err(LabError::InvalidInput(format!("vertices {} and {i} coincide", i - 1)));
            }
        }
        Ok(PolygonalWorldline { vertices, metric_ref: metric_ref.into() })
    }

    pub fn on(m: &MetricField, vertices: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vertices, m.name().as_str())
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.vertices.windows(2).map(|w| (w[0].as_slice(), w[1].as_slice()))
    }

    pub fn first(&self) -> &[f64] {
        &self.vertices[0]
    }

    pub fn last(&self) -> &[f64] {
        self.vertices.last().expect("nonempty")
    }

    /// Translate every vertex by `k`.
    pub fn translated(&self, k: &[f64]) -> Self {
        PolygonalWorldline {
            vertices: self.vertices.iter().map(|v| add(v, k)).collect(),
            metric_ref: self.metric_ref.clone(),
        }
    }

    /// Concatenation; the last vertex of `self` must equal the first of `other`.
    pub fn concat(&self, other: &PolygonalWorldline) -> Result<Self> {
        if crate::linalg::dist(self.last(), other.first()) > 1e-12 {
            return Err(LabError::InvalidInput("curves do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend(other.vertices.iter().skip(1).cloned());
        Ok(PolygonalWorldline { vertices: v, metric_ref: self.metric_ref.clone() })
    }

    /// One vertex per row.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut s = (0..n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        s.push('\n');
        for v in &self.vertices {
            s.push_str(&v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveLengths {
    pub lorentzian: f64,
    pub riemannian: f64,
    /// Subsegments that were spacelike and contributed 0.
    pub spacelike_subsegments: usize,
}

/// Lorentzian and g_R lengths by the midpoint rule.
pub fn curve_lengths(m: &MetricField, c: &PolygonalWorldline, subdiv: usize) -> CurveLengths {
    let subdiv = subdiv.max(1);
    let mut out = CurveLengths { lorentzian: 0.0, riemannian: 0.0, spacelike_subsegments: 0 };
    for (a, b) in c.segments() {
        let d = scale(&sub(b, a), 1.0 / subdiv as f64);
        for j in 0..subdiv {
            let mid = lerp(a, b, (j as f64 + 0.5) / subdiv as f64);
            let q = m.g(&mid).quad(&d);
            if q < 0.0 {
                out.lorentzian += (-q).sqrt();
            } else if q > 0.0 {
                out.spacelike_subsegments += 1;
            }
            out.riemannian += m.g_r(&mid).quad(&d).max(0.0).sqrt();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuturePointing {
    pub ok: bool,
    pub first_offending: Option<usize>,
}

/// Segment `a → b` is future causal at `subdiv + 1` sample points.
pub fn segment_future_causal(m: &MetricField, a: &[f64], b: &[f64], subdiv: usize) -> bool {
    let d = sub(b, a);
    (0..=subdiv.max(1)).all(|j| {
        let p = lerp(a, b, j as f64 / subdiv.max(1) as f64);
        m.causal_character(&p, &d).is_future_causal()
    })
}

/// Segment is future timelike with `g(Δ,Δ) ≤ −eps_t·g_R(Δ,Δ)` at every sample.
pub fn segment_timelike_margin(m: &MetricField, a: &[f64], b: &[f64], subdiv: usize, eps_t: f64) -> bool {
    let d = sub(b, a);
    (0..=subdiv.max(1)).all(|j| {
        let p = lerp(a, b, j as f64 / subdiv.max(1) as f64);
        m.is_future_timelike_margin(&p, &d, eps_t)
    })
}

pub fn is_future_pointing(m: &MetricField, c: &PolygonalWorldline, subdiv: usize) -> FuturePointing {
    for (i, (a, b)) in c.segments().enumerate() {
        if !segment_future_causal(m, a, b, subdiv) {
            return FuturePointing { ok: false, first_offending: Some(i) };
        }
    }
    FuturePointing { ok: true, first_offending: None }
}

/// Displacement divided by g_R-arclength.
pub fn rotation_vector(m: &MetricField, c: &PolygonalWorldline) -> Result<Vec<f64>> {
    let l = curve_lengths(m, c, DEFAULT_SUBDIV).riemannian;
    if !(l > 0.0) {
        return Err(LabError::Undefined("rotation vector of a zero-length curve".into()));
    }
    Ok(scale(&sub(c.last(), c.first()), 1.0 / l))
}

/// Christoffel symbols Γ^k_ij at p from fourth-order central differences of g.
pub fn christoffel(m: &MetricField, p: &[f64], h: f64) -> Vec<[[f64; 3]; 3]> {
    let n = m.dim();
    // dg[l] = ∂_l g
    let mut dg = vec![SymMat::zeros(n); n];
    for l in 0..n {
        let at = |s: f64| {
            let mut q = p.to_vec();
            q[l] += s * h;
            m.g(&q)
        };
        let d = at(-2.0)
            .plus(&at(-1.0).scaled(-8.0))
            .plus(&at(1.0).scaled(8.0))
            .plus(&at(2.0).scaled(-1.0))
            .scaled(1.0 / (12.0 * h));
        dg[l] = d;
    }
    let ginv = m.g(p).inverse().expect("Lorentzian metric is invertible");
    let mut gamma = vec![[[0.0; 3]; 3]; n];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv.get(k, l) * (dg[i].get(j, l) + dg[j].get(i, l) - dg[l].get(i, j));
                }
                gk[i][j] = 0.5 * s;
            }
        }
    }
    gamma
}

fn geodesic_accel(m: &MetricField, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let n = m.dim();
    let gamma = christoffel(m, x, h);
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gamma[k][i][j] * v[i] * v[j];
                }
            }
            -s
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicTrace {
    pub curve: PolygonalWorldline,
    /// g(γ', γ') at every recorded vertex.
    pub energy: Vec<f64>,
    /// Set when integration stopped on a non-finite state.
    pub truncated: Option<String>,
    pub final_velocity: Vec<f64>,
}

/// RK4 integration of the geodesic equation for affine time `t_end`.
pub fn geodesic_shoot(m: &MetricField, p: &[f64], v: &[f64], t_end: f64, dt: f64) -> Result<GeodesicTrace> {
    geodesic_shoot_with(m, p, v, dt, DEFAULT_FD_STEP, |t, _| t >= t_end - 1e-12 * t_end.abs().max(1.0), 1)
}

/// Shoots until the g_R-length of the trace reaches `length`; records every
/// `record_every`-th step.
pub fn geodesic_shoot_length(
    m: &MetricField,
    p: &[f64],
    v: &[f64],
    length: f64,
    dt: f64,
    record_every: usize,
) -> Result<GeodesicTrace> {
    geodesic_shoot_with(m, p, v, dt, DEFAULT_FD_STEP, |_, l| l >= length, record_every)
}

fn geodesic_shoot_with(
    m: &MetricField,
    p: &[f64],
    v: &[f64],
    dt: f64,
    h_fd: f64,
    stop: impl Fn(f64, f64) -> bool,
    record_every: usize,
) -> Result<GeodesicTrace> {
    if !(dt > 0.0) {
        return Err(LabError::InvalidInput("dt must be positive".into()));
    }
    if v.iter().all(|&x| x == 0.0) || !all_finite(v) || !all_finite(p) {
        return Err(LabError::InvalidInput("initial data must be finite with v != 0".into()));
    }
    let mut x = p.to_vec();
    let mut u = v.to_vec();
    let mut t = 0.0;
    let mut len = 0.0;
    let mut verts = vec![x.clone()];
    let mut energy = vec![m.g(&x).quad(&u)];
    let mut truncated = None;
    let mut step = 0usize;
    let max_steps = 50_000_000usize;
    while !stop(t, len) {
        let k1x = u.clone();
        let k1v = geodesic_accel(m, &x, &u, h_fd);
        let x2 = axpy(&x, 0.5 * dt, &k1x);
        let u2 = axpy(&u, 0.5 * dt, &k1v);
        let k2v = geodesic_accel(m, &x2, &u2, h_fd);
        let x3 = axpy(&x, 0.5 * dt, &u2);
        let u3 = axpy(&u, 0.5 * dt, &k2v);
        let k3v = geodesic_accel(m, &x3, &u3, h_fd);
        let x4 = axpy(&x, dt, &u3);
        let u4 = axpy(&u, dt, &k3v);
        let k4v = geodesic_accel(m, &x4, &u4, h_fd);
        let nx: Vec<f64> = (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1x[i] + 2.0 * u2[i] + 2.0 * u3[i] + u4[i]))
            .collect();
        let nu: Vec<f64> = (0..u.len())
            .map(|i| u[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]))
            .collect();
        if !all_finite(&nx) || !all_finite(&nu) {
            truncated = Some(format!("non-finite state after t = {t}"));
            break;
        }
        let mid = lerp(&x, &nx, 0.5);
        len += m.g_r(&mid).quad(&sub(&nx, &x)).max(0.0).sqrt();
        x = nx;
        u = nu;
        t += dt;
        step += 1;
        if step % record_every.max(1) == 0 {
            verts.push(x.clone());
            energy.push(m.g(&x).quad(&u));
        }
        if step >= max_steps {
            truncated = Some("step limit reached".into());
            break;
        }
    }
    if verts.last() != Some(&x) {
        verts.push(x.clone());
        energy.push(m.g(&x).quad(&u));
    }
    verts.dedup();
    if verts.len() < 2 {
        return Err(LabError::Undefined("geodesic did not move".into()));
    }
    Ok(GeodesicTrace {
        curve: PolygonalWorldline { vertices: verts, metric_ref: m.name().as_str().to_string() },
        energy,
        truncated,
        final_velocity: u,
    })
}

/// Direction law of a walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WalkLaw {
    /// 70% interior timelike, 30% near-null directions.
    Uniform,
    /// Drifted around a target direction. In 2D `mix ∈ [0,1]` blends the two
    /// null rays; in 3D `theta` picks the null ray and `mix` the depth
    /// (`mix = 1` is null). `jitter` is the per-step spread.
    Drift { theta: f64, mix: f64, jitter: f64 },
}

/// Seeded random future causal walk.
pub fn random_causal_walk(
    m: &MetricField,
    p: &[f64],
    steps: usize,
    step_len: f64,
    seed: u64,
) -> Result<PolygonalWorldline> {
    causal_walk(m, p, steps, step_len, seed, WalkLaw::Uniform)
}

/// Walk with an explicit direction law.
pub fn causal_walk(
    m: &MetricField,
    p: &[f64],
    steps: usize,
    step_len: f64,
    seed: u64,
    law: WalkLaw,
) -> Result<PolygonalWorldline> {
    if steps < 1 || !(step_len > 0.0) {
        return Err(LabError::InvalidInput("walk needs steps >= 1 and step_len > 0".into()));
    }
    let mut rng = rng_for(seed, 0);
    let mut verts = Vec::with_capacity(steps + 1);
    let mut x = p.to_vec();
    verts.push(x.clone());
    for _ in 0..steps {
        let dir = sample_direction(m, &x, law, &mut rng)?;
        let next = causal_step(m, &x, &dir, step_len)?;
        x = next;
        verts.push(x.clone());
    }
    PolygonalWorldline::on(m, verts)
}

fn sample_direction(m: &MetricField, x: &[f64], law: WalkLaw, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let (xh, basis) = m.orthonormal_frame(x);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (theta, mix) = match law {
        WalkLaw::Uniform => {
            let theta = if m.dim() == 2 {
                if rng.gen_bool(0.5) { 0.0 } else { std::f64::consts::PI }
            } else {
                rng.gen_range(0.0..two_pi)
            };
            let mix = if rng.gen_bool(0.7) { rng.gen_range(0.0..0.9) } else { rng.gen_range(0.95..=1.0) };
            (theta, mix)
        }
        WalkLaw::Drift { theta, mix, jitter } => {
            if m.dim() == 2 {
                // mix is the position between the two null rays
                let t = (mix + jitter * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
                let n0 = m.null_ray_from_seed(x, &xh, &basis[0])?;
                let n1 = m.null_ray_from_seed(x, &xh, &scale(&basis[0], -1.0))?;
                return Ok(lerp(&n0, &n1, t));
            }
            let th = theta + jitter * rng.gen_range(-1.0..1.0) * std::f64::consts::PI;
            let mx = (mix + jitter * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
            (th, mx)
        }
    };
    let s = m.frame_seed(&basis, theta);
    let null = m.null_ray_from_seed(x, &xh, &s)?;
    Ok(lerp(&xh, &null, mix))
}

/// One step of g_R-length ≈ `len` from x along `dir`, pulled toward X̂(x) by
/// bisection until the segment is future causal at every sample.
pub fn causal_step(m: &MetricField, x: &[f64], dir: &[f64], len: f64) -> Result<Vec<f64>> {
    let (xh, _) = m.orthonormal_frame(x);
    let gr = m.g_r(x);
    let make = |t: f64| {
        let d = lerp(&xh, dir, t);
        let n = gr.quad(&d).sqrt();
        axpy(x, len / n, &d)
    };
    let full = make(1.0);
    if segment_future_causal(m, x, &full, DEFAULT_SUBDIV) {
        return Ok(full);
    }
    let axis = make(0.0);
    if !segment_future_causal(m, x, &axis, DEFAULT_SUBDIV) {
        return Err(LabError::NotTimelike { point: x.to_vec() });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if segment_future_causal(m, x, &make(mid), DEFAULT_SUBDIV) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(make(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{make_preset, PresetName, PresetSpec};

    fn flat() -> MetricField {
        make_preset(&PresetSpec::new(PresetName::Flat)).unwrap()
    }

    #[test]
    fn lengths_of_flat_segments() {
        let m = flat();
        let c = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let l = curve_lengths(&m, &c, 8);
        assert!((l.lorentzian - 2.0).abs() < 1e-12 && (l.riemannian - 2.0).abs() < 1e-12);
        let n = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(curve_lengths(&m, &n, 8).lorentzian, 0.0);
    }

    #[test]
    fn future_pointing_examples() {
        let m = flat();
        let ok = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![2.0, 1.0]]).unwrap();
        assert!(is_future_pointing(&m, &ok, 8).ok);
        let sp = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert!(!is_future_pointing(&m, &sp, 8).ok);
        let back =
            PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(is_future_pointing(&m, &back, 8), FuturePointing { ok: false, first_offending: Some(1) });
    }

    #[test]
    fn rotation_vector_examples() {
        let m = flat();
        let c = PolygonalWorldline::on(&m, vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let r = rotation_vector(&m, &c).unwrap();
        assert!((r[0] - 0.6).abs() < 1e-12 && (r[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_curves() {
        assert!(PolygonalWorldline::new(vec![vec![0.0, 0.0]], "flat").is_err());
        assert!(PolygonalWorldline::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], "flat").is_err());
    }

    #[test]
    fn flat_geodesic_is_straight() {
        let m = flat();
        let tr = geodesic_shoot(&m, &[0.1, 0.2], &[1.0, 0.3], 5.0, 0.01).unwrap();
        let end = tr.curve.last();
        assert!((end[0] - 5.1).abs() < 1e-9 && (end[1] - 1.7).abs() < 1e-9);
    }

    #[test]
    fn walk_is_future_pointing_and_deterministic() {
        let m = flat();
        let a = random_causal_walk(&m, &[0.0, 0.0], 200, 0.05, 7).unwrap();
        let b = random_causal_walk(&m, &[0.0, 0.0], 200, 0.05, 7).unwrap();
        assert_eq!(a, b);
        assert!(is_future_pointing(&m, &a, 8).ok);
    }
}
