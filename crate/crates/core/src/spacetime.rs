//! Periodic Lorentzian metrics on ℝⁿ, the Abelian cover of the n-torus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, orthonormal_complement, scale, SymMat};
use crate::{LabError, Result};

/// Relative null tolerance `|g(v,v)| ≤ tol·g_R(v,v)`.
pub const NULL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Flat,
    ConformalFlat,
    ProductCircle,
    E1Counterexample,
}

impl PresetName {
    pub const ALL: [PresetName; 4] =
        [PresetName::Flat, PresetName::ConformalFlat, PresetName::ProductCircle, PresetName::E1Counterexample];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Flat => "flat",
            PresetName::ConformalFlat => "conformal_flat",
            PresetName::ProductCircle => "product_circle",
            PresetName::E1Counterexample => "e1_counterexample",
        }
    }
}

/// Auxiliary Riemannian metric g_R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiemannianSpec {
    Identity,
    /// `(1 + amp·sin(2π p[axis]/s))² · id`
    Conformal { amp: f64, axis: usize },
}

impl Default for RiemannianSpec {
    fn default() -> Self {
        RiemannianSpec::Identity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    /// Spatial dimension n.
    pub dim: Option<usize>,
    /// Lattice is `lattice_scale·ℤⁿ` (E1 forces 7).
    pub lattice_scale: Option<f64>,
    /// Conformal factor `f = conformal_const + conformal_amp·sin(2πt/s)·sin(2πx/s)`.
    pub conformal_const: f64,
    pub conformal_amp: f64,
    /// Circle profile `ρ(x) = rho_mean + rho_amp·sin(2πx/s)`.
    pub rho_mean: f64,
    pub rho_amp: f64,
    /// Strength of the `dz²` term that opens vertical timelike loops in E1.
    pub e1_kappa: f64,
    pub riemannian: RiemannianSpec,
    /// C⁰ amplitude of the smooth periodic bump added to g.
    pub perturbation: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            dim: None,
            lattice_scale: None,
            conformal_const: 1.0,
            conformal_amp: 0.5,
            rho_mean: 1.5,
            rho_amp: 0.5,
            e1_kappa: 0.5,
            riemannian: RiemannianSpec::Identity,
            perturbation: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub name: PresetName,
    #[serde(default)]
    pub params: PresetParams,
}

impl PresetSpec {
    pub fn new(name: PresetName) -> Self {
        PresetSpec { name, params: PresetParams::default() }
    }

    pub fn with_params(name: PresetName, params: PresetParams) -> Self {
        PresetSpec { name, params }
    }

    /// Fills defaults so the stored spec is fully explicit.
    pub fn resolved(&self) -> PresetSpec {
        let mut p = self.params.clone();
        let (dim, scale) = match self.name {
            PresetName::E1Counterexample => (3, 7.0),
            _ => (2, 1.0),
        };
        p.dim.get_or_insert(dim);
        p.lattice_scale.get_or_insert(scale);
        PresetSpec { name: self.name, params: p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalKind {
    Timelike,
    Null,
    Spacelike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Future,
    Past,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalCharacter {
    pub kind: CausalKind,
    pub direction: TimeDirection,
}

impl CausalCharacter {
    pub fn is_future_causal(&self) -> bool {
        self.kind != CausalKind::Spacelike && self.direction == TimeDirection::Future
    }

    pub fn is_future_timelike(&self) -> bool {
        self.kind == CausalKind::Timelike && self.direction == TimeDirection::Future
    }
}

/// Periodic Lorentzian metric with time orientation and auxiliary g_R.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    spec: PresetSpec,
    dim: usize,
    scale: f64,
}

/// Quintic smoothstep, C² at both ends.
fn smooth(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

/// E1 profiles `(e, c, b, k)` at x (period 7): the metric is
/// `dx² + b dy² + c dy dz + e dx dz + k dz²`.
fn e1_profile(x: f64, kappa: f64) -> (f64, f64, f64, f64) {
    let x = x.rem_euclid(7.0);
    let x = if x < 1.0 { x + 7.0 } else { x };
    let bump = |s: f64| -kappa * 4.0 * s * (1.0 - s);
    if x <= 2.0 {
        let s = smooth(x - 1.0);
        (1.0 - s, -s, 1.0 - s, 0.0)
    } else if x <= 3.0 {
        let s = smooth(x - 2.0);
        (-s, -(1.0 - s), s, 0.0)
    } else if x <= 4.0 {
        let s = smooth(x - 3.0);
        (-1.0 + 2.0 * s, 0.0, 1.0, bump(s))
    } else if x <= 5.0 {
        let s = smooth(x - 4.0);
        (1.0 - s, s, 1.0 - s, 0.0)
    } else if x <= 6.0 {
        let s = smooth(x - 5.0);
        (-s, 1.0 - s, s, 0.0)
    } else if x <= 6.75 {
        let s = smooth((x - 6.0) / 0.75);
        (-1.0 + 2.0 * s, 0.0, 1.0, bump(s))
    } else {
        (1.0, 0.0, 1.0, 0.0)
    }
}

impl MetricField {
    /// Builds a preset and verifies signature and orientation on a grid.
    pub fn from_preset(spec: &PresetSpec) -> Result<Self> {
        let spec = spec.resolved();
        let p = &spec.params;
        let dim = p.dim.expect("resolved");
        let scale = p.lattice_scale.expect("resolved");
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LabError::InvalidInput(format!("lattice_scale must be positive, got {scale}")));
        }
        if !(2..=3).contains(&dim) {
            return Err(LabError::InvalidInput(format!("dim must be 2 or 3, got {dim}")));
        }
        match spec.name {
            PresetName::Flat => {}
            PresetName::ConformalFlat => {
                if !(p.conformal_const - p.conformal_amp.abs() > 0.0) {
                    return Err(LabError::InvalidInput(format!(
                        "conformal factor is nonpositive somewhere: min f = {}",
                        p.conformal_const - p.conformal_amp.abs()
                    )));
                }
            }
            PresetName::ProductCircle => {
                if dim != 2 {
                    return Err(LabError::InvalidInput("product_circle is two-dimensional".into()));
                }
                if !(p.rho_mean - p.rho_amp.abs() > 0.0) {
                    return Err(LabError::InvalidInput(format!(
                        "circle profile is nonpositive somewhere: min rho = {}",
                        p.rho_mean - p.rho_amp.abs()
                    )));
                }
            }
            PresetName::E1Counterexample => {
                if dim != 3 || scale != 7.0 {
                    return Err(LabError::InvalidInput("e1_counterexample lives on R^3 with lattice 7Z^3".into()));
                }
                if !(p.e1_kappa > 0.0) {
                    return Err(LabError::InvalidInput("e1_kappa must be positive".into()));
                }
            }
        }
        if let RiemannianSpec::Conformal { amp, axis } = p.riemannian {
            if axis >= dim || !(amp.abs() < 1.0) {
                return Err(LabError::InvalidInput(format!(
                    "riemannian conformal needs axis < {dim} and |amp| < 1"
                )));
            }
        }
        if !p.perturbation.is_finite() {
            return Err(LabError::InvalidInput("perturbation must be finite".into()));
        }
        let m = MetricField { spec, dim, scale };
        m.verify(if dim == 3 { 64 } else { 64 })?;
        Ok(m)
    }

    fn verify(&self, n: usize) -> Result<()> {
        let total = n.pow(self.dim as u32);
        for idx in 0..total {
            let mut c = idx;
            let p: Vec<f64> = (0..self.dim)
                .map(|_| {
                    let k = c % n;
                    c /= n;
                    self.scale * k as f64 / n as f64
                })
                .collect();
            let g = self.g(&p);
            if !is_lorentzian(&g) {
                return Err(LabError::Construction { message: "metric is not Lorentzian".into(), point: p });
            }
            let x = self.orientation(&p);
            if !(g.quad(&x) < 0.0) {
                return Err(LabError::Construction { message: "orientation field is not timelike".into(), point: p });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &PresetSpec {
        &self.spec
    }

    pub fn name(&self) -> PresetName {
        self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lattice is `scale·ℤⁿ`.
    pub fn lattice_scale(&self) -> f64 {
        self.scale
    }

    /// Lattice vector for integer coordinates `k`.
    pub fn lattice_vector(&self, k: &[i64]) -> Vec<f64> {
        k.iter().map(|&ki| ki as f64 * self.scale).collect()
    }

    /// Ground truth shipped with a preset: reason the torus is known not to
    /// be vicious.
    pub fn known_non_vicious(&self) -> Option<&'static str> {
        match self.spec.name {
            PresetName::E1Counterexample => Some("future curves trapped in x in [-1,4]"),
            _ => None,
        }
    }

    fn phase(&self, t: f64) -> f64 {
        2.0 * PI * t / self.scale
    }

    /// Conformal factor f for conformal_flat (1 for other presets).
    pub fn conformal_factor(&self, p: &[f64]) -> f64 {
        let pr = &self.spec.params;
        match self.spec.name {
            PresetName::ConformalFlat => {
                pr.conformal_const + pr.conformal_amp * self.phase(p[0]).sin() * self.phase(p[1]).sin()
            }
            _ => 1.0,
        }
    }

    /// Circle profile ρ(x) for product_circle.
    pub fn rho(&self, x: f64) -> f64 {
        let pr = &self.spec.params;
        pr.rho_mean + pr.rho_amp * self.phase(x).sin()
    }

    fn base_g(&self, p: &[f64]) -> SymMat {
        let n = self.dim;
        let mut eta = SymMat::identity(n);
        eta.set(0, 0, -1.0);
        match self.spec.name {
            PresetName::Flat => eta,
            PresetName::ConformalFlat => {
                let f = self.conformal_factor(p);
                eta.scaled(f * f)
            }
            PresetName::ProductCircle => {
                let r = self.rho(p[1]);
                SymMat::diag(&[-1.0, r * r])
            }
            PresetName::E1Counterexample => {
                let (e, c, b, k) = e1_profile(p[0], self.spec.params.e1_kappa);
                SymMat::from_rows(&[
                    vec![1.0, 0.0, 0.5 * e],
                    vec![0.0, b, 0.5 * c],
                    vec![0.5 * e, 0.5 * c, k],
                ])
            }
        }
    }

    /// Metric tensor g(p).
    pub fn g(&self, p: &[f64]) -> SymMat {
        let g = self.base_g(p);
        let amp = self.spec.params.perturbation;
        if amp == 0.0 {
            return g;
        }
        let bump = amp * self.phase(p[0]).sin() * self.phase(p[1]).cos();
        let mut ones = SymMat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                ones.set(i, j, 1.0);
            }
        }
        g.plus(&ones.scaled(bump))
    }

    /// Time orientation X(p).
    pub fn orientation(&self, p: &[f64]) -> Vec<f64> {
        let base = match self.spec.name {
            PresetName::E1Counterexample => {
                let (e, c, _, _) = e1_profile(p[0], self.spec.params.e1_kappa);
                vec![-0.5 * e, -0.5 * c, 1.0]
            }
            _ => {
                let mut x = vec![0.0; self.dim];
                x[0] = 1.0;
                x
            }
        };
        if self.spec.params.perturbation == 0.0 {
            return base;
        }
        let g = self.g(p);
        if g.quad(&base) < 0.0 {
            return base;
        }
        let (_, e) = g.most_negative_eigenvector();
        if crate::linalg::dot(&e, &base) < 0.0 {
            scale(&e, -1.0)
        } else {
            e
        }
    }

    /// Auxiliary Riemannian metric g_R(p).
    pub fn g_r(&self, p: &[f64]) -> SymMat {
        match self.spec.params.riemannian {
            RiemannianSpec::Identity => SymMat::identity(self.dim),
            RiemannianSpec::Conformal { amp, axis } => {
                let f = 1.0 + amp * self.phase(p[axis]).sin();
                SymMat::identity(self.dim).scaled(f * f)
            }
        }
    }

    pub fn riemannian_is_identity(&self) -> bool {
        self.spec.params.riemannian == RiemannianSpec::Identity
    }

    /// |v| in g_R at p.
    pub fn r_norm(&self, p: &[f64], v: &[f64]) -> f64 {
        self.g_r(p).quad(v).max(0.0).sqrt()
    }

    /// Causal character of v at p.
    pub fn causal_character(&self, p: &[f64], v: &[f64]) -> CausalCharacter {
        self.causal_character_tol(p, v, NULL_TOL)
    }

    pub fn causal_character_tol(&self, p: &[f64], v: &[f64], tol: f64) -> CausalCharacter {
        let g = self.g(p);
        let q = g.quad(v);
        let r = self.g_r(p).quad(v);
        let kind = if q.abs() <= tol * r {
            CausalKind::Null
        } else if q < 0.0 {
            CausalKind::Timelike
        } else {
            CausalKind::Spacelike
        };
        let direction = if kind == CausalKind::Spacelike || r == 0.0 {
            TimeDirection::None
        } else {
            let s = g.bilinear(v, &self.orientation(p));
            if s < 0.0 {
                TimeDirection::Future
            } else if s > 0.0 {
                TimeDirection::Past
            } else {
                TimeDirection::None
            }
        };
        CausalCharacter { kind, direction }
    }

    /// True iff v is future timelike with `g(v,v) ≤ −margin·g_R(v,v)`.
    pub fn is_future_timelike_margin(&self, p: &[f64], v: &[f64], margin: f64) -> bool {
        let g = self.g(p);
        g.quad(v) <= -margin * self.g_r(p).quad(v) && g.bilinear(v, &self.orientation(p)) < 0.0
    }

    /// Unit-g_R orientation X̂(p) and a g_R-orthonormal basis of its complement.
    pub fn orthonormal_frame(&self, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let gr = self.g_r(p);
        let x = self.orientation(p);
        let xh = scale(&x, 1.0 / gr.quad(&x).sqrt());
        let basis = orthonormal_complement(&gr, &xh);
        (xh, basis)
    }

    /// The future null direction (unit g_R) in the plane spanned by X̂(p) and
    /// the spatial seed `s` (g_R-orthogonal to X̂, unit).
    pub fn null_ray_from_seed(&self, p: &[f64], xh: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        let g = self.g(p);
        let gr = self.g_r(p);
        let a = g.quad(xh);
        let b = g.bilinear(xh, s);
        let c = g.quad(s);
        let disc = b * b - a * c;
        if !(a < 0.0) || !(disc > 0.0) || !disc.is_finite() {
            return Err(LabError::RootFinding { seed: s.to_vec() });
        }
        let u = (b + disc.sqrt()) / (-a);
        let v = axpy(s, u, xh);
        let n = gr.quad(&v).sqrt();
        Ok(scale(&v, 1.0 / n))
    }

    /// Spatial unit seed at angle `theta` in the complement frame (3D), or
    /// the sign of `theta`'s cosine picking one side (2D).
    pub fn frame_seed(&self, basis: &[Vec<f64>], theta: f64) -> Vec<f64> {
        if self.dim == 2 {
            return if theta.cos() >= 0.0 { basis[0].clone() } else { scale(&basis[0], -1.0) };
        }
        let (s, c) = theta.sin_cos();
        // exact zeros on the quarter turns
        let c = if c.abs() < 1e-15 { 0.0 } else { c };
        let s = if s.abs() < 1e-15 { 0.0 } else { s };
        axpy(&scale(&basis[0], c), s, &basis[1])
    }

    /// Future null rays at p (unit g_R). In 2D the two null directions; in 3D
    /// `m` rays around the cone, starting on the first complement axis.
    pub fn null_rays(&self, p: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
        let (xh, basis) = self.orthonormal_frame(p);
        let m = if self.dim == 2 { 2 } else { m.max(4) };
        (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                let s = self.frame_seed(&basis, th);
                self.null_ray_from_seed(p, &xh, &s)
            })
            .collect()
    }

    /// `count` future causal unit-g_R rays at p: null boundary samples
    /// followed by interior timelike samples.
    pub fn cone_rays(&self, p: &[f64], count: usize) -> Result<Vec<Vec<f64>>> {
        if count < 2 * self.dim {
            return Err(LabError::InvalidInput(format!("cone_rays needs count >= {}", 2 * self.dim)));
        }
        let gr = self.g_r(p);
        let unit = |v: Vec<f64>| {
            let n = gr.quad(&v).sqrt();
            scale(&v, 1.0 / n)
        };
        if self.dim == 2 {
            let null = self.null_rays(p, 2)?;
            let mut out = null.clone();
            let k = count - 2;
            for i in 1..=k {
                let t = i as f64 / (k + 1) as f64;
                out.push(unit(crate::linalg::lerp(&null[0], &null[1], t)));
            }
            return Ok(out);
        }
        let nb = ((count / 2) / 4).max(1) * 4;
        let null = self.null_rays(p, nb)?;
        let x = self.orientation(p);
        let xh = unit(x);
        let mut out = null.clone();
        let rest = count - nb;
        let levels = rest.div_ceil(nb).max(1);
        'outer: for l in 1..=levels {
            let t = l as f64 / (levels + 1) as f64;
            for r in &null {
                if out.len() == count {
                    break 'outer;
                }
                out.push(unit(crate::linalg::lerp(&xh, r, t)));
            }
        }
        Ok(out)
    }

    /// Future timelike with g_R-distance to the sampled null cone ≥ eps·|v|.
    pub fn epsilon_timecone_member(&self, p: &[f64], v: &[f64], eps: f64) -> Result<bool> {
        if !self.causal_character(p, v).is_future_timelike() {
            return Ok(false);
        }
        let d = self.light_cone_distance(p, v)?;
        Ok(d >= eps * self.r_norm(p, v))
    }

    /// g_R-distance from v to the sampled future null cone at p.
    pub fn light_cone_distance(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        let gr = self.g_r(p);
        let null = self.null_rays(p, 256)?;
        Ok(null
            .iter()
            .map(|r| {
                let lam = gr.bilinear(v, r).max(0.0);
                gr.quad(&axpy(v, -lam, r)).max(0.0).sqrt()
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Grid of points over one fundamental domain, `n` per edge.
    pub fn fundamental_grid(&self, n: usize) -> Vec<Vec<f64>> {
        let total = n.pow(self.dim as u32);
        (0..total)
            .map(|idx| {
                let mut c = idx;
                (0..self.dim)
                    .map(|_| {
                        let k = c % n;
                        c /= n;
                        self.scale * k as f64 / n as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Max of |g(v,v)|/g_R(v,v) over sampled points and directions.
    pub fn lambda_bound(&self, n: usize) -> f64 {
        let dirs = crate::cone_kit::sphere_directions(self.dim);
        let mut lam: f64 = 0.0;
        for p in self.fundamental_grid(n) {
            let g = self.g(&p);
            let gr = self.g_r(&p);
            for d in dirs.iter().step_by(7) {
                lam = lam.max(g.quad(d).abs() / gr.quad(d));
            }
        }
        lam
    }
}

/// Signature (−,+,…,+).
pub fn is_lorentzian(g: &SymMat) -> bool {
    let d = g.det();
    match g.dim() {
        1 => d < 0.0,
        2 => d < 0.0,
        _ => {
            if !(d < 0.0) {
                return false;
            }
            // det < 0 leaves one or three negative eigenvalues
            if (0..3).any(|i| g.get(i, i) > 0.0) {
                return true;
            }
            g.inertia(1e-12) == (1, 2, 0)
        }
    }
}

/// Convenience constructor.
pub fn make_preset(spec: &PresetSpec) -> Result<MetricField> {
    MetricField::from_preset(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_slab_metrics_are_exact() {
        let m = make_preset(&PresetSpec::new(PresetName::E1Counterexample)).unwrap();
        let rows = |x: f64| {
            let g = m.g(&[x, 0.3, -1.2]);
            (0..3).map(|i| (0..3).map(|j| g.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>()
        };
        // (dx+dz)dx+dy²
        let i = vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 0.0]];
        // (dx−dz)dx+dy²
        let ii = vec![vec![1.0, 0.0, -0.5], vec![0.0, 1.0, 0.0], vec![-0.5, 0.0, 0.0]];
        // −dy dz + dx²
        let iii = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, -0.5], vec![0.0, -0.5, 0.0]];
        // dy dz + dx²
        let iv = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.5, 0.0]];
        assert_eq!(rows(1.0), i);
        assert_eq!(rows(4.0), i);
        assert_eq!(rows(3.0), ii);
        assert_eq!(rows(6.0), ii);
        assert_eq!(rows(2.0), iii);
        assert_eq!(rows(5.0), iv);
        assert_eq!(rows(9.0), iii);
    }

    #[test]
    fn e1_dy_is_null_future_on_slab() {
        let m = make_preset(&PresetSpec::new(PresetName::E1Counterexample)).unwrap();
        let c = m.causal_character(&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(c.kind, CausalKind::Null);
        assert_eq!(c.direction, TimeDirection::Future);
    }

    #[test]
    fn e1_vertical_direction_is_timelike_mid_slab() {
        let m = make_preset(&PresetSpec::new(PresetName::E1Counterexample)).unwrap();
        assert!(m.causal_character(&[3.5, 0.0, 0.0], &[0.0, 0.0, 1.0]).is_future_timelike());
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = PresetParams::default();
        p.conformal_const = 0.4;
        assert!(matches!(
            make_preset(&PresetSpec::with_params(PresetName::ConformalFlat, p)),
            Err(LabError::InvalidInput(_))
        ));
        let mut p = PresetParams::default();
        p.rho_mean = 0.5;
        assert!(make_preset(&PresetSpec::with_params(PresetName::ProductCircle, p)).is_err());
    }

    #[test]
    fn null_rays_flat_and_product() {
        let flat = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        let n = flat.null_rays(&[0.2, 0.1], 2).unwrap();
        let s = 0.5f64.sqrt();
        assert!((n[0][0] - s).abs() < 1e-12 && (n[0][1].abs() - s).abs() < 1e-12);
        assert!((n[1][1] + n[0][1]).abs() < 1e-12);

        let mut p = PresetParams::default();
        p.rho_amp = 0.0;
        p.rho_mean = 2.0;
        let prod = make_preset(&PresetSpec::with_params(PresetName::ProductCircle, p)).unwrap();
        for r in prod.null_rays(&[0.0, 0.3], 2).unwrap() {
            assert!((r[1].abs() / r[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_timecone_examples() {
        let flat = make_preset(&PresetSpec::new(PresetName::Flat)).unwrap();
        assert!(flat.epsilon_timecone_member(&[0.0, 0.0], &[1.0, 0.0], 0.5).unwrap());
        assert!(!flat.epsilon_timecone_member(&[0.0, 0.0], &[1.0, 1.0], 1e-6).unwrap());
        assert!(!flat.epsilon_timecone_member(&[0.0, 0.0], &[1.0, 0.0], 0.71).unwrap());
    }
}
