//! Scenario configs: parsing, defaults and validation.

use std::fmt;
use std::path::PathBuf;

use classa::certify::{CertifyBudget, LipschitzOptions, SctpOptions};
use classa::reach::FrakOptions;
use classa::spacetime::{make_preset, MetricField, PresetSpec};
use classa::stable::{ConeBudget, FlowField, P01aOptions};
use serde::{Deserialize, Serialize};

use crate::pack;

/// Config problem, located by a field path such as `tasks[2].segments`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn bad(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub preset: PresetSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Seed of task `i`: its own override, else the scenario seed plus `i`.
    pub fn task_seed(&self, i: usize) -> u64 {
        self.tasks[i].seed().unwrap_or(self.seed.wrapping_add(i as u64))
    }

    /// Builds the metric and checks every task against it.
    pub fn validate(&self) -> Result<MetricField, ConfigError> {
        let m = make_preset(&self.preset).map_err(|e| bad("preset", e.to_string()))?;
        if self.tasks.is_empty() {
            return Err(bad("tasks", "at least one task is required"));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            t.validate(&m).map_err(|(field, msg)| bad(format!("tasks[{i}].{field}"), msg))?;
        }
        Ok(m)
    }

    /// The scenario with every default written out.
    pub fn resolved(&self) -> Scenario {
        Scenario { preset: self.preset.resolved(), ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    ConeEstimate(ConeTask),
    Timesep(TimesepTask),
    Certify(CertifyTask),
    Lipschitz(LipschitzTask),
    Sctp(SctpTask),
    FrakF(FrakTask),
    StableNorm(StableNormTask),
    P01a(P01aTask),
    FlowRho(FlowTask),
    Perturb(PerturbTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::ConeEstimate(_) => "cone_estimate",
            Task::Timesep(_) => "timesep",
            Task::Certify(_) => "certify",
            Task::Lipschitz(_) => "lipschitz",
            Task::Sctp(_) => "sctp",
            Task::FrakF(_) => "frak_f",
            Task::StableNorm(_) => "stable_norm",
            Task::P01a(_) => "p01a",
            Task::FlowRho(_) => "flow_rho",
            Task::Perturb(_) => "perturb",
        }
    }

    /// Base name of the report file.
    pub fn report_stem(&self) -> &'static str {
        match self {
            Task::ConeEstimate(_) => "cone",
            other => other.kind(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Task::ConeEstimate(t) => t.seed,
            Task::Timesep(t) => t.seed,
            Task::Certify(t) => t.seed,
            Task::Lipschitz(t) => t.seed,
            Task::Sctp(_) => None,
            Task::FrakF(t) => t.seed,
            Task::StableNorm(_) => None,
            Task::P01a(t) => t.seed,
            Task::FlowRho(t) => t.seed,
            Task::Perturb(t) => t.seed,
        }
    }

    fn validate(&self, m: &MetricField) -> Result<(), (String, String)> {
        let dim = m.dim();
        let e = |f: &str, msg: &str| Err((f.to_string(), msg.to_string()));
        let vec_dim = |f: &str, v: &[f64]| -> Result<(), (String, String)> {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err((f.to_string(), format!("expected {dim} finite coordinates")));
            }
            Ok(())
        };
        let cone = |f: &str, b: &ConeBudget| -> Result<(), (String, String)> {
            if b.geodesics + b.walks == 0 {
                return Err((f.to_string(), "budget has no samplers".into()));
            }
            if !(b.geodesic_dt > 0.0 && b.walk_step_len > 0.0 && b.geodesic_length > 0.0) {
                return Err((f.to_string(), "lengths and steps must be positive".into()));
            }
            if b.frak_radius > 0 && b.frak_resolution < 16 {
                return Err((format!("{f}.frak_resolution"), "must be at least 16".into()));
            }
            Ok(())
        };
        match self {
            Task::ConeEstimate(t) => cone("budget", &t.budget),
            Task::Timesep(t) => {
                if t.segments < 2 {
                    return e("segments", "must be at least 2");
                }
                if t.pairs.is_empty() {
                    return e("pairs", "at least one pair is required");
                }
                for (i, p) in t.pairs.iter().enumerate() {
                    vec_dim(&format!("pairs[{i}].p"), &p.p)?;
                    vec_dim(&format!("pairs[{i}].q"), &p.q)?;
                }
                if t.refine.iter().any(|&s| s < 2) {
                    return e("refine", "segment counts must be at least 2");
                }
                if t.oracle_resolution.is_some_and(|r| r < 16) {
                    return e("oracle_resolution", "must be at least 16");
                }
                Ok(())
            }
            Task::Certify(t) => {
                cone("budget.cone", &t.budget.cone)?;
                if let Some(a) = &t.check_form {
                    vec_dim("check_form", a)?;
                }
                Ok(())
            }
            Task::Lipschitz(t) => {
                if !(t.eps > 0.0) {
                    return e("eps", "must be positive");
                }
                if t.samples == 0 {
                    return e("samples", "must be positive");
                }
                if t.options.segments < 2 {
                    return e("options.segments", "must be at least 2");
                }
                if !(t.options.h_min > 0.0 && t.options.h_max >= t.options.h_min) {
                    return e("options.h_min", "need 0 < h_min <= h_max");
                }
                cone("cone_budget", &t.cone_budget)
            }
            Task::Sctp(t) => {
                vec_dim("alpha", &t.alpha)?;
                if t.options.resolution < 16 {
                    return e("options.resolution", "must be at least 16");
                }
                Ok(())
            }
            Task::FrakF(t) => {
                if t.resolution < 16 {
                    return e("resolution", "must be at least 16");
                }
                match (&t.hs, &t.random) {
                    (None, None) => e("hs", "give hs or random"),
                    (Some(hs), _) if hs.iter().any(|h| h.len() != dim) => e("hs", "wrong dimension"),
                    (_, Some(r)) if r.count == 0 || r.max_norm < 1 => e("random", "count and max_norm must be positive"),
                    _ => Ok(()),
                }
            }
            Task::StableNorm(t) => {
                if t.n_max < 8 {
                    return e("n_max", "must be at least 8");
                }
                if t.resolution == 0 {
                    return e("resolution", "must be positive");
                }
                if t.hs.is_empty() || t.hs.iter().any(|h| h.len() != dim || h.iter().all(|&x| x == 0)) {
                    return e("hs", "need nonzero lattice vectors of the preset's dimension");
                }
                Ok(())
            }
            Task::P01a(t) => {
                if t.samples == 0 {
                    return e("samples", "must be positive");
                }
                if t.options.resolution < 16 {
                    return e("options.resolution", "must be at least 16");
                }
                cone("cone_budget", &t.cone_budget)
            }
            Task::FlowRho(t) => {
                vec_dim("x0", &t.x0)?;
                if !(t.t > 0.0 && t.dt > 0.0) {
                    return e("t", "t and dt must be positive");
                }
                if let FlowField::Constant { v } = &t.field {
                    vec_dim("field.v", v)?;
                }
                if let Some(b) = &t.cone_budget {
                    cone("cone_budget", b)?;
                }
                Ok(())
            }
            Task::Perturb(t) => {
                if !t.amplitude.is_finite() {
                    return e("amplitude", "must be finite");
                }
                cone("budget.cone", &t.budget.cone)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeTask {
    pub budget: ConeBudget,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimesepTask {
    pub pairs: Vec<Pair>,
    pub segments: usize,
    pub restarts: usize,
    /// Segment counts for the refinement trace.
    pub refine: Vec<usize>,
    pub oracle_resolution: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for TimesepTask {
    fn default() -> Self {
        TimesepTask { pairs: Vec::new(), segments: 8, restarts: 16, refine: Vec::new(), oracle_resolution: None, seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyTask {
    pub budget: CertifyBudget,
    /// Extra constant covector put through the temporal-function check.
    pub check_form: Option<Vec<f64>>,
    pub chains: usize,
    pub seed: Option<u64>,
}

impl Default for CertifyTask {
    fn default() -> Self {
        CertifyTask { budget: CertifyBudget::default(), check_form: None, chains: 100, seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzTask {
    pub eps: f64,
    pub samples: usize,
    pub options: LipschitzOptions,
    pub cone_budget: ConeBudget,
    pub seed: Option<u64>,
}

impl Default for LipschitzTask {
    fn default() -> Self {
        LipschitzTask {
            eps: 0.2,
            samples: 1000,
            options: LipschitzOptions::default(),
            cone_budget: ConeBudget::default(),
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SctpTask {
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub options: SctpOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomLattice {
    pub count: usize,
    /// Euclidean norm bound of the sampled classes.
    pub max_norm: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrakTask {
    pub hs: Option<Vec<Vec<i64>>>,
    pub random: Option<RandomLattice>,
    pub resolution: usize,
    pub options: FrakOptions,
    pub seed: Option<u64>,
}

impl Default for FrakTask {
    fn default() -> Self {
        FrakTask { hs: None, random: None, resolution: 16, options: FrakOptions::default(), seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableNormTask {
    pub hs: Vec<Vec<i64>>,
    pub n_max: usize,
    pub resolution: usize,
}

impl Default for StableNormTask {
    fn default() -> Self {
        StableNormTask { hs: Vec::new(), n_max: 64, resolution: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct P01aTask {
    pub samples: usize,
    pub options: P01aOptions,
    pub cone_budget: ConeBudget,
    pub seed: Option<u64>,
}

impl Default for P01aTask {
    fn default() -> Self {
        P01aTask { samples: 200, options: P01aOptions::default(), cone_budget: ConeBudget::default(), seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowTask {
    pub field: FlowField,
    pub x0: Vec<f64>,
    #[serde(default = "default_flow_t")]
    pub t: f64,
    #[serde(default = "default_flow_dt")]
    pub dt: f64,
    /// Budget of the cone used for the membership check; none skips it.
    #[serde(default = "default_flow_budget")]
    pub cone_budget: Option<ConeBudget>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_flow_t() -> f64 {
    1000.0
}

fn default_flow_dt() -> f64 {
    0.05
}

fn default_flow_budget() -> Option<ConeBudget> {
    Some(ConeBudget::default().scaled(0.25))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbTask {
    pub amplitude: f64,
    pub budget: CertifyBudget,
    pub seed: Option<u64>,
}

impl Default for PerturbTask {
    fn default() -> Self {
        PerturbTask { amplitude: 0.05, budget: CertifyBudget::default(), seed: None }
    }
}

/// Parses a scenario, reporting the path of the offending field.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        bad(path, e.into_inner().to_string())
    })
}

/// Loads a scenario from a built-in pack name or a JSON file.
pub fn load_scenario(arg: &str) -> Result<Scenario, ConfigError> {
    if let Some(text) = pack::get(arg) {
        return parse_scenario(text);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| bad("", format!("cannot read {arg}: {e}")))?;
    parse_scenario(&text)
}
