//! Instance files: named shapes, multifunctions, scenario spaces, schedules
//! and objectives, plus the tasks each subcommand runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smoothrep::approx::LevelSchedule;
use smoothrep::cuts::CoverOptions;
use smoothrep::expr::Expr;
use smoothrep::metrics::MetricConfig;
use smoothrep::oracles::{make_param_multifunction, make_shape_oracle, Aabb, ParamMultifunction, PmfSpec, SetOracle, ShapeSpec};
use smoothrep::solver::{RefineOptions, SolverOptions};
use smoothrep::stochastic::ScenarioSpace;
use smoothrep::Exec;

#[derive(Debug)]
pub enum InstanceError {
    Io(std::io::Error),
    Schema(serde_json::Error),
    Reference(String),
    Invalid(String),
}

impl std::fmt::Display for InstanceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstanceError::Io(e) => write!(f, "cannot read instance: {e}"),
            InstanceError::Schema(e) => write!(f, "instance does not match the schema: {e}"),
            InstanceError::Reference(s) => write!(f, "unresolved reference: {s}"),
            InstanceError::Invalid(s) => write!(f, "invalid instance: {s}"),
        }
    }
}

impl std::error::Error for InstanceError {}

impl From<smoothrep::Error> for InstanceError {
    fn from(e: smoothrep::Error) -> Self {
        InstanceError::Invalid(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, InstanceError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub shapes: BTreeMap<String, ShapeSpec>,
    #[serde(default)]
    pub multifunctions: BTreeMap<String, PmfSpec>,
    #[serde(default)]
    pub scenario_spaces: BTreeMap<String, ScenarioSpace>,
    #[serde(default)]
    pub schedules: BTreeMap<String, LevelSchedule>,
    #[serde(default)]
    pub objectives: BTreeMap<String, Expr>,
    #[serde(default)]
    pub representation: RepSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default)]
    pub tasks: Tasks,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepSettings {
    pub budget: usize,
    pub n_samples: usize,
    pub margin: f64,
    pub eps_floor: f64,
    pub eps_refine: usize,
}

impl Default for RepSettings {
    fn default() -> Self {
        let c = CoverOptions::default();
        RepSettings { budget: 128, n_samples: 4096, margin: c.margin, eps_floor: c.eps_floor, eps_refine: c.eps_refine }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub starts: usize,
    pub mu0: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    pub max_iter: usize,
    pub refine: RefineOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let s = SolverOptions::default();
        SolverSettings {
            starts: s.starts,
            mu0: s.mu0,
            mu_max: s.mu_max,
            mu_factor: s.mu_factor,
            max_iter: s.max_iter,
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSettings {
    pub n_quad: usize,
    pub n_dir: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        let m = MetricConfig::default();
        MetricSettings { n_quad: m.n_quad, n_dir: m.n_dir }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tasks {
    pub build_rep: Vec<RepTask>,
    pub approx: Vec<ApproxTask>,
    pub setdist: Vec<SetDistTask>,
    pub moreau: Vec<MoreauTask>,
    pub smooth_integrand: Vec<IntegrandTask>,
    pub integral: Vec<IntegralTask>,
    pub solve_mpec: Vec<SolveTask>,
    pub solve_2stage: Vec<SolveTask>,
}

/// A shape or multifunction to represent; every one of them when the list
/// is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepTask {
    pub target: String,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxTask {
    /// A convex shape.
    pub target: String,
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default = "default_n_boundary")]
    pub n_boundary: usize,
    #[serde(default = "default_n_probes")]
    pub n_probes: usize,
    #[serde(default = "default_probe_delta")]
    pub probe_delta: f64,
    #[serde(default = "default_dbar_tail")]
    pub dbar_tail_max: f64,
}

fn default_n_boundary() -> usize {
    16
}
fn default_n_probes() -> usize {
    2000
}
fn default_probe_delta() -> f64 {
    0.1
}
fn default_dbar_tail() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDistTask {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub expect: Option<f64>,
    #[serde(default = "default_setdist_tol")]
    pub tol: f64,
}

fn default_setdist_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoreauPoint {
    pub x: Vec<f64>,
    /// Expected e_λ f(x) at `lambda`, the first listed λ when absent.
    #[serde(default)]
    pub expect: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_moreau_tol")]
    pub tol: f64,
}

fn default_moreau_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoreauTask {
    pub objective: String,
    pub lambdas: Vec<f64>,
    pub search: Aabb,
    #[serde(default)]
    pub points: Vec<MoreauPoint>,
    /// Scalar window for the epigraph distance between e_λ f and f.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub expect_not_prox_bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandTask {
    /// An epigraph shape over one variable.
    pub target: String,
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_gap")]
    pub tail_gap_max: f64,
}

fn default_n_grid() -> usize {
    100
}
fn default_gap() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub name: String,
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralTask {
    pub space: String,
    /// One shape per scenario.
    pub sets: Vec<String>,
    #[serde(default)]
    pub selections: Vec<Selection>,
    /// Pairs of selection names whose midpoint is tested against the
    /// convexified sets.
    #[serde(default)]
    pub midpoints: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageScenario {
    /// ψ over the first-stage variables followed by this scenario's values.
    pub objective: String,
    /// M(x); the values are free when absent.
    #[serde(default)]
    pub multifunction: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOracle {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    #[serde(default = "default_grid_n")]
    pub n: usize,
    #[serde(default = "default_solve_tol")]
    pub tol: f64,
}

fn default_grid_n() -> usize {
    401
}
fn default_solve_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveTask {
    #[serde(default)]
    pub label: Option<String>,
    /// Scenario space; a single scenario of weight one when absent.
    #[serde(default)]
    pub space: Option<String>,
    pub scenarios: Vec<StageScenario>,
    /// First-stage set C.
    pub first_stage: Aabb,
    /// Box for the values of scenarios without a multifunction.
    #[serde(default)]
    pub value_box: Option<Aabb>,
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default)]
    pub oracle: Option<GridOracle>,
    /// Known optimal value.
    #[serde(default)]
    pub expect: Option<f64>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text).map_err(InstanceError::Schema)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(InstanceError::Io)?)
    }

    /// Resolve every reference and build every oracle once.
    pub fn validate(&self) -> Result<()> {
        for name in self.shapes.keys() {
            self.shape(name)?;
        }
        for name in self.multifunctions.keys() {
            self.multifunction(name)?;
        }
        let t = &self.tasks;
        for r in &t.build_rep {
            if !self.shapes.contains_key(&r.target) && !self.multifunctions.contains_key(&r.target) {
                return Err(InstanceError::Reference(format!("build_rep target {}", r.target)));
            }
        }
        for a in &t.approx {
            if !self.shape(&a.target)?.is_convex() {
                return Err(InstanceError::Invalid(format!("approx target {} is not convex", a.target)));
            }
            self.schedule(a.schedule.as_deref())?;
        }
        for s in &t.setdist {
            self.shape(&s.a)?;
            self.shape(&s.b)?;
        }
        for m in &t.moreau {
            self.objective(&m.objective)?;
            if m.lambdas.is_empty() {
                return Err(InstanceError::Invalid(format!("moreau task on {} lists no lambda", m.objective)));
            }
        }
        for i in &t.smooth_integrand {
            if !matches!(self.shapes.get(&i.target), Some(ShapeSpec::Epigraph { vars, .. }) if vars.len() == 1) {
                return Err(InstanceError::Invalid(format!("{} is not an epigraph over one variable", i.target)));
            }
            self.schedule(i.schedule.as_deref())?;
        }
        for i in &t.integral {
            let space = self.space(&i.space)?;
            if i.sets.len() != space.len() {
                return Err(InstanceError::Invalid(format!("{} sets for {} scenarios", i.sets.len(), space.len())));
            }
            for s in &i.sets {
                self.shape(s)?;
            }
            for sel in &i.selections {
                if sel.points.len() != space.len() {
                    return Err(InstanceError::Invalid(format!("selection {} has the wrong length", sel.name)));
                }
            }
            for (a, b) in &i.midpoints {
                for n in [a, b] {
                    if !i.selections.iter().any(|s| &s.name == n) {
                        return Err(InstanceError::Reference(format!("selection {n}")));
                    }
                }
            }
        }
        for s in &t.solve_mpec {
            if s.scenarios.len() != 1 || s.space.is_some() {
                return Err(InstanceError::Invalid("an MPEC task has exactly one scenario and no space".into()));
            }
            self.check_solve(s)?;
        }
        for s in &t.solve_2stage {
            self.check_solve(s)?;
        }
        Ok(())
    }

    fn check_solve(&self, s: &SolveTask) -> Result<()> {
        if s.scenarios.is_empty() {
            return Err(InstanceError::Invalid("no scenarios".into()));
        }
        if let Some(sp) = &s.space {
            if self.space(sp)?.len() != s.scenarios.len() {
                return Err(InstanceError::Invalid(format!("space {sp} does not match the scenarios")));
            }
        }
        for sc in &s.scenarios {
            self.objective(&sc.objective)?;
            match &sc.multifunction {
                Some(m) => {
                    self.multifunction(m)?;
                }
                None if s.value_box.is_none() => {
                    return Err(InstanceError::Invalid("free values need a value_box".into()));
                }
                None => {}
            }
        }
        self.schedule(s.schedule.as_deref())?;
        Ok(())
    }

    pub fn shape(&self, name: &str) -> Result<SetOracle> {
        let spec = self.shapes.get(name).ok_or_else(|| InstanceError::Reference(format!("shape {name}")))?;
        Ok(make_shape_oracle(spec)?)
    }

    pub fn multifunction(&self, name: &str) -> Result<ParamMultifunction> {
        let spec = self.multifunctions.get(name).ok_or_else(|| InstanceError::Reference(format!("multifunction {name}")))?;
        Ok(make_param_multifunction(spec, true)?)
    }

    pub fn space(&self, name: &str) -> Result<ScenarioSpace> {
        self.scenario_spaces.get(name).cloned().ok_or_else(|| InstanceError::Reference(format!("scenario space {name}")))
    }

    pub fn objective(&self, name: &str) -> Result<Expr> {
        self.objectives.get(name).cloned().ok_or_else(|| InstanceError::Reference(format!("objective {name}")))
    }

    /// A named schedule, or the default levels.
    pub fn schedule(&self, name: Option<&str>) -> Result<LevelSchedule> {
        match name {
            Some(n) => self.schedules.get(n).cloned().ok_or_else(|| InstanceError::Reference(format!("schedule {n}"))),
            None => Ok(LevelSchedule::default_for(smoothrep::bump::SmoothBump::new().offset())),
        }
    }

    pub fn cover_options(&self) -> CoverOptions {
        let r = &self.representation;
        CoverOptions {
            seed: self.seed,
            n_samples: r.n_samples,
            margin: r.margin,
            eps_floor: r.eps_floor,
            eps_refine: r.eps_refine,
            ..CoverOptions::default()
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            starts: s.starts,
            mu0: s.mu0,
            mu_max: s.mu_max,
            mu_factor: s.mu_factor,
            max_iter: s.max_iter,
            seed: self.seed,
            exec: Exec::Auto,
        }
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig { n_quad: self.metrics.n_quad, n_dir: self.metrics.n_dir, alpha_cap: None, seed: self.seed, exec: Exec::Auto }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(Instance::from_json("{}"), Err(InstanceError::Schema(_))));
        assert!(Instance::from_json(r#"{"seed": 1}"#).is_ok());
    }

    #[test]
    fn references_must_resolve() {
        let text = r#"{"seed": 1, "tasks": {"approx": [{"target": "nope"}]}}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceError::Reference(_))));
        let text = r#"{"seed": 1, "bogus": 3}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceError::Schema(_))));
    }

    #[test]
    fn nonconvex_approx_target_rejected() {
        let text = r#"{"seed": 1, "shapes": {"two": {"type": "points", "points": [[0.0], [1.0]]}},
            "tasks": {"approx": [{"target": "two"}]}}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceError::Invalid(_))));
    }
}
