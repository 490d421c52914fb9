//! Scenario configuration schema.
//!
//! Configs are JSON objects with an explicit `schema_version`. Unknown
//! fields are rejected everywhere so typos surface as errors.

use std::path::PathBuf;

use barrier_lab_core::BallForm;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::locate::{locate, Segment};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    /// Assumptions worth surfacing in every summary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub system: SystemConfig,
    /// Linear nominal feedback `k(x) = Kx`, `m × n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_gain: Option<Vec<Vec<f64>>>,
    pub cbfs: Vec<CbfConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clf: Option<ClfConfig>,
    pub controller: ControllerConfig,
    pub tasks: Vec<TaskConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Builtin(BuiltinSystem),
    Linear(LinearSystem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSystem {
    pub name: BuiltinSystemName,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinSystemName {
    SingleIntegrator,
}

/// `ẋ = Ax + Bu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSystem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CbfConfig {
    Ball(BallCbf),
    Transform(TransformCbf),
}

impl CbfConfig {
    pub fn label(&self) -> Option<&str> {
        match self {
            CbfConfig::Ball(b) => b.label.as_deref(),
            CbfConfig::Transform(t) => t.label.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallCbf {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub form: BallForm,
    pub alpha: AlphaConfig,
}

/// `a·γ(h) + b·η·h` applied to an earlier CBF of the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformCbf {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub base: usize,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "GammaConfig::identity")]
    pub gamma: GammaConfig,
    #[serde(default = "EtaConfig::one")]
    pub eta: EtaConfig,
    /// Inherits the base `α` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaConfig {
    Linear { slope: f64 },
}

impl AlphaConfig {
    pub fn slope(&self) -> f64 {
        match self {
            AlphaConfig::Linear { slope } => *slope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaConfig {
    Identity,
    Linear { slope: f64 },
    Exp { rate: f64 },
}

impl GammaConfig {
    fn identity() -> Self {
        GammaConfig::Identity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaConfig {
    Constant { value: f64 },
    /// `‖x − center‖² + offset`.
    ShiftedSquare { center: Vec<f64>, offset: f64 },
}

impl EtaConfig {
    fn one() -> Self {
        EtaConfig::Constant { value: 1.0 }
    }
}

/// `V(x) = ½(x − x*)ᵀQ(x − x*)` with decay function `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfConfig {
    pub q: Vec<Vec<f64>>,
    pub xstar: Vec<f64>,
    pub beta: AlphaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    SafetyFilter(SafetyFilterConfig),
    ClfCbfQp(ClfCbfConfig),
}

impl ControllerConfig {
    pub fn cbfs(&self) -> &[usize] {
        match self {
            ControllerConfig::SafetyFilter(c) => &c.cbfs,
            ControllerConfig::ClfCbfQp(c) => &c.cbfs,
        }
    }

    pub fn cbfs_mut(&mut self) -> &mut Vec<usize> {
        match self {
            ControllerConfig::SafetyFilter(c) => &mut c.cbfs,
            ControllerConfig::ClfCbfQp(c) => &mut c.cbfs,
        }
    }

    pub fn weight(&self) -> &WeightConfig {
        match self {
            ControllerConfig::SafetyFilter(c) => &c.weight,
            ControllerConfig::ClfCbfQp(c) => &c.weight,
        }
    }

    fn variant(&self) -> &'static str {
        match self {
            ControllerConfig::SafetyFilter(_) => "safety_filter",
            ControllerConfig::ClfCbfQp(_) => "clf_cbf_qp",
        }
    }
}

fn default_cbfs() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyFilterConfig {
    /// Indices into `cbfs` used as constraint rows.
    #[serde(default = "default_cbfs")]
    pub cbfs: Vec<usize>,
    #[serde(default)]
    pub weight: WeightConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfCbfConfig {
    #[serde(default = "default_cbfs")]
    pub cbfs: Vec<usize>,
    #[serde(default)]
    pub weight: WeightConfig,
    /// Penalty `p` on the CLF relaxation.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    #[default]
    Identity,
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Equilibria(EquilibriaTask),
    Jacobians(JacobiansTask),
    Equivalence(EquivalenceTask),
    Field(FieldTask),
    Simulate(SimulateTask),
    Roa(RoaTask),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Equilibria(_) => "equilibria",
            TaskConfig::Jacobians(_) => "jacobians",
            TaskConfig::Equivalence(_) => "equivalence",
            TaskConfig::Field(_) => "field",
            TaskConfig::Simulate(_) => "simulate",
            TaskConfig::Roa(_) => "roa",
        }
    }
}

/// Search box and resolution; defaults to `[−5, 5]ⁿ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds_per_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sweep: Option<usize>,
}

/// Closed-form Jacobians checked against central differences at every
/// boundary equilibrium found by the equilibria search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiansTask {
    #[serde(default = "JacobiansTask::default_step")]
    pub fd_step: f64,
    #[serde(default = "JacobiansTask::default_tol")]
    pub tol: f64,
}

impl JacobiansTask {
    fn default_step() -> f64 {
        1e-5
    }

    fn default_tol() -> f64 {
        1e-5
    }
}

impl Default for JacobiansTask {
    fn default() -> Self {
        Self {
            fd_step: Self::default_step(),
            tol: Self::default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceTask {
    /// Index pairs into `cbfs`.
    pub pairs: Vec<[usize; 2]>,
    #[serde(default = "EquivalenceTask::default_tol")]
    pub tol: f64,
    #[serde(default = "EquivalenceTask::default_samples")]
    pub samples: usize,
}

impl EquivalenceTask {
    fn default_tol() -> f64 {
        1e-8
    }

    fn default_samples() -> usize {
        256
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl From<GridConfig> for barrier_lab_core::GridSpec {
    fn from(g: GridConfig) -> Self {
        Self {
            x_range: g.x_range,
            y_range: g.y_range,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

fn default_field_file() -> String {
    "field.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTask {
    pub grid: GridConfig,
    #[serde(default = "default_field_file")]
    pub file: String,
}

fn default_horizon() -> f64 {
    20.0
}

fn default_dt() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_record_stride() -> usize {
    10
}

fn default_invariance_tol() -> f64 {
    1e-6
}

fn default_prefix() -> String {
    "trajectory".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    #[serde(default)]
    pub initial: Vec<Vec<f64>>,
    /// Extra initial states drawn uniformly from `bounds` and kept when safe.
    #[serde(default)]
    pub random: usize,
    /// Per-coordinate `[low, high]` for random draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_true")]
    pub filtered: bool,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default = "default_invariance_tol")]
    pub invariance_tol: f64,
    /// File name stem of the trajectory CSVs and the run summary.
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_roa_dt() -> f64 {
    1e-2
}

fn default_roa_radius() -> f64 {
    1e-4
}

fn default_roa_file() -> String {
    "roa.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoaTask {
    pub grid: GridConfig,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_roa_dt")]
    pub dt: f64,
    #[serde(default = "default_roa_radius")]
    pub convergence_radius: f64,
    #[serde(default = "default_roa_file")]
    pub file: String,
}

/// Tolerances of the cross-pair comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// CBF indices compared one at a time; all CBFs when empty.
    #[serde(default)]
    pub pairs: Vec<usize>,
    #[serde(default = "CompareConfig::default_equilibria_tol")]
    pub equilibria_tol: f64,
    #[serde(default = "CompareConfig::default_spectral_tol")]
    pub spectral_tol: f64,
    #[serde(default = "CompareConfig::default_field_tol")]
    pub field_tol: f64,
    #[serde(default = "CompareConfig::default_boundary_samples")]
    pub boundary_samples: usize,
}

impl CompareConfig {
    fn default_equilibria_tol() -> f64 {
        1e-6
    }

    fn default_spectral_tol() -> f64 {
        1e-7
    }

    fn default_field_tol() -> f64 {
        1e-9
    }

    fn default_boundary_samples() -> usize {
        512
    }
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            equilibria_tol: Self::default_equilibria_tol(),
            spectral_tol: Self::default_spectral_tol(),
            field_tol: Self::default_field_tol(),
            boundary_samples: Self::default_boundary_samples(),
        }
    }
}

/// Config text with the name used in error messages.
pub struct Source<'a> {
    pub file: &'a str,
    pub text: &'a str,
}

impl Source<'_> {
    /// Validation error anchored at the line of `path`.
    pub fn error(&self, path: &[Segment], message: impl Into<String>) -> CliError {
        let (line, column) = locate(self.text, path).unwrap_or((1, 1));
        CliError::Config {
            file: self.file.to_string(),
            line,
            column,
            field: crate::locate::display_path(path),
            message: message.into(),
        }
    }
}

/// Parses and validates a config from text.
pub fn parse_config(file: &str, text: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config {
            file: file.to_string(),
            line: inner.line(),
            column: inner.column(),
            field: if field == "." { "(root)".into() } else { field },
            message: strip_position(&inner.to_string()),
        }
    })?;
    let source = Source { file, text };
    validate(&config, &source)?;
    Ok(config)
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn key(name: &str) -> Segment {
    Segment::Key(name.to_string())
}

fn idx(i: usize) -> Segment {
    Segment::Index(i)
}

fn path(parts: &[Segment]) -> Vec<Segment> {
    parts.to_vec()
}

fn check_matrix(src: &Source, at: &[Segment], m: &[Vec<f64>], rows: usize, cols: usize) -> Result<(), CliError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        let found = m.iter().map(Vec::len).collect::<Vec<_>>();
        return Err(src.error(at, format!("expected a {rows}x{cols} matrix, got row lengths {found:?}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(src.error(at, "entries must be finite"));
    }
    Ok(())
}

fn check_len(src: &Source, at: &[Segment], v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(src.error(at, format!("expected {n} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(src.error(at, "entries must be finite"));
    }
    Ok(())
}

fn check_positive(src: &Source, at: &[Segment], v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(src.error(at, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_grid(src: &Source, at: &[Segment], g: &GridConfig) -> Result<(), CliError> {
    let grid: barrier_lab_core::GridSpec = (*g).into();
    grid.validate().map_err(|e| src.error(at, e.to_string()))
}

/// State and input dimensions declared by the system block.
pub fn dimensions(system: &SystemConfig) -> (usize, usize) {
    match system {
        SystemConfig::Builtin(b) => (b.dim, b.dim),
        SystemConfig::Linear(l) => (l.a.len(), l.b.first().map_or(0, Vec::len)),
    }
}

/// Structural checks the deserializer cannot express: dimensions, index
/// ranges, signs and required sections.
pub fn validate(cfg: &ScenarioConfig, src: &Source) -> Result<(), CliError> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(src.error(
            &[key("schema_version")],
            format!("unsupported schema version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
        ));
    }
    let (n, m) = dimensions(&cfg.system);
    match &cfg.system {
        SystemConfig::Builtin(b) => {
            if b.dim == 0 {
                return Err(src.error(&[key("system"), key("builtin"), key("dim")], "dimension must be positive"));
            }
        }
        SystemConfig::Linear(l) => {
            let at = [key("system"), key("linear")];
            if n == 0 || m == 0 {
                return Err(src.error(&at, "A and B must be nonempty"));
            }
            check_matrix(src, &path(&[at[0].clone(), at[1].clone(), key("a")]), &l.a, n, n)?;
            check_matrix(src, &path(&[at[0].clone(), at[1].clone(), key("b")]), &l.b, n, m)?;
        }
    }
    if let Some(k) = &cfg.nominal_gain {
        check_matrix(src, &[key("nominal_gain")], k, m, n)?;
    }
    if cfg.cbfs.is_empty() {
        return Err(src.error(&[key("cbfs")], "at least one CBF is required"));
    }
    for (i, cbf) in cfg.cbfs.iter().enumerate() {
        match cbf {
            CbfConfig::Ball(b) => {
                let at = |f: &str| path(&[key("cbfs"), idx(i), key("ball"), key(f)]);
                check_len(src, &at("center"), &b.center, n)?;
                check_positive(src, &at("radius"), b.radius)?;
                check_positive(src, &[at("alpha"), vec![key("linear"), key("slope")]].concat(), b.alpha.slope())?;
            }
            CbfConfig::Transform(t) => {
                let at = |f: &str| path(&[key("cbfs"), idx(i), key("transform"), key(f)]);
                if t.base >= i {
                    return Err(src.error(&at("base"), format!("must refer to an earlier CBF (< {i}), got {}", t.base)));
                }
                if !(t.a >= 0.0 && t.b >= 0.0 && t.a + t.b > 0.0) {
                    return Err(src.error(&at("a"), format!("need a, b ≥ 0 with a + b > 0, got a = {}, b = {}", t.a, t.b)));
                }
                match t.gamma {
                    GammaConfig::Identity => {}
                    GammaConfig::Linear { slope } => check_positive(src, &at("gamma"), slope)?,
                    GammaConfig::Exp { rate } => check_positive(src, &at("gamma"), rate)?,
                }
                match &t.eta {
                    EtaConfig::Constant { value } => check_positive(src, &at("eta"), *value)?,
                    EtaConfig::ShiftedSquare { center, offset } => {
                        let base = [at("eta"), vec![key("shifted_square")]].concat();
                        check_len(src, &[base.clone(), vec![key("center")]].concat(), center, n)?;
                        check_positive(src, &[base, vec![key("offset")]].concat(), *offset)?;
                    }
                }
                if let Some(alpha) = t.alpha {
                    check_positive(src, &at("alpha"), alpha.slope())?;
                }
            }
        }
    }
    if let Some(clf) = &cfg.clf {
        check_matrix(src, &[key("clf"), key("q")], &clf.q, n, n)?;
        check_len(src, &[key("clf"), key("xstar")], &clf.xstar, n)?;
        check_positive(src, &[key("clf"), key("beta")], clf.beta.slope())?;
    }
    let variant = cfg.controller.variant();
    let at = |f: &str| path(&[key("controller"), key(variant), key(f)]);
    if cfg.controller.cbfs().is_empty() {
        return Err(src.error(&at("cbfs"), "at least one CBF index is required"));
    }
    for (j, &c) in cfg.controller.cbfs().iter().enumerate() {
        if c >= cfg.cbfs.len() {
            return Err(src.error(
                &[at("cbfs"), vec![idx(j)]].concat(),
                format!("index {c} out of range for {} CBFs", cfg.cbfs.len()),
            ));
        }
    }
    if let WeightConfig::Matrix(g) = cfg.controller.weight() {
        check_matrix(src, &[at("weight"), vec![key("matrix")]].concat(), g, m, m)?;
    }
    if let ControllerConfig::ClfCbfQp(c) = &cfg.controller {
        check_positive(src, &at("penalty"), c.penalty)?;
        if cfg.clf.is_none() {
            return Err(src.error(&[key("controller")], "clf_cbf_qp needs a `clf` section"));
        }
    }
    if cfg.tasks.is_empty() {
        return Err(src.error(&[key("tasks")], "at least one task is required"));
    }
    for (i, task) in cfg.tasks.iter().enumerate() {
        let at = |f: &str| path(&[key("tasks"), idx(i), key(task.name()), key(f)]);
        match task {
            TaskConfig::Equilibria(t) => {
                if let Some(lo) = &t.lower {
                    check_len(src, &at("lower"), lo, n)?;
                }
                if let Some(hi) = &t.upper {
                    check_len(src, &at("upper"), hi, n)?;
                }
            }
            TaskConfig::Jacobians(t) => {
                check_positive(src, &at("fd_step"), t.fd_step)?;
                check_positive(src, &at("tol"), t.tol)?;
            }
            TaskConfig::Equivalence(t) => {
                for (j, pair) in t.pairs.iter().enumerate() {
                    if let Some(&bad) = pair.iter().find(|&&c| c >= cfg.cbfs.len()) {
                        return Err(src.error(
                            &[at("pairs"), vec![idx(j)]].concat(),
                            format!("index {bad} out of range for {} CBFs", cfg.cbfs.len()),
                        ));
                    }
                }
                check_positive(src, &at("tol"), t.tol)?;
                if t.samples == 0 {
                    return Err(src.error(&at("samples"), "must be positive"));
                }
            }
            TaskConfig::Field(t) => {
                require_planar(src, &at("grid"), n)?;
                check_grid(src, &at("grid"), &t.grid)?;
            }
            TaskConfig::Simulate(t) => {
                for (j, x0) in t.initial.iter().enumerate() {
                    check_len(src, &[at("initial"), vec![idx(j)]].concat(), x0, n)?;
                }
                if t.random > 0 {
                    match &t.bounds {
                        None => return Err(src.error(&at("bounds"), "random initial states need bounds")),
                        Some(b) if b.len() != n || b.iter().any(|r| !(r[0] < r[1])) => {
                            return Err(src.error(&at("bounds"), format!("expected {n} increasing [low, high] ranges")))
                        }
                        _ => {}
                    }
                }
                if t.initial.is_empty() && t.random == 0 {
                    return Err(src.error(&at("initial"), "no initial states given"));
                }
                check_positive(src, &at("dt"), t.dt)?;
                if !(t.horizon >= t.dt) {
                    return Err(src.error(&at("horizon"), "horizon must be at least dt"));
                }
            }
            TaskConfig::Roa(t) => {
                require_planar(src, &at("grid"), n)?;
                check_grid(src, &at("grid"), &t.grid)?;
                check_positive(src, &at("dt"), t.dt)?;
                check_positive(src, &at("convergence_radius"), t.convergence_radius)?;
                if !(t.horizon >= t.dt) {
                    return Err(src.error(&at("horizon"), "horizon must be at least dt"));
                }
            }
        }
    }
    if let Some(c) = &cfg.compare {
        for (j, &p) in c.pairs.iter().enumerate() {
            if p >= cfg.cbfs.len() {
                return Err(src.error(
                    &[key("compare"), key("pairs"), idx(j)],
                    format!("index {p} out of range for {} CBFs", cfg.cbfs.len()),
                ));
            }
        }
    }
    Ok(())
}

fn require_planar(src: &Source, at: &[Segment], n: usize) -> Result<(), CliError> {
    if n != 2 {
        return Err(src.error(at, format!("grids need a planar system, state dimension is {n}")));
    }
    Ok(())
}
