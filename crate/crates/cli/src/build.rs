//! Turns a validated config into models, CBF pairs and a controller.

use barrier_lab_core::model::{make_ball_cbf, transform_cbf};
use barrier_lab_core::{
    BarrierPair, ClassK, Controller, ControllerFamily, Gamma, InputWeight, LyapunovPair, Matrix, PositiveWeight,
    SystemModel, TransformStep, Vector,
};

use crate::builtin::to_json;
use crate::config::*;
use crate::error::CliError;
use crate::locate::Segment;

/// Everything a run needs, built once per config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: SystemModel,
    pub cbfs: Vec<BarrierPair>,
    pub clf: Option<LyapunovPair>,
    pub weight: InputWeight,
    pub controller: Controller,
}

impl Scenario {
    /// Same controller family and weight, constrained by `indices` instead.
    pub fn controller_for(&self, indices: &[usize]) -> Result<Controller, barrier_lab_core::Error> {
        Controller::new(
            self.model.clone(),
            indices.iter().map(|&i| self.cbfs[i].clone()).collect(),
            self.controller.family().clone(),
            self.weight.clone(),
        )
    }

    pub fn cbf_label(&self, index: usize) -> String {
        self.cbfs[index].label().to_string()
    }

    /// Labels of the CBFs wired into the controller.
    pub fn active_labels(&self) -> Vec<String> {
        self.config.controller.cbfs().iter().map(|&i| self.cbf_label(i)).collect()
    }
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    let ncols = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

fn key(name: &str) -> Segment {
    Segment::Key(name.to_string())
}

fn alpha(a: &AlphaConfig) -> Result<ClassK, barrier_lab_core::Error> {
    ClassK::linear(a.slope())
}

/// Builds a config whose text is its own serialization.
pub fn build(config: &ScenarioConfig) -> Result<Scenario, CliError> {
    let text = to_json(config);
    build_with_source(config, &Source {
        file: &config.name,
        text: &text,
    })
}

/// Builds a parsed config; constructor failures are reported against the
/// field that produced them.
pub fn build_with_source(config: &ScenarioConfig, src: &Source) -> Result<Scenario, CliError> {
    let fail = |path: Vec<Segment>| move |e: barrier_lab_core::Error| src.error(&path, e.to_string());

    let mut model = match &config.system {
        SystemConfig::Builtin(b) => match b.name {
            BuiltinSystemName::SingleIntegrator => SystemModel::single_integrator(b.dim),
        },
        SystemConfig::Linear(l) => SystemModel::linear(matrix(&l.a), matrix(&l.b))
            .map_err(fail(vec![key("system"), key("linear")]))?,
    };
    if let Some(k) = &config.nominal_gain {
        model = model.with_linear_feedback(matrix(k)).map_err(fail(vec![key("nominal_gain")]))?;
    }

    let mut cbfs: Vec<BarrierPair> = Vec::with_capacity(config.cbfs.len());
    for (i, cbf) in config.cbfs.iter().enumerate() {
        let at = |f: &str, variant: &str| vec![key("cbfs"), Segment::Index(i), key(variant), key(f)];
        let pair = match cbf {
            CbfConfig::Ball(b) => make_ball_cbf(&vector(&b.center), b.radius, b.form, b.alpha.slope())
                .map_err(fail(at("radius", "ball")))?,
            CbfConfig::Transform(t) => {
                let gamma = match t.gamma {
                    GammaConfig::Identity => Gamma::identity(),
                    GammaConfig::Linear { slope } => Gamma::linear(slope).map_err(fail(at("gamma", "transform")))?,
                    GammaConfig::Exp { rate } => Gamma::exp(rate).map_err(fail(at("gamma", "transform")))?,
                };
                let eta = match &t.eta {
                    EtaConfig::Constant { value } => PositiveWeight::constant(model.state_dim(), *value),
                    EtaConfig::ShiftedSquare { center, offset } => {
                        PositiveWeight::shifted_square(vector(center), *offset)
                    }
                }
                .map_err(fail(at("eta", "transform")))?;
                let mut step = TransformStep::weighted(t.b, eta);
                step.a = t.a;
                step.gamma = gamma;
                if let Some(a) = &t.alpha {
                    step = step.with_alpha(alpha(a).map_err(fail(at("alpha", "transform")))?);
                }
                transform_cbf(&cbfs[t.base], &step).map_err(fail(at("base", "transform")))?
            }
        };
        cbfs.push(match cbf.label() {
            Some(label) => pair.with_label(label),
            None => pair,
        });
    }

    let clf = match &config.clf {
        Some(c) => Some(
            LyapunovPair::quadratic(
                matrix(&c.q),
                vector(&c.xstar),
                alpha(&c.beta).map_err(fail(vec![key("clf"), key("beta")]))?,
            )
            .map_err(fail(vec![key("clf"), key("q")]))?,
        ),
        None => None,
    };

    let m = model.input_dim();
    let (variant, family) = match &config.controller {
        ControllerConfig::SafetyFilter(_) => ("safety_filter", ControllerFamily::SafetyFilter),
        ControllerConfig::ClfCbfQp(c) => (
            "clf_cbf_qp",
            ControllerFamily::ClfCbfQp {
                clf: clf.clone().expect("validated: clf_cbf_qp has a clf"),
                penalty: c.penalty,
            },
        ),
    };
    let weight = match config.controller.weight() {
        WeightConfig::Identity => InputWeight::Identity(m),
        WeightConfig::Matrix(g) => {
            let w = InputWeight::Constant(matrix(g));
            w.inverse(&Vector::zeros(model.state_dim()))
                .map_err(fail(vec![key("controller"), key(variant), key("weight")]))?;
            w
        }
    };
    let controller = Controller::new(
        model.clone(),
        config.controller.cbfs().iter().map(|&i| cbfs[i].clone()).collect(),
        family,
        weight.clone(),
    )
    .map_err(fail(vec![key("controller")]))?;

    Ok(Scenario {
        config: config.clone(),
        model,
        cbfs,
        clf,
        weight,
        controller,
    })
}

/// Loads, validates and builds a config file.
pub fn load(path: &std::path::Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = path.display().to_string();
    let config = parse_config(&file, &text)?;
    build_with_source(&config, &Source { file: &file, text: &text })
}
