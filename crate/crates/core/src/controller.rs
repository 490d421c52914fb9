//! Closed-loop controllers assembled from a model, CBF rows and a weight.

use crate::model::{BarrierPair, LyapunovPair, SystemModel};
use crate::qp::{self, InputWeight, KktPoint, QpProblem};
use crate::{Error, Result, Vector};

/// Which optimization-based controller is applied on top of the nominal.
#[derive(Debug, Clone)]
pub enum ControllerFamily {
    /// `min ‖u‖²_G` subject to the CBF rows.
    SafetyFilter,
    /// Relaxed CLF row plus CBF rows, `min ½‖u‖²_G + ½pδ²`.
    ClfCbfQp { clf: LyapunovPair, penalty: f64 },
}

impl ControllerFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerFamily::SafetyFilter => "safety_filter",
            ControllerFamily::ClfCbfQp { .. } => "clf_cbf_qp",
        }
    }
}

/// Controller output at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Correction `v` from the QP, applied on top of the nominal input.
    pub correction: Vector,
    /// Total input `k(x) + v`.
    pub applied: Vector,
    pub kkt: KktPoint,
}

impl ControlOutput {
    /// Bitmask of active rows.
    pub fn active_code(&self) -> u32 {
        self.kkt.active_set.iter().fold(0, |acc, &i| acc | (1 << i))
    }
}

/// A safety filter or CLF-CBF QP bound to a model and CBF list.
///
/// With a single CBF the closed forms are used; several CBFs go through the
/// generic active-set solver.
#[derive(Debug, Clone)]
pub struct Controller {
    model: SystemModel,
    cbfs: Vec<BarrierPair>,
    family: ControllerFamily,
    weight: InputWeight,
    problem: QpProblem,
}

impl Controller {
    pub fn new(model: SystemModel, cbfs: Vec<BarrierPair>, family: ControllerFamily, weight: InputWeight) -> Result<Self> {
        if cbfs.is_empty() {
            return Err(Error::InvalidParameter("controller needs at least one CBF".into()));
        }
        let problem = match &family {
            ControllerFamily::SafetyFilter => QpProblem::safety_filter(&model, &cbfs, &weight)?,
            ControllerFamily::ClfCbfQp { clf, penalty } => {
                if clf.xstar().len() != model.state_dim() {
                    return Err(Error::dim("xstar", model.state_dim(), clf.xstar().len()));
                }
                QpProblem::clf_cbf(&model, &cbfs, clf, &weight, *penalty)?
            }
        };
        Ok(Self {
            model,
            cbfs,
            family,
            weight,
            problem,
        })
    }

    pub fn safety_filter(model: SystemModel, cbf: BarrierPair, weight: InputWeight) -> Result<Self> {
        Self::new(model, vec![cbf], ControllerFamily::SafetyFilter, weight)
    }

    pub fn clf_cbf(model: SystemModel, cbf: BarrierPair, clf: LyapunovPair, weight: InputWeight, penalty: f64) -> Result<Self> {
        Self::new(model, vec![cbf], ControllerFamily::ClfCbfQp { clf, penalty }, weight)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn cbfs(&self) -> &[BarrierPair] {
        &self.cbfs
    }

    pub fn family(&self) -> &ControllerFamily {
        &self.family
    }

    pub fn weight(&self) -> &InputWeight {
        &self.weight
    }

    /// The generic QP solved by [`Controller::evaluate_generic`].
    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    /// Same controller with CBF `index` swapped out.
    pub fn with_cbf(&self, index: usize, cbf: BarrierPair) -> Result<Self> {
        let mut cbfs = self.cbfs.clone();
        cbfs[index] = cbf;
        Self::new(self.model.clone(), cbfs, self.family.clone(), self.weight.clone())
    }

    /// Index of the first CBF row in the generic problem.
    pub fn cbf_row_offset(&self) -> usize {
        match self.family {
            ControllerFamily::SafetyFilter => 0,
            ControllerFamily::ClfCbfQp { .. } => 1,
        }
    }

    fn output(&self, x: &Vector, kkt: KktPoint) -> ControlOutput {
        let applied = self.model.nominal(x) + &kkt.u;
        ControlOutput {
            correction: kkt.u.clone(),
            applied,
            kkt,
        }
    }

    pub fn evaluate(&self, x: &Vector) -> Result<ControlOutput> {
        if self.cbfs.len() > 1 {
            return self.evaluate_generic(x);
        }
        let cbf = &self.cbfs[0];
        let kkt = match &self.family {
            ControllerFamily::SafetyFilter => qp::safety_filter(&self.model, cbf, &self.weight, x)?.to_kkt(),
            ControllerFamily::ClfCbfQp { clf, penalty } => {
                qp::clf_cbf_qp(&self.model, cbf, clf, &self.weight, *penalty, x)?
            }
        };
        Ok(self.output(x, kkt))
    }

    /// Evaluation through the active-set solver regardless of row count.
    pub fn evaluate_generic(&self, x: &Vector) -> Result<ControlOutput> {
        let kkt = qp::solve_small_qp(&self.problem, x)?;
        Ok(self.output(x, kkt))
    }

    /// Controller with every CBF row removed.
    pub fn evaluate_unfiltered(&self, x: &Vector) -> Result<ControlOutput> {
        let kkt = match &self.family {
            ControllerFamily::SafetyFilter => KktPoint {
                u: Vector::zeros(self.model.input_dim()),
                delta: 0.0,
                multipliers: vec![],
                active_set: vec![],
                stationarity_residual: 0.0,
            },
            ControllerFamily::ClfCbfQp { clf, penalty } => {
                qp::unfiltered_control(&self.model, clf, &self.weight, *penalty, x)?
            }
        };
        Ok(self.output(x, kkt))
    }

    /// Closed-loop velocity `f + g(k + v)`.
    pub fn field(&self, x: &Vector) -> Result<Vector> {
        if self.cbfs.len() > 1 {
            let out = self.evaluate_generic(x)?;
            return Ok(self.model.drift(x) + self.model.input_matrix(x) * out.applied);
        }
        let drift = self.model.closed_drift(x);
        let g = self.model.input_matrix(x);
        let cbf = &self.cbfs[0];
        let u = match &self.family {
            ControllerFamily::SafetyFilter => qp::safety_filter_at(&self.model, cbf, &self.weight, x, &drift, &g)?.u,
            ControllerFamily::ClfCbfQp { clf, penalty } => {
                qp::clf_cbf_qp_at(&self.model, cbf, clf, &self.weight, *penalty, x, &drift, &g)?.u
            }
        };
        Ok(drift + g * u)
    }

    /// Velocity of the unfiltered closed loop.
    pub fn unfiltered_field(&self, x: &Vector) -> Result<Vector> {
        let out = self.evaluate_unfiltered(x)?;
        Ok(self.model.drift(x) + self.model.input_matrix(x) * out.applied)
    }

    /// Smallest CBF value at `x`.
    pub fn min_h(&self, x: &Vector) -> f64 {
        self.cbfs.iter().map(|c| c.value(x)).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ball_cbf, BallForm};
    use crate::Matrix;

    #[test]
    fn fig3_field_vanishes_at_boundary_equilibrium() {
        let model = SystemModel::single_integrator(2)
            .with_linear_feedback(Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -5.0])))
            .unwrap();
        let cbf = make_ball_cbf(&Vector::from_vec(vec![2.0, 0.0]), 1.0, BallForm::Full, 1.0).unwrap();
        let ctrl = Controller::safety_filter(model, cbf, InputWeight::Identity(2)).unwrap();
        let x = Vector::from_vec(vec![3.0, 0.0]);
        assert_eq!(ctrl.field(&x).unwrap().norm(), 0.0);
        assert_eq!(ctrl.unfiltered_field(&x).unwrap(), Vector::from_vec(vec![-3.0, 0.0]));
        let generic = ctrl.evaluate_generic(&x).unwrap();
        assert!((generic.applied - ctrl.evaluate(&x).unwrap().applied).norm() < 1e-12);
        assert_eq!(ctrl.evaluate(&x).unwrap().active_code(), 1);
    }
}
