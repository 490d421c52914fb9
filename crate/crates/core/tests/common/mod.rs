#![allow(dead_code)]

use barrier_lab_core::model::{make_ball_cbf, transform_cbf};
use barrier_lab_core::{
    BallForm, BarrierPair, ClassK, Controller, InputWeight, LyapunovPair, Matrix, PositiveWeight, SystemModel,
    TransformStep, Vector,
};

pub fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

/// `‖x − (5,1)‖² + 1`
pub fn eta() -> PositiveWeight {
    PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap()
}

pub fn fig3_model() -> SystemModel {
    SystemModel::single_integrator(2)
        .with_linear_feedback(Matrix::from_diagonal(&v2(-1.0, -5.0)))
        .unwrap()
}

/// `h₁ = ‖x − (2,0)‖² − 1` or `h₂ = η·h₁`, with `α(s) = slope·s`.
pub fn fig3_cbf(weighted: bool, slope: f64) -> BarrierPair {
    let h1 = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, slope).unwrap();
    if weighted {
        transform_cbf(&h1, &TransformStep::weighted(1.0, eta())).unwrap()
    } else {
        h1
    }
}

pub fn fig3(weighted: bool, slope: f64) -> Controller {
    Controller::safety_filter(fig3_model(), fig3_cbf(weighted, slope), InputWeight::Identity(2)).unwrap()
}

pub fn fig3_variants() -> Vec<(String, Controller)> {
    [(false, 1.0), (true, 1.0), (false, 10.0), (true, 10.0)]
        .into_iter()
        .map(|(w, s)| (format!("fig3-h{}a{}", if w { 2 } else { 1 }, if s == 1.0 { 1 } else { 2 }), fig3(w, s)))
        .collect()
}

pub fn fig2_clf() -> LyapunovPair {
    LyapunovPair::quadratic(Matrix::from_diagonal(&v2(6.0, 1.0)), v2(0.0, 0.0), ClassK::identity()).unwrap()
}

pub fn fig2_cbf(weighted: bool, slope: f64) -> BarrierPair {
    let h1 = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, slope).unwrap();
    if weighted {
        transform_cbf(&h1, &TransformStep::weighted(1.0, eta())).unwrap()
    } else {
        h1
    }
}

pub fn fig2(weighted: bool, slope: f64) -> Controller {
    Controller::clf_cbf(
        SystemModel::single_integrator(2),
        fig2_cbf(weighted, slope),
        fig2_clf(),
        InputWeight::Identity(2),
        1.0,
    )
    .unwrap()
}

pub fn fig2_variants() -> Vec<(String, Controller)> {
    vec![("fig2-h1a1".into(), fig2(false, 1.0)), ("fig2-h2a2".into(), fig2(true, 10.0))]
}

pub fn fig3_golden() -> Vec<Vector> {
    let s = 3f64.sqrt() / 2.0;
    vec![v2(2.5, -s), v2(2.5, s), v2(3.0, 0.0)]
}

pub fn fig2_golden() -> Vec<Vector> {
    let s = 1.89f64.sqrt();
    vec![v2(-s, 3.6), v2(0.0, 4.5), v2(s, 3.6)]
}
