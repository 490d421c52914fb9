//! Fixtures shared by the benchmarks.

use barrier_lab_core::model::{make_ball_cbf, transform_cbf};
use barrier_lab_core::{
    BallForm, BarrierPair, ClassK, Controller, InputWeight, LyapunovPair, Matrix, PositiveWeight, SystemModel,
    TransformStep, Vector,
};

pub fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

/// `h = ‖x − (2,0)‖² − 1`, optionally weighted by `‖x − (5,1)‖² + 1`.
pub fn ball_cbf(weighted: bool, slope: f64) -> BarrierPair {
    let h = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, slope).unwrap();
    if !weighted {
        return h;
    }
    let eta = PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap();
    transform_cbf(&h, &TransformStep::weighted(1.0, eta)).unwrap()
}

/// Safety filter on `ẋ = u` with nominal `k(x) = diag(−1, −5)x`.
pub fn safety_filter(weighted: bool, slope: f64) -> Controller {
    let model = SystemModel::single_integrator(2)
        .with_linear_feedback(Matrix::from_diagonal(&v2(-1.0, -5.0)))
        .unwrap();
    Controller::safety_filter(model, ball_cbf(weighted, slope), InputWeight::Identity(2)).unwrap()
}

/// CLF-CBF QP on `ẋ = u` with `V = xᵀdiag(6,1)x` and the half-ball at (0,3).
pub fn clf_cbf() -> Controller {
    let clf = LyapunovPair::quadratic(Matrix::from_diagonal(&v2(6.0, 1.0)), v2(0.0, 0.0), ClassK::identity()).unwrap();
    let cbf = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, 1.0).unwrap();
    Controller::clf_cbf(SystemModel::single_integrator(2), cbf, clf, InputWeight::Identity(2), 1.0).unwrap()
}
