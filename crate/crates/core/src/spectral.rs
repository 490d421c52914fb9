//! Closed-form boundary Jacobians, characteristic polynomials, eigenvalues
//! and stability labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{central_jacobian, max_abs};
use crate::model::{BarrierPair, LyapunovPair, SystemModel};
use crate::qp::{clf_cbf_terms, InputWeight};
use crate::{Complex, Error, Matrix, Result, Vector};

/// Real parts within this distance of zero make a label inconclusive.
pub const STABILITY_TOL: f64 = 1e-8;
/// Tolerance of the `D` constancy check.
pub const D_CONSTANT_TOL: f64 = 1e-10;
/// Largest remainder of the division by `(s + α'(0))` still accepted.
pub const FACTOR_TOL: f64 = 1e-6;
/// Largest supported state dimension.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
    Saddle,
    Inconclusive,
}

impl Stability {
    pub fn from_eigenvalues(eigenvalues: &[Complex]) -> Self {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|z| z.re.abs() <= STABILITY_TOL) {
            return Stability::Inconclusive;
        }
        let negative = eigenvalues.iter().filter(|z| z.re < 0.0).count();
        if negative == eigenvalues.len() {
            Stability::AsymptoticallyStable
        } else if negative == 0 {
            Stability::Unstable
        } else {
            Stability::Saddle
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::AsymptoticallyStable => "asymptotically_stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::Inconclusive => "inconclusive",
        }
    }
}

/// Jacobian, spectrum and factorization data at one equilibrium.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectralResult {
    #[serde(serialize_with = "crate::ser::matrix")]
    pub jacobian: Matrix,
    /// Monic characteristic polynomial, highest degree first.
    pub char_poly: Vec<f64>,
    #[serde(serialize_with = "crate::ser::complexes")]
    pub eigenvalues: Vec<Complex>,
    /// `−α'(0)` when a structural factor is expected.
    pub known_factor_root: Option<f64>,
    /// Quotient of `char_poly` by `(s + α'(0))`, highest degree first.
    pub reduced_poly: Option<Vec<f64>>,
    pub factor_remainder: Option<f64>,
    pub stability: Stability,
}

/// Central-difference Jacobian with per-coordinate step `step·(1 + |xᵢ|)`.
pub fn fd_jacobian(field: impl Fn(&Vector) -> Vector, x: &Vector, step: f64) -> Matrix {
    central_jacobian(field, x, step)
}

/// `D(x) = g G⁻¹ gᵀ`.
pub fn d_matrix(model: &SystemModel, weight: &InputWeight, x: &Vector) -> Result<Matrix> {
    let g = model.input_matrix(x);
    Ok(&g * weight.inverse(x)? * g.transpose())
}

/// Checks that `D` is the same at every sample and returns it.
pub fn check_constant_d(model: &SystemModel, weight: &InputWeight, samples: &[Vector]) -> Result<Matrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("D constancy check needs samples".into()))?;
    let d0 = d_matrix(model, weight, first)?;
    let mut deviation = 0.0_f64;
    for x in &samples[1..] {
        deviation = deviation.max(max_abs(&(d_matrix(model, weight, x)? - &d0)));
    }
    if deviation > D_CONSTANT_TOL {
        return Err(Error::NonConstantD { deviation });
    }
    Ok(d0)
}

/// 16 deterministic probes in the box `center ± half_width`, plus the center.
pub fn d_probe_samples(center: &Vector, half_width: f64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0d);
    let mut out = vec![center.clone()];
    out.extend((0..16).map(|_| center.map(|c| c + rng.gen_range(-half_width..=half_width))));
    out
}

fn boundary_guard(cbf: &BarrierPair, x: &Vector) -> Result<()> {
    let h = cbf.value(x);
    if h.abs() >= 1e-9 {
        return Err(Error::NotOnBoundary { h });
    }
    Ok(())
}

/// Collinearity factor `δ` with `f̃ = δ D∇h`, fitted by least squares.
pub fn safety_filter_delta(model: &SystemModel, cbf: &BarrierPair, weight: &InputWeight, x: &Vector) -> Result<f64> {
    let ddh = d_matrix(model, weight, x)? * cbf.gradient(x);
    let nn = ddh.norm_squared();
    if nn.sqrt() <= 1e-12 {
        return Err(Error::StrictFeasibility { norm: nn.sqrt() });
    }
    Ok(ddh.dot(&model.closed_drift(x)) / nn)
}

/// Closed-form Jacobian of the safety-filtered loop at a boundary
/// equilibrium:
///
/// ```text
/// J = J_f̃ − D∇h∇hᵀ(J_f̃ + α'(0)I)/N − D(∇hᵀf̃·I − ∇h f̃ᵀ)H_h/N,   N = ∇hᵀD∇h
/// ```
pub fn jacobian_safety_filter_boundary(
    model: &SystemModel,
    cbf: &BarrierPair,
    weight: &InputWeight,
    x_star: &Vector,
) -> Result<Matrix> {
    boundary_guard(cbf, x_star)?;
    let d = check_constant_d(model, weight, &d_probe_samples(x_star, 5.0))?;
    let delta = safety_filter_delta(model, cbf, weight, x_star)?;
    if delta >= -1e-8 {
        return Err(Error::Precondition(format!(
            "safety-filter Jacobian needs δ_sf < −1e-8, got {delta:e}"
        )));
    }
    let n = model.state_dim();
    let eye = Matrix::identity(n, n);
    let jft = model.closed_drift_jacobian(x_star);
    let ft = model.closed_drift(x_star);
    let gh = cbf.gradient(x_star);
    let hh = cbf.hessian(x_star);
    let dgh = &d * &gh;
    let nn = gh.dot(&dgh);
    let a0 = cbf.alpha_prime0();
    let term2 = &dgh * gh.transpose() * (&jft + &eye * a0) / nn;
    let term3 = &d * (&eye * gh.dot(&ft) - &gh * ft.transpose()) * hh / nn;
    Ok(jft - term2 - term3)
}

/// Closed-form Jacobian of the CLF-CBF loop at an undesirable boundary
/// equilibrium with both rows strictly active:
///
/// ```text
/// J = J_f̃ + P − □₁(a + ∇VᵀP)/|Δ| − □₂(b + ∇hᵀP)/|Δ|
/// a = ∇VᵀJ_f̃ + β'(V)∇Vᵀ,   b = ∇hᵀJ_f̃ + α'(0)∇hᵀ,   P = −λ₁DH_V + λ₂DH_h
/// □₁ = Δ₂₂D∇V + Δ₂₁D∇h,     □₂ = Δ₁₂D∇V + Δ₁₁D∇h
/// ```
pub fn jacobian_clf_cbf_boundary(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    p: f64,
    x_star: &Vector,
) -> Result<Matrix> {
    boundary_guard(cbf, x_star)?;
    let d = check_constant_d(model, weight, &d_probe_samples(x_star, 5.0))?;
    let terms = clf_cbf_terms(model, cbf, clf, weight, x_star)?;
    let (l1, l2, det) = terms.both_active(p);
    if !(l1 > 1e-8 && l2 > 1e-8) {
        return Err(Error::Precondition(format!(
            "CLF-CBF Jacobian needs λ₁, λ₂ > 1e-8, got ({l1:e}, {l2:e})"
        )));
    }
    let delta = terms.delta_matrix(p);
    let jft = model.closed_drift_jacobian(x_star);
    let gv = clf.gradient(x_star);
    let gh = cbf.gradient(x_star);
    let dgv = &d * &gv;
    let dgh = &d * &gh;
    let a = gv.transpose() * &jft + gv.transpose() * clf.beta().derivative(clf.value(x_star));
    let b = gh.transpose() * &jft + gh.transpose() * cbf.alpha_prime0();
    let pm = &d * clf.hessian(x_star) * (-l1) + &d * cbf.hessian(x_star) * l2;
    let box1 = &dgv * delta[(1, 1)] + &dgh * delta[(1, 0)];
    let box2 = &dgv * delta[(0, 1)] + &dgh * delta[(0, 0)];
    let row1 = a + gv.transpose() * &pm;
    let row2 = b + gh.transpose() * &pm;
    Ok(jft + pm - box1 * row1 / det - box2 * row2 / det)
}

/// Monic characteristic polynomial of `a` by Faddeev–LeVerrier, highest
/// degree first.
pub fn characteristic_polynomial(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let eye = Matrix::identity(n, n);
    let mut mk = Matrix::zeros(n, n);
    for k in 1..=n {
        mk = a * &mk + &eye * coeffs[k - 1];
        coeffs[k] = -(a * &mk).trace() / k as f64;
    }
    coeffs
}

/// Horner evaluation, coefficients highest degree first.
pub fn poly_eval(coeffs: &[f64], z: Complex) -> Complex {
    coeffs.iter().fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn poly_eval_with_derivative(coeffs: &[f64], z: Complex) -> (Complex, Complex) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of a monic real polynomial by the Aberth–Ehrlich iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex>> {
    let deg = coeffs.len().saturating_sub(1);
    match deg {
        0 => return Ok(vec![]),
        1 => return Ok(vec![Complex::new(-coeffs[1] / coeffs[0], 0.0)]),
        _ => {}
    }
    let radius = 1.0 + coeffs[1..].iter().fold(0.0_f64, |acc, c| acc.max((c / coeffs[0]).abs()));
    let mut z: Vec<Complex> = (0..deg)
        .map(|k| Complex::from_polar(radius, std::f64::consts::TAU * k as f64 / deg as f64 + 0.4))
        .collect();
    let backward = |z: Complex| coeffs.iter().fold(0.0, |acc, c| acc * z.norm() + c.abs());
    for _ in 0..200 {
        let mut max_step = 0.0_f64;
        for i in 0..deg {
            let (p, dp) = poly_eval_with_derivative(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex = (0..deg).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            if w.is_finite() {
                z[i] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        let settled = z.iter().all(|&zi| poly_eval(coeffs, zi).norm() <= 1e-14 * backward(zi));
        if max_step < 1e-12 || settled {
            return Ok(canonical_roots(z));
        }
    }
    let residual = z.iter().map(|&zi| poly_eval(coeffs, zi).norm()).fold(0.0, f64::max);
    Err(Error::Convergence {
        what: "Aberth–Ehrlich root finding".into(),
        residual,
    })
}

fn canonical_roots(mut z: Vec<Complex>) -> Vec<Complex> {
    for zi in &mut z {
        if zi.im.abs() <= 1e-10 * (1.0 + zi.re.abs()) {
            zi.im = 0.0;
        }
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    z
}

/// Synthetic division of `coeffs` by `(s − root)`; returns the quotient and
/// the remainder.
pub fn deflate(coeffs: &[f64], root: f64) -> (Vec<f64>, f64) {
    let mut quotient = Vec::with_capacity(coeffs.len().saturating_sub(1));
    let mut acc = 0.0;
    for (i, &c) in coeffs.iter().enumerate() {
        acc = acc * root + c;
        if i + 1 < coeffs.len() {
            quotient.push(acc);
        }
    }
    (quotient, acc)
}

/// Characteristic polynomial, eigenvalues, optional structural factor
/// `(s + α'(0))`, and stability label.
pub fn eigen_and_classify(j: &Matrix, alpha_prime0: Option<f64>) -> Result<SpectralResult> {
    if !j.is_square() {
        return Err(Error::dim("jacobian", "square matrix", format!("{}x{}", j.nrows(), j.ncols())));
    }
    if j.nrows() > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue analysis supports n ≤ {MAX_DIM}, got {}",
            j.nrows()
        )));
    }
    let char_poly = characteristic_polynomial(j);
    let eigenvalues = polynomial_roots(&char_poly)?;
    let stability = Stability::from_eigenvalues(&eigenvalues);
    let (reduced_poly, factor_remainder) = match alpha_prime0 {
        Some(a) => {
            let (q, r) = deflate(&char_poly, -a);
            (Some(q), Some(r.abs()))
        }
        None => (None, None),
    };
    Ok(SpectralResult {
        jacobian: j.clone(),
        char_poly,
        eigenvalues,
        known_factor_root: alpha_prime0.map(|a| -a),
        reduced_poly,
        factor_remainder,
        stability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum InvarianceVerdict {
    Pass { max_difference: f64 },
    Fail { max_difference: f64 },
    FactorizationFailure { remainder: f64 },
}

impl InvarianceVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, InvarianceVerdict::Pass { .. })
    }
}

/// Compares the reduced characteristic polynomials of two Jacobians at the
/// same equilibrium.
pub fn spectral_invariance_check(j1: &Matrix, alpha1_prime0: f64, j2: &Matrix, alpha2_prime0: f64, tol: f64) -> InvarianceVerdict {
    let (q1, r1) = deflate(&characteristic_polynomial(j1), -alpha1_prime0);
    let (q2, r2) = deflate(&characteristic_polynomial(j2), -alpha2_prime0);
    let remainder = r1.abs().max(r2.abs());
    if remainder > FACTOR_TOL {
        return InvarianceVerdict::FactorizationFailure { remainder };
    }
    reduced_poly_verdict(&q1, &q2, tol)
}

/// Coefficient-wise comparison of two reduced polynomials.
pub fn reduced_poly_verdict(q1: &[f64], q2: &[f64], tol: f64) -> InvarianceVerdict {
    if q1.len() != q2.len() {
        return InvarianceVerdict::Fail {
            max_difference: f64::INFINITY,
        };
    }
    let max_difference = q1.iter().zip(q2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if max_difference < tol {
        InvarianceVerdict::Pass { max_difference }
    } else {
        InvarianceVerdict::Fail { max_difference }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ball_cbf, transform_cbf, BallForm, ClassK, PositiveWeight, TransformStep};

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn fig3_model() -> SystemModel {
        SystemModel::single_integrator(2)
            .with_linear_feedback(Matrix::from_diagonal(&v2(-1.0, -5.0)))
            .unwrap()
    }

    #[test]
    fn fd_jacobian_of_linear_fields() {
        let j = fd_jacobian(|x| -x, &v2(0.3, -2.0), 1e-5);
        assert!(max_abs(&(j + Matrix::identity(2, 2))) < 1e-10);
        let j = fd_jacobian(|x| v2(x[1], -x[0]), &v2(1.0, 1.0), 1e-5);
        assert!(max_abs(&(j - Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))) < 1e-10);
    }

    #[test]
    fn diagonal_spectrum() {
        let r = eigen_and_classify(&Matrix::from_diagonal(&v2(-1.0, -5.0)), Some(1.0)).unwrap();
        assert_eq!(r.char_poly, vec![1.0, 6.0, 5.0]);
        assert!((r.eigenvalues[0].re + 5.0).abs() < 1e-12);
        assert!((r.eigenvalues[1].re + 1.0).abs() < 1e-12);
        assert_eq!(r.stability, Stability::AsymptoticallyStable);
        assert_eq!(r.reduced_poly, Some(vec![1.0, 5.0]));
        assert_eq!(r.factor_remainder, Some(0.0));
    }

    #[test]
    fn rotation_is_inconclusive() {
        let r = eigen_and_classify(&Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), None).unwrap();
        assert_eq!(r.stability, Stability::Inconclusive);
        for z in &r.eigenvalues {
            assert!((z.im.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_roots_converge() {
        let r = eigen_and_classify(&(Matrix::identity(3, 3) * -2.0), None).unwrap();
        for z in &r.eigenvalues {
            assert!((z - Complex::new(-2.0, 0.0)).norm() < 1e-4);
            assert!(poly_eval(&r.char_poly, *z).norm() < 1e-8);
        }
        assert_eq!(r.stability, Stability::AsymptoticallyStable);
    }

    #[test]
    fn labels() {
        let c = |re: f64| Complex::new(re, 0.0);
        assert_eq!(Stability::from_eigenvalues(&[c(-1.0), c(2.0)]), Stability::Saddle);
        assert_eq!(Stability::from_eigenvalues(&[c(1.0), c(2.0)]), Stability::Unstable);
        assert_eq!(Stability::from_eigenvalues(&[c(-1.0), c(1e-9)]), Stability::Inconclusive);
    }

    #[test]
    fn safety_filter_jacobian_fig3() {
        let model = fig3_model();
        let cbf = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let w = InputWeight::Identity(2);
        let x = v2(3.0, 0.0);
        assert_eq!(safety_filter_delta(&model, &cbf, &w, &x).unwrap(), -1.5);
        let j = jacobian_safety_filter_boundary(&model, &cbf, &w, &x).unwrap();
        assert!(max_abs(&(&j - Matrix::from_diagonal(&v2(-1.0, -2.0)))) < 1e-14);
        let r = eigen_and_classify(&j, Some(1.0)).unwrap();
        assert_eq!(r.stability, Stability::AsymptoticallyStable);
    }

    #[test]
    fn reduced_polynomial_invariant_under_transform() {
        let model = fig3_model();
        let h1 = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let eta = PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap();
        let h2 = transform_cbf(&h1, &TransformStep::weighted(1.0, eta).with_alpha(ClassK::linear(10.0).unwrap())).unwrap();
        let w = InputWeight::Identity(2);
        let x = v2(3.0, 0.0);
        let j1 = jacobian_safety_filter_boundary(&model, &h1, &w, &x).unwrap();
        let j2 = jacobian_safety_filter_boundary(&model, &h2, &w, &x).unwrap();
        assert!(spectral_invariance_check(&j1, 1.0, &j2, 10.0, 1e-7).passed());
        assert!(spectral_invariance_check(&j1, 1.0, &j1, 1.0, 1e-7).passed());
        let mut bad = j2.clone();
        bad[(1, 1)] += 1e-3;
        assert!(!spectral_invariance_check(&j1, 1.0, &bad, 10.0, 1e-7).passed());
    }

    #[test]
    fn non_constant_d_is_rejected() {
        let model = SystemModel::new(
            2,
            2,
            |_| Vector::zeros(2),
            |x: &Vector| Matrix::from_diagonal(&v2(1.0 + x[0] * x[0], 1.0)),
            |_| Matrix::zeros(2, 2),
        );
        let cbf = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        assert!(matches!(
            jacobian_safety_filter_boundary(&model, &cbf, &InputWeight::Identity(2), &v2(3.0, 0.0)),
            Err(Error::NonConstantD { .. })
        ));
    }

    #[test]
    fn clf_cbf_guard_on_multipliers() {
        let model = SystemModel::single_integrator(2);
        let cbf = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, 1.0).unwrap();
        let clf = LyapunovPair::quadratic(Matrix::from_diagonal(&v2(6.0, 1.0)), v2(0.0, 0.0), ClassK::identity()).unwrap();
        // λ₂ < 0 at the near pole of the obstacle.
        assert!(matches!(
            jacobian_clf_cbf_boundary(&model, &cbf, &clf, &InputWeight::Identity(2), 1.0, &v2(0.0, 1.5)),
            Err(Error::Precondition(_))
        ));
    }
}
