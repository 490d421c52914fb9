//! Control-affine systems, CBF and CLF pairs, safe-set geometry and CBF
//! transforms.
//!
//! Every evaluator is supplied analytically; finite differences appear only
//! in [`validate_model`], which cross-checks the supplied derivatives.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{central_derivative, central_gradient, central_jacobian, max_abs, max_abs_vec};
use crate::{Error, Matrix, Result, Vector};

pub type StateFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance for the finite-difference consistency checks.
pub const VALIDATION_TOL: f64 = 1e-4;
/// Relative step of the validation finite differences.
pub const VALIDATION_STEP: f64 = 1e-5;

// ───────────────────────── class-K functions ─────────────────────────

/// Extended class-K function together with its derivative.
#[derive(Clone)]
pub struct ClassK {
    value: RealFn,
    derivative: RealFn,
    label: String,
}

impl ClassK {
    pub fn from_fns(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            label: label.into(),
        }
    }

    /// `s ↦ slope·s`.
    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "class-K slope must be positive, got {slope}"
            )));
        }
        Ok(Self::from_fns(format!("linear({slope})"), move |s| slope * s, move |_| slope))
    }

    pub fn identity() -> Self {
        Self::from_fns("linear(1)", |s| s, |_| 1.0)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        (self.derivative)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ClassK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClassK({})", self.label)
    }
}

// ───────────────────────── system model ─────────────────────────

#[derive(Clone)]
struct Nominal {
    k: StateFn,
    jk: MatrixFn,
}

/// Control-affine dynamics `ẋ = f(x) + g(x)u` with an optional nominal
/// controller `k`.
///
/// When a nominal controller is present, the controllers act on top of it
/// and the analysis uses the wrapped drift `f̃ = f + g·k`.
#[derive(Clone)]
pub struct SystemModel {
    n: usize,
    m: usize,
    f: StateFn,
    g: MatrixFn,
    jf: MatrixFn,
    nominal: Option<Nominal>,
    label: String,
}

impl SystemModel {
    pub fn new(
        n: usize,
        m: usize,
        f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        g: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        jf: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            f: Arc::new(f),
            g: Arc::new(g),
            jf: Arc::new(jf),
            nominal: None,
            label: "custom".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Attaches a nominal controller `k` and its Jacobian.
    pub fn with_nominal(
        mut self,
        k: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jk: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.nominal = Some(Nominal {
            k: Arc::new(k),
            jk: Arc::new(jk),
        });
        self
    }

    /// Attaches the linear nominal controller `k(x) = K x`.
    pub fn with_linear_feedback(self, gain: Matrix) -> Result<Self> {
        if gain.nrows() != self.m || gain.ncols() != self.n {
            return Err(Error::dim(
                "nominal gain",
                format!("{}x{}", self.m, self.n),
                format!("{}x{}", gain.nrows(), gain.ncols()),
            ));
        }
        let jk = gain.clone();
        Ok(self.with_nominal(move |x| &gain * x, move |_| jk.clone()))
    }

    /// `ẋ = u` in `n` dimensions.
    pub fn single_integrator(n: usize) -> Self {
        Self::new(
            n,
            n,
            move |_| Vector::zeros(n),
            move |_| Matrix::identity(n, n),
            move |_| Matrix::zeros(n, n),
        )
        .with_label("single_integrator")
    }

    /// `ẋ = A x + B u`.
    pub fn linear(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("A", "square matrix", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dim("B", format!("{} rows", a.nrows()), b.nrows()));
        }
        let (n, m) = (a.nrows(), b.ncols());
        let ja = a.clone();
        Ok(Self::new(n, m, move |x| &a * x, move |_| b.clone(), move |_| ja.clone())
            .with_label("linear"))
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_nominal(&self) -> bool {
        self.nominal.is_some()
    }

    #[inline]
    pub fn drift(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }

    #[inline]
    pub fn input_matrix(&self, x: &Vector) -> Matrix {
        (self.g)(x)
    }

    #[inline]
    pub fn drift_jacobian(&self, x: &Vector) -> Matrix {
        (self.jf)(x)
    }

    /// Nominal input `k(x)`, zero when no nominal controller is attached.
    pub fn nominal(&self, x: &Vector) -> Vector {
        match &self.nominal {
            Some(nom) => (nom.k)(x),
            None => Vector::zeros(self.m),
        }
    }

    pub fn nominal_jacobian(&self, x: &Vector) -> Matrix {
        match &self.nominal {
            Some(nom) => (nom.jk)(x),
            None => Matrix::zeros(self.m, self.n),
        }
    }

    /// Wrapped drift `f̃(x) = f(x) + g(x)k(x)`.
    pub fn closed_drift(&self, x: &Vector) -> Vector {
        let f = self.drift(x);
        match &self.nominal {
            Some(nom) => f + self.input_matrix(x) * (nom.k)(x),
            None => f,
        }
    }

    /// Jacobian of the wrapped drift, `J_f + g·J_k`.
    ///
    /// Exact when `g` does not depend on the state.
    pub fn closed_drift_jacobian(&self, x: &Vector) -> Matrix {
        let jf = self.drift_jacobian(x);
        match &self.nominal {
            Some(nom) => jf + self.input_matrix(x) * (nom.jk)(x),
            None => jf,
        }
    }

    /// Checks that every evaluator returns outputs consistent with `(n, m)`.
    pub fn check_dims(&self, x: &Vector) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if x.len() != n {
            return Err(Error::dim("state", n, x.len()));
        }
        let f = self.drift(x);
        if f.len() != n {
            return Err(Error::dim("f", n, f.len()));
        }
        let g = self.input_matrix(x);
        if g.shape() != (n, m) {
            return Err(Error::dim("g", format!("{n}x{m}"), format!("{}x{}", g.nrows(), g.ncols())));
        }
        let jf = self.drift_jacobian(x);
        if jf.shape() != (n, n) {
            return Err(Error::dim("jf", format!("{n}x{n}"), format!("{}x{}", jf.nrows(), jf.ncols())));
        }
        if let Some(nom) = &self.nominal {
            let k = (nom.k)(x);
            if k.len() != m {
                return Err(Error::dim("k", m, k.len()));
            }
            let jk = (nom.jk)(x);
            if jk.shape() != (m, n) {
                return Err(Error::dim("jk", format!("{m}x{n}"), format!("{}x{}", jk.nrows(), jk.ncols())));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("nominal", &self.nominal.is_some())
            .finish()
    }
}

// ───────────────────────── safe-set geometry ─────────────────────────

/// Shape of the safe set `S = {h ≥ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum SafeSetGeometry {
    /// Complement of the open ball with the given center and radius.
    BallComplement { center: Vector, radius: f64 },
    /// Only known through `h`; boundary points come from projection.
    Implicit,
}

impl SafeSetGeometry {
    /// `count` boundary points uniform in the circle angle, starting at angle
    /// zero. Only available for planar balls.
    pub fn boundary_samples(&self, count: usize) -> Option<Vec<Vector>> {
        match self {
            SafeSetGeometry::BallComplement { center, radius } if center.len() == 2 => Some(
                (0..count)
                    .map(|i| {
                        let theta = std::f64::consts::TAU * i as f64 / count as f64;
                        Vector::from_vec(vec![
                            center[0] + radius * theta.cos(),
                            center[1] + radius * theta.sin(),
                        ])
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

// ───────────────────────── barrier pair ─────────────────────────

/// A CBF `h` with exact gradient and Hessian, paired with the extended
/// class-K function `α` used in the constraint `∇hᵀ(f + gu) + α(h) ≥ 0`.
#[derive(Clone)]
pub struct BarrierPair {
    h: ScalarFn,
    grad: StateFn,
    hess: MatrixFn,
    alpha: ClassK,
    geometry: Option<SafeSetGeometry>,
    label: String,
}

impl BarrierPair {
    pub fn new(
        label: impl Into<String>,
        h: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        hess: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        alpha: ClassK,
    ) -> Self {
        Self {
            h: Arc::new(h),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            alpha,
            geometry: None,
            label: label.into(),
        }
    }

    pub fn with_geometry(mut self, geometry: SafeSetGeometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    /// Same barrier function, different class-K function.
    pub fn with_alpha(mut self, alpha: ClassK) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn value(&self, x: &Vector) -> f64 {
        (self.h)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.grad)(x)
    }

    #[inline]
    pub fn hessian(&self, x: &Vector) -> Matrix {
        (self.hess)(x)
    }

    pub fn alpha(&self) -> &ClassK {
        &self.alpha
    }

    /// `α'(0)`, the slope that appears in the boundary Jacobians.
    pub fn alpha_prime0(&self) -> f64 {
        self.alpha.derivative(0.0)
    }

    pub fn geometry(&self) -> Option<&SafeSetGeometry> {
        self.geometry.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evenly spaced boundary points when the geometry supports sampling.
    pub fn boundary_samples(&self, count: usize) -> Option<Vec<Vector>> {
        self.geometry.as_ref().and_then(|g| g.boundary_samples(count))
    }

    /// Moves `x` onto `∂S`.
    ///
    /// Balls use radial projection; other geometries use the damped Newton
    /// iteration `x ← x − h·∇h/‖∇h‖²` (at most 50 steps, `|h| < 1e-12`).
    pub fn project_to_boundary(&self, x: &Vector) -> Result<Vector> {
        if let Some(SafeSetGeometry::BallComplement { center, radius }) = &self.geometry {
            let d = x - center;
            let norm = d.norm();
            if norm > 1e-14 {
                let p = center + d * (*radius / norm);
                if self.value(&p).abs() < 1e-10 {
                    return Ok(p);
                }
            }
        }
        let mut p = x.clone();
        let mut hv = self.value(&p);
        for _ in 0..50 {
            if hv.abs() < 1e-12 {
                return Ok(p);
            }
            let g = self.gradient(&p);
            let gg = g.norm_squared();
            if gg < 1e-20 {
                break;
            }
            let dir = g * (hv / gg);
            let mut step = 1.0;
            loop {
                let cand = &p - &dir * step;
                let hc = self.value(&cand);
                if hc.abs() < hv.abs() || step < 1e-6 {
                    p = cand;
                    hv = hc;
                    break;
                }
                step *= 0.5;
            }
        }
        if hv.abs() < 1e-12 {
            Ok(p)
        } else {
            Err(Error::Convergence {
                what: "boundary projection".into(),
                residual: hv.abs(),
            })
        }
    }
}

impl fmt::Debug for BarrierPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierPair")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("geometry", &self.geometry)
            .finish()
    }
}

/// Algebraic form of a ball CBF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallForm {
    /// `‖x − c‖² − r²`
    Full,
    /// `½‖x − c‖² − ½r²`
    Half,
}

/// CBF of the complement of a ball with linear `α(s) = alpha_slope·s`.
pub fn make_ball_cbf(center: &Vector, radius: f64, form: BallForm, alpha_slope: f64) -> Result<BarrierPair> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
    }
    let alpha = ClassK::linear(alpha_slope)?;
    let scale = match form {
        BallForm::Full => 1.0,
        BallForm::Half => 0.5,
    };
    let n = center.len();
    let (c1, c2) = (center.clone(), center.clone());
    let c0 = center.clone();
    let r2 = radius * radius;
    let label = match form {
        BallForm::Full => "ball",
        BallForm::Half => "half_ball",
    };
    Ok(BarrierPair::new(
        label,
        move |x| scale * ((x - &c0).norm_squared() - r2),
        move |x| (x - &c1) * (2.0 * scale),
        move |_| Matrix::identity(n, n) * (2.0 * scale),
        alpha,
    )
    .with_geometry(SafeSetGeometry::BallComplement {
        center: c2,
        radius,
    }))
}

// ───────────────────────── Lyapunov pair ─────────────────────────

/// A CLF `V` with exact derivatives, its class-K function `β` and the target
/// state `x*`.
#[derive(Clone)]
pub struct LyapunovPair {
    v: ScalarFn,
    grad: StateFn,
    hess: MatrixFn,
    beta: ClassK,
    xstar: Vector,
    label: String,
}

impl LyapunovPair {
    pub fn new(
        label: impl Into<String>,
        v: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        hess: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        beta: ClassK,
        xstar: Vector,
    ) -> Self {
        Self {
            v: Arc::new(v),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            beta,
            xstar,
            label: label.into(),
        }
    }

    /// `V(x) = ½ (x − x*)ᵀ Q (x − x*)` for symmetric positive definite `Q`.
    pub fn quadratic(q: Matrix, xstar: Vector, beta: ClassK) -> Result<Self> {
        if q.shape() != (xstar.len(), xstar.len()) {
            return Err(Error::dim(
                "Q",
                format!("{0}x{0}", xstar.len()),
                format!("{}x{}", q.nrows(), q.ncols()),
            ));
        }
        crate::linalg::spd_inverse(&q, "Q")?;
        let (q1, q2) = (q.clone(), q.clone());
        let (s0, s1) = (xstar.clone(), xstar.clone());
        Ok(Self::new(
            "quadratic",
            move |x| {
                let d = x - &s0;
                0.5 * d.dot(&(&q1 * &d))
            },
            move |x| &q2 * (x - &s1),
            move |_| q.clone(),
            beta,
            xstar,
        ))
    }

    #[inline]
    pub fn value(&self, x: &Vector) -> f64 {
        (self.v)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.grad)(x)
    }

    #[inline]
    pub fn hessian(&self, x: &Vector) -> Matrix {
        (self.hess)(x)
    }

    pub fn beta(&self) -> &ClassK {
        &self.beta
    }

    pub fn xstar(&self) -> &Vector {
        &self.xstar
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for LyapunovPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovPair")
            .field("label", &self.label)
            .field("beta", &self.beta)
            .field("xstar", &self.xstar.as_slice())
            .finish()
    }
}

// ───────────────────────── transforms ─────────────────────────

/// Scalar map `γ` with `γ(0) = 0` and its first two derivatives.
#[derive(Clone)]
pub struct Gamma {
    value: RealFn,
    d1: RealFn,
    d2: RealFn,
    label: String,
}

impl Gamma {
    pub fn from_fns(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            label: label.into(),
        }
    }

    pub fn identity() -> Self {
        Self::from_fns("identity", |s| s, |_| 1.0, |_| 0.0)
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma slope must be positive, got {slope}")));
        }
        Ok(Self::from_fns(format!("linear({slope})"), move |s| slope * s, move |_| slope, |_| 0.0))
    }

    /// `γ(s) = (e^{rate·s} − 1)/rate`, so that `γ'(0) = 1` and `γ''(0) = rate`.
    pub fn exp(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma rate must be positive, got {rate}")));
        }
        Ok(Self::from_fns(
            format!("exp({rate})"),
            move |s| (rate * s).exp_m1() / rate,
            move |s| (rate * s).exp(),
            move |s| rate * (rate * s).exp(),
        ))
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    #[inline]
    pub fn d1(&self, s: f64) -> f64 {
        (self.d1)(s)
    }

    #[inline]
    pub fn d2(&self, s: f64) -> f64 {
        (self.d2)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gamma({})", self.label)
    }
}

/// Positive state function `η` with gradient and Hessian.
#[derive(Clone)]
pub struct PositiveWeight {
    value: ScalarFn,
    grad: StateFn,
    hess: MatrixFn,
    label: String,
}

impl PositiveWeight {
    pub fn from_fns(
        label: impl Into<String>,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        hess: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            label: label.into(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got constant {c}")));
        }
        Ok(Self::from_fns(
            format!("constant({c})"),
            move |_| c,
            move |_| Vector::zeros(n),
            move |_| Matrix::zeros(n, n),
        ))
    }

    /// `η(x) = ‖x − center‖² + offset`.
    pub fn shifted_square(center: Vector, offset: f64) -> Result<Self> {
        if !(offset > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "shifted-square offset must be positive, got {offset}"
            )));
        }
        let n = center.len();
        let c1 = center.clone();
        Ok(Self::from_fns(
            "shifted_square",
            move |x| (x - &center).norm_squared() + offset,
            move |x| (x - &c1) * 2.0,
            move |_| Matrix::identity(n, n) * 2.0,
        ))
    }

    #[inline]
    pub fn eval(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.grad)(x)
    }

    #[inline]
    pub fn hessian(&self, x: &Vector) -> Matrix {
        (self.hess)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for PositiveWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PositiveWeight({})", self.label)
    }
}

/// Parameters of `φ(h) = a·γ(h) + b·η·h`, with an optional replacement `α`.
#[derive(Debug, Clone)]
pub struct TransformStep {
    pub a: f64,
    pub b: f64,
    pub gamma: Gamma,
    pub eta: PositiveWeight,
    /// Class-K function of the result; the base `α` is kept when absent.
    pub alpha: Option<ClassK>,
}

impl TransformStep {
    /// `b·η·h` alone.
    pub fn weighted(b: f64, eta: PositiveWeight) -> Self {
        Self {
            a: 0.0,
            b,
            gamma: Gamma::identity(),
            eta,
            alpha: None,
        }
    }

    /// `a·γ(h)` alone; `n` is the state dimension.
    pub fn composed(n: usize, a: f64, gamma: Gamma) -> Self {
        Self {
            a,
            b: 0.0,
            gamma,
            eta: PositiveWeight::constant(n, 1.0).expect("constant 1 is positive"),
            alpha: None,
        }
    }

    pub fn with_alpha(mut self, alpha: ClassK) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

/// Builds `h₂ = a·γ(h₁) + b·η·h₁` with gradient and Hessian from the product
/// and chain rules:
///
/// ```text
/// ∇h₂ = (aγ'(h₁) + bη)∇h₁ + b·h₁∇η
/// H₂  = (aγ'(h₁) + bη)H₁ + aγ''(h₁)∇h₁∇h₁ᵀ + b(∇h₁∇ηᵀ + ∇η∇h₁ᵀ) + b·h₁Hη
/// ```
pub fn transform_cbf(base: &BarrierPair, step: &TransformStep) -> Result<BarrierPair> {
    let TransformStep { a, b, gamma, eta, alpha } = step.clone();
    if !(a >= 0.0 && b >= 0.0) || a + b <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "transform needs a, b ≥ 0 with a + b > 0, got a = {a}, b = {b}"
        )));
    }
    if gamma.eval(0.0) != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma(0) must be 0, got {}",
            gamma.eval(0.0)
        )));
    }
    if let Some(samples) = base.boundary_samples(64) {
        if let Some(bad) = samples.iter().find(|x| !(eta.eval(x) > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "eta is not positive at boundary sample {:?}",
                bad.as_slice()
            )));
        }
    }

    let (hb, gb, hhb) = (base.h.clone(), base.grad.clone(), base.hess.clone());
    let (h1, g1) = (hb.clone(), gb.clone());
    let (h2, g2) = (hb.clone(), gb.clone());
    let (gm0, gm1, gm2) = (gamma.clone(), gamma.clone(), gamma.clone());
    let (e0, e1, e2) = (eta.clone(), eta.clone(), eta.clone());

    let value = move |x: &Vector| {
        let h = hb(x);
        a * gm0.eval(h) + b * e0.eval(x) * h
    };
    let grad = move |x: &Vector| {
        let h = h1(x);
        let factor = a * gm1.d1(h) + b * e1.eval(x);
        g1(x) * factor + e1.gradient(x) * (b * h)
    };
    let hess = move |x: &Vector| {
        let h = h2(x);
        let gh = g2(x);
        let ge = e2.gradient(x);
        let factor = a * gm2.d1(h) + b * e2.eval(x);
        hhb(x) * factor
            + &gh * gh.transpose() * (a * gm2.d2(h))
            + (&gh * ge.transpose() + &ge * gh.transpose()) * b
            + e2.hessian(x) * (b * h)
    };

    let mut out = BarrierPair::new(
        format!("{}∘φ(a={a},b={b},γ={},η={})", base.label, gamma.label(), eta.label()),
        value,
        grad,
        hess,
        alpha.unwrap_or_else(|| base.alpha.clone()),
    );
    out.geometry = base.geometry.clone();
    Ok(out)
}

// ───────────────────────── validation ─────────────────────────

/// A pair handed to [`validate_model`].
#[derive(Debug, Clone, Copy)]
pub enum PairRef<'a> {
    Barrier(&'a BarrierPair),
    Lyapunov(&'a LyapunovPair),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValidationCheck {
    pub name: String,
    /// Residual or margin reported by the check.
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: String, value: f64, passed: bool) {
        self.passed &= passed;
        self.checks.push(ValidationCheck { name, value, passed });
    }

    fn residual(&mut self, name: String, value: f64) {
        self.push(name, value, value < VALIDATION_TOL);
    }
}

/// 101 points on [−10, 10] for class-K monotonicity checks.
fn class_k_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|i| -10.0 + 0.2 * i as f64)
}

fn check_class_k(report: &mut ValidationReport, prefix: &str, k: &ClassK) {
    let at0 = k.eval(0.0);
    report.push(format!("{prefix}(0)"), at0.abs(), at0 == 0.0);
    let grid: Vec<f64> = class_k_grid().collect();
    let worst = grid
        .windows(2)
        .map(|w| k.eval(w[0]) - k.eval(w[1]))
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(format!("{prefix} increasing"), worst.max(0.0), worst < 0.0);
    let deriv = grid
        .iter()
        .map(|&s| (k.derivative(s) - central_derivative(|t| k.eval(t), s, VALIDATION_STEP)).abs())
        .fold(0.0, f64::max);
    report.residual(format!("{prefix}_prime"), deriv);
}

/// Numerically enforces the smoothness and definiteness assumptions: every
/// supplied Jacobian, gradient and Hessian is compared against central
/// differences at the given states.
pub fn validate_model(model: &SystemModel, pairs: &[PairRef<'_>], samples: &[Vector]) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("validation needs at least one sample".into()));
    }
    let n = model.state_dim();
    for x in samples {
        model.check_dims(x)?;
    }
    let mut report = ValidationReport {
        checks: Vec::new(),
        passed: true,
    };

    let jf = samples
        .iter()
        .map(|x| max_abs(&(model.drift_jacobian(x) - central_jacobian(|y| model.drift(y), x, VALIDATION_STEP))))
        .fold(0.0, f64::max);
    report.residual("jf".into(), jf);
    if model.has_nominal() {
        let jk = samples
            .iter()
            .map(|x| {
                max_abs(&(model.nominal_jacobian(x) - central_jacobian(|y| model.nominal(y), x, VALIDATION_STEP)))
            })
            .fold(0.0, f64::max);
        report.residual("jk".into(), jk);
    }

    let mut cbf_index = 0;
    let mut clf_index = 0;
    for pair in pairs {
        match pair {
            PairRef::Barrier(p) => {
                let prefix = format!("cbf[{cbf_index}]");
                cbf_index += 1;
                for x in samples {
                    let g = p.gradient(x);
                    if g.len() != n {
                        return Err(Error::dim(&format!("{prefix}.grad_h"), n, g.len()));
                    }
                    let hh = p.hessian(x);
                    if hh.shape() != (n, n) {
                        return Err(Error::dim(
                            &format!("{prefix}.hess_h"),
                            format!("{n}x{n}"),
                            format!("{}x{}", hh.nrows(), hh.ncols()),
                        ));
                    }
                }
                check_class_k(&mut report, &format!("{prefix}.alpha"), p.alpha());
                let grad = samples
                    .iter()
                    .map(|x| max_abs_vec(&(p.gradient(x) - central_gradient(|y| p.value(y), x, VALIDATION_STEP))))
                    .fold(0.0, f64::max);
                report.residual(format!("{prefix}.grad_h"), grad);
                let hess = samples
                    .iter()
                    .map(|x| {
                        let h = p.hessian(x);
                        let fd = central_jacobian(|y| p.gradient(y), x, VALIDATION_STEP);
                        max_abs(&(&h - fd)).max(max_abs(&(&h - h.transpose())))
                    })
                    .fold(0.0, f64::max);
                report.residual(format!("{prefix}.hess_h"), hess);
                if let Some(boundary) = p.boundary_samples(256) {
                    let min_norm = boundary.iter().map(|x| p.gradient(x).norm()).fold(f64::INFINITY, f64::min);
                    report.push(format!("{prefix}.boundary_gradient"), min_norm, min_norm > 1e-10);
                }
            }
            PairRef::Lyapunov(l) => {
                let prefix = format!("clf[{clf_index}]");
                clf_index += 1;
                for x in samples {
                    let g = l.gradient(x);
                    if g.len() != n {
                        return Err(Error::dim(&format!("{prefix}.grad_v"), n, g.len()));
                    }
                }
                let at_star = l.value(l.xstar());
                report.push(format!("{prefix}.v(xstar)"), at_star.abs(), at_star.abs() <= 1e-12);
                let min_v = samples
                    .iter()
                    .filter(|x| (*x - l.xstar()).norm() > 1e-8)
                    .map(|x| l.value(x))
                    .fold(f64::INFINITY, f64::min);
                report.push(format!("{prefix}.v positive"), min_v, min_v > 0.0);
                check_class_k(&mut report, &format!("{prefix}.beta"), l.beta());
                let grad = samples
                    .iter()
                    .map(|x| max_abs_vec(&(l.gradient(x) - central_gradient(|y| l.value(y), x, VALIDATION_STEP))))
                    .fold(0.0, f64::max);
                report.residual(format!("{prefix}.grad_v"), grad);
                let hess = samples
                    .iter()
                    .map(|x| max_abs(&(l.hessian(x) - central_jacobian(|y| l.gradient(y), x, VALIDATION_STEP))))
                    .fold(0.0, f64::max);
                report.residual(format!("{prefix}.hess_v"), hess);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn random_states(count: usize, seed: u64) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| v2(rng.gen_range(-4.0..6.0), rng.gen_range(-4.0..4.0))).collect()
    }

    #[test]
    fn ball_cbf_full_form_values() {
        let p = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let x = v2(3.0, 0.0);
        assert_eq!(p.value(&x), 0.0);
        assert_eq!(p.gradient(&x), v2(2.0, 0.0));
        let c = v2(2.0, 0.0);
        assert_eq!(p.value(&c), -1.0);
        assert_eq!(p.hessian(&c), Matrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn ball_cbf_half_form_values() {
        let p = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, 1.0).unwrap();
        let x = v2(0.0, 4.5);
        assert!(p.value(&x).abs() < 1e-15);
        assert_eq!(p.gradient(&x), v2(0.0, 1.5));
    }

    #[test]
    fn ball_cbf_rejects_bad_parameters() {
        assert!(matches!(
            make_ball_cbf(&v2(0.0, 0.0), 0.0, BallForm::Full, 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            make_ball_cbf(&v2(0.0, 0.0), 1.0, BallForm::Full, -2.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn ball_zero_set_matches_circle() {
        let c = v2(2.0, 0.0);
        let p = make_ball_cbf(&c, 1.0, BallForm::Full, 1.0).unwrap();
        for x in p.boundary_samples(512).unwrap() {
            assert!(p.value(&x).abs() < 1e-12);
            assert!(((&x - &c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_transform_at_fig3_point() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let eta = PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap();
        let h2 = transform_cbf(&base, &TransformStep::weighted(1.0, eta)).unwrap();
        let x = v2(3.0, 0.0);
        assert_eq!(h2.value(&x), 0.0);
        assert_eq!(h2.gradient(&x), base.gradient(&x) * 6.0);
    }

    #[test]
    fn identity_and_scaling_transforms() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let id = transform_cbf(&base, &TransformStep::composed(2, 1.0, Gamma::identity())).unwrap();
        let ten = transform_cbf(&base, &TransformStep::composed(2, 10.0, Gamma::identity())).unwrap();
        for x in random_states(32, 3) {
            assert_eq!(id.value(&x), base.value(&x));
            assert_eq!(id.gradient(&x), base.gradient(&x));
            assert_eq!(id.hessian(&x), base.hessian(&x));
            assert!((ten.value(&x) - 10.0 * base.value(&x)).abs() < 1e-12);
            assert!(max_abs_vec(&(ten.gradient(&x) - base.gradient(&x) * 10.0)) < 1e-12);
            assert!(max_abs(&(ten.hessian(&x) - base.hessian(&x) * 10.0)) < 1e-12);
        }
    }

    #[test]
    fn transform_rejects_bad_parameters() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let mut step = TransformStep::composed(2, 1.0, Gamma::identity());
        step.a = 0.0;
        assert!(matches!(transform_cbf(&base, &step), Err(Error::InvalidParameter(_))));
        let negative_eta = PositiveWeight::from_fns(
            "negative",
            |x: &Vector| x[0] - 2.5,
            |_| v2(1.0, 0.0),
            |_| Matrix::zeros(2, 2),
        );
        assert!(matches!(
            transform_cbf(&base, &TransformStep::weighted(1.0, negative_eta)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn transform_preserves_zero_level_set() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let step = TransformStep {
            a: 2.0,
            b: 0.5,
            gamma: Gamma::exp(0.7).unwrap(),
            eta: PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap(),
            alpha: None,
        };
        let h2 = transform_cbf(&base, &step).unwrap();
        for x in base.boundary_samples(256).unwrap() {
            assert!(h2.value(&x).abs() < 1e-10);
        }
    }

    #[test]
    fn integrator_model_validates() {
        let model = SystemModel::single_integrator(2);
        let report = validate_model(&model, &[], &random_states(100, 1)).unwrap();
        assert!(report.passed);
        assert!(report.checks.iter().all(|c| c.value < 1e-8));
    }

    #[test]
    fn wrong_gradient_is_named() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let b2 = base.clone();
        let wrong = BarrierPair::new(
            "wrong",
            move |x| base.value(x),
            move |x| b2.gradient(x) * 1.1,
            |_| Matrix::identity(2, 2) * 2.0,
            ClassK::identity(),
        );
        let model = SystemModel::single_integrator(2);
        let report = validate_model(&model, &[PairRef::Barrier(&wrong)], &random_states(20, 2)).unwrap();
        assert!(!report.passed);
        let failed: Vec<_> = report.failed_checks().map(|c| c.name.as_str()).collect();
        assert!(failed.iter().any(|n| n.contains("grad_h")), "{failed:?}");
    }

    #[test]
    fn dimension_mismatch_is_structural_error() {
        let bad = SystemModel::new(
            2,
            2,
            |_| Vector::zeros(3),
            |_| Matrix::identity(2, 2),
            |_| Matrix::zeros(2, 2),
        );
        match validate_model(&bad, &[], &[v2(0.0, 0.0)]) {
            Err(Error::Dimension { evaluator, .. }) => assert_eq!(evaluator, "f"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn projection_reaches_boundary() {
        let base = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let eta = PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap();
        let mut h2 = transform_cbf(&base, &TransformStep::weighted(1.0, eta)).unwrap();
        h2.geometry = Some(SafeSetGeometry::Implicit);
        let p = h2.project_to_boundary(&v2(3.4, 0.7)).unwrap();
        assert!(h2.value(&p).abs() < 1e-10);
        assert!(((&p - v2(2.0, 0.0)).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_clf_values() {
        let q = Matrix::from_diagonal(&v2(6.0, 1.0));
        let clf = LyapunovPair::quadratic(q, v2(0.0, 0.0), ClassK::identity()).unwrap();
        let x = v2(0.0, 4.5);
        assert_eq!(clf.value(&x), 10.125);
        assert_eq!(clf.gradient(&x), v2(0.0, 4.5));
        let model = SystemModel::single_integrator(2);
        let report = validate_model(&model, &[PairRef::Lyapunov(&clf)], &random_states(50, 4)).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
