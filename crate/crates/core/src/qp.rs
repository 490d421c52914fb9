//! Small dense QPs `min ½‖u‖²_G + ½pδ²` subject to affine rows, solved by
//! active-set enumeration, plus closed-form fast paths for the safety
//! filter, the CLF-CBF QP and the unfiltered min-norm CLF controller.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{max_abs_vec, spd_inverse};
use crate::model::{BarrierPair, LyapunovPair, MatrixFn, ScalarFn, StateFn, SystemModel};
use crate::{Error, Matrix, Result, Vector};

/// Largest number of rows accepted by [`solve_small_qp`].
pub const MAX_ROWS: usize = 12;
/// Primal feasibility tolerance of a candidate.
pub const FEAS_TOL: f64 = 1e-9;
/// Most negative multiplier still accepted as dual feasible.
pub const DUAL_TOL: f64 = 1e-12;
/// Smallest `‖G⁻¹gᵀ∇h‖` for which the CBF row can still be enforced.
pub const STRICT_FEAS_TOL: f64 = 1e-12;

// ───────────────────────── weights ─────────────────────────

/// Input weight `G(x)` of the objective.
#[derive(Clone)]
pub enum InputWeight {
    Identity(usize),
    Constant(Matrix),
    StateDependent(MatrixFn),
    Scaled(Box<InputWeight>, f64),
}

impl InputWeight {
    pub fn state_dependent(g: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        InputWeight::StateDependent(Arc::new(g))
    }

    pub fn scaled(self, factor: f64) -> Self {
        InputWeight::Scaled(Box::new(self), factor)
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        match self {
            InputWeight::Identity(m) => Matrix::identity(*m, *m),
            InputWeight::Constant(g) => g.clone(),
            InputWeight::StateDependent(g) => g(x),
            InputWeight::Scaled(inner, s) => inner.eval(x) * *s,
        }
    }

    /// `G(x)⁻¹`, failing when `G(x)` is not symmetric positive definite.
    pub fn inverse(&self, x: &Vector) -> Result<Matrix> {
        match self {
            InputWeight::Identity(m) => Ok(Matrix::identity(*m, *m)),
            _ => spd_inverse(&self.eval(x), "G"),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            InputWeight::Identity(_) | InputWeight::Constant(_) => true,
            InputWeight::StateDependent(_) => false,
            InputWeight::Scaled(inner, _) => inner.is_constant(),
        }
    }
}

impl fmt::Debug for InputWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputWeight::Identity(m) => write!(f, "Identity({m})"),
            InputWeight::Constant(g) => write!(f, "Constant({g:?})"),
            InputWeight::StateDependent(_) => write!(f, "StateDependent"),
            InputWeight::Scaled(inner, s) => write!(f, "Scaled({inner:?}, {s})"),
        }
    }
}

// ───────────────────────── problem ─────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// `normal·u + offset ≤ δ`
    ClfRelaxed,
    /// `normal·u + offset ≥ 0`
    Cbf,
    /// `normal·u + relax_coeff·δ + offset ≤ 0`
    Custom,
}

/// One affine constraint row of a [`QpProblem`].
#[derive(Clone)]
pub struct QpRow {
    pub kind: RowKind,
    pub normal: StateFn,
    pub offset: ScalarFn,
    pub relax_coeff: f64,
}

impl fmt::Debug for QpRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QpRow")
            .field("kind", &self.kind)
            .field("relax_coeff", &self.relax_coeff)
            .finish()
    }
}

impl QpRow {
    pub fn custom(
        normal: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        offset: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        relax_coeff: f64,
    ) -> Self {
        Self {
            kind: RowKind::Custom,
            normal: Arc::new(normal),
            offset: Arc::new(offset),
            relax_coeff,
        }
    }

    /// Row `∇hᵀ(f̃ + gu) + α(h) ≥ 0` built from the wrapped drift.
    pub fn cbf(model: &SystemModel, pair: &BarrierPair) -> Self {
        let (m1, m2) = (model.clone(), model.clone());
        let (p1, p2) = (pair.clone(), pair.clone());
        Self {
            kind: RowKind::Cbf,
            normal: Arc::new(move |x| m1.input_matrix(x).transpose() * p1.gradient(x)),
            offset: Arc::new(move |x| cbf_offset(&m2, &p2, x)),
            relax_coeff: 0.0,
        }
    }

    /// Row `∇Vᵀ(f̃ + gu) + β(V) ≤ δ`.
    pub fn clf(model: &SystemModel, clf: &LyapunovPair) -> Self {
        let (m1, m2) = (model.clone(), model.clone());
        let (l1, l2) = (clf.clone(), clf.clone());
        Self {
            kind: RowKind::ClfRelaxed,
            normal: Arc::new(move |x| m1.input_matrix(x).transpose() * l1.gradient(x)),
            offset: Arc::new(move |x| clf_offset(&m2, &l2, x)),
            relax_coeff: -1.0,
        }
    }
}

/// `F_h(x) = ∇hᵀf̃ + α(h)`.
pub fn cbf_offset(model: &SystemModel, pair: &BarrierPair, x: &Vector) -> f64 {
    pair.gradient(x).dot(&model.closed_drift(x)) + pair.alpha().eval(pair.value(x))
}

/// `F_V(x) = ∇Vᵀf̃ + β(V)`.
pub fn clf_offset(model: &SystemModel, clf: &LyapunovPair, x: &Vector) -> f64 {
    clf.gradient(x).dot(&model.closed_drift(x)) + clf.beta().eval(clf.value(x))
}

/// `min ½‖u‖²_G + ½pδ²` subject to the listed rows.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub weight: InputWeight,
    /// Relaxation penalty; `None` when no row uses `δ`.
    pub penalty: Option<f64>,
    pub rows: Vec<QpRow>,
}

impl QpProblem {
    pub fn new(weight: InputWeight, penalty: Option<f64>, rows: Vec<QpRow>) -> Result<Self> {
        if let Some(p) = penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("penalty p must be positive, got {p}")));
            }
        }
        if penalty.is_none() && rows.iter().any(|r| r.relax_coeff != 0.0) {
            return Err(Error::InvalidParameter("a relaxed row needs a penalty p".into()));
        }
        if rows.len() > MAX_ROWS {
            return Err(Error::InvalidParameter(format!(
                "at most {MAX_ROWS} rows are supported, got {}",
                rows.len()
            )));
        }
        Ok(Self { weight, penalty, rows })
    }

    /// Safety filter `min ‖u‖²_G` s.t. every CBF row. The objective carries no
    /// ½, so the solver weight is `2G`.
    pub fn safety_filter(model: &SystemModel, cbfs: &[BarrierPair], weight: &InputWeight) -> Result<Self> {
        Self::new(
            weight.clone().scaled(2.0),
            None,
            cbfs.iter().map(|c| QpRow::cbf(model, c)).collect(),
        )
    }

    /// CLF-CBF QP; the CLF row comes first.
    pub fn clf_cbf(
        model: &SystemModel,
        cbfs: &[BarrierPair],
        clf: &LyapunovPair,
        weight: &InputWeight,
        penalty: f64,
    ) -> Result<Self> {
        let mut rows = vec![QpRow::clf(model, clf)];
        rows.extend(cbfs.iter().map(|c| QpRow::cbf(model, c)));
        Self::new(weight.clone(), Some(penalty), rows)
    }

    /// The CLF-CBF QP without its CBF rows.
    pub fn unfiltered(model: &SystemModel, clf: &LyapunovPair, weight: &InputWeight, penalty: f64) -> Result<Self> {
        Self::new(weight.clone(), Some(penalty), vec![QpRow::clf(model, clf)])
    }

    /// Copy of the problem with row `index` removed.
    pub fn without_row(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.rows.remove(index);
        out
    }

    /// Numeric data at `x`, rows in `A z ≤ b` form with `z = [u; δ]`.
    pub fn data_at(&self, x: &Vector) -> Result<QpData> {
        let g = self.weight.eval(x);
        spd_inverse(&g, "G")?;
        let m = g.nrows();
        let nz = m + usize::from(self.penalty.is_some());
        let mut h = Matrix::zeros(nz, nz);
        h.view_mut((0, 0), (m, m)).copy_from(&g);
        if let Some(p) = self.penalty {
            h[(m, m)] = p;
        }
        let mut a = Matrix::zeros(self.rows.len(), nz);
        let mut b = Vector::zeros(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let normal = (row.normal)(x);
            if normal.len() != m {
                return Err(Error::dim(&format!("row {i} normal"), m, normal.len()));
            }
            let offset = (row.offset)(x);
            let sign = match row.kind {
                RowKind::Cbf => -1.0,
                RowKind::ClfRelaxed | RowKind::Custom => 1.0,
            };
            for j in 0..m {
                a[(i, j)] = sign * normal[j];
            }
            if self.penalty.is_some() {
                a[(i, m)] = sign * row.relax_coeff;
            }
            b[i] = -sign * offset;
        }
        Ok(QpData { m, h, a, b })
    }
}

/// Numeric QP `min ½zᵀHz` s.t. `Az ≤ b` at one state.
#[derive(Debug, Clone)]
pub struct QpData {
    pub m: usize,
    pub h: Matrix,
    pub a: Matrix,
    pub b: Vector,
}

/// Primal-dual solution of a [`QpProblem`] at one state.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KktPoint {
    #[serde(serialize_with = "crate::ser::vector")]
    pub u: Vector,
    /// Relaxation; zero when the problem has none.
    pub delta: f64,
    /// One nonnegative multiplier per row, in row order.
    pub multipliers: Vec<f64>,
    pub active_set: Vec<usize>,
    pub stationarity_residual: f64,
}

/// KKT residuals of a candidate against the problem data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCertificate {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub inactive_multiplier: f64,
}

impl KktCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.stationarity < tol
            && self.primal < tol
            && self.dual <= DUAL_TOL
            && self.complementarity < tol
            && self.inactive_multiplier < 1e-10
    }
}

impl QpData {
    fn z_of(&self, kkt: &KktPoint) -> Vector {
        let mut z = Vector::zeros(self.h.nrows());
        z.rows_mut(0, self.m).copy_from(&kkt.u);
        if z.len() > self.m {
            z[self.m] = kkt.delta;
        }
        z
    }

    pub fn certify(&self, kkt: &KktPoint) -> KktCertificate {
        let z = self.z_of(kkt);
        let mu = Vector::from_vec(kkt.multipliers.clone());
        let stationarity = max_abs_vec(&(&self.h * &z + self.a.transpose() * &mu));
        let slack = &self.b - &self.a * &z;
        let primal = slack.iter().fold(0.0_f64, |acc, s| acc.max(-s));
        let dual = mu.iter().fold(0.0_f64, |acc, l| acc.max(-l));
        let complementarity = mu.iter().zip(slack.iter()).fold(0.0_f64, |acc, (l, s)| acc.max((l * s).abs()));
        let inactive_multiplier = (0..mu.len())
            .filter(|i| !kkt.active_set.contains(i))
            .fold(0.0_f64, |acc, i| acc.max(mu[i].abs()));
        KktCertificate {
            stationarity,
            primal,
            dual,
            complementarity,
            inactive_multiplier,
        }
    }
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if visit(&idx) {
            return true;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return false;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Solves the equality-constrained system for active set `w`; `None` when
/// the reduced matrix is singular.
fn solve_active(data: &QpData, hinv: &Matrix, w: &[usize]) -> Option<(Vector, Vector)> {
    let nz = data.h.nrows();
    if w.is_empty() {
        return Some((Vector::zeros(nz), Vector::zeros(0)));
    }
    let aw = Matrix::from_fn(w.len(), nz, |r, c| data.a[(w[r], c)]);
    let bw = Vector::from_fn(w.len(), |r, _| data.b[w[r]]);
    let s = &aw * hinv * aw.transpose();
    let scale = s.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let chol = s.clone().cholesky()?;
    let l = chol.l();
    if l.diagonal().iter().any(|d| d * d <= 1e-14 * scale) {
        return None;
    }
    let mu = -chol.solve(&bw);
    let z = -(hinv * aw.transpose() * &mu);
    Some((z, mu))
}

/// Enumerates active sets by increasing cardinality (lexicographic within
/// a cardinality) and returns the first KKT-certified candidate.
pub fn solve_small_qp(problem: &QpProblem, x: &Vector) -> Result<KktPoint> {
    let data = problem.data_at(x)?;
    solve_qp_data(&data)
}

pub fn solve_qp_data(data: &QpData) -> Result<KktPoint> {
    let rows = data.a.nrows();
    if rows > MAX_ROWS {
        return Err(Error::InvalidParameter(format!("at most {MAX_ROWS} rows are supported, got {rows}")));
    }
    let hinv = spd_inverse(&data.h, "G")?;
    let nz = data.h.nrows();
    let mut found: Option<KktPoint> = None;
    for k in 0..=rows.min(nz) {
        let done = combinations(rows, k, |w| {
            let Some((z, mu_w)) = solve_active(data, &hinv, w) else {
                return false;
            };
            if mu_w.iter().any(|&l| l < -DUAL_TOL) {
                return false;
            }
            let ax = &data.a * &z;
            if (0..rows).any(|i| ax[i] > data.b[i] + FEAS_TOL) {
                return false;
            }
            let mut multipliers = vec![0.0; rows];
            for (slot, &i) in w.iter().enumerate() {
                multipliers[i] = mu_w[slot].max(0.0);
            }
            let mu = Vector::from_vec(multipliers.clone());
            let stationarity = max_abs_vec(&(&data.h * &z + data.a.transpose() * &mu));
            found = Some(KktPoint {
                u: z.rows(0, data.m).into_owned(),
                delta: if nz > data.m { z[data.m] } else { 0.0 },
                multipliers,
                active_set: w.to_vec(),
                stationarity_residual: stationarity,
            });
            true
        });
        if done {
            break;
        }
    }
    found.ok_or_else(|| {
        let (row, violation) = (0..rows)
            .map(|i| (i, -data.b[i]))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        Error::Infeasible { row, violation }
    })
}

// ───────────────────────── closed forms ─────────────────────────

/// Output of the explicit safety-filter law.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyFilterOutput {
    /// Correction `ū` added on top of the nominal input.
    pub u: Vector,
    /// `η = ∇hᵀf̃ + α(h)`.
    pub eta: f64,
    /// Multiplier of the CBF row, `−2η/‖gᵀ∇h‖²_{G⁻¹}` when active.
    pub multiplier: f64,
}

impl SafetyFilterOutput {
    pub fn to_kkt(&self) -> KktPoint {
        KktPoint {
            u: self.u.clone(),
            delta: 0.0,
            multipliers: vec![self.multiplier],
            active_set: if self.eta < 0.0 { vec![0] } else { vec![] },
            stationarity_residual: 0.0,
        }
    }
}

/// Explicit safety filter: `0` when `η ≥ 0`, otherwise
/// `ū = −η G⁻¹gᵀ∇h / ‖gᵀ∇h‖²_{G⁻¹}`.
pub fn safety_filter(model: &SystemModel, pair: &BarrierPair, weight: &InputWeight, x: &Vector) -> Result<SafetyFilterOutput> {
    safety_filter_at(model, pair, weight, x, &model.closed_drift(x), &model.input_matrix(x))
}

/// [`safety_filter`] with `f̃(x)` and `g(x)` already evaluated.
pub(crate) fn safety_filter_at(
    model: &SystemModel,
    pair: &BarrierPair,
    weight: &InputWeight,
    x: &Vector,
    drift: &Vector,
    g: &Matrix,
) -> Result<SafetyFilterOutput> {
    let grad = pair.gradient(x);
    let eta = grad.dot(drift) + pair.alpha().eval(pair.value(x));
    if eta >= 0.0 {
        return Ok(SafetyFilterOutput {
            u: Vector::zeros(model.input_dim()),
            eta,
            multiplier: 0.0,
        });
    }
    let ginv = weight.inverse(x)?;
    let a = g.tr_mul(&grad);
    let dir = &ginv * &a;
    if dir.norm() <= STRICT_FEAS_TOL {
        return Err(Error::StrictFeasibility { norm: dir.norm() });
    }
    let n = a.dot(&dir);
    Ok(SafetyFilterOutput {
        u: dir * (-eta / n),
        eta,
        multiplier: -2.0 * eta / n,
    })
}

/// Scalars shared by the CLF-CBF closed forms at one state.
#[derive(Debug, Clone, Copy)]
pub struct ClfCbfTerms {
    pub f_v: f64,
    pub f_h: f64,
    /// `‖∇V‖²_D`
    pub dvv: f64,
    /// `∇VᵀD∇h`
    pub dvh: f64,
    /// `‖∇h‖²_D`
    pub dhh: f64,
}

impl ClfCbfTerms {
    /// `Δ = [[‖∇V‖²_D + 1/p, −∇VᵀD∇h], [−∇VᵀD∇h, ‖∇h‖²_D]]`.
    pub fn delta_matrix(&self, p: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[self.dvv + 1.0 / p, -self.dvh, -self.dvh, self.dhh])
    }

    /// Both-active multipliers `(λ₁, λ₂)` and `|Δ|`.
    pub fn both_active(&self, p: f64) -> (f64, f64, f64) {
        let d11 = self.dvv + 1.0 / p;
        let det = d11 * self.dhh - self.dvh * self.dvh;
        let l1 = (self.f_v * self.dhh - self.f_h * self.dvh) / det;
        let l2 = (self.f_v * self.dvh - self.f_h * d11) / det;
        (l1, l2, det)
    }
}

pub(crate) struct ClfCbfVectors {
    pub terms: ClfCbfTerms,
    /// `G⁻¹gᵀ∇V`
    pub dir_v: Vector,
    /// `G⁻¹gᵀ∇h`
    pub dir_h: Vector,
}

pub(crate) fn clf_cbf_vectors(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    x: &Vector,
) -> Result<ClfCbfVectors> {
    clf_cbf_vectors_at(cbf, clf, weight, x, &model.closed_drift(x), &model.input_matrix(x))
}

fn clf_cbf_vectors_at(
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    x: &Vector,
    drift: &Vector,
    g: &Matrix,
) -> Result<ClfCbfVectors> {
    let ginv = weight.inverse(x)?;
    let grad_v = clf.gradient(x);
    let grad_h = cbf.gradient(x);
    let av = g.tr_mul(&grad_v);
    let ah = g.tr_mul(&grad_h);
    let dir_v = &ginv * &av;
    let dir_h = &ginv * &ah;
    Ok(ClfCbfVectors {
        terms: ClfCbfTerms {
            f_v: grad_v.dot(drift) + clf.beta().eval(clf.value(x)),
            f_h: grad_h.dot(drift) + cbf.alpha().eval(cbf.value(x)),
            dvv: av.dot(&dir_v),
            dvh: av.dot(&dir_h),
            dhh: ah.dot(&dir_h),
        },
        dir_v,
        dir_h,
    })
}

/// Multipliers and `Δ` of the both-active case at a state.
pub fn clf_cbf_terms(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    x: &Vector,
) -> Result<ClfCbfTerms> {
    Ok(clf_cbf_vectors(model, cbf, clf, weight, x)?.terms)
}

/// Closed-form CLF-CBF QP, checking the active sets ∅, {clf}, {cbf},
/// {clf, cbf} in that order.
pub fn clf_cbf_qp(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    p: f64,
    x: &Vector,
) -> Result<KktPoint> {
    clf_cbf_qp_at(model, cbf, clf, weight, p, x, &model.closed_drift(x), &model.input_matrix(x))
}

/// [`clf_cbf_qp`] with `f̃(x)` and `g(x)` already evaluated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn clf_cbf_qp_at(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    p: f64,
    x: &Vector,
    drift: &Vector,
    g: &Matrix,
) -> Result<KktPoint> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty p must be positive, got {p}")));
    }
    let ClfCbfVectors { terms: t, dir_v, dir_h } = clf_cbf_vectors_at(cbf, clf, weight, x, drift, g)?;
    let m = model.input_dim();
    let kkt = |u: Vector, delta: f64, l1: f64, l2: f64, active: Vec<usize>| KktPoint {
        u,
        delta,
        multipliers: vec![l1, l2],
        active_set: active,
        stationarity_residual: 0.0,
    };

    if t.f_v <= 0.0 && t.f_h >= 0.0 {
        return Ok(kkt(Vector::zeros(m), 0.0, 0.0, 0.0, vec![]));
    }
    let d11 = t.dvv + 1.0 / p;
    // Only the CLF row active.
    let l1 = t.f_v / d11;
    if l1 >= -DUAL_TOL {
        let l1 = l1.max(0.0);
        let cbf_row = t.f_h - l1 * t.dvh;
        if cbf_row >= -FEAS_TOL {
            return Ok(kkt(&dir_v * -l1, l1 / p, l1, 0.0, vec![0]));
        }
    }
    let norm_h = dir_h.norm();
    if norm_h <= STRICT_FEAS_TOL {
        return Err(Error::StrictFeasibility { norm: norm_h });
    }
    // Only the CBF row active.
    let l2 = -t.f_h / t.dhh;
    if l2 >= -DUAL_TOL {
        let l2 = l2.max(0.0);
        let clf_row = t.f_v + l2 * t.dvh;
        if clf_row <= FEAS_TOL {
            return Ok(kkt(&dir_h * l2, 0.0, 0.0, l2, vec![1]));
        }
    }
    let (l1, l2, det) = t.both_active(p);
    if det <= 0.0 || l1 < -DUAL_TOL || l2 < -DUAL_TOL {
        return Err(Error::Infeasible {
            row: 1,
            violation: -t.f_h,
        });
    }
    let (l1, l2) = (l1.max(0.0), l2.max(0.0));
    Ok(kkt(&dir_h * l2 - &dir_v * l1, l1 / p, l1, l2, vec![0, 1]))
}

/// Min-norm CLF controller without CBF rows,
/// `u = −max(0, F_V/(‖∇V‖²_D + 1/p))·G⁻¹gᵀ∇V`.
pub fn unfiltered_control(
    model: &SystemModel,
    clf: &LyapunovPair,
    weight: &InputWeight,
    p: f64,
    x: &Vector,
) -> Result<KktPoint> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty p must be positive, got {p}")));
    }
    let ginv = weight.inverse(x)?;
    let av = model.input_matrix(x).transpose() * clf.gradient(x);
    let dir_v = &ginv * &av;
    let f_v = clf_offset(model, clf, x);
    let l1 = (f_v / (av.dot(&dir_v) + 1.0 / p)).max(0.0);
    Ok(KktPoint {
        u: dir_v * -l1,
        delta: l1 / p,
        multipliers: vec![l1],
        active_set: if f_v > FEAS_TOL { vec![0] } else { vec![] },
        stationarity_residual: 0.0,
    })
}

// ───────────────────────── diagnostics ─────────────────────────

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeasibilityViolation {
    #[serde(serialize_with = "crate::ser::vector")]
    pub x: Vector,
    pub constraint_value: f64,
    pub input_gain: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeasibilityReport {
    pub checked: usize,
    /// Samples where `|∇hᵀf + α(h)| < 1e-8`.
    pub critical: usize,
    pub violations: Vec<FeasibilityViolation>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags samples where the CBF constraint is critical
/// (`|∇hᵀf + α(h)| < 1e-8`) but the input has no authority
/// (`‖gᵀ∇h‖ ≤ 1e-8`).
pub fn check_strict_feasibility(model: &SystemModel, pair: &BarrierPair, samples: &[Vector]) -> Result<FeasibilityReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("strict-feasibility check needs samples".into()));
    }
    let mut report = FeasibilityReport {
        checked: samples.len(),
        critical: 0,
        violations: Vec::new(),
    };
    for x in samples {
        let grad = pair.gradient(x);
        let value = grad.dot(&model.drift(x)) + pair.alpha().eval(pair.value(x));
        if value.abs() >= 1e-8 {
            continue;
        }
        report.critical += 1;
        let gain = (model.input_matrix(x).transpose() * grad).norm();
        if gain <= 1e-8 {
            report.violations.push(FeasibilityViolation {
                x: x.clone(),
                constraint_value: value,
                input_gain: gain,
            });
        }
    }
    Ok(report)
}
