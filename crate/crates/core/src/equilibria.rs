//! Location and classification of closed-loop equilibria.
//!
//! Boundary equilibria of planar balls are found by sweeping the closed-loop
//! field along the circle and polishing local minima of its norm by
//! Gauss–Newton on `[F(x); h(x)] = 0`. Other geometries polish user seeds.
//! Interior equilibria come from damped Newton runs on a seed grid.

use rayon::prelude::*;

use crate::controller::{Controller, ControllerFamily};
use crate::linalg::{central_jacobian, lexicographic};
use crate::model::{BarrierPair, LyapunovPair, SystemModel};
use crate::qp::{clf_cbf_terms, InputWeight};
use crate::spectral::{
    eigen_and_classify, fd_jacobian, jacobian_clf_cbf_boundary, jacobian_safety_filter_boundary,
    safety_filter_delta, SpectralResult,
};
use crate::{Error, Matrix, Result, Vector};

/// Multipliers and field residuals below this are treated as zero when
/// classifying.
pub const DESIRABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Desirability {
    Desirable,
    Undesirable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Multipliers {
    ClfCbf {
        lambda1: f64,
        lambda2: f64,
        #[serde(serialize_with = "crate::ser::matrix")]
        delta_matrix: Matrix,
        det: f64,
    },
    SafetyFilter {
        delta_sf: f64,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EquilibriumReport {
    #[serde(serialize_with = "crate::ser::vector")]
    pub x_star: Vector,
    pub kind: EquilibriumKind,
    pub desirability: Desirability,
    pub controller: String,
    /// CBF whose boundary holds the point.
    pub cbf_index: Option<usize>,
    /// Smallest CBF value at the point.
    pub h: f64,
    pub multipliers: Option<Multipliers>,
    /// Norm of the closed-loop field at the point.
    pub residual: f64,
    pub spectral: Option<SpectralResult>,
    /// Why the spectral data is missing, if it is.
    pub note: Option<String>,
}

impl EquilibriumReport {
    pub fn stability(&self) -> Option<crate::spectral::Stability> {
        self.spectral.as_ref().map(|s| s.stability)
    }
}

/// Closed-form multipliers and `Δ` at a boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMultipliers {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta_matrix: Matrix,
    pub det: f64,
}

/// Search parameters for [`analyze`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSearch {
    /// Boundary samples of the planar sweep.
    pub n_sweep: usize,
    /// Field-norm level below which a sweep minimum is always polished.
    pub detect_threshold: f64,
    pub polish_tol: f64,
    pub max_polish_iters: usize,
    pub dedup_radius: f64,
    /// Starting points for geometries without a sweep.
    pub boundary_seeds: Vec<Vector>,
    pub interior_lower: Vector,
    pub interior_upper: Vector,
    pub interior_seeds_per_dim: usize,
}

impl EquilibriumSearch {
    pub fn new(interior_lower: Vector, interior_upper: Vector) -> Self {
        Self {
            n_sweep: 2048,
            detect_threshold: 1e-3,
            polish_tol: 1e-10,
            max_polish_iters: 100,
            dedup_radius: 1e-7,
            boundary_seeds: Vec::new(),
            interior_lower,
            interior_upper,
            interior_seeds_per_dim: 9,
        }
    }

    /// Box `[−5, 5]ⁿ`.
    pub fn default_for(n: usize) -> Self {
        Self::new(Vector::from_element(n, -5.0), Vector::from_element(n, 5.0))
    }

    fn interior_seeds(&self) -> Vec<Vector> {
        let n = self.interior_lower.len();
        let per = self.interior_seeds_per_dim.max(1);
        let total = per.pow(n as u32);
        (0..total)
            .map(|mut k| {
                Vector::from_fn(n, |i, _| {
                    let idx = k % per;
                    k /= per;
                    let (lo, hi) = (self.interior_lower[i], self.interior_upper[i]);
                    if per == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * idx as f64 / (per - 1) as f64
                    }
                })
            })
            .collect()
    }
}

/// Reports of all equilibria found plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EquilibriumAnalysis {
    pub equilibria: Vec<EquilibriumReport>,
    pub warnings: Vec<String>,
}

impl EquilibriumAnalysis {
    pub fn undesirable(&self) -> impl Iterator<Item = &EquilibriumReport> {
        self.equilibria.iter().filter(|e| e.desirability == Desirability::Undesirable)
    }

    pub fn interior(&self) -> impl Iterator<Item = &EquilibriumReport> {
        self.equilibria.iter().filter(|e| e.kind == EquilibriumKind::Interior)
    }
}

/// `λ₁`, `λ₂`, `Δ` and `|Δ|` of the both-active CLF-CBF system at a
/// boundary state.
pub fn multipliers_on_boundary(
    model: &SystemModel,
    cbf: &BarrierPair,
    clf: &LyapunovPair,
    weight: &InputWeight,
    p: f64,
    x: &Vector,
) -> Result<BoundaryMultipliers> {
    let h = cbf.value(x);
    if h.abs() >= 1e-9 {
        return Err(Error::NotOnBoundary { h });
    }
    let gain = (model.input_matrix(x).transpose() * cbf.gradient(x)).norm();
    if gain <= 1e-10 {
        return Err(Error::StrictFeasibility { norm: gain });
    }
    let terms = clf_cbf_terms(model, cbf, clf, weight, x)?;
    let (lambda1, lambda2, det) = terms.both_active(p);
    Ok(BoundaryMultipliers {
        lambda1,
        lambda2,
        delta_matrix: terms.delta_matrix(p),
        det,
    })
}

fn field_or_nan(controller: &Controller, x: &Vector) -> Vector {
    controller
        .field(x)
        .unwrap_or_else(|_| Vector::from_element(x.len(), f64::NAN))
}

/// Multipliers of a boundary point of CBF `index` and its desirability.
fn boundary_classification(controller: &Controller, index: usize, x: &Vector) -> Result<(Multipliers, Desirability)> {
    let model = controller.model();
    let cbf = &controller.cbfs()[index];
    let (multipliers, undesirable) = match controller.family() {
        ControllerFamily::SafetyFilter => {
            let delta_sf = safety_filter_delta(model, cbf, controller.weight(), x)?;
            (Multipliers::SafetyFilter { delta_sf }, delta_sf < -DESIRABILITY_TOL)
        }
        ControllerFamily::ClfCbfQp { clf, penalty } => {
            let kkt = controller.evaluate(x)?.kkt;
            let terms = clf_cbf_terms(model, cbf, clf, controller.weight(), x)?;
            let (_, _, det) = terms.both_active(*penalty);
            let lambda1 = kkt.multipliers[0];
            let lambda2 = kkt.multipliers[controller.cbf_row_offset() + index];
            (
                Multipliers::ClfCbf {
                    lambda1,
                    lambda2,
                    delta_matrix: terms.delta_matrix(*penalty),
                    det,
                },
                lambda1 > DESIRABILITY_TOL && lambda2 > DESIRABILITY_TOL,
            )
        }
    };
    let desirability = if undesirable {
        Desirability::Undesirable
    } else if controller.unfiltered_field(x)?.norm() < DESIRABILITY_TOL {
        Desirability::Desirable
    } else {
        Desirability::Inconclusive
    };
    Ok((multipliers, desirability))
}

/// Desirability of a report: interior points are desirable; boundary points
/// are undesirable when the multipliers (or `δ_sf`) certify it, desirable
/// when the unfiltered field also vanishes, and inconclusive otherwise.
pub fn classify_desirability(report: &EquilibriumReport, controller: &Controller) -> Desirability {
    if report.kind == EquilibriumKind::Interior {
        return Desirability::Desirable;
    }
    let undesirable = match &report.multipliers {
        Some(Multipliers::ClfCbf { lambda1, lambda2, .. }) => {
            *lambda1 > DESIRABILITY_TOL && *lambda2 > DESIRABILITY_TOL
        }
        Some(Multipliers::SafetyFilter { delta_sf }) => *delta_sf < -DESIRABILITY_TOL,
        None => false,
    };
    if undesirable {
        Desirability::Undesirable
    } else if controller
        .unfiltered_field(&report.x_star)
        .map(|f| f.norm() < DESIRABILITY_TOL)
        .unwrap_or(false)
    {
        Desirability::Desirable
    } else {
        Desirability::Inconclusive
    }
}

/// Gauss–Newton on `[F(x); h(x)] = 0` with backtracking.
fn polish_boundary(controller: &Controller, cbf: &BarrierPair, x0: &Vector, search: &EquilibriumSearch) -> std::result::Result<Vector, f64> {
    let residual = |x: &Vector| {
        let f = field_or_nan(controller, x);
        let mut r = Vector::zeros(x.len() + 1);
        r.rows_mut(0, x.len()).copy_from(&f);
        r[x.len()] = cbf.value(x);
        r
    };
    let mut x = x0.clone();
    let mut r = residual(&x);
    let mut rn = r.norm();
    for _ in 0..search.max_polish_iters {
        if !rn.is_finite() {
            return Err(rn);
        }
        if rn < search.polish_tol {
            return Ok(x);
        }
        let n = x.len();
        let jf = central_jacobian(|y| field_or_nan(controller, y), &x, 1e-7);
        let gh = cbf.gradient(&x);
        let j = Matrix::from_fn(n + 1, n, |i, k| if i < n { jf[(i, k)] } else { gh[k] });
        let step = match j.svd(true, true).solve(&(-&r), 1e-14) {
            Ok(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(rn),
        };
        let mut t = 1.0;
        loop {
            let cand = &x + &step * t;
            let rc = residual(&cand);
            let rcn = rc.norm();
            if rcn < rn || t < 1e-4 {
                if rcn >= rn {
                    return if rn < search.polish_tol { Ok(x) } else { Err(rn) };
                }
                x = cand;
                r = rc;
                rn = rcn;
                break;
            }
            t *= 0.5;
        }
    }
    if rn < search.polish_tol {
        Ok(x)
    } else {
        Err(rn)
    }
}

/// Indices of cyclic sweep samples worth polishing: local minima of the
/// field norm that are below the detection threshold or below the field
/// variation to a neighbouring sample.
fn sweep_candidates(fields: &[Vector], threshold: f64) -> Vec<usize> {
    let count = fields.len();
    let norms: Vec<f64> = fields.iter().map(|f| f.norm()).collect();
    (0..count)
        .filter(|&i| {
            let prev = (i + count - 1) % count;
            let next = (i + 1) % count;
            let ni = norms[i];
            if !ni.is_finite() || ni > norms[prev] || ni > norms[next] {
                return false;
            }
            let variation = (&fields[i] - &fields[prev]).norm().max((&fields[i] - &fields[next]).norm());
            ni < threshold || ni <= variation
        })
        .collect()
}

fn push_unique(points: &mut Vec<Vector>, x: Vector, radius: f64) {
    if points.iter().all(|p| (p - &x).norm() > radius) {
        points.push(x);
    }
}

/// Boundary equilibria on the zero set of CBF `index`.
pub fn find_boundary_equilibria(controller: &Controller, index: usize, search: &EquilibriumSearch) -> Result<EquilibriumAnalysis> {
    let cbf = controller
        .cbfs()
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("no CBF with index {index}")))?;
    let mut warnings = Vec::new();
    let starts: Vec<Vector> = match cbf.boundary_samples(search.n_sweep) {
        Some(samples) => {
            let fields: Vec<Vector> = samples.par_iter().map(|x| field_or_nan(controller, x)).collect();
            sweep_candidates(&fields, search.detect_threshold)
                .into_iter()
                .map(|i| samples[i].clone())
                .collect()
        }
        None => {
            if search.boundary_seeds.is_empty() {
                warnings.push(format!(
                    "cbf[{index}]: no sweep available for this geometry and no boundary seeds given"
                ));
            }
            search
                .boundary_seeds
                .iter()
                .filter_map(|s| match cbf.project_to_boundary(s) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        warnings.push(format!("cbf[{index}]: seed {:?} dropped: {e}", s.as_slice()));
                        None
                    }
                })
                .collect()
        }
    };

    let polished: Vec<(Vector, std::result::Result<Vector, f64>)> = starts
        .par_iter()
        .map(|s| (s.clone(), polish_boundary(controller, cbf, s, search)))
        .collect();
    let mut points: Vec<Vector> = Vec::new();
    for (start, outcome) in polished {
        match outcome {
            Ok(x) => push_unique(&mut points, x, search.dedup_radius),
            Err(res) => warnings.push(format!(
                "cbf[{index}]: candidate near {:?} dropped, Gauss–Newton residual {res:e}",
                start.as_slice()
            )),
        }
    }

    let mut reports = Vec::new();
    for x in points {
        if let Some(w) = other_rows_active(controller, index, &x) {
            warnings.push(w);
            continue;
        }
        match boundary_report(controller, index, &x) {
            Ok(r) => reports.push(r),
            Err(e) => warnings.push(format!("cbf[{index}]: candidate {:?}: {e}", x.as_slice())),
        }
    }
    reports.sort_by(|a, b| lexicographic(&a.x_star, &b.x_star));
    Ok(EquilibriumAnalysis {
        equilibria: reports,
        warnings,
    })
}

/// With several obstacles each boundary is analysed alone; a candidate
/// where another CBF row is active or violated is reported and skipped.
fn other_rows_active(controller: &Controller, index: usize, x: &Vector) -> Option<String> {
    if controller.cbfs().len() < 2 {
        return None;
    }
    let offset = controller.cbf_row_offset();
    let kkt = match controller.evaluate_generic(x) {
        Ok(out) => out.kkt,
        Err(e) => return Some(format!("cbf[{index}]: candidate {:?}: {e}", x.as_slice())),
    };
    for (j, other) in controller.cbfs().iter().enumerate() {
        if j == index {
            continue;
        }
        if other.value(x) < -1e-9 || kkt.active_set.contains(&(offset + j)) {
            return Some(format!(
                "cbf[{index}]: candidate {:?} skipped, cbf[{j}] is not slack there",
                x.as_slice()
            ));
        }
    }
    None
}

fn boundary_report(controller: &Controller, index: usize, x: &Vector) -> Result<EquilibriumReport> {
    let (multipliers, desirability) = boundary_classification(controller, index, x)?;
    let mut report = EquilibriumReport {
        x_star: x.clone(),
        kind: EquilibriumKind::Boundary,
        desirability,
        controller: controller.family().name().into(),
        cbf_index: Some(index),
        h: controller.min_h(x),
        multipliers: Some(multipliers),
        residual: controller.field(x)?.norm(),
        spectral: None,
        note: None,
    };
    attach_spectrum(controller, &mut report);
    Ok(report)
}

/// Fills in the Jacobian and spectrum: closed forms at undesirable points,
/// the unfiltered finite-difference Jacobian at desirable ones.
pub fn attach_spectrum(controller: &Controller, report: &mut EquilibriumReport) {
    let x = &report.x_star;
    let outcome = match (report.kind, report.desirability, report.cbf_index) {
        (EquilibriumKind::Boundary, Desirability::Undesirable, Some(i)) => {
            let cbf = &controller.cbfs()[i];
            let j = match controller.family() {
                ControllerFamily::SafetyFilter => {
                    jacobian_safety_filter_boundary(controller.model(), cbf, controller.weight(), x)
                }
                ControllerFamily::ClfCbfQp { clf, penalty } => {
                    jacobian_clf_cbf_boundary(controller.model(), cbf, clf, controller.weight(), *penalty, x)
                }
            };
            j.and_then(|j| eigen_and_classify(&j, Some(cbf.alpha_prime0())))
        }
        (_, Desirability::Desirable, _) => {
            let j = fd_jacobian(
                |y| {
                    controller
                        .unfiltered_field(y)
                        .unwrap_or_else(|_| Vector::from_element(y.len(), f64::NAN))
                },
                x,
                1e-5,
            );
            if j.iter().all(|v| v.is_finite()) {
                eigen_and_classify(&j, None)
            } else {
                Err(Error::Precondition("unfiltered field not evaluable near the point".into()))
            }
        }
        _ => Err(Error::Precondition("no linearization for an inconclusive point".into())),
    };
    match outcome {
        Ok(s) => report.spectral = Some(s),
        Err(e) => report.note = Some(e.to_string()),
    }
}

/// Damped Newton on the closed-loop field from one seed. The finite
/// difference step shrinks with the Newton step so that degenerate roots
/// are still approached.
fn newton_interior(controller: &Controller, seed: &Vector) -> Option<Vector> {
    let field = |y: &Vector| field_or_nan(controller, y);
    let mut x = seed.clone();
    let mut f = field(&x);
    let mut last_step = 1.0_f64;
    for _ in 0..200 {
        let fnorm = f.norm();
        if !fnorm.is_finite() {
            return None;
        }
        if fnorm == 0.0 {
            break;
        }
        let step_size = (1e-3 * last_step).clamp(1e-12, 1e-5);
        let j = central_jacobian(field, &x, step_size);
        if !j.iter().all(|v| v.is_finite()) {
            return None;
        }
        let dx = match j.clone().lu().solve(&(-&f)) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => j.svd(true, true).solve(&(-&f), 1e-14).ok()?,
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1.0 / 1024.0 {
            let cand = &x + &dx * t;
            let fc = field(&cand);
            if fc.norm() < fnorm {
                x = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        last_step = dx.norm() * t;
        if last_step <= 1e-13 * (1.0 + x.norm()) {
            break;
        }
    }
    Some(x)
}

/// Equilibria strictly inside the safe set reached by Newton from a grid of
/// seeds. They are reported desirable since there the filtered and
/// unfiltered fields coincide.
pub fn find_interior_equilibria(controller: &Controller, search: &EquilibriumSearch) -> Result<Vec<EquilibriumReport>> {
    let n = controller.model().state_dim();
    if search.interior_lower.len() != n || search.interior_upper.len() != n {
        return Err(Error::dim("search box", n, search.interior_lower.len()));
    }
    let seeds: Vec<Vector> = search
        .interior_seeds()
        .into_iter()
        .filter(|s| controller.min_h(s) >= 0.0)
        .collect();
    if seeds.is_empty() {
        return Err(Error::Precondition("no interior seed lies in the safe set".into()));
    }
    let roots: Vec<Vector> = seeds
        .par_iter()
        .filter_map(|s| newton_interior(controller, s))
        .filter(|x| {
            controller.min_h(x) > 1e-6 && controller.field(x).map(|f| f.norm() < 1e-9).unwrap_or(false)
        })
        .collect();
    let mut points = Vec::new();
    for x in roots {
        push_unique(&mut points, x, search.dedup_radius);
    }
    points.sort_by(lexicographic);
    points
        .into_iter()
        .map(|x| {
            let mut report = EquilibriumReport {
                residual: controller.field(&x)?.norm(),
                h: controller.min_h(&x),
                x_star: x,
                kind: EquilibriumKind::Interior,
                desirability: Desirability::Desirable,
                controller: controller.family().name().into(),
                cbf_index: None,
                multipliers: None,
                spectral: None,
                note: None,
            };
            attach_spectrum(controller, &mut report);
            Ok(report)
        })
        .collect()
}

/// Boundary equilibria of every CBF plus interior equilibria, sorted
/// lexicographically.
pub fn analyze(controller: &Controller, search: &EquilibriumSearch) -> Result<EquilibriumAnalysis> {
    let mut equilibria = Vec::new();
    let mut warnings = Vec::new();
    for index in 0..controller.cbfs().len() {
        let part = find_boundary_equilibria(controller, index, search)?;
        equilibria.extend(part.equilibria);
        warnings.extend(part.warnings);
    }
    equilibria.extend(find_interior_equilibria(controller, search)?);
    equilibria.sort_by(|a, b| lexicographic(&a.x_star, &b.x_star));
    Ok(EquilibriumAnalysis { equilibria, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ball_cbf, BallForm, ClassK};

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn fig2_parts() -> (SystemModel, BarrierPair, LyapunovPair) {
        let model = SystemModel::single_integrator(2);
        let cbf = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, 1.0).unwrap();
        let clf = LyapunovPair::quadratic(Matrix::from_diagonal(&v2(6.0, 1.0)), v2(0.0, 0.0), ClassK::identity()).unwrap();
        (model, cbf, clf)
    }

    #[test]
    fn fig2_multipliers() {
        let (model, cbf, clf) = fig2_parts();
        let w = InputWeight::Identity(2);
        let m = multipliers_on_boundary(&model, &cbf, &clf, &w, 1.0, &v2(0.0, 4.5)).unwrap();
        assert!((m.lambda1 - 10.125).abs() < 1e-12);
        assert!((m.lambda2 - 30.375).abs() < 1e-12);
        assert!((m.det - 2.25).abs() < 1e-12);
        let near = multipliers_on_boundary(&model, &cbf, &clf, &w, 1.0, &v2(0.0, 1.5)).unwrap();
        assert!(near.lambda2 < 0.0);
        assert!(matches!(
            multipliers_on_boundary(&model, &cbf, &clf, &w, 1.0, &v2(0.0, 0.0)),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn orthogonal_gradients_give_p_beta() {
        // At a boundary point with ∇Vᵀ∇h = 0 and drift f = pβ(V)∇V (so that
        // F_h = 0 and the point is an equilibrium), λ₁ = pβ(V) and λ₂ = 0.
        let cbf = make_ball_cbf(&v2(0.0, 3.0), 1.5, BallForm::Half, 1.0).unwrap();
        let clf = LyapunovPair::quadratic(Matrix::identity(2, 2), v2(0.0, 0.0), ClassK::identity()).unwrap();
        let theta: f64 = (-0.5_f64).asin();
        let y = v2(1.5 * theta.cos(), 3.0 + 1.5 * theta.sin());
        assert!(clf.gradient(&y).dot(&cbf.gradient(&y)).abs() < 1e-12);
        let p = 2.0;
        let drift = clf.gradient(&y) * (p * clf.value(&y));
        let model = SystemModel::new(2, 2, move |_| drift.clone(), |_| Matrix::identity(2, 2), |_| Matrix::zeros(2, 2));
        let m = multipliers_on_boundary(&model, &cbf, &clf, &InputWeight::Identity(2), p, &y).unwrap();
        assert!((m.lambda1 - p * clf.value(&y)).abs() < 1e-12);
        assert!(m.lambda2.abs() < 1e-12);
    }

    #[test]
    fn interior_root_inside_obstacle_is_not_reported() {
        let model = SystemModel::new(
            2,
            2,
            |x: &Vector| v2(2.0, 0.0) - x,
            |_| Matrix::identity(2, 2),
            |_| -Matrix::identity(2, 2),
        );
        let cbf = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        let ctrl = Controller::safety_filter(model, cbf, InputWeight::Identity(2)).unwrap();
        let found = find_interior_equilibria(&ctrl, &EquilibriumSearch::default_for(2)).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn sweep_candidates_pick_minima() {
        let fields: Vec<Vector> = [3.0, 2.0, 1e-4, 2.0, 3.0, 2.5, 2.8]
            .iter()
            .map(|&v| v2(v, 0.0))
            .collect();
        let c = sweep_candidates(&fields, 1e-3);
        assert_eq!(c, vec![2]);
    }
}
