//! Numerical test of the Hessian equivalence relation between two CBFs of
//! the same safe set.
//!
//! On `∂S` two CBFs are related when `∇h₂ = ζ∇h₁` with `ζ > 0` and
//! `H₂ = ∇h₁ζ̃ᵀ + ζ̃∇h₁ᵀ + ζH₁` for some vector `ζ̃`.

use crate::model::{transform_cbf, BarrierPair, TransformStep};
use crate::{Error, Result, Vector};

/// Default tolerance of the Hessian residual.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Largest gradient parallelism defect accepted.
pub const GRADIENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceVerdict {
    /// Gradient relation holds and every Hessian residual is below `tol`.
    EquivalentWithinTol,
    /// Gradient relation holds; the Hessian residual is within `10·tol`.
    GradientRelationOnly,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EquivalenceReport {
    #[serde(serialize_with = "crate::ser::vectors")]
    pub samples: Vec<Vector>,
    pub zeta: Vec<f64>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub zeta_tilde: Vec<Vector>,
    pub gradient_residual: Vec<f64>,
    pub hessian_residual: Vec<f64>,
    pub verdict: EquivalenceVerdict,
}

impl EquivalenceReport {
    pub fn max_gradient_residual(&self) -> f64 {
        self.gradient_residual.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_hessian_residual(&self) -> f64 {
        self.hessian_residual.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn min_zeta(&self) -> f64 {
        self.zeta.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// 256 boundary samples of `h₁` when its geometry supports sampling.
pub fn default_samples(h1: &BarrierPair) -> Option<Vec<Vector>> {
    h1.boundary_samples(256)
}

/// `ζ = ∇h₂ᵀ∇h₁/‖∇h₁‖²` and the defect `‖∇h₂ − ζ∇h₁‖/‖∇h₂‖` per sample.
pub fn gradient_ratio(h1: &BarrierPair, h2: &BarrierPair, samples: &[Vector]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut zeta = Vec::with_capacity(samples.len());
    let mut residual = Vec::with_capacity(samples.len());
    for x in samples {
        for (name, pair) in [("h1", h1), ("h2", h2)] {
            let h = pair.value(x);
            if h.abs() >= 1e-9 {
                return Err(Error::Precondition(format!(
                    "sample {:?} is off the zero set of {name} (h = {h:e})",
                    x.as_slice()
                )));
            }
        }
        let g1 = h1.gradient(x);
        let g2 = h2.gradient(x);
        let nn = g1.norm_squared();
        if nn.sqrt() <= 1e-10 {
            return Err(Error::Precondition(format!("∇h1 vanishes at {:?}", x.as_slice())));
        }
        let z = g2.dot(&g1) / nn;
        let g2n = g2.norm();
        let defect = (&g2 - &g1 * z).norm();
        zeta.push(z);
        residual.push(if g2n > 0.0 { defect / g2n } else { f64::INFINITY });
    }
    Ok((zeta, residual))
}

/// Whether the gradient relation holds for the output of [`gradient_ratio`].
pub fn gradient_relation_holds(zeta: &[f64], residual: &[f64]) -> bool {
    residual.iter().all(|&r| r < GRADIENT_TOL) && zeta.iter().all(|&z| z > 1e-10)
}

/// Fits `ζ̃` in closed form at each sample and reports the residual of the
/// rank-two structure:
///
/// ```text
/// A  = H₂ − ζH₁
/// ζ̃  = A g/‖g‖² − g (gᵀA g)/(2‖g‖⁴),   g = ∇h₁
/// residual = max |A − gζ̃ᵀ − ζ̃gᵀ|
/// ```
pub fn hessian_equivalence(h1: &BarrierPair, h2: &BarrierPair, samples: &[Vector], tol: f64) -> Result<EquivalenceReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("equivalence check needs boundary samples".into()));
    }
    let (zeta, gradient_residual) = gradient_ratio(h1, h2, samples)?;
    let mut zeta_tilde = Vec::with_capacity(samples.len());
    let mut hessian_residual = Vec::with_capacity(samples.len());
    for (x, &z) in samples.iter().zip(&zeta) {
        let g = h1.gradient(x);
        let nn = g.norm_squared();
        let a = h2.hessian(x) - h1.hessian(x) * z;
        let ag = &a * &g;
        let zt = &ag / nn - &g * (g.dot(&ag) / (2.0 * nn * nn));
        let rest = &a - &g * zt.transpose() - &zt * g.transpose();
        hessian_residual.push(rest.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        zeta_tilde.push(zt);
    }
    let worst = hessian_residual.iter().fold(0.0_f64, |a, &b| a.max(b));
    let verdict = if !gradient_relation_holds(&zeta, &gradient_residual) {
        EquivalenceVerdict::Rejected
    } else if worst < tol {
        EquivalenceVerdict::EquivalentWithinTol
    } else if worst < 10.0 * tol {
        EquivalenceVerdict::GradientRelationOnly
    } else {
        EquivalenceVerdict::Rejected
    };
    Ok(EquivalenceReport {
        samples: samples.to_vec(),
        zeta,
        zeta_tilde,
        gradient_residual,
        hessian_residual,
        verdict,
    })
}

/// Left fold of [`transform_cbf`] over `steps`.
pub fn compose_transforms(base: &BarrierPair, steps: &[TransformStep]) -> Result<BarrierPair> {
    steps.iter().try_fold(base.clone(), |acc, step| transform_cbf(&acc, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ball_cbf, BallForm, Gamma, PositiveWeight};

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn h1() -> BarrierPair {
        make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap()
    }

    fn eta() -> PositiveWeight {
        PositiveWeight::shifted_square(v2(5.0, 1.0), 1.0).unwrap()
    }

    #[test]
    fn scaling_has_constant_ratio() {
        let base = h1();
        let ten = transform_cbf(&base, &TransformStep::composed(2, 10.0, Gamma::identity())).unwrap();
        let samples = default_samples(&base).unwrap();
        let (zeta, res) = gradient_ratio(&base, &ten, &samples).unwrap();
        assert!(zeta.iter().all(|z| (z - 10.0).abs() < 1e-12));
        assert!(res.iter().all(|r| *r < 1e-15));
    }

    #[test]
    fn weighted_pair_recovers_grad_eta() {
        let base = h1();
        let h2 = transform_cbf(&base, &TransformStep::weighted(1.0, eta())).unwrap();
        let x = v2(3.0, 0.0);
        let report = hessian_equivalence(&base, &h2, &[x.clone()], DEFAULT_TOL).unwrap();
        assert!((report.zeta[0] - 6.0).abs() < 1e-12);
        assert!((&report.zeta_tilde[0] - v2(-4.0, -2.0)).norm() < 1e-10);
        let full = hessian_equivalence(&base, &h2, &default_samples(&base).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(full.verdict, EquivalenceVerdict::EquivalentWithinTol);
    }

    #[test]
    fn reflexive() {
        let base = h1();
        let report = hessian_equivalence(&base, &base, &default_samples(&base).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(report.verdict, EquivalenceVerdict::EquivalentWithinTol);
        assert!(report.zeta.iter().all(|&z| z == 1.0));
        assert!(report.zeta_tilde.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn different_ball_is_rejected_by_precondition() {
        let other = make_ball_cbf(&v2(2.0, 0.0), 1.2, BallForm::Full, 1.0).unwrap();
        let base = h1();
        assert!(matches!(
            gradient_ratio(&base, &other, &default_samples(&base).unwrap()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tangent_perturbation_is_rejected() {
        let base = h1();
        let h2 = transform_cbf(&base, &TransformStep::weighted(1.0, eta())).unwrap();
        let inner = h2.clone();
        let perturbed = BarrierPair::new(
            "perturbed",
            {
                let p = h2.clone();
                move |x| p.value(x)
            },
            {
                let p = h2.clone();
                move |x| p.gradient(x)
            },
            move |x: &Vector| {
                let r = x - v2(2.0, 0.0);
                let t = v2(-r[1], r[0]);
                inner.hessian(x) + &t * t.transpose()
            },
            h2.alpha().clone(),
        );
        let report = hessian_equivalence(&base, &perturbed, &default_samples(&base).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(report.verdict, EquivalenceVerdict::Rejected);
    }

    #[test]
    fn composition_chain() {
        let base = h1();
        assert_eq!(compose_transforms(&base, &[]).unwrap().value(&v2(0.0, 0.0)), base.value(&v2(0.0, 0.0)));
        let steps = [TransformStep::weighted(1.0, eta()), TransformStep::composed(2, 3.0, Gamma::identity())];
        let h3 = compose_transforms(&base, &steps).unwrap();
        let samples = default_samples(&base).unwrap();
        let report = hessian_equivalence(&base, &h3, &samples, DEFAULT_TOL).unwrap();
        assert_eq!(report.verdict, EquivalenceVerdict::EquivalentWithinTol);
        for (x, z) in samples.iter().zip(&report.zeta) {
            assert!((z - 3.0 * eta().eval(x)).abs() < 1e-9);
        }
    }
}
