mod common;

use barrier_lab_core::linalg::max_abs;
use barrier_lab_core::spectral::{
    eigen_and_classify, fd_jacobian, jacobian_clf_cbf_boundary, jacobian_safety_filter_boundary,
    spectral_invariance_check,
};
use barrier_lab_core::{Controller, ControllerFamily, Matrix, Vector};
use common::*;

fn closed_form(ctrl: &Controller, x: &Vector) -> Matrix {
    let cbf = &ctrl.cbfs()[0];
    match ctrl.family() {
        ControllerFamily::SafetyFilter => jacobian_safety_filter_boundary(ctrl.model(), cbf, ctrl.weight(), x).unwrap(),
        ControllerFamily::ClfCbfQp { clf, penalty } => {
            jacobian_clf_cbf_boundary(ctrl.model(), cbf, clf, ctrl.weight(), *penalty, x).unwrap()
        }
    }
}

fn all_cases() -> Vec<(String, Controller, Vec<Vector>)> {
    let mut cases: Vec<_> = fig3_variants().into_iter().map(|(n, c)| (n, c, fig3_golden())).collect();
    cases.extend(fig2_variants().into_iter().map(|(n, c)| (n, c, fig2_golden())));
    cases
}

#[test]
fn closed_form_matches_central_differences() {
    for (name, ctrl, golden) in all_cases() {
        for x in &golden {
            let j = closed_form(&ctrl, x);
            let fd = fd_jacobian(|y| ctrl.field(y).unwrap(), x, 1e-5);
            assert!(max_abs(&(&j - &fd)) < 1e-5, "{name} at {x:?}: {j} vs {fd}");
        }
    }
}

#[test]
fn boundary_gradient_is_left_eigenvector() {
    for (name, ctrl, golden) in all_cases() {
        let cbf = &ctrl.cbfs()[0];
        for x in &golden {
            let j = closed_form(&ctrl, x);
            let gh = cbf.gradient(x);
            let r = gh.transpose() * &j + gh.transpose() * cbf.alpha_prime0();
            assert!(r.amax() < 1e-8, "{name} at {x:?}: {r}");
        }
    }
}

#[test]
fn fig3_jacobian_at_stable_point() {
    let j = closed_form(&fig3(false, 1.0), &v2(3.0, 0.0));
    assert!(max_abs(&(j - Matrix::from_diagonal(&v2(-1.0, -2.0)))) < 1e-12);
}

#[test]
fn reduced_spectra_agree_across_variants() {
    for family in [fig3_variants(), fig2_variants()] {
        let golden = if family.len() == 4 { fig3_golden() } else { fig2_golden() };
        for x in &golden {
            let (_, base) = &family[0];
            let jb = closed_form(base, x);
            let ab = base.cbfs()[0].alpha_prime0();
            for (name, other) in &family[1..] {
                let jo = closed_form(other, x);
                let ao = other.cbfs()[0].alpha_prime0();
                let verdict = spectral_invariance_check(&jb, ab, &jo, ao, 1e-7);
                assert!(verdict.passed(), "{name} at {x:?}: {verdict:?}");
                let spec = eigen_and_classify(&jo, Some(ao)).unwrap();
                assert_eq!(spec.known_factor_root, Some(-ao));
                assert!(ao == 1.0 || ao == 10.0);
                assert!(spec.factor_remainder.unwrap() < 1e-6);
            }
        }
    }
}
