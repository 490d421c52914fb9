mod common;

use barrier_lab_core::qp::{clf_cbf_qp, safety_filter, solve_small_qp, unfiltered_control};
use barrier_lab_core::{Controller, ControllerFamily, QpProblem, Vector};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn safe_states(ctrl: &Controller, seed: u64, count: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = v2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if ctrl.min_h(&x) >= 0.0 {
            out.push(x);
        }
    }
    out
}

fn check(ctrl: &Controller, seed: u64) {
    let model = ctrl.model();
    let cbf = &ctrl.cbfs()[0];
    let weight = ctrl.weight();
    for x in safe_states(ctrl, seed, 1000) {
        let data = ctrl.problem().data_at(&x).unwrap();
        let generic = solve_small_qp(ctrl.problem(), &x).unwrap();
        assert!(data.certify(&generic).passes(1e-9), "generic at {x:?}");
        let closed = match ctrl.family() {
            ControllerFamily::SafetyFilter => safety_filter(model, cbf, weight, &x).unwrap().to_kkt(),
            ControllerFamily::ClfCbfQp { clf, penalty } => clf_cbf_qp(model, cbf, clf, weight, *penalty, &x).unwrap(),
        };
        assert!((&closed.u - &generic.u).amax() < 1e-10, "u at {x:?}");
        assert!((closed.delta - generic.delta).abs() < 1e-10, "δ at {x:?}");
        let cert = data.certify(&closed);
        assert!(cert.passes(1e-9), "closed form at {x:?}: {cert:?}");

        if let ControllerFamily::ClfCbfQp { clf, penalty } = ctrl.family() {
            let free = QpProblem::unfiltered(model, clf, weight, *penalty).unwrap();
            let a = unfiltered_control(model, clf, weight, *penalty, &x).unwrap();
            let b = solve_small_qp(&free, &x).unwrap();
            assert!((&a.u - &b.u).amax() < 1e-10 && (a.delta - b.delta).abs() < 1e-10);
            assert!(free.data_at(&x).unwrap().certify(&a).passes(1e-9));
        }
    }
}

#[test]
fn fig3_closed_forms_match_generic_solver() {
    for (i, (_, ctrl)) in fig3_variants().iter().enumerate() {
        check(ctrl, 30 + i as u64);
    }
}

#[test]
fn fig2_closed_forms_match_generic_solver() {
    for (i, (_, ctrl)) in fig2_variants().iter().enumerate() {
        check(ctrl, 20 + i as u64);
    }
}
