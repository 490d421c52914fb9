mod common;

use barrier_lab_core::{Controller, Vector};
use common::*;
use proptest::prelude::*;

fn slack_states(ctrl: &Controller, seed: u64, count: usize) -> Vec<Vector> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cbf = &ctrl.cbfs()[0];
    let mut out = Vec::new();
    while out.len() < count {
        let x = v2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let h = cbf.value(&x);
        if h < 0.0 {
            continue;
        }
        // Slack of the CBF row at the unfiltered input.
        let slack = cbf.gradient(&x).dot(&ctrl.unfiltered_field(&x).unwrap()) + cbf.alpha().eval(h);
        if slack > 1e-6 {
            out.push(x);
        }
    }
    out
}

#[test]
fn slack_cbf_row_leaves_input_unchanged() {
    let mut all = fig3_variants();
    all.extend(fig2_variants());
    for (i, (name, ctrl)) in all.iter().enumerate() {
        for x in slack_states(ctrl, 100 + i as u64, 512) {
            let a = ctrl.field(&x).unwrap();
            let b = ctrl.unfiltered_field(&x).unwrap();
            assert!((&a - &b).amax() < 1e-10, "{name} at {x:?}");
        }
    }
}

fn boundary_fields_agree(family: &[(String, Controller)], center: Vector, radius: f64) {
    for k in 0..512 {
        let th = std::f64::consts::TAU * k as f64 / 512.0;
        let x = &center + v2(th.cos(), th.sin()) * radius;
        let base = family[0].1.field(&x).unwrap();
        for (name, other) in &family[1..] {
            let f = other.field(&x).unwrap();
            assert!((&f - &base).amax() < 1e-9, "{name} at {x:?}: {f} vs {base}");
        }
    }
}

#[test]
fn boundary_fields_independent_of_cbf_pair() {
    boundary_fields_agree(&fig3_variants(), v2(2.0, 0.0), 1.0);
    boundary_fields_agree(&fig2_variants(), v2(0.0, 3.0), 1.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn boundary_field_is_tangent(theta in 0.0..std::f64::consts::TAU, variant in 0usize..4) {
        let (_, ctrl) = &fig3_variants()[variant];
        let x = v2(2.0 + theta.cos(), theta.sin());
        let f = ctrl.field(&x).unwrap();
        let gh = ctrl.cbfs()[0].gradient(&x);
        prop_assert!(gh.dot(&f) >= -1e-9 * gh.norm());
    }

    #[test]
    fn field_is_continuous_across_activation(theta in 0.0..std::f64::consts::TAU, r in 1.0f64..4.0) {
        let ctrl = fig3(true, 10.0);
        let x = v2(2.0 + r * theta.cos(), r * theta.sin());
        let e = 1e-7;
        let a = ctrl.field(&x).unwrap();
        let b = ctrl.field(&(&x + v2(e, e))).unwrap();
        prop_assert!((&a - &b).amax() < 1e-3);
    }
}
