mod common;

use barrier_lab_core::sim::{integrate, integrate_batch, invariance_audit, SimOptions};
use barrier_lab_core::{Controller, TerminalLabel, Vector};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn safe_initial(ctrl: &Controller, seed: u64, count: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = v2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if ctrl.min_h(&x) >= 0.0 {
            out.push(x);
        }
    }
    out
}

fn batch_stays_safe(ctrl: &Controller, seed: u64, count: usize, horizon: f64) {
    let opts = SimOptions {
        horizon,
        record_stride: 10,
        ..SimOptions::default()
    };
    for (x0, traj) in safe_initial(ctrl, seed, count).iter().zip(integrate_batch(ctrl, &safe_initial(ctrl, seed, count), &opts)) {
        let traj = traj.unwrap();
        assert!(traj.min_h(0) >= -1e-6, "from {x0:?}: min h {}", traj.min_h(0));
    }
}

#[test]
fn filtered_fig3_is_forward_invariant() {
    batch_stays_safe(&fig3(false, 1.0), 1, 30, 20.0);
    batch_stays_safe(&fig3(true, 10.0), 2, 30, 20.0);
}

#[test]
fn filtered_fig2_is_forward_invariant() {
    batch_stays_safe(&fig2(false, 1.0), 3, 30, 20.0);
}

#[test]
fn unfiltered_fig3_enters_unsafe_set() {
    let ctrl = fig3(false, 1.0);
    let opts = SimOptions {
        filtered: false,
        horizon: 20.0,
        ..SimOptions::default()
    };
    let traj = integrate(&ctrl, &v2(2.5, 0.01), &opts).unwrap();
    assert!(traj.min_h(0) < -0.5, "min h {}", traj.min_h(0));
}

#[test]
fn rk4_has_fourth_order_error_ratio() {
    // The CBF row is slack while x² + 9y² < 3, so the loop is linear with
    // exact solution `x(t) = (x₀ e^{−t}, y₀ e^{−5t})`.
    let ctrl = fig3(false, 1.0);
    let x0 = v2(1.0, 0.3);
    let exact = v2((-1.0f64).exp(), 0.3 * (-5.0f64).exp());
    let err = |dt: f64| {
        let opts = SimOptions {
            dt,
            horizon: 1.0,
            record_stride: usize::MAX,
            ..SimOptions::default()
        };
        (integrate(&ctrl, &x0, &opts).unwrap().final_state() - &exact).norm()
    };
    let ratio = err(0.02) / err(0.01);
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn nonlinear_rk4_order_through_active_filter() {
    // Between the saddle and (3, 0) the row stays active and the boundary
    // field is smooth; compare against a fine run.
    let ctrl = fig3(false, 1.0);
    let r = 1.0 + 1e-9;
    let x0 = v2(2.0 + r * (0.5f64).cos(), r * (0.5f64).sin());
    let run = |dt: f64| {
        let opts = SimOptions {
            dt,
            horizon: 0.5,
            record_stride: usize::MAX,
            ..SimOptions::default()
        };
        integrate(&ctrl, &x0, &opts).unwrap().final_state().clone()
    };
    let reference = run(1e-4);
    let ratio = (run(0.02) - &reference).norm() / (run(0.01) - &reference).norm();
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn start_near_stable_boundary_point_converges() {
    let ctrl = fig3(false, 1.0);
    let golden = fig3_golden();
    let opts = SimOptions {
        horizon: 40.0,
        attractors: golden.clone(),
        convergence_radius: 1e-4,
        ..SimOptions::default()
    };
    let traj = integrate(&ctrl, &v2(5.0, 0.2), &opts).unwrap();
    match &traj.terminal_label {
        TerminalLabel::ConvergedTo { x_star, .. } => assert!((x_star - v2(3.0, 0.0)).norm() < 1e-12),
        other => panic!("ended with {other:?} at {:?}", traj.final_state()),
    }
    assert!(invariance_audit(&traj, &ctrl.cbfs()[0], 1e-6).passed);
}
