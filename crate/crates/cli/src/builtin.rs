//! Built-in planar scenarios.
//!
//! Every fig3 variant lists the same four CBF pairs and differs only in the
//! pair wired into the controller, so `compare` on any of them checks all
//! four. The fig2 variants do the same with two pairs.

use barrier_lab_core::BallForm;

use crate::config::*;
use crate::error::CliError;

pub const NAMES: [&str; 6] = ["fig2", "fig2-h2a2", "fig3", "fig3-h2a1", "fig3-h1a2", "fig3-h2a2"];

fn diag(a: f64, b: f64) -> Vec<Vec<f64>> {
    vec![vec![a, 0.0], vec![0.0, b]]
}

fn integrator() -> SystemConfig {
    SystemConfig::Builtin(BuiltinSystem {
        name: BuiltinSystemName::SingleIntegrator,
        dim: 2,
    })
}

fn ball(label: &str, center: [f64; 2], radius: f64, form: BallForm, slope: f64) -> CbfConfig {
    CbfConfig::Ball(BallCbf {
        label: Some(label.into()),
        center: center.to_vec(),
        radius,
        form,
        alpha: AlphaConfig::Linear { slope },
    })
}

/// `(‖x − (5,1)‖² + 1)·h_base`.
fn weighted(label: &str, base: usize, slope: f64) -> CbfConfig {
    CbfConfig::Transform(TransformCbf {
        label: Some(label.into()),
        base,
        a: 0.0,
        b: 1.0,
        gamma: GammaConfig::Identity,
        eta: EtaConfig::ShiftedSquare {
            center: vec![5.0, 1.0],
            offset: 1.0,
        },
        alpha: Some(AlphaConfig::Linear { slope }),
    })
}

fn grid(x_range: [f64; 2], y_range: [f64; 2], nx: usize, ny: usize) -> GridConfig {
    GridConfig { x_range, y_range, nx, ny }
}

fn simulate(initial: Vec<Vec<f64>>, random: usize, bounds: Option<Vec<[f64; 2]>>, filtered: bool, prefix: &str) -> TaskConfig {
    TaskConfig::Simulate(SimulateTask {
        initial,
        random,
        bounds,
        horizon: 20.0,
        dt: 1e-3,
        filtered,
        record_stride: 10,
        invariance_tol: 1e-6,
        prefix: prefix.into(),
    })
}

fn roa(grid: GridConfig, horizon: f64, dt: f64, convergence_radius: f64) -> TaskConfig {
    TaskConfig::Roa(RoaTask {
        grid,
        horizon,
        dt,
        convergence_radius,
        file: "roa.csv".into(),
    })
}

fn fig3(name: &str, pair: usize) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        notes: Vec::new(),
        seed: 0,
        output_dir: None,
        system: integrator(),
        nominal_gain: Some(diag(-1.0, -5.0)),
        cbfs: vec![
            ball("h1,alpha1", [2.0, 0.0], 1.0, BallForm::Full, 1.0),
            weighted("h2,alpha1", 0, 1.0),
            ball("h1,alpha2", [2.0, 0.0], 1.0, BallForm::Full, 10.0),
            weighted("h2,alpha2", 0, 10.0),
        ],
        clf: None,
        controller: ControllerConfig::SafetyFilter(SafetyFilterConfig {
            cbfs: vec![pair],
            weight: WeightConfig::Identity,
        }),
        tasks: vec![
            TaskConfig::Equilibria(EquilibriaTask::default()),
            TaskConfig::Jacobians(JacobiansTask::default()),
            TaskConfig::Equivalence(EquivalenceTask {
                pairs: vec![[0, 1], [2, 3], [0, 3]],
                tol: 1e-8,
                samples: 256,
            }),
            TaskConfig::Field(FieldTask {
                grid: grid([0.0, 4.0], [-2.0, 2.0], 81, 81),
                file: "field.csv".into(),
            }),
            simulate(vec![vec![5.0, 0.2]], 20, Some(vec![[-5.0, 5.0], [-5.0, 5.0]]), true, "trajectory"),
            simulate(vec![vec![2.5, 0.01]], 0, None, false, "unfiltered"),
            roa(grid([-1.0, 5.0], [-3.0, 3.0], 24, 24), 20.0, 1e-2, 1e-4),
        ],
        compare: Some(CompareConfig::default()),
    }
}

fn fig2(name: &str, pair: usize) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        notes: vec![
            "penalty p = 1, beta(s) = s and G = I are defaults, not values from the source setup".into(),
            "equilibrium locations do not depend on p; stability labels may".into(),
            "with beta(s) = s the origin is non-hyperbolic and trajectories approach it slowly, so the roa task runs for 60 s and uses convergence radius 0.2".into(),
        ],
        seed: 0,
        output_dir: None,
        system: integrator(),
        nominal_gain: None,
        cbfs: vec![
            ball("h1,alpha1", [0.0, 3.0], 1.5, BallForm::Half, 1.0),
            weighted("h2,alpha2", 0, 10.0),
        ],
        clf: Some(ClfConfig {
            q: diag(6.0, 1.0),
            xstar: vec![0.0, 0.0],
            beta: AlphaConfig::Linear { slope: 1.0 },
        }),
        controller: ControllerConfig::ClfCbfQp(ClfCbfConfig {
            cbfs: vec![pair],
            weight: WeightConfig::Identity,
            penalty: 1.0,
        }),
        tasks: vec![
            TaskConfig::Equilibria(EquilibriaTask::default()),
            TaskConfig::Jacobians(JacobiansTask::default()),
            TaskConfig::Equivalence(EquivalenceTask {
                pairs: vec![[0, 1]],
                tol: 1e-8,
                samples: 256,
            }),
            TaskConfig::Field(FieldTask {
                grid: grid([-3.0, 3.0], [0.0, 6.0], 61, 61),
                file: "field.csv".into(),
            }),
            simulate(vec![vec![0.0, 6.0]], 20, Some(vec![[-5.0, 5.0], [-5.0, 5.0]]), true, "trajectory"),
            roa(grid([-3.0, 3.0], [0.0, 7.0], 24, 24), 60.0, 2e-2, 0.2),
        ],
        compare: Some(CompareConfig::default()),
    }
}

/// Config of a built-in scenario by name.
pub fn scenario(name: &str) -> Result<ScenarioConfig, CliError> {
    Ok(match name {
        "fig2" => fig2(name, 0),
        "fig2-h2a2" => fig2(name, 1),
        "fig3" => fig3(name, 0),
        "fig3-h2a1" => fig3(name, 1),
        "fig3-h1a2" => fig3(name, 2),
        "fig3-h2a2" => fig3(name, 3),
        _ => {
            return Err(CliError::Usage(format!(
                "unknown scenario `{name}`; valid names: {}",
                NAMES.join(", ")
            )))
        }
    })
}

/// Pretty JSON of a config, newline-terminated.
pub fn to_json(config: &ScenarioConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("configs serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in NAMES {
            let cfg = scenario(name).unwrap();
            let text = to_json(&cfg);
            let back = parse_config(name, &text).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = scenario("fig4").unwrap_err().to_string();
        assert!(err.contains("fig3-h2a2"));
    }
}
