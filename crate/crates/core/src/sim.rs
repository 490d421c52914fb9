//! Fixed-step RK4 integration of the closed loops, invariance audits,
//! vector-field grids and empirical regions of attraction.

use rayon::prelude::*;

use crate::controller::Controller;
use crate::model::BarrierPair;
use crate::{Error, Result, Vector};

/// Integration settings shared by trajectories and ROA grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Known equilibria used for the convergence label.
    pub attractors: Vec<Vector>,
    pub convergence_radius: f64,
    /// Consecutive steps inside the radius required for convergence.
    pub hold_steps: usize,
    /// Leaving this box ends the run with [`TerminalLabel::LeftDomain`].
    pub domain: Option<(Vector, Vector)>,
    /// Integrate with the CBF rows (`true`) or without them.
    pub filtered: bool,
    /// Keep every `record_stride`-th step; the last step is always kept.
    pub record_stride: usize,
    pub stop_on_convergence: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 20.0,
            attractors: Vec::new(),
            convergence_radius: 1e-6,
            hold_steps: 10,
            domain: None,
            filtered: true,
            record_stride: 1,
            stop_on_convergence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum TerminalLabel {
    ConvergedTo {
        index: usize,
        #[serde(serialize_with = "crate::ser::vector")]
        x_star: Vector,
    },
    LeftDomain,
    MaxTime,
    Halted { time: f64, error: String },
}

impl TerminalLabel {
    /// Short label used in CSV output.
    pub fn code(&self) -> String {
        match self {
            TerminalLabel::ConvergedTo { index, .. } => format!("converged:{index}"),
            TerminalLabel::LeftDomain => "left_domain".into(),
            TerminalLabel::MaxTime => "max_time".into(),
            TerminalLabel::Halted { .. } => "halted".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub states: Vec<Vector>,
    /// Per time, one value per CBF of the controller.
    pub h_values: Vec<Vec<f64>>,
    /// Applied input `k + v` per time.
    #[serde(serialize_with = "crate::ser::vectors")]
    pub inputs: Vec<Vector>,
    pub multiplier_trace: Vec<Vec<f64>>,
    pub terminal_label: TerminalLabel,
}

impl Trajectory {
    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Smallest value of CBF `index` along the run.
    pub fn min_h(&self, index: usize) -> f64 {
        self.h_values.iter().map(|h| h[index]).fold(f64::INFINITY, f64::min)
    }
}

fn closed_loop(controller: &Controller, filtered: bool, x: &Vector) -> Result<Vector> {
    if filtered {
        controller.field(x)
    } else {
        controller.unfiltered_field(x)
    }
}

fn rk4_step(controller: &Controller, filtered: bool, x: &Vector, dt: f64) -> Result<Vector> {
    let k1 = closed_loop(controller, filtered, x)?;
    let k2 = closed_loop(controller, filtered, &(x + &k1 * (0.5 * dt)))?;
    let k3 = closed_loop(controller, filtered, &(x + &k2 * (0.5 * dt)))?;
    let k4 = closed_loop(controller, filtered, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Integrates the closed loop from `x0` with classical RK4 at fixed step.
///
/// A controller failure at a stage point stops the run with a
/// [`TerminalLabel::Halted`] record; the states so far are kept.
pub fn integrate(controller: &Controller, x0: &Vector, opts: &SimOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || opts.horizon < opts.dt {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and horizon ≥ dt, got dt = {}, horizon = {}",
            opts.dt, opts.horizon
        )));
    }
    if x0.len() != controller.model().state_dim() {
        return Err(Error::dim("x0", controller.model().state_dim(), x0.len()));
    }
    if opts.filtered {
        let h = controller.min_h(x0);
        if h < 0.0 {
            return Err(Error::OutsideSafeSet { h });
        }
    }
    let steps = (opts.horizon / opts.dt).round() as usize;
    let stride = opts.record_stride.max(1);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        h_values: Vec::new(),
        inputs: Vec::new(),
        multiplier_trace: Vec::new(),
        terminal_label: TerminalLabel::MaxTime,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &Vector| {
        let out = if opts.filtered {
            controller.evaluate(x)
        } else {
            controller.evaluate_unfiltered(x)
        };
        let (input, multipliers) = match out {
            Ok(o) => (o.applied, o.kkt.multipliers),
            Err(_) => (Vector::from_element(controller.model().input_dim(), f64::NAN), vec![]),
        };
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.h_values.push(controller.cbfs().iter().map(|c| c.value(x)).collect());
        traj.inputs.push(input);
        traj.multiplier_trace.push(multipliers);
    };

    let mut x = x0.clone();
    record(&mut traj, 0.0, &x);
    let mut held = vec![0usize; opts.attractors.len()];
    for k in 1..=steps {
        let t = k as f64 * opts.dt;
        match rk4_step(controller, opts.filtered, &x, opts.dt) {
            Ok(next) => x = next,
            Err(e) => {
                traj.terminal_label = TerminalLabel::Halted {
                    time: t - opts.dt,
                    error: e.to_string(),
                };
                if traj.times.last() != Some(&(t - opts.dt)) {
                    record(&mut traj, t - opts.dt, &x);
                }
                return Ok(traj);
            }
        }
        let outside = !x.iter().all(|v| v.is_finite())
            || opts.domain.as_ref().is_some_and(|(lo, hi)| {
                x.iter().zip(lo.iter().zip(hi.iter())).any(|(v, (l, h))| v < l || v > h)
            });
        if outside {
            record(&mut traj, t, &x);
            traj.terminal_label = TerminalLabel::LeftDomain;
            return Ok(traj);
        }
        let mut converged = None;
        for (i, a) in opts.attractors.iter().enumerate() {
            if (&x - a).norm() < opts.convergence_radius {
                held[i] += 1;
                if held[i] >= opts.hold_steps && converged.is_none() {
                    converged = Some(i);
                }
            } else {
                held[i] = 0;
            }
        }
        let last = k == steps;
        if let Some(i) = converged {
            traj.terminal_label = TerminalLabel::ConvergedTo {
                index: i,
                x_star: opts.attractors[i].clone(),
            };
            if opts.stop_on_convergence {
                record(&mut traj, t, &x);
                return Ok(traj);
            }
        } else if !matches!(traj.terminal_label, TerminalLabel::MaxTime) {
            traj.terminal_label = TerminalLabel::MaxTime;
        }
        if k % stride == 0 || last {
            record(&mut traj, t, &x);
        }
    }
    Ok(traj)
}

/// Runs [`integrate`] from every initial condition in parallel.
pub fn integrate_batch(controller: &Controller, initial: &[Vector], opts: &SimOptions) -> Vec<Result<Trajectory>> {
    initial.par_iter().map(|x0| integrate(controller, x0, opts)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InvarianceAudit {
    pub min_h: f64,
    pub passed: bool,
}

/// Smallest `h` along the stored states; passes when it stays above `−tol`.
pub fn invariance_audit(traj: &Trajectory, pair: &BarrierPair, tol: f64) -> InvarianceAudit {
    let min_h = traj.states.iter().map(|x| pair.value(x)).fold(f64::INFINITY, f64::min);
    InvarianceAudit {
        min_h,
        passed: min_h >= -tol,
    }
}

/// Rectangular planar grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidParameter("grid resolution must be positive".into()));
        }
        if !(self.x_range[0] < self.x_range[1] && self.y_range[0] < self.y_range[1]) {
            return Err(Error::InvalidParameter("grid ranges must be increasing".into()));
        }
        Ok(())
    }

    fn axis(range: [f64; 2], count: usize, centered: bool) -> Vec<f64> {
        let span = range[1] - range[0];
        (0..count)
            .map(|i| {
                if centered {
                    range[0] + span * (i as f64 + 0.5) / count as f64
                } else if count == 1 {
                    range[0]
                } else {
                    range[0] + span * i as f64 / (count - 1) as f64
                }
            })
            .collect()
    }

    fn points(&self, centered: bool) -> Vec<Vector> {
        let xs = Self::axis(self.x_range, self.nx, centered);
        let ys = Self::axis(self.y_range, self.ny, centered);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Vector::from_vec(vec![x, y])))
            .collect()
    }

    /// Grid nodes including both ends of each range, row-major with `x`
    /// varying fastest.
    pub fn nodes(&self) -> Vec<Vector> {
        self.points(false)
    }

    /// Cell centers, row-major with `x` varying fastest.
    pub fn cell_centers(&self) -> Vec<Vector> {
        self.points(true)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FieldSample {
    #[serde(serialize_with = "crate::ser::vector")]
    pub x: Vector,
    #[serde(serialize_with = "crate::ser::vector")]
    pub velocity: Vector,
    /// Smallest CBF value at the node.
    pub h: f64,
    /// Bitmask of active QP rows; `−1` when the controller failed.
    pub active_code: i64,
    /// Node lies in the unsafe set.
    pub masked: bool,
}

/// Closed-loop velocity, `h` and active set at every grid node.
pub fn field_grid(controller: &Controller, grid: &GridSpec) -> Result<Vec<FieldSample>> {
    grid.validate()?;
    if controller.model().state_dim() != 2 {
        return Err(Error::dim("field grid state", 2, controller.model().state_dim()));
    }
    Ok(grid
        .nodes()
        .par_iter()
        .map(|x| {
            let h = controller.min_h(x);
            let (velocity, active_code) = match controller.evaluate(x) {
                Ok(out) => (
                    controller.model().drift(x) + controller.model().input_matrix(x) * &out.applied,
                    i64::from(out.active_code()),
                ),
                Err(_) => (Vector::from_element(2, f64::NAN), -1),
            };
            FieldSample {
                x: x.clone(),
                velocity,
                h,
                active_code,
                masked: h < 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RoaCell {
    #[serde(serialize_with = "crate::ser::vector")]
    pub x: Vector,
    pub label: String,
}

/// Terminal label of a filtered run from every cell center. Cells in the
/// unsafe set are labelled `unsafe`; controller failures are labelled
/// `halted`.
pub fn roa_grid(controller: &Controller, grid: &GridSpec, opts: &SimOptions) -> Result<Vec<RoaCell>> {
    grid.validate()?;
    if controller.model().state_dim() != 2 {
        return Err(Error::dim("ROA grid state", 2, controller.model().state_dim()));
    }
    let mut opts = opts.clone();
    opts.record_stride = usize::MAX;
    Ok(grid
        .cell_centers()
        .par_iter()
        .map(|x| {
            let label = if opts.filtered && controller.min_h(x) < 0.0 {
                "unsafe".to_string()
            } else {
                match integrate(controller, x, &opts) {
                    Ok(t) => t.terminal_label.code(),
                    Err(_) => "halted".to_string(),
                }
            };
            RoaCell { x: x.clone(), label }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ball_cbf, BallForm, SystemModel};
    use crate::qp::InputWeight;
    use crate::Matrix;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn fig3() -> Controller {
        let model = SystemModel::single_integrator(2)
            .with_linear_feedback(Matrix::from_diagonal(&v2(-1.0, -5.0)))
            .unwrap();
        let cbf = make_ball_cbf(&v2(2.0, 0.0), 1.0, BallForm::Full, 1.0).unwrap();
        Controller::safety_filter(model, cbf, InputWeight::Identity(2)).unwrap()
    }

    #[test]
    fn origin_stays_put() {
        let ctrl = fig3();
        let opts = SimOptions {
            horizon: 0.1,
            attractors: vec![v2(0.0, 0.0)],
            ..SimOptions::default()
        };
        let traj = integrate(&ctrl, &v2(0.0, 0.0), &opts).unwrap();
        assert!(traj.states.iter().all(|x| x.norm() == 0.0));
        assert!(matches!(traj.terminal_label, TerminalLabel::ConvergedTo { index: 0, .. }));
    }

    #[test]
    fn times_are_fixed_step() {
        let ctrl = fig3();
        let opts = SimOptions {
            horizon: 0.05,
            ..SimOptions::default()
        };
        let traj = integrate(&ctrl, &v2(4.0, 1.0), &opts).unwrap();
        assert_eq!(traj.times.len(), 51);
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - 1e-3).abs() < 1e-12);
        }
        assert_eq!(traj.terminal_label, TerminalLabel::MaxTime);
    }

    #[test]
    fn filtered_start_outside_is_rejected() {
        let ctrl = fig3();
        assert!(matches!(
            integrate(&ctrl, &v2(2.5, 0.01), &SimOptions::default()),
            Err(Error::OutsideSafeSet { .. })
        ));
    }

    #[test]
    fn boundary_equilibrium_audit() {
        let ctrl = fig3();
        let opts = SimOptions {
            horizon: 0.1,
            ..SimOptions::default()
        };
        let traj = integrate(&ctrl, &v2(3.0, 0.0), &opts).unwrap();
        let audit = invariance_audit(&traj, &ctrl.cbfs()[0], 1e-6);
        assert_eq!(audit.min_h, 0.0);
        assert!(audit.passed);
    }

    #[test]
    fn grid_shapes() {
        let grid = GridSpec {
            x_range: [0.0, 4.0],
            y_range: [-2.0, 2.0],
            nx: 81,
            ny: 81,
        };
        assert_eq!(grid.nodes().len(), 6561);
        assert_eq!(grid.nodes()[0], v2(0.0, -2.0));
        assert_eq!(grid.nodes()[80], v2(4.0, -2.0));
        let samples = field_grid(&fig3(), &grid).unwrap();
        assert_eq!(samples.len(), 6561);
        assert!(samples.iter().any(|s| s.masked));
    }
}
