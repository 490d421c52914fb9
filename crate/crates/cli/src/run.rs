//! Executes the task list of a scenario and writes its artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use barrier_lab_core::equilibria::analyze;
use barrier_lab_core::equivalence::hessian_equivalence;
use barrier_lab_core::linalg::max_abs;
use barrier_lab_core::sim::{field_grid, integrate, invariance_audit, roa_grid, InvarianceAudit, SimOptions};
use barrier_lab_core::spectral::{fd_jacobian, jacobian_clf_cbf_boundary, jacobian_safety_filter_boundary};
use barrier_lab_core::{
    Complex, Controller, ControllerFamily, EquilibriumAnalysis, EquilibriumKind, EquilibriumReport, EquilibriumSearch,
    EquivalenceVerdict, Matrix, TerminalLabel, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::build::Scenario;
use crate::config::*;
use crate::error::CliError;
use crate::output::{num, OutDir};

/// Outcome of a run; `errors` holds one message per failed task.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub summary: String,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.errors.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Output directory: the override, else the config's, else `out/<name>`.
pub fn resolve_out_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| scenario.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.config.name))
}

/// Search box from an equilibria task, or `[−5, 5]ⁿ`.
pub fn search_for(config: &ScenarioConfig, n: usize) -> EquilibriumSearch {
    let task = config.tasks.iter().find_map(|t| match t {
        TaskConfig::Equilibria(e) => Some(e.clone()),
        _ => None,
    });
    let mut search = EquilibriumSearch::default_for(n);
    if let Some(t) = task {
        if let Some(lo) = t.lower {
            search.interior_lower = Vector::from_vec(lo);
        }
        if let Some(hi) = t.upper {
            search.interior_upper = Vector::from_vec(hi);
        }
        if let Some(s) = t.seeds_per_dim {
            search.interior_seeds_per_dim = s;
        }
        if let Some(s) = t.n_sweep {
            search.n_sweep = s;
        }
    }
    search
}

fn ser_vector<S: serde::Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    barrier_lab_core::ser::vector(v, s)
}

fn ser_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    barrier_lab_core::ser::matrix(m, s)
}

fn ser_opt_matrix<S: serde::Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
    match m {
        Some(m) => barrier_lab_core::ser::matrix(m, s),
        None => s.serialize_none(),
    }
}

fn ser_complexes<S: serde::Serializer>(z: &[Complex], s: S) -> Result<S::Ok, S::Error> {
    barrier_lab_core::ser::complexes(z, s)
}

#[derive(Serialize)]
struct EquilibriaArtifact<'a> {
    scenario: &'a str,
    controller: &'a str,
    cbfs: Vec<String>,
    equilibria: &'a [EquilibriumReport],
    warnings: &'a [String],
}

#[derive(Serialize)]
struct SpectrumEntry<'a> {
    #[serde(serialize_with = "ser_vector")]
    x_star: &'a Vector,
    kind: EquilibriumKind,
    stability: &'a str,
    char_poly: &'a [f64],
    #[serde(serialize_with = "ser_complexes")]
    eigenvalues: &'a [Complex],
    known_factor_root: Option<f64>,
    reduced_poly: Option<&'a [f64]>,
    factor_remainder: Option<f64>,
}

#[derive(Serialize)]
struct JacobianEntry {
    #[serde(serialize_with = "ser_vector")]
    x_star: Vector,
    cbf: String,
    #[serde(serialize_with = "ser_opt_matrix")]
    closed_form: Option<Matrix>,
    #[serde(serialize_with = "ser_matrix")]
    finite_difference: Matrix,
    max_difference: Option<f64>,
    /// `‖∇hᵀJ + α'(0)∇hᵀ‖∞`.
    left_eigen_residual: Option<f64>,
    passed: Option<bool>,
    error: Option<String>,
}

#[derive(Serialize)]
struct EquivalenceEntry {
    pair: [usize; 2],
    labels: [String; 2],
    verdict: Option<EquivalenceVerdict>,
    samples: usize,
    max_gradient_residual: Option<f64>,
    max_hessian_residual: Option<f64>,
    min_zeta: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct TrajectorySummary {
    index: usize,
    file: String,
    #[serde(serialize_with = "ser_vector")]
    x0: Vector,
    terminal: TerminalLabel,
    #[serde(serialize_with = "ser_vector")]
    final_state: Vector,
    audit: InvarianceAudit,
}

#[derive(Serialize)]
struct SimulationArtifact {
    filtered: bool,
    dt: f64,
    horizon: f64,
    trajectories: Vec<TrajectorySummary>,
    errors: Vec<String>,
}

#[derive(Serialize)]
struct Attractor {
    label: String,
    #[serde(serialize_with = "ser_vector")]
    x_star: Vector,
    desirability: barrier_lab_core::Desirability,
    stability: Option<&'static str>,
}

#[derive(Serialize)]
struct RoaArtifact {
    file: String,
    attractors: Vec<Attractor>,
    counts: BTreeMap<String, usize>,
}

/// Runs every task in order; a failing task is recorded and the rest still
/// run. Only I/O on the output directory aborts the run.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunReport, CliError> {
    let out = OutDir::create(out_dir)?;
    out.write_text("config.json", &crate::builtin::to_json(&scenario.config))?;
    let mut runner = Runner {
        scenario,
        out: &out,
        analysis: None,
        summary: String::new(),
    };
    runner.header();
    let mut errors = Vec::new();
    for (i, task) in scenario.config.tasks.iter().enumerate() {
        let name = format!("task {i} ({})", task.name());
        let _ = writeln!(runner.summary, "\n[{}]", task.name());
        if let Err(e) = runner.task(i, task) {
            if matches!(e, CliError::Io { .. }) {
                return Err(e);
            }
            let msg = format!("{name}: {e}");
            let _ = writeln!(runner.summary, "  ERROR {e}");
            errors.push(msg);
        }
    }
    let _ = writeln!(
        runner.summary,
        "\n{}",
        if errors.is_empty() {
            "all tasks completed".to_string()
        } else {
            format!("{} task(s) failed", errors.len())
        }
    );
    out.write_text("summary.txt", &runner.summary)?;
    Ok(RunReport {
        out_dir: out.root().to_path_buf(),
        summary: runner.summary,
        errors,
    })
}

struct Runner<'a> {
    scenario: &'a Scenario,
    out: &'a OutDir,
    analysis: Option<EquilibriumAnalysis>,
    summary: String,
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

impl<'a> Runner<'a> {
    fn controller(&self) -> &'a Controller {
        &self.scenario.controller
    }

    fn header(&mut self) {
        let s = self.scenario;
        let _ = writeln!(self.summary, "scenario: {}", s.config.name);
        let _ = writeln!(
            self.summary,
            "controller: {} with {}",
            s.controller.family().name(),
            s.active_labels().join(" + ")
        );
        if let ControllerFamily::ClfCbfQp { penalty, .. } = s.controller.family() {
            let _ = writeln!(self.summary, "penalty p: {penalty}");
        }
        for note in &s.config.notes {
            let _ = writeln!(self.summary, "note: {note}");
        }
    }

    fn task(&mut self, index: usize, task: &TaskConfig) -> Result<(), CliError> {
        match task {
            TaskConfig::Equilibria(_) => self.equilibria(),
            TaskConfig::Jacobians(t) => self.jacobians(t),
            TaskConfig::Equivalence(t) => self.equivalence(t),
            TaskConfig::Field(t) => self.field(t),
            TaskConfig::Simulate(t) => self.simulate(index, t),
            TaskConfig::Roa(t) => self.roa(t),
        }
    }

    fn ensure_analysis(&mut self) -> Result<&EquilibriumAnalysis, CliError> {
        if self.analysis.is_none() {
            let search = search_for(&self.scenario.config, self.scenario.model.state_dim());
            let analysis = analyze(self.controller(), &search).map_err(|e| CliError::task("equilibria", e))?;
            self.analysis = Some(analysis);
        }
        Ok(self.analysis.as_ref().expect("set above"))
    }

    fn equilibria(&mut self) -> Result<(), CliError> {
        self.analysis = None;
        let scenario = self.scenario;
        let analysis = self.ensure_analysis()?.clone();
        self.out.write_json(
            "equilibria.json",
            &EquilibriaArtifact {
                scenario: &scenario.config.name,
                controller: scenario.controller.family().name(),
                cbfs: scenario.active_labels(),
                equilibria: &analysis.equilibria,
                warnings: &analysis.warnings,
            },
        )?;
        let spectra: Vec<SpectrumEntry> = analysis
            .equilibria
            .iter()
            .filter_map(|e| {
                e.spectral.as_ref().map(|s| SpectrumEntry {
                    x_star: &e.x_star,
                    kind: e.kind,
                    stability: s.stability.as_str(),
                    char_poly: &s.char_poly,
                    eigenvalues: &s.eigenvalues,
                    known_factor_root: s.known_factor_root,
                    reduced_poly: s.reduced_poly.as_deref(),
                    factor_remainder: s.factor_remainder,
                })
            })
            .collect();
        self.out.write_json("spectra.json", &spectra)?;

        let _ = writeln!(self.summary, "  {} equilibria", analysis.equilibria.len());
        let _ = writeln!(
            self.summary,
            "  {:<28} {:<9} {:<13} {}",
            "x*", "kind", "desirability", "stability"
        );
        for e in &analysis.equilibria {
            let kind = match e.kind {
                EquilibriumKind::Interior => "interior",
                EquilibriumKind::Boundary => "boundary",
            };
            let desirability = serde_json::to_value(e.desirability).expect("enum serializes");
            let stability = e.stability().map_or_else(
                || format!("n/a ({})", e.note.as_deref().unwrap_or("no spectrum")),
                |s| s.as_str().to_string(),
            );
            let _ = writeln!(
                self.summary,
                "  {:<28} {:<9} {:<13} {}",
                fmt_vec(&e.x_star),
                kind,
                desirability.as_str().unwrap_or_default(),
                stability
            );
        }
        for w in &analysis.warnings {
            let _ = writeln!(self.summary, "  warning: {w}");
        }
        Ok(())
    }

    fn jacobians(&mut self, task: &JacobiansTask) -> Result<(), CliError> {
        let boundary: Vec<EquilibriumReport> = self
            .ensure_analysis()?
            .equilibria
            .iter()
            .filter(|e| e.kind == EquilibriumKind::Boundary)
            .cloned()
            .collect();
        let ctrl = self.controller();
        let mut entries = Vec::new();
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for e in &boundary {
            let k = e.cbf_index.unwrap_or(0);
            let cbf = &ctrl.cbfs()[k];
            let closed = match ctrl.family() {
                ControllerFamily::SafetyFilter => {
                    jacobian_safety_filter_boundary(ctrl.model(), cbf, ctrl.weight(), &e.x_star)
                }
                ControllerFamily::ClfCbfQp { clf, penalty } => {
                    jacobian_clf_cbf_boundary(ctrl.model(), cbf, clf, ctrl.weight(), *penalty, &e.x_star)
                }
            };
            let fd = fd_jacobian(
                |x| ctrl.field(x).unwrap_or_else(|_| Vector::from_element(x.len(), f64::NAN)),
                &e.x_star,
                task.fd_step,
            );
            let entry = match closed {
                Ok(j) => {
                    let diff = max_abs(&(&j - &fd));
                    let gh = cbf.gradient(&e.x_star);
                    let left = (gh.transpose() * &j + gh.transpose() * cbf.alpha_prime0()).amax();
                    let passed = diff < task.tol && left < 1e-8;
                    worst = worst.max(diff);
                    if !passed {
                        failures += 1;
                    }
                    JacobianEntry {
                        x_star: e.x_star.clone(),
                        cbf: cbf.label().to_string(),
                        closed_form: Some(j),
                        finite_difference: fd,
                        max_difference: Some(diff),
                        left_eigen_residual: Some(left),
                        passed: Some(passed),
                        error: None,
                    }
                }
                Err(err) => JacobianEntry {
                    x_star: e.x_star.clone(),
                    cbf: cbf.label().to_string(),
                    closed_form: None,
                    finite_difference: fd,
                    max_difference: None,
                    left_eigen_residual: None,
                    passed: None,
                    error: Some(err.to_string()),
                },
            };
            let _ = writeln!(
                self.summary,
                "  {:<28} {}",
                fmt_vec(&entry.x_star),
                match (&entry.max_difference, &entry.error) {
                    (Some(d), _) => format!(
                        "max |J - J_fd| = {d:.2e}, left residual = {:.2e}",
                        entry.left_eigen_residual.unwrap_or(f64::NAN)
                    ),
                    (None, Some(err)) => format!("closed form unavailable: {err}"),
                    _ => String::new(),
                }
            );
            entries.push(entry);
        }
        self.out.write_json("jacobians.json", &entries)?;
        let _ = writeln!(
            self.summary,
            "  {} boundary equilibria, worst difference {worst:.2e} (tol {:e})",
            entries.len(),
            task.tol
        );
        if failures > 0 {
            return Err(CliError::Failed(format!(
                "{failures} closed-form Jacobian(s) disagree with finite differences"
            )));
        }
        Ok(())
    }

    fn equivalence(&mut self, task: &EquivalenceTask) -> Result<(), CliError> {
        let s = self.scenario;
        let mut entries = Vec::new();
        let mut errors = Vec::new();
        for &[i, j] in &task.pairs {
            let labels = [s.cbf_label(i), s.cbf_label(j)];
            let samples = s.cbfs[i].boundary_samples(task.samples);
            let result = match samples {
                Some(samples) => hessian_equivalence(&s.cbfs[i], &s.cbfs[j], &samples, task.tol),
                None => Err(barrier_lab_core::Error::Precondition(format!(
                    "CBF {i} has no boundary sampler"
                ))),
            };
            let entry = match result {
                Ok(r) => EquivalenceEntry {
                    pair: [i, j],
                    labels,
                    verdict: Some(r.verdict),
                    samples: r.samples.len(),
                    max_gradient_residual: Some(r.max_gradient_residual()),
                    max_hessian_residual: Some(r.max_hessian_residual()),
                    min_zeta: Some(r.min_zeta()),
                    error: None,
                },
                Err(e) => {
                    errors.push(format!("pair [{i}, {j}]: {e}"));
                    EquivalenceEntry {
                        pair: [i, j],
                        labels,
                        verdict: None,
                        samples: 0,
                        max_gradient_residual: None,
                        max_hessian_residual: None,
                        min_zeta: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            let _ = writeln!(
                self.summary,
                "  {} ~ {}: {}",
                entry.labels[0],
                entry.labels[1],
                match (&entry.verdict, &entry.error) {
                    (Some(v), _) => format!(
                        "{} (max Hessian residual {:.2e})",
                        serde_json::to_value(v).expect("enum serializes").as_str().unwrap_or_default(),
                        entry.max_hessian_residual.unwrap_or(f64::NAN)
                    ),
                    (None, Some(e)) => format!("error: {e}"),
                    _ => String::new(),
                }
            );
            entries.push(entry);
        }
        self.out.write_json("equivalence.json", &entries)?;
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Failed(errors.join("; ")))
        }
    }

    fn field(&mut self, task: &FieldTask) -> Result<(), CliError> {
        let samples = field_grid(self.controller(), &task.grid.into()).map_err(|e| CliError::task("field", e))?;
        let header: Vec<String> = ["x1", "x2", "v1", "v2", "h", "active_code", "masked"].map(String::from).into();
        let records: Vec<Vec<String>> = samples
            .iter()
            .map(|s| {
                vec![
                    num(s.x[0]),
                    num(s.x[1]),
                    num(s.velocity[0]),
                    num(s.velocity[1]),
                    num(s.h),
                    s.active_code.to_string(),
                    s.masked.to_string(),
                ]
            })
            .collect();
        self.out.write_csv(&task.file, &header, &records)?;
        let masked = samples.iter().filter(|s| s.masked).count();
        let failed = samples.iter().filter(|s| s.active_code < 0).count();
        let _ = writeln!(
            self.summary,
            "  {} ({} nodes, {masked} masked, {failed} controller failures)",
            task.file,
            samples.len()
        );
        Ok(())
    }

    fn initial_states(&self, index: usize, task: &SimulateTask) -> Result<Vec<Vector>, CliError> {
        let mut states: Vec<Vector> = task.initial.iter().map(|x| Vector::from_vec(x.clone())).collect();
        if task.random > 0 {
            let bounds = task.bounds.as_ref().expect("validated: random draws have bounds");
            let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.config.seed.wrapping_add(index as u64));
            let mut drawn = 0;
            let mut attempts = 0;
            while drawn < task.random {
                attempts += 1;
                if attempts > 1000 * task.random {
                    return Err(CliError::Failed(format!(
                        "found only {drawn} of {} safe random initial states",
                        task.random
                    )));
                }
                let x = Vector::from_iterator(bounds.len(), bounds.iter().map(|r| rng.gen_range(r[0]..r[1])));
                if !task.filtered || self.controller().min_h(&x) >= 0.0 {
                    states.push(x);
                    drawn += 1;
                }
            }
        }
        Ok(states)
    }

    fn simulate(&mut self, index: usize, task: &SimulateTask) -> Result<(), CliError> {
        let attractors: Vec<Vector> = self.ensure_analysis()?.equilibria.iter().map(|e| e.x_star.clone()).collect();
        let states = self.initial_states(index, task)?;
        let opts = SimOptions {
            dt: task.dt,
            horizon: task.horizon,
            attractors,
            filtered: task.filtered,
            record_stride: task.record_stride,
            ..SimOptions::default()
        };
        let ctrl = self.controller();
        let n = ctrl.model().state_dim();
        let m = ctrl.model().input_dim();
        let ncbf = ctrl.cbfs().len();
        let results: Vec<_> = {
            use rayon::prelude::*;
            states.par_iter().map(|x0| integrate(ctrl, x0, &opts)).collect()
        };

        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        if ncbf == 1 {
            header.push("h".into());
        } else {
            header.extend((1..=ncbf).map(|i| format!("h{i}")));
        }

        let mut trajectories = Vec::new();
        let mut errors = Vec::new();
        let mut min_h = f64::INFINITY;
        let mut labels: BTreeMap<String, usize> = BTreeMap::new();
        for (i, (x0, result)) in states.iter().zip(results).enumerate() {
            let traj = match result {
                Ok(t) => t,
                Err(e) => {
                    errors.push(format!("trajectory {i} from {}: {e}", fmt_vec(x0)));
                    continue;
                }
            };
            let file = format!("{}_{i:03}.csv", task.prefix);
            let records: Vec<Vec<String>> = (0..traj.times.len())
                .map(|k| {
                    let mut r = vec![num(traj.times[k])];
                    r.extend(traj.states[k].iter().map(|v| num(*v)));
                    r.extend(traj.inputs[k].iter().map(|v| num(*v)));
                    r.extend(traj.h_values[k].iter().map(|v| num(*v)));
                    r
                })
                .collect();
            self.out.write_csv(&file, &header, &records)?;
            let audit = (0..ncbf)
                .map(|c| invariance_audit(&traj, &ctrl.cbfs()[c], task.invariance_tol))
                .min_by(|a, b| a.min_h.total_cmp(&b.min_h))
                .expect("controllers have a CBF");
            min_h = min_h.min(audit.min_h);
            if task.filtered && !audit.passed {
                errors.push(format!("trajectory {i} leaves the safe set (min h = {:e})", audit.min_h));
            }
            if let TerminalLabel::Halted { time, error } = &traj.terminal_label {
                errors.push(format!("trajectory {i} halted at t = {time}: {error}"));
            }
            *labels.entry(traj.terminal_label.code()).or_default() += 1;
            trajectories.push(TrajectorySummary {
                index: i,
                file,
                x0: x0.clone(),
                final_state: traj.final_state().clone(),
                terminal: traj.terminal_label,
                audit,
            });
        }
        self.out.write_json(
            &format!("{}.json", task.prefix),
            &SimulationArtifact {
                filtered: task.filtered,
                dt: task.dt,
                horizon: task.horizon,
                trajectories,
                errors: errors.clone(),
            },
        )?;
        let counts: Vec<String> = labels.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let _ = writeln!(
            self.summary,
            "  {} {} trajector{} ({}), min h = {min_h:.3e}, terminal: {}",
            states.len(),
            if task.filtered { "filtered" } else { "unfiltered" },
            if states.len() == 1 { "y" } else { "ies" },
            task.prefix,
            counts.join(", ")
        );
        if task.filtered {
            let _ = writeln!(
                self.summary,
                "  forward invariance (tol {:e}): {}",
                task.invariance_tol,
                if min_h >= -task.invariance_tol { "pass" } else { "FAIL" }
            );
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Failed(errors.join("; ")))
        }
    }

    fn roa(&mut self, task: &RoaTask) -> Result<(), CliError> {
        let analysis = self.ensure_analysis()?.clone();
        let opts = SimOptions {
            dt: task.dt,
            horizon: task.horizon,
            attractors: analysis.equilibria.iter().map(|e| e.x_star.clone()).collect(),
            convergence_radius: task.convergence_radius,
            ..SimOptions::default()
        };
        let cells = roa_grid(self.controller(), &task.grid.into(), &opts).map_err(|e| CliError::task("roa", e))?;
        let header: Vec<String> = ["x1", "x2", "label"].map(String::from).into();
        let records: Vec<Vec<String>> = cells
            .iter()
            .map(|c| vec![num(c.x[0]), num(c.x[1]), c.label.clone()])
            .collect();
        self.out.write_csv(&task.file, &header, &records)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for c in &cells {
            *counts.entry(c.label.clone()).or_default() += 1;
        }
        let attractors = analysis
            .equilibria
            .iter()
            .enumerate()
            .map(|(i, e)| Attractor {
                label: format!("converged:{i}"),
                x_star: e.x_star.clone(),
                desirability: e.desirability,
                stability: e.stability().map(|s| s.as_str()),
            })
            .collect::<Vec<_>>();
        let stem = task.file.strip_suffix(".csv").unwrap_or(&task.file);
        self.out.write_json(
            &format!("{stem}.json"),
            &RoaArtifact {
                file: task.file.clone(),
                attractors,
                counts: counts.clone(),
            },
        )?;
        let _ = writeln!(self.summary, "  {} ({} cells)", task.file, cells.len());
        for (label, count) in &counts {
            let target = label
                .strip_prefix("converged:")
                .and_then(|i| i.parse::<usize>().ok())
                .map(|i| format!(" -> {}", fmt_vec(&analysis.equilibria[i].x_star)))
                .unwrap_or_default();
            let _ = writeln!(self.summary, "    {label:<14} {count:>6}{target}");
        }
        Ok(())
    }
}
