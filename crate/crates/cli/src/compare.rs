//! Cross-pair comparison: every listed CBF pair drives the same controller
//! family in turn, and the equilibria, reduced spectra and boundary fields
//! are compared against the first pair.

use std::fmt::Write as _;
use std::path::Path;

use barrier_lab_core::equilibria::analyze;
use barrier_lab_core::equivalence::{gradient_ratio, gradient_relation_holds};
use barrier_lab_core::linalg::hausdorff;
use barrier_lab_core::spectral::spectral_invariance_check;
use barrier_lab_core::{Error, EquilibriumReport, Stability, Vector};
use serde::Serialize;

use crate::build::Scenario;
use crate::config::CompareConfig;
use crate::error::CliError;
use crate::output::OutDir;
use crate::run::search_for;

#[derive(Debug, Clone, Serialize)]
pub struct PairEquilibrium {
    #[serde(serialize_with = "barrier_lab_core::ser::vector")]
    pub x_star: Vector,
    pub stability: Option<Stability>,
    pub known_factor_root: Option<f64>,
    pub reduced_poly: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub index: usize,
    pub label: String,
    pub alpha_prime0: f64,
    pub undesirable: Vec<PairEquilibrium>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub max_difference: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub scenario: String,
    pub controller: String,
    pub reference: usize,
    pub pairs: Vec<PairSummary>,
    pub checks: Vec<PropertyCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: InvarianceReport,
    pub summary: String,
}

fn undesirable(reports: &[EquilibriumReport]) -> Vec<&EquilibriumReport> {
    reports
        .iter()
        .filter(|e| e.desirability == barrier_lab_core::Desirability::Undesirable)
        .collect()
}

/// Runs the comparison without writing anything.
pub fn compare_pairs(scenario: &Scenario) -> Result<InvarianceReport, CliError> {
    let cfg = scenario.config.compare.clone().unwrap_or_default();
    let pairs: Vec<usize> = if cfg.pairs.is_empty() {
        (0..scenario.cbfs.len()).collect()
    } else {
        cfg.pairs.clone()
    };
    if pairs.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least two CBF pairs, the config lists {}",
            pairs.len()
        )));
    }
    let reference = pairs[0];
    let ref_cbf = &scenario.cbfs[reference];
    let task = |e: Error| CliError::task("compare", e);

    let samples = ref_cbf.boundary_samples(cfg.boundary_samples).ok_or_else(|| {
        task(Error::Precondition(format!(
            "CBF {reference} has no boundary sampler to check the shared safe set"
        )))
    })?;
    for &p in &pairs[1..] {
        let (zeta, residual) = gradient_ratio(ref_cbf, &scenario.cbfs[p], &samples).map_err(task)?;
        if !gradient_relation_holds(&zeta, &residual) {
            return Err(task(Error::Precondition(format!(
                "CBF {p} does not share the zero level set and gradient direction of CBF {reference}"
            ))));
        }
    }

    let search = search_for(&scenario.config, scenario.model.state_dim());
    let mut controllers = Vec::new();
    let mut analyses = Vec::new();
    for &p in &pairs {
        let ctrl = scenario.controller_for(&[p]).map_err(task)?;
        analyses.push(analyze(&ctrl, &search).map_err(task)?);
        controllers.push(ctrl);
    }

    let summaries: Vec<PairSummary> = pairs
        .iter()
        .zip(&analyses)
        .map(|(&p, a)| PairSummary {
            index: p,
            label: scenario.cbf_label(p),
            alpha_prime0: scenario.cbfs[p].alpha_prime0(),
            undesirable: undesirable(&a.equilibria)
                .into_iter()
                .map(|e| PairEquilibrium {
                    x_star: e.x_star.clone(),
                    stability: e.stability(),
                    known_factor_root: e.spectral.as_ref().and_then(|s| s.known_factor_root),
                    reduced_poly: e.spectral.as_ref().and_then(|s| s.reduced_poly.clone()),
                })
                .collect(),
        })
        .collect();

    let sets: Vec<Vec<Vector>> = summaries
        .iter()
        .map(|s| s.undesirable.iter().map(|e| e.x_star.clone()).collect())
        .collect();
    let hd = sets[1..].iter().map(|s| hausdorff(&sets[0], s)).fold(0.0, f64::max);
    let mut checks = vec![PropertyCheck {
        property: "equilibrium_sets".into(),
        max_difference: hd,
        tol: cfg.equilibria_tol,
        passed: hd < cfg.equilibria_tol,
        note: None,
    }];
    checks.push(spectral_check(&analyses, &cfg));

    let mut field_diff: f64 = 0.0;
    for x in &samples {
        let base = controllers[0].field(x).map_err(task)?;
        for c in &controllers[1..] {
            field_diff = field_diff.max((c.field(x).map_err(task)? - &base).amax());
        }
    }
    checks.push(PropertyCheck {
        property: "boundary_fields".into(),
        max_difference: field_diff,
        tol: cfg.field_tol,
        passed: field_diff < cfg.field_tol,
        note: None,
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(InvarianceReport {
        scenario: scenario.config.name.clone(),
        controller: scenario.controller.family().name().into(),
        reference,
        pairs: summaries,
        checks,
        passed,
    })
}

fn spectral_check(analyses: &[barrier_lab_core::EquilibriumAnalysis], cfg: &CompareConfig) -> PropertyCheck {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    let reference = undesirable(&analyses[0].equilibria);
    for e in &reference {
        let Some(s0) = &e.spectral else {
            notes.push(format!("no spectrum at {:?}", e.x_star.as_slice()));
            worst = f64::INFINITY;
            continue;
        };
        for other in &analyses[1..] {
            let matched = undesirable(&other.equilibria)
                .into_iter()
                .min_by(|a, b| (&a.x_star - &e.x_star).norm().total_cmp(&(&b.x_star - &e.x_star).norm()));
            let Some(s1) = matched.and_then(|m| m.spectral.as_ref()) else {
                notes.push(format!("no matching spectrum for {:?}", e.x_star.as_slice()));
                worst = f64::INFINITY;
                continue;
            };
            let (Some(r0), Some(r1)) = (s0.known_factor_root, s1.known_factor_root) else {
                worst = f64::INFINITY;
                continue;
            };
            match spectral_invariance_check(&s0.jacobian, -r0, &s1.jacobian, -r1, cfg.spectral_tol) {
                barrier_lab_core::spectral::InvarianceVerdict::Pass { max_difference }
                | barrier_lab_core::spectral::InvarianceVerdict::Fail { max_difference } => {
                    worst = worst.max(max_difference)
                }
                barrier_lab_core::spectral::InvarianceVerdict::FactorizationFailure { remainder } => {
                    notes.push(format!(
                        "(s + α'(0)) does not divide the characteristic polynomial at {:?} (remainder {remainder:e})",
                        e.x_star.as_slice()
                    ));
                    worst = f64::INFINITY;
                }
            }
        }
    }
    PropertyCheck {
        property: "reduced_spectra".into(),
        max_difference: worst,
        tol: cfg.spectral_tol,
        passed: worst < cfg.spectral_tol,
        note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
    }
}

/// Runs the comparison, writes `invariance_report.json` and a summary.
pub fn compare(scenario: &Scenario, out_dir: &Path) -> Result<CompareOutcome, CliError> {
    let report = compare_pairs(scenario)?;
    let out = OutDir::create(out_dir)?;
    out.write_json("invariance_report.json", &report)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "scenario: {} ({})", report.scenario, report.controller);
    for p in &report.pairs {
        let _ = writeln!(
            summary,
            "  pair {} {:<12} alpha'(0) = {:<4} {} undesirable equilibria",
            p.index,
            p.label,
            p.alpha_prime0,
            p.undesirable.len()
        );
    }
    for c in &report.checks {
        let _ = writeln!(
            summary,
            "  {:<18} max difference {:.3e} (tol {:e})  {}",
            c.property,
            c.max_difference,
            c.tol,
            if c.passed { "PASS" } else { "FAIL" }
        );
        if let Some(note) = &c.note {
            let _ = writeln!(summary, "    {note}");
        }
    }
    let _ = writeln!(summary, "{}", if report.passed { "all invariance checks passed" } else { "invariance checks FAILED" });
    out.write_text("compare_summary.txt", &summary)?;
    Ok(CompareOutcome { report, summary })
}
