use std::path::Path;

use serde::{Deserialize, Serialize};

use super::oracle::{scalar_residual, three_solution_residual};
use super::*;
use crate::chebyshev::verify_double_minimum;
use crate::kirchhoff::{embedding_check, residual_check, DiscreteState, Forcing};
use crate::minimax::verify_eta;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

/// Reads a report and re-checks its witnesses. Relative paths in the echoed
/// config resolve against the report's directory.
pub fn verify_report_file(path: &Path) -> Result<Verification> {
    let text = std::fs::read_to_string(path)?;
    let report = RunReport::from_json(&text)?;
    verify_report(&report, path.parent())
}

fn mismatch(report: &RunReport) -> LabError {
    LabError::Report(format!("witness type does not fit a `{}` config", report.kind))
}

/// Brute-force re-verification of every stored witness: cluster counts by
/// full enumeration, root residuals from closed-form derivatives and
/// discrete residuals of Kirchhoff states. Never calls a search routine.
pub fn verify_report(report: &RunReport, base: Option<&Path>) -> Result<Verification> {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    if report.witnesses.is_empty() {
        warnings.push("report has no witnesses; nothing to verify".into());
    }
    for (k, w) in report.witnesses.iter().enumerate() {
        let label = |s: &str| format!("witness {k}: {s}");
        match (w, &report.config.task) {
            (Witness::DoubleMinimum(wr), Task::Chebyshev(p)) => {
                let set = p.set.build(base)?;
                let phi = p.phi.perturbation(&set)?;
                let inside = wr.y0.dist(&p.u0) < wr.radius;
                checks.push(Check::new(label("inside ball"), inside, format!("|y0 - u0| = {}", wr.y0.dist(&p.u0))));
                let v = verify_double_minimum(&wr.y0, set.samples(), &phi, Some(wr.eps_v), wr.eps_s)?;
                checks.push(Check::new(
                    label("cluster count"),
                    v.cluster_count >= 2 && v.cluster_count == wr.clusters.len(),
                    format!("{} by enumeration, {} stored", v.cluster_count, wr.clusters.len()),
                ));
            }
            (Witness::LinearPerturbation { eta, clusters, eps_v, eps_s }, Task::Minimax(MinimaxParams::Eta { set, i, eta_radius, .. })) => {
                let set = set.build(base)?;
                let iv = i.values(&set)?;
                checks.push(Check::new(label("inside ball"), eta.norm() < *eta_radius, format!("|eta| = {}", eta.norm())));
                let again = verify_eta(eta, &iv, set.samples(), *eps_v, *eps_s)?;
                checks.push(Check::new(
                    label("cluster count"),
                    again.len() >= 2 && again.len() == clusters.len(),
                    format!("{} by enumeration, {} stored", again.len(), clusters.len()),
                ));
            }
            (Witness::ThreeRoots(t), Task::ThreeSolutions(ThreeSolutionsParams::Witness { i, j, newton, .. })) => {
                let mut worst: f64 = 0.0;
                for x in &t.roots {
                    let r = three_solution_residual(i, j, &t.y0, t.mu0, x)?;
                    worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
                }
                checks.push(Check::new(
                    label("root residuals"),
                    t.roots.len() >= 3 && worst < newton.tol_root,
                    format!("{} roots, max |F| {worst:e}", t.roots.len()),
                ));
                checks.push(distinct(label("roots distinct"), &t.roots, newton.eps_s));
            }
            (Witness::ScalarRoots { j, a, b, roots }, Task::ThreeSolutions(ThreeSolutionsParams::Scalar { .. })) => {
                let mut worst: f64 = 0.0;
                for &x in roots {
                    let r = scalar_residual(j, *a, *b, x)?.abs();
                    worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
                }
                checks.push(Check::new(label("root residuals"), worst < 1e-9, format!("max residual {worst:e}")));
                let pts: Vec<Point> = roots.iter().map(|&x| Point(vec![x])).collect();
                checks.push(distinct(label("roots distinct"), &pts, 1e-6));
            }
            (Witness::KirchhoffStates { alpha, beta, states }, Task::Kirchhoff(p)) => {
                let forcing = Forcing::new(alpha.clone(), beta.clone(), &p.problem)?;
                let scale = 1.0 + forcing.sup_norm();
                let mut worst: f64 = 0.0;
                let mut admissible = true;
                let mut rebuilt = Vec::with_capacity(states.len());
                for s in states {
                    if s.u.len() != p.problem.n {
                        return Err(LabError::Report(format!("state has {} nodes, problem has {}", s.u.len(), p.problem.n)));
                    }
                    let st = DiscreteState::new(s.u.clone());
                    admissible &= st.q < p.problem.q_limit() && embedding_check(&st);
                    let r = match residual_check(&st, &p.problem, &forcing) {
                        Ok(r) => r.residual,
                        Err(_) => f64::INFINITY,
                    };
                    worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
                    rebuilt.push(st);
                }
                checks.push(Check::new(label("admissible"), admissible, "energy constraint and sup-norm embedding"));
                checks.push(Check::new(
                    label("residuals"),
                    worst < p.solver.tol_res * scale,
                    format!("{} states, max residual {worst:e}", states.len()),
                ));
                let mut sep = f64::INFINITY;
                for a in 0..rebuilt.len() {
                    for b in a + 1..rebuilt.len() {
                        sep = sep.min(rebuilt[a].l2_dist(&rebuilt[b]));
                    }
                }
                checks.push(Check::new(
                    label("states distinct"),
                    sep > p.solver.eps_s,
                    format!("min separation {sep:e}"),
                ));
            }
            _ => return Err(mismatch(report)),
        }
    }
    Ok(Verification { passed: checks.iter().all(|c| c.passed), checks, warnings })
}

fn distinct(name: String, pts: &[Point], eps: f64) -> Check {
    let mut sep = f64::INFINITY;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            sep = sep.min(pts[a].dist(&pts[b]));
        }
    }
    Check::new(name, sep > eps, format!("min separation {sep:e}"))
}
