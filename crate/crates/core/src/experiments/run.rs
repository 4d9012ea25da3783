use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::oracle::{field_derivative_1d, three_solution_residual};
use super::verify::verify_report;
use super::*;
use crate::ball::BallSupOptions;
use crate::chebyshev::{
    admissible_r_scan, certificate, find_double_minimum, verify_double_minimum, MappedSet, RadiusCertificate,
    SearchSettings,
};
use crate::hilbert::default_eps_s;
use crate::kirchhoff::{
    default_starts, refine_state, residual_check, nonconstancy_check, random_forcing, search_alpha_beta,
    solve_multistart, uniqueness_probe, validate_problem, CriticalState, DiscreteState, Forcing, Omega, SolutionPair,
};
use crate::lattice::LatticeOptions;
use crate::minimax::{
    budget_margin, check_minimax_hypotheses, convex_bound_random_suite, find_eta_two_minima, minimax_gap,
    perturbed_sides, uniform_grid, verify_eta,
};
use crate::three_solutions::{
    find_three_solutions, scalar_three_roots, solve_deflated, three_solution_radius, BoundOptions, Field,
    SearchRadius, WitnessOptions,
};
use crate::Outcome;

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Multiplies sample counts, lattice sizes and start counts.
    pub budget_scale: f64,
    /// Replaces the config seed.
    pub seed: Option<u64>,
    /// Where CSV artifacts are written; `None` writes none.
    pub out_dir: Option<PathBuf>,
    /// Directory that relative paths inside the config resolve against.
    pub base_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { budget_scale: 1.0, seed: None, out_dir: None, base_dir: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub phases: Vec<(String, f64)>,
}

impl Timings {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub timings: Timings,
}

struct Ctx<'a> {
    opts: &'a RunOptions,
    name: String,
    seed: u64,
    witnesses: Vec<Witness>,
    checks: Vec<Check>,
    warnings: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
    artifacts: Vec<String>,
    timings: Timings,
    clock: Instant,
}

impl Ctx<'_> {
    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    fn detail<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.details.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        self.timings.phases.push((phase.to_string(), (now - self.clock).as_secs_f64()));
        self.clock = now;
    }

    fn scaled(&self, n: usize) -> usize {
        ((n as f64 * self.opts.budget_scale).round() as usize).max(1)
    }

    fn artifact(&mut self, file: &str) -> Option<PathBuf> {
        let dir = self.opts.out_dir.as_ref()?;
        let name = format!("{}.{file}", self.name);
        self.artifacts.push(name.clone());
        Some(dir.join(name))
    }
}

/// Runs one experiment. The report is a pure function of the config, the
/// seed and the budget scale.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    if !(opts.budget_scale > 0.0 && opts.budget_scale.is_finite()) {
        return Err(LabError::Config(format!("budget scale must be positive, got {}", opts.budget_scale)));
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let start = Instant::now();
    let mut ctx = Ctx {
        opts,
        name: config.name.clone(),
        seed: config.seed,
        witnesses: Vec::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
        details: serde_json::Map::new(),
        artifacts: Vec::new(),
        timings: Timings::default(),
        clock: start,
    };
    let base = opts.base_dir.as_deref();
    match &config.task {
        Task::Chebyshev(p) => run_chebyshev(&mut ctx, p, base)?,
        Task::Minimax(p) => run_minimax(&mut ctx, p, base)?,
        Task::ThreeSolutions(p) => run_three_solutions(&mut ctx, p)?,
        Task::Kirchhoff(p) => run_kirchhoff(&mut ctx, p)?,
        Task::Validate(p) => run_validate(&mut ctx, p)?,
    }
    let mut report = RunReport {
        name: config.name.clone(),
        kind: config.kind().to_string(),
        config,
        budget_scale: opts.budget_scale,
        witnesses: std::mem::take(&mut ctx.witnesses),
        checks: std::mem::take(&mut ctx.checks),
        warnings: std::mem::take(&mut ctx.warnings),
        details: serde_json::Value::Object(std::mem::take(&mut ctx.details)),
        artifacts: std::mem::take(&mut ctx.artifacts),
    };
    if !report.witnesses.is_empty() {
        let v = verify_report(&report, base)?;
        report.checks.push(Check::new(
            "oracle re-verification",
            v.passed,
            format!("{} witness check(s), {} failed", v.checks.len(), v.checks.iter().filter(|c| !c.passed).count()),
        ));
    }
    ctx.lap("verify");
    let mut timings = ctx.timings;
    timings.total_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutput { report, timings })
}

fn run_chebyshev(ctx: &mut Ctx, p: &ChebyshevParams, base: Option<&Path>) -> Result<()> {
    let mapped = MappedSet::identity(p.set.build(base)?);
    let phi = p.phi.perturbation(&mapped.domain)?;
    let ball = BallSupOptions::default().scaled(ctx.opts.budget_scale);
    let certs = admissible_r_scan(&p.u0, &mapped, &phi, &p.radii, &ball)?;
    ctx.lap("certificates");
    ctx.detail("certificates", &certs)?;
    if let Some(path) = ctx.artifact("set.csv") {
        mapped.domain.write_csv(&path)?;
    }
    if let Some(t) = p.expect_threshold {
        let wrong: Vec<f64> = certs.iter().filter(|c| c.admissible != (c.r > t)).map(|c| c.r).collect();
        ctx.check(
            "admissible exactly above threshold",
            wrong.is_empty(),
            format!("threshold {t}, misclassified radii {wrong:?}"),
        );
    }
    if let Some(e) = &p.expect_rho {
        let worst = certs.iter().map(|c| (c.rho_r - e.value).abs()).fold(0.0, f64::max);
        ctx.check("rho_r matches", worst <= e.tol, format!("max |rho_r - {}| = {worst:e}", e.value));
    }
    let cert: Option<RadiusCertificate> = match p.search_radius {
        Some(r) => Some(certificate(&p.u0, &mapped, &phi, r, &ball)?),
        None => certs
            .iter()
            .filter(|c| c.admissible)
            .min_by(|a, b| a.r.total_cmp(&b.r))
            .cloned(),
    };
    let Some(cert) = cert else {
        ctx.warnings.push("no admissible radius in the scan; witness search skipped".into());
        return Ok(());
    };
    if !cert.admissible {
        ctx.check("search radius admissible", false, format!("r = {}, margin {:e}", cert.r, cert.margin));
        return Ok(());
    }
    ctx.detail("search_radius", &cert.r)?;
    let settings = SearchSettings {
        lattice: LatticeOptions::default().scaled(ctx.opts.budget_scale),
        eps_s: p.eps_s,
        seed: ctx.seed,
        ..SearchSettings::default()
    };
    let found = find_double_minimum(&p.u0, &mapped, &phi, &cert, &settings)?;
    ctx.lap("witness search");
    match found {
        Outcome::Found(w) => {
            let check = verify_double_minimum(&w.y0, mapped.image(), &phi, Some(w.eps_v), w.eps_s)?;
            let report = WitnessReport::new(&w, &cert, &check);
            ctx.check(
                "two separated minima",
                report.verified,
                format!("{} cluster(s) at y0 = {}", check.cluster_count, w.y0),
            );
            if let Some(e) = &p.expect_y0 {
                let d = w.y0.dist(&e.value);
                ctx.check("witness location", d <= e.tol, format!("|y0 - {}| = {d:e}", e.value));
            }
            ctx.witnesses.push(Witness::DoubleMinimum(report));
        }
        Outcome::NotFound(msg) => ctx.warnings.push(msg),
    }
    Ok(())
}

fn run_minimax(ctx: &mut Ctx, p: &MinimaxParams, base: Option<&Path>) -> Result<()> {
    match p {
        MinimaxParams::ConvexBound { trials, etas_per_trial } => {
            let suite = convex_bound_random_suite(ctx.scaled(*trials), *etas_per_trial, ctx.seed)?;
            ctx.lap("suite");
            ctx.check(
                "convex-combination bound",
                suite.violations == 0,
                format!("{} trials, {} violations, worst slack {:e}", suite.trials, suite.violations, suite.worst_slack),
            );
            ctx.detail("suite", &suite)?;
        }
        MinimaxParams::Budget { set, u0, i, phi, radii } => {
            let mapped = MappedSet::identity(set.build(base)?);
            let iv = i.values(&mapped.domain)?;
            let phi_p = phi.perturbation(&mapped.domain)?;
            let ball = BallSupOptions::default().scaled(ctx.opts.budget_scale);
            let mut rows = Vec::new();
            let mut duality_ok = true;
            for &r in radii {
                let bc = budget_margin(&iv, mapped.image(), &phi_p, u0, r, &ball)?;
                let (sup_inf, inf_sup) = perturbed_sides(&iv, mapped.image(), &phi_p, u0, r, &ball)?;
                let scale = 1.0 + sup_inf.abs().max(inf_sup.abs());
                duality_ok &= sup_inf <= inf_sup + 1e-10 * scale;
                rows.push(json!({ "r": r, "condition": bc, "sup_inf": sup_inf, "inf_sup": inf_sup }));
            }
            ctx.check("weak duality on every radius", duality_ok, format!("{} radii", radii.len()));
            // with I = ½|x − u0|^2 the budget margin is delta times the
            // distance-certificate margin for the doubled perturbation
            if matches!(i, SampleFunction::HalfDistSq { center } if center == u0) {
                let doubled = Perturbation::from_values(phi_p.values().iter().map(|v| 2.0 * v).collect())?;
                let certs = admissible_r_scan(u0, &mapped, &doubled, radii, &ball)?;
                let mut worst: f64 = 0.0;
                for (row, cert) in rows.iter().zip(&certs) {
                    let m2 = row["condition"]["margin"].as_f64().unwrap_or(f64::NAN);
                    let d = (m2 - cert.delta * cert.margin).abs() / (1.0 + cert.delta * cert.r);
                    worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
                }
                ctx.check(
                    "agrees with distance certificate",
                    worst <= 1e-9,
                    format!("max relative difference {worst:e}"),
                );
            }
            ctx.lap("margins");
            ctx.detail("radii", &rows)?;
        }
        MinimaxParams::Eta { set, i, eta_radius, eps_s } => {
            let mapped = MappedSet::identity(set.build(base)?);
            let iv = i.values(&mapped.domain)?;
            let eps_s = eps_s.unwrap_or_else(|| default_eps_s(&mapped.domain));
            let lattice = LatticeOptions::default().scaled(ctx.opts.budget_scale);
            let found =
                find_eta_two_minima(&iv, mapped.image(), mapped.image_chord(), *eta_radius, &lattice, None, eps_s, ctx.seed)?;
            ctx.lap("eta search");
            match found {
                Outcome::Found(w) => {
                    let again = verify_eta(&w.eta, &iv, mapped.image(), w.eps_v, w.eps_s)?;
                    ctx.check(
                        "two separated minima",
                        again.len() >= 2 && again.len() == w.clusters.len(),
                        format!("{} cluster(s) at eta = {}", again.len(), w.eta),
                    );
                    ctx.witnesses.push(Witness::LinearPerturbation {
                        eta: w.eta,
                        clusters: w
                            .clusters
                            .iter()
                            .map(|c| ClusterSummary { representative: c.representative.clone(), value: c.value })
                            .collect(),
                        eps_v: w.eps_v,
                        eps_s: w.eps_s,
                    });
                }
                Outcome::NotFound(msg) => ctx.warnings.push(msg),
            }
        }
        MinimaxParams::Gap { function, x_range, y_range, x_count, y_count, refinements, expect_gap_below, expect_sides } => {
            let f = *function;
            let mut gaps = Vec::new();
            for level in 0..=*refinements {
                let xs = uniform_grid(x_range[0], x_range[1], (x_count - 1) * (1 << level) + 1);
                let ys = uniform_grid(y_range[0], y_range[1], (y_count - 1) * (1 << level) + 1);
                gaps.push(minimax_gap(&xs, &ys, |x: &f64, y: &f64| f.eval(*x, *y))?);
            }
            ctx.lap("gaps");
            ctx.check("weak duality", gaps.iter().all(|g| g.gap >= 0.0), "sup inf <= inf sup on every grid");
            let monotone = gaps.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
            let sequence: Vec<f64> = gaps.iter().map(|g| g.gap).collect();
            ctx.check("gap non-increasing under refinement", monotone, format!("gaps {sequence:?}"));
            if let Some(bound) = expect_gap_below {
                ctx.check("gap below bound", gaps[0].gap < *bound, format!("gap {:e} vs {bound}", gaps[0].gap));
            }
            if let Some([lo, hi]) = expect_sides {
                let ok = gaps[0].sup_inf == *lo && gaps[0].inf_sup == *hi;
                ctx.check(
                    "sides exact",
                    ok,
                    format!("(sup inf, inf sup) = ({}, {})", gaps[0].sup_inf, gaps[0].inf_sup),
                );
            }
            let xs: Vec<Point> = uniform_grid(x_range[0], x_range[1], *x_count).into_iter().map(|v| Point(vec![v])).collect();
            let ys: Vec<Point> = uniform_grid(y_range[0], y_range[1], *y_count).into_iter().map(|v| Point(vec![v])).collect();
            let eps_s = 1e-3 * (x_range[1] - x_range[0]);
            let hyp = check_minimax_hypotheses(&xs, &ys, |x, y| f.eval(x.0[0], y.0[0]), eps_s, 1000, ctx.seed)?;
            ctx.detail("gaps", &gaps)?;
            ctx.detail("equality_hypotheses", &hyp)?;
        }
    }
    Ok(())
}

/// `sup |d|` of a one-variable derivative on `[-r, r]`.
fn sup_abs_1d(d: &(dyn Fn(f64) -> f64 + Send + Sync), r: f64) -> f64 {
    uniform_grid(-r, r, 20_001).into_iter().map(|x| d(x).abs()).fold(0.0, f64::max)
}

fn run_three_solutions(ctx: &mut Ctx, p: &ThreeSolutionsParams) -> Result<()> {
    match p {
        ThreeSolutionsParams::Witness { i, j, dim, x_hat, radius_factor, radius_override, newton, expect_bound } => {
            let fi = Field::new(i.clone())?;
            let fj = Field::new(j.clone())?;
            if x_hat.dim() != *dim {
                return Err(LabError::DimensionMismatch { expected: *dim, got: x_hat.dim() });
            }
            let bound = three_solution_radius(&fi, &fj, x_hat, &BoundOptions::default())?;
            ctx.lap("radius bound");
            ctx.detail("radius_bound", &bound)?;
            if let Some(e) = expect_bound {
                ctx.check("radius bound", e.holds(bound.value), format!("{} vs {} ± {}", bound.value, e.value, e.tol));
                ctx.check(
                    "truncation sensitivity",
                    bound.sensitivity < 1e-6,
                    format!("sensitivity {:e}", bound.sensitivity),
                );
            }
            let radius = match radius_override {
                Some(r) => {
                    ctx.warnings.push(format!("search radius overridden to {r}; the ball is not certified"));
                    SearchRadius::Override(*r)
                }
                None => SearchRadius::Certified { r: radius_factor * bound.value, bound },
            };
            let wopts = WitnessOptions {
                divisions: ctx.scaled(WitnessOptions::default().divisions),
                newton: newton.clone(),
                ..WitnessOptions::default()
            };
            let found = find_three_solutions(&fi, &fj, *dim, &radius, &wopts)?;
            ctx.lap("witness search");
            match found {
                Outcome::Found(w) => {
                    let worst = w
                        .roots
                        .iter()
                        .map(|x| three_solution_residual(i, j, &w.y0, w.mu0, x))
                        .collect::<Result<Vec<f64>>>()?
                        .into_iter()
                        .fold(0.0, f64::max);
                    ctx.check(
                        "three roots",
                        w.roots.len() >= 3 && worst < newton.tol_root,
                        format!("{} roots, max |F| {worst:e}", w.roots.len()),
                    );
                    if *dim == 1 {
                        let di = field_derivative_1d(i)?;
                        let dj = field_derivative_1d(j)?;
                        let y0 = w.y0.0[0];
                        let mu0 = w.mu0;
                        let sup = sup_abs_1d(&*di, 100.0) + mu0.abs() * sup_abs_1d(&*dj, 100.0);
                        let half = y0.abs() + sup + 1.0;
                        let n = ((2.0 * half / 1e-3).ceil() as usize).max(1000);
                        let oracle = scalar_three_roots(|x| di(x) + mu0 * dj(x), 1.0, y0, -half, half, n);
                        ctx.check(
                            "root count matches bisection",
                            oracle.count == w.roots.len(),
                            format!("bisection {} vs Newton {}", oracle.count, w.roots.len()),
                        );
                    }
                    ctx.witnesses.push(Witness::ThreeRoots(w));
                }
                Outcome::NotFound(msg) => ctx.warnings.push(msg),
            }
        }
        ThreeSolutionsParams::Scalar { j, a, b, interval, brackets, starts, min_roots, newton } => {
            let dj = field_derivative_1d(j)?;
            let bis = scalar_three_roots(&*dj, *a, *b, interval[0], interval[1], *brackets);
            let fj = Field::new(j.clone())?;
            let field = |x: &Point| Point(vec![x.0[0] + a * fj.grad(x).0[0] - b]);
            let grid: Vec<Point> = uniform_grid(interval[0], interval[1], ctx.scaled(*starts))
                .into_iter()
                .map(|v| Point(vec![v]))
                .collect();
            let found: Vec<f64> = solve_deflated(&field, &grid, newton)
                .into_iter()
                .map(|p| p.0[0])
                .filter(|x| (interval[0]..=interval[1]).contains(x))
                .collect();
            ctx.lap("roots");
            ctx.check(
                "root count",
                bis.count >= *min_roots,
                format!("{} bisection roots, need {min_roots}", bis.count),
            );
            let same = found.len() == bis.count
                && found.iter().zip(&bis.roots).all(|(x, y)| (x - y).abs() < 1e-9);
            ctx.check(
                "deflation matches bisection",
                same,
                format!("bisection {:?} vs deflation {:?}", bis.roots, found),
            );
            ctx.detail("bisection", &bis)?;
            ctx.witnesses.push(Witness::ScalarRoots { j: j.clone(), a: *a, b: *b, roots: found });
        }
    }
    Ok(())
}

fn record(states: &[CriticalState]) -> Vec<StateRecord> {
    states
        .iter()
        .map(|s| StateRecord { u: s.state.u.clone(), q: s.state.q, energy: s.energy, residual: s.residual })
        .collect()
}

fn write_states(ctx: &mut Ctx, states: &[CriticalState]) -> Result<()> {
    for (k, s) in states.iter().enumerate() {
        if let Some(path) = ctx.artifact(&format!("state{k}.csv")) {
            s.state.write_csv(&path)?;
        }
    }
    Ok(())
}

fn pair_checks(ctx: &mut Ctx, pair: &SolutionPair) {
    ctx.check(
        "two or more states",
        pair.states.len() >= 2,
        format!("{} states, separation {:e}", pair.states.len(), pair.separation),
    );
    let certified = pair.refinement.iter().filter(|r| r.certified).count();
    ctx.check(
        "grid refinement",
        certified == pair.refinement.len(),
        format!("{certified}/{} states certified on the doubled grid", pair.refinement.len()),
    );
}

fn run_kirchhoff(ctx: &mut Ctx, p: &KirchhoffParams) -> Result<()> {
    let problem = &p.problem;
    let solver = &p.solver;
    match &p.task {
        KirchhoffTask::Multistart { alpha, beta, starts, refine, expect_states } => {
            let forcing = Forcing::new(alpha.clone(), beta.clone(), problem)?;
            let pool = default_starts(problem, ctx.scaled(*starts), ctx.seed);
            let res = solve_multistart(problem, &forcing, &pool, solver)?;
            ctx.lap("multistart");
            let scale = 1.0 + forcing.sup_norm();
            let worst = res.states.iter().map(|s| s.residual).fold(0.0, f64::max);
            ctx.check("residuals", worst < solver.tol_res * scale, format!("max residual {worst:e}"));
            ctx.check("energy decrease", res.monotone, "descent energies never increase");
            if let Some(k) = expect_states {
                ctx.check("state count", res.states.len() == *k, format!("{} states, expected {k}", res.states.len()));
            }
            if *refine {
                let checks = res
                    .states
                    .iter()
                    .map(|s| refine_state(problem, &forcing, &s.state, solver))
                    .collect::<Result<Vec<_>>>()?;
                let certified = checks.iter().filter(|c| c.certified).count();
                ctx.check(
                    "grid refinement",
                    certified == checks.len(),
                    format!("{certified}/{} states certified on the doubled grid", checks.len()),
                );
                ctx.detail("refinement", &checks)?;
                ctx.lap("refinement");
            }
            ctx.detail("converged", &res.converged)?;
            ctx.detail("failed", &res.failed)?;
            write_states(ctx, &res.states)?;
            ctx.witnesses.push(Witness::KirchhoffStates {
                alpha: alpha.clone(),
                beta: beta.clone(),
                states: record(&res.states),
            });
        }
        KirchhoffTask::Search { family, budget } => {
            let mut budget = budget.clone();
            budget.seed = ctx.seed;
            budget.max_forcings = ctx.scaled(budget.max_forcings);
            let found = search_alpha_beta(problem, family, &budget, solver)?;
            ctx.lap("search");
            ctx.detail("evaluated", &found.evaluated)?;
            ctx.detail("degree_reached", &found.degree_reached)?;
            match &found.witness {
                Some(pair) => {
                    pair_checks(ctx, pair);
                    ctx.detail("refinement", &pair.refinement)?;
                    write_states(ctx, &pair.states)?;
                    ctx.witnesses.push(Witness::KirchhoffStates {
                        alpha: pair.forcing.alpha.clone(),
                        beta: pair.forcing.beta.clone(),
                        states: record(&pair.states),
                    });
                }
                None => {
                    ctx.detail("best", &found.best)?;
                    ctx.warnings.push(format!(
                        "no forcing with two certified states among {} candidates up to degree {}",
                        found.evaluated, found.degree_reached
                    ));
                }
            }
        }
        KirchhoffTask::Uniqueness { forcings, degree, amplitude, starts, parabola } => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let pool: Vec<Forcing> = (0..ctx.scaled(*forcings))
                .map(|_| random_forcing(problem, *degree, *amplitude, &mut rng))
                .collect();
            let rep = uniqueness_probe(problem, &pool, ctx.scaled(*starts), ctx.seed, solver)?;
            ctx.lap("uniqueness");
            ctx.check(
                "one state per forcing",
                rep.violations == 0,
                format!("{} of {} forcings with several clusters", rep.violations, rep.entries.len()),
            );
            ctx.check("cluster spread", rep.max_spread < 1e-8, format!("max spread {:e}", rep.max_spread));
            ctx.detail("uniqueness", &rep)?;
            if *parabola {
                parabola_check(ctx, p)?;
            }
        }
    }
    Ok(())
}

/// `alpha ≡ 1, beta ≡ 0` with `omega = 1/(rho − x)`: `u = ((rho − q)/2) t(1 − t)`
/// and `q = (rho − q)^2 / 12`, so `q = rho + 6 − sqrt(12 rho + 36)`. The
/// difference scheme is exact on quadratics, so the grid state is the same
/// parabola with `q_h = (rho − q_h)^2 (1 − h^2) / 12`.
fn parabola_check(ctx: &mut Ctx, p: &KirchhoffParams) -> Result<()> {
    let problem = &p.problem;
    if problem.omega != Omega::InvGap {
        ctx.warnings.push("parabola comparison needs omega = inv-gap; skipped".into());
        return Ok(());
    }
    let rho = problem.rho;
    let q = rho + 6.0 - (12.0 * rho + 36.0).sqrt();
    let h = problem.h();
    let s = (1.0 - h * h) / 12.0;
    let b = 2.0 * rho * s + 1.0;
    let q_h = (b - (b * b - 4.0 * rho * rho * s * s).sqrt()) / (2.0 * s);
    let forcing = Forcing::constant(1.0, 0.0, problem);
    let pool = default_starts(problem, 5, ctx.seed);
    let res = solve_multistart(problem, &forcing, &pool, &p.solver)?;
    let exact = DiscreteState::from_fn(problem, |t| 0.5 * (rho - q) * t * (1.0 - t));
    let (err, dq) = match res.states.first() {
        Some(st) if res.states.len() == 1 => (
            st.state.u.iter().zip(&exact.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            (st.state.q - q_h).abs(),
        ),
        _ => (f64::INFINITY, f64::INFINITY),
    };
    ctx.check(
        "parabola",
        err < 1e-6,
        format!("{} state(s), nodal error {err:e} against the continuum parabola", res.states.len()),
    );
    ctx.check("grid energy", dq < 1e-9, format!("|q - q_h| = {dq:e}"));
    if let Some(st) = res.states.first() {
        let r = residual_check(&st.state, problem, &forcing)?;
        ctx.detail(
            "parabola",
            &json!({ "q_exact": q, "q_grid_exact": q_h, "q": st.state.q, "nodal_error": err, "residual": r.residual }),
        )?;
    }
    ctx.lap("parabola");
    Ok(())
}

fn run_validate(ctx: &mut Ctx, p: &ValidateParams) -> Result<()> {
    let v = validate_problem(&p.problem)?;
    let nc = nonconstancy_check(&p.problem.f, p.problem.rho, 1001)?;
    ctx.lap("validate");
    ctx.check("omega nonnegative", v.nonnegative, "sampled on [0, rho)");
    ctx.check("omega nondecreasing", v.nondecreasing, "sampled on [0, rho)");
    ctx.check(
        "integral of omega diverges at rho",
        v.diverges,
        format!("ratio {:?}, late decade {:?}", v.divergence_ratio, v.late_decade_ratio),
    );
    ctx.check("energy coercive", v.coercive, "sampled");
    if !nc.nonconstant {
        ctx.warnings.push("f is constant near 0: expect a single solution for every forcing".into());
    }
    ctx.detail("validation", &v)?;
    ctx.detail("nonconstancy", &nc)?;
    Ok(())
}
