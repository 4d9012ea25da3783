//! Forcing search, refinement certification and the constant-reaction
//! uniqueness probe.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{default_starts, solve_from, solve_multistart, CriticalState, SolverOptions};
use super::{energy, nonconstancy_check, residual_check, trig_len, DiscreteState, Forcing, KirchhoffProblem};
use crate::error::{LabError, Result};

/// Coefficient lattice `lattice_step · Z` with `|c| <= coeff_bound` on the
/// trig family of degree `<= degree`, for both `alpha` and `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub degree: usize,
    pub lattice_step: f64,
    pub coeff_bound: f64,
}

/// Integer vectors of length `dim` with `Σ|k_i| = s` and `|k_i| <= bound`,
/// in lexicographic order. Stops after `limit` vectors.
fn l1_shell(dim: usize, s: i64, bound: i64, limit: usize, out: &mut Vec<Vec<i64>>) {
    fn rec(prefix: &mut Vec<i64>, left: usize, s: i64, bound: i64, limit: usize, out: &mut Vec<Vec<i64>>) {
        if out.len() >= limit {
            return;
        }
        if left == 1 {
            if s > bound {
                return;
            }
            for v in if s == 0 { vec![0] } else { vec![-s, s] } {
                prefix.push(v);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let m = s.min(bound);
        for v in -m..=m {
            prefix.push(v);
            rec(prefix, left - 1, s - v.abs(), bound, limit, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::new(), dim, s, bound, limit, out);
}

/// Lattice forcings whose top-degree coefficients are not all zero, in order
/// of increasing L1 norm of the integer coefficients, then lexicographic
/// (alpha coefficients first).
pub fn family_candidates(family: &FamilySpec, degree: usize, limit: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let len = trig_len(degree);
    let bound = (family.coeff_bound / family.lattice_step).floor() as i64;
    let top = |k: &[i64]| degree == 0 || k[len - 2] != 0 || k[len - 1] != 0 || k[2 * len - 2] != 0 || k[2 * len - 1] != 0;
    let mut out = Vec::new();
    let mut s = 0;
    while out.len() < limit && s <= 2 * len as i64 * bound {
        let mut shell = Vec::new();
        l1_shell(2 * len, s, bound, usize::MAX, &mut shell);
        for k in shell.into_iter().filter(|k| top(k)) {
            if out.len() >= limit {
                break;
            }
            let c: Vec<f64> = k.iter().map(|&v| v as f64 * family.lattice_step).collect();
            out.push((c[..len].to_vec(), c[len..].to_vec()));
        }
        s += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub n_fine: usize,
    pub converged: bool,
    pub residual_fine: Option<f64>,
    /// `max_i |u_fine(t_i) − u(t_i)|` on the shared nodes
    pub shift: Option<f64>,
    pub certified: bool,
}

/// Linear interpolation onto the grid with `2n + 1` interior nodes (which
/// contains the original nodes).
pub fn prolong(state: &DiscreteState) -> DiscreteState {
    let n = state.u.len();
    let at = |i: usize| if i == 0 || i > n { 0.0 } else { state.u[i - 1] };
    let fine: Vec<f64> = (1..=2 * n + 1)
        .map(|j| if j % 2 == 0 { at(j / 2) } else { 0.5 * (at(j / 2) + at(j / 2 + 1)) })
        .collect();
    DiscreteState::new(fine)
}

/// Re-solves a state on the doubled grid. The state counts as a classical
/// solution when the refined problem has a nearby critical point with small
/// residual and the nodal shift is `O(h^2)`.
pub fn refine_state(
    problem: &KirchhoffProblem,
    forcing: &Forcing,
    state: &DiscreteState,
    opts: &SolverOptions,
) -> Result<RefinementCheck> {
    let fine_problem = problem.with_n(2 * problem.n + 1);
    let fine_forcing = forcing.resample(&fine_problem);
    let start = prolong(state);
    let n_fine = fine_problem.n;
    let Some((fine, _)) = solve_from(&fine_problem, &fine_forcing, &start, opts)? else {
        return Ok(RefinementCheck { n_fine, converged: false, residual_fine: None, shift: None, certified: false });
    };
    let residual_fine = residual_check(&fine, &fine_problem, &fine_forcing)?.residual;
    let shift = state
        .u
        .iter()
        .enumerate()
        .map(|(i, v)| (fine.u[2 * i + 1] - v).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + forcing.sup_norm();
    let h = problem.h();
    let certified = residual_fine < opts.tol_res * scale && shift < 100.0 * scale * h * h;
    Ok(RefinementCheck { n_fine, converged: true, residual_fine: Some(residual_fine), shift: Some(shift), certified })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionPair {
    pub forcing: Forcing,
    pub degree: usize,
    pub states: Vec<CriticalState>,
    pub residuals: Vec<f64>,
    /// smallest pairwise grid-L² distance
    pub separation: f64,
    pub refinement: Vec<RefinementCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaSearch {
    pub witness: Option<SolutionPair>,
    pub evaluated: usize,
    pub degree_reached: usize,
    /// `(alpha, beta, multiplicity)` of the best candidate when no witness
    pub best: Option<(Vec<f64>, Vec<f64>, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// forcings tried over all degrees
    pub max_forcings: usize,
    pub starts: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_forcings: 200, starts: 20, batch: 8, seed: 0 }
    }
}

fn min_separation(states: &[CriticalState]) -> f64 {
    let mut sep = f64::INFINITY;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            sep = sep.min(states[i].state.l2_dist(&states[j].state));
        }
    }
    sep
}

/// Walks the forcing lattice degree by degree and returns the first forcing
/// with at least two verified, refinement-certified states. Refuses to run
/// when `f` is constant on `[−sqrt(rho)/2, sqrt(rho)/2]`.
pub fn search_alpha_beta(
    problem: &KirchhoffProblem,
    family: &FamilySpec,
    budget: &SearchBudget,
    opts: &SolverOptions,
) -> Result<AlphaBetaSearch> {
    problem.check()?;
    if !(family.lattice_step > 0.0 && family.coeff_bound >= family.lattice_step) {
        return Err(LabError::InvalidParameter("lattice step must be positive and below the coefficient bound".into()));
    }
    let gate = nonconstancy_check(&problem.f, problem.rho, 1001)?;
    if !gate.nonconstant {
        return Err(LabError::Hypothesis(format!(
            "f is constant on [-sqrt(rho)/2, sqrt(rho)/2]: no forcing can give two solutions (rho = {})",
            problem.rho
        )));
    }
    let starts = default_starts(problem, budget.starts, budget.seed);
    let mut evaluated = 0;
    let mut best: Option<(Vec<f64>, Vec<f64>, usize)> = None;
    let mut degree_reached = 0;
    for degree in 0..=family.degree {
        degree_reached = degree;
        let remaining = budget.max_forcings.saturating_sub(evaluated);
        if remaining == 0 {
            break;
        }
        let cands = family_candidates(family, degree, remaining);
        for chunk in cands.chunks(budget.batch.max(1)) {
            let results: Vec<(Forcing, Vec<CriticalState>)> = chunk
                .par_iter()
                .map(|(a, b)| {
                    let forcing = Forcing::new(a.clone(), b.clone(), problem)?;
                    let r = solve_multistart(problem, &forcing, &starts, opts)?;
                    Ok((forcing, r.states))
                })
                .collect::<Result<_>>()?;
            evaluated += chunk.len();
            for (forcing, states) in results {
                if best.as_ref().is_none_or(|b| states.len() > b.2) {
                    best = Some((forcing.alpha.clone(), forcing.beta.clone(), states.len()));
                }
                if states.len() < 2 {
                    continue;
                }
                let refinement: Vec<RefinementCheck> = states
                    .par_iter()
                    .map(|s| refine_state(problem, &forcing, &s.state, opts))
                    .collect::<Result<_>>()?;
                let certified: Vec<CriticalState> = states
                    .iter()
                    .zip(&refinement)
                    .filter(|(_, r)| r.certified)
                    .map(|(s, _)| s.clone())
                    .collect();
                if certified.len() >= 2 {
                    return Ok(AlphaBetaSearch {
                        witness: Some(SolutionPair {
                            residuals: states.iter().map(|s| s.residual).collect(),
                            separation: min_separation(&states),
                            forcing,
                            degree,
                            states,
                            refinement,
                        }),
                        evaluated,
                        degree_reached,
                        best: None,
                    });
                }
            }
        }
    }
    Ok(AlphaBetaSearch { witness: None, evaluated, degree_reached, best })
}

/// Random coefficients, uniform in `[−amplitude, amplitude]`, degree `<= degree`.
pub fn random_forcing(problem: &KirchhoffProblem, degree: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Forcing {
    let len = trig_len(degree);
    let mut draw = || (0..len).map(|_| amplitude * (2.0 * rng.random::<f64>() - 1.0)).collect::<Vec<f64>>();
    let alpha = draw();
    let beta = draw();
    Forcing::new(alpha, beta, problem).expect("finite draws")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessEntry {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub clusters: usize,
    pub spread: f64,
    pub converged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub entries: Vec<UniquenessEntry>,
    /// forcings with more than one cluster
    pub violations: usize,
    pub max_spread: f64,
}

/// For a constant reaction every converged start must land in one cluster.
pub fn uniqueness_probe(
    problem: &KirchhoffProblem,
    forcings: &[Forcing],
    starts_per_forcing: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    if !problem.f.is_constant() {
        return Err(LabError::Hypothesis("uniqueness probe needs a constant reaction".into()));
    }
    let starts = default_starts(problem, starts_per_forcing, seed);
    let mut entries = Vec::with_capacity(forcings.len());
    for forcing in forcings {
        let r = solve_multistart(problem, forcing, &starts, opts)?;
        entries.push(UniquenessEntry {
            alpha: forcing.alpha.clone(),
            beta: forcing.beta.clone(),
            clusters: r.states.len(),
            spread: r.states.iter().map(|s| s.spread).fold(0.0, f64::max),
            converged: r.converged,
        });
    }
    Ok(UniquenessReport {
        violations: entries.iter().filter(|e| e.clusters != 1).count(),
        max_spread: entries.iter().map(|e| e.spread).fold(0.0, f64::max),
        entries,
    })
}

/// Counts sampled pairs with `E((u + v)/2) >= (E(u) + E(v))/2`.
pub fn convexity_spot_check(problem: &KirchhoffProblem, forcing: &Forcing, pairs: usize, seed: u64) -> Result<usize> {
    let pool = default_starts(problem, 2 * pairs + 1, seed);
    let mut bad = 0;
    for k in 0..pairs {
        let (u, v) = (&pool[1 + 2 * k], &pool[2 + 2 * k]);
        let mid = DiscreteState::new(u.u.iter().zip(&v.u).map(|(a, b)| 0.5 * (a + b)).collect());
        let lhs = energy(&mid, problem, forcing)?;
        let rhs = 0.5 * (energy(u, problem, forcing)? + energy(v, problem, forcing)?);
        if lhs >= rhs {
            bad += 1;
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use super::super::{Omega, Reaction};
    use super::*;

    #[test]
    fn lattice_order_is_l1_then_lex() {
        let fam = FamilySpec { degree: 0, lattice_step: 1.0, coeff_bound: 2.0 };
        let c = family_candidates(&fam, 0, 9);
        let ints: Vec<(f64, f64)> = c.iter().map(|(a, b)| (a[0], b[0])).collect();
        assert_eq!(
            ints,
            vec![(0.0, 0.0), (-1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0), (-2.0, 0.0), (-1.0, -1.0), (-1.0, 1.0), (0.0, -2.0)]
        );
        // degree 1 candidates all use a degree-1 coefficient
        let fam1 = FamilySpec { degree: 1, lattice_step: 0.5, coeff_bound: 1.0 };
        for (a, b) in family_candidates(&fam1, 1, 50) {
            assert!(a[1] != 0.0 || a[2] != 0.0 || b[1] != 0.0 || b[2] != 0.0);
        }
    }

    #[test]
    fn constant_reaction_is_refused() {
        let p = KirchhoffProblem::new(Reaction::Constant(1.0), Omega::InvGap, 1.0, 20).unwrap();
        let fam = FamilySpec { degree: 0, lattice_step: 1.0, coeff_bound: 5.0 };
        assert!(matches!(
            search_alpha_beta(&p, &fam, &SearchBudget::default(), &SolverOptions::default()),
            Err(LabError::Hypothesis(_))
        ));
    }

    #[test]
    fn linear_reaction_search_finds_three_states() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 60).unwrap();
        let fam = FamilySpec { degree: 0, lattice_step: 2.5, coeff_bound: 25.0 };
        let s = search_alpha_beta(&p, &fam, &SearchBudget::default(), &SolverOptions::default()).unwrap();
        let w = s.witness.unwrap();
        assert_eq!(w.states.len(), 3);
        assert_eq!((w.forcing.alpha[0], w.forcing.beta[0]), (0.0, 10.0));
        assert!(w.refinement.iter().all(|r| r.certified));
        assert!(w.separation > 1e-5);
    }

    #[test]
    fn prolongation_keeps_nodes() {
        let s = DiscreteState::new(vec![1.0, 2.0, 3.0]);
        let f = prolong(&s);
        assert_eq!(f.u, vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 1.5]);
    }

    #[test]
    fn zero_data_is_unique() {
        let p = KirchhoffProblem::new(Reaction::Constant(0.0), Omega::InvGap, 1.0, 30).unwrap();
        let r = uniqueness_probe(&p, &[Forcing::constant(0.0, 0.0, &p)], 10, 0, &SolverOptions::default()).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.entries[0].clusters, 1);
    }

    #[test]
    fn constant_reaction_energy_is_convex() {
        let p = KirchhoffProblem::new(Reaction::Constant(1.0), Omega::InvGap, 1.0, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let f = random_forcing(&p, 2, 5.0, &mut rng);
            assert_eq!(convexity_spot_check(&p, &f, 50, 9).unwrap(), 0);
        }
    }
}
