//! Critical points of the discrete energy from many starts.
//!
//! Phase one is descent preconditioned by `omega(q) K` with Armijo
//! backtracking; phase two is Newton on the gradient, whose Jacobian
//! `omega K − h diag(beta f') + 2 omega'(q) (K u)(K u)^T` is tridiagonal plus
//! rank one. Every trial point must keep `q < rho (1 − margin)`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    dirichlet_energy, embedding_check, energy, energy_gradient, residual_check, stiffness_apply, DiscreteState,
    Forcing, KirchhoffProblem,
};
use crate::error::{LabError, Result};
use crate::linalg::Tridiagonal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_descent: usize,
    /// Residual (relative to the forcing scale) below which Newton takes over.
    pub switch_tol: f64,
    pub max_newton: usize,
    /// Convergence: residual `< tol_grad (1 + |forcing|)`.
    pub tol_grad: f64,
    /// Verification: residual `< tol_res (1 + |forcing|)`.
    pub tol_res: f64,
    /// Grid-L² distance below which two states are the same.
    pub eps_s: f64,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_descent: 2000,
            switch_tol: 1e-3,
            max_newton: 60,
            tol_grad: 1e-9,
            tol_res: 1e-6,
            eps_s: 1e-5,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    /// Energy after every accepted descent step.
    pub energies: Vec<f64>,
    pub descent_steps: usize,
    pub newton_steps: usize,
}

impl SolveTrace {
    pub fn monotone(&self) -> bool {
        self.energies
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-14 * (1.0 + w[0].abs()))
    }
}

fn residual_of(g: &[f64], h: f64) -> f64 {
    g.iter().fold(0.0_f64, |a, b| a.max(b.abs())) / h
}

fn trial(u: &[f64], d: &[f64], t: f64, q_limit: f64) -> Option<DiscreteState> {
    let v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + t * b).collect();
    let q = dirichlet_energy(&v);
    (q < q_limit).then_some(DiscreteState { u: v, q })
}

fn newton_direction(state: &DiscreteState, g: &[f64], problem: &KirchhoffProblem, forcing: &Forcing) -> Option<Vec<f64>> {
    let h = problem.h();
    let w = problem.omega.eval(state.q, problem.rho);
    let dw = problem.omega.deriv(state.q, problem.rho);
    let diag = state
        .u
        .iter()
        .zip(forcing.beta_nodes())
        .map(|(&u, &b)| 2.0 * w / h - h * b * problem.f.deriv(u))
        .collect();
    let t = Tridiagonal { diag, off: -w / h };
    let ku = stiffness_apply(&state.u);
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    t.solve_rank_one(2.0 * dw, &ku, &rhs)
}

enum Phase {
    Converged,
    Switch,
    Stalled,
}

fn descend(
    state: &mut DiscreteState,
    problem: &KirchhoffProblem,
    forcing: &Forcing,
    opts: &SolverOptions,
    switch: f64,
    trace: &mut SolveTrace,
) -> Result<Phase> {
    let h = problem.h();
    let scale = 1.0 + forcing.sup_norm();
    let mut e = energy(state, problem, forcing)?;
    for _ in 0..opts.max_descent {
        let g = energy_gradient(state, problem, forcing)?;
        let res = residual_of(&g, h);
        if res < opts.tol_grad * scale {
            return Ok(Phase::Converged);
        }
        if res < switch * scale {
            return Ok(Phase::Switch);
        }
        let w = problem.omega.eval(state.q, problem.rho);
        let pre = Tridiagonal { diag: vec![2.0 * w / h; problem.n], off: -w / h };
        let Some(pg) = pre.solve(&g) else {
            return Ok(Phase::Stalled);
        };
        let d: Vec<f64> = pg.iter().map(|v| -v).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let accepted = loop {
            if let Some(cand) = trial(&state.u, &d, t, problem.q_limit()) {
                let ec = energy(&cand, problem, forcing)?;
                if ec <= e + opts.armijo * t * slope {
                    break Some((cand, ec));
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((cand, ec)) = accepted else {
            return Ok(Phase::Switch);
        };
        *state = cand;
        e = ec;
        trace.energies.push(e);
        trace.descent_steps += 1;
    }
    Ok(Phase::Stalled)
}

fn newton(
    state: &mut DiscreteState,
    problem: &KirchhoffProblem,
    forcing: &Forcing,
    opts: &SolverOptions,
    trace: &mut SolveTrace,
) -> Result<bool> {
    let h = problem.h();
    let scale = 1.0 + forcing.sup_norm();
    let mut g = energy_gradient(state, problem, forcing)?;
    let mut res = residual_of(&g, h);
    for _ in 0..opts.max_newton {
        if res < opts.tol_grad * scale {
            return Ok(true);
        }
        let Some(d) = newton_direction(state, &g, problem, forcing) else {
            return Ok(false);
        };
        let mut t = 1.0;
        let mut moved = false;
        while t >= 1e-4 {
            if let Some(cand) = trial(&state.u, &d, t, problem.q_limit()) {
                let gc = energy_gradient(&cand, problem, forcing)?;
                let rc = residual_of(&gc, h);
                if rc < (1.0 - 1e-4 * t) * res {
                    *state = cand;
                    g = gc;
                    res = rc;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        trace.newton_steps += 1;
        if !moved {
            return Ok(res < opts.tol_grad * scale);
        }
    }
    Ok(res < opts.tol_grad * scale)
}

/// Descent then Newton from one start; `None` when no critical point is
/// reached. Lowers the Newton switch threshold after each failed Newton
/// phase.
pub fn solve_from(
    problem: &KirchhoffProblem,
    forcing: &Forcing,
    start: &DiscreteState,
    opts: &SolverOptions,
) -> Result<Option<(DiscreteState, SolveTrace)>> {
    if start.u.len() != problem.n {
        return Err(LabError::DimensionMismatch { expected: problem.n, got: start.u.len() });
    }
    if !(start.q < problem.q_limit()) {
        return Err(LabError::EnergyConstraint { q: start.q, limit: problem.q_limit() });
    }
    let mut state = start.clone();
    let mut trace = SolveTrace::default();
    let mut switch = opts.switch_tol;
    for _ in 0..4 {
        match descend(&mut state, problem, forcing, opts, switch, &mut trace)? {
            Phase::Converged => return Ok(Some((state, trace))),
            Phase::Stalled => {}
            Phase::Switch => {}
        }
        if newton(&mut state, problem, forcing, opts, &mut trace)? {
            return Ok(Some((state, trace)));
        }
        switch *= 1e-2;
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalState {
    pub state: DiscreteState,
    pub energy: f64,
    pub residual: f64,
    /// starts that converged into this cluster
    pub members: usize,
    /// largest grid-L² distance from the representative to a member
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult {
    /// distinct states sorted by energy, then lexicographically
    pub states: Vec<CriticalState>,
    pub converged: usize,
    pub failed: usize,
    /// every accepted descent step lowered the energy
    pub monotone: bool,
}

/// Runs [`solve_from`] from every start (in parallel), verifies each
/// converged state and merges states closer than `eps_s`.
pub fn solve_multistart(
    problem: &KirchhoffProblem,
    forcing: &Forcing,
    starts: &[DiscreteState],
    opts: &SolverOptions,
) -> Result<MultistartResult> {
    let runs: Vec<Option<(DiscreteState, SolveTrace)>> = starts
        .par_iter()
        .map(|s| solve_from(problem, forcing, s, opts))
        .collect::<Result<_>>()?;
    let scale = 1.0 + forcing.sup_norm();
    let mut monotone = true;
    let mut found: Vec<(DiscreteState, f64)> = Vec::new();
    let mut failed = 0;
    for (k, run) in runs.into_iter().enumerate() {
        let Some((st, trace)) = run else {
            log::debug!("start {k}: no critical point reached");
            failed += 1;
            continue;
        };
        monotone &= trace.monotone();
        if !embedding_check(&st) {
            return Err(LabError::Invariant(format!("embedding inequality fails for start {k}")));
        }
        let r = residual_check(&st, problem, forcing)?;
        if r.residual >= opts.tol_res * scale || !(st.q < problem.q_limit()) {
            log::debug!("start {k}: residual {} fails verification", r.residual);
            failed += 1;
            continue;
        }
        found.push((st, r.residual));
    }
    let converged = found.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..found.len() {
        match clusters
            .iter_mut()
            .find(|(rep, _)| found[*rep].0.l2_dist(&found[i].0) <= opts.eps_s)
        {
            Some((_, members)) => members.push(i),
            None => clusters.push((i, vec![i])),
        }
    }
    let mut states = Vec::with_capacity(clusters.len());
    for (rep, members) in clusters {
        let (st, residual) = &found[rep];
        let spread = members
            .iter()
            .map(|&m| found[m].0.l2_dist(st))
            .fold(0.0, f64::max);
        states.push(CriticalState {
            energy: energy(st, problem, forcing)?,
            state: st.clone(),
            residual: *residual,
            members: members.len(),
            spread,
        });
    }
    states.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| a.state.u.iter().zip(&b.state.u).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(MultistartResult { states, converged, failed, monotone })
}

/// Deterministic starts: `0`, `±c sin(kπt)` for `k = 1..=4` with `c` chosen
/// so that `q` is 25% or 60% of the admissible budget, then random smooth
/// combinations of the first six sine modes.
pub fn default_starts(problem: &KirchhoffProblem, count: usize, seed: u64) -> Vec<DiscreteState> {
    let nodes = problem.nodes();
    let qmax = 0.9 * problem.q_limit();
    let scaled = |shape: Vec<f64>, target: f64| {
        let q = dirichlet_energy(&shape);
        let s = if q > 0.0 { (target / q).sqrt() } else { 0.0 };
        DiscreteState::new(shape.into_iter().map(|v| v * s).collect())
    };
    let mode = |k: usize| -> Vec<f64> {
        nodes.iter().map(|t| (k as f64 * std::f64::consts::PI * t).sin()).collect()
    };
    let mut out = vec![DiscreteState::zero(problem.n)];
    'fixed: for k in 1..=4 {
        for frac in [0.25, 0.6] {
            for sign in [1.0, -1.0] {
                if out.len() >= count {
                    break 'fixed;
                }
                out.push(scaled(mode(k).into_iter().map(|v| sign * v).collect(), frac * qmax / 0.9));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let coeffs: Vec<f64> = (1..=6).map(|k| (2.0 * rng.random::<f64>() - 1.0) / k as f64).collect();
        let shape: Vec<f64> = nodes
            .iter()
            .map(|t| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * t).sin())
                    .sum()
            })
            .collect();
        let target = qmax * (0.02 + 0.98 * rng.random::<f64>());
        out.push(scaled(shape, target));
    }
    out.truncate(count);
    out
}

#[cfg(test)]
mod tests {
    use super::super::{Omega, Reaction};
    use super::*;
    use std::f64::consts::PI;

    /// The discrete eigenstate: `u = c sin(πt)` with `omega(q) λ_h = 2π^2`,
    /// `λ_h = (4/h^2) sin^2(πh/2)`, `q = c^2 λ_h / 2`.
    fn discrete_eigen_amplitude(h: f64) -> f64 {
        let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let q = 1.0 - lam / (2.0 * PI * PI);
        (2.0 * q / lam).sqrt()
    }

    #[test]
    fn eigen_problem_has_exactly_three_states() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 200).unwrap();
        let f = Forcing::constant(0.0, 2.0 * PI * PI, &p);
        let starts = default_starts(&p, 50, 0);
        let r = solve_multistart(&p, &f, &starts, &SolverOptions::default()).unwrap();
        assert_eq!(r.states.len(), 3);
        assert!(r.monotone);
        let c = discrete_eigen_amplitude(p.h());
        let nodes = p.nodes();
        let mid = &r.states.iter().find(|s| s.state.sup_norm() < 1e-8).unwrap().state;
        assert_eq!(mid.q, 0.0);
        for s in r.states.iter().filter(|s| s.state.sup_norm() > 1e-8) {
            let sign = s.state.u[100].signum();
            let err = s.state.u.iter().zip(&nodes).map(|(u, t)| (u - sign * c * (PI * t).sin()).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn starts_are_admissible_and_deterministic() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 50).unwrap();
        let a = default_starts(&p, 50, 3);
        let b = default_starts(&p, 50, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|s| s.q < p.q_limit()));
    }

    #[test]
    fn zero_forcing_gives_zero_state() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 40).unwrap();
        let f = Forcing::constant(0.0, 0.0, &p);
        let r = solve_multistart(&p, &f, &default_starts(&p, 20, 1), &SolverOptions::default()).unwrap();
        assert_eq!(r.states.len(), 1);
        assert!(r.states[0].state.sup_norm() < 1e-10);
    }
}
