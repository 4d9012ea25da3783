//! The nonlocal two-point problem
//! `−omega(∫|u'|^2) u'' = beta(t) f(u) + alpha(t)`, `u(0) = u(1) = 0`,
//! `∫|u'|^2 < rho`, discretized variationally.
//!
//! Interior nodes `t_i = i h`, `h = 1/(n+1)`. The Dirichlet energy of the
//! piecewise-linear interpolant is `q = Σ (u_{i+1} − u_i)^2 / h = u^T K u`
//! with `K = tridiag(−1, 2, −1) / h`, and the discrete energy is
//! `E(u) = ½ ω̃(q) − Σ h (beta_i f̃(u_i) + alpha_i u_i)`.

mod search;
mod solver;

pub use search::*;
pub use solver::*;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::expr::Expr;
use crate::quadrature::integrate;

/// `∫_0^xi g` by adaptive quadrature to relative tolerance `1e-10`.
pub fn antiderivative<G: Fn(f64) -> f64>(g: G, xi: f64) -> Result<f64> {
    if !xi.is_finite() {
        return Err(LabError::OutOfDomain { xi, limit: f64::INFINITY });
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let q = integrate(g, 0.0, xi, 1e-10, 1e-14);
    if !q.converged || !q.value.is_finite() {
        return Err(LabError::Invariant(format!("quadrature of ∫_0^{xi} did not converge")));
    }
    Ok(q.value)
}

fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-6 * (1.0 + x.abs());
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Reaction term `f`. Written as `linear`, `const:c`, `sin:k` (`sin(k u)`)
/// or a formula in `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Reaction {
    Linear,
    Constant(f64),
    Sine(f64),
    Expression(Expr),
}

impl Reaction {
    pub fn parse(s: &str) -> Result<Reaction> {
        let s = s.trim();
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| LabError::Config(format!("bad number in reaction `{s}`")))
        };
        Ok(if s == "linear" {
            Reaction::Linear
        } else if let Some(v) = s.strip_prefix("const:") {
            Reaction::Constant(num(v)?)
        } else if let Some(v) = s.strip_prefix("sin:") {
            Reaction::Sine(num(v)?)
        } else {
            Reaction::Expression(Expr::parse(s, "u")?)
        })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Reaction::Linear => u,
            Reaction::Constant(c) => *c,
            Reaction::Sine(k) => (k * u).sin(),
            Reaction::Expression(e) => e.eval(u),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Reaction::Linear => 1.0,
            Reaction::Constant(_) => 0.0,
            Reaction::Sine(k) => k * (k * u).cos(),
            Reaction::Expression(e) => central_diff(|v| e.eval(v), u),
        }
    }

    /// `f̃(xi) = ∫_0^xi f`.
    pub fn antideriv(&self, xi: f64) -> Result<f64> {
        match self {
            Reaction::Linear => Ok(0.5 * xi * xi),
            Reaction::Constant(c) => Ok(c * xi),
            Reaction::Sine(k) => Ok(if *k == 0.0 { 0.0 } else { (1.0 - (k * xi).cos()) / k }),
            Reaction::Expression(e) => antiderivative(|v| e.eval(v), xi),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Reaction::Constant(_))
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reaction::Linear => f.write_str("linear"),
            Reaction::Constant(c) => write!(f, "const:{c}"),
            Reaction::Sine(k) => write!(f, "sin:{k}"),
            Reaction::Expression(e) => f.write_str(e.source()),
        }
    }
}

impl TryFrom<String> for Reaction {
    type Error = LabError;
    fn try_from(s: String) -> Result<Self> {
        Reaction::parse(&s)
    }
}

impl From<Reaction> for String {
    fn from(r: Reaction) -> String {
        r.to_string()
    }
}

/// Nonlocal coefficient `omega` on `[0, rho)`. Written as `inv-gap`
/// (`1/(rho − x)`), `inv-gap-sq` (`1/(rho − x)^2`), `one`, `neg-x` or a
/// formula in `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Omega {
    InvGap,
    InvGapSq,
    One,
    NegX,
    Expression(Expr),
}

impl Omega {
    pub fn parse(s: &str) -> Result<Omega> {
        Ok(match s.trim() {
            "inv-gap" => Omega::InvGap,
            "inv-gap-sq" => Omega::InvGapSq,
            "one" => Omega::One,
            "neg-x" => Omega::NegX,
            other => Omega::Expression(Expr::parse(other, "x")?),
        })
    }

    pub fn eval(&self, x: f64, rho: f64) -> f64 {
        match self {
            Omega::InvGap => 1.0 / (rho - x),
            Omega::InvGapSq => 1.0 / ((rho - x) * (rho - x)),
            Omega::One => 1.0,
            Omega::NegX => -x,
            Omega::Expression(e) => e.eval(x),
        }
    }

    pub fn deriv(&self, x: f64, rho: f64) -> f64 {
        match self {
            Omega::InvGap => 1.0 / ((rho - x) * (rho - x)),
            Omega::InvGapSq => 2.0 / ((rho - x) * (rho - x) * (rho - x)),
            Omega::One => 0.0,
            Omega::NegX => -1.0,
            Omega::Expression(e) => central_diff(|v| e.eval(v), x),
        }
    }

    /// `ω̃(xi) = ∫_0^xi omega` without domain checks; closed forms for the
    /// builtins.
    pub fn tilde_unchecked(&self, xi: f64, rho: f64) -> Result<f64> {
        match self {
            Omega::InvGap => Ok(-(-xi / rho).ln_1p()),
            Omega::InvGapSq => Ok(xi / (rho * (rho - xi))),
            Omega::One => Ok(xi),
            Omega::NegX => Ok(-0.5 * xi * xi),
            Omega::Expression(e) => antiderivative(|v| e.eval(v), xi),
        }
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::InvGap => f.write_str("inv-gap"),
            Omega::InvGapSq => f.write_str("inv-gap-sq"),
            Omega::One => f.write_str("one"),
            Omega::NegX => f.write_str("neg-x"),
            Omega::Expression(e) => f.write_str(e.source()),
        }
    }
}

impl TryFrom<String> for Omega {
    type Error = LabError;
    fn try_from(s: String) -> Result<Self> {
        Omega::parse(&s)
    }
}

impl From<Omega> for String {
    fn from(o: Omega) -> String {
        o.to_string()
    }
}

fn default_margin() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffProblem {
    pub f: Reaction,
    pub omega: Omega,
    pub rho: f64,
    pub n: usize,
    /// Fraction of `rho` kept free below the energy constraint.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl KirchhoffProblem {
    pub fn new(f: Reaction, omega: Omega, rho: f64, n: usize) -> Result<Self> {
        let p = KirchhoffProblem { f, omega, rho, n, margin: default_margin() };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(LabError::InvalidParameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.n < 2 {
            return Err(LabError::InvalidParameter(format!("need n >= 2 interior nodes, got {}", self.n)));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(LabError::InvalidParameter(format!("margin must lie in (0, 1), got {}", self.margin)));
        }
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        KirchhoffProblem { n, ..self.clone() }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Interior nodes `t_1 .. t_n`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|i| i as f64 * h).collect()
    }

    pub fn q_limit(&self) -> f64 {
        self.rho * (1.0 - self.margin)
    }

    /// `ω̃(xi)`, rejecting `xi` outside `[0, rho (1 − margin)]`.
    pub fn omega_tilde(&self, xi: f64) -> Result<f64> {
        if !(xi >= 0.0 && xi <= self.q_limit()) {
            return Err(LabError::OutOfDomain { xi, limit: self.q_limit() });
        }
        self.omega.tilde_unchecked(xi, self.rho)
    }
}

/// Truncated trigonometric family on `[0, 1]`: basis `1`, then
/// `cos(2πkt), sin(2πkt)` for `k = 1..=degree`.
pub fn trig_basis(index: usize, t: f64) -> f64 {
    if index == 0 {
        return 1.0;
    }
    let k = index.div_ceil(2) as f64;
    let arg = 2.0 * std::f64::consts::PI * k * t;
    if index % 2 == 1 {
        arg.cos()
    } else {
        arg.sin()
    }
}

pub fn trig_len(degree: usize) -> usize {
    2 * degree + 1
}

fn trig_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().enumerate().map(|(i, c)| c * trig_basis(i, t)).sum()
}

/// Coefficient pair `(alpha, beta)` with nodal samples on a given grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(skip)]
    alpha_nodes: Vec<f64>,
    #[serde(skip)]
    beta_nodes: Vec<f64>,
}

impl Forcing {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, problem: &KirchhoffProblem) -> Result<Self> {
        for c in alpha.iter().chain(&beta) {
            if !c.is_finite() {
                return Err(LabError::InvalidParameter("non-finite forcing coefficient".into()));
            }
        }
        let nodes = problem.nodes();
        let alpha_nodes = nodes.iter().map(|&t| trig_eval(&alpha, t)).collect();
        let beta_nodes = nodes.iter().map(|&t| trig_eval(&beta, t)).collect();
        Ok(Forcing { alpha, beta, alpha_nodes, beta_nodes })
    }

    pub fn constant(alpha: f64, beta: f64, problem: &KirchhoffProblem) -> Self {
        Forcing::new(vec![alpha], vec![beta], problem).expect("finite constants")
    }

    /// The same coefficients sampled on another grid.
    pub fn resample(&self, problem: &KirchhoffProblem) -> Self {
        Forcing::new(self.alpha.clone(), self.beta.clone(), problem).expect("coefficients were validated")
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        trig_eval(&self.alpha, t)
    }

    pub fn beta_at(&self, t: f64) -> f64 {
        trig_eval(&self.beta, t)
    }

    pub fn alpha_nodes(&self) -> &[f64] {
        &self.alpha_nodes
    }

    pub fn beta_nodes(&self) -> &[f64] {
        &self.beta_nodes
    }

    fn check_grid(&self, n: usize) -> Result<()> {
        if self.alpha_nodes.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, got: self.alpha_nodes.len() });
        }
        Ok(())
    }

    /// `∫|alpha| + ∫|beta|` by composite Simpson on 2000 panels.
    pub fn l1_norm(&self) -> f64 {
        let m = 2000;
        let mut s = 0.0;
        for k in 0..=m {
            let t = k as f64 / m as f64;
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * (self.alpha_at(t).abs() + self.beta_at(t).abs());
        }
        s / (3.0 * m as f64)
    }

    /// `max |alpha| + max |beta|` over the nodes.
    pub fn sup_norm(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        m(&self.alpha_nodes) + m(&self.beta_nodes)
    }
}

/// Interior nodal values; the boundary zeros are implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub q: f64,
}

impl DiscreteState {
    pub fn new(u: Vec<f64>) -> Self {
        let q = dirichlet_energy(&u);
        DiscreteState { u, q }
    }

    pub fn zero(n: usize) -> Self {
        DiscreteState { u: vec![0.0; n], q: 0.0 }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(problem: &KirchhoffProblem, f: F) -> Self {
        DiscreteState::new(problem.nodes().into_iter().map(f).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// `sqrt(h Σ (u_i − v_i)^2)`.
    pub fn l2_dist(&self, other: &DiscreteState) -> f64 {
        let h = 1.0 / (self.u.len() as f64 + 1.0);
        (h * self.u.iter().zip(&other.u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sqrt()
    }

    pub fn negated(&self) -> Self {
        DiscreteState { u: self.u.iter().map(|v| -v).collect(), q: self.q }
    }

    /// CSV with header `t,u`, boundary nodes included.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "u"])?;
        let n = self.u.len();
        let h = 1.0 / (n as f64 + 1.0);
        w.write_record(["0", "0"])?;
        for (i, v) in self.u.iter().enumerate() {
            w.write_record([((i + 1) as f64 * h).to_string(), v.to_string()])?;
        }
        w.write_record(["1", "0"])?;
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`DiscreteState::write_csv`]; the two boundary
    /// rows must be zero.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut u = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let v: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| LabError::InvalidParameter(format!("row {row}: bad `u` field")))?;
            u.push(v);
        }
        if u.len() < 4 || u[0] != 0.0 || u[u.len() - 1] != 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "{}: need >= 2 interior rows between zero boundary rows",
                path.display()
            )));
        }
        u.pop();
        u.remove(0);
        Ok(DiscreteState::new(u))
    }
}

/// `Σ_{i=0}^{n} (u_{i+1} − u_i)^2 / h` with `u_0 = u_{n+1} = 0`.
pub fn dirichlet_energy(u: &[f64]) -> f64 {
    let h = 1.0 / (u.len() as f64 + 1.0);
    let mut s = 0.0;
    let mut prev = 0.0;
    for &v in u.iter().chain(std::iter::once(&0.0)) {
        s += (v - prev) * (v - prev);
        prev = v;
    }
    s / h
}

/// `(K u)_i = (2 u_i − u_{i−1} − u_{i+1}) / h`.
pub fn stiffness_apply(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let h = 1.0 / (n as f64 + 1.0);
    (0..n)
        .map(|i| {
            let l = if i > 0 { u[i - 1] } else { 0.0 };
            let r = if i + 1 < n { u[i + 1] } else { 0.0 };
            (2.0 * u[i] - l - r) / h
        })
        .collect()
}

fn check_state(problem: &KirchhoffProblem, state: &DiscreteState) -> Result<()> {
    if state.u.len() != problem.n {
        return Err(LabError::DimensionMismatch { expected: problem.n, got: state.u.len() });
    }
    if !(state.q < problem.q_limit()) {
        return Err(LabError::EnergyConstraint { q: state.q, limit: problem.q_limit() });
    }
    Ok(())
}

/// `½ ω̃(q) − Σ h (beta_i f̃(u_i) + alpha_i u_i)`.
pub fn energy(state: &DiscreteState, problem: &KirchhoffProblem, forcing: &Forcing) -> Result<f64> {
    check_state(problem, state)?;
    forcing.check_grid(problem.n)?;
    let h = problem.h();
    let mut s = 0.0;
    for (i, &u) in state.u.iter().enumerate() {
        s += forcing.beta_nodes[i] * problem.f.antideriv(u)? + forcing.alpha_nodes[i] * u;
    }
    Ok(0.5 * problem.omega_tilde(state.q)? - h * s)
}

/// `omega(q) (K u)_i − h (beta_i f(u_i) + alpha_i)`, the exact gradient of
/// [`energy`].
pub fn energy_gradient(state: &DiscreteState, problem: &KirchhoffProblem, forcing: &Forcing) -> Result<Vec<f64>> {
    check_state(problem, state)?;
    forcing.check_grid(problem.n)?;
    let h = problem.h();
    let w = problem.omega.eval(state.q, problem.rho);
    Ok(stiffness_apply(&state.u)
        .into_iter()
        .enumerate()
        .map(|(i, ku)| w * ku - h * (forcing.beta_nodes[i] * problem.f.eval(state.u[i]) + forcing.alpha_nodes[i]))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `max_i |−omega(q) (Δ_h u)_i − beta_i f(u_i) − alpha_i|`
    pub residual: f64,
    /// `rho − q`
    pub q_margin: f64,
}

/// Pointwise finite-difference residual of the boundary value problem.
pub fn residual_check(state: &DiscreteState, problem: &KirchhoffProblem, forcing: &Forcing) -> Result<Residual> {
    if state.u.len() != problem.n {
        return Err(LabError::DimensionMismatch { expected: problem.n, got: state.u.len() });
    }
    forcing.check_grid(problem.n)?;
    let h = problem.h();
    let w = problem.omega.eval(state.q, problem.rho);
    let residual = stiffness_apply(&state.u)
        .into_iter()
        .enumerate()
        .map(|(i, ku)| (w * ku / h - forcing.beta_nodes[i] * problem.f.eval(state.u[i]) - forcing.alpha_nodes[i]).abs())
        .fold(0.0, f64::max);
    Ok(Residual { residual, q_margin: problem.rho - state.q })
}

/// `max |u_i| <= ½ sqrt(q)`, exact for the piecewise-linear interpolant.
pub fn embedding_check(state: &DiscreteState) -> bool {
    let q = dirichlet_energy(&state.u);
    state.sup_norm() <= 0.5 * q.sqrt() * (1.0 + 1e-12) + 1e-300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonConstancy {
    pub nonconstant: bool,
    /// abscissae of the smallest and largest sampled values
    pub witness: Option<(f64, f64)>,
}

/// Samples `f` on `[−sqrt(rho)/2, sqrt(rho)/2]` (both ends included).
pub fn nonconstancy_check(f: &Reaction, rho: f64, n_samples: usize) -> Result<NonConstancy> {
    if n_samples < 2 || !(rho > 0.0) {
        return Err(LabError::InvalidParameter("need rho > 0 and at least 2 samples".into()));
    }
    let a = 0.5 * rho.sqrt();
    let xs: Vec<f64> = (0..n_samples).map(|k| -a + 2.0 * a * k as f64 / (n_samples - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    let (mut lo, mut hi) = (0, 0);
    for k in 1..n_samples {
        if vals[k] < vals[lo] {
            lo = k;
        }
        if vals[k] > vals[hi] {
            hi = k;
        }
    }
    let scale = 1.0 + vals[lo].abs().max(vals[hi].abs());
    let nonconstant = vals[hi] - vals[lo] > 1e-12 * scale;
    Ok(NonConstancy {
        nonconstant,
        witness: nonconstant.then(|| (xs[lo], xs[hi])),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemValidation {
    pub nonnegative: bool,
    pub nondecreasing: bool,
    /// `ω̃(rho (1 − 1e-6)) / ω̃(rho / 2)`, when `ω̃(rho / 2) > 0`
    pub divergence_ratio: Option<f64>,
    /// increment of `ω̃` over `[rho(1−1e-5), rho(1−1e-6)]` divided by the
    /// increment over `[rho(1−1e-2), rho(1−1e-3)]`
    pub late_decade_ratio: Option<f64>,
    pub diverges: bool,
    pub coercive: bool,
    pub failures: Vec<String>,
}

impl ProblemValidation {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `omega` for nonnegativity and monotonicity on a `10^4`-point grid
/// of `[0, rho (1 − 1e-6)]`, blow-up of `ω̃` at `rho`, and coercivity of
/// `xi ↦ ½ ω̃(xi^2)` toward `sqrt(rho)`.
pub fn validate_problem(problem: &KirchhoffProblem) -> Result<ProblemValidation> {
    problem.check()?;
    let rho = problem.rho;
    let top = rho * (1.0 - 1e-6);
    let m = 10_000;
    let xs: Vec<f64> = (0..m).map(|k| top * k as f64 / (m - 1) as f64).collect();
    let ws: Vec<f64> = xs.iter().map(|&x| problem.omega.eval(x, rho)).collect();
    let nonnegative = ws.iter().all(|&w| w >= 0.0);
    let nondecreasing = ws
        .windows(2)
        .all(|p| p[1] >= p[0] - 1e-12 * (1.0 + p[0].abs()));
    let tilde = |xi: f64| problem.omega.tilde_unchecked(xi, rho);
    let half = tilde(0.5 * rho)?;
    let near = tilde(top)?;
    let divergence_ratio = (half > 0.0).then(|| near / half);
    let early = tilde(rho * (1.0 - 1e-3))? - tilde(rho * (1.0 - 1e-2))?;
    let late = near - tilde(rho * (1.0 - 1e-5))?;
    let late_decade_ratio = (early > 0.0).then(|| late / early);
    // a logarithmic blow-up adds a fixed amount per decade; a convergent
    // integral adds geometrically less
    let diverges = divergence_ratio.is_some_and(|r| r > 10.0) && late_decade_ratio.is_some_and(|r| r >= 0.5);
    let xi_top = top.sqrt();
    let coercive_profile: Vec<f64> = (0..=200)
        .map(|k| tilde((xi_top * k as f64 / 200.0).powi(2)).map(|v| 0.5 * v))
        .collect::<Result<_>>()?;
    let monotone = coercive_profile.windows(2).all(|p| p[1] >= p[0] - 1e-12);
    let coercive = monotone && diverges;
    let mut failures = Vec::new();
    if !nonnegative {
        failures.push("omega takes negative values".to_string());
    }
    if !nondecreasing {
        failures.push("omega is not nondecreasing".to_string());
    }
    if !diverges {
        failures.push(format!(
            "integral of omega does not blow up at rho (ratio {divergence_ratio:?}, late decade {late_decade_ratio:?})"
        ));
    }
    if !coercive {
        failures.push("½ ω̃(xi^2) is not coercive toward sqrt(rho)".to_string());
    }
    Ok(ProblemValidation {
        nonnegative,
        nondecreasing,
        divergence_ratio,
        late_decade_ratio,
        diverges,
        coercive,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn eigen_problem(n: usize) -> (KirchhoffProblem, Forcing) {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, n).unwrap();
        let f = Forcing::constant(0.0, 2.0 * PI * PI, &p);
        (p, f)
    }

    #[test]
    fn antiderivative_examples() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 10).unwrap();
        assert!((p.omega_tilde(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        let quad = antiderivative(|x| 1.0 / (1.0 - x), 0.5).unwrap();
        assert!((quad - 2f64.ln()).abs() < 1e-12);
        assert_eq!(p.omega_tilde(0.0).unwrap(), 0.0);
        assert_eq!(Reaction::Linear.antideriv(3.0).unwrap(), 4.5);
        assert!(matches!(p.omega_tilde(0.9995), Err(LabError::OutOfDomain { .. })));
        let e = Reaction::parse("u^3 - u").unwrap();
        assert!((e.antideriv(2.0).unwrap() - 2.0).abs() < 1e-12);
        let s = Reaction::Sine(3.0);
        let quad = antiderivative(|x| (3.0 * x).sin(), 0.7).unwrap();
        assert!((s.antideriv(0.7).unwrap() - quad).abs() < 1e-12);
    }

    #[test]
    fn builtin_round_trip_through_strings() {
        for s in ["linear", "const:2.5", "sin:10", "u - 0.3*u^3"] {
            assert_eq!(Reaction::parse(s).unwrap().to_string(), s);
        }
        for s in ["inv-gap", "inv-gap-sq", "one", "neg-x", "1/(1-x)^2"] {
            assert_eq!(Omega::parse(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn energy_examples() {
        let (p, f) = eigen_problem(200);
        assert_eq!(energy(&DiscreteState::zero(200), &p, &f).unwrap(), 0.0);
        let u = DiscreteState::from_fn(&p, |t| (PI * t).sin() / PI);
        let e = energy(&u, &p, &f).unwrap();
        let continuum = 0.5 * 2f64.ln() - 0.5;
        assert!((e - continuum).abs() < 10.0 * p.h() * p.h(), "{e} vs {continuum}");

        let p1 = KirchhoffProblem::new(Reaction::Constant(0.0), Omega::InvGap, 1.0, 50).unwrap();
        let st = DiscreteState::from_fn(&p1, |t| t * (1.0 - t));
        let e0 = energy(&st, &p1, &Forcing::constant(0.0, 0.0, &p1)).unwrap();
        let e1 = energy(&st, &p1, &Forcing::constant(1.0, 0.0, &p1)).unwrap();
        let e2 = energy(&st, &p1, &Forcing::constant(2.0, 0.0, &p1)).unwrap();
        assert!(((e2 - e0) - 2.0 * (e1 - e0)).abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        let (p, f) = eigen_problem(200);
        let g = energy_gradient(&DiscreteState::zero(200), &p, &f).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let u = DiscreteState::from_fn(&p, |t| (PI * t).sin() / PI);
        let g = energy_gradient(&u, &p, &f).unwrap();
        let sup = g.iter().fold(0.0_f64, |a, b| a.max(b.abs())) / p.h();
        assert!(sup < 5e-3, "{sup}");
    }

    #[test]
    fn residual_examples() {
        let (p, f) = eigen_problem(200);
        let u = DiscreteState::from_fn(&p, |t| (PI * t).sin() / PI);
        let r = residual_check(&u, &p, &f).unwrap();
        assert!(r.residual < 5e-3, "{}", r.residual);
        assert!(residual_check(&DiscreteState::zero(200), &p, &f).unwrap().residual == 0.0);
    }

    #[test]
    fn embedding_examples() {
        let (p, _) = eigen_problem(200);
        let u = DiscreteState::from_fn(&p, |t| (PI * t).sin() / PI);
        assert!(embedding_check(&u));
        assert!((u.sup_norm() - 1.0 / PI).abs() < 1e-4);
        assert!(embedding_check(&DiscreteState::zero(5)));
        // tent: max = 1/2 at the middle node, q = 1, equality
        let tent = DiscreteState::new(vec![0.25, 0.5, 0.25]);
        assert!((tent.q - 1.0).abs() < 1e-15);
        assert!(embedding_check(&tent));
    }

    #[test]
    fn nonconstancy_examples() {
        let r = nonconstancy_check(&Reaction::Linear, 1.0, 101).unwrap();
        assert!(r.nonconstant);
        assert_eq!(r.witness, Some((-0.5, 0.5)));
        assert!(!nonconstancy_check(&Reaction::Constant(3.0), 1.0, 101).unwrap().nonconstant);
        let r = nonconstancy_check(&Reaction::Sine(10.0), 0.01, 3).unwrap();
        assert!(r.nonconstant);
        assert!((10.0f64 * 0.05).sin() > 0.0);
    }

    #[test]
    fn validation_examples() {
        let ok = validate_problem(&KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 10).unwrap()).unwrap();
        assert!(ok.passed(), "{:?}", ok.failures);
        assert!((ok.divergence_ratio.unwrap() - (1e6f64).ln() / 2f64.ln()).abs() < 1e-6);
        let flat = validate_problem(&KirchhoffProblem::new(Reaction::Linear, Omega::One, 1.0, 10).unwrap()).unwrap();
        assert!(!flat.diverges && !flat.passed());
        let neg = validate_problem(&KirchhoffProblem::new(Reaction::Linear, Omega::NegX, 1.0, 10).unwrap()).unwrap();
        assert!(!neg.nonnegative);
        // integrable singularity: ω̃ stays bounded
        let sqrt = Omega::parse("1/sqrt(1-x)").unwrap();
        let v = validate_problem(&KirchhoffProblem::new(Reaction::Linear, sqrt, 1.0, 10).unwrap()).unwrap();
        assert!(!v.diverges);
        let sq = validate_problem(&KirchhoffProblem::new(Reaction::Linear, Omega::InvGapSq, 2.0, 10).unwrap()).unwrap();
        assert!(sq.passed());
    }

    #[test]
    fn trig_family_nodes() {
        let p = KirchhoffProblem::new(Reaction::Linear, Omega::InvGap, 1.0, 9).unwrap();
        let f = Forcing::new(vec![1.0, 0.5, -2.0], vec![0.0, 0.0, 1.0], &p).unwrap();
        for (i, t) in p.nodes().into_iter().enumerate() {
            let a = 1.0 + 0.5 * (2.0 * PI * t).cos() - 2.0 * (2.0 * PI * t).sin();
            assert!((f.alpha_nodes()[i] - a).abs() < 1e-14);
            assert!((f.beta_nodes()[i] - (2.0 * PI * t).sin()).abs() < 1e-14);
        }
        let c = Forcing::constant(1.0, -2.0, &p);
        assert!((c.l1_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn state_csv_has_boundary_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        DiscreteState::new(vec![0.1, 0.2, 0.1]).write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u");
        assert_eq!(lines[1], "0,0");
        assert_eq!(lines.len(), 6);
        assert_eq!(*lines.last().unwrap(), "1,0");
    }
}
