//! Three solutions of `x + I'(x) + mu J'(x) = y` on `H = R^n`.
//!
//! The radius constant is
//! `(|x̂|^2 + J(x̂)^2 − inf (|x|^2 + J^2) + osc(2I − J^2)) / (2 sqrt(inf (|x|^2 + J^2)))`
//! with extrema over a coercivity truncation `|x|_inf <= R_cut`. Some
//! `(y0, mu0)` strictly inside that radius makes the equation have three
//! solutions; they are enumerated by deflated Newton.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::{ball_sup, BallSupOptions};
use crate::error::{LabError, Result};
use crate::expr::Expr;
use crate::hilbert::Point;
use crate::lattice::Lattice;
use crate::linalg::solve_dense;
use crate::Outcome;

/// Built-in scalar fields on `R^n`. One-variable formulas act on the first
/// coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude · cos(x_1)`
    Cos { amplitude: f64 },
    /// `amplitude · sin(x_1)`
    Sin { amplitude: f64 },
    /// `<coeffs, x> + offset`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `amplitude · exp(−|x|^2)`
    Gaussian { amplitude: f64 },
    /// formula in `x` applied to `x_1`
    Expression { expr: String },
}

#[derive(Clone, Debug)]
pub struct Field {
    pub spec: FieldSpec,
    expr: Option<Expr>,
}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Field> {
        let expr = match &spec {
            FieldSpec::Expression { expr } => Some(Expr::parse(expr, "x")?),
            _ => None,
        };
        Ok(Field { spec, expr })
    }

    pub fn zero() -> Field {
        Field { spec: FieldSpec::Zero, expr: None }
    }

    pub fn cos() -> Field {
        Field { spec: FieldSpec::Cos { amplitude: 1.0 }, expr: None }
    }

    pub fn sin() -> Field {
        Field { spec: FieldSpec::Sin { amplitude: 1.0 }, expr: None }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let x1 = x.0.first().copied().unwrap_or(0.0);
        match &self.spec {
            FieldSpec::Zero => 0.0,
            FieldSpec::Constant { value } => *value,
            FieldSpec::Cos { amplitude } => amplitude * x1.cos(),
            FieldSpec::Sin { amplitude } => amplitude * x1.sin(),
            FieldSpec::Linear { coeffs, offset } => {
                coeffs.iter().zip(&x.0).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            FieldSpec::Gaussian { amplitude } => amplitude * (-x.norm_sq()).exp(),
            FieldSpec::Expression { .. } => self.expr.as_ref().map_or(f64::NAN, |e| e.eval(x1)),
        }
    }

    /// Closed form for the builtins; central differences with step
    /// `1e-6 (1 + |x_i|)` for formulas.
    pub fn grad(&self, x: &Point) -> Point {
        let x1 = x.0.first().copied().unwrap_or(0.0);
        let first = |d: f64| {
            let mut g = vec![0.0; x.dim()];
            if let Some(g0) = g.first_mut() {
                *g0 = d;
            }
            Point(g)
        };
        match &self.spec {
            FieldSpec::Zero | FieldSpec::Constant { .. } => return Point::zeros(x.dim()),
            FieldSpec::Cos { amplitude } => return first(-amplitude * x1.sin()),
            FieldSpec::Sin { amplitude } => return first(amplitude * x1.cos()),
            FieldSpec::Linear { coeffs, .. } => {
                return Point((0..x.dim()).map(|d| coeffs.get(d).copied().unwrap_or(0.0)).collect())
            }
            FieldSpec::Gaussian { amplitude } => {
                let e = -2.0 * amplitude * (-x.norm_sq()).exp();
                return x.scale(e);
            }
            FieldSpec::Expression { .. } => {}
        }
        let mut g = Vec::with_capacity(x.dim());
        let mut probe = x.clone();
        for i in 0..x.dim() {
            let h = 1e-6 * (1.0 + x.0[i].abs());
            probe.0[i] = x.0[i] + h;
            let fp = self.eval(&probe);
            probe.0[i] = x.0[i] - h;
            let fm = self.eval(&probe);
            probe.0[i] = x.0[i];
            g.push((fp - fm) / (2.0 * h));
        }
        Point(g)
    }

    fn is_affine_kind(&self) -> bool {
        matches!(
            self.spec,
            FieldSpec::Zero | FieldSpec::Constant { .. } | FieldSpec::Linear { .. }
        )
    }
}

/// Uniform grid on the cube `[-half, half]^dim` with `per_axis` points per
/// axis (forced odd so the origin is included).
pub fn cube_grid(dim: usize, half: f64, per_axis: usize) -> Vec<Point> {
    let m = per_axis | 1;
    let step = if m > 1 { 2.0 * half / (m - 1) as f64 } else { 0.0 };
    let total = m.pow(dim as u32);
    (0..total)
        .map(|flat| {
            let mut rest = flat;
            let mut c = vec![0.0; dim];
            for d in (0..dim).rev() {
                let k = rest % m;
                rest /= m;
                c[d] = -half + step * k as f64;
            }
            Point(c)
        })
        .collect()
}

fn default_per_axis(dim: usize) -> usize {
    match dim {
        1 => 4001,
        2 => 301,
        _ => 61,
    }
}

/// Coordinate compass descent from `x0`, confined to `|x|_inf <= half`.
fn polish_min<F: Fn(&Point) -> f64>(f: &F, x0: &Point, step0: f64, half: f64) -> (Point, f64) {
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut step = step0;
    while step > 1e-13 * (1.0 + x.norm()) {
        let mut improved = false;
        for d in 0..x.dim() {
            for s in [step, -step] {
                let mut cand = x.clone();
                cand.0[d] = (cand.0[d] + s).clamp(-half, half);
                let fc = f(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub at: Point,
}

/// Grid minimum over `[-half, half]^dim` followed by compass polishing of
/// the best three grid points.
pub fn truncated_min<F: Fn(&Point) -> f64 + Sync>(f: &F, dim: usize, half: f64, per_axis: usize) -> Extremum {
    let grid = cube_grid(dim, half, per_axis);
    let vals: Vec<f64> = grid.par_iter().map(f).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let step = 2.0 * half / ((per_axis | 1).max(2) - 1) as f64;
    let mut best = Extremum { value: vals[order[0]], at: grid[order[0]].clone() };
    for &k in order.iter().take(3) {
        let (x, v) = polish_min(f, &grid[k], step, half);
        if v < best.value {
            best = Extremum { value: v, at: x };
        }
    }
    best
}

fn truncated_max<F: Fn(&Point) -> f64 + Sync>(f: &F, dim: usize, half: f64, per_axis: usize) -> Extremum {
    let e = truncated_min(&|x: &Point| -f(x), dim, half, per_axis);
    Extremum { value: -e.value, at: e.at }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub j_at_zero: f64,
    pub j_nonzero_at_origin: bool,
    pub antipodal_defect: f64,
    pub antipodal: bool,
    pub bounded: bool,
    pub graph_nonconvex: bool,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.j_nonzero_at_origin && self.antipodal && self.bounded && self.graph_nonconvex
    }

    fn failure(&self) -> Option<String> {
        if !self.j_nonzero_at_origin {
            Some(format!("J(0) = {} must be nonzero", self.j_at_zero))
        } else if !self.antipodal {
            Some(format!("J(-x_hat) + J(x_hat) = {} must vanish", self.antipodal_defect))
        } else if !self.bounded {
            Some("2I - J^2 is not finite on the truncation grid".into())
        } else if !self.graph_nonconvex {
            Some("J looks affine: its graph passes the midpoint test".into())
        } else {
            None
        }
    }
}

/// `true` when some sampled midpoint of two graph points lies off the graph,
/// i.e. the graph of `j` is not convex.
pub fn graph_nonconvex(j: &Field, dim: usize, half: f64, trials: usize, seed: u64) -> bool {
    if j.is_affine_kind() {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let a = Point((0..dim).map(|_| half * (2.0 * rng.random::<f64>() - 1.0)).collect());
        let b = Point((0..dim).map(|_| half * (2.0 * rng.random::<f64>() - 1.0)).collect());
        let (ja, jb) = (j.eval(&a), j.eval(&b));
        let jm = j.eval(&a.midpoint(&b));
        if (jm - 0.5 * (ja + jb)).abs() > 1e-9 * (1.0 + ja.abs().max(jb.abs())) {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Grid points per axis; `None` picks 4001, 301 or 61 for n = 1, 2, 3.
    pub per_axis: Option<usize>,
    /// Overrides `3 (|x̂| + sup |J|)`.
    pub r_cut: Option<f64>,
    /// Factor applied to `R_cut` for the sensitivity recomputation.
    pub sensitivity_factor: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { per_axis: None, r_cut: None, sensitivity_factor: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusBound {
    pub value: f64,
    /// `|x̂|^2 + J(x̂)^2`
    pub antipodal_level: f64,
    /// `inf (|x|^2 + J^2)` and where it is attained
    pub inf_norm_sq: Extremum,
    pub sup_2i_minus_j2: Extremum,
    pub inf_2i_minus_j2: Extremum,
    pub r_cut: f64,
    /// `|value(R_cut) − value(factor · R_cut)|`
    pub sensitivity: f64,
    pub hypotheses: Hypotheses,
}

struct BoundParts {
    value: f64,
    inf_norm_sq: Extremum,
    sup_g: Extremum,
    inf_g: Extremum,
}

fn bound_parts(i: &Field, j: &Field, antipodal_level: f64, dim: usize, r_cut: f64, per_axis: usize) -> BoundParts {
    let norm_sq = |x: &Point| {
        let jv = j.eval(x);
        x.norm_sq() + jv * jv
    };
    let g = |x: &Point| {
        let jv = j.eval(x);
        2.0 * i.eval(x) - jv * jv
    };
    let inf_norm_sq = truncated_min(&norm_sq, dim, r_cut, per_axis);
    let sup_g = truncated_max(&g, dim, r_cut, per_axis);
    let inf_g = truncated_min(&g, dim, r_cut, per_axis);
    let value = (antipodal_level - inf_norm_sq.value + sup_g.value - inf_g.value) / (2.0 * inf_norm_sq.value.sqrt());
    BoundParts { value, inf_norm_sq, sup_g, inf_g }
}

/// The explicit radius above which some `(y0, mu0)` yields three solutions.
/// Rejects `(I, J)` failing the hypotheses, naming the failing check.
pub fn three_solution_radius(i: &Field, j: &Field, x_hat: &Point, opts: &BoundOptions) -> Result<RadiusBound> {
    let dim = x_hat.dim();
    if dim == 0 || dim > 3 {
        return Err(LabError::InvalidParameter(format!("dimension {dim} outside 1..=3")));
    }
    let per_axis = opts.per_axis.unwrap_or_else(|| default_per_axis(dim));
    let origin = Point::zeros(dim);
    let j0 = j.eval(&origin);
    let jx = j.eval(x_hat);
    let defect = j.eval(&x_hat.scale(-1.0)) + jx;
    let r_cut = match opts.r_cut {
        Some(r) => r,
        None => {
            let pre = 3.0 * (x_hat.norm() + j0.abs().max(jx.abs()));
            let sup_j = truncated_max(&|x: &Point| j.eval(x).abs(), dim, pre.max(1.0), per_axis.min(401));
            3.0 * (x_hat.norm() + sup_j.value)
        }
    };
    if !(r_cut > 0.0) {
        return Err(LabError::InvalidParameter(format!("truncation radius {r_cut}")));
    }
    let bounded = cube_grid(dim, r_cut, per_axis.min(401)).iter().all(|x| {
        let jv = j.eval(x);
        (2.0 * i.eval(x) - jv * jv).is_finite()
    });
    let hypotheses = Hypotheses {
        j_at_zero: j0,
        j_nonzero_at_origin: j0.abs() > 1e-12,
        antipodal_defect: defect,
        antipodal: defect.abs() <= 1e-9 * (1.0 + jx.abs()),
        bounded,
        graph_nonconvex: graph_nonconvex(j, dim, r_cut, 10_000, 0),
    };
    if let Some(msg) = hypotheses.failure() {
        return Err(LabError::Hypothesis(msg));
    }
    let antipodal_level = x_hat.norm_sq() + jx * jx;
    let main = bound_parts(i, j, antipodal_level, dim, r_cut, per_axis);
    let wide = bound_parts(i, j, antipodal_level, dim, opts.sensitivity_factor * r_cut, per_axis);
    Ok(RadiusBound {
        value: main.value,
        antipodal_level,
        inf_norm_sq: main.inf_norm_sq,
        sup_2i_minus_j2: main.sup_g,
        inf_2i_minus_j2: main.inf_g,
        r_cut,
        sensitivity: (main.value - wide.value).abs(),
        hypotheses,
    })
}

/// Sampled lower estimate of
/// `sup_{|y|^2 + mu^2 < r^2} inf_x (|x|^2 + J^2 − 2<x, y> − 2 mu J(x))`
/// over the truncation cube, for comparison with `|x̂|^2 + J(x̂)^2`.
pub fn graph_rho_r(j: &Field, dim: usize, r: f64, r_cut: f64, per_axis: usize, opts: &BallSupOptions) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius must be > 0, got {r}")));
    }
    let grid = cube_grid(dim, r_cut, per_axis);
    let graph: Vec<(Point, f64)> = grid.iter().map(|x| (x.clone(), j.eval(x))).collect();
    let step = 2.0 * r_cut / ((per_axis | 1).max(2) - 1) as f64;
    let est = ball_sup(dim + 1, r, &[], opts, |ym| {
        let (y, mu) = (Point(ym.0[..dim].to_vec()), ym.0[dim]);
        let f = |x: &Point| {
            let jv = j.eval(x);
            x.norm_sq() + jv * jv - 2.0 * x.dot(&y) - 2.0 * mu * jv
        };
        let (k, _) = graph
            .iter()
            .enumerate()
            .map(|(k, (x, jv))| (k, x.norm_sq() + jv * jv - 2.0 * x.dot(&y) - 2.0 * mu * jv))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::NAN));
        polish_min(&f, &graph[k].0, step, r_cut).1
    });
    Ok(est.value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol_root: f64,
    /// Minimum separation between distinct roots.
    pub eps_s: f64,
    /// Abandon an iterate that leaves this ball.
    pub escape_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 100, tol_root: 1e-10, eps_s: 1e-4, escape_radius: 1e6 }
    }
}

/// Row-major `m x n` central-difference Jacobian.
fn fd_jacobian<F: Fn(&Point) -> Point>(g: &F, x: &Point, gx: &Point) -> Vec<f64> {
    let n = x.dim();
    let mut jac = vec![0.0; n * gx.dim()];
    let mut probe = x.clone();
    for c in 0..n {
        let h = 1e-7 * (1.0 + x.0[c].abs());
        probe.0[c] = x.0[c] + h;
        let gp = g(&probe);
        probe.0[c] = x.0[c] - h;
        let gm = g(&probe);
        probe.0[c] = x.0[c];
        for r in 0..gx.dim() {
            jac[r * n + c] = (gp.0[r] - gm.0[r]) / (2.0 * h);
        }
    }
    jac
}

/// Damped Newton with finite-difference Jacobian. `None` when the iteration
/// breaks down or fails to reach `tol` on `|g|`.
fn damped_newton<F: Fn(&Point) -> Point>(g: &F, start: &Point, opts: &NewtonOptions, tol: f64) -> Option<Point> {
    let mut x = start.clone();
    let mut gx = g(&x);
    for _ in 0..opts.max_iter {
        let norm = gx.norm();
        if !norm.is_finite() {
            return None;
        }
        if norm < tol {
            return Some(x);
        }
        let jac = fd_jacobian(g, &x, &gx);
        let rhs: Vec<f64> = gx.0.iter().map(|v| -v).collect();
        let step = Point(solve_dense(&jac, &rhs)?);
        let mut t = 1.0;
        loop {
            let cand = x.add(&step.scale(t));
            let gc = g(&cand);
            if gc.norm() < norm * (1.0 - 1e-4 * t) {
                x = cand;
                gx = gc;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
        if x.norm() > opts.escape_radius {
            return None;
        }
    }
    (gx.norm() < tol).then_some(x)
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    for (x, y) in a.0.iter().zip(&b.0) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Root enumeration by deflation: after each root `x_j` the field is
/// multiplied by `1/|x − x_j|^2 + 1`. Each accepted root is polished on the
/// undeflated field and re-checked against `tol_root`. Sorted
/// lexicographically.
pub fn solve_deflated<F: Fn(&Point) -> Point>(f: &F, starts: &[Point], opts: &NewtonOptions) -> Vec<Point> {
    let mut roots: Vec<Point> = Vec::new();
    for (k, s) in starts.iter().enumerate() {
        let deflated = |x: &Point| {
            let m: f64 = roots.iter().map(|r| 1.0 / x.dist_sq(r) + 1.0).product();
            f(x).scale(m)
        };
        let Some(x) = damped_newton(&deflated, s, opts, opts.tol_root) else {
            log::debug!("start {k} at {s}: no convergence");
            continue;
        };
        let x = damped_newton(f, &x, &NewtonOptions { max_iter: 5, ..opts.clone() }, 1e-15).unwrap_or(x);
        if f(&x).norm() >= opts.tol_root {
            continue;
        }
        if roots.iter().all(|r| r.dist(&x) > opts.eps_s) {
            roots.push(x);
        }
    }
    roots.sort_by(lex_cmp);
    roots
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRoots {
    pub count: usize,
    pub roots: Vec<f64>,
}

/// Bisection on every sign change of `x + a j'(x) − b` over `n_brackets`
/// equal subintervals of `[lo, hi]`. Grid points where the function is
/// exactly zero are roots too.
pub fn scalar_three_roots<D: Fn(f64) -> f64>(dj: D, a: f64, b: f64, lo: f64, hi: f64, n_brackets: usize) -> ScalarRoots {
    let f = |x: f64| x + a * dj(x) - b;
    let n = n_brackets.max(1);
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for k in 0..=n {
        if fs[k] == 0.0 {
            roots.push(xs[k]);
        }
        if k < n && fs[k] != 0.0 && fs[k + 1] != 0.0 && (fs[k] < 0.0) != (fs[k + 1] < 0.0) {
            let (mut l, mut r, mut fl) = (xs[k], xs[k + 1], fs[k]);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if (fm < 0.0) == (fl < 0.0) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            roots.push(0.5 * (l + r));
        }
    }
    ScalarRoots { count: roots.len(), roots }
}

/// Interval `[-R, R]` containing every root of `x + a j'(x) = b`.
pub fn scalar_root_bound(a: f64, b: f64, sup_dj: f64) -> f64 {
    b.abs() + a.abs() * sup_dj + 1.0
}

/// `F(x) = x + I'(x) + mu0 J'(x) − y0`.
pub fn three_solution_field<'a>(i: &'a Field, j: &'a Field, y0: &'a Point, mu0: f64) -> impl Fn(&Point) -> Point + 'a {
    move |x: &Point| {
        let gi = i.grad(x);
        let gj = j.grad(x);
        Point(
            (0..x.dim())
                .map(|d| x.0[d] + gi.0[d] + mu0 * gj.0[d] - y0.0[d])
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// Lattice points per half-axis over the `(y0, mu0)` ball.
    pub divisions: usize,
    pub newton: NewtonOptions,
    /// Newton starts per axis of the root box.
    pub starts_per_axis: Option<usize>,
    pub batch: usize,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            divisions: 20,
            newton: NewtonOptions::default(),
            starts_per_axis: None,
            batch: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeSolutionWitness {
    pub y0: Point,
    pub mu0: f64,
    pub roots: Vec<Point>,
    pub residuals: Vec<f64>,
    /// radius searched; `|(y0, mu0)| <= radius_bound − lattice_spacing`
    pub radius_bound: f64,
    pub radius_overridden: bool,
    pub lattice_spacing: f64,
    pub hypotheses: Option<Hypotheses>,
}

/// Where the search radius came from.
#[derive(Clone, Debug)]
pub enum SearchRadius {
    Certified { bound: RadiusBound, r: f64 },
    Override(f64),
}

fn sup_grad_norm(field: &Field, dim: usize, half: f64) -> f64 {
    cube_grid(dim, half, match dim {
        1 => 401,
        2 => 41,
        _ => 13,
    })
    .iter()
    .map(|x| field.grad(x).norm())
    .fold(0.0, f64::max)
}

/// Roots of `F` for one `(y0, mu0)` from a uniform start grid covering every
/// possible root.
pub fn roots_at(i: &Field, j: &Field, y0: &Point, mu0: f64, gi: f64, gj: f64, opts: &WitnessOptions) -> Vec<Point> {
    let dim = y0.dim();
    let half = y0.norm() + gi + mu0.abs() * gj + 1.0;
    let per_axis = opts.starts_per_axis.unwrap_or(match dim {
        1 => 41,
        2 => 11,
        _ => 5,
    });
    let starts = cube_grid(dim, half, per_axis);
    let f = three_solution_field(i, j, y0, mu0);
    solve_deflated(&f, &starts, &opts.newton)
}

/// Scans the lattice over `{(y0, mu0) : |y0|^2 + mu0^2 < r^2}` in order of
/// increasing norm (ties lexicographic) and returns the first point whose
/// equation has at least three roots.
pub fn find_three_solutions(i: &Field, j: &Field, dim: usize, radius: &SearchRadius, opts: &WitnessOptions) -> Result<Outcome<ThreeSolutionWitness>> {
    let (r, hypotheses, overridden) = match radius {
        SearchRadius::Certified { bound, r } => {
            if *r <= bound.value {
                return Err(LabError::NotAdmissible { margin: r - bound.value });
            }
            (*r, Some(bound.hypotheses.clone()), false)
        }
        SearchRadius::Override(r) => (*r, None, true),
    };
    let lattice = Lattice::new(&Point::zeros(dim + 1), r, opts.divisions)?;
    let mut cands = lattice.points.clone();
    cands.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then_with(|| lex_cmp(a, b)));
    let gi = sup_grad_norm(i, dim, 3.0 * (r + 1.0));
    let gj = sup_grad_norm(j, dim, 3.0 * (r + 1.0));
    for chunk in cands.chunks(opts.batch.max(1)) {
        let found: Vec<Vec<Point>> = chunk
            .par_iter()
            .map(|c| roots_at(i, j, &Point(c.0[..dim].to_vec()), c.0[dim], gi, gj, opts))
            .collect();
        if let Some((c, roots)) = chunk.iter().zip(found).find(|(_, roots)| roots.len() >= 3) {
            let y0 = Point(c.0[..dim].to_vec());
            let mu0 = c.0[dim];
            let residuals = {
                let f = three_solution_field(i, j, &y0, mu0);
                roots.iter().map(|x| f(x).norm()).collect()
            };
            return Ok(Outcome::Found(ThreeSolutionWitness {
                y0,
                mu0,
                roots,
                residuals,
                radius_bound: r,
                radius_overridden: overridden,
                lattice_spacing: lattice.spacing,
                hypotheses,
            }));
        }
    }
    Ok(Outcome::NotFound(format!(
        "no lattice point in the radius-{r} ball gives three roots ({} candidates)",
        cands.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) < 0.0) == (f(a) < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn radius_for_cosine() {
        let b = three_solution_radius(&Field::zero(), &Field::cos(), &Point(vec![PI / 2.0]), &BoundOptions::default()).unwrap();
        assert!((b.value - PI * PI / 8.0).abs() < 1e-6, "{}", b.value);
        assert!(b.sensitivity < 1e-6, "{}", b.sensitivity);
        assert!((b.inf_norm_sq.value - 1.0).abs() < 1e-12);
        // quartic minimum: the location is only resolved to ~eps^(1/4)
        assert!(b.inf_norm_sq.at.norm() < 1e-3);
        assert!((b.sup_2i_minus_j2.value - b.inf_2i_minus_j2.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_gates() {
        let xh = Point(vec![PI / 2.0]);
        let opts = BoundOptions::default();
        let err = three_solution_radius(&Field::zero(), &Field::sin(), &xh, &opts).unwrap_err();
        assert!(matches!(err, LabError::Hypothesis(ref m) if m.contains("J(0)")));
        let zero_j = Field::new(FieldSpec::Cos { amplitude: 0.0 }).unwrap();
        assert!(matches!(three_solution_radius(&Field::zero(), &zero_j, &xh, &opts), Err(LabError::Hypothesis(_))));
        // cos(0.3) + cos(-0.3) != 0
        assert!(matches!(
            three_solution_radius(&Field::zero(), &Field::cos(), &Point(vec![0.3]), &opts),
            Err(LabError::Hypothesis(ref m)) if m.contains("x_hat")
        ));
    }

    #[test]
    fn graph_convexity_follows_affinity() {
        assert!(graph_nonconvex(&Field::cos(), 1, 5.0, 1000, 1));
        assert!(graph_nonconvex(&Field::sin(), 1, 5.0, 1000, 1));
        let lin = Field::new(FieldSpec::Linear { coeffs: vec![2.0, -1.0], offset: 3.0 }).unwrap();
        assert!(!graph_nonconvex(&lin, 2, 5.0, 1000, 1));
        let lin_expr = Field::new(FieldSpec::Expression { expr: "3*x - 2".into() }).unwrap();
        assert!(!graph_nonconvex(&lin_expr, 1, 5.0, 1000, 1));
        let quad = Field::new(FieldSpec::Expression { expr: "x^2".into() }).unwrap();
        assert!(graph_nonconvex(&quad, 1, 5.0, 1000, 1));
    }

    #[test]
    fn graph_rho_r_below_antipodal_level() {
        let j = Field::cos();
        let level = (PI / 2.0).powi(2);
        let rho = graph_rho_r(&j, 1, 1.24, 3.0 * (PI / 2.0 + 1.0), 801, &BallSupOptions::default()).unwrap();
        assert!(rho <= level + 1e-9, "{rho} > {level}");
        assert!(rho >= 1.0 - 1e-9);
    }

    #[test]
    fn deflation_finds_three_roots_of_sine_map() {
        let f = |x: &Point| Point(vec![x.0[0] - 1.2 * x.0[0].sin()]);
        let starts: Vec<Point> = (0..21).map(|k| Point(vec![-3.0 + 0.3 * k as f64])).collect();
        let roots = solve_deflated(&f, &starts, &NewtonOptions::default());
        assert_eq!(roots.len(), 3);
        let xs = bisect(|x| x - 1.2 * x.sin(), 0.5, 2.0);
        assert!(xs > 1.0 && xs < 1.1);
        assert!((roots[0].0[0] + xs).abs() < 1e-9);
        assert!(roots[1].0[0].abs() < 1e-9);
        assert!((roots[2].0[0] - xs).abs() < 1e-9);

        let id = |x: &Point| x.clone();
        let roots = solve_deflated(&id, &starts, &NewtonOptions::default());
        assert_eq!(roots.len(), 1);
        assert!(roots[0].norm() < 1e-12);
    }

    #[test]
    fn deflation_matches_bisection_on_cosine_map() {
        let f = |x: &Point| Point(vec![x.0[0] + 5.0 * x.0[0].cos()]);
        let starts: Vec<Point> = (0..=80).map(|k| Point(vec![-10.0 + 0.25 * k as f64])).collect();
        let roots = solve_deflated(&f, &starts, &NewtonOptions::default());
        let oracle = scalar_three_roots(f64::cos, 5.0, 0.0, -10.0, 10.0, 2000);
        assert!(oracle.count >= 3);
        assert_eq!(roots.len(), oracle.count);
        for (a, b) in roots.iter().zip(&oracle.roots) {
            assert!((a.0[0] - b).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_roots_examples() {
        let r = scalar_three_roots(f64::cos, 0.0, 1.7, -5.0, 5.0, 100);
        assert_eq!(r.count, 1);
        assert!((r.roots[0] - 1.7).abs() < 1e-14);
        let r = scalar_three_roots(f64::cos, 0.5, 0.0, -10.0, 10.0, 1000);
        assert_eq!(r.count, 1);
    }

    #[test]
    fn witness_for_cosine() {
        let i = Field::zero();
        let j = Field::cos();
        let w = find_three_solutions(&i, &j, 1, &SearchRadius::Override(1.24), &WitnessOptions::default())
            .unwrap()
            .found()
            .unwrap();
        assert!(w.y0.0[0].abs() < 1e-12);
        assert!(w.mu0 > 1.0 && (w.mu0 * w.mu0 + w.y0.norm_sq()).sqrt() <= 1.24 - w.lattice_spacing + 1e-12);
        assert_eq!(w.roots.len(), 3);
        assert!(w.residuals.iter().all(|&r| r < 1e-10));
    }

    #[test]
    fn no_three_roots_without_mu() {
        let i = Field::zero();
        let j = Field::cos();
        for y in [-1.0, 0.0, 0.7] {
            assert_eq!(roots_at(&i, &j, &Point(vec![y]), 0.0, 0.0, 1.0, &WitnessOptions::default()).len(), 1);
        }
    }

    #[test]
    fn even_j_gives_mirrored_roots() {
        let i = Field::zero();
        let j = Field::cos();
        let opts = WitnessOptions::default();
        let a = roots_at(&i, &j, &Point(vec![0.1]), 1.3, 0.0, 1.0, &opts);
        let mut b: Vec<f64> = roots_at(&i, &j, &Point(vec![-0.1]), 1.3, 0.0, 1.0, &opts).iter().map(|p| -p.0[0]).collect();
        b.sort_by(f64::total_cmp);
        assert_eq!(a.len(), 3);
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0[0] - q).abs() < 1e-9);
        }
    }
}
