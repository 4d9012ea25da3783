//! Sup-inf bounds and duality gaps for `g(x, eta) = I(x) + <eta, psi(x) − u0>`.
//!
//! The dual space is identified with `R^n` through the Euclidean pairing.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ball::{sup_min_affine, BallSupOptions};
use crate::error::{LabError, Result};
use crate::hilbert::{argmin_clusters, dot, nonconvexity_witness, oscillation, ArgminCluster, NonConvexity, Perturbation, Point};
use crate::lattice::{self, LatticeOptions, MultiplicityTolerances, SampleObjective};
use crate::Outcome;

/// `eta(v) = <eta, v>` on `R^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearPairing {
    pub dim: usize,
}

impl BilinearPairing {
    pub fn eval(&self, eta: &Point, v: &Point) -> Result<f64> {
        for p in [eta, v] {
            if p.dim() != self.dim {
                return Err(LabError::DimensionMismatch { expected: self.dim, got: p.dim() });
            }
        }
        Ok(eta.dot(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBoundReport {
    pub max_i: f64,
    /// Largest `inf_x (...) − max_i I(x_i)` over the sampled functionals;
    /// the inequality says this is never positive.
    pub tightest: f64,
    pub tightest_eta: Point,
    pub violations: usize,
    pub tolerance: f64,
}

/// Checks `inf_x (I(x) + eta(psi(x) − Σ λ_i psi(x_i))) <= max_i I(x_i)` for
/// every sampled `eta`, with the infimum taken over the whole grid.
pub fn check_convex_bound(
    i_values: &[f64],
    image: &[Point],
    xs: &[usize],
    lambdas: &[f64],
    etas: &[Point],
) -> Result<ConvexBoundReport> {
    if i_values.len() != image.len() {
        return Err(LabError::DimensionMismatch { expected: image.len(), got: i_values.len() });
    }
    if xs.is_empty() || xs.len() != lambdas.len() {
        return Err(LabError::InvalidParameter("need one weight per chosen point".into()));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) || (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidParameter(format!(
            "weights must be nonnegative and sum to 1 (sum = {})",
            lambdas.iter().sum::<f64>()
        )));
    }
    if let Some(&bad) = xs.iter().find(|&&i| i >= image.len()) {
        return Err(LabError::InvalidParameter(format!("index {bad} outside the grid")));
    }
    let dim = image[0].dim();
    let mut bary = vec![0.0; dim];
    for (&i, &l) in xs.iter().zip(lambdas) {
        for (b, c) in bary.iter_mut().zip(&image[i].0) {
            *b += l * c;
        }
    }
    let max_i = xs.iter().map(|&i| i_values[i]).fold(f64::NEG_INFINITY, f64::max);
    let max_psi = image.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut tightest = f64::NEG_INFINITY;
    let mut tightest_eta = Point::zeros(dim);
    let mut violations = 0;
    let mut tolerance = 0.0;
    for eta in etas {
        if eta.dim() != dim {
            return Err(LabError::DimensionMismatch { expected: dim, got: eta.dim() });
        }
        let shift = dot(&eta.0, &bary);
        let inf = image
            .iter()
            .zip(i_values)
            .map(|(p, iv)| iv + eta.dot(p) - shift)
            .fold(f64::INFINITY, f64::min);
        let scale = 1.0 + max_i.abs() + eta.norm() * max_psi;
        let tol = 1e-10 * scale;
        tolerance = f64::max(tolerance, tol);
        let slack = inf - max_i;
        if slack > tol {
            violations += 1;
        }
        if slack > tightest {
            tightest = slack;
            tightest_eta = eta.clone();
        }
    }
    Ok(ConvexBoundReport { max_i, tightest, tightest_eta, violations, tolerance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBoundSuite {
    pub trials: usize,
    pub violations: usize,
    /// Largest slack seen over all trials (never positive beyond roundoff).
    pub worst_slack: f64,
}

/// Random instances: dimension 1..=3, a grid of 3..=20 points with random
/// `I` and `psi` values, 1..=5 chosen points with random convex weights and
/// `etas_per_trial` functionals drawn from a ball of radius up to 10.
pub fn convex_bound_random_suite(trials: usize, etas_per_trial: usize, seed: u64) -> Result<ConvexBoundSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let dim = rng.random_range(1..=3usize);
        let m = rng.random_range(3..=20usize);
        let unif = |rng: &mut ChaCha8Rng, s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
        let image: Vec<Point> = (0..m)
            .map(|_| Point((0..dim).map(|_| unif(&mut rng, 3.0)).collect()))
            .collect();
        let i_values: Vec<f64> = (0..m).map(|_| unif(&mut rng, 5.0)).collect();
        let k = rng.random_range(1..=5usize.min(m));
        let xs: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let lambdas: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let radius = 10.0 * rng.random::<f64>();
        let etas: Vec<Point> = (0..etas_per_trial)
            .map(|_| Point((0..dim).map(|_| unif(&mut rng, radius)).collect()))
            .collect();
        let rep = check_convex_bound(&i_values, &image, &xs, &lambdas, &etas)?;
        violations += rep.violations;
        worst = worst.max(rep.tightest);
    }
    Ok(ConvexBoundSuite { trials, violations, worst_slack: worst })
}

/// `sup_{|eta| < r} <eta, v> = |v| r` (a supremum, not attained).
pub fn linear_sup_over_ball(v: &Point, r: f64) -> f64 {
    v.norm() * r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCondition {
    /// `inf_x (I(x) + |psi(x) − u0| r)`
    pub inf_sup_term: f64,
    /// estimate of `sup_{|eta|<r} inf_x (I(x) + <eta, psi(x) − u0>)`
    pub sup_inf_term: f64,
    pub argmax_eta: Point,
    pub osc_phi: f64,
    pub margin: f64,
}

/// Margin of the perturbation-budget condition on the grid. Positive means
/// the condition holds for the discretization.
pub fn budget_margin(
    i_values: &[f64],
    image: &[Point],
    phi: &Perturbation,
    u0: &Point,
    r: f64,
    opts: &BallSupOptions,
) -> Result<BudgetCondition> {
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius must be > 0, got {r}")));
    }
    if i_values.len() != image.len() || phi.len() != image.len() {
        return Err(LabError::DimensionMismatch { expected: image.len(), got: i_values.len() });
    }
    let shifted: Vec<Point> = image.iter().map(|p| p.sub(u0)).collect();
    let inf_sup_term = shifted
        .iter()
        .zip(i_values)
        .map(|(v, iv)| iv + linear_sup_over_ball(v, r))
        .fold(f64::INFINITY, f64::min);
    let est = sup_min_affine(i_values, &shifted, r, &[], opts);
    let osc_phi = oscillation(phi);
    Ok(BudgetCondition {
        inf_sup_term,
        sup_inf_term: est.value,
        argmax_eta: est.argmax,
        osc_phi,
        margin: inf_sup_term - est.value - osc_phi,
    })
}

/// Both sides of the perturbed minimax inequality for
/// `f = I + phi + <eta, psi − u0>` over the open ball `|eta| < r`:
/// `(sup_eta inf_x f, inf_x sup_eta f)`, the first by sampling, the second
/// in closed form.
pub fn perturbed_sides(
    i_values: &[f64],
    image: &[Point],
    phi: &Perturbation,
    u0: &Point,
    r: f64,
    opts: &BallSupOptions,
) -> Result<(f64, f64)> {
    let shifted: Vec<Point> = image.iter().map(|p| p.sub(u0)).collect();
    let base: Vec<f64> = i_values.iter().zip(phi.values()).map(|(a, b)| a + b).collect();
    let inf_sup = shifted
        .iter()
        .zip(&base)
        .map(|(v, b)| b + linear_sup_over_ball(v, r))
        .fold(f64::INFINITY, f64::min);
    let sup_inf = sup_min_affine(&base, &shifted, r, &[], opts).value;
    Ok((sup_inf, inf_sup))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub sup_inf: f64,
    pub inf_sup: f64,
    pub gap: f64,
    pub grids: String,
}

/// Exact discrete `sup_y inf_x f` and `inf_x sup_y f`.
pub fn minimax_gap<X, Y, F>(xs: &[X], ys: &[Y], f: F) -> Result<GapEstimate>
where
    F: Fn(&X, &Y) -> f64,
{
    if xs.is_empty() || ys.is_empty() {
        return Err(LabError::EmptySet);
    }
    let table: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| f(x, y)).collect()).collect();
    let sup_inf = (0..ys.len())
        .map(|j| table.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let inf_sup = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let scale = table.iter().flatten().fold(1.0_f64, |s, v| s.max(v.abs()));
    let gap = inf_sup - sup_inf;
    if gap < -1e-10 * scale {
        return Err(LabError::Invariant(format!("weak duality violated: gap {gap}")));
    }
    Ok(GapEstimate {
        sup_inf,
        inf_sup,
        gap,
        grids: format!("{} x {}", xs.len(), ys.len()),
    })
}

/// `count` equispaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxHypotheses {
    /// every `f(., y)` has a single minimizer cluster on the x grid
    pub unique_minima: bool,
    pub quasi_concavity_violations: usize,
    pub quasi_concavity_trials: usize,
}

impl MinimaxHypotheses {
    pub fn hold(&self) -> bool {
        self.unique_minima && self.quasi_concavity_violations == 0
    }
}

/// Samples the minimax equality hypotheses: unique minimum in `x` for each
/// grid `y` (clusters at `eps_s`), and quasi-concavity in `y` via random
/// three-point tests `f(x, t y1 + (1−t) y2) >= min(f(x,y1), f(x,y2)) − eps`.
pub fn check_minimax_hypotheses<F>(
    xs: &[Point],
    ys: &[Point],
    f: F,
    eps_s: f64,
    trials: usize,
    seed: u64,
) -> Result<MinimaxHypotheses>
where
    F: Fn(&Point, &Point) -> f64,
{
    let mut unique = true;
    for y in ys {
        let vals: Vec<f64> = xs.iter().map(|x| f(x, y)).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let cl = argmin_clusters(xs, &vals, 1e-12 * (1.0 + min.abs()), eps_s)?;
        if cl.len() != 1 {
            unique = false;
            break;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let x = &xs[rng.random_range(0..xs.len())];
        let y1 = &ys[rng.random_range(0..ys.len())];
        let y2 = &ys[rng.random_range(0..ys.len())];
        let t: f64 = rng.random();
        let (a, b) = (f(x, y1), f(x, y2));
        let mid = f(x, &y2.lerp(y1, t));
        let eps = 1e-10 * (1.0 + a.abs().max(b.abs()));
        if mid < a.min(b) - eps {
            bad += 1;
        }
    }
    Ok(MinimaxHypotheses {
        unique_minima: unique,
        quasi_concavity_violations: bad,
        quasi_concavity_trials: trials,
    })
}

struct LinearlyPerturbed<'a> {
    i_values: &'a [f64],
    image: &'a [Point],
}

impl SampleObjective for LinearlyPerturbed<'_> {
    fn points(&self) -> &[Point] {
        self.image
    }

    fn values(&self, eta: &Point) -> Vec<f64> {
        self.image
            .iter()
            .zip(self.i_values)
            .map(|(p, iv)| iv + eta.dot(p))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaWitness {
    pub eta: Point,
    pub clusters: Vec<ArgminCluster>,
    pub objective_min: f64,
    pub eps_v: f64,
    pub eps_s: f64,
    pub nonconvexity: NonConvexity,
}

/// Searches a lattice in `|eta| < eta_radius` for `eta` such that
/// `x ↦ I(x) + <eta, psi(x)>` has at least two separated global minima.
#[allow(clippy::too_many_arguments)]
pub fn find_eta_two_minima(
    i_values: &[f64],
    image: &[Point],
    image_chord: f64,
    eta_radius: f64,
    lattice_opts: &LatticeOptions,
    eps_v: Option<f64>,
    eps_s: f64,
    seed: u64,
) -> Result<Outcome<EtaWitness>> {
    if i_values.len() != image.len() {
        return Err(LabError::DimensionMismatch { expected: image.len(), got: i_values.len() });
    }
    let nonconvexity = nonconvexity_witness(image, image_chord, 10_000, seed)?
        .ok_or_else(|| LabError::Hypothesis("psi(X) passes the midpoint convexity test".into()))?;
    let tol = MultiplicityTolerances { eps_v, eps_s };
    let obj = LinearlyPerturbed { i_values, image };
    let center = Point::zeros(image[0].dim());
    let out = lattice::search(&obj, &center, eta_radius, lattice_opts, &tol)?;
    Ok(match out.best {
        Some(best) => Outcome::Found(EtaWitness {
            eps_v: tol.eps_v_for(best.min_value),
            eps_s,
            eta: best.y,
            clusters: best.clusters,
            objective_min: best.min_value,
            nonconvexity,
        }),
        None => Outcome::NotFound(format!(
            "no functional with two minima in |eta| < {eta_radius} ({} evaluations)",
            out.evaluated
        )),
    })
}

/// Brute-force cluster count of `I + <eta, psi>` at a given `eta`.
pub fn verify_eta(
    eta: &Point,
    i_values: &[f64],
    image: &[Point],
    eps_v: f64,
    eps_s: f64,
) -> Result<Vec<ArgminCluster>> {
    let values: Vec<f64> = image
        .iter()
        .zip(i_values)
        .map(|(p, iv)| iv + dot(&eta.0, &p.0))
        .collect();
    argmin_clusters(image, &values, eps_v, eps_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm1() -> Vec<Point> {
        vec![Point(vec![-1.0]), Point(vec![1.0])]
    }

    #[test]
    fn pairing_is_bilinear() {
        let pairing = BilinearPairing { dim: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rp = || Point((0..3).map(|_| rng.random::<f64>() - 0.5).collect());
        for _ in 0..50 {
            let (a, b, c) = (rp(), rp(), rp());
            let s = 1.7;
            let lhs = pairing.eval(&a, &b.add(&c.scale(s))).unwrap();
            let rhs = pairing.eval(&a, &b).unwrap() + s * pairing.eval(&a, &c).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
            let lhs = pairing.eval(&b.add(&c.scale(s)), &a).unwrap();
            let rhs = pairing.eval(&b, &a).unwrap() + s * pairing.eval(&c, &a).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
        assert!(pairing.eval(&Point(vec![1.0]), &Point(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn convex_bound_two_point() {
        let etas: Vec<Point> = (-5..=5).map(|k| Point(vec![k as f64 * 0.7])).collect();
        let rep = check_convex_bound(&[0.0, 0.0], &pm1(), &[0, 1], &[0.5, 0.5], &etas).unwrap();
        assert_eq!(rep.violations, 0);
        // inf_x eta x = -|eta|, tightest at eta = 0
        assert_eq!(rep.tightest, 0.0);
        assert_eq!(rep.tightest_eta, Point(vec![0.0]));
    }

    #[test]
    fn convex_bound_single_point() {
        let image = vec![Point(vec![0.3, 2.0]), Point(vec![-1.0, 0.5]), Point(vec![4.0, -1.0])];
        let etas = vec![Point(vec![1.0, -3.0]), Point(vec![-2.0, 0.1])];
        let rep = check_convex_bound(&[1.0, -2.0, 0.5], &image, &[0], &[1.0], &etas).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.tightest <= 0.0);
    }

    #[test]
    fn convex_bound_rejects_bad_weights() {
        assert!(check_convex_bound(&[0.0, 0.0], &pm1(), &[0, 1], &[0.5, 0.6], &[]).is_err());
        assert!(check_convex_bound(&[0.0, 0.0], &pm1(), &[0, 1], &[1.5, -0.5], &[]).is_err());
    }

    #[test]
    fn convex_bound_random_has_no_violations() {
        let suite = convex_bound_random_suite(200, 50, 11).unwrap();
        assert_eq!(suite.violations, 0);
        assert!(suite.worst_slack <= 1e-9);
    }

    #[test]
    fn linear_sup_examples() {
        assert_eq!(linear_sup_over_ball(&Point(vec![0.0, 0.0]), 3.0), 0.0);
        assert_eq!(linear_sup_over_ball(&Point(vec![3.0, 4.0]), 2.0), 10.0);
        let v = Point(vec![3.0, 4.0]);
        let pts = crate::ball::ball_points(2, 2.0, 10_000);
        let sampled = pts.iter().map(|e| e.dot(&v)).fold(f64::NEG_INFINITY, f64::max);
        assert!(sampled <= 10.0 && sampled > 9.9, "{sampled}");
    }

    #[test]
    fn budget_two_point() {
        let c = budget_margin(&[0.0, 0.0], &pm1(), &Perturbation::zero(2), &Point(vec![0.0]), 1.0, &BallSupOptions::default()).unwrap();
        assert_eq!(c.inf_sup_term, 1.0);
        assert_eq!(c.sup_inf_term, 0.0);
        assert_eq!(c.margin, 1.0);
        let phi = Perturbation::from_values(vec![0.0, 0.4]).unwrap();
        let c2 = budget_margin(&[0.0, 0.0], &pm1(), &phi, &Point(vec![0.0]), 1.0, &BallSupOptions::default()).unwrap();
        assert!((c.margin - c2.margin - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gap_examples() {
        let xs = [-1.0, 1.0];
        let ys = uniform_grid(-1.0, 1.0, 201);
        let g = minimax_gap(&xs, &ys, |x, y| x * y).unwrap();
        assert_eq!((g.sup_inf, g.inf_sup, g.gap), (0.0, 1.0, 1.0));
        let g = minimax_gap(&xs, &ys, |_, _| 2.5).unwrap();
        assert_eq!(g.gap, 0.0);
        let g = minimax_gap(&uniform_grid(-2.0, 2.0, 401), &uniform_grid(0.0, 1.0, 101), |x, y| x * x + x * y).unwrap();
        assert!(g.gap.abs() < 1e-12 && g.sup_inf.abs() < 1e-12);
    }

    #[test]
    fn quadratic_instance_satisfies_hypotheses() {
        let xs: Vec<Point> = uniform_grid(-2.0, 2.0, 401).into_iter().map(|x| Point(vec![x])).collect();
        let ys: Vec<Point> = uniform_grid(0.0, 1.0, 101).into_iter().map(|y| Point(vec![y])).collect();
        let h = check_minimax_hypotheses(&xs, &ys, |x, y| x.0[0] * x.0[0] + x.0[0] * y.0[0], 0.015, 1000, 3).unwrap();
        assert!(h.hold(), "{h:?}");
        // bilinear on two points: minimizer not unique at eta = 0
        let xs2 = pm1();
        let h = check_minimax_hypotheses(&xs2, &ys, |x, y| x.0[0] * y.0[0], 0.5, 100, 3).unwrap();
        assert!(!h.unique_minima);
    }

    #[test]
    fn eta_witness_examples() {
        let lat = LatticeOptions::default();
        let w = find_eta_two_minima(&[0.0, 0.0], &pm1(), 0.0, 2.0, &lat, None, 0.5, 0).unwrap().found().unwrap();
        assert_eq!(w.eta, Point(vec![0.0]));
        assert_eq!(w.clusters.len(), 2);
        let w = find_eta_two_minima(&[1.0, 1.0], &pm1(), 0.0, 2.0, &lat, None, 0.5, 0).unwrap().found().unwrap();
        assert_eq!(w.eta, Point(vec![0.0]));
        let w = find_eta_two_minima(&[-1.0, 1.0], &pm1(), 0.0, 2.0, &lat, None, 0.5, 0).unwrap().found().unwrap();
        assert!((w.eta.0[0] + 1.0).abs() < 1e-12, "{}", w.eta);
        assert_eq!(verify_eta(&w.eta, &[-1.0, 1.0], &pm1(), w.eps_v, 0.5).unwrap().len(), 2);
    }
}
