//! Property suites for the invariants that hold for every input, not just the
//! worked examples.

use proptest::prelude::*;

use multiplab::ball::{min_affine, sup_min_affine, BallSupOptions};
use multiplab::chebyshev::{admissible_r_scan, rho_r_profile, MappedSet};
use multiplab::hilbert::{dist_to_points, Perturbation, Point, SetSpec};
use multiplab::kirchhoff::{energy, energy_gradient, DiscreteState, Forcing, KirchhoffProblem, Omega, Reaction};
use multiplab::minimax::{budget_margin, minimax_gap, uniform_grid};
use multiplab::three_solutions::{scalar_three_roots, solve_deflated, NewtonOptions};

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 2..max)
        .prop_map(|v| v.into_iter().map(Point).collect())
}

fn opts() -> BallSupOptions {
    BallSupOptions::default().scaled(0.25)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn weak_duality_on_any_table(
        rows in 1usize..12,
        cols in 1usize..12,
        values in prop::collection::vec(-1e3..1e3f64, 144),
    ) {
        let xs: Vec<usize> = (0..rows).collect();
        let ys: Vec<usize> = (0..cols).collect();
        let g = minimax_gap(&xs, &ys, |i: &usize, j: &usize| values[i * 12 + j]).unwrap();
        prop_assert!(g.sup_inf <= g.inf_sup);
        prop_assert!(g.gap >= 0.0);
    }

    /// The ball supremum of a minimum of affine functions is never below a
    /// brute-force grid maximum and exceeds it by at most the Lipschitz
    /// constant times the grid resolution.
    #[test]
    fn min_affine_sup_brackets_grid(
        offsets in prop::collection::vec(-3.0..3.0f64, 1..10),
        raw in prop::collection::vec(-3.0..3.0f64, 20),
        r in 0.05..3.0f64,
    ) {
        let slopes: Vec<Point> = (0..offsets.len()).map(|i| Point(vec![raw[2 * i], raw[2 * i + 1]])).collect();
        let est = sup_min_affine(&offsets, &slopes, r, &[], &opts());
        prop_assert!(est.argmax.norm() < r);
        prop_assert_eq!(est.value, min_affine(&offsets, &slopes, &est.argmax));
        let n = 200;
        let h = 2.0 * r / n as f64;
        let mut grid_max = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let y = Point(vec![-r + i as f64 * h, -r + j as f64 * h]);
                if y.norm() < r {
                    grid_max = grid_max.max(min_affine(&offsets, &slopes, &y));
                }
            }
        }
        let lip = slopes.iter().map(Point::norm).fold(0.0, f64::max);
        let slack = 1e-10 * (1.0 + grid_max.abs());
        prop_assert!(est.value >= grid_max - slack, "{} below grid {}", est.value, grid_max);
        prop_assert!(est.value <= grid_max + 2.0 * h * lip + slack, "{} far above grid {}", est.value, grid_max);
    }

    #[test]
    fn rho_r_stays_in_its_envelope(pts in cloud(2, 12), u in prop::collection::vec(-3.0..3.0f64, 2), r in 0.01..4.0f64) {
        let u0 = Point(u);
        let delta = dist_to_points(&u0, &pts).unwrap();
        prop_assume!(delta > 1e-3);
        let rho = rho_r_profile(&u0, &pts, &[r], &opts()).unwrap()[0];
        let slack = 1e-9 * (1.0 + delta * delta + 2.0 * delta * r);
        prop_assert!(rho >= delta * delta - slack, "rho {} below delta^2 {}", rho, delta * delta);
        prop_assert!(rho <= delta * delta + 2.0 * delta * r + slack, "rho {} above envelope", rho);
    }

    #[test]
    fn rho_profile_is_nondecreasing(pts in cloud(2, 10), u in prop::collection::vec(-3.0..3.0f64, 2)) {
        let u0 = Point(u);
        prop_assume!(dist_to_points(&u0, &pts).unwrap() > 1e-3);
        let radii = [0.1, 0.3, 1.0, 3.0];
        let rho = rho_r_profile(&u0, &pts, &radii, &opts()).unwrap();
        prop_assert!(rho.windows(2).all(|w| w[0] <= w[1]));
    }

    /// Scaling the set, the base point and the radius by `s` and the
    /// perturbation by `s^2` scales the margin by `s`.
    #[test]
    fn margin_is_homogeneous(
        pts in cloud(2, 8),
        u in prop::collection::vec(-3.0..3.0f64, 2),
        r in 0.05..2.0f64,
        s in 0.25..4.0f64,
        phi_seed in prop::collection::vec(0.0..0.2f64, 8),
    ) {
        let u0 = Point(u);
        prop_assume!(dist_to_points(&u0, &pts).unwrap() > 1e-2);
        let phi: Vec<f64> = phi_seed.iter().cycle().take(pts.len()).copied().collect();
        let base = MappedSet::identity(SetSpec::point_cloud(pts.clone(), "base").unwrap());
        let scaled = MappedSet::identity(SetSpec::point_cloud(pts.iter().map(|p| p.scale(s)).collect(), "scaled").unwrap());
        let m1 = admissible_r_scan(&u0, &base, &Perturbation::from_values(phi.clone()).unwrap(), &[r], &opts()).unwrap()[0].margin;
        let m2 = admissible_r_scan(
            &u0.scale(s),
            &scaled,
            &Perturbation::from_values(phi.iter().map(|v| s * s * v).collect()).unwrap(),
            &[s * r],
            &opts(),
        )
        .unwrap()[0]
        .margin;
        prop_assert!((m2 - s * m1).abs() <= 1e-9 * s * (1.0 + m1.abs() + r), "{} vs {}", m2, s * m1);
    }

    /// With `I = ½|x − u0|^2` the budget margin for `phi/2` is `delta` times
    /// the distance-certificate margin for `phi`.
    #[test]
    fn budget_and_distance_margins_agree(
        pts in cloud(3, 8),
        u in prop::collection::vec(-3.0..3.0f64, 3),
        r in 0.05..2.0f64,
        phi_seed in prop::collection::vec(0.0..0.2f64, 8),
    ) {
        let u0 = Point(u);
        prop_assume!(dist_to_points(&u0, &pts).unwrap() > 1e-2);
        let phi: Vec<f64> = phi_seed.iter().cycle().take(pts.len()).copied().collect();
        let set = MappedSet::identity(SetSpec::point_cloud(pts.clone(), "cloud").unwrap());
        let cert = admissible_r_scan(&u0, &set, &Perturbation::from_values(phi.clone()).unwrap(), &[r], &opts()).unwrap()[0].clone();
        let half: Vec<f64> = phi.iter().map(|v| 0.5 * v).collect();
        let iv: Vec<f64> = pts.iter().map(|p| 0.5 * p.dist_sq(&u0)).collect();
        let bc = budget_margin(&iv, set.image(), &Perturbation::from_values(half).unwrap(), &u0, r, &opts()).unwrap();
        let scale = 1.0 + cert.delta * (cert.delta + r);
        prop_assert!(
            (bc.margin - cert.delta * cert.margin).abs() <= 1e-9 * scale,
            "{} vs {}", bc.margin, cert.delta * cert.margin
        );
    }

    /// Reversing the sign of `u` reverses the gradient when `f` is odd and
    /// `alpha = 0`, so critical states come in `±` pairs.
    #[test]
    fn odd_reaction_gives_odd_gradient(
        k in 0.5..3.0f64,
        beta in prop::collection::vec(-10.0..10.0f64, 3),
        modes in prop::collection::vec(-0.2..0.2f64, 4),
    ) {
        let p = KirchhoffProblem::new(Reaction::Sine(k), Omega::InvGap, 1.0, 40).unwrap();
        let forcing = Forcing::new(vec![0.0], beta, &p).unwrap();
        let st = DiscreteState::from_fn(&p, |t| {
            modes.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * t).sin()).sum()
        });
        prop_assume!(st.q < p.q_limit());
        let g = energy_gradient(&st, &p, &forcing).unwrap();
        let gn = energy_gradient(&st.negated(), &p, &forcing).unwrap();
        for (a, b) in g.iter().zip(&gn) {
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let e = energy(&st, &p, &forcing).unwrap();
        let en = energy(&st.negated(), &p, &forcing).unwrap();
        prop_assert!((e - en).abs() <= 1e-12 * (1.0 + e.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    /// Deflated Newton and bisection find the same roots of
    /// `x + a cos x = b`, away from tangential roots.
    #[test]
    fn deflation_matches_bisection(a in -6.0..6.0f64, b in -3.0..3.0f64) {
        let g = |x: f64| x + a * x.cos() - b;
        let dg = |x: f64| 1.0 - a * x.sin();
        let lo = -b.abs() - a.abs() - 1.0;
        let hi = b.abs() + a.abs() + 1.0;
        // skip near-tangential configurations, where a double root splits
        // or vanishes under roundoff
        let near_tangent = uniform_grid(lo, hi, 20_001)
            .into_iter()
            .any(|x| dg(x).abs() < 1e-2 && g(x).abs() < 1e-2);
        prop_assume!(!near_tangent);
        let bis = scalar_three_roots(|x: f64| x.cos(), a, b, lo, hi, 4000);
        let f = |x: &Point| Point(vec![g(x.0[0])]);
        let starts: Vec<Point> = uniform_grid(lo, hi, 61).into_iter().map(|v| Point(vec![v])).collect();
        let roots = solve_deflated(&f, &starts, &NewtonOptions::default());
        prop_assert_eq!(roots.len(), bis.count, "deflation {:?} vs bisection {:?}", roots, bis.roots);
        for (x, y) in roots.iter().zip(&bis.roots) {
            prop_assert!((x.0[0] - y).abs() < 1e-9);
        }
    }
}
