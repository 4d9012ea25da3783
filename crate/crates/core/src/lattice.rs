//! Lattice search for parameters at which a finite family of objectives
//! has several spatially separated global minima.
//!
//! Both users of this module evaluate objectives of the form
//! `F_i(y) = a_i + <b_i, y> + c(y)` with `c` common to every sample, so the
//! difference of two samples is affine in `y`. On a segment between two
//! lattice points whose minimizers differ, the crossing of the two
//! candidate minimizers is therefore located exactly by one linear
//! interpolation; bisection only handles a third sample taking over.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hilbert::{argmin_clusters, default_eps_v, ArgminCluster, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeOptions {
    /// Points per half-axis at the first level; spacing is `radius / (divisions + 1)`.
    pub divisions: usize,
    /// Number of times the lattice may be halved when no witness is found.
    pub max_refinements: usize,
    /// Switching edges refined by bisection per level.
    pub max_edges: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions {
            divisions: 8,
            max_refinements: 3,
            max_edges: 64,
        }
    }
}

impl LatticeOptions {
    pub fn scaled(&self, factor: f64) -> Self {
        LatticeOptions {
            divisions: ((self.divisions as f64 * factor).round() as usize).max(1),
            ..self.clone()
        }
    }
}

/// Points `center + spacing · k`, `k ∈ Z^n`, `|k| <= divisions`, where
/// `spacing = radius / (divisions + 1)`; every point satisfies
/// `|y − center| <= radius − spacing`. Lexicographic order in `k`.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub center: Point,
    pub spacing: f64,
    pub divisions: usize,
    pub points: Vec<Point>,
    offsets: Vec<Vec<i64>>,
}

impl Lattice {
    pub fn new(center: &Point, radius: f64, divisions: usize) -> Result<Lattice> {
        if !(radius > 0.0) {
            return Err(LabError::InvalidParameter(format!("lattice radius must be > 0, got {radius}")));
        }
        let dim = center.dim();
        let m = divisions as i64;
        let spacing = radius / (divisions as f64 + 1.0);
        let side = (2 * m + 1) as usize;
        let total = side
            .checked_pow(dim as u32)
            .filter(|&t| t <= 5_000_000)
            .ok_or_else(|| LabError::InvalidParameter("lattice too large".into()))?;
        let mut points = Vec::new();
        let mut offsets = Vec::new();
        for flat in 0..total {
            let mut k = vec![0i64; dim];
            let mut rest = flat;
            for d in (0..dim).rev() {
                k[d] = (rest % side) as i64 - m;
                rest /= side;
            }
            let k2: i64 = k.iter().map(|v| v * v).sum();
            if k2 <= m * m {
                points.push(Point(
                    center
                        .0
                        .iter()
                        .zip(&k)
                        .map(|(c, &ki)| c + spacing * ki as f64)
                        .collect(),
                ));
                offsets.push(k);
            }
        }
        Ok(Lattice {
            center: center.clone(),
            spacing,
            divisions,
            points,
            offsets,
        })
    }

    /// Pairs of lattice indices that differ by one step along one axis.
    fn edges(&self) -> Vec<(usize, usize)> {
        let index: std::collections::BTreeMap<&[i64], usize> = self
            .offsets
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_slice(), i))
            .collect();
        let mut out = Vec::new();
        for (i, k) in self.offsets.iter().enumerate() {
            for d in 0..k.len() {
                let mut nb = k.clone();
                nb[d] += 1;
                if let Some(&j) = index.get(nb.as_slice()) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// A finite family of objectives indexed by sample, parametrized by `y`.
pub trait SampleObjective: Sync {
    /// Geometry used to decide whether two minimizers are distinct.
    fn points(&self) -> &[Point];
    /// Objective value of every sample at parameter `y`.
    fn values(&self, y: &Point) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityTolerances {
    /// Value closeness; `None` uses `1e-8 (1 + |min F|)`.
    pub eps_v: Option<f64>,
    /// Spatial separation of distinct minimizers.
    pub eps_s: f64,
}

impl MultiplicityTolerances {
    pub fn eps_v_for(&self, min_value: f64) -> f64 {
        self.eps_v.unwrap_or_else(|| default_eps_v(min_value))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub y: Point,
    pub min_value: f64,
    pub argmin: usize,
    pub clusters: Vec<ArgminCluster>,
}

pub fn evaluate<O: SampleObjective + ?Sized>(
    obj: &O,
    y: &Point,
    tol: &MultiplicityTolerances,
) -> Result<Evaluation> {
    let values = obj.values(y);
    let (argmin, min_value) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(LabError::EmptySet)?;
    let clusters = argmin_clusters(obj.points(), &values, tol.eps_v_for(min_value), tol.eps_s)?;
    Ok(Evaluation {
        y: y.clone(),
        min_value,
        argmin,
        clusters,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Option<Evaluation>,
    pub spacing: f64,
    pub levels: usize,
    pub evaluated: usize,
}

/// Searches the lattice in the ball `|y − center| < radius` for the point
/// with the most minimizer clusters, refining switching edges by exact
/// crossing + bisection. Ties go to the point nearest `center`, then to the
/// earliest candidate.
pub fn search<O: SampleObjective + ?Sized>(
    obj: &O,
    center: &Point,
    radius: f64,
    opts: &LatticeOptions,
    tol: &MultiplicityTolerances,
) -> Result<SearchOutcome> {
    let mut divisions = opts.divisions.max(1);
    let mut evaluated = 0;
    let mut spacing = 0.0;
    for level in 0..=opts.max_refinements {
        let lattice = Lattice::new(center, radius, divisions)?;
        spacing = lattice.spacing;
        let evals: Vec<Evaluation> = lattice
            .points
            .par_iter()
            .map(|y| evaluate(obj, y, tol))
            .collect::<Result<_>>()?;
        evaluated += evals.len();

        if let Some(best) = pick_best(evals.iter().filter(|e| e.clusters.len() >= 2), center) {
            return Ok(SearchOutcome {
                best: Some(best.clone()),
                spacing,
                levels: level + 1,
                evaluated,
            });
        }

        let pts = obj.points();
        let mut switching: Vec<(usize, usize)> = lattice
            .edges()
            .into_iter()
            .filter(|&(i, j)| pts[evals[i].argmin].dist(&pts[evals[j].argmin]) > tol.eps_s)
            .collect();
        switching.sort_by(|&(a, b), &(c, d)| {
            let m1 = lattice.points[a].midpoint(&lattice.points[b]).dist(center);
            let m2 = lattice.points[c].midpoint(&lattice.points[d]).dist(center);
            m1.total_cmp(&m2).then((a, b).cmp(&(c, d)))
        });
        switching.truncate(opts.max_edges);
        let refined: Vec<Option<Evaluation>> = switching
            .par_iter()
            .map(|&(i, j)| refine_switch(obj, &evals[i], &evals[j], tol))
            .collect::<Result<_>>()?;
        evaluated += refined.len();
        if let Some(best) = pick_best(refined.iter().flatten(), center) {
            return Ok(SearchOutcome {
                best: Some(best.clone()),
                spacing,
                levels: level + 1,
                evaluated,
            });
        }
        divisions = 2 * divisions + 1;
    }
    Ok(SearchOutcome {
        best: None,
        spacing,
        levels: opts.max_refinements + 1,
        evaluated,
    })
}

fn pick_best<'a>(it: impl Iterator<Item = &'a Evaluation>, center: &Point) -> Option<&'a Evaluation> {
    let mut best: Option<&Evaluation> = None;
    for e in it {
        let better = match best {
            None => true,
            Some(b) => {
                e.clusters.len() > b.clusters.len()
                    || (e.clusters.len() == b.clusters.len() && e.y.dist(center) < b.y.dist(center))
            }
        };
        if better {
            best = Some(e);
        }
    }
    best
}

/// Locates a parameter on the segment `[a.y, b.y]` where the minimizer
/// switches, returning it if it has at least two clusters.
pub fn refine_switch<O: SampleObjective + ?Sized>(
    obj: &O,
    a: &Evaluation,
    b: &Evaluation,
    tol: &MultiplicityTolerances,
) -> Result<Option<Evaluation>> {
    let pts = obj.points();
    let (ya, yb) = (&a.y, &b.y);
    let (mut ta, mut tb) = (0.0_f64, 1.0_f64);
    let (mut ia, mut ib) = (a.argmin, b.argmin);
    for iter in 0..200 {
        let va = obj.values(&ya.lerp(yb, ta));
        let vb = obj.values(&ya.lerp(yb, tb));
        let ha = va[ia] - va[ib];
        let hb = vb[ia] - vb[ib];
        // alternate exact crossing with plain bisection to guarantee shrinkage
        let t = if iter % 2 == 0 && ha < hb {
            (ta + (tb - ta) * ha / (ha - hb)).clamp(ta, tb)
        } else {
            0.5 * (ta + tb)
        };
        let e = evaluate(obj, &ya.lerp(yb, t), tol)?;
        if e.clusters.len() >= 2 {
            return Ok(Some(e));
        }
        if pts[e.argmin].dist(&pts[ia]) <= tol.eps_s {
            ta = t;
            ia = e.argmin;
        } else {
            tb = t;
            ib = e.argmin;
        }
        if tb - ta <= 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shifted {
        pts: Vec<Point>,
        phi: Vec<f64>,
    }

    impl SampleObjective for Shifted {
        fn points(&self) -> &[Point] {
            &self.pts
        }
        fn values(&self, y: &Point) -> Vec<f64> {
            self.pts
                .iter()
                .zip(&self.phi)
                .map(|(p, f)| p.dist_sq(y) + f)
                .collect()
        }
    }

    #[test]
    fn lattice_stays_inside_ball() {
        let l = Lattice::new(&Point(vec![1.0, -1.0]), 2.0, 5).unwrap();
        assert!(l.points.iter().all(|p| p.dist(&l.center) <= 2.0 - l.spacing + 1e-12));
        assert!(l.points.contains(&l.center));
        // lexicographic order: first point is the lowest corner row
        assert!(l.points[0].0[0] < l.center.0[0]);
    }

    #[test]
    fn finds_exact_crossing_between_lattice_points() {
        let eps = 0.1;
        let obj = Shifted {
            pts: vec![Point(vec![-1.0]), Point(vec![1.0])],
            phi: vec![0.0, eps],
        };
        let tol = MultiplicityTolerances { eps_v: Some(1e-9), eps_s: 0.5 };
        let out = search(&obj, &Point(vec![0.0]), 0.1, &LatticeOptions::default(), &tol).unwrap();
        let best = out.best.unwrap();
        assert!((best.y.0[0] - eps / 4.0).abs() < 1e-12, "{}", best.y);
        assert_eq!(best.clusters.len(), 2);
    }

    #[test]
    fn third_sample_forces_bisection() {
        // the middle sample takes over between the outer two
        let obj = Shifted {
            pts: vec![Point(vec![-1.0]), Point(vec![0.0]), Point(vec![1.0])],
            phi: vec![0.0, 0.0, 0.0],
        };
        let tol = MultiplicityTolerances { eps_v: Some(1e-9), eps_s: 0.1 };
        let a = evaluate(&obj, &Point(vec![-0.9]), &tol).unwrap();
        let b = evaluate(&obj, &Point(vec![0.9]), &tol).unwrap();
        let e = refine_switch(&obj, &a, &b, &tol).unwrap().unwrap();
        assert!((e.y.0[0].abs() - 0.5).abs() < 1e-12, "{}", e.y);
    }
}
