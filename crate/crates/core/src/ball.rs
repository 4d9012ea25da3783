//! Deterministic supremum estimation over an open ball.
//!
//! Candidates come from a Halton sequence on the cube `[-r, r]^n`, kept if
//! inside the open ball, plus `y = 0` and any caller seeds. The best few are
//! polished by compass search (coordinate steps, halving on failure). The
//! result is a lower estimate of the true supremum.
//!
//! Objectives that are a minimum of finitely many affine functions also get
//! an interior-point pass, see [`sup_min_affine`].

use serde::{Deserialize, Serialize};

use crate::hilbert::Point;
use crate::linalg::solve_dense;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in base `base` (van der Corput).
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while index > 0 {
        x += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    x
}

/// The `index`-th Halton point in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} unsupported");
    (0..dim).map(|k| radical_inverse(index, PRIMES[k])).collect()
}

/// `count` Halton points inside the open ball of radius `r` centred at 0.
pub fn ball_points(dim: usize, r: f64, count: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    // the cube-to-ball acceptance rate is >= 0.3 for dim <= 4
    let cap = 64 * count as u64 + 1024;
    while out.len() < count && index < cap {
        let p: Vec<f64> = halton(index, dim)
            .into_iter()
            .map(|u| r * (2.0 * u - 1.0))
            .collect();
        index += 1;
        let p = Point(p);
        if p.norm() < r {
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSupOptions {
    /// Halton candidates per unit of radius, per dimension.
    pub points_per_unit: usize,
    pub min_points: usize,
    pub polish_best: usize,
    pub max_sweeps: usize,
    pub min_step: f64,
}

impl Default for BallSupOptions {
    fn default() -> Self {
        BallSupOptions {
            points_per_unit: 64,
            min_points: 64,
            polish_best: 5,
            max_sweeps: 100,
            min_step: 1e-10,
        }
    }
}

impl BallSupOptions {
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: usize| ((v as f64 * factor).ceil() as usize).max(1);
        BallSupOptions {
            points_per_unit: s(self.points_per_unit),
            min_points: s(self.min_points),
            ..self.clone()
        }
    }

    fn candidate_count(&self, dim: usize, r: f64) -> usize {
        ((self.points_per_unit * dim) as f64 * r)
            .ceil()
            .max((self.min_points * dim) as f64) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallSup {
    pub value: f64,
    pub argmax: Point,
}

/// Lower estimate of `sup_{|y| < r} f(y)`.
pub fn ball_sup<F>(dim: usize, r: f64, seeds: &[Point], opts: &BallSupOptions, f: F) -> BallSup
where
    F: Fn(&Point) -> f64,
{
    let mut cands: Vec<(f64, Point)> = Vec::new();
    let mut push = |p: Point| {
        let v = f(&p);
        cands.push((v, p));
    };
    push(Point::zeros(dim));
    for s in seeds {
        if s.dim() == dim && s.norm() < r {
            push(s.clone());
        }
    }
    for p in ball_points(dim, r, opts.candidate_count(dim, r)) {
        push(p);
    }
    // stable sort keeps generation order among equal values
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut best = cands[0].clone();
    for (v0, p0) in cands.iter().take(opts.polish_best) {
        let (v, p) = compass_search(r, p0.clone(), *v0, opts, &f);
        if v > best.0 {
            best = (v, p);
        }
    }
    BallSup {
        value: best.0,
        argmax: best.1,
    }
}

fn compass_search<F>(r: f64, mut p: Point, mut v: f64, opts: &BallSupOptions, f: &F) -> (f64, Point)
where
    F: Fn(&Point) -> f64,
{
    let dim = p.dim();
    let mut step = r / 4.0;
    for _ in 0..opts.max_sweeps {
        if step < opts.min_step {
            break;
        }
        let mut improved = false;
        for k in 0..dim {
            for sign in [1.0, -1.0] {
                let mut q = p.clone();
                q.0[k] += sign * step;
                let nq = q.norm();
                if nq >= r {
                    q = q.scale(r * (1.0 - 1e-12) / nq);
                }
                let vq = f(&q);
                if vq > v {
                    v = vq;
                    p = q;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, p)
}

/// `min_i (a_i + <b_i, y>)`.
pub fn min_affine(offsets: &[f64], slopes: &[Point], y: &Point) -> f64 {
    offsets
        .iter()
        .zip(slopes)
        .map(|(a, b)| a + b.dot(y))
        .fold(f64::INFINITY, f64::min)
}

/// Lower estimate of `sup_{|y| < r} min_i (a_i + <b_i, y>)`.
///
/// The objective is concave and piecewise linear. Its maximizer often sits
/// on a ridge where two pieces with nearly opposite slopes meet, and
/// coordinate steps stall there well short of the supremum. After the
/// sampling pass, a log-barrier solve of
/// `max t  s.t.  t <= a_i + <b_i, y>,  |y|^2 < r^2`
/// closes that gap; the better of the two points is returned, so the result
/// is never below the sampled estimate and is always attained inside the
/// open ball.
pub fn sup_min_affine(offsets: &[f64], slopes: &[Point], r: f64, seeds: &[Point], opts: &BallSupOptions) -> BallSup {
    assert_eq!(offsets.len(), slopes.len());
    assert!(!offsets.is_empty(), "sup_min_affine: no pieces");
    let dim = slopes[0].dim();
    let sampled = ball_sup(dim, r, seeds, opts, |y| min_affine(offsets, slopes, y));
    match barrier_sup(offsets, slopes, r) {
        Some(y) => {
            let v = min_affine(offsets, slopes, &y);
            if v > sampled.value {
                BallSup { value: v, argmax: y }
            } else {
                sampled
            }
        }
        None => sampled,
    }
}

/// Interior-point maximizer of `min_i (a_i + <b_i, y>)` over `|y| < r`.
/// The returned point is strictly inside the ball; its value is within
/// about `1e-12` relative of the supremum.
fn barrier_sup(offsets: &[f64], slopes: &[Point], r: f64) -> Option<Point> {
    let dim = slopes[0].dim();
    let m = offsets.len() as f64;
    let n = dim + 1;
    let a_min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b_max = slopes.iter().map(Point::norm).fold(0.0, f64::max);
    let scale = 1.0 + (a_max - a_min) + r * b_max;
    if !scale.is_finite() {
        return None;
    }

    // z = (y, t); every iterate keeps all slacks and r^2 − |y|^2 positive
    let mut y = Point::zeros(dim);
    let mut t = a_min - scale;
    let slacks = |y: &Point, t: f64| -> Option<Vec<f64>> {
        let s: Vec<f64> = offsets.iter().zip(slopes).map(|(a, b)| a + b.dot(y) - t).collect();
        s.iter().all(|v| *v > 0.0).then_some(s)
    };
    let barrier = |tau: f64, y: &Point, t: f64| -> Option<f64> {
        let q = r * r - y.norm_sq();
        if !(q > 0.0) {
            return None;
        }
        let s = slacks(y, t)?;
        Some(-tau * t - s.iter().map(|v| v.ln()).sum::<f64>() - q.ln())
    };

    let mut tau = (m + 1.0) / scale;
    while (m + 1.0) / tau > 1e-13 * scale {
        for _ in 0..60 {
            let s = slacks(&y, t)?;
            let q = r * r - y.norm_sq();
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            g[dim] = -tau;
            for (b, sv) in slopes.iter().zip(&s) {
                let w = 1.0 / sv;
                // c = (b, −1)
                for (gi, bi) in g.iter_mut().zip(&b.0) {
                    *gi -= bi * w;
                }
                g[dim] += w;
                let w2 = w * w;
                for i in 0..n {
                    let ci = if i < dim { b.0[i] } else { -1.0 };
                    for j in 0..=i {
                        let cj = if j < dim { b.0[j] } else { -1.0 };
                        h[i * n + j] += ci * cj * w2;
                    }
                }
            }
            for i in 0..dim {
                g[i] += 2.0 * y.0[i] / q;
                h[i * n + i] += 2.0 / q;
                for j in 0..=i {
                    h[i * n + j] += 4.0 * y.0[i] * y.0[j] / (q * q);
                }
            }
            for i in 0..n {
                for j in 0..i {
                    h[j * n + i] = h[i * n + j];
                }
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let step = solve_dense(&h, &neg_g).or_else(|| {
                let ridge = 1e-12 * (0..n).map(|i| h[i * n + i]).sum::<f64>();
                let mut hr = h.clone();
                for i in 0..n {
                    hr[i * n + i] += ridge;
                }
                solve_dense(&hr, &neg_g)
            })?;
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) || -slope < 1e-12 {
                break;
            }
            let f0 = barrier(tau, &y, t)?;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let yn = Point((0..dim).map(|i| y.0[i] + alpha * step[i]).collect());
                let tn = t + alpha * step[dim];
                if let Some(f1) = barrier(tau, &yn, tn) {
                    if f1 <= f0 + 0.25 * alpha * slope {
                        y = yn;
                        t = tn;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        tau *= 20.0;
    }
    (y.norm() < r).then_some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_base_two() {
        let seq: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(seq, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn ball_points_inside_and_deterministic() {
        let a = ball_points(3, 2.0, 500);
        assert_eq!(a.len(), 500);
        assert!(a.iter().all(|p| p.norm() < 2.0));
        assert_eq!(a, ball_points(3, 2.0, 500));
    }

    #[test]
    fn linear_sup_converges_to_norm_times_radius() {
        // sup over the open ball of <v, y> is |v| r
        let v = Point(vec![3.0, 4.0]);
        let s = ball_sup(2, 2.0, &[], &BallSupOptions::default(), |y| v.dot(y));
        assert!(s.value <= 10.0 && s.value > 10.0 - 1e-6, "{}", s.value);
    }

    #[test]
    fn barrier_refinement_climbs_a_sharp_ridge() {
        // two pieces with nearly opposite slopes: coordinate steps stall
        // near |y| = 0.51 at 1.99880, a 600^2 grid reaches 2.02614
        let offsets = [1.2995798937387062, 2.902006442675563];
        let slopes = [
            Point(vec![0.5731673050967228, -2.206762065860972]),
            Point(vec![-1.1733608868813832, 3.198632520287253]),
        ];
        let r = 0.7001238074848712;
        let coarse = ball_sup(2, r, &[], &BallSupOptions::default(), |y| min_affine(&offsets, &slopes, y));
        let s = sup_min_affine(&offsets, &slopes, r, &[], &BallSupOptions::default());
        assert!(coarse.value < 2.0);
        assert!(s.value > 2.02614, "{}", s.value);
        assert!(s.argmax.norm() < r);
    }

    #[test]
    fn seeds_are_honoured() {
        let target = Point(vec![0.3]);
        let opts = BallSupOptions {
            polish_best: 0,
            ..Default::default()
        };
        let s = ball_sup(1, 1.0, std::slice::from_ref(&target), &opts, |y| -(y.0[0] - 0.3).abs());
        assert_eq!(s.value, 0.0);
        assert_eq!(s.argmax, target);
    }
}
