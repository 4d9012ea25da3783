//! Finite-dimensional inner-product substrate.
//!
//! Sets are finite sample grids. Every "inf/sup over X" in the rest of the
//! crate is an exact extremum over the samples held here, so discretization
//! error is controlled by the sampling density of the [`SetSpec`].

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A vector of the ambient space `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + t (other - self)`
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * (b - a))
                .collect(),
        )
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        self.lerp(other, 0.5)
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetKind {
    PointCloud,
    /// Samples are the curve evaluated at `params`, in order.
    ParametricCurve { params: Vec<f64> },
}

/// A non-empty finite sample of a closed set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub kind: SetKind,
    samples: Vec<Point>,
    pub provenance: String,
}

impl SetSpec {
    pub fn point_cloud(samples: Vec<Point>, provenance: impl Into<String>) -> Result<Self> {
        validate_samples(&samples)?;
        Ok(SetSpec {
            kind: SetKind::PointCloud,
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn parametric<F>(params: Vec<f64>, curve: F, provenance: impl Into<String>) -> Result<Self>
    where
        F: Fn(f64) -> Point,
    {
        let samples: Vec<Point> = params.iter().map(|&t| curve(t)).collect();
        validate_samples(&samples)?;
        Ok(SetSpec {
            kind: SetKind::ParametricCurve { params },
            samples,
            provenance: provenance.into(),
        })
    }

    /// Unit circle in `R^2` sampled at `n` equally spaced angles starting at 0.
    pub fn circle(n: usize) -> Result<Self> {
        let params = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        Self::parametric(
            params,
            |t| Point(vec![t.cos(), t.sin()]),
            format!("unit circle, {n} samples"),
        )
    }

    /// Straight segment from `a` to `b` with `n >= 2` equispaced samples.
    pub fn segment(a: &Point, b: &Point, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidParameter("segment needs >= 2 samples".into()));
        }
        let params = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        Self::parametric(params, |t| a.lerp(b, t), format!("segment {a} -> {b}, {n} samples"))
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.samples)
    }

    /// Sampling resolution: the largest gap between consecutive samples of a
    /// parametric curve. A point cloud is taken as the exact set, so 0.
    pub fn grid_chord(&self) -> f64 {
        match self.kind {
            SetKind::PointCloud => 0.0,
            SetKind::ParametricCurve { .. } => self
                .samples
                .windows(2)
                .map(|w| w[0].dist(&w[1]))
                .fold(0.0, f64::max),
        }
    }

    /// Writes `dim,c0,c1,...` CSV; parametric curves also get a sidecar
    /// `<path>.json` holding the parameter grid.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dim = self.dim();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["dim".to_string()];
        header.extend((0..dim).map(|k| format!("c{k}")));
        w.write_record(&header)?;
        for p in &self.samples {
            let mut row = vec![dim.to_string()];
            row.extend(p.0.iter().map(|c| format!("{c:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        if let SetKind::ParametricCurve { params } = &self.kind {
            let side = serde_json::json!({ "kind": "parametric", "params": params });
            fs::write(sidecar_path(path), serde_json::to_string(&side)?)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("dim") {
            return Err(LabError::InvalidParameter(format!(
                "{}: header must start with `dim`",
                path.display()
            )));
        }
        let dim = headers.len() - 1;
        let mut samples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let declared: usize = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| LabError::InvalidParameter(format!("row {row}: bad dim field")))?;
            if declared != dim || rec.len() != dim + 1 {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    got: declared,
                });
            }
            let coords = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| LabError::InvalidParameter(format!("row {row}: {e}")))?;
            samples.push(Point(coords));
        }
        validate_samples(&samples)?;
        let side = sidecar_path(path);
        let kind = if side.exists() {
            #[derive(Deserialize)]
            struct Sidecar {
                kind: String,
                params: Vec<f64>,
            }
            let sc: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
            if sc.kind != "parametric" || sc.params.len() != samples.len() {
                return Err(LabError::InvalidParameter(format!(
                    "{}: sidecar does not match samples",
                    side.display()
                )));
            }
            SetKind::ParametricCurve { params: sc.params }
        } else {
            SetKind::PointCloud
        };
        Ok(SetSpec {
            kind,
            samples,
            provenance: format!("read from {}", path.display()),
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn validate_samples(samples: &[Point]) -> Result<()> {
    let first = samples.first().ok_or(LabError::EmptySet)?;
    let dim = first.dim();
    if dim == 0 {
        return Err(LabError::InvalidParameter("points must have dimension >= 1".into()));
    }
    for (i, p) in samples.iter().enumerate() {
        if p.dim() != dim {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        if !p.is_finite() {
            return Err(LabError::NonFinite { index: i });
        }
    }
    Ok(())
}

pub fn diameter(points: &[Point]) -> f64 {
    let mut d = 0.0_f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(p.dist_sq(q));
        }
    }
    d.sqrt()
}

/// A bounded perturbation sampled on the points of a set, with its exact
/// extrema over those samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    values: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Perturbation {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::EmptySet);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { index });
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Perturbation { values, lo, hi })
    }

    pub fn zero(len: usize) -> Self {
        Perturbation {
            values: vec![0.0; len],
            lo: 0.0,
            hi: 0.0,
        }
    }

    pub fn eval(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `sup φ − inf φ` over the samples.
pub fn oscillation(phi: &Perturbation) -> f64 {
    phi.hi - phi.lo
}

/// A group of near-global minimizers that are close in the ambient norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgminCluster {
    pub members: Vec<usize>,
    pub representative: Point,
    pub value: f64,
}

pub fn dist_to_set(p: &Point, set: &SetSpec) -> Result<f64> {
    dist_to_points(p, set.samples())
}

pub fn dist_to_points(p: &Point, points: &[Point]) -> Result<f64> {
    let first = points.first().ok_or(LabError::EmptySet)?;
    if first.dim() != p.dim() {
        return Err(LabError::DimensionMismatch {
            expected: first.dim(),
            got: p.dim(),
        });
    }
    Ok(points
        .iter()
        .map(|x| p.dist_sq(x))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

/// Indices whose value lies within `eps_v` of the minimum, in sample order.
/// Ties are all kept.
pub fn eps_argmin(values: &[f64], eps_v: f64) -> Result<Vec<usize>> {
    if !(eps_v > 0.0) {
        return Err(LabError::InvalidParameter(format!("eps_v must be > 0, got {eps_v}")));
    }
    if values.is_empty() {
        return Err(LabError::EmptySet);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(LabError::NonFinite { index });
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= min + eps_v)
        .map(|(i, _)| i)
        .collect())
}

/// `1e-8 (1 + |min F|)`.
pub fn default_eps_v(min_value: f64) -> f64 {
    1e-8 * (1.0 + min_value.abs())
}

/// `1e-3 · diameter`, floored so that a one-point set still gets a threshold.
pub fn default_eps_s(set: &SetSpec) -> f64 {
    (1e-3 * set.diameter()).max(1e-12)
}

/// Single-linkage clustering at threshold `eps_s`: two points share a
/// cluster iff they are joined by a chain of steps of length `<= eps_s`.
/// Clusters are ordered by their smallest member; members are ascending.
pub fn cluster_points(points: &[Point], eps_s: f64) -> Result<Vec<Vec<usize>>> {
    if !(eps_s > 0.0) {
        return Err(LabError::InvalidParameter(format!("eps_s must be > 0, got {eps_s}")));
    }
    if let Some(first) = points.first() {
        if let Some(bad) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(LabError::DimensionMismatch {
                expected: first.dim(),
                got: bad.dim(),
            });
        }
    }
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let eps_sq = eps_s * eps_s;
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dist_sq(&points[j]) <= eps_sq {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    // keep the smaller index as root so ordering is stable
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    Ok(groups)
}

/// Near-global minimizers of `values` (one value per point), grouped into
/// spatial clusters. Each cluster is represented by its lowest member.
pub fn argmin_clusters(
    points: &[Point],
    values: &[f64],
    eps_v: f64,
    eps_s: f64,
) -> Result<Vec<ArgminCluster>> {
    if points.len() != values.len() {
        return Err(LabError::DimensionMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    let idx = eps_argmin(values, eps_v)?;
    let sub: Vec<Point> = idx.iter().map(|&i| points[i].clone()).collect();
    let groups = cluster_points(&sub, eps_s)?;
    Ok(groups
        .into_iter()
        .map(|g| {
            let members: Vec<usize> = g.iter().map(|&k| idx[k]).collect();
            let best = members
                .iter()
                .copied()
                .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
                .expect("cluster is non-empty");
            ArgminCluster {
                representative: points[best].clone(),
                value: values[best],
                members,
            }
        })
        .collect())
}

/// A midpoint of two image points lying farther from the image than the
/// sampling resolution allows: evidence that the sampled set is not convex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonConvexity {
    pub pair: (usize, usize),
    pub midpoint: Point,
    pub distance: f64,
    pub threshold: f64,
}

/// Midpoint test for non-convexity. All pairs are enumerated when there are
/// at most `trials` of them, otherwise `trials` random pairs are drawn.
/// Returns the witness with the largest midpoint distance, if any exceeds
/// `max(3 · chord, 1e-9 (1 + diameter))`.
pub fn nonconvexity_witness(
    points: &[Point],
    chord: f64,
    trials: usize,
    seed: u64,
) -> Result<Option<NonConvexity>> {
    if points.is_empty() {
        return Err(LabError::EmptySet);
    }
    let n = points.len();
    let threshold = (3.0 * chord).max(1e-9 * (1.0 + diameter_estimate(points)));
    let pairs: Vec<(usize, usize)> = if n * (n - 1) / 2 <= trials {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(i, j)| i != j)
            .collect()
    };
    let mut best: Option<NonConvexity> = None;
    for (i, j) in pairs {
        let m = points[i].midpoint(&points[j]);
        let d = dist_to_points(&m, points)?;
        if d > threshold && best.as_ref().is_none_or(|b| d > b.distance) {
            best = Some(NonConvexity {
                pair: (i, j),
                midpoint: m,
                distance: d,
                threshold,
            });
        }
    }
    Ok(best)
}

// Bounding-box diagonal: an upper bound on the diameter, O(n).
fn diameter_estimate(points: &[Point]) -> f64 {
    let dim = points[0].dim();
    (0..dim)
        .map(|k| {
            let lo = points.iter().map(|p| p.0[k]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p.0[k]).fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) * (hi - lo)
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Point> {
        v.iter().map(|&x| Point(vec![x])).collect()
    }

    #[test]
    fn distance_to_circle_from_center() {
        let c = SetSpec::circle(360).unwrap();
        let d = dist_to_set(&Point(vec![0.0, 0.0]), &c).unwrap();
        assert!((d - 1.0).abs() <= 2e-4);
    }

    #[test]
    fn distance_is_zero_on_member() {
        let c = SetSpec::point_cloud(vec![Point(vec![1.0, 0.0]), Point(vec![0.0, 3.0])], "t").unwrap();
        assert_eq!(dist_to_set(&Point(vec![1.0, 0.0]), &c).unwrap(), 0.0);
    }

    #[test]
    fn distance_two_points() {
        let x = SetSpec::point_cloud(pts(&[-1.0, 1.0]), "pm1").unwrap();
        assert_eq!(dist_to_set(&Point(vec![0.0]), &x).unwrap(), 1.0);
    }

    #[test]
    fn distance_errors() {
        let x = SetSpec::point_cloud(pts(&[-1.0, 1.0]), "pm1").unwrap();
        assert!(matches!(
            dist_to_set(&Point(vec![0.0, 0.0]), &x),
            Err(LabError::DimensionMismatch { .. })
        ));
        assert!(matches!(SetSpec::point_cloud(vec![], "e"), Err(LabError::EmptySet)));
        assert!(matches!(dist_to_points(&Point(vec![0.0]), &[]), Err(LabError::EmptySet)));
    }

    #[test]
    fn eps_argmin_keeps_near_ties() {
        let eps = 0.1;
        let y = eps / 4.0;
        let values = [(y + 1.0) * (y + 1.0), (y - 1.0) * (y - 1.0) + eps];
        assert_eq!(eps_argmin(&values, 1e-9).unwrap(), vec![0, 1]);
        assert_eq!(eps_argmin(&[2.0; 5], 1e-9).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(eps_argmin(&[1.0, 2.0, 3.0], 1e-9).unwrap(), vec![0]);
    }

    #[test]
    fn eps_argmin_rejects_nan_and_bad_eps() {
        assert!(matches!(
            eps_argmin(&[1.0, f64::NAN], 1e-9),
            Err(LabError::NonFinite { index: 1 })
        ));
        assert!(eps_argmin(&[1.0], 0.0).is_err());
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(cluster_points(&pts(&[-1.0, 1.0]), 0.5).unwrap().len(), 2);
        assert_eq!(cluster_points(&pts(&[0.0, 0.01]), 0.5).unwrap().len(), 1);
        let c = SetSpec::circle(360).unwrap();
        assert_eq!(cluster_points(c.samples(), 0.001).unwrap().len(), 360);
    }

    #[test]
    fn single_linkage_chains() {
        // 0 - 0.4 - 0.8 chain merges even though ends are 0.8 apart
        let g = cluster_points(&pts(&[0.0, 5.0, 0.4, 0.8]), 0.5).unwrap();
        assert_eq!(g, vec![vec![0, 2, 3], vec![1]]);
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(oscillation(&Perturbation::zero(4)), 0.0);
        let eps = 0.37;
        assert_eq!(oscillation(&Perturbation::from_values(vec![0.0, eps]).unwrap()), eps);
        let vals: Vec<f64> = (0..4001)
            .map(|k| (5.0 * (-2.0 + 4.0 * k as f64 / 4000.0)).sin())
            .collect();
        let osc = oscillation(&Perturbation::from_values(vals).unwrap());
        assert!((osc - 2.0).abs() < 1e-4, "osc = {osc}");
    }

    #[test]
    fn nonconvexity_detection() {
        let two = pts(&[-1.0, 1.0]);
        let w = nonconvexity_witness(&two, 0.0, 10_000, 1).unwrap().unwrap();
        assert_eq!(w.midpoint, Point(vec![0.0]));
        let seg = SetSpec::segment(&Point(vec![-1.0, 0.0]), &Point(vec![1.0, 0.0]), 2001).unwrap();
        assert!(nonconvexity_witness(seg.samples(), seg.grid_chord(), 10_000, 1)
            .unwrap()
            .is_none());
        let circ = SetSpec::circle(720).unwrap();
        assert!(nonconvexity_witness(circ.samples(), circ.grid_chord(), 10_000, 1)
            .unwrap()
            .is_some());
    }

    #[test]
    fn csv_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("circle.csv");
        let c = SetSpec::circle(12).unwrap();
        c.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dim,c0,c1\n2,"));
        let back = SetSpec::read_csv(&path).unwrap();
        assert_eq!(back.samples(), c.samples());
        assert_eq!(back.kind, c.kind);

        let cloud_path = dir.path().join("cloud.csv");
        let cloud = SetSpec::point_cloud(pts(&[-1.0, 0.25, 1.0]), "t").unwrap();
        cloud.write_csv(&cloud_path).unwrap();
        let back = SetSpec::read_csv(&cloud_path).unwrap();
        assert_eq!(back.kind, SetKind::PointCloud);
        assert_eq!(back.samples(), cloud.samples());
    }
}
