//! Perturbed nearest-point multiplicity on non-convex sets.
//!
//! For a base point `u0` off the set, `delta = dist(u0, X)` and
//! `rho_r = sup_{|y|<r} (dist(u0 + y, X)^2 − |y|^2)`. A radius `r` is
//! admissible for a perturbation `phi` when
//! `r > (rho_r − delta^2 + osc(phi)) / (2 delta)`; for such `r` some `y0`
//! with `|y0 − u0| < r` makes `x ↦ |psi(x) − y0|^2 + phi(x)` attain its
//! minimum at two or more separated points.

use serde::{Deserialize, Serialize};

use crate::ball::{sup_min_affine, BallSupOptions};
use crate::error::{LabError, Result};
use crate::hilbert::{
    argmin_clusters, default_eps_v, diameter, dist_to_points, nonconvexity_witness, oscillation,
    ArgminCluster, NonConvexity, Perturbation, Point, SetKind, SetSpec,
};
use crate::lattice::{self, LatticeOptions, MultiplicityTolerances, SampleObjective};
use crate::Outcome;

/// A domain grid together with its image under a map `psi`. The identity
/// map gives back the set itself.
#[derive(Clone, Debug)]
pub struct MappedSet {
    pub domain: SetSpec,
    image: Vec<Point>,
}

impl MappedSet {
    pub fn identity(set: SetSpec) -> Self {
        let image = set.samples().to_vec();
        MappedSet { domain: set, image }
    }

    pub fn new<F: Fn(&Point) -> Point>(domain: SetSpec, psi: F) -> Result<Self> {
        let image: Vec<Point> = domain.samples().iter().map(psi).collect();
        let dim = image[0].dim();
        for (i, p) in image.iter().enumerate() {
            if p.dim() != dim {
                return Err(LabError::DimensionMismatch { expected: dim, got: p.dim() });
            }
            if !p.is_finite() {
                return Err(LabError::NonFinite { index: i });
            }
        }
        Ok(MappedSet { domain, image })
    }

    pub fn image(&self) -> &[Point] {
        &self.image
    }

    pub fn dim(&self) -> usize {
        self.image[0].dim()
    }

    /// Largest gap between images of consecutive curve samples; 0 for clouds.
    pub fn image_chord(&self) -> f64 {
        match self.domain.kind {
            SetKind::PointCloud => 0.0,
            SetKind::ParametricCurve { .. } => self
                .image
                .windows(2)
                .map(|w| w[0].dist(&w[1]))
                .fold(0.0, f64::max),
        }
    }

    pub fn default_eps_s(&self) -> f64 {
        (1e-3 * diameter(&self.image)).max(1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusCertificate {
    pub r: f64,
    pub delta: f64,
    pub rho_r: f64,
    pub osc_phi: f64,
    pub margin: f64,
    pub admissible: bool,
}

impl RadiusCertificate {
    pub fn new(r: f64, delta: f64, rho_r: f64, osc_phi: f64) -> Self {
        let margin = r - (rho_r - delta * delta + osc_phi) / (2.0 * delta);
        RadiusCertificate {
            r,
            delta,
            rho_r,
            osc_phi,
            margin,
            admissible: margin > 0.0,
        }
    }
}

fn checked_delta(u0: &Point, image: &[Point]) -> Result<f64> {
    let delta = dist_to_points(u0, image)?;
    if delta <= 1e-12 * (1.0 + u0.norm()) {
        return Err(LabError::DegenerateDistance { distance: delta });
    }
    Ok(delta)
}

fn rho_r_points(
    u0: &Point,
    image: &[Point],
    delta: f64,
    r: f64,
    opts: &BallSupOptions,
    seeds: &[Point],
) -> Result<(f64, Point)> {
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius must be > 0, got {r}")));
    }
    // dist(u0 + y)^2 − |y|^2 = min_x (|x − u0|^2 − 2 <x − u0, y>)
    let offsets: Vec<f64> = image.iter().map(|x| x.dist_sq(u0)).collect();
    let slopes: Vec<Point> = image.iter().map(|x| x.sub(u0).scale(-2.0)).collect();
    let est = sup_min_affine(&offsets, &slopes, r, seeds, opts);
    let lower = delta * delta;
    let upper = lower + 2.0 * delta * r;
    let slack = 1e-12 * (1.0 + upper);
    if !(est.value >= lower - slack && est.value <= upper + slack) {
        return Err(LabError::Invariant(format!(
            "rho_r = {} outside [{lower}, {upper}]",
            est.value
        )));
    }
    Ok((est.value, est.argmax))
}

/// Lower estimate of `rho_r` by low-discrepancy sampling of the ball plus
/// compass refinement. Always between `delta^2` and `delta^2 + 2 delta r`.
pub fn rho_r(u0: &Point, set: &SetSpec, r: f64, opts: &BallSupOptions) -> Result<f64> {
    let delta = checked_delta(u0, set.samples())?;
    Ok(rho_r_points(u0, set.samples(), delta, r, opts, &[])?.0)
}

/// `rho_r` for several radii. Each larger radius is seeded with the maximizer
/// found for the previous one, so the profile is nondecreasing.
pub fn rho_r_profile(u0: &Point, image: &[Point], radii: &[f64], opts: &BallSupOptions) -> Result<Vec<f64>> {
    let delta = checked_delta(u0, image)?;
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut out = vec![0.0; radii.len()];
    let mut seeds: Vec<Point> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in order {
        let (v, arg) = rho_r_points(u0, image, delta, radii[i], opts, &seeds)?;
        let v = v.max(last);
        out[i] = v;
        last = v;
        seeds.push(arg);
    }
    Ok(out)
}

/// `count` radii spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(LabError::InvalidParameter(format!("bad geometric grid [{lo}, {hi}] x {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    Ok((0..count)
        .map(|k| if k + 1 == count { hi } else { lo * ratio.powi(k as i32) })
        .collect())
}

/// One certificate per radius in `r_grid`.
pub fn admissible_r_scan(
    u0: &Point,
    mapped: &MappedSet,
    phi: &Perturbation,
    r_grid: &[f64],
    opts: &BallSupOptions,
) -> Result<Vec<RadiusCertificate>> {
    if r_grid.is_empty() {
        return Err(LabError::InvalidParameter("empty radius grid".into()));
    }
    let delta = checked_delta(u0, mapped.image())?;
    let rhos = rho_r_profile(u0, mapped.image(), r_grid, opts)?;
    let osc = oscillation(phi);
    Ok(r_grid
        .iter()
        .zip(rhos)
        .map(|(&r, rho)| RadiusCertificate::new(r, delta, rho, osc))
        .collect())
}

pub fn certificate(
    u0: &Point,
    mapped: &MappedSet,
    phi: &Perturbation,
    r: f64,
    opts: &BallSupOptions,
) -> Result<RadiusCertificate> {
    Ok(admissible_r_scan(u0, mapped, phi, &[r], opts)?.remove(0))
}

struct PerturbedDistance<'a> {
    image: &'a [Point],
    phi: &'a Perturbation,
}

impl SampleObjective for PerturbedDistance<'_> {
    fn points(&self) -> &[Point] {
        self.image
    }

    fn values(&self, y: &Point) -> Vec<f64> {
        self.image
            .iter()
            .enumerate()
            .map(|(i, p)| p.dist_sq(y) + self.phi.eval(i))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleMinWitness {
    pub y0: Point,
    pub clusters: Vec<ArgminCluster>,
    pub objective_min: f64,
    pub ball_radius_used: f64,
    pub eps_v: f64,
    pub eps_s: f64,
    pub lattice_spacing: f64,
    pub nonconvexity: NonConvexity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub lattice: LatticeOptions,
    /// `None` uses the relative default `1e-8 (1 + |min F|)`.
    pub eps_v: Option<f64>,
    /// `None` uses `1e-3 · diameter(psi(X))`.
    pub eps_s: Option<f64>,
    pub nonconvexity_trials: usize,
    pub seed: u64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            lattice: LatticeOptions::default(),
            eps_v: None,
            eps_s: None,
            nonconvexity_trials: 10_000,
            seed: 0,
        }
    }
}

/// Searches the open ball of radius `cert.r` around `u0` for a point whose
/// perturbed squared-distance functional has at least two separated global
/// minima over `psi(X)`.
pub fn find_double_minimum(
    u0: &Point,
    mapped: &MappedSet,
    phi: &Perturbation,
    cert: &RadiusCertificate,
    settings: &SearchSettings,
) -> Result<Outcome<DoubleMinWitness>> {
    if !cert.admissible {
        return Err(LabError::NotAdmissible { margin: cert.margin });
    }
    if phi.len() != mapped.domain.len() {
        return Err(LabError::DimensionMismatch {
            expected: mapped.domain.len(),
            got: phi.len(),
        });
    }
    if u0.dim() != mapped.dim() {
        return Err(LabError::DimensionMismatch { expected: mapped.dim(), got: u0.dim() });
    }
    let nonconvexity = nonconvexity_witness(
        mapped.image(),
        mapped.image_chord(),
        settings.nonconvexity_trials,
        settings.seed,
    )?
    .ok_or_else(|| LabError::Hypothesis("psi(X) passes the midpoint convexity test".into()))?;

    let tol = MultiplicityTolerances {
        eps_v: settings.eps_v,
        eps_s: settings.eps_s.unwrap_or_else(|| mapped.default_eps_s()),
    };
    let obj = PerturbedDistance { image: mapped.image(), phi };
    let out = lattice::search(&obj, u0, cert.r, &settings.lattice, &tol)?;
    match out.best {
        Some(best) => {
            if best.y.dist(u0) >= cert.r {
                return Err(LabError::Invariant("witness outside the search ball".into()));
            }
            Ok(Outcome::Found(DoubleMinWitness {
                eps_v: tol.eps_v_for(best.min_value),
                eps_s: tol.eps_s,
                y0: best.y,
                clusters: best.clusters,
                objective_min: best.min_value,
                ball_radius_used: cert.r,
                lattice_spacing: out.spacing,
                nonconvexity,
            }))
        }
        None => Ok(Outcome::NotFound(format!(
            "no lattice point with two minima after {} levels ({} evaluations, final spacing {:e})",
            out.levels, out.evaluated, out.spacing
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub cluster_count: usize,
    pub clusters: Vec<ArgminCluster>,
    pub objective_min: f64,
    pub eps_v: f64,
}

/// Brute-force recomputation of `x ↦ |psi(x) − y0|^2 + phi(x)` over the
/// whole domain grid, followed by minimizer clustering.
pub fn verify_double_minimum(
    y0: &Point,
    image: &[Point],
    phi: &Perturbation,
    eps_v: Option<f64>,
    eps_s: f64,
) -> Result<VerificationReport> {
    if image.len() != phi.len() {
        return Err(LabError::DimensionMismatch { expected: image.len(), got: phi.len() });
    }
    let mut values = Vec::with_capacity(image.len());
    for (i, p) in image.iter().enumerate() {
        if p.dim() != y0.dim() {
            return Err(LabError::DimensionMismatch { expected: p.dim(), got: y0.dim() });
        }
        let mut s = 0.0;
        for (a, b) in p.0.iter().zip(&y0.0) {
            s += (a - b) * (a - b);
        }
        values.push(s + phi.eval(i));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_v = eps_v.unwrap_or_else(|| default_eps_v(min));
    let clusters = argmin_clusters(image, &values, eps_v, eps_s)?;
    Ok(VerificationReport {
        cluster_count: clusters.len(),
        clusters,
        objective_min: min,
        eps_v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub representative: Point,
    pub value: f64,
}

/// Serialized form of a double-minimum witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub y0: Point,
    pub radius: f64,
    pub clusters: Vec<ClusterSummary>,
    pub margin: f64,
    pub verified: bool,
    pub eps_v: f64,
    pub eps_s: f64,
}

impl WitnessReport {
    pub fn new(w: &DoubleMinWitness, cert: &RadiusCertificate, check: &VerificationReport) -> Self {
        WitnessReport {
            y0: w.y0.clone(),
            radius: w.ball_radius_used,
            clusters: w
                .clusters
                .iter()
                .map(|c| ClusterSummary {
                    representative: c.representative.clone(),
                    value: c.value,
                })
                .collect(),
            margin: cert.margin,
            verified: check.cluster_count >= 2 && check.cluster_count == w.clusters.len(),
            eps_v: w.eps_v,
            eps_s: w.eps_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> MappedSet {
        MappedSet::identity(SetSpec::point_cloud(vec![Point(vec![-1.0]), Point(vec![1.0])], "pm1").unwrap())
    }

    #[test]
    fn rho_r_examples() {
        let opts = BallSupOptions::default();
        let circle = SetSpec::circle(360).unwrap();
        let o2 = Point(vec![0.0, 0.0]);
        for r in [0.1, 1.0, 3.0] {
            assert!((rho_r(&o2, &circle, r, &opts).unwrap() - 1.0).abs() < 1e-12);
        }
        let x = SetSpec::point_cloud(vec![Point(vec![-1.0]), Point(vec![1.0])], "pm1").unwrap();
        for r in [1e-6, 0.5, 2.0] {
            assert_eq!(rho_r(&Point(vec![0.0]), &x, r, &opts).unwrap(), 1.0);
        }
    }

    #[test]
    fn rho_r_rejects_point_on_set() {
        let x = SetSpec::point_cloud(vec![Point(vec![-1.0]), Point(vec![1.0])], "pm1").unwrap();
        assert!(matches!(
            rho_r(&Point(vec![1.0]), &x, 1.0, &BallSupOptions::default()),
            Err(LabError::DegenerateDistance { .. })
        ));
    }

    #[test]
    fn scan_two_point_threshold() {
        let phi = Perturbation::from_values(vec![0.0, 0.1]).unwrap();
        let grid = [0.01, 0.049, 0.05, 0.051, 0.2, 1.0];
        let certs = admissible_r_scan(&Point(vec![0.0]), &two_point(), &phi, &grid, &BallSupOptions::default()).unwrap();
        for c in &certs {
            assert_eq!(c.admissible, c.r > 0.05, "r = {}", c.r);
            assert!((c.margin - (c.r - 0.05)).abs() < 1e-12);
        }
        let zero = Perturbation::zero(2);
        let certs = admissible_r_scan(&Point(vec![0.0]), &two_point(), &zero, &grid, &BallSupOptions::default()).unwrap();
        assert!(certs.iter().all(|c| c.admissible));
        assert!(admissible_r_scan(&Point(vec![0.0]), &two_point(), &zero, &[], &BallSupOptions::default()).is_err());
    }

    #[test]
    fn certificate_is_homogeneous() {
        let c1 = RadiusCertificate::new(0.3, 1.0, 1.2, 0.1);
        let s = 3.5;
        // lengths scale by s, squared quantities by s^2
        let c2 = RadiusCertificate::new(0.3 * s, s, 1.2 * s * s, 0.1 * s * s);
        assert!((c2.margin - s * c1.margin).abs() < 1e-12);
        assert_eq!(c1.admissible, c2.admissible);
    }

    #[test]
    fn double_minimum_two_point_perturbed() {
        let eps = 0.1;
        let phi = Perturbation::from_values(vec![0.0, eps]).unwrap();
        let set = two_point();
        let cert = certificate(&Point(vec![0.0]), &set, &phi, 0.2, &BallSupOptions::default()).unwrap();
        let w = find_double_minimum(&Point(vec![0.0]), &set, &phi, &cert, &SearchSettings::default())
            .unwrap()
            .found()
            .unwrap();
        assert!((w.y0.0[0] - eps / 4.0).abs() < 1e-6);
        let reps: Vec<f64> = w.clusters.iter().map(|c| c.representative.0[0]).collect();
        assert_eq!(reps, vec![-1.0, 1.0]);
        let check = verify_double_minimum(&w.y0, set.image(), &phi, Some(w.eps_v), w.eps_s).unwrap();
        assert_eq!(check.cluster_count, 2);
        assert!((check.clusters[0].value - check.clusters[1].value).abs() < 1e-12);
    }

    #[test]
    fn double_minimum_symmetric_is_exact_center() {
        let set = two_point();
        let phi = Perturbation::zero(2);
        let cert = certificate(&Point(vec![0.0]), &set, &phi, 0.5, &BallSupOptions::default()).unwrap();
        let w = find_double_minimum(&Point(vec![0.0]), &set, &phi, &cert, &SearchSettings::default())
            .unwrap()
            .found()
            .unwrap();
        assert_eq!(w.y0, Point(vec![0.0]));
    }

    #[test]
    fn circle_medial_point_is_center() {
        let set = MappedSet::identity(SetSpec::circle(360).unwrap());
        let phi = Perturbation::zero(360);
        let o = Point(vec![0.0, 0.0]);
        let cert = certificate(&o, &set, &phi, 1.0, &BallSupOptions::default()).unwrap();
        let w = find_double_minimum(&o, &set, &phi, &cert, &SearchSettings::default())
            .unwrap()
            .found()
            .unwrap();
        assert!(w.y0.norm() < 1e-4);
        assert!(w.clusters.len() >= 2);
    }

    #[test]
    fn off_medial_axis_has_unique_projection() {
        let circle = SetSpec::circle(360).unwrap();
        let phi = Perturbation::zero(360);
        let eps_s = 1e-3 * circle.diameter();
        let r = verify_double_minimum(&Point(vec![0.5, 0.0]), circle.samples(), &phi, None, eps_s).unwrap();
        assert_eq!(r.cluster_count, 1);
        assert_eq!(r.clusters[0].representative, Point(vec![1.0, 0.0]));

        let seg = SetSpec::segment(&Point(vec![-1.0, 0.0]), &Point(vec![1.0, 0.0]), 2001).unwrap();
        let u0 = Point(vec![0.0, 0.5]);
        let r = verify_double_minimum(&u0, seg.samples(), &Perturbation::zero(2001), None, 1e-3 * seg.diameter()).unwrap();
        assert_eq!(r.cluster_count, 1);
    }

    #[test]
    fn convex_image_is_rejected() {
        let seg = SetSpec::segment(&Point(vec![-1.0, 0.0]), &Point(vec![1.0, 0.0]), 201).unwrap();
        let set = MappedSet::identity(seg);
        let u0 = Point(vec![0.0, 0.5]);
        let phi = Perturbation::zero(201);
        let cert = certificate(&u0, &set, &phi, 0.5, &BallSupOptions::default()).unwrap();
        assert!(matches!(
            find_double_minimum(&u0, &set, &phi, &cert, &SearchSettings::default()),
            Err(LabError::Hypothesis(_))
        ));
    }

    #[test]
    fn inadmissible_certificate_is_rejected() {
        let set = two_point();
        let phi = Perturbation::from_values(vec![0.0, 0.1]).unwrap();
        let cert = certificate(&Point(vec![0.0]), &set, &phi, 0.04, &BallSupOptions::default()).unwrap();
        assert!(!cert.admissible);
        assert!(matches!(
            find_double_minimum(&Point(vec![0.0]), &set, &phi, &cert, &SearchSettings::default()),
            Err(LabError::NotAdmissible { .. })
        ));
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(0.01, 1.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[4], 1.0);
        assert!((g[2] - 0.1).abs() < 1e-15);
    }
}
