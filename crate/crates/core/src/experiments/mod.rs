//! Named experiment configs, the deterministic runner and the report
//! verifier.
//!
//! A config is JSON of the form
//! `{"name": .., "seed": .., "kind": "chebyshev", "params": {..}}`.
//! Reports carry no wall-clock data so that two runs of the same config are
//! byte-identical; timings go to a separate sidecar.

mod catalog;
mod oracle;
mod run;
mod verify;

pub use catalog::{bundled, bundled_names, BUNDLED};
pub use oracle::{field_derivative_1d, scalar_residual};
pub use run::{run, RunOptions, RunOutput, Timings};
pub use verify::{verify_report, verify_report_file, Verification};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chebyshev::{ClusterSummary, WitnessReport};
use crate::error::{LabError, Result};
use crate::hilbert::{Perturbation, Point, SetSpec};
use crate::kirchhoff::{FamilySpec, KirchhoffProblem, SearchBudget, SolverOptions};
use crate::three_solutions::{FieldSpec, NewtonOptions, ThreeSolutionWitness};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Where reports and CSV artifacts go when the caller gives no directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub task: Task,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::Config(format!("schema violation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> &'static str {
        match self.task {
            Task::Chebyshev(_) => "chebyshev",
            Task::Minimax(_) => "minimax",
            Task::ThreeSolutions(_) => "three-solutions",
            Task::Kirchhoff(_) => "kirchhoff",
            Task::Validate(_) => "validate",
        }
    }

    /// Structural checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.name.trim().is_empty() {
            return bad("empty experiment name".into());
        }
        if !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return bad(format!("experiment name `{}` must be [A-Za-z0-9_-]", self.name));
        }
        match &self.task {
            Task::Chebyshev(p) => {
                if p.radii.is_empty() || p.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad("radii must be a non-empty list of positive numbers".into());
                }
            }
            Task::Minimax(MinimaxParams::Gap { x_count, y_count, .. }) => {
                if *x_count < 2 || *y_count < 2 {
                    return bad("gap grids need at least 2 points per axis".into());
                }
            }
            Task::Minimax(MinimaxParams::Budget { radii, .. }) => {
                if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad("radii must be a non-empty list of positive numbers".into());
                }
            }
            Task::ThreeSolutions(ThreeSolutionsParams::Witness { dim, radius_factor, .. }) => {
                if *dim == 0 || *dim > 3 {
                    return bad(format!("dimension must be 1..=3, got {dim}"));
                }
                if !(*radius_factor > 1.0) {
                    return bad("radius_factor must exceed 1".into());
                }
            }
            Task::ThreeSolutions(ThreeSolutionsParams::Scalar { interval, brackets, .. }) => {
                if !(interval[0] < interval[1]) || *brackets == 0 {
                    return bad("scalar interval must be increasing with at least one bracket".into());
                }
            }
            Task::Kirchhoff(p) => p.problem.check().map_err(|e| LabError::Config(e.to_string()))?,
            Task::Validate(p) => p.problem.check().map_err(|e| LabError::Config(e.to_string()))?,
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Task {
    Chebyshev(ChebyshevParams),
    Minimax(MinimaxParams),
    ThreeSolutions(ThreeSolutionsParams),
    Kirchhoff(KirchhoffParams),
    Validate(ValidateParams),
}

/// Where a sampled set comes from. Relative CSV paths resolve against the
/// config's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SetSource {
    Points { points: Vec<Point> },
    /// unit circle, `samples` equal angles from 0
    Circle { samples: usize },
    /// unit-circle arc between two angles (radians), endpoints included
    Arc { samples: usize, from: f64, to: f64 },
    Segment { a: Point, b: Point, samples: usize },
    Csv { path: PathBuf },
}

impl SetSource {
    pub fn build(&self, base: Option<&Path>) -> Result<SetSpec> {
        match self {
            SetSource::Points { points } => SetSpec::point_cloud(points.clone(), "explicit points"),
            SetSource::Circle { samples } => SetSpec::circle(*samples),
            SetSource::Arc { samples, from, to } => {
                if *samples < 2 || !(from < to) {
                    return Err(LabError::Config("arc needs >= 2 samples and from < to".into()));
                }
                let params = (0..*samples)
                    .map(|k| from + (to - from) * k as f64 / (*samples - 1) as f64)
                    .collect();
                SetSpec::parametric(params, |t| Point(vec![t.cos(), t.sin()]), format!("arc [{from}, {to}]"))
            }
            SetSource::Segment { a, b, samples } => SetSpec::segment(a, b, *samples),
            SetSource::Csv { path } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                SetSpec::read_csv(&full)
            }
        }
    }
}

/// A real function on the samples of a set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum SampleFunction {
    #[default]
    Zero,
    /// one value per sample, in sample order
    Values { values: Vec<f64> },
    /// `scale · x_axis`
    Coordinate { axis: usize, scale: f64 },
    /// `½ |x − center|^2`
    HalfDistSq { center: Point },
}

impl SampleFunction {
    pub fn values(&self, set: &SetSpec) -> Result<Vec<f64>> {
        let s = set.samples();
        match self {
            SampleFunction::Zero => Ok(vec![0.0; s.len()]),
            SampleFunction::Values { values } => {
                if values.len() != s.len() {
                    return Err(LabError::DimensionMismatch { expected: s.len(), got: values.len() });
                }
                Ok(values.clone())
            }
            SampleFunction::Coordinate { axis, scale } => {
                if *axis >= set.dim() {
                    return Err(LabError::Config(format!("axis {axis} out of range for dimension {}", set.dim())));
                }
                Ok(s.iter().map(|p| scale * p.0[*axis]).collect())
            }
            SampleFunction::HalfDistSq { center } => {
                if center.dim() != set.dim() {
                    return Err(LabError::DimensionMismatch { expected: set.dim(), got: center.dim() });
                }
                Ok(s.iter().map(|p| 0.5 * p.dist_sq(center)).collect())
            }
        }
    }

    pub fn perturbation(&self, set: &SetSpec) -> Result<Perturbation> {
        Perturbation::from_values(self.values(set)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectPoint {
    pub value: Point,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectScalar {
    pub value: f64,
    pub tol: f64,
}

impl ExpectScalar {
    pub fn holds(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevParams {
    pub set: SetSource,
    pub u0: Point,
    #[serde(default)]
    pub phi: SampleFunction,
    /// Radii for the certificate scan.
    pub radii: Vec<f64>,
    /// Search radius; defaults to the smallest admissible radius of the scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_s: Option<f64>,
    /// Certificates must be admissible exactly for `r > threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_threshold: Option<f64>,
    /// Every `rho_r` of the scan must match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_rho: Option<ExpectScalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_y0: Option<ExpectPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapFunction {
    /// `f(x, y) = x y`
    Bilinear,
    /// `f(x, y) = x^2 + x y`
    QuadraticBilinear,
}

impl GapFunction {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            GapFunction::Bilinear => x * y,
            GapFunction::QuadraticBilinear => x * x + x * y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum MinimaxParams {
    /// Random instances of the convex-combination upper bound.
    ConvexBound { trials: usize, etas_per_trial: usize },
    /// Perturbation-budget margin over a radius scan.
    Budget {
        set: SetSource,
        u0: Point,
        i: SampleFunction,
        #[serde(default)]
        phi: SampleFunction,
        radii: Vec<f64>,
    },
    /// Linear functional with two separated minima on the image.
    Eta {
        set: SetSource,
        #[serde(default)]
        i: SampleFunction,
        eta_radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps_s: Option<f64>,
    },
    /// Grid duality gap, refined `refinements` times by doubling.
    Gap {
        function: GapFunction,
        x_range: [f64; 2],
        y_range: [f64; 2],
        x_count: usize,
        y_count: usize,
        #[serde(default)]
        refinements: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_gap_below: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_sides: Option<[f64; 2]>,
    },
}

fn default_radius_factor() -> f64 {
    1.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum ThreeSolutionsParams {
    /// Radius constant and a three-root witness inside the certified ball.
    Witness {
        i: FieldSpec,
        j: FieldSpec,
        dim: usize,
        x_hat: Point,
        /// Search radius is `radius_factor · bound`.
        #[serde(default = "default_radius_factor")]
        radius_factor: f64,
        /// Bypasses the certificate; reported as overridden.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_override: Option<f64>,
        #[serde(default)]
        newton: NewtonOptions,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_bound: Option<ExpectScalar>,
    },
    /// Roots of `x + a J'(x) = b` by bisection and by deflated Newton.
    Scalar {
        j: FieldSpec,
        a: f64,
        b: f64,
        interval: [f64; 2],
        brackets: usize,
        starts: usize,
        /// Fewer bisection roots than this fails the run.
        #[serde(default)]
        min_roots: usize,
        #[serde(default)]
        newton: NewtonOptions,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffParams {
    pub problem: KirchhoffProblem,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(flatten)]
    pub task: KirchhoffTask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum KirchhoffTask {
    /// All critical states for one forcing from deterministic starts.
    Multistart {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        starts: usize,
        #[serde(default)]
        refine: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_states: Option<usize>,
    },
    /// Walk the forcing lattice for two or more states.
    Search { family: FamilySpec, budget: SearchBudget },
    /// Constant reaction: one state per random forcing.
    Uniqueness {
        forcings: usize,
        degree: usize,
        amplitude: f64,
        starts: usize,
        /// Also solve `alpha ≡ 1, beta ≡ 0` and compare with the parabola.
        #[serde(default)]
        parabola: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateParams {
    pub problem: KirchhoffProblem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub u: Vec<f64>,
    pub q: f64,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Witness {
    DoubleMinimum(WitnessReport),
    LinearPerturbation {
        eta: Point,
        clusters: Vec<ClusterSummary>,
        eps_v: f64,
        eps_s: f64,
    },
    ThreeRoots(ThreeSolutionWitness),
    ScalarRoots {
        j: FieldSpec,
        a: f64,
        b: f64,
        roots: Vec<f64>,
    },
    KirchhoffStates {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        states: Vec<StateRecord>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub kind: String,
    pub config: ExperimentConfig,
    pub budget_scale: f64,
    pub witnesses: Vec<Witness>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// Module-specific numbers (certificates, gaps, validation tables).
    pub details: serde_json::Value,
    /// File names written next to the report.
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Report(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
