//! Derivative formulas used by the verifier. These are written out again
//! here rather than borrowed from the fields, so a slip in one place shows up
//! as a disagreement.

use crate::error::Result;
use crate::expr::Expr;
use crate::hilbert::Point;
use crate::three_solutions::FieldSpec;

type Scalar = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// `d/dx_1` of a field restricted to the first axis. Formulas use a
/// fourth-order central difference.
pub fn field_derivative_1d(spec: &FieldSpec) -> Result<Scalar> {
    Ok(match spec.clone() {
        FieldSpec::Zero | FieldSpec::Constant { .. } => Box::new(|_| 0.0),
        FieldSpec::Cos { amplitude } => Box::new(move |x: f64| -amplitude * x.sin()),
        FieldSpec::Sin { amplitude } => Box::new(move |x: f64| amplitude * x.cos()),
        FieldSpec::Linear { coeffs, .. } => {
            let c = coeffs.first().copied().unwrap_or(0.0);
            Box::new(move |_| c)
        }
        FieldSpec::Gaussian { amplitude } => Box::new(move |x: f64| -2.0 * amplitude * x * (-x * x).exp()),
        FieldSpec::Expression { expr } => {
            let e = Expr::parse(&expr, "x")?;
            Box::new(move |x: f64| {
                let h = 1e-3 * (1.0 + x.abs());
                (8.0 * (e.eval(x + h) - e.eval(x - h)) - (e.eval(x + 2.0 * h) - e.eval(x - 2.0 * h))) / (12.0 * h)
            })
        }
    })
}

/// Gradient of a field at `x`, from the same formulas.
pub(crate) fn field_gradient(spec: &FieldSpec, x: &Point) -> Result<Point> {
    let mut g = vec![0.0; x.dim()];
    match spec {
        FieldSpec::Linear { coeffs, .. } => {
            for (d, gd) in g.iter_mut().enumerate() {
                *gd = coeffs.get(d).copied().unwrap_or(0.0);
            }
        }
        FieldSpec::Gaussian { amplitude } => {
            let e = (-x.norm_sq()).exp();
            for (gd, xd) in g.iter_mut().zip(&x.0) {
                *gd = -2.0 * amplitude * xd * e;
            }
        }
        other => {
            if let Some(g0) = g.first_mut() {
                *g0 = field_derivative_1d(other)?(x.0[0]);
            }
        }
    }
    Ok(Point(g))
}

/// `x + a J'(x) − b`.
pub fn scalar_residual(j: &FieldSpec, a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(x + a * field_derivative_1d(j)?(x) - b)
}

/// `|x + I'(x) + mu0 J'(x) − y0|`.
pub(crate) fn three_solution_residual(i: &FieldSpec, j: &FieldSpec, y0: &Point, mu0: f64, x: &Point) -> Result<f64> {
    let gi = field_gradient(i, x)?;
    let gj = field_gradient(j, x)?;
    Ok((0..x.dim())
        .map(|d| x.0[d] + gi.0[d] + mu0 * gj.0[d] - y0.0[d])
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt())
}
