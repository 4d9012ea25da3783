//! Small dense and tridiagonal solvers.

/// Solves `a x = b` for a dense row-major `n x n` matrix by Gaussian
/// elimination with partial pivoting. `None` when a pivot is below
/// `1e-14 · max|a|`.
pub fn solve_dense(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (x[row] - s) / m[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Symmetric tridiagonal matrix with constant off-diagonal entries.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl Tridiagonal {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm. `None` on a vanishing pivot.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = b.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let scale = self.diag.iter().fold(self.off.abs(), |s, v| s.max(v.abs()));
        let mut denom = self.diag[0];
        if denom.abs() <= 1e-14 * scale {
            return None;
        }
        c[0] = self.off / denom;
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off * c[i - 1];
            if denom.abs() <= 1e-14 * scale {
                return None;
            }
            c[i] = self.off / denom;
            d[i] = (b[i] - self.off * d[i - 1]) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d.iter().all(|v| v.is_finite()).then_some(d)
    }

    /// Solves `(T + c v vᵀ) x = b` by Sherman–Morrison.
    pub fn solve_rank_one(&self, c: f64, v: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let y = self.solve(b)?;
        if c == 0.0 {
            return Some(y);
        }
        let z = self.solve(v)?;
        let vy: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        let vz: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
        let denom = 1.0 + c * vz;
        if denom.abs() < 1e-14 {
            return None;
        }
        let k = c * vy / denom;
        Some(y.iter().zip(&z).map(|(yi, zi)| yi - k * zi).collect())
    }
}
