use super::PctlError;

/// Systems with at most this many unknowns are solved densely.
pub const DENSE_LIMIT: usize = 2000;

/// Residual accepted from the iterative solver.
pub const ITERATIVE_RESIDUAL: f64 = 1e-12;

/// Residual accepted from direct elimination before it is reported as a failure.
pub const DIRECT_RESIDUAL: f64 = 1e-9;

pub const MAX_SWEEPS: usize = 1_000_000;

/// The fixed-point system `x = A x + b` over `n` unknowns, `A` given by rows
/// of `(column, coefficient)` pairs.
#[derive(Debug, Clone, Default)]
pub struct LinearSystem {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Largest `|x - A x - b|` relative to `1 + max |x|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = self.rows.iter().zip(&self.b).zip(x).fold(0.0f64, |m, ((row, b), xi)| {
            let ax: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            m.max((xi - ax - b).abs())
        });
        worst / scale
    }

    pub fn solve(&self) -> Result<Vec<f64>, PctlError> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        if self.len() <= DENSE_LIMIT {
            self.solve_dense()
        } else {
            self.solve_gauss_seidel()
        }
    }

    /// Gaussian elimination with partial pivoting on `(I - A) x = b`.
    pub fn solve_dense(&self) -> Result<Vec<f64>, PctlError> {
        let n = self.len();
        let mut m = vec![0.0; n * n];
        let mut rhs = self.b.clone();
        for (i, row) in self.rows.iter().enumerate() {
            m[i * n + i] = 1.0;
            for &(j, a) in row {
                m[i * n + j] -= a;
            }
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs())).unwrap_or(col);
            if m[pivot * n + col].abs() < 1e-300 {
                return Err(PctlError::SolverFailure { residual: f64::INFINITY });
            }
            if pivot != col {
                for k in 0..n {
                    m.swap(pivot * n + k, col * n + k);
                }
                rhs.swap(pivot, col);
            }
            let d = m[col * n + col];
            for r in col + 1..n {
                let f = m[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                m[r * n + col] = 0.0;
                for k in col + 1..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| m[i * n + k] * x[k]).sum();
            x[i] = (rhs[i] - s) / m[i * n + i];
        }
        let residual = self.residual(&x);
        if !(residual <= DIRECT_RESIDUAL) {
            return Err(PctlError::SolverFailure { residual });
        }
        Ok(x)
    }

    pub fn solve_gauss_seidel(&self) -> Result<Vec<f64>, PctlError> {
        let n = self.len();
        let diag: Vec<f64> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| 1.0 - row.iter().filter(|&&(j, _)| j == i).map(|&(_, a)| a).sum::<f64>())
            .collect();
        if diag.iter().any(|d| *d <= 0.0) {
            return Err(PctlError::SolverFailure { residual: f64::INFINITY });
        }
        let mut x = vec![0.0; n];
        for sweep in 0..MAX_SWEEPS {
            let mut delta = 0.0f64;
            for i in 0..n {
                let off: f64 = self.rows[i].iter().filter(|&&(j, _)| j != i).map(|&(j, a)| a * x[j]).sum();
                let next = (self.b[i] + off) / diag[i];
                delta = delta.max((next - x[i]).abs());
                x[i] = next;
            }
            if delta <= ITERATIVE_RESIDUAL || sweep % 64 == 63 {
                let residual = self.residual(&x);
                if residual <= ITERATIVE_RESIDUAL {
                    return Ok(x);
                }
            }
        }
        Err(PctlError::SolverFailure { residual: self.residual(&x) })
    }
}
