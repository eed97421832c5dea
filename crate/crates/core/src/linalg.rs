use nalgebra::{DMatrix, DVector};

use crate::error::{FslmError, Result};

const RANK_TOL: f64 = 1e-10;

/// Thin-QR least squares for a fixed tall design matrix.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub(crate) fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = design.shape();
        if m < k {
            return Err(FslmError::RankDeficient(format!("{m} observations for {k} columns")));
        }
        let qr = design.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return Err(FslmError::RankDeficient("design matrix is zero".into()));
        }
        for (j, d) in r.diagonal().iter().enumerate() {
            if d.abs() <= RANK_TOL * scale {
                return Err(FslmError::RankDeficient(format!(
                    "column {j} is linearly dependent on the others"
                )));
            }
        }
        Ok(Self { q, r })
    }

    /// Solve for every column of `rhs` at once.
    pub(crate) fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let qtb = self.q.transpose() * rhs;
        self.r
            .solve_upper_triangular(&qtb)
            .expect("triangular factor checked nonsingular")
    }

    pub(crate) fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let qtb = self.q.transpose() * rhs;
        self.r
            .solve_upper_triangular(&qtb)
            .expect("triangular factor checked nonsingular")
    }
}

pub(crate) fn is_finite_matrix(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
