//! Likelihood and full conditional distributions of the functional spatial
//! lag model `y = ρWy + Zβ + ε`, `ε ~ N(0, σ²I)`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{FslmError, Result};
use crate::linalg::{is_finite_matrix, LeastSquares};
use crate::spatial::{LogDetEvaluator, SpatialWeights};

/// Response, score matrix and weights, with the cross products every
/// conditional needs cached at construction.
#[derive(Debug, Clone)]
pub struct FslmData {
    y: DVector<f64>,
    z: DMatrix<f64>,
    w: SpatialWeights,
    wy: DVector<f64>,
    ztz: DMatrix<f64>,
    zty: DVector<f64>,
    ztwy: DVector<f64>,
    log_det: LogDetEvaluator,
}

impl FslmData {
    /// Uses the precomputed-spectrum log-determinant.
    pub fn new(y: DVector<f64>, z: DMatrix<f64>, w: SpatialWeights) -> Result<Self> {
        let log_det = LogDetEvaluator::spectral(&w)?;
        Self::with_log_det(y, z, w, log_det)
    }

    /// Refactorizes `I - ρW` by LU on every log-determinant evaluation.
    pub fn with_dense_log_det(y: DVector<f64>, z: DMatrix<f64>, w: SpatialWeights) -> Result<Self> {
        let log_det = LogDetEvaluator::lu(&w);
        Self::with_log_det(y, z, w, log_det)
    }

    fn with_log_det(y: DVector<f64>, z: DMatrix<f64>, w: SpatialWeights, log_det: LogDetEvaluator) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(FslmError::InvalidDimension("empty response".into()));
        }
        if z.nrows() != n || w.n() != n {
            return Err(FslmError::InvalidDimension(format!(
                "response has {n} entries, scores have {} rows, weights cover {} units",
                z.nrows(),
                w.n()
            )));
        }
        if z.ncols() == 0 {
            return Err(FslmError::InvalidDimension("score matrix has no columns".into()));
        }
        if !y.iter().all(|v| v.is_finite()) || !is_finite_matrix(&z) {
            return Err(FslmError::InvalidParameter("non-finite response or score".into()));
        }
        let wy = w.mul_vec(&y);
        let ztz = z.transpose() * &z;
        let zty = z.transpose() * &y;
        let ztwy = z.transpose() * &wy;
        Ok(Self {
            y,
            z,
            w,
            wy,
            ztz,
            zty,
            ztwy,
            log_det,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Truncation order `k_n`.
    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn w(&self) -> &SpatialWeights {
        &self.w
    }

    pub fn wy(&self) -> &DVector<f64> {
        &self.wy
    }

    pub(crate) fn ztz(&self) -> &DMatrix<f64> {
        &self.ztz
    }

    /// `ln|I - ρW|`.
    pub fn log_det(&self, rho: f64) -> Result<f64> {
        self.log_det.log_det(rho)
    }

    /// `Ay = y - ρWy`.
    pub fn filtered_response(&self, rho: f64) -> DVector<f64> {
        &self.y - &self.wy * rho
    }

    /// `‖Ay - Zβ‖²`.
    pub fn residual_ss(&self, beta: &DVector<f64>, rho: f64) -> f64 {
        let fit = &self.z * beta;
        self.y
            .iter()
            .zip(self.wy.iter())
            .zip(fit.iter())
            .map(|((y, wy), f)| {
                let r = y - rho * wy - f;
                r * r
            })
            .sum()
    }

    /// Ordinary least squares of `y` on `Z`: `(β̂, residual variance)`.
    pub fn ols(&self) -> Result<(DVector<f64>, f64)> {
        let ls = LeastSquares::new(&self.z)?;
        let beta = ls.solve_vec(&self.y);
        let dof = (self.n() as f64 - self.k() as f64).max(1.0);
        let s2 = self.residual_ss(&beta, 0.0) / dof;
        Ok((beta, s2))
    }
}

/// Independent priors `β ~ N(m, Σ)`, `σ² ~ IG(a, b)`, `ρ ~ U(lo, hi)`.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    m: DVector<f64>,
    sigma_beta: DMatrix<f64>,
    a: f64,
    b: f64,
    rho_support: (f64, f64),
    sigma_beta_inv: DMatrix<f64>,
    sigma_beta_inv_m: DVector<f64>,
}

impl PriorSpec {
    pub fn new(m: DVector<f64>, sigma_beta: DMatrix<f64>, a: f64, b: f64, rho_support: (f64, f64)) -> Result<Self> {
        let k = m.len();
        if sigma_beta.shape() != (k, k) {
            return Err(FslmError::InvalidDimension(format!(
                "prior covariance is {:?} for a mean of length {k}",
                sigma_beta.shape()
            )));
        }
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(FslmError::InvalidParameter(format!(
                "inverse-gamma hyperparameters must be positive, got a = {a}, b = {b}"
            )));
        }
        let (lo, hi) = rho_support;
        if lo.partial_cmp(&hi) != Some(Ordering::Less) {
            return Err(FslmError::InvalidParameter(format!("empty rho support ({lo}, {hi})")));
        }
        let asym = (&sigma_beta - sigma_beta.transpose()).amax();
        if asym > 1e-12 * sigma_beta.amax() {
            return Err(FslmError::NotPositiveDefinite(
                "prior covariance is not symmetric".into(),
            ));
        }
        let chol = sigma_beta
            .clone()
            .cholesky()
            .ok_or_else(|| FslmError::NotPositiveDefinite("prior covariance".into()))?;
        let sigma_beta_inv = chol.inverse();
        let sigma_beta_inv_m = &sigma_beta_inv * &m;
        Ok(Self {
            m,
            sigma_beta,
            a,
            b,
            rho_support,
            sigma_beta_inv,
            sigma_beta_inv_m,
        })
    }

    /// `m = 0`, `Σ = 10⁴ I`, `a = b = 0.001`, `ρ ~ U[0, 1]`.
    pub fn diffuse(k: usize) -> Self {
        Self::new(
            DVector::zeros(k),
            DMatrix::identity(k, k) * 1e4,
            0.001,
            0.001,
            (0.0, 1.0),
        )
        .expect("diffuse prior is valid")
    }

    pub fn with_rho_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        if lo.partial_cmp(&hi) != Some(Ordering::Less) {
            return Err(FslmError::InvalidParameter(format!("empty rho support ({lo}, {hi})")));
        }
        self.rho_support = (lo, hi);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn sigma_beta(&self) -> &DMatrix<f64> {
        &self.sigma_beta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn rho_support(&self) -> (f64, f64) {
        self.rho_support
    }

    pub fn rho_in_support(&self, rho: f64) -> bool {
        rho >= self.rho_support.0 && rho <= self.rho_support.1
    }
}

/// `θ = (β, σ², ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub rho: f64,
}

impl Theta {
    pub fn new(beta: DVector<f64>, sigma2: f64, rho: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(FslmError::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if !rho.is_finite() || !beta.iter().all(|v| v.is_finite()) {
            return Err(FslmError::InvalidParameter("non-finite parameter".into()));
        }
        Ok(Self { beta, sigma2, rho })
    }

    /// Flattened as `(β_1, …, β_k, σ², ρ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().copied().collect();
        v.push(self.sigma2);
        v.push(self.rho);
        v
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let k = values.len() - 2;
        Theta {
            beta: DVector::from_column_slice(&values[..k]),
            sigma2: values[k],
            rho: values[k + 1],
        }
    }
}

fn check_dims(beta: &DVector<f64>, data: &FslmData) -> Result<()> {
    if beta.len() != data.k() {
        return Err(FslmError::InvalidDimension(format!(
            "beta has {} entries for {} score columns",
            beta.len(),
            data.k()
        )));
    }
    Ok(())
}

/// Gaussian log-likelihood including the Jacobian `ln|I - ρW|`.
pub fn log_likelihood(theta: &Theta, data: &FslmData) -> Result<f64> {
    check_dims(&theta.beta, data)?;
    if theta.sigma2.partial_cmp(&0.0) != Some(Ordering::Greater) {
        return Err(FslmError::InvalidParameter(format!(
            "sigma2 must be positive, got {}",
            theta.sigma2
        )));
    }
    let n = data.n() as f64;
    let ss = data.residual_ss(&theta.beta, theta.rho);
    let log_det = data.log_det(theta.rho)?;
    Ok(-0.5 * n * (2.0 * PI).ln() - 0.5 * n * theta.sigma2.ln() - ss / (2.0 * theta.sigma2) + log_det)
}

/// `σ² | β, ρ ~ IG(n/2 + a, (‖Ay - Zβ‖² + 2b) / 2)`, returned as `(shape, scale)`.
pub fn sigma2_conditional_params(
    beta: &DVector<f64>,
    rho: f64,
    data: &FslmData,
    prior: &PriorSpec,
) -> Result<(f64, f64)> {
    check_dims(beta, data)?;
    let ss = data.residual_ss(beta, rho);
    Ok((data.n() as f64 / 2.0 + prior.a(), (ss + 2.0 * prior.b()) / 2.0))
}

/// Normal full conditional of `β`.
#[derive(Debug, Clone)]
pub struct BetaConditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Mean and Cholesky factor of the precision-scaled matrix
/// `P = ZᵀZ + σ²Σ⁻¹`; the conditional covariance is `σ² P⁻¹`.
pub(crate) fn beta_conditional_factor(
    sigma2: f64,
    rho: f64,
    data: &FslmData,
    prior: &PriorSpec,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
    if prior.k() != data.k() {
        return Err(FslmError::InvalidDimension(format!(
            "prior has {} coefficients for {} score columns",
            prior.k(),
            data.k()
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(FslmError::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let precision = data.ztz() + &prior.sigma_beta_inv * sigma2;
    let chol = precision
        .cholesky()
        .ok_or_else(|| FslmError::NotPositiveDefinite("Z'Z + sigma2 * Sigma^-1".into()))?;
    let rhs = &data.zty - &data.ztwy * rho + &prior.sigma_beta_inv_m * sigma2;
    let mean = chol.solve(&rhs);
    Ok((mean, chol))
}

/// `β | σ², ρ ~ N((ZᵀZ + σ²Σ⁻¹)⁻¹(ZᵀAy + σ²Σ⁻¹m), σ²(ZᵀZ + σ²Σ⁻¹)⁻¹)`.
pub fn beta_conditional_params(sigma2: f64, rho: f64, data: &FslmData, prior: &PriorSpec) -> Result<BetaConditional> {
    let (mean, chol) = beta_conditional_factor(sigma2, rho, data, prior)?;
    let mut cov = chol.inverse() * sigma2;
    // symmetrize away rounding
    let sym = (&cov + cov.transpose()) * 0.5;
    cov.copy_from(&sym);
    Ok(BetaConditional { mean, cov })
}

/// Unnormalized `ln p(ρ | β, σ², y)`; `-∞` outside the prior support.
pub fn rho_log_conditional(
    rho: f64,
    beta: &DVector<f64>,
    sigma2: f64,
    data: &FslmData,
    prior: &PriorSpec,
) -> Result<f64> {
    check_dims(beta, data)?;
    if !prior.rho_in_support(rho) {
        return Ok(f64::NEG_INFINITY);
    }
    let log_det = data.log_det(rho)?;
    Ok(log_det - data.residual_ss(beta, rho) / (2.0 * sigma2))
}

/// `-2 ln L(θ̂) + (k + 2) ln n`.
pub fn bic(theta_hat: &Theta, data: &FslmData) -> Result<f64> {
    let ll = log_likelihood(theta_hat, data)?;
    Ok(-2.0 * ll + (data.k() as f64 + 2.0) * (data.n() as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{grid_contiguity, row_standardize, weights_from_edges, Contiguity};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn toy_data(rho_w: bool) -> FslmData {
        let w = if rho_w {
            row_standardize(&grid_contiguity(2, 4, Contiguity::Rook).unwrap())
        } else {
            SpatialWeights::zeros(8)
        };
        let z = DMatrix::from_column_slice(8, 1, &[1.2, 0.4, 2.0, 1.5, 0.9, 1.1, 0.3, 1.7]);
        let y = DVector::from_vec(vec![2.9, 1.2, 4.4, 3.6, 2.5, 2.2, 1.0, 3.9]);
        FslmData::new(y, z, w).unwrap()
    }

    #[test]
    fn likelihood_at_origin() {
        let data = FslmData::new(
            DVector::zeros(5),
            DMatrix::from_element(5, 2, 0.3),
            SpatialWeights::zeros(5),
        )
        .unwrap();
        let theta = Theta::new(DVector::zeros(2), 1.0, 0.0).unwrap();
        assert_relative_eq!(
            log_likelihood(&theta, &data).unwrap(),
            -2.5 * (2.0 * PI).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn likelihood_two_unit_hand_computation() {
        let w = weights_from_edges(2, &[(0, 1)]).unwrap();
        let data = FslmData::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            w,
        )
        .unwrap();
        let theta = Theta::new(DVector::from_vec(vec![0.5]), 2.0, 0.5).unwrap();
        // Ay = (1 - 1, 2 - 0.5) = (0, 1.5); r = (-0.5, 2.0); ‖r‖² = 4.25
        let want = -(2.0 * PI).ln() - 2.0f64.ln() - 4.25 / 4.0 + 0.75f64.ln();
        assert_relative_eq!(log_likelihood(&theta, &data).unwrap(), want, epsilon = 1e-13);
    }

    #[test]
    fn likelihood_rejects_bad_sigma() {
        let data = toy_data(false);
        let theta = Theta {
            beta: DVector::zeros(1),
            sigma2: 0.0,
            rho: 0.0,
        };
        assert!(log_likelihood(&theta, &data).is_err());
        assert!(Theta::new(DVector::zeros(1), -1.0, 0.0).is_err());
    }

    #[test]
    fn sigma2_conditional_arithmetic() {
        let data = FslmData::new(
            DVector::from_vec(vec![1.0, 0.0, -1.0, 0.0]),
            DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]),
            SpatialWeights::zeros(4),
        )
        .unwrap();
        let prior = PriorSpec::new(DVector::zeros(1), DMatrix::identity(1, 1), 0.001, 0.001, (0.0, 1.0)).unwrap();
        let (shape, scale) = sigma2_conditional_params(&DVector::zeros(1), 0.0, &data, &prior).unwrap();
        assert_relative_eq!(shape, 2.001, epsilon = 1e-15);
        assert_relative_eq!(scale, 1.001, epsilon = 1e-15);

        let exact = FslmData::new(
            DVector::from_vec(vec![2.0, 2.0, 2.0, 2.0]),
            DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]),
            SpatialWeights::zeros(4),
        )
        .unwrap();
        let prior = PriorSpec::new(DVector::zeros(1), DMatrix::identity(1, 1), 3.0, 0.5, (0.0, 1.0)).unwrap();
        let (shape, scale) = sigma2_conditional_params(&DVector::from_vec(vec![2.0]), 0.0, &exact, &prior).unwrap();
        assert_eq!((shape, scale), (5.0, 0.5));
    }

    #[test]
    fn beta_conditional_without_data_returns_prior() {
        let data = FslmData::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::zeros(3, 2),
            SpatialWeights::zeros(3),
        )
        .unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = DVector::from_vec(vec![0.3, -1.0]);
        let prior = PriorSpec::new(m.clone(), sigma.clone(), 1.0, 1.0, (0.0, 1.0)).unwrap();
        let c = beta_conditional_params(0.7, 0.2, &data, &prior).unwrap();
        assert!((c.mean - m).amax() < 1e-12);
        assert!((c.cov - sigma).amax() < 1e-12);
    }

    #[test]
    fn beta_conditional_diffuse_limit_is_ols() {
        let data = toy_data(true);
        let rho = 0.4;
        let prior = PriorSpec::new(
            DVector::zeros(1),
            DMatrix::identity(1, 1) * 1e6,
            0.001,
            0.001,
            (0.0, 1.0),
        )
        .unwrap();
        let c = beta_conditional_params(0.5, rho, &data, &prior).unwrap();
        let ay = data.filtered_response(rho);
        let z = data.z().column(0);
        let ols = z.dot(&ay) / z.dot(&z);
        assert!(((c.mean[0] - ols) / ols).abs() < 1e-4);
    }

    #[test]
    fn beta_conditional_scalar_conjugacy() {
        // Ones column: normal-normal update with known variance.
        let n = 6;
        let y = DVector::from_vec(vec![0.5, 1.5, 0.2, 2.2, 1.1, 0.7]);
        let data = FslmData::new(y.clone(), DMatrix::from_element(n, 1, 1.0), SpatialWeights::zeros(n)).unwrap();
        let (m0, v0, s2) = (0.4, 2.5, 0.8);
        let prior = PriorSpec::new(
            DVector::from_vec(vec![m0]),
            DMatrix::from_element(1, 1, v0),
            1.0,
            1.0,
            (0.0, 1.0),
        )
        .unwrap();
        let c = beta_conditional_params(s2, 0.0, &data, &prior).unwrap();
        let post_prec = 1.0 / v0 + n as f64 / s2;
        let post_mean = (m0 / v0 + y.sum() / s2) / post_prec;
        assert_relative_eq!(c.mean[0], post_mean, epsilon = 1e-12);
        assert_relative_eq!(c.cov[(0, 0)], 1.0 / post_prec, epsilon = 1e-12);
    }

    #[test]
    fn rho_conditional_bookkeeping() {
        let data = toy_data(true);
        let prior = PriorSpec::diffuse(1);
        let beta = DVector::from_vec(vec![1.8]);
        let s2 = 0.6;
        assert_eq!(
            rho_log_conditional(-0.1, &beta, s2, &data, &prior).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            rho_log_conditional(1.2, &beta, s2, &data, &prior).unwrap(),
            f64::NEG_INFINITY
        );
        let n = data.n() as f64;
        let at0 = rho_log_conditional(0.0, &beta, s2, &data, &prior).unwrap();
        let ll0 = log_likelihood(&Theta::new(beta.clone(), s2, 0.0).unwrap(), &data).unwrap();
        assert_relative_eq!(at0 - 0.5 * n * (2.0 * PI * s2).ln(), ll0, epsilon = 1e-12);
        for (r1, r2) in [(0.1, 0.6), (0.3, 0.9), (0.05, 0.5)] {
            let dc = rho_log_conditional(r1, &beta, s2, &data, &prior).unwrap()
                - rho_log_conditional(r2, &beta, s2, &data, &prior).unwrap();
            let dl = log_likelihood(&Theta::new(beta.clone(), s2, r1).unwrap(), &data).unwrap()
                - log_likelihood(&Theta::new(beta.clone(), s2, r2).unwrap(), &data).unwrap();
            assert!((dc - dl).abs() < 1e-10);
        }
    }

    #[test]
    fn rho_conditional_constant_without_neighbours() {
        let data = toy_data(false);
        let prior = PriorSpec::diffuse(1);
        let beta = DVector::from_vec(vec![2.0]);
        let want = -data.residual_ss(&beta, 0.0) / (2.0 * 0.5);
        for rho in [0.0, 0.25, 0.5, 0.99] {
            assert_relative_eq!(
                rho_log_conditional(rho, &beta, 0.5, &data, &prior).unwrap(),
                want,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rho_conditional_normalizes_by_trapezoid() {
        let data = toy_data(true);
        let prior = PriorSpec::diffuse(1);
        let beta = DVector::from_vec(vec![1.9]);
        let s2 = 0.4;
        let m = 10_000;
        let h = 1.0 / m as f64;
        let logs: Vec<f64> = (0..=m)
            .map(|i| match rho_log_conditional(i as f64 * h, &beta, s2, &data, &prior) {
                // the density vanishes where I - ρW is singular
                Err(FslmError::Singular { .. }) => f64::NEG_INFINITY,
                other => other.unwrap(),
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let trap = |d: &[f64]| h * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[m]));
        let norm = trap(&dens);
        let normalized: Vec<f64> = dens.iter().map(|d| d / norm).collect();
        assert!((trap(&normalized) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bic_penalty_and_monotonicity() {
        assert_relative_eq!(9.0 * 121f64.ln(), 43.16, epsilon = 0.01);
        let data = toy_data(true);
        let good = Theta::new(DVector::from_vec(vec![1.9]), 0.3, 0.3).unwrap();
        let bad = Theta::new(DVector::from_vec(vec![0.5]), 0.3, 0.3).unwrap();
        let (lg, lb) = (
            log_likelihood(&good, &data).unwrap(),
            log_likelihood(&bad, &data).unwrap(),
        );
        let (bg, bb) = (bic(&good, &data).unwrap(), bic(&bad, &data).unwrap());
        assert_eq!(lg > lb, bg < bb);
        assert_relative_eq!(bg, -2.0 * lg + 3.0 * 8f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::new(DVector::zeros(2), DMatrix::identity(3, 3), 1.0, 1.0, (0.0, 1.0)).is_err());
        assert!(PriorSpec::new(
            DVector::zeros(1),
            DMatrix::from_element(1, 1, -1.0),
            1.0,
            1.0,
            (0.0, 1.0)
        )
        .is_err());
        assert!(PriorSpec::new(DVector::zeros(1), DMatrix::identity(1, 1), 0.0, 1.0, (0.0, 1.0)).is_err());
        assert!(PriorSpec::new(DVector::zeros(1), DMatrix::identity(1, 1), 1.0, 1.0, (1.0, 1.0)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(PriorSpec::new(DVector::zeros(2), asym, 1.0, 1.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn data_dimension_checks() {
        assert!(FslmData::new(DVector::zeros(3), DMatrix::zeros(4, 1), SpatialWeights::zeros(3)).is_err());
        assert!(FslmData::new(DVector::zeros(3), DMatrix::zeros(3, 1), SpatialWeights::zeros(4)).is_err());
        assert!(FslmData::new(
            DVector::from_element(3, f64::NAN),
            DMatrix::zeros(3, 1),
            SpatialWeights::zeros(3)
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn beta_conditional_cov_is_spd(
            seed in any::<u64>(),
            sigma2 in 0.01f64..10.0,
            rho in 0.0f64..0.95,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::substream(seed, 0);
            let (n, k) = (12, 3);
            let z = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let sigma = &a * a.transpose() + DMatrix::identity(k, k) * 0.1;
            let w = row_standardize(&grid_contiguity(3, 4, Contiguity::Queen).unwrap());
            let data = FslmData::new(y, z, w).unwrap();
            let prior = PriorSpec::new(DVector::zeros(k), sigma, 1.0, 1.0, (0.0, 1.0)).unwrap();
            let c = beta_conditional_params(sigma2, rho, &data, &prior).unwrap();
            prop_assert!((&c.cov - c.cov.transpose()).amax() == 0.0);
            prop_assert!(c.cov.clone().cholesky().is_some());
        }
    }
}
