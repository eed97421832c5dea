//! Truncated maximum likelihood via the concentrated likelihood in `ρ`.
//!
//! For fixed `ρ`, `β̂(ρ) = (ZᵀZ)⁻¹ZᵀA(ρ)y` and `σ̂²(ρ) = ‖A(ρ)y - Zβ̂(ρ)‖²/n`.
//! Because `A(ρ)y = y - ρWy` is affine in `ρ`, both OLS fits are done once
//! and `β̂(ρ) = β̂_y - ρβ̂_Wy`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{FslmError, Result};
use crate::linalg::LeastSquares;
use crate::model::{bic, log_likelihood, FslmData, Theta};

const GOLDEN_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 200;

#[derive(Debug, Clone)]
pub struct MlEstimate {
    pub theta: Theta,
    pub log_likelihood: f64,
    pub bic: f64,
    /// Square roots of the diagonal of the inverse observed information;
    /// `None` when the numerical Hessian is not negative definite.
    pub std_errors: Option<Theta>,
    /// The 200-point scan found more than one local maximum.
    pub multimodal: bool,
}

/// Profile of the log-likelihood over `ρ`.
pub struct ConcentratedLikelihood<'a> {
    data: &'a FslmData,
    beta_y: DVector<f64>,
    beta_wy: DVector<f64>,
    e_y: DVector<f64>,
    e_wy: DVector<f64>,
}

impl<'a> ConcentratedLikelihood<'a> {
    pub fn new(data: &'a FslmData) -> Result<Self> {
        let ls = LeastSquares::new(data.z())?;
        let beta_y = ls.solve_vec(data.y());
        let beta_wy = ls.solve_vec(data.wy());
        let e_y = data.y() - data.z() * &beta_y;
        let e_wy = data.wy() - data.z() * &beta_wy;
        Ok(Self {
            data,
            beta_y,
            beta_wy,
            e_y,
            e_wy,
        })
    }

    pub fn beta_hat(&self, rho: f64) -> DVector<f64> {
        &self.beta_y - &self.beta_wy * rho
    }

    pub fn sigma2_hat(&self, rho: f64) -> f64 {
        let ss: f64 = self
            .e_y
            .iter()
            .zip(self.e_wy.iter())
            .map(|(a, b)| (a - rho * b).powi(2))
            .sum();
        ss / self.data.n() as f64
    }

    /// `-(n/2)(ln 2π + 1) - (n/2) ln σ̂²(ρ) + ln|I - ρW|`.
    pub fn value(&self, rho: f64) -> Result<f64> {
        let n = self.data.n() as f64;
        let s2 = self.sigma2_hat(rho);
        let log_det = self.data.log_det(rho)?;
        if s2 <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(-0.5 * n * ((2.0 * PI).ln() + 1.0) - 0.5 * n * s2.ln() + log_det)
    }
}

fn golden_section_max(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximize the concentrated likelihood over `rho_interval`.
pub fn fit_ml(data: &FslmData, rho_interval: (f64, f64)) -> Result<MlEstimate> {
    let (lo, hi) = rho_interval;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(FslmError::InvalidParameter(format!(
            "invalid rho interval ({lo}, {hi})"
        )));
    }
    let profile = ConcentratedLikelihood::new(data)?;
    let f = |rho: f64| profile.value(rho);

    let scan: Vec<(f64, f64)> = (0..SCAN_POINTS)
        .map(|i| {
            let rho = lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64;
            f(rho).map(|v| (rho, v))
        })
        .collect::<Result<_>>()?;
    let local_maxima = (0..SCAN_POINTS)
        .filter(|&i| {
            let v = scan[i].1;
            let left = i == 0 || scan[i - 1].1 < v;
            let right = i == SCAN_POINTS - 1 || scan[i + 1].1 < v;
            left && right
        })
        .count();
    let multimodal = local_maxima > 1;

    let mut rho_hat = golden_section_max(&f, lo, hi, GOLDEN_TOL)?;
    if multimodal {
        log::warn!("concentrated likelihood has {local_maxima} local maxima on [{lo}, {hi}]");
        let best = (0..SCAN_POINTS)
            .max_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1))
            .expect("scan is nonempty");
        let a = scan[best.saturating_sub(1)].0;
        let b = scan[(best + 1).min(SCAN_POINTS - 1)].0;
        let refined = golden_section_max(&f, a, b, GOLDEN_TOL)?;
        if f(refined)? > f(rho_hat)? {
            rho_hat = refined;
        }
    }
    for edge in [lo, hi] {
        if f(edge)? > f(rho_hat)? {
            rho_hat = edge;
        }
    }

    let theta = Theta::new(profile.beta_hat(rho_hat), profile.sigma2_hat(rho_hat), rho_hat)?;
    let ll = log_likelihood(&theta, data)?;
    let bic = bic(&theta, data)?;
    let std_errors = observed_information_std_errors(&theta, data);
    Ok(MlEstimate {
        theta,
        log_likelihood: ll,
        bic,
        std_errors,
        multimodal,
    })
}

/// Central-difference Hessian of the full log-likelihood in
/// `(β, σ², ρ)`, inverted.
fn observed_information_std_errors(theta: &Theta, data: &FslmData) -> Option<Theta> {
    let x0 = theta.to_vec();
    let p = x0.len();
    let f = |x: &[f64]| -> Option<f64> { log_likelihood(&Theta::from_slice(x), data).ok() };
    let steps: Vec<f64> = x0.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(&x0)?;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let eval = |di: f64, dj: f64| -> Option<f64> {
                let mut x = x0.clone();
                x[i] += di * steps[i];
                x[j] += dj * steps[j];
                f(&x)
            };
            let h = if i == j {
                (eval(1.0, 0.0)? - 2.0 * f0 + eval(-1.0, 0.0)?) / (steps[i] * steps[i])
            } else {
                (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                    / (4.0 * steps[i] * steps[j])
            };
            hess[(i, j)] = h;
            hess[(j, i)] = h;
        }
    }
    let info = -hess;
    let cov = info.cholesky()?.inverse();
    let se: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    Some(Theta::from_slice(&se))
}
