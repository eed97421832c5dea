//! Synthetic datasets: noisy trigonometric covariate curves on an
//! integer grid, a lattice of spatial units, and a response generated from
//! `(I - ρW)y = Zβ + ε`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{smooth_curves, BasisSpec, FunctionalSample};
use crate::error::{FslmError, Result};
use crate::model::{FslmData, Theta};
use crate::rng::substream;
use crate::spatial::{grid_contiguity, row_standardize, spatial_filter, Contiguity, SpatialWeights};

const COVARIATE_STREAM: u64 = 0;
const RESPONSE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub lattice: (usize, usize),
    pub contiguity: Contiguity,
    pub grid_t: Vec<f64>,
    pub noise_sd: f64,
    pub rho_true: f64,
    pub sigma2_true: f64,
    pub n_basis: usize,
    pub order: usize,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            lattice: (11, 11),
            contiguity: Contiguity::Rook,
            grid_t: (0..=100).map(f64::from).collect(),
            noise_sd: 1.0,
            rho_true: 0.5,
            sigma2_true: 1.0,
            n_basis: 7,
            order: 4,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn n_units(&self) -> usize {
        self.lattice.0 * self.lattice.1
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho_true) {
            return Err(FslmError::InvalidParameter(format!(
                "rho must lie in [0, 1), got {}",
                self.rho_true
            )));
        }
        if !(self.sigma2_true >= 0.0 && self.sigma2_true.is_finite()) {
            return Err(FslmError::InvalidParameter(format!("sigma2 = {}", self.sigma2_true)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(FslmError::InvalidParameter(format!("noise sd = {}", self.noise_sd)));
        }
        if self.n_units() == 0 {
            return Err(FslmError::InvalidDimension("empty lattice".into()));
        }
        if self.grid_t.len() < 2
            || self
                .grid_t
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        {
            return Err(FslmError::InvalidParameter("grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Basis on `[t_min, t_max]` of the grid.
    pub fn basis(&self) -> Result<BasisSpec> {
        let t0 = self.grid_t[0];
        let t1 = *self.grid_t.last().expect("validated grid is nonempty");
        BasisSpec::new(t0, t1, self.n_basis, self.order)
    }

    /// Row-standardized lattice contiguity.
    pub fn weights(&self) -> Result<SpatialWeights> {
        let (r, c) = self.lattice;
        Ok(row_standardize(&grid_contiguity(r, c, self.contiguity)?))
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub data: FslmData,
    pub true_theta: Theta,
    /// B-spline coefficients of the projection of `γ`.
    pub true_gamma_coef: DVector<f64>,
    pub epsilon: DVector<f64>,
}

/// Everything [`simulate`] produces.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub raw_curves: DMatrix<f64>,
    pub sample: FunctionalSample,
    pub dataset: SimulatedDataset,
}

/// `γ(t) = e^{-t/10} ((t/10)² + 3t/10 - 4)`.
pub fn true_gamma(t: f64) -> f64 {
    let s = t / 10.0;
    (-s).exp() * (s * s + 3.0 * s - 4.0)
}

/// `X_i(t_j) = cos t_j + sin t_j + ε_ij` on the spec grid, one curve per row.
pub fn simulate_raw_covariates(spec: &SimulationSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut rng = substream(spec.seed, COVARIATE_STREAM);
    let n = spec.n_units();
    let m = spec.grid_t.len();
    let mut x = DMatrix::zeros(n, m);
    for i in 0..n {
        for (j, &t) in spec.grid_t.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, j)] = t.cos() + t.sin() + spec.noise_sd * e;
        }
    }
    Ok(x)
}

/// Raw covariates smoothed onto `basis`.
pub fn simulate_covariates(spec: &SimulationSpec, basis: &BasisSpec) -> Result<FunctionalSample> {
    let raw = simulate_raw_covariates(spec)?;
    smooth_curves(&spec.grid_t, &raw, basis)
}

/// Generate `y` from `(I - ρW)y = Zβ + ε`, with `β` the score coordinates of
/// the projection of `gamma` and `ε ~ N(0, σ²I)`.
pub fn simulate_response<G: Fn(f64) -> f64>(
    sample: &FunctionalSample,
    w: &SpatialWeights,
    gamma: G,
    rho: f64,
    sigma2: f64,
    seed: u64,
) -> Result<SimulatedDataset> {
    let n = sample.n_curves();
    if w.n() != n {
        return Err(FslmError::InvalidDimension(format!(
            "{n} curves for {} spatial units",
            w.n()
        )));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) || !rho.is_finite() {
        return Err(FslmError::InvalidParameter(format!("rho = {rho}, sigma2 = {sigma2}")));
    }
    let basis = sample.basis();
    let gamma_coef = basis.project(gamma);
    let beta = basis.coef_to_scores(&gamma_coef);

    let mut rng = substream(seed, RESPONSE_STREAM);
    let sd = sigma2.sqrt();
    let epsilon = DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));

    let rhs = sample.scores() * &beta + &epsilon;
    let y = spatial_filter(w, rho)
        .lu()
        .solve(&rhs)
        .filter(|y| y.iter().all(|v| v.is_finite()))
        .ok_or(FslmError::Singular { rho })?;

    let data = FslmData::new(y, sample.scores().clone(), w.clone())?;
    // σ² = 0 is allowed for noiseless checks; Theta needs it positive.
    let true_theta = Theta { beta, sigma2, rho };
    Ok(SimulatedDataset {
        data,
        true_theta,
        true_gamma_coef: gamma_coef,
        epsilon,
    })
}

/// Covariates, weights and response for one seeded scenario.
pub fn simulate(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let basis = spec.basis()?;
    let raw_curves = simulate_raw_covariates(spec)?;
    let sample = smooth_curves(&spec.grid_t, &raw_curves, &basis)?;
    let w = spec.weights()?;
    let dataset = simulate_response(&sample, &w, true_gamma, spec.rho_true, spec.sigma2_true, spec.seed)?;
    Ok(Simulation {
        raw_curves,
        sample,
        dataset,
    })
}
