//! Estimation of the functional spatial lag model
//!
//! `y = ρWy + ∫X(t)γ(t)dt + ε`, with the functional covariate expanded in a
//! B-spline basis so that the integral becomes `Zβ` for a score matrix `Z`.
//!
//! * [`basis`]: B-spline bases, curve smoothing and scores.
//! * [`spatial`]: weight matrices, `ln|I - ρW|`, Moran's I.
//! * [`model`]: likelihood, priors and full conditionals.
//! * [`sampler`]: Metropolis-within-Gibbs posterior sampling.
//! * [`mle`]: concentrated maximum likelihood.
//! * [`simgen`]: synthetic datasets.

pub mod basis;
pub mod error;
pub mod io;
mod linalg;
pub mod mle;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod spatial;

pub use basis::{build_bspline_basis, reconstruct_gamma, smooth_curves, BasisConfig, BasisSpec, FunctionalSample};
pub use error::{FslmError, Result};
pub use mle::{fit_ml, MlEstimate};
pub use model::{FslmData, PriorSpec, Theta};
pub use sampler::{run_mwg, summarize, Chain, MhConfig, PosteriorSummary, ProposalKernel};
pub use simgen::{simulate, true_gamma, SimulatedDataset, Simulation, SimulationSpec};
pub use spatial::{
    grid_contiguity, log_det_a, morans_i, row_standardize, weights_from_edges, Contiguity, MoranResult, SpatialWeights,
};
