//! B-spline bases, least-squares smoothing of sampled curves, and the
//! orthonormal score transform.
//!
//! B-splines are not orthonormal, so inner products between two expansions
//! `X = Σ c_k φ_k` and `γ = Σ b_k φ_k` are `cᵀ G b` with `G` the Gram matrix.
//! Writing `G = L Lᵀ`, the scores `z = Lᵀ c` (row form `Z = C L`) and the
//! coefficients `β = Lᵀ b` turn that inner product into the plain dot
//! product `z · β`, which is what the regression layer consumes.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FslmError, Result};
use crate::linalg::{is_finite_matrix, LeastSquares};
use crate::quadrature::{gauss_legendre, scaled_rule};

/// Serialized form of a basis: `{"domain": [a, b], "order": 4, "n_basis": 7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub domain: [f64; 2],
    pub order: usize,
    pub n_basis: usize,
}

/// A clamped B-spline basis with uniform interior knots.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    domain_start: f64,
    domain_end: f64,
    order: usize,
    n_basis: usize,
    knots: Vec<f64>,
    gram: DMatrix<f64>,
    gram_chol: DMatrix<f64>,
}

/// Build `n_basis` B-splines of the given order (degree + 1) on
/// `[domain_start, domain_end]`.
pub fn build_bspline_basis(domain_start: f64, domain_end: f64, n_basis: usize, order: usize) -> Result<BasisSpec> {
    BasisSpec::new(domain_start, domain_end, n_basis, order)
}

impl BasisSpec {
    pub fn new(domain_start: f64, domain_end: f64, n_basis: usize, order: usize) -> Result<Self> {
        if order < 1 || n_basis < order {
            return Err(FslmError::InvalidDimension(format!(
                "need n_basis >= order >= 1, got n_basis = {n_basis}, order = {order}"
            )));
        }
        if !(domain_start.is_finite() && domain_end.is_finite()) || domain_start >= domain_end {
            return Err(FslmError::InvalidDomain {
                start: domain_start,
                end: domain_end,
            });
        }

        let n_interior = n_basis - order;
        let width = domain_end - domain_start;
        let mut knots = Vec::with_capacity(n_basis + order);
        knots.extend(std::iter::repeat_n(domain_start, order));
        for i in 1..=n_interior {
            knots.push(domain_start + width * i as f64 / (n_interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(domain_end, order));

        let mut basis = BasisSpec {
            domain_start,
            domain_end,
            order,
            n_basis,
            knots,
            gram: DMatrix::zeros(n_basis, n_basis),
            gram_chol: DMatrix::zeros(n_basis, n_basis),
        };
        basis.gram = basis.compute_gram();
        basis.gram_chol = basis
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| FslmError::NotPositiveDefinite("B-spline Gram matrix".into()))?
            .l();
        Ok(basis)
    }

    pub fn from_config(config: &BasisConfig) -> Result<Self> {
        Self::new(config.domain[0], config.domain[1], config.n_basis, config.order)
    }

    pub fn config(&self) -> BasisConfig {
        BasisConfig {
            domain: [self.domain_start, self.domain_end],
            order: self.order,
            n_basis: self.n_basis,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_start, self.domain_end)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Entries `∫ φ_k φ_j dt`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower-triangular `L` with `G = L Lᵀ`.
    pub fn gram_chol(&self) -> &DMatrix<f64> {
        &self.gram_chol
    }

    /// Gauss–Legendre nodes per knot span used for the Gram matrix.
    pub fn quadrature_nodes(&self) -> usize {
        (2 * self.order).div_ceil(2) + 1
    }

    /// Knot spans of positive length, as `(span index, left, right)`.
    fn spans(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (self.order - 1..self.n_basis)
            .map(move |s| (s, self.knots[s], self.knots[s + 1]))
            .filter(|(_, a, b)| b > a)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= self.domain_start && t <= self.domain_end) {
            return Err(FslmError::OutsideDomain {
                t,
                start: self.domain_start,
                end: self.domain_end,
            });
        }
        Ok(())
    }

    /// Span index `s` with `knots[s] <= t < knots[s + 1]`; the right
    /// endpoint belongs to the last span.
    fn find_span(&self, t: f64) -> usize {
        let p = self.order - 1;
        if t >= self.knots[self.n_basis] {
            return self.n_basis - 1;
        }
        let (mut low, mut high) = (p, self.n_basis);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if t < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        low
    }

    /// Values of the `order` functions that are nonzero on `span`
    /// (Cox–de Boor triangle), for basis indices `span - order + 1 ..= span`.
    fn nonzero_at(&self, span: usize, t: f64, out: &mut [f64]) {
        let p = self.order - 1;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// All `n_basis` function values at `t`.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        self.check_domain(t)?;
        let mut values = DVector::zeros(self.n_basis);
        let mut local = vec![0.0; self.order];
        let span = self.find_span(t);
        self.nonzero_at(span, t, &mut local);
        let first = span + 1 - self.order;
        for (k, v) in local.iter().enumerate() {
            values[first + k] = *v;
        }
        Ok(values)
    }

    /// `m × K` collocation matrix `Φ[j][k] = φ_k(t_j)`.
    pub fn design_matrix(&self, t: &[f64]) -> Result<DMatrix<f64>> {
        let mut phi = DMatrix::zeros(t.len(), self.n_basis);
        for (j, &tj) in t.iter().enumerate() {
            let row = self.eval(tj)?;
            phi.row_mut(j).copy_from(&row.transpose());
        }
        Ok(phi)
    }

    fn compute_gram(&self) -> DMatrix<f64> {
        let (nodes, weights) = gauss_legendre(self.quadrature_nodes());
        let mut gram = DMatrix::zeros(self.n_basis, self.n_basis);
        let mut local = vec![0.0; self.order];
        for (span, a, b) in self.spans() {
            let first = span + 1 - self.order;
            for (t, w) in scaled_rule(&nodes, &weights, a, b) {
                self.nonzero_at(span, t, &mut local);
                for r in 0..self.order {
                    for c in 0..=r {
                        gram[(first + r, first + c)] += w * local[r] * local[c];
                    }
                }
            }
        }
        gram.fill_upper_triangle_with_lower_triangle();
        gram
    }

    /// `∫ φ_k(t) f(t) dt` for every k, by per-span Gauss–Legendre with
    /// `nodes_per_span` points.
    pub fn inner_products<F: Fn(f64) -> f64>(&self, f: F, nodes_per_span: usize) -> DVector<f64> {
        let (nodes, weights) = gauss_legendre(nodes_per_span);
        let mut out = DVector::zeros(self.n_basis);
        let mut local = vec![0.0; self.order];
        for (span, a, b) in self.spans() {
            let first = span + 1 - self.order;
            for (t, w) in scaled_rule(&nodes, &weights, a, b) {
                self.nonzero_at(span, t, &mut local);
                let ft = f(t);
                for (r, v) in local.iter().enumerate() {
                    out[first + r] += w * v * ft;
                }
            }
        }
        out
    }

    /// B-spline coefficients of the L² projection of `f` onto the basis.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        let rhs = self.inner_products(f, 24);
        let y = self
            .gram_chol
            .solve_lower_triangular(&rhs)
            .expect("Cholesky factor has positive diagonal");
        self.gram_chol
            .transpose()
            .solve_upper_triangular(&y)
            .expect("Cholesky factor has positive diagonal")
    }

    /// Score coordinates `β = Lᵀ b` of an expansion with coefficients `b`.
    pub fn coef_to_scores(&self, coef: &DVector<f64>) -> DVector<f64> {
        self.gram_chol.transpose() * coef
    }

    /// Inverse of [`coef_to_scores`](Self::coef_to_scores): `b = L⁻ᵀ β`.
    pub fn scores_to_coef(&self, scores: &DVector<f64>) -> DVector<f64> {
        self.gram_chol
            .transpose()
            .solve_upper_triangular(scores)
            .expect("Cholesky factor has positive diagonal")
    }

    /// Evaluate `Σ_k coef_k φ_k` at each point.
    pub fn evaluate(&self, coef: &DVector<f64>, t_eval: &[f64]) -> Result<Vec<f64>> {
        if coef.len() != self.n_basis {
            return Err(FslmError::InvalidDimension(format!(
                "expected {} coefficients, got {}",
                self.n_basis,
                coef.len()
            )));
        }
        t_eval.iter().map(|&t| Ok(self.eval(t)?.dot(coef))).collect()
    }
}

/// `n` curves expanded in a common basis.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    basis: BasisSpec,
    coef: DMatrix<f64>,
    scores: DMatrix<f64>,
}

impl FunctionalSample {
    pub fn from_coef(basis: BasisSpec, coef: DMatrix<f64>) -> Result<Self> {
        if coef.nrows() < 1 {
            return Err(FslmError::InvalidDimension("sample needs at least one curve".into()));
        }
        if coef.ncols() != basis.n_basis() {
            return Err(FslmError::InvalidDimension(format!(
                "coefficient matrix has {} columns for a basis of {} functions",
                coef.ncols(),
                basis.n_basis()
            )));
        }
        if !is_finite_matrix(&coef) {
            return Err(FslmError::InvalidParameter("non-finite basis coefficient".into()));
        }
        let scores = &coef * basis.gram_chol();
        Ok(Self { basis, coef, scores })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn n_curves(&self) -> usize {
        self.coef.nrows()
    }

    /// `n × K` B-spline coefficients, one curve per row.
    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    /// `Z = C L`.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    /// Curves evaluated on a grid, one curve per row.
    pub fn fitted_values(&self, t_grid: &[f64]) -> Result<DMatrix<f64>> {
        let phi = self.basis.design_matrix(t_grid)?;
        Ok(&self.coef * phi.transpose())
    }
}

/// Least-squares fit of each row of `obs` (curve `i` sampled at `t_grid`) to
/// the basis.
pub fn smooth_curves(t_grid: &[f64], obs: &DMatrix<f64>, basis: &BasisSpec) -> Result<FunctionalSample> {
    let m = t_grid.len();
    if obs.ncols() != m {
        return Err(FslmError::InvalidDimension(format!(
            "observation matrix has {} columns for {m} grid points",
            obs.ncols()
        )));
    }
    if m < basis.n_basis() {
        return Err(FslmError::RankDeficient(format!(
            "{m} grid points for {} basis functions",
            basis.n_basis()
        )));
    }
    if t_grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
    {
        return Err(FslmError::InvalidParameter("grid must be strictly increasing".into()));
    }
    if !is_finite_matrix(obs) {
        return Err(FslmError::InvalidParameter("non-finite observation".into()));
    }
    let phi = basis.design_matrix(t_grid)?;
    let ls = LeastSquares::new(&phi)?;
    let coef = ls.solve(&obs.transpose()).transpose();
    FunctionalSample::from_coef(basis.clone(), coef)
}

/// The score matrix `Z = C L`.
pub fn functional_scores(sample: &FunctionalSample) -> DMatrix<f64> {
    sample.scores().clone()
}

/// `γ̂(t) = Σ_k b_k φ_k(t)` with `b = L⁻ᵀ β`.
pub fn reconstruct_gamma(beta: &DVector<f64>, basis: &BasisSpec, t_eval: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != basis.n_basis() {
        return Err(FslmError::InvalidDimension(format!(
            "expected {} score coefficients, got {}",
            basis.n_basis(),
            beta.len()
        )));
    }
    basis.evaluate(&basis.scores_to_coef(beta), t_eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_basis_on_unit_interval() {
        let b = build_bspline_basis(0.0, 1.0, 1, 1).unwrap();
        assert_relative_eq!(b.gram()[(0, 0)], 1.0, epsilon = 1e-15);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(b.eval(t).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn seven_cubic_splines_on_hundred() {
        let b = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        assert_eq!(b.knots().len(), 11);
        assert_eq!(&b.knots()[4..7], &[25.0, 50.0, 75.0]);
        assert_eq!(b.gram().shape(), (7, 7));
        assert!(b.gram().clone().cholesky().is_some());
        assert!(b.gram_chol().diagonal().iter().all(|d| *d > 0.0));
        let g = b.gram();
        for i in 0..7 {
            for j in 0..7 {
                assert!((g[(i, j)] - g[(j, i)]).abs() <= 1e-12 * g[(i, i)].abs());
            }
        }
    }

    #[test]
    fn bernstein_gram_corner() {
        let b = build_bspline_basis(0.0, 1.0, 4, 4).unwrap();
        assert_relative_eq!(b.gram()[(0, 0)], 1.0 / 7.0, epsilon = 1e-14);
        // ∫ B_{0,3} B_{1,3} = ∫ (1-t)^3 3t(1-t)^2 = 3 B(2,6) = 3/42
        assert_relative_eq!(b.gram()[(0, 1)], 3.0 / 42.0, epsilon = 1e-14);
        let t: f64 = 0.3;
        let v = b.eval(t).unwrap();
        assert_relative_eq!(v[0], (1.0 - t).powi(3), epsilon = 1e-14);
        assert_relative_eq!(v[3], t.powi(3), epsilon = 1e-14);
    }

    #[test]
    fn dimension_and_domain_errors() {
        assert!(matches!(
            build_bspline_basis(0.0, 1.0, 3, 4),
            Err(FslmError::InvalidDimension(_))
        ));
        assert!(matches!(
            build_bspline_basis(1.0, 1.0, 7, 4),
            Err(FslmError::InvalidDomain { .. })
        ));
        assert!(matches!(
            build_bspline_basis(2.0, 1.0, 7, 4),
            Err(FslmError::InvalidDomain { .. })
        ));
        assert!(build_bspline_basis(0.0, 1.0, 0, 0).is_err());
    }

    #[test]
    fn config_round_trip() {
        let b = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        let json = serde_json::to_string(&b.config()).unwrap();
        assert_eq!(json, r#"{"domain":[0.0,100.0],"order":4,"n_basis":7}"#);
        let back = BasisSpec::from_config(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.knots(), b.knots());
    }

    #[test]
    fn smoothing_constant_curves() {
        let basis = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        let t: Vec<f64> = (0..=100).map(f64::from).collect();
        let obs = DMatrix::from_element(3, t.len(), 1.0);
        let sample = smooth_curves(&t, &obs, &basis).unwrap();
        for v in sample.coef().iter() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let fitted = sample.fitted_values(&t).unwrap();
        assert!(fitted.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn smoothing_recovers_exact_expansion() {
        let basis = build_bspline_basis(0.0, 10.0, 6, 3).unwrap();
        let t: Vec<f64> = (0..40).map(|j| j as f64 * 10.0 / 39.0).collect();
        let truth = DMatrix::from_row_slice(2, 6, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2]);
        let obs = &truth * basis.design_matrix(&t).unwrap().transpose();
        let sample = smooth_curves(&t, &obs, &basis).unwrap();
        assert!((sample.coef() - &truth).amax() < 1e-8);
    }

    #[test]
    fn smoothing_is_a_projection() {
        let basis = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        let t: Vec<f64> = (0..=100).map(f64::from).collect();
        let obs = DMatrix::from_fn(2, t.len(), |i, j| {
            (t[j] * (i + 1) as f64 * 0.05).sin() + 0.01 * j as f64
        });
        let first = smooth_curves(&t, &obs, &basis).unwrap();
        let again = smooth_curves(&t, &first.fitted_values(&t).unwrap(), &basis).unwrap();
        assert!((first.coef() - again.coef()).amax() < 1e-12);
    }

    #[test]
    fn clustered_grid_is_rank_deficient() {
        let basis = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        let t: Vec<f64> = (0..20).map(|j| j as f64 * 0.5).collect();
        let obs = DMatrix::from_element(1, t.len(), 1.0);
        assert!(matches!(
            smooth_curves(&t, &obs, &basis),
            Err(FslmError::RankDeficient(_))
        ));
        let short = [0.0, 50.0, 100.0];
        let obs = DMatrix::from_element(1, 3, 1.0);
        assert!(matches!(
            smooth_curves(&short, &obs, &basis),
            Err(FslmError::RankDeficient(_))
        ));
    }

    #[test]
    fn grid_outside_domain_or_unsorted() {
        let basis = build_bspline_basis(0.0, 1.0, 4, 4).unwrap();
        let obs = DMatrix::from_element(1, 5, 1.0);
        let outside = [0.0, 0.2, 0.4, 0.6, 1.5];
        assert!(matches!(
            smooth_curves(&outside, &obs, &basis),
            Err(FslmError::OutsideDomain { .. })
        ));
        let unsorted = [0.0, 0.4, 0.2, 0.6, 1.0];
        assert!(matches!(
            smooth_curves(&unsorted, &obs, &basis),
            Err(FslmError::InvalidParameter(_))
        ));
    }

    #[test]
    fn single_curve_and_zero_curves() {
        let basis = build_bspline_basis(0.0, 1.0, 5, 3).unwrap();
        let t: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let sample = smooth_curves(&t, &DMatrix::zeros(1, 11), &basis).unwrap();
        assert_eq!(sample.n_curves(), 1);
        assert!(functional_scores(&sample).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scores_equal_coef_for_orthonormal_basis() {
        // Order-1 splines on a unit-width span are orthonormal: G = I.
        let basis = build_bspline_basis(0.0, 1.0, 1, 1).unwrap();
        let coef = DMatrix::from_column_slice(3, 1, &[0.5, -1.0, 2.0]);
        let sample = FunctionalSample::from_coef(basis, coef.clone()).unwrap();
        assert_eq!(sample.scores(), &coef);
    }

    #[test]
    fn reconstruct_zero_and_round_trip() {
        let basis = build_bspline_basis(0.0, 100.0, 7, 4).unwrap();
        let t: Vec<f64> = (0..=20).map(|j| j as f64 * 5.0).collect();
        let zero = reconstruct_gamma(&DVector::zeros(7), &basis, &t).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));

        let b = DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3, -1.2, 0.7, 0.1]);
        let beta = basis.coef_to_scores(&b);
        let got = reconstruct_gamma(&beta, &basis, &t).unwrap();
        let want = basis.evaluate(&b, &t).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
        assert!(matches!(
            reconstruct_gamma(&beta, &basis, &[101.0]),
            Err(FslmError::OutsideDomain { .. })
        ));
        assert!(reconstruct_gamma(&DVector::zeros(3), &basis, &t).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_nonnegativity(
            t in 0.0f64..=100.0,
            n_basis in 4usize..12,
            order in 1usize..5,
        ) {
            prop_assume!(n_basis >= order);
            let basis = build_bspline_basis(0.0, 100.0, n_basis, order).unwrap();
            let v = basis.eval(t).unwrap();
            prop_assert!(v.iter().all(|x| *x >= 0.0));
            prop_assert!((v.sum() - 1.0).abs() < 1e-10);
        }
    }
}
