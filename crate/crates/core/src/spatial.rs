//! Spatial weight matrices, the Jacobian term `ln|I - ρW|`, and Moran's I.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{FslmError, Result};
use crate::rng::substream;

/// Sparse nonnegative `n × n` weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    n: usize,
    // Row i holds (j, w_ij) sorted by j, zeros omitted.
    rows: Vec<Vec<(usize, f64)>>,
    row_standardized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contiguity {
    Rook,
    Queen,
}

impl std::str::FromStr for Contiguity {
    type Err = FslmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rook" => Ok(Contiguity::Rook),
            "queen" => Ok(Contiguity::Queen),
            other => Err(FslmError::InvalidParameter(format!(
                "unknown contiguity scheme {other:?} (expected rook or queen)"
            ))),
        }
    }
}

/// Binary symmetric contiguity from an undirected edge list.
pub fn weights_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SpatialWeights> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j) in edges {
        for index in [i, j] {
            if index >= n {
                return Err(FslmError::IndexOutOfRange { index, n });
            }
        }
        if i == j {
            return Err(FslmError::SelfLoop(i));
        }
        rows[i].push((j, 1.0));
        rows[j].push((i, 1.0));
    }
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        row.dedup_by_key(|(j, _)| *j);
    }
    Ok(SpatialWeights {
        n,
        rows,
        row_standardized: false,
    })
}

/// Contiguity of a `rows × cols` lattice; unit `r * cols + c` is the cell in
/// row `r`, column `c`.
pub fn grid_contiguity(rows: usize, cols: usize, scheme: Contiguity) -> Result<SpatialWeights> {
    if rows == 0 || cols == 0 {
        return Err(FslmError::InvalidDimension(format!(
            "lattice must have at least one cell, got {rows} x {cols}"
        )));
    }
    let offsets: &[(isize, isize)] = match scheme {
        Contiguity::Rook => &[(0, 1), (1, 0)],
        Contiguity::Queen => &[(0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut edges = Vec::new();
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            for &(dr, dc) in offsets {
                let (r2, c2) = (r + dr, c + dc);
                if r2 >= 0 && r2 < rows as isize && c2 >= 0 && c2 < cols as isize {
                    edges.push(((r * cols as isize + c) as usize, (r2 * cols as isize + c2) as usize));
                }
            }
        }
    }
    weights_from_edges(rows * cols, &edges)
}

/// Divide every nonzero row by its sum. Rows without neighbours stay zero.
pub fn row_standardize(w: &SpatialWeights) -> SpatialWeights {
    let rows = w
        .rows
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().map(|(_, v)| v).sum();
            if sum > 0.0 {
                row.iter().map(|&(j, v)| (j, v / sum)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let isolated = w.isolated_units();
    if !isolated.is_empty() {
        log::warn!(
            "{} unit(s) without neighbours left as zero rows: {:?}",
            isolated.len(),
            isolated
        );
    }
    SpatialWeights {
        n: w.n,
        rows,
        row_standardized: true,
    }
}

impl SpatialWeights {
    pub fn zeros(n: usize) -> Self {
        SpatialWeights {
            n,
            rows: vec![Vec::new(); n],
            row_standardized: false,
        }
    }

    /// Build from `(i, j, w)` triplets (e.g. a weights CSV). Marked
    /// row-standardized when every nonempty row sums to one.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            for index in [i, j] {
                if index >= n {
                    return Err(FslmError::IndexOutOfRange { index, n });
                }
            }
            if i == j {
                return Err(FslmError::SelfLoop(i));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(FslmError::InvalidParameter(format!(
                    "weight w[{i}][{j}] = {v} must be finite and nonnegative"
                )));
            }
            if v > 0.0 {
                rows[i].push((j, v));
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(FslmError::InvalidParameter(format!("duplicate entry in row {i}")));
            }
        }
        let row_standardized = rows.iter().any(|r| !r.is_empty())
            && rows
                .iter()
                .all(|row| row.is_empty() || (row.iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs() <= 1e-12);
        Ok(SpatialWeights {
            n,
            rows,
            row_standardized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_standardized(&self) -> bool {
        self.row_standardized
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.rows[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Number of stored (directed) links.
    pub fn n_links(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v).sum()).collect()
    }

    /// `S₀ = Σ_ij w_ij`.
    pub fn total_weight(&self) -> f64 {
        self.row_sums().iter().sum()
    }

    pub fn isolated_units(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.rows[i].is_empty()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Triplets `(i, j, w_ij)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    fn is_symmetric(&self) -> bool {
        self.triplets().iter().all(|&(i, j, v)| self.get(j, i) == v)
    }

    /// `w_ij = 1/deg(i)` on a symmetric sparsity pattern.
    fn is_standardized_symmetric_pattern(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, row)| {
            let d = row.len() as f64;
            row.iter()
                .all(|&(j, v)| (v * d - 1.0).abs() <= 1e-12 && self.get(j, i) > 0.0)
        })
    }
}

/// `I - ρW` as a dense matrix.
pub fn spatial_filter(w: &SpatialWeights, rho: f64) -> DMatrix<f64> {
    let mut a = DMatrix::identity(w.n(), w.n());
    for (i, j, v) in w.triplets() {
        a[(i, j)] -= rho * v;
    }
    a
}

/// `ln|det(I - ρW)|` by dense LU with partial pivoting.
///
/// Fails with [`FslmError::Singular`] when the determinant is not positive or
/// a pivot vanishes relative to the matrix scale.
pub fn log_det_a(w: &SpatialWeights, rho: f64) -> Result<f64> {
    if !rho.is_finite() {
        return Err(FslmError::InvalidParameter(format!("rho = {rho}")));
    }
    if w.n() == 0 {
        return Ok(0.0);
    }
    let a = spatial_filter(w, rho);
    let scale = a.amax();
    let lu = a.lu();
    let mut sign = lu.p().determinant::<f64>();
    let mut log_abs = 0.0;
    for &u in lu.u().diagonal().iter() {
        if u.abs().partial_cmp(&(1e-13 * scale)) != Some(Ordering::Greater) {
            return Err(FslmError::Singular { rho });
        }
        if u < 0.0 {
            sign = -sign;
        }
        log_abs += u.abs().ln();
    }
    if sign <= 0.0 {
        return Err(FslmError::Singular { rho });
    }
    Ok(log_abs)
}

/// Repeated evaluation of `ln|I - ρW|` for a fixed `W`.
///
/// `Spectral` precomputes the eigenvalues once and evaluates
/// `Σ ln(1 - ρλ_i)` in O(n); `Lu` refactorizes on every call.
#[derive(Debug, Clone)]
pub enum LogDetEvaluator {
    Lu(SpatialWeights),
    Spectral(Vec<Complex<f64>>),
}

impl LogDetEvaluator {
    pub fn lu(w: &SpatialWeights) -> Self {
        LogDetEvaluator::Lu(w.clone())
    }

    /// Eigenvalues via a symmetric decomposition when `W` is symmetric or a
    /// row-standardized symmetric pattern, otherwise via the real Schur form.
    pub fn spectral(w: &SpatialWeights) -> Result<Self> {
        let n = w.n();
        if w.is_zero() {
            return Ok(LogDetEvaluator::Spectral(vec![Complex::new(0.0, 0.0); n]));
        }
        let eigen: Vec<Complex<f64>> = if w.is_symmetric() {
            w.to_dense()
                .symmetric_eigenvalues()
                .iter()
                .map(|&l| Complex::new(l, 0.0))
                .collect()
        } else if w.is_standardized_symmetric_pattern() {
            // D⁻¹A is similar to D^{-1/2} A D^{-1/2}.
            let deg = w.degrees();
            let mut s = DMatrix::zeros(n, n);
            for (i, j, _) in w.triplets() {
                s[(i, j)] = 1.0 / ((deg[i] * deg[j]) as f64).sqrt();
            }
            s.symmetric_eigenvalues()
                .iter()
                .map(|&l| Complex::new(l, 0.0))
                .collect()
        } else {
            w.to_dense().complex_eigenvalues().iter().copied().collect()
        };
        if eigen.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
            return Err(FslmError::Degenerate("eigen-decomposition of W failed".into()));
        }
        Ok(LogDetEvaluator::Spectral(eigen))
    }

    pub fn log_det(&self, rho: f64) -> Result<f64> {
        match self {
            LogDetEvaluator::Lu(w) => log_det_a(w, rho),
            LogDetEvaluator::Spectral(eigen) => {
                if !rho.is_finite() {
                    return Err(FslmError::InvalidParameter(format!("rho = {rho}")));
                }
                let mut total = 0.0;
                for l in eigen {
                    let re = 1.0 - rho * l.re;
                    if l.im == 0.0 {
                        if re <= 1e-12 {
                            return Err(FslmError::Singular { rho });
                        }
                        total += re.ln();
                    } else {
                        let modulus2 = re * re + (rho * l.im).powi(2);
                        if modulus2 <= 1e-24 {
                            return Err(FslmError::Singular { rho });
                        }
                        total += 0.5 * modulus2.ln();
                    }
                }
                Ok(total)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub statistic: f64,
    pub expected: f64,
    pub p_value: f64,
    pub n_permutations: usize,
}

fn moran_statistic(z: &[f64], w: &SpatialWeights, s0: f64, zz: f64) -> f64 {
    let mut cross = 0.0;
    for (i, j, v) in w.triplets() {
        cross += v * z[i] * z[j];
    }
    (z.len() as f64 * cross) / (s0 * zz)
}

/// Global Moran's I with a two-sided permutation p-value.
///
/// Permutation `k` is drawn from stream `k` of `seed`, so the result does not
/// depend on evaluation order.
pub fn morans_i(values: &[f64], w: &SpatialWeights, n_permutations: usize, seed: u64) -> Result<MoranResult> {
    let n = values.len();
    if n != w.n() {
        return Err(FslmError::InvalidDimension(format!(
            "{n} values for {} spatial units",
            w.n()
        )));
    }
    if n < 3 {
        return Err(FslmError::InvalidDimension(format!("Moran's I needs n >= 3, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FslmError::InvalidParameter("non-finite value".into()));
    }
    let s0 = w.total_weight();
    if s0 <= 0.0 {
        return Err(FslmError::Degenerate("weight matrix has no links (S0 = 0)".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    if zz <= 1e-300 || values.iter().all(|v| *v == values[0]) {
        return Err(FslmError::Degenerate("values are constant".into()));
    }
    let statistic = moran_statistic(&z, w, s0, zz);
    let expected = -1.0 / (n as f64 - 1.0);
    let observed_dev = (statistic - expected).abs();

    let mut extreme = 0usize;
    let mut perm = z.clone();
    for k in 0..n_permutations {
        let mut rng = substream(seed, k as u64);
        perm.copy_from_slice(&z);
        perm.shuffle(&mut rng);
        let stat = moran_statistic(&perm, w, s0, zz);
        if (stat - expected).abs() >= observed_dev * (1.0 - 1e-12) {
            extreme += 1;
        }
    }
    let p_value = (extreme as f64 + 1.0) / (n_permutations as f64 + 1.0);
    Ok(MoranResult {
        statistic,
        expected,
        p_value,
        n_permutations,
    })
}
