//! Conditional covariance operator of the response and its leading
//! eigenfunctions, which span the space quantiles are computed in.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FunqError, Result};
use crate::estimators::FunctionalSample;
use crate::function_space::{inner_product, project, reconstruct, Curve, Grid};
use crate::kernel::WeightVector;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Orthonormal functions `e_1..e_d` with their eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    functions: Vec<Curve>,
    eigenvalues: Vec<f64>,
}

impl Basis {
    /// Validates orthonormality (to 1e-6) and eigenvalue ordering.
    pub fn new(functions: Vec<Curve>, eigenvalues: Vec<f64>) -> Result<Self> {
        if functions.is_empty() {
            return Err(FunqError::InvalidArgument("basis must be nonempty".into()));
        }
        if functions.len() != eigenvalues.len() {
            return Err(FunqError::DimensionMismatch {
                expected: functions.len(),
                found: eigenvalues.len(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(FunqError::InvalidArgument(
                "eigenvalues must be sorted nonincreasing".into(),
            ));
        }
        for (j, ej) in functions.iter().enumerate() {
            for (k, ek) in functions.iter().enumerate().skip(j) {
                let ip = inner_product(ej, ek)?;
                let target = if j == k { 1.0 } else { 0.0 };
                if (ip - target).abs() > ORTHONORMAL_TOL {
                    return Err(FunqError::InvalidArgument(format!(
                        "basis functions {j} and {k} are not orthonormal (<e_j, e_k> = {ip})"
                    )));
                }
            }
        }
        Ok(Self {
            functions,
            eigenvalues,
        })
    }

    /// The single function `1` on a one-point grid.
    pub fn scalar(grid: Grid) -> Result<Self> {
        if !grid.is_scalar() {
            return Err(FunqError::InvalidArgument(
                "scalar basis needs a one-point grid".into(),
            ));
        }
        Ok(Self {
            functions: vec![Curve::constant(grid, 1.0)],
            eigenvalues: vec![1.0],
        })
    }

    pub fn functions(&self) -> &[Curve] {
        &self.functions
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    pub fn grid(&self) -> Grid {
        *self.functions[0].grid()
    }

    /// The leading `d` functions.
    pub fn truncated(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.dim() {
            return Err(FunqError::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(Self {
            functions: self.functions[..d].to_vec(),
            eigenvalues: self.eigenvalues[..d].to_vec(),
        })
    }
}

/// Kernel-weighted conditional mean and covariance of the response curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub mean: Curve,
}

pub fn estimate_conditional_covariance(
    sample: &FunctionalSample,
    weights: &WeightVector,
) -> Result<CovarianceEstimate> {
    if weights.len() != sample.len() {
        return Err(FunqError::DimensionMismatch {
            expected: sample.len(),
            found: weights.len(),
        });
    }
    if weights.total() <= 0.0 {
        return Err(FunqError::EmptyNeighborhood);
    }
    let active = weights.positive_indices();
    if active.len() < 2 {
        return Err(FunqError::DegenerateNeighborhood {
            count: active.len(),
            required: 2,
        });
    }
    let grid = sample.response_grid();
    let t = grid.count();
    let total = weights.total();
    let w = weights.weights();

    let mut mean = vec![0.0; t];
    for &i in &active {
        for (m, y) in mean.iter_mut().zip(sample.responses()[i].values()) {
            *m += w[i] * y;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);

    let mut matrix = DMatrix::<f64>::zeros(t, t);
    let mut centered = vec![0.0; t];
    for &i in &active {
        for ((c, y), m) in centered
            .iter_mut()
            .zip(sample.responses()[i].values())
            .zip(&mean)
        {
            *c = y - m;
        }
        // rank-one update, upper triangle only
        for s in 0..t {
            let ws = w[i] * centered[s];
            for u in s..t {
                matrix[(s, u)] += ws * centered[u];
            }
        }
    }
    for s in 0..t {
        for u in s..t {
            let v = matrix[(s, u)] / total;
            matrix[(s, u)] = v;
            matrix[(u, s)] = v;
        }
    }
    Ok(CovarianceEstimate {
        grid,
        matrix,
        mean: Curve::new(grid, mean)?,
    })
}

/// Top-`d` eigenpairs of the integral operator with kernel `cov.matrix`.
///
/// The operator is discretized with the trapezoid weights `D` as the
/// symmetric matrix `D^{1/2} C D^{1/2}`; eigenvectors are mapped back by
/// `D^{-1/2}` so the returned functions are orthonormal under
/// [`inner_product`]. Each function is signed so its entry of largest
/// magnitude is positive.
pub fn eigenbasis(cov: &CovarianceEstimate, d: usize) -> Result<Basis> {
    let t = cov.grid.count();
    if d == 0 || d > t {
        return Err(FunqError::DimensionMismatch {
            expected: t,
            found: d,
        });
    }
    let sqrt_w: Vec<f64> = cov.grid.quadrature_weights().iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(t, t, |s, u| sqrt_w[s] * cov.matrix[(s, u)] * sqrt_w[u]);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut functions = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let mut values: Vec<f64> = (0..t)
            .map(|s| eig.eigenvectors[(s, k)] / sqrt_w[s])
            .collect();
        let mut curve = Curve::new(cov.grid, values.clone())?;
        let nrm = curve.norm();
        if nrm > 0.0 {
            values.iter_mut().for_each(|v| *v /= nrm);
        }
        let lead = values
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1.abs() {
                    (i, *v)
                } else {
                    best
                }
            })
            .0;
        if values[lead] < 0.0 {
            values.iter_mut().for_each(|v| *v = -*v);
        }
        curve = Curve::new(cov.grid, values)?;
        functions.push(curve);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    Basis::new(functions, eigenvalues)
}

/// `floor(min(sqrt(m), 2 m^(1/3)))`, at least 1.
///
/// Evaluated in integers as the largest `k` with `k^2 <= m` and `k^3 <= 8m`,
/// which avoids floating-point roots landing just below an exact integer.
pub fn choose_dn(neighborhood_count: usize) -> usize {
    let m = neighborhood_count.max(1) as u128;
    let mut k: u128 = 1;
    while (k + 1) * (k + 1) <= m && (k + 1).pow(3) <= 8 * m {
        k += 1;
    }
    k as usize
}

/// Projection of `y` onto the span of `basis`.
pub fn truncate_response(y: &Curve, basis: &Basis) -> Result<Curve> {
    reconstruct(&project(y, basis)?, basis)
}

/// Number of basis functions to keep: the `d_n` rule capped by the grid size
/// and by the count of eigenvalues above `1e-12` of the largest.
pub fn effective_dimension(neighborhood_count: usize, eigenvalues: &[f64]) -> usize {
    let lead = eigenvalues.first().copied().unwrap_or(0.0);
    let positive = eigenvalues
        .iter()
        .filter(|&&l| lead > 0.0 && l > 1e-12 * lead)
        .count();
    choose_dn(neighborhood_count)
        .min(eigenvalues.len())
        .min(positive)
        .max(1)
}
