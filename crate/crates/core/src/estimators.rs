//! Kernel estimators of the conditional spatial distribution and the
//! conditional spatial depth.

use serde::{Deserialize, Serialize};

use crate::error::{FunqError, Result};
use crate::function_space::{norm, same_grid, Curve, Grid};
use crate::kernel::{compute_weights, KernelSpec, WeightVector};

/// Paired covariate and response curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    covariates: Vec<Curve>,
    responses: Vec<Curve>,
}

impl FunctionalSample {
    pub fn new(covariates: Vec<Curve>, responses: Vec<Curve>) -> Result<Self> {
        if covariates.len() != responses.len() {
            return Err(FunqError::DimensionMismatch {
                expected: covariates.len(),
                found: responses.len(),
            });
        }
        if covariates.is_empty() {
            return Err(FunqError::InvalidArgument("sample is empty".into()));
        }
        for list in [&covariates, &responses] {
            if list.iter().any(|c| c.grid() != list[0].grid()) {
                return Err(FunqError::GridMismatch);
            }
        }
        Ok(Self {
            covariates,
            responses,
        })
    }

    pub fn covariates(&self) -> &[Curve] {
        &self.covariates
    }

    pub fn responses(&self) -> &[Curve] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn covariate_grid(&self) -> Grid {
        *self.covariates[0].grid()
    }

    pub fn response_grid(&self) -> Grid {
        *self.responses[0].grid()
    }

    /// Sample with observation `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(FunqError::InvalidArgument(format!(
                "observation {i} out of range for sample of size {}",
                self.len()
            )));
        }
        let mut covariates = self.covariates.clone();
        let mut responses = self.responses.clone();
        covariates.remove(i);
        responses.remove(i);
        Self::new(covariates, responses)
    }

    pub fn weights_at(&self, x0: &Curve, h: f64, spec: KernelSpec) -> Result<WeightVector> {
        compute_weights(x0, &self.covariates, h, spec)
    }
}

/// `(y - yi) / ||y - yi||`, or the zero curve when the two (nearly) coincide.
pub fn unit_direction(y: &Curve, yi: &Curve) -> Result<Curve> {
    let diff = y.sub(yi)?;
    let r = norm(&diff);
    if r <= zero_tol(y) {
        return Ok(Curve::zeros(*y.grid()));
    }
    Ok(diff.scaled(1.0 / r))
}

fn zero_tol(y: &Curve) -> f64 {
    1e-12 * (1.0 + norm(y))
}

/// Weighted average of unit directions from each response to `y`.
pub fn spatial_distribution_weighted(
    y: &Curve,
    responses: &[Curve],
    weights: &WeightVector,
) -> Result<Curve> {
    if responses.len() != weights.len() {
        return Err(FunqError::DimensionMismatch {
            expected: responses.len(),
            found: weights.len(),
        });
    }
    if weights.total() <= 0.0 {
        return Err(FunqError::EmptyNeighborhood);
    }
    let mut acc = Curve::zeros(*y.grid());
    for (yi, &w) in responses.iter().zip(weights.weights()) {
        same_grid(y, yi)?;
        if w > 0.0 {
            acc.axpy(w, &unit_direction(y, yi)?)?;
        }
    }
    Ok(acc.scaled(1.0 / weights.total()))
}

pub fn spatial_depth_weighted(
    y: &Curve,
    responses: &[Curve],
    weights: &WeightVector,
) -> Result<f64> {
    Ok(1.0 - norm(&spatial_distribution_weighted(y, responses, weights)?))
}

/// Kernel estimate of the conditional spatial distribution at `y` given `x0`.
pub fn spatial_distribution_hat(
    y: &Curve,
    x0: &Curve,
    sample: &FunctionalSample,
    h: f64,
    spec: KernelSpec,
) -> Result<Curve> {
    let w = sample.weights_at(x0, h, spec)?;
    spatial_distribution_weighted(y, sample.responses(), &w)
}

/// Kernel estimate of the conditional spatial depth of `y` given `x0`.
pub fn spatial_depth_hat(
    y: &Curve,
    x0: &Curve,
    sample: &FunctionalSample,
    h: f64,
    spec: KernelSpec,
) -> Result<f64> {
    let w = sample.weights_at(x0, h, spec)?;
    spatial_depth_weighted(y, sample.responses(), &w)
}
