//! Kernels on `[0, 1]` and the covariate weights `w_i = K(d(x, X_i) / h)`.

use serde::{Deserialize, Serialize};

use crate::error::{FunqError, Result};
use crate::function_space::{distance, Curve};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `1` on `[0, 1]`, zero elsewhere.
    #[default]
    Indicator,
    /// `(3/4)(1 - u^2)` on `[0, 1]`. Note `K(1) = 0` here.
    Epanechnikov,
}

impl KernelSpec {
    pub fn evaluate(self, u: f64) -> Result<f64> {
        evaluate_kernel(self, u)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Indicator => "indicator",
            KernelSpec::Epanechnikov => "epanechnikov",
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = FunqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(KernelSpec::Indicator),
            "epanechnikov" => Ok(KernelSpec::Epanechnikov),
            other => Err(FunqError::InvalidArgument(format!("unknown kernel {other:?}"))),
        }
    }
}

pub fn evaluate_kernel(spec: KernelSpec, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(FunqError::InvalidArgument(format!(
            "kernel argument must be nonnegative, got {u}"
        )));
    }
    if u > 1.0 {
        return Ok(0.0);
    }
    Ok(match spec {
        KernelSpec::Indicator => 1.0,
        KernelSpec::Epanechnikov => 0.75 * (1.0 - u * u),
    })
}

/// Kernel weights of a sample relative to one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    total: f64,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(FunqError::InvalidArgument(format!(
                "weight {i} is negative or not finite"
            )));
        }
        let total = weights.iter().sum();
        Ok(Self { weights, total })
    }

    /// All weights equal to one.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
            total: n as f64,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy with observation `i` given zero weight.
    pub fn without(&self, i: usize) -> Self {
        let mut weights = self.weights.clone();
        weights[i] = 0.0;
        let total = weights.iter().sum();
        Self { weights, total }
    }
}

pub fn compute_weights(
    x0: &Curve,
    covariates: &[Curve],
    h: f64,
    spec: KernelSpec,
) -> Result<WeightVector> {
    check_bandwidth(h)?;
    let weights = covariates
        .iter()
        .map(|x| spec.evaluate(distance(x0, x)? / h))
        .collect::<Result<Vec<_>>>()?;
    let w = WeightVector::new(weights)?;
    if w.total() <= 0.0 {
        return Err(FunqError::EmptyNeighborhood);
    }
    Ok(w)
}

/// Indices of covariates within distance `h` of `x0` (boundary included).
pub fn neighborhood(x0: &Curve, covariates: &[Curve], h: f64) -> Result<Vec<usize>> {
    if !(h >= 0.0) {
        return Err(FunqError::InvalidArgument(format!(
            "bandwidth must be nonnegative, got {h}"
        )));
    }
    let mut out = Vec::new();
    for (i, x) in covariates.iter().enumerate() {
        if distance(x0, x)? <= h {
            out.push(i);
        }
    }
    Ok(out)
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(FunqError::InvalidArgument(format!(
            "bandwidth must be positive and finite, got {h}"
        )))
    }
}
