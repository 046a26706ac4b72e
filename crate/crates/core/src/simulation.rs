//! Seeded generators for the heteroscedastic Brownian model and for
//! location-scale models.
//!
//! Each observation draws from its own ChaCha8 stream (`seed`, stream = index),
//! so samples are identical whether generated sequentially or in parallel.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{FunqError, Result};
use crate::estimators::FunctionalSample;
use crate::function_space::{norm, Curve, Grid};

pub type MeanFn = Arc<dyn Fn(&Curve) -> Curve + Send + Sync>;
pub type ScaleFn = Arc<dyn Fn(&Curve) -> f64 + Send + Sync>;

/// `Y = m(X) + f(X) G` with `G` a Brownian path.
#[derive(Clone)]
pub struct LocationScale {
    pub label: String,
    pub mean: MeanFn,
    pub scale: ScaleFn,
}

impl LocationScale {
    pub fn new(label: impl Into<String>, mean: MeanFn, scale: ScaleFn) -> Self {
        Self {
            label: label.into(),
            mean,
            scale,
        }
    }

    /// `m(x) = x`, `f = 1`: a homoscedastic control.
    pub fn identity_mean_unit_scale() -> Self {
        Self::new(
            "identity-mean-unit-scale",
            Arc::new(|x: &Curve| x.clone()),
            Arc::new(|_: &Curve| 1.0),
        )
    }
}

impl fmt::Debug for LocationScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocationScale").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone)]
pub enum SimModel {
    /// `X(t) = U e^t`, `U ~ Uniform[0, 1]`; `Y = ||X|| B`.
    Heteroscedastic,
    LocationScale(LocationScale),
}

impl SimModel {
    pub fn label(&self) -> &str {
        match self {
            SimModel::Heteroscedastic => "heteroscedastic",
            SimModel::LocationScale(ls) => &ls.label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub grid: Grid,
    pub seed: u64,
    pub model: SimModel,
}

impl SimConfig {
    pub fn heteroscedastic(n: usize, grid: Grid, seed: u64) -> Self {
        Self {
            n,
            grid,
            seed,
            model: SimModel::Heteroscedastic,
        }
    }
}

/// Stream for observation `index`.
pub fn observation_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Brownian motion on the grid, started at 0 at the first grid point, with
/// independent `N(0, dt)` increments.
pub fn brownian_path<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Curve {
    let sd = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.count());
    let mut b = 0.0;
    values.push(b);
    for _ in 1..grid.count() {
        let z: f64 = rng.sample(StandardNormal);
        b += sd * z;
        values.push(b);
    }
    Curve::new(*grid, values).expect("finite increments")
}

fn exp_covariate<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Curve {
    let u: f64 = rng.random();
    Curve::from_fn(*grid, |t| u * t.exp())
}

fn heteroscedastic_response<R: Rng + ?Sized>(x: &Curve, rng: &mut R) -> Curve {
    brownian_path(x.grid(), rng).scaled(norm(x))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(FunqError::InvalidArgument("sample size must be >= 1".into()));
    }
    Ok(())
}

pub fn gen_heteroscedastic(config: &SimConfig) -> Result<FunctionalSample> {
    check_n(config.n)?;
    if !matches!(config.model, SimModel::Heteroscedastic) {
        return Err(FunqError::InvalidArgument(
            "configuration is not the heteroscedastic model".into(),
        ));
    }
    let grid = config.grid;
    let (xs, ys): (Vec<Curve>, Vec<Curve>) = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = observation_rng(config.seed, i);
            let x = exp_covariate(&grid, &mut rng);
            let y = heteroscedastic_response(&x, &mut rng);
            (x, y)
        })
        .unzip();
    FunctionalSample::new(xs, ys)
}

pub fn gen_location_scale(config: &SimConfig) -> Result<FunctionalSample> {
    check_n(config.n)?;
    let SimModel::LocationScale(ls) = &config.model else {
        return Err(FunqError::InvalidArgument(
            "configuration is not a location-scale model".into(),
        ));
    };
    let grid = config.grid;
    let pairs = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = observation_rng(config.seed, i);
            let x = exp_covariate(&grid, &mut rng);
            let noise = brownian_path(&grid, &mut rng);
            let mut y = (ls.mean)(&x);
            y.axpy((ls.scale)(&x), &noise)?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys) = pairs.into_iter().unzip();
    FunctionalSample::new(xs, ys)
}

pub fn generate(config: &SimConfig) -> Result<FunctionalSample> {
    match config.model {
        SimModel::Heteroscedastic => gen_heteroscedastic(config),
        SimModel::LocationScale(_) => gen_location_scale(config),
    }
}
