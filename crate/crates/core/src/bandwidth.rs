//! Leave-one-out cross-validation of the kernel bandwidth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FunqError, Result};
use crate::estimators::FunctionalSample;
use crate::function_space::{distance, Curve};
use crate::kernel::{check_bandwidth, KernelSpec, WeightVector};
use crate::solver::{LocalModel, SolverConfig, TauSpec};

/// Conditional location estimate used to predict the left-out response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvPredictor {
    #[default]
    SpatialMedian,
    PointwiseMedian,
    Mean,
}

impl std::str::FromStr for CvPredictor {
    type Err = FunqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial-median" => Ok(Self::SpatialMedian),
            "pointwise-median" => Ok(Self::PointwiseMedian),
            "mean" => Ok(Self::Mean),
            other => Err(FunqError::InvalidArgument(format!("unknown predictor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub min_neighbors: usize,
    pub predictor: CvPredictor,
    pub solver: SolverConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            min_neighbors: 3,
            predictor: CvPredictor::SpatialMedian,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CvScore {
    Feasible(f64),
    /// Some left-out point had too few neighbors.
    Infeasible { index: usize },
}

impl CvScore {
    pub fn value(&self) -> Option<f64> {
        match self {
            CvScore::Feasible(v) => Some(*v),
            CvScore::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub h_opt: f64,
    /// Feasible candidates with their scores, in candidate order.
    pub scores: Vec<(f64, f64)>,
    pub infeasible: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BandwidthGrid {
    /// Deciles 0.1..0.9 of the pairwise covariate distances plus their maximum.
    Auto,
    Explicit(Vec<f64>),
}

/// Weights for predicting at `x0` with observation `left_out` removed.
fn loo_weights(
    sample: &FunctionalSample,
    left_out: usize,
    x0: &Curve,
    h: f64,
    spec: KernelSpec,
    min_neighbors: usize,
) -> Result<WeightVector> {
    if left_out >= sample.len() {
        return Err(FunqError::InvalidArgument(format!(
            "observation {left_out} out of range"
        )));
    }
    check_bandwidth(h)?;
    let weights = sample
        .covariates()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            if j == left_out {
                Ok(0.0)
            } else {
                spec.evaluate(distance(x0, x)? / h)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let w = WeightVector::new(weights)?;
    let count = w.positive_count();
    if count < min_neighbors.max(1) {
        return Err(FunqError::DegenerateNeighborhood {
            count,
            required: min_neighbors.max(1),
        });
    }
    Ok(w)
}

fn lower_weighted_median(mut pairs: Vec<(f64, f64)>, total: f64) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= 0.5 * total {
            return *v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(0.0)
}

fn predict(sample: &FunctionalSample, weights: WeightVector, config: &CvConfig) -> Result<Curve> {
    match config.predictor {
        CvPredictor::SpatialMedian => {
            let model = LocalModel::from_weights(sample, weights)?;
            let fit = model.quantile(&TauSpec::Zero, &config.solver)?;
            Ok(fit.curve.expect("local models always carry a basis"))
        }
        CvPredictor::Mean => Ok(LocalModel::from_weights(sample, weights)?.center().clone()),
        CvPredictor::PointwiseMedian => {
            let grid = sample.response_grid();
            let active = weights.positive_indices();
            let values = (0..grid.count())
                .map(|k| {
                    let pairs = active
                        .iter()
                        .map(|&i| (sample.responses()[i].values()[k], weights.weights()[i]))
                        .collect();
                    lower_weighted_median(pairs, weights.total())
                })
                .collect();
            Curve::new(grid, values)
        }
    }
}

/// Conditional spatial median at `x0` fitted without observation `i`.
pub fn loo_median(
    sample: &FunctionalSample,
    i: usize,
    x0: &Curve,
    h: f64,
    spec: KernelSpec,
    config: &CvConfig,
) -> Result<Curve> {
    let w = loo_weights(sample, i, x0, h, spec, config.min_neighbors)?;
    let cfg = CvConfig {
        predictor: CvPredictor::SpatialMedian,
        ..*config
    };
    predict(sample, w, &cfg)
}

/// Leave-one-out prediction at `X_i` with the configured predictor.
pub fn loo_prediction(
    sample: &FunctionalSample,
    i: usize,
    h: f64,
    spec: KernelSpec,
    config: &CvConfig,
) -> Result<Curve> {
    let x0 = &sample.covariates()[i];
    let w = loo_weights(sample, i, x0, h, spec, config.min_neighbors)?;
    predict(sample, w, config)
}

/// Mean L2 error of the leave-one-out predictions.
pub fn cv_score(
    sample: &FunctionalSample,
    h: f64,
    spec: KernelSpec,
    config: &CvConfig,
) -> Result<CvScore> {
    check_bandwidth(h)?;
    let errors: Vec<Result<f64>> = (0..sample.len())
        .into_par_iter()
        .map(|i| {
            let pred = loo_prediction(sample, i, h, spec, config)?;
            distance(&pred, &sample.responses()[i])
        })
        .collect();
    let mut sum = 0.0;
    for (i, e) in errors.into_iter().enumerate() {
        match e {
            Ok(v) => sum += v,
            Err(FunqError::DegenerateNeighborhood { .. } | FunqError::EmptyNeighborhood) => {
                return Ok(CvScore::Infeasible { index: i })
            }
            Err(other) => return Err(other),
        }
    }
    Ok(CvScore::Feasible(sum / sample.len() as f64))
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn pairwise_covariate_distances(sample: &FunctionalSample) -> Result<Vec<f64>> {
    let xs = sample.covariates();
    let mut out = Vec::with_capacity(xs.len() * xs.len().saturating_sub(1) / 2);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            out.push(distance(&xs[i], &xs[j])?);
        }
    }
    Ok(out)
}

pub fn auto_candidates(sample: &FunctionalSample) -> Result<Vec<f64>> {
    let mut d = pairwise_covariate_distances(sample)?;
    if d.is_empty() {
        return Err(FunqError::InvalidArgument(
            "automatic bandwidth grid needs at least two observations".into(),
        ));
    }
    d.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..=9).map(|k| sorted_quantile(&d, k as f64 / 10.0)).collect();
    out.push(*d.last().unwrap());
    if out.iter().any(|h| !(*h > 0.0)) {
        // coincident covariates: drop nonpositive candidates
        out.retain(|h| *h > 0.0);
        if out.is_empty() {
            return Err(FunqError::InvalidArgument(
                "all covariates coincide; no positive bandwidth candidates".into(),
            ));
        }
    }
    Ok(out)
}

pub fn select_bandwidth(
    sample: &FunctionalSample,
    candidates: &BandwidthGrid,
    spec: KernelSpec,
    config: &CvConfig,
) -> Result<CvResult> {
    let hs = match candidates {
        BandwidthGrid::Auto => auto_candidates(sample)?,
        BandwidthGrid::Explicit(v) => v.clone(),
    };
    if hs.is_empty() {
        return Err(FunqError::InvalidArgument("no candidate bandwidths".into()));
    }
    let scored = hs
        .par_iter()
        .map(|&h| cv_score(sample, h, spec, config).map(|s| (h, s)))
        .collect::<Result<Vec<_>>>()?;

    let mut scores = Vec::new();
    let mut infeasible = Vec::new();
    for (h, s) in scored {
        match s.value() {
            Some(v) => scores.push((h, v)),
            None => infeasible.push(h),
        }
    }
    let h_opt = scores
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(h, _)| h)
        .ok_or(FunqError::AllInfeasible)?;
    Ok(CvResult {
        h_opt,
        scores,
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Grid;

    fn scalar_sample(xs: &[f64], ys: &[f64]) -> FunctionalSample {
        let g = Grid::point(0.0);
        FunctionalSample::new(
            xs.iter().map(|v| Curve::new(g, vec![*v]).unwrap()).collect(),
            ys.iter().map(|v| Curve::new(g, vec![*v]).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_responses_return_the_curve() {
        let g = Grid::unit(11).unwrap();
        let y = Curve::from_fn(g, |t| (3.0 * t).sin() + 2.0);
        let xs: Vec<Curve> = (0..6).map(|i| Curve::constant(g, i as f64 * 0.1)).collect();
        let s = FunctionalSample::new(xs.clone(), vec![y.clone(); 6]).unwrap();
        for i in 0..6 {
            let m = loo_median(&s, i, &xs[0], 10.0, KernelSpec::Indicator, &CvConfig::default())
                .unwrap();
            assert!(distance(&m, &y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn scalar_loo_median_matches_sort_oracle() {
        let xs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let ys = [3.0, -1.0, 2.5, 0.5, 7.0, 1.5, -2.0];
        let s = scalar_sample(&xs, &ys);
        for i in 0..xs.len() {
            let m = loo_median(&s, i, &s.covariates()[i], 1.0, KernelSpec::Indicator, &CvConfig::default())
                .unwrap();
            // Oracle: equal weights, spatial median of 6 scalars is any point
            // in the middle interval; the solver returns the lowest-index
            // minimizing data point.
            let rest: Vec<(usize, f64)> =
                (0..xs.len()).filter(|&j| j != i).map(|j| (j, ys[j])).collect();
            let mut sorted: Vec<f64> = rest.iter().map(|r| r.1).collect();
            sorted.sort_by(f64::total_cmp);
            let (lo, hi) = (sorted[2], sorted[3]);
            let want = rest
                .iter()
                .filter(|(_, v)| *v >= lo && *v <= hi)
                .min_by_key(|(j, _)| *j)
                .unwrap()
                .1;
            assert!((m.values()[0] - want).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn removing_a_distant_point_changes_nothing() {
        let g = Grid::unit(9).unwrap();
        let xs: Vec<Curve> = (0..8).map(|i| Curve::constant(g, i as f64 * 0.1)).collect();
        let ys: Vec<Curve> = (0..8)
            .map(|i| Curve::from_fn(g, move |t| ((i + 1) as f64 * t).sin() + i as f64 * 0.2))
            .collect();
        let s = FunctionalSample::new(xs.clone(), ys).unwrap();
        let cfg = CvConfig::default();
        // X_7 lies at distance 0.7 from X_0, outside h = 0.45.
        let with = loo_median(&s, 7, &xs[0], 0.45, KernelSpec::Indicator, &cfg).unwrap();
        let reduced = s.without(7).unwrap();
        let w = reduced.weights_at(&xs[0], 0.45, KernelSpec::Indicator).unwrap();
        let model = LocalModel::from_weights(&reduced, w).unwrap();
        let direct = model.quantile(&TauSpec::Zero, &cfg.solver).unwrap().curve.unwrap();
        assert!(distance(&with, &direct).unwrap() < 1e-10);
    }

    #[test]
    fn isolated_point_is_infeasible() {
        let s = scalar_sample(&[0.0, 0.1, 0.2, 0.3, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let score = cv_score(&s, 0.5, KernelSpec::Indicator, &CvConfig::default()).unwrap();
        // Observations 0..=3 each see three neighbors; 4 sees none.
        assert_eq!(score, CvScore::Infeasible { index: 4 });
    }

    #[test]
    fn global_bandwidth_on_identical_responses_scores_zero() {
        let s = scalar_sample(&[0.0, 0.1, 0.2, 0.3, 5.0], &[2.0; 5]);
        let score = cv_score(&s, 100.0, KernelSpec::Indicator, &CvConfig::default()).unwrap();
        assert_eq!(score, CvScore::Feasible(0.0));
    }

    #[test]
    fn selection_prefers_feasible_then_smaller() {
        let s = scalar_sample(&[0.0, 0.1, 0.2, 0.3, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let cfg = CvConfig::default();
        let r = select_bandwidth(&s, &BandwidthGrid::Explicit(vec![6.0]), KernelSpec::Indicator, &cfg)
            .unwrap();
        assert_eq!(r.h_opt, 6.0);
        let r = select_bandwidth(&s, &BandwidthGrid::Explicit(vec![0.5, 6.0]), KernelSpec::Indicator, &cfg)
            .unwrap();
        assert_eq!(r.h_opt, 6.0);
        assert_eq!(r.infeasible, vec![0.5]);
        // identical scores: the smaller bandwidth wins
        let r = select_bandwidth(&s, &BandwidthGrid::Explicit(vec![7.0, 6.0]), KernelSpec::Indicator, &cfg)
            .unwrap();
        assert_eq!(r.h_opt, 6.0);
        assert!(matches!(
            select_bandwidth(&s, &BandwidthGrid::Explicit(vec![0.01]), KernelSpec::Indicator, &cfg),
            Err(FunqError::AllInfeasible)
        ));
    }

    #[test]
    fn auto_grid_is_deciles_plus_max() {
        let s = scalar_sample(&[0.0, 1.0, 3.0, 6.0], &[0.0; 4]);
        // distances: 1,3,6,2,5,3 -> sorted 1,2,3,3,5,6
        let c = auto_candidates(&s).unwrap();
        assert_eq!(c.len(), 10);
        assert!((c[0] - 1.5).abs() < 1e-12);
        assert!((c[4] - 3.0).abs() < 1e-12);
        assert_eq!(c[9], 6.0);
    }

    #[test]
    fn other_predictors() {
        let s = scalar_sample(&[0.0, 0.1, 0.2, 0.3], &[1.0, 2.0, 4.0, 8.0]);
        let mean_cfg = CvConfig {
            predictor: CvPredictor::Mean,
            ..CvConfig::default()
        };
        let m = loo_prediction(&s, 3, 1.0, KernelSpec::Indicator, &mean_cfg).unwrap();
        assert!((m.values()[0] - 7.0 / 3.0).abs() < 1e-12);
        let med_cfg = CvConfig {
            predictor: CvPredictor::PointwiseMedian,
            ..CvConfig::default()
        };
        let m = loo_prediction(&s, 3, 1.0, KernelSpec::Indicator, &med_cfg).unwrap();
        assert_eq!(m.values()[0], 2.0);
    }
}
