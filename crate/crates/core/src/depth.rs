//! Sample conditional maximal depth sets and the two spread measures built
//! on them: the depth-set diameter and the distance between opposite
//! quantiles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FunqError, Result};
use crate::estimators::{spatial_depth_weighted, FunctionalSample};
use crate::function_space::{distance, norm, Curve};
use crate::kernel::{KernelSpec, WeightVector};
use crate::solver::{LocalModel, SolverConfig, TauSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSetResult {
    /// Positive-weight observations by nonincreasing depth (ties by index).
    pub ordered_indices: Vec<usize>,
    pub depths: Vec<f64>,
    /// Number of leading ordered observations in the set.
    pub cutoff: usize,
    pub p: f64,
    pub d1: f64,
}

impl DepthSetResult {
    pub fn selected(&self) -> &[usize] {
        &self.ordered_indices[..self.cutoff]
    }
}

/// Orders the positive-weight responses by conditional depth.
pub fn order_by_depth_weighted(
    sample: &FunctionalSample,
    weights: &WeightVector,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if weights.total() <= 0.0 {
        return Err(FunqError::EmptyNeighborhood);
    }
    let responses = sample.responses();
    let mut scored = weights
        .positive_indices()
        .into_iter()
        .map(|i| Ok((i, spatial_depth_weighted(&responses[i], responses, weights)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().unzip())
}

pub fn order_by_depth(
    sample: &FunctionalSample,
    x0: &Curve,
    h: f64,
    spec: KernelSpec,
) -> Result<(Vec<usize>, Vec<f64>)> {
    order_by_depth_weighted(sample, &sample.weights_at(x0, h, spec)?)
}

/// Smallest leading block of the depth ordering holding normalized kernel
/// mass at least `p`.
pub fn maximal_depth_set_weighted(
    sample: &FunctionalSample,
    weights: &WeightVector,
    p: f64,
) -> Result<DepthSetResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FunqError::InvalidP(p));
    }
    let (ordered_indices, depths) = order_by_depth_weighted(sample, weights)?;
    let target = p * weights.total();
    let slack = 1e-12 * weights.total();
    let mut acc = 0.0;
    let mut cutoff = ordered_indices.len();
    for (k, &i) in ordered_indices.iter().enumerate() {
        acc += weights.weights()[i];
        if acc >= target - slack {
            cutoff = k + 1;
            break;
        }
    }
    let mut result = DepthSetResult {
        ordered_indices,
        depths,
        cutoff,
        p,
        d1: 0.0,
    };
    result.d1 = d1_spread(&result, sample)?;
    Ok(result)
}

pub fn maximal_depth_set(
    sample: &FunctionalSample,
    x0: &Curve,
    p: f64,
    h: f64,
    spec: KernelSpec,
) -> Result<DepthSetResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FunqError::InvalidP(p));
    }
    maximal_depth_set_weighted(sample, &sample.weights_at(x0, h, spec)?, p)
}

/// Diameter of the selected responses.
pub fn d1_spread(result: &DepthSetResult, sample: &FunctionalSample) -> Result<f64> {
    let sel = result.selected();
    let ys = sample.responses();
    let mut diam = 0.0f64;
    for (a, &i) in sel.iter().enumerate() {
        for &j in &sel[a + 1..] {
            diam = diam.max(distance(&ys[i], &ys[j])?);
        }
    }
    Ok(diam)
}

/// Distance between the `tau` and `-tau` conditional quantiles of a fitted
/// local model.
pub fn d2_from_model(model: &LocalModel, tau: &TauSpec, config: &SolverConfig) -> Result<f64> {
    let plus = model.quantile(tau, config)?;
    let minus = model.quantile(&tau.negated(), config)?;
    // orthonormal coordinates: Euclidean distance is the L2 distance
    Ok(plus
        .point
        .0
        .iter()
        .zip(&minus.point.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

pub fn d2_spread(
    sample: &FunctionalSample,
    x0: &Curve,
    tau: &TauSpec,
    h: f64,
    spec: KernelSpec,
    config: &SolverConfig,
) -> Result<f64> {
    d2_from_model(&LocalModel::fit(sample, x0, h, spec)?, tau, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub index: usize,
    /// 1-based rank of the covariate's L2 norm.
    pub rank: usize,
    pub covariate_norm: f64,
    pub neighbors: usize,
    pub cutoff: usize,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingPoint {
    pub index: usize,
    pub rank: usize,
    pub reason: String,
}

/// Spread measures at every covariate, ordered by covariate-norm rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadProfile {
    pub points: Vec<SpreadPoint>,
    pub missing: Vec<MissingPoint>,
}

impl SpreadProfile {
    pub fn covariate_ranks(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.rank).collect()
    }

    pub fn d1_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.d1).collect()
    }

    pub fn d2_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.d2).collect()
    }
}

/// 1-based ranks of the covariate norms (ties by index).
pub fn covariate_norm_ranks(sample: &FunctionalSample) -> Vec<usize> {
    let norms: Vec<f64> = sample.covariates().iter().map(norm).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; norms.len()];
    for (r, i) in order.into_iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Evaluates the depth-set diameter at level `p` and the opposite-quantile
/// distance for `tau = tau_scale * e_1` at each covariate curve. Points whose
/// neighborhood cannot support a fit are recorded as missing.
pub fn spread_profile(
    sample: &FunctionalSample,
    p: f64,
    tau_scale: f64,
    h: f64,
    spec: KernelSpec,
    config: &SolverConfig,
) -> Result<SpreadProfile> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FunqError::InvalidP(p));
    }
    let ranks = covariate_norm_ranks(sample);
    let tau = TauSpec::FirstComponent(tau_scale);
    let outcomes: Vec<std::result::Result<SpreadPoint, String>> = (0..sample.len())
        .into_par_iter()
        .map(|i| {
            let x0 = &sample.covariates()[i];
            let run = || -> Result<SpreadPoint> {
                let model = LocalModel::fit(sample, x0, h, spec)?;
                let set = maximal_depth_set_weighted(sample, model.weights(), p)?;
                let d2 = d2_from_model(&model, &tau, config)?;
                Ok(SpreadPoint {
                    index: i,
                    rank: ranks[i],
                    covariate_norm: norm(x0),
                    neighbors: model.neighborhood_count(),
                    cutoff: set.cutoff,
                    d1: set.d1,
                    d2,
                })
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut points = Vec::new();
    let mut missing = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(pt) => points.push(pt),
            Err(reason) => missing.push(MissingPoint {
                index: i,
                rank: ranks[i],
                reason,
            }),
        }
    }
    points.sort_by_key(|p| p.rank);
    missing.sort_by_key(|m| m.rank);
    Ok(SpreadProfile { points, missing })
}

/// Average ranks (1-based) with ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Grid;

    fn scalar_sample(values: &[f64]) -> FunctionalSample {
        let g = Grid::point(0.0);
        let ys = values.iter().map(|v| Curve::new(g, vec![*v]).unwrap()).collect();
        let xs = vec![Curve::zeros(g); values.len()];
        FunctionalSample::new(xs, ys).unwrap()
    }

    #[test]
    fn symmetric_pair_order_ties_by_index() {
        let s = scalar_sample(&[-1.0, 1.0]);
        let (order, depths) = order_by_depth_weighted(&s, &WeightVector::uniform(2)).unwrap();
        assert_eq!(order, vec![0, 1]);
        assert_eq!(depths[0], depths[1]);
    }

    #[test]
    fn scalar_order_matches_ecdf_oracle() {
        let s = scalar_sample(&[1.0, 2.0, 3.0]);
        let (order, depths) = order_by_depth_weighted(&s, &WeightVector::uniform(3)).unwrap();
        assert_eq!(order, vec![1, 0, 2]);
        // 1 - |2F - 1| with midpoint ECDF: F(2) = 1/2, F(1) = 1/6, F(3) = 5/6
        assert!((depths[0] - 1.0).abs() < 1e-12);
        assert!((depths[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((depths[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_for_indicator_half() {
        for m in 1..12 {
            let vals: Vec<f64> = (0..m).map(|i| (i as f64 * 0.37).sin()).collect();
            let s = scalar_sample(&vals);
            let r = maximal_depth_set_weighted(&s, &WeightVector::uniform(m), 0.5).unwrap();
            assert_eq!(r.cutoff, m.div_ceil(2), "m={m}");
        }
    }

    #[test]
    fn tiny_p_gives_singleton() {
        let s = scalar_sample(&[0.0, 5.0, 1.0, 2.0]);
        let r = maximal_depth_set_weighted(&s, &WeightVector::uniform(4), 0.01).unwrap();
        assert_eq!(r.cutoff, 1);
        assert_eq!(r.d1, 0.0);
        assert!(maximal_depth_set_weighted(&s, &WeightVector::uniform(4), 1.0).is_err());
        assert!(maximal_depth_set_weighted(&s, &WeightVector::uniform(4), 0.0).is_err());
    }

    #[test]
    fn exhaustive_selection_oracle() {
        let vals = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7, -2.5, 0.4];
        let weights = [1.0, 0.5, 2.0, 1.0, 0.0, 1.5, 0.25, 1.0];
        let s = scalar_sample(&vals);
        let w = WeightVector::new(weights.to_vec()).unwrap();
        let total: f64 = weights.iter().sum();
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let r = maximal_depth_set_weighted(&s, &w, p).unwrap();
            // Oracle: scalar depth 1 - |2F - 1| with midpoint ECDF, then the
            // shortest depth-ordered prefix reaching mass p.
            let depth = |y: f64| {
                let mut f = 0.0;
                for (v, wi) in vals.iter().zip(&weights) {
                    if *v < y {
                        f += wi;
                    } else if *v == y {
                        f += 0.5 * wi;
                    }
                }
                1.0 - (2.0 * f / total - 1.0).abs()
            };
            let mut idx: Vec<usize> = (0..8).filter(|&i| weights[i] > 0.0).collect();
            idx.sort_by(|&a, &b| depth(vals[b]).total_cmp(&depth(vals[a])).then(a.cmp(&b)));
            let mut acc = 0.0;
            let mut chosen = Vec::new();
            for i in idx {
                chosen.push(i);
                acc += weights[i];
                if acc >= p * total {
                    break;
                }
            }
            assert_eq!(r.selected(), chosen.as_slice(), "p={p}");
            let mut diam = 0.0f64;
            for &a in &chosen {
                for &b in &chosen {
                    diam = diam.max((vals[a] - vals[b]).abs());
                }
            }
            assert!((r.d1 - diam).abs() < 1e-12);
        }
    }

    #[test]
    fn d1_examples() {
        let g = Grid::unit(11).unwrap();
        let ys = vec![Curve::zeros(g), Curve::constant(g, 3.0)];
        let s = FunctionalSample::new(vec![Curve::zeros(g); 2], ys).unwrap();
        let r = DepthSetResult {
            ordered_indices: vec![0, 1],
            depths: vec![1.0, 1.0],
            cutoff: 2,
            p: 0.9,
            d1: 0.0,
        };
        assert!((d1_spread(&r, &s).unwrap() - 3.0).abs() < 1e-12);
        let single = DepthSetResult { cutoff: 1, ..r };
        assert_eq!(d1_spread(&single, &s).unwrap(), 0.0);
    }

    #[test]
    fn d2_scalar_quartiles() {
        let s = scalar_sample(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let model = LocalModel::from_weights(&s, WeightVector::uniform(5)).unwrap();
        let d2 = d2_from_model(&model, &TauSpec::FirstComponent(0.5), &SolverConfig::default())
            .unwrap();
        assert!((d2 - 2.0).abs() < 1e-12, "{d2}");
        let d0 = d2_from_model(&model, &TauSpec::Zero, &SolverConfig::default()).unwrap();
        assert!(d0 <= 2e-8);
    }

    #[test]
    fn spearman_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_correlation(&a, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_correlation(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman_correlation(&a, &[1.0, 1.0, 1.0, 1.0]).is_none());
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn profile_records_isolated_points_as_missing() {
        let g = Grid::unit(5).unwrap();
        let xs = vec![
            Curve::constant(g, 0.0),
            Curve::constant(g, 0.01),
            Curve::constant(g, 0.02),
            Curve::constant(g, 10.0),
        ];
        let ys = vec![
            Curve::from_fn(g, |t| t),
            Curve::from_fn(g, |t| -t),
            Curve::from_fn(g, |t| t * t),
            Curve::from_fn(g, |t| 1.0 - t),
        ];
        let s = FunctionalSample::new(xs, ys).unwrap();
        let prof = spread_profile(&s, 0.5, 0.5, 0.5, KernelSpec::Indicator, &SolverConfig::default())
            .unwrap();
        assert_eq!(prof.missing.len(), 1);
        assert_eq!(prof.missing[0].index, 3);
        assert_eq!(prof.points.len() + prof.missing.len(), 4);
        assert!(prof.points.windows(2).all(|w| w[0].rank < w[1].rank));
    }
}
