//! Conditional sample spatial quantiles.
//!
//! The objective is the kernel-weighted spatial check function
//!
//! ```text
//! g(Q) = sum_i w_i ||Q - Y_i|| / sum_i w_i  -  <tau, Q>
//! ```
//!
//! over coordinates in an orthonormal basis. It is convex but has a kink at
//! every response, so the solver first checks whether a response is itself a
//! minimizer and otherwise runs a damped Newton iteration on the smooth part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    effective_dimension, eigenbasis, estimate_conditional_covariance, Basis,
};
use crate::error::{FunqError, Result};
use crate::estimators::FunctionalSample;
use crate::function_space::{project, reconstruct, CoefVector, Curve};
use crate::kernel::{KernelSpec, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub step_tol: f64,
    pub grad_tol: f64,
    pub coincidence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tol: 1e-8,
            grad_tol: 1e-8,
            coincidence_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.step_tol, self.grad_tol, self.coincidence_tol];
        if self.max_iterations == 0 || tols.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(FunqError::InvalidArgument(format!(
                "invalid solver configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Weighted responses in basis coordinates plus the quantile index `tau`.
///
/// Rows with zero weight are carried along but never influence the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileProblem {
    tau: CoefVector,
    responses: Vec<Vec<f64>>,
    weights: WeightVector,
    basis: Option<Basis>,
    center: Option<Curve>,
}

impl QuantileProblem {
    pub fn new(tau: CoefVector, responses: Vec<Vec<f64>>, weights: WeightVector) -> Result<Self> {
        let d = tau.dim();
        if d == 0 {
            return Err(FunqError::InvalidArgument("tau must have dimension >= 1".into()));
        }
        if !(tau.euclidean_norm() < 1.0) {
            return Err(FunqError::InvalidArgument(format!(
                "tau must have norm < 1, got {}",
                tau.euclidean_norm()
            )));
        }
        if responses.len() != weights.len() {
            return Err(FunqError::DimensionMismatch {
                expected: responses.len(),
                found: weights.len(),
            });
        }
        if let Some(row) = responses.iter().find(|r| r.len() != d) {
            return Err(FunqError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if responses.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FunqError::InvalidArgument("responses must be finite".into()));
        }
        if weights.total() <= 0.0 {
            return Err(FunqError::EmptyNeighborhood);
        }
        Ok(Self {
            tau,
            responses,
            weights,
            basis: None,
            center: None,
        })
    }

    /// Attach the basis (and optional affine center) used to turn fitted
    /// coordinates back into a curve.
    pub fn with_basis(mut self, basis: Basis, center: Option<Curve>) -> Result<Self> {
        if basis.dim() != self.dim() {
            return Err(FunqError::DimensionMismatch {
                expected: self.dim(),
                found: basis.dim(),
            });
        }
        if let Some(c) = &center {
            if *c.grid() != basis.grid() {
                return Err(FunqError::GridMismatch);
            }
        }
        self.basis = Some(basis);
        self.center = center;
        Ok(self)
    }

    pub fn tau(&self) -> &CoefVector {
        &self.tau
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.tau.dim()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Same problem with `tau` replaced.
    pub fn with_tau(&self, tau: CoefVector) -> Result<Self> {
        let mut p = Self::new(tau, self.responses.clone(), self.weights.clone())?;
        p.basis = self.basis.clone();
        p.center = self.center.clone();
        if p.dim() != self.dim() {
            return Err(FunqError::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(p)
    }

    /// Curve represented by coordinates `q`.
    pub fn curve_of(&self, q: &CoefVector) -> Result<Option<Curve>> {
        let Some(basis) = &self.basis else {
            return Ok(None);
        };
        let mut c = reconstruct(q, basis)?;
        if let Some(center) = &self.center {
            c.axpy(1.0, center)?;
        }
        Ok(Some(c))
    }

    fn active(&self) -> impl Iterator<Item = (usize, &[f64], f64)> + '_ {
        self.responses
            .iter()
            .zip(self.weights.weights())
            .enumerate()
            .filter(|(_, (_, w))| **w > 0.0)
            .map(|(i, (r, w))| (i, r.as_slice(), *w))
    }

    fn check_dim(&self, q: &CoefVector) -> Result<()> {
        if q.dim() == self.dim() {
            Ok(())
        } else {
            Err(FunqError::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    /// A response row is itself the minimizer.
    CandidatePoint(usize),
    NewtonConverged,
    /// Iteration budget exhausted; the best iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub point: CoefVector,
    pub curve: Option<Curve>,
    pub status: FitStatus,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub objective: f64,
}

impl QuantileFit {
    pub fn is_certified(&self) -> bool {
        !matches!(self.status, FitStatus::MaxIterations)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn euclid(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn objective_raw(problem: &QuantileProblem, q: &[f64]) -> f64 {
    let spread: f64 = problem.active().map(|(_, y, w)| w * dist(q, y)).sum();
    spread / problem.weights.total() - dot(problem.tau.as_slice(), q)
}

pub fn objective(problem: &QuantileProblem, q: &CoefVector) -> Result<f64> {
    problem.check_dim(q)?;
    Ok(objective_raw(problem, q.as_slice()))
}

fn coincident(problem: &QuantileProblem, q: &[f64], tol: f64) -> Option<usize> {
    problem
        .active()
        .find(|(_, y, _)| dist(q, y) <= tol)
        .map(|(i, _, _)| i)
}

/// Weighted mean of unit vectors from each response to `q`, minus `tau`.
fn gradient_raw(problem: &QuantileProblem, q: &[f64], tol: f64) -> Result<Vec<f64>> {
    let d = problem.dim();
    let mut g = vec![0.0; d];
    for (i, y, w) in problem.active() {
        let r = dist(q, y);
        if r <= tol {
            return Err(FunqError::NotDifferentiable(i));
        }
        for k in 0..d {
            g[k] += w * (q[k] - y[k]) / r;
        }
    }
    let total = problem.weights.total();
    for (gk, tk) in g.iter_mut().zip(problem.tau.as_slice()) {
        *gk = *gk / total - tk;
    }
    Ok(g)
}

/// Derivative of the objective at a non-data point, using the default
/// coincidence tolerance.
pub fn gradient(problem: &QuantileProblem, q: &CoefVector) -> Result<CoefVector> {
    gradient_with(problem, q, &SolverConfig::default())
}

pub fn gradient_with(
    problem: &QuantileProblem,
    q: &CoefVector,
    config: &SolverConfig,
) -> Result<CoefVector> {
    problem.check_dim(q)?;
    gradient_raw(problem, q.as_slice(), config.coincidence_tol).map(CoefVector)
}

struct PointSums {
    /// Sum over rows away from `Y_i` of `w_j (Y_i - Y_j) / ||Y_i - Y_j||`.
    directions: Vec<f64>,
    away_weight: f64,
    coincident_weight: f64,
}

fn point_sums(problem: &QuantileProblem, i: usize, tol: f64) -> PointSums {
    let yi = &problem.responses[i];
    let mut directions = vec![0.0; problem.dim()];
    let mut away_weight = 0.0;
    let mut coincident_weight = 0.0;
    for (_, yj, w) in problem.active() {
        let r = dist(yi, yj);
        if r <= tol {
            coincident_weight += w;
        } else {
            away_weight += w;
            for k in 0..directions.len() {
                directions[k] += w * (yi[k] - yj[k]) / r;
            }
        }
    }
    PointSums {
        directions,
        away_weight,
        coincident_weight,
    }
}

/// Screening inequality for whether response `i` minimizes the objective:
///
/// `|| sum_{j not in J_i} w_j [u_ij - tau] || <= (1 + ||tau||) sum_{j in J_i} w_j`
///
/// where `J_i` are the rows coinciding with row `i` and `u_ij` the unit vector
/// from `Y_j` to `Y_i`. Every minimizing response passes; for `tau != 0` some
/// non-minimizing responses pass as well, see [`is_minimizer_at`].
pub fn candidate_check(problem: &QuantileProblem, i: usize) -> bool {
    candidate_check_with(problem, i, &SolverConfig::default())
}

pub fn candidate_check_with(problem: &QuantileProblem, i: usize, config: &SolverConfig) -> bool {
    if i >= problem.len() {
        return false;
    }
    let s = point_sums(problem, i, config.coincidence_tol);
    let tau = problem.tau.as_slice();
    let lhs: Vec<f64> = s
        .directions
        .iter()
        .zip(tau)
        .map(|(v, t)| v - s.away_weight * t)
        .collect();
    let rhs = (1.0 + euclid(tau)) * s.coincident_weight;
    euclid(&lhs) <= rhs + SLACK * problem.weights.total()
}

const SLACK: f64 = 1e-12;

/// Exact subgradient optimality test at response `i`:
/// `|| sum_{j not in J_i} w_j u_ij - W tau || <= sum_{j in J_i} w_j`.
pub fn is_minimizer_at(problem: &QuantileProblem, i: usize, config: &SolverConfig) -> bool {
    if i >= problem.len() {
        return false;
    }
    let s = point_sums(problem, i, config.coincidence_tol);
    let total = problem.weights.total();
    let r: Vec<f64> = s
        .directions
        .iter()
        .zip(problem.tau.as_slice())
        .map(|(v, t)| v - total * t)
        .collect();
    euclid(&r) <= s.coincident_weight + SLACK * total
}

/// One Newton-Raphson update `q - A^{-1} V`.
pub fn newton_step(problem: &QuantileProblem, q: &CoefVector) -> Result<CoefVector> {
    newton_step_with(problem, q, &SolverConfig::default())
}

pub fn newton_step_with(
    problem: &QuantileProblem,
    q: &CoefVector,
    config: &SolverConfig,
) -> Result<CoefVector> {
    problem.check_dim(q)?;
    newton_raw(problem, q.as_slice(), config.coincidence_tol).map(CoefVector)
}

fn newton_raw(problem: &QuantileProblem, q: &[f64], tol: f64) -> Result<Vec<f64>> {
    let d = problem.dim();
    let tau = problem.tau.as_slice();
    let mut v = DVector::<f64>::zeros(d);
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (i, y, w) in problem.active() {
        for k in 0..d {
            diff[k] = q[k] - y[k];
        }
        let r = euclid(&diff);
        if r <= tol {
            return Err(FunqError::NotDifferentiable(i));
        }
        let r3 = r * r * r;
        for k in 0..d {
            v[k] += w * (diff[k] / r - tau[k]);
            a[(k, k)] += w / r;
            for l in 0..d {
                a[(k, l)] -= w * diff[k] * diff[l] / r3;
            }
        }
    }
    let delta = solve_spd(a, &v)?;
    Ok((0..d).map(|k| q[k] - delta[k]).collect())
}

/// Cholesky solve with a doubling ridge fallback.
fn solve_spd(a: DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let d = a.nrows();
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(v));
    }
    let trace = a.trace();
    let mut lambda = if trace > 0.0 {
        1e-10 * trace / d as f64
    } else {
        1e-10
    };
    for _ in 0..=20 {
        let mut reg = a.clone();
        for k in 0..d {
            reg[(k, k)] += lambda;
        }
        if let Some(ch) = reg.cholesky() {
            let x = ch.solve(v);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
        lambda *= 2.0;
    }
    Err(FunqError::SingularHessian)
}

/// Lower weighted median of each coordinate.
pub fn weighted_coordinatewise_median(problem: &QuantileProblem) -> CoefVector {
    let d = problem.dim();
    let active: Vec<(&[f64], f64)> = problem.active().map(|(_, y, w)| (y, w)).collect();
    let half = 0.5 * problem.weights.total();
    let mut out = vec![0.0; d];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut col: Vec<(f64, f64)> = active.iter().map(|(y, w)| (y[k], *w)).collect();
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (value, w) in col {
            acc += w;
            *slot = value;
            if acc >= half {
                break;
            }
        }
    }
    CoefVector(out)
}

/// Minimizes the objective: response check first, then damped Newton.
pub fn solve(
    problem: &QuantileProblem,
    config: &SolverConfig,
    initial: Option<&CoefVector>,
) -> Result<QuantileFit> {
    config.validate()?;
    if let Some(q0) = initial {
        problem.check_dim(q0)?;
    }
    if problem.weights.total() <= 0.0 {
        return Err(FunqError::EmptyNeighborhood);
    }
    if let Some(fit) = best_candidate(problem, config)? {
        return Ok(fit);
    }
    newton_phase(problem, config, initial)
}

fn best_candidate(problem: &QuantileProblem, config: &SolverConfig) -> Result<Option<QuantileFit>> {
    let tol = config.coincidence_tol;
    let mut best: Option<(f64, usize)> = None;
    for (i, yi, _) in problem.active() {
        // one representative (the lowest index) per group of coincident rows
        if problem.active().take_while(|(j, _, _)| *j < i).any(|(_, yj, _)| dist(yi, yj) <= tol) {
            continue;
        }
        if !(candidate_check_with(problem, i, config) && is_minimizer_at(problem, i, config)) {
            continue;
        }
        let g = objective_raw(problem, yi);
        best = match best {
            Some((bg, bi)) if g >= bg - 1e-12 * (1.0 + bg.abs()) => Some((bg, bi)),
            _ => Some((g, i)),
        };
    }
    let Some((g, i)) = best else {
        return Ok(None);
    };
    let point = CoefVector(problem.responses[i].clone());
    Ok(Some(QuantileFit {
        curve: problem.curve_of(&point)?,
        point,
        status: FitStatus::CandidatePoint(i),
        iterations: 0,
        final_gradient_norm: 0.0,
        objective: g,
    }))
}

/// Moves off the kink at response `i` along the steepest descent direction
/// of the objective, halving the step until the objective drops.
fn escape_kink(problem: &QuantileProblem, i: usize, config: &SolverConfig) -> Option<Vec<f64>> {
    let s = point_sums(problem, i, config.coincidence_tol);
    let total = problem.weights.total();
    let yi = &problem.responses[i];
    let r: Vec<f64> = s
        .directions
        .iter()
        .zip(problem.tau.as_slice())
        .map(|(v, t)| v - total * t)
        .collect();
    let rn = euclid(&r);
    if rn == 0.0 {
        return None;
    }
    let nearest = problem
        .active()
        .map(|(_, y, _)| dist(yi, y))
        .filter(|d| *d > config.coincidence_tol)
        .fold(f64::INFINITY, f64::min);
    let mut t = if nearest.is_finite() { 0.5 * nearest } else { 1.0 };
    let g0 = objective_raw(problem, yi);
    let floor = 10.0 * config.coincidence_tol;
    while t > floor {
        let cand: Vec<f64> = yi.iter().zip(&r).map(|(y, rk)| y - t * rk / rn).collect();
        if objective_raw(problem, &cand) < g0 {
            return Some(cand);
        }
        t *= 0.5;
    }
    Some(yi.iter().zip(&r).map(|(y, rk)| y - floor * rk / rn).collect())
}

fn newton_phase(
    problem: &QuantileProblem,
    config: &SolverConfig,
    initial: Option<&CoefVector>,
) -> Result<QuantileFit> {
    let tol = config.coincidence_tol;
    let mut q = initial
        .cloned()
        .unwrap_or_else(|| weighted_coordinatewise_median(problem))
        .0;
    if let Some(i) = coincident(problem, &q, tol) {
        q = escape_kink(problem, i, config).unwrap_or(q);
    }

    let mut g_q = objective_raw(problem, &q);
    let mut record = g_q;
    let mut best = (q.clone(), g_q);
    let mut iterations = 0;

    loop {
        let grad = match gradient_raw(problem, &q, tol) {
            Ok(g) => g,
            Err(FunqError::NotDifferentiable(i)) => {
                match escape_kink(problem, i, config) {
                    Some(next) => {
                        q = next;
                        g_q = objective_raw(problem, &q);
                        iterations += 1;
                        if iterations >= config.max_iterations {
                            break;
                        }
                        continue;
                    }
                    None => break,
                }
            }
            Err(e) => return Err(e),
        };
        let grad_norm = euclid(&grad);
        if grad_norm <= config.grad_tol {
            let (q, g_q, grad_norm) = polish(problem, q, g_q, grad_norm, tol);
            return finish(problem, q, g_q, FitStatus::NewtonConverged, iterations, grad_norm);
        }
        if iterations >= config.max_iterations {
            break;
        }
        iterations += 1;

        let proposal = newton_raw(problem, &q, tol)?;
        let g_prop = objective_raw(problem, &proposal);
        let next = if g_prop <= record {
            Some(proposal)
        } else {
            damped(problem, &q, g_q, &proposal, g_prop, record)
        };
        // no blend decreased the objective: numerically at the optimum
        let Some(next) = next else {
            break;
        };
        q = next;
        g_q = objective_raw(problem, &q);
        record = record.min(g_q);
        if g_q < best.1 {
            best = (q.clone(), g_q);
        }
    }

    let (q, g) = if g_q <= best.1 { (q, g_q) } else { best };
    let grad_norm = gradient_raw(problem, &q, tol)
        .map(|g| euclid(&g))
        .unwrap_or(f64::INFINITY);
    finish(problem, q, g, FitStatus::MaxIterations, iterations, grad_norm)
}

/// One extra Newton step past the gradient test, kept if it lowers the
/// gradient without raising the objective beyond rounding. Near the optimum the step is quadratically
/// convergent, so this removes the residual error left by `grad_tol`.
fn polish(
    problem: &QuantileProblem,
    q: Vec<f64>,
    g_q: f64,
    grad_norm: f64,
    tol: f64,
) -> (Vec<f64>, f64, f64) {
    let Ok(next) = newton_raw(problem, &q, tol) else {
        return (q, g_q, grad_norm);
    };
    let g_next = objective_raw(problem, &next);
    match gradient_raw(problem, &next, tol) {
        Ok(grad) if g_next <= g_q + 1e-12 * (1.0 + g_q.abs()) && euclid(&grad) < grad_norm => {
            let norm = euclid(&grad);
            (next, g_next, norm)
        }
        _ => (q, g_q, grad_norm),
    }
}

/// Blend `f q + (1 - f) q'` for a Newton proposal that did not improve on
/// the running minimum. Uses `f = g(q') / (g(q') + record)` when both values
/// are positive and the blend does not increase the objective; otherwise
/// halves the step (`f = 1/2, 3/4, 7/8, ...`).
fn damped(
    problem: &QuantileProblem,
    q: &[f64],
    g_q: f64,
    proposal: &[f64],
    g_prop: f64,
    record: f64,
) -> Option<Vec<f64>> {
    let blend = |f: f64| -> Vec<f64> {
        q.iter()
            .zip(proposal)
            .map(|(a, b)| f * a + (1.0 - f) * b)
            .collect()
    };
    if g_prop > 0.0 && record > 0.0 {
        let f = g_prop / (g_prop + record);
        if (0.0..1.0).contains(&f) {
            let cand = blend(f);
            if objective_raw(problem, &cand) <= g_q {
                return Some(cand);
            }
        }
    }
    let mut shrink = 0.5;
    for _ in 0..60 {
        let cand = blend(1.0 - shrink);
        if objective_raw(problem, &cand) <= g_q {
            return Some(cand);
        }
        shrink *= 0.5;
    }
    None
}

fn finish(
    problem: &QuantileProblem,
    q: Vec<f64>,
    objective: f64,
    status: FitStatus,
    iterations: usize,
    final_gradient_norm: f64,
) -> Result<QuantileFit> {
    let point = CoefVector(q);
    Ok(QuantileFit {
        curve: problem.curve_of(&point)?,
        point,
        status,
        iterations,
        final_gradient_norm,
        objective,
    })
}

/// How the quantile index is specified relative to the local basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TauSpec {
    /// The spatial median.
    Zero,
    /// `scale * e_1`.
    FirstComponent(f64),
    /// Explicit coordinates; padded with zeros up to the basis dimension.
    Coefficients(Vec<f64>),
}

impl TauSpec {
    pub fn resolve(&self, d: usize) -> Result<CoefVector> {
        match self {
            TauSpec::Zero => Ok(CoefVector::zeros(d)),
            TauSpec::FirstComponent(s) => Ok(CoefVector::unit(d, 0).scaled(*s)),
            TauSpec::Coefficients(c) => {
                if c.len() > d {
                    return Err(FunqError::DimensionMismatch {
                        expected: d,
                        found: c.len(),
                    });
                }
                let mut v = c.clone();
                v.resize(d, 0.0);
                Ok(CoefVector(v))
            }
        }
    }

    pub fn negated(&self) -> TauSpec {
        match self {
            TauSpec::Zero => TauSpec::Zero,
            TauSpec::FirstComponent(s) => TauSpec::FirstComponent(-s),
            TauSpec::Coefficients(c) => TauSpec::Coefficients(c.iter().map(|v| -v).collect()),
        }
    }
}

impl std::fmt::Display for TauSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TauSpec::Zero => write!(f, "0"),
            TauSpec::FirstComponent(s) => write!(f, "{s}u1"),
            TauSpec::Coefficients(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Everything needed to compute conditional quantiles at one evaluation
/// point: weights, the local eigenbasis, and responses in its coordinates.
///
/// Coordinates are taken relative to the kernel-weighted conditional mean,
/// so quantile curves are `mean + sum_k q_k e_k`.
#[derive(Debug, Clone)]
pub struct LocalModel {
    weights: WeightVector,
    basis: Basis,
    center: Curve,
    coords: Vec<Vec<f64>>,
}

impl LocalModel {
    pub fn fit(sample: &FunctionalSample, x0: &Curve, h: f64, spec: KernelSpec) -> Result<Self> {
        let w = sample.weights_at(x0, h, spec)?;
        Self::from_weights(sample, w)
    }

    pub fn from_weights(sample: &FunctionalSample, weights: WeightVector) -> Result<Self> {
        let cov = estimate_conditional_covariance(sample, &weights)?;
        let grid = cov.grid;
        let m = weights.positive_count();
        let full = eigenbasis(&cov, grid.count())?;
        let d = effective_dimension(m, full.eigenvalues());
        let basis = full.truncated(d)?;
        let center = cov.mean;
        let coords = sample
            .responses()
            .iter()
            .zip(weights.weights())
            .map(|(y, &w)| {
                if w > 0.0 {
                    project(&y.sub(&center)?, &basis).map(|c| c.0)
                } else {
                    Ok(vec![0.0; d])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights,
            basis,
            center,
            coords,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn center(&self) -> &Curve {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn neighborhood_count(&self) -> usize {
        self.weights.positive_count()
    }

    pub fn problem(&self, tau: &TauSpec) -> Result<QuantileProblem> {
        QuantileProblem::new(
            tau.resolve(self.dim())?,
            self.coords.clone(),
            self.weights.clone(),
        )?
        .with_basis(self.basis.clone(), Some(self.center.clone()))
    }

    pub fn quantile(&self, tau: &TauSpec, config: &SolverConfig) -> Result<QuantileFit> {
        solve(&self.problem(tau)?, config, None)
    }
}

/// Conditional spatial quantile curve of the response given `x0`.
pub fn conditional_quantile(
    sample: &FunctionalSample,
    x0: &Curve,
    h: f64,
    spec: KernelSpec,
    tau: &TauSpec,
    config: &SolverConfig,
) -> Result<QuantileFit> {
    LocalModel::fit(sample, x0, h, spec)?.quantile(tau, config)
}
