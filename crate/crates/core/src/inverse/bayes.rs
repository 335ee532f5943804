//! Bayesian-optimization reverse design.
//!
//! A Gaussian process with a squared-exponential kernel models R² over θ
//! mapped to the unit square. After `n_init` uniform evaluations each
//! iteration fits the GP to the history, scores a pool of uniform candidates
//! by expected improvement and evaluates the best one.
//!
//! Observed values are centred and scaled to unit variance before fitting, so
//! the prior mean is the sample mean of the observations and the kernel
//! signal variance is relative to their spread.

use rand::Rng as _;

use super::{evaluate_candidate, Bounds, OptimizationTrace, StopRule, TargetSpec, TraceRecorder};
use crate::surrogate::SurrogateModel;
use crate::{rng, Error, Result};

/// Squared-exponential kernel hyperparameters and diagonal jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    /// Per-dimension length scales on the unit box.
    pub length_scales: [f64; 2],
    pub signal_variance: f64,
    pub jitter: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            length_scales: [0.2, 0.2],
            signal_variance: 1.0,
            jitter: 1e-6,
        }
    }
}

impl GpHyper {
    fn validate(&self) -> Result<()> {
        let ok = self.length_scales.iter().all(|&l| l > 0.0 && l.is_finite())
            && self.signal_variance > 0.0
            && self.signal_variance.is_finite()
            && self.jitter > 0.0;
        if !ok {
            return Err(Error::domain(format!(
                "GP hyperparameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn kernel(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d0 = (a[0] - b[0]) / self.length_scales[0];
        let d1 = (a[1] - b[1]) / self.length_scales[1];
        self.signal_variance * (-0.5 * (d0 * d0 + d1 * d1)).exp()
    }
}

/// Anything that yields a posterior `(mean, variance)` at a unit-box point.
pub trait Posterior {
    fn posterior(&self, x: [f64; 2]) -> (f64, f64);
}

const MAX_JITTER_ESCALATIONS: u32 = 6;

/// GP posterior over observations on the unit box.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyper,
    /// Jitter actually used after escalation.
    jitter: f64,
    x: Vec<[f64; 2]>,
    y: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Row-major lower Cholesky factor of `K + jitter·I` (n × n, stored densely).
    chol: Vec<f64>,
    /// `(K + jitter·I)⁻¹ · y_standardized`.
    alpha: Vec<f64>,
}

/// Fits a GP to `(θ on the unit box, objective)` pairs.
///
/// The jitter is escalated tenfold up to six times if the covariance is not
/// numerically positive definite.
pub fn gp_fit(observed: &[([f64; 2], f64)], hyper: &GpHyper) -> Result<GpModel> {
    hyper.validate()?;
    if observed.is_empty() {
        return Err(Error::domain("GP needs at least one observation"));
    }
    for (x, y) in observed {
        if !x.iter().all(|c| (0.0..=1.0).contains(c)) || !y.is_finite() {
            return Err(Error::domain(format!(
                "GP observation ({x:?}, {y}) must lie in the unit box with a finite value"
            )));
        }
    }
    let x: Vec<[f64; 2]> = observed.iter().map(|o| o.0).collect();
    let y: Vec<f64> = observed.iter().map(|o| o.1).collect();
    let mut jitter = hyper.jitter;
    for _ in 0..=MAX_JITTER_ESCALATIONS {
        if let Some(chol) = cholesky(&covariance(&x, hyper, jitter), x.len()) {
            let mut model = GpModel {
                hyper: *hyper,
                jitter,
                x,
                y,
                y_mean: 0.0,
                y_scale: 1.0,
                chol,
                alpha: Vec::new(),
            };
            model.update_alpha();
            return Ok(model);
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "GP covariance is not positive definite even with jitter {jitter:e}"
    )))
}

fn covariance(x: &[[f64; 2]], hyper: &GpHyper, jitter: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = hyper.kernel(x[i], x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += jitter;
    }
    k
}

/// Dense Cholesky `A = L·Lᵀ`; `None` when `A` is not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GpModel {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean far from all observations.
    pub fn prior_mean(&self) -> f64 {
        self.y_mean
    }

    /// Posterior variance far from all observations, in objective units².
    pub fn prior_variance(&self) -> f64 {
        self.hyper.signal_variance * self.y_scale * self.y_scale
    }

    /// Objective units per standardized unit.
    pub fn output_scale(&self) -> f64 {
        self.y_scale
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    /// Solves `L·z = b` in place.
    fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let s = dot(&self.chol[i * n..i * n + i], &b[..i]);
            b[i] = (b[i] - s) / self.chol[i * n + i];
        }
    }

    /// Solves `Lᵀ·z = b` in place.
    fn solve_upper(&self, b: &mut [f64]) {
        let n = self.n();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.chol[k * n + i] * b[k];
            }
            b[i] = s / self.chol[i * n + i];
        }
    }

    fn update_alpha(&mut self) {
        let n = self.n() as f64;
        self.y_mean = self.y.iter().sum::<f64>() / n;
        let var = self.y.iter().map(|y| (y - self.y_mean).powi(2)).sum::<f64>() / n;
        self.y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let mut alpha: Vec<f64> = self
            .y
            .iter()
            .map(|y| (y - self.y_mean) / self.y_scale)
            .collect();
        self.solve_lower(&mut alpha);
        self.solve_upper(&mut alpha);
        self.alpha = alpha;
    }

    /// Appends one observation by extending the Cholesky factor by a row.
    ///
    /// Falls back to a full refit (with jitter escalation) when the extended
    /// factor loses positive definiteness.
    pub fn add_observation(&mut self, x: [f64; 2], y: f64) -> Result<()> {
        let n = self.n();
        let mut row: Vec<f64> = self.x.iter().map(|&xi| self.hyper.kernel(xi, x)).collect();
        self.solve_lower(&mut row);
        let d2 = self.hyper.kernel(x, x) + self.jitter - dot(&row, &row);
        if !(d2 > 0.0 && d2.is_finite()) {
            let mut observed: Vec<_> = self.x.iter().copied().zip(self.y.iter().copied()).collect();
            observed.push((x, y));
            *self = gp_fit(&observed, &self.hyper)?;
            return Ok(());
        }
        let m = n + 1;
        let mut chol = vec![0.0; m * m];
        for i in 0..n {
            chol[i * m..i * m + n].copy_from_slice(&self.chol[i * n..i * n + n]);
        }
        chol[n * m..n * m + n].copy_from_slice(&row);
        chol[n * m + n] = d2.sqrt();
        self.chol = chol;
        self.x.push(x);
        self.y.push(y);
        self.update_alpha();
        Ok(())
    }

    /// Natural-log marginal likelihood of the standardized observations.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.n();
        let y_std: Vec<f64> = self
            .y
            .iter()
            .map(|y| (y - self.y_mean) / self.y_scale)
            .collect();
        let log_det: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * dot(&y_std, &self.alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and variance, reusing `buf` as scratch.
    fn posterior_with(&self, q: [f64; 2], buf: &mut Vec<f64>) -> (f64, f64) {
        buf.clear();
        buf.extend(self.x.iter().map(|&xi| self.hyper.kernel(xi, q)));
        let mean = self.y_mean + self.y_scale * dot(buf, &self.alpha);
        self.solve_lower(buf);
        let latent = (self.hyper.signal_variance - dot(buf, buf)).max(0.0);
        (mean, latent * self.y_scale * self.y_scale)
    }
}

impl Posterior for GpModel {
    fn posterior(&self, x: [f64; 2]) -> (f64, f64) {
        self.posterior_with(x, &mut Vec::with_capacity(self.n()))
    }
}

/// Posterior `(mean, variance)` at a unit-box query point.
pub fn gp_posterior(model: &GpModel, query: [f64; 2]) -> (f64, f64) {
    model.posterior(query)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `E[max(0, f − best)]` for `f ~ N(mean, variance)`.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let gain = mean - best;
    if variance <= 0.0 {
        return gain.max(0.0);
    }
    let sigma = variance.sqrt();
    let z = gain / sigma;
    (gain * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

/// Draws `candidate_pool` uniform points of the unit box and returns the one
/// with the largest expected improvement over `best`, with its EI. Ties go to
/// the earliest candidate.
pub fn acquire_ei<P: Posterior + ?Sized>(
    model: &P,
    best: f64,
    candidate_pool: usize,
    seed: u64,
) -> ([f64; 2], f64) {
    let mut rng = rng::seeded(seed);
    let mut chosen = ([0.0; 2], f64::NEG_INFINITY);
    for _ in 0..candidate_pool.max(1) {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let (m, v) = model.posterior(x);
        let ei = expected_improvement(m, v, best);
        if ei > chosen.1 {
            chosen = (x, ei);
        }
    }
    chosen
}

fn acquire_ei_gp(model: &GpModel, best: f64, candidate_pool: usize, seed: u64) -> ([f64; 2], f64) {
    let mut rng = rng::seeded(seed);
    let mut buf = Vec::with_capacity(model.n());
    let mut chosen = ([0.0; 2], f64::NEG_INFINITY);
    for _ in 0..candidate_pool.max(1) {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let (m, v) = model.posterior_with(x, &mut buf);
        let ei = expected_improvement(m, v, best);
        if ei > chosen.1 {
            chosen = (x, ei);
        }
    }
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesInverterConfig {
    /// Uniform evaluations before the GP takes over.
    pub n_init: usize,
    pub candidate_pool: usize,
    pub stop: StopRule,
    pub hyper: GpHyper,
    /// Re-select an isotropic length scale by log marginal likelihood every
    /// this many iterations; 0 disables.
    pub refit_every: usize,
    /// At most this many observations (the highest-scoring ones) enter the GP.
    pub max_gp_points: usize,
}

impl Default for BayesInverterConfig {
    fn default() -> Self {
        BayesInverterConfig {
            n_init: 10,
            candidate_pool: 1024,
            stop: StopRule::default(),
            hyper: GpHyper::default(),
            refit_every: 0,
            max_gp_points: 200,
        }
    }
}

impl BayesInverterConfig {
    pub fn validate(&self) -> Result<()> {
        self.stop.validate()?;
        self.hyper.validate()?;
        if self.n_init == 0 || self.candidate_pool == 0 || self.max_gp_points == 0 {
            return Err(Error::Config(
                "bayes.n_init, bayes.candidate_pool and bayes.max_gp_points must be positive".into(),
            ));
        }
        Ok(())
    }
}

const LENGTH_SCALE_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8];

/// Picks the isotropic length scale with the highest log marginal likelihood.
fn select_length_scale(observed: &[([f64; 2], f64)], base: &GpHyper) -> GpHyper {
    let mut best = (*base, f64::NEG_INFINITY);
    for &l in &LENGTH_SCALE_GRID {
        let hyper = GpHyper {
            length_scales: [l, l],
            ..*base
        };
        if let Ok(gp) = gp_fit(observed, &hyper) {
            let lml = gp.log_marginal_likelihood();
            if lml > best.1 {
                best = (hyper, lml);
            }
        }
    }
    best.0
}

/// Keeps the `cap` highest-valued observations, earliest first on ties.
fn gp_subset(history: &[([f64; 2], f64)], cap: usize) -> Vec<([f64; 2], f64)> {
    if history.len() <= cap {
        return history.to_vec();
    }
    let mut idx: Vec<usize> = (0..history.len()).collect();
    idx.sort_by(|&a, &b| history[b].1.total_cmp(&history[a].1).then(a.cmp(&b)));
    idx.truncate(cap);
    idx.sort_unstable();
    idx.into_iter().map(|i| history[i]).collect()
}

/// Bayesian-optimization inverter. All candidates are drawn inside `bounds`.
pub fn invert_bayes(
    model: &SurrogateModel,
    target: &TargetSpec,
    bounds: &Bounds,
    cfg: &BayesInverterConfig,
    seed: u64,
) -> Result<OptimizationTrace> {
    cfg.validate()?;
    if target.curve.is_empty() {
        return Err(Error::domain("target curve is empty"));
    }
    let mut init_rng = rng::seeded(seed);
    let mut rec = TraceRecorder::new(cfg.stop);
    let mut history: Vec<([f64; 2], f64)> = Vec::new();
    let mut hyper = cfg.hyper;

    let evaluate = |u: [f64; 2], rec: &mut TraceRecorder, history: &mut Vec<_>| -> Result<bool> {
        let theta = bounds.from_unit(u);
        let eval = evaluate_candidate(model, theta, target)?;
        history.push((u, eval.r2));
        Ok(rec.record(theta, eval.r2, eval.rmse))
    };

    for _ in 0..cfg.n_init {
        if !rec.budget_left() {
            break;
        }
        let u = [init_rng.random::<f64>(), init_rng.random::<f64>()];
        if evaluate(u, &mut rec, &mut history)? {
            return rec.finish(false);
        }
    }

    while rec.budget_left() {
        let iter = rec.len() + 1;
        let observed = gp_subset(&history, cfg.max_gp_points);
        if cfg.refit_every > 0 && (iter - 1 - cfg.n_init.min(iter - 1)) % cfg.refit_every == 0 {
            hyper = select_length_scale(&observed, &hyper);
        }
        let acq_seed = rng::derive_seed(seed, iter as u64);
        let u = match gp_fit(&observed, &hyper) {
            Ok(gp) => acquire_ei_gp(&gp, rec.best_r2(), cfg.candidate_pool, acq_seed).0,
            Err(e) => {
                rec.note(format!("iteration {iter}: {e}; sampled uniformly instead"));
                let mut r = rng::seeded(acq_seed);
                [r.random::<f64>(), r.random::<f64>()]
            }
        };
        if evaluate(u, &mut rec, &mut history)? {
            break;
        }
    }
    rec.finish(false)
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    use super::*;
    use crate::inverse::Outcome;
    use crate::oracle::{simulate_sweep, DeviceParams, OracleConfig};
    use crate::surrogate::Normalization;

    fn random_points(n: usize, seed: u64) -> Vec<([f64; 2], f64)> {
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|_| {
                let x = [r.random::<f64>(), r.random::<f64>()];
                (x, r.random_range(-3.0..1.0))
            })
            .collect()
    }

    /// Like `random_points`, but redraws any point closer than `gap` to an
    /// earlier one.
    fn spread_points(n: usize, seed: u64, gap: f64) -> Vec<([f64; 2], f64)> {
        let mut r = rng::seeded(seed);
        let mut out: Vec<([f64; 2], f64)> = Vec::with_capacity(n);
        while out.len() < n {
            let x = [r.random::<f64>(), r.random::<f64>()];
            let y = r.random_range(-3.0..1.0);
            if out.iter().all(|o| (o.0[0] - x[0]).hypot(o.0[1] - x[1]) >= gap) {
                out.push((x, y));
            }
        }
        out
    }

    /// Dense-solve oracle: mean and variance via an LU solve of the
    /// standardized system, independent of the Cholesky path.
    fn dense_posterior(obs: &[([f64; 2], f64)], hyper: &GpHyper, q: [f64; 2]) -> (f64, f64) {
        let n = obs.len();
        let ys: Vec<f64> = obs.iter().map(|o| o.1).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let k = DMatrix::from_fn(n, n, |i, j| {
            hyper.kernel(obs[i].0, obs[j].0) + if i == j { hyper.jitter } else { 0.0 }
        });
        let y = DVector::from_iterator(n, ys.iter().map(|y| (y - mean) / scale));
        let ks = DVector::from_iterator(n, obs.iter().map(|o| hyper.kernel(o.0, q)));
        let lu = k.lu();
        let alpha = lu.solve(&y).unwrap();
        let v = lu.solve(&ks).unwrap();
        (
            mean + scale * ks.dot(&alpha),
            scale * scale * (hyper.signal_variance - ks.dot(&v)),
        )
    }

    #[test]
    fn single_observation_is_interpolated() {
        let gp = gp_fit(&[([0.3, 0.6], 0.8)], &GpHyper::default()).unwrap();
        let (m, v) = gp_posterior(&gp, [0.3, 0.6]);
        assert!((m - 0.8).abs() < 1e-6);
        assert!(v <= 2.0 * gp.jitter());
    }

    #[test]
    fn duplicate_points_are_tolerated() {
        let obs = [([0.5, 0.5], 0.2), ([0.5, 0.5], 0.2), ([0.1, 0.9], -1.0)];
        let gp = gp_fit(&obs, &GpHyper::default()).unwrap();
        let (m, _) = gp_posterior(&gp, [0.5, 0.5]);
        assert!((m - 0.2).abs() < 1e-3);
    }

    #[test]
    fn interpolates_ten_points() {
        let obs = random_points(10, 4);
        let hyper = GpHyper {
            jitter: 1e-8,
            ..GpHyper::default()
        };
        let gp = gp_fit(&obs, &hyper).unwrap();
        let max_err = obs
            .iter()
            .map(|(x, y)| (gp_posterior(&gp, *x).0 - y).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "{max_err}");
    }

    #[test]
    fn observed_points_have_jitter_sized_variance() {
        let obs = random_points(6, 8);
        let gp = gp_fit(&obs, &GpHyper::default()).unwrap();
        let unit = gp.output_scale().powi(2);
        for (x, _) in &obs {
            assert!(gp_posterior(&gp, *x).1 <= 2.0 * gp.jitter() * unit);
        }
    }

    #[test]
    fn far_queries_revert_to_the_prior() {
        let obs = [([0.1, 0.1], 0.4), ([0.2, 0.15], -0.6), ([0.12, 0.3], 0.1)];
        let hyper = GpHyper {
            length_scales: [0.05, 0.05],
            ..GpHyper::default()
        };
        let gp = gp_fit(&obs, &hyper).unwrap();
        // (1, 1) is more than 10 length scales from every observation
        let (m, v) = gp_posterior(&gp, [1.0, 1.0]);
        assert!((m - gp.prior_mean()).abs() <= 0.01 * gp.output_scale());
        assert!((v - gp.prior_variance()).abs() <= 0.01 * gp.prior_variance());
    }

    #[test]
    fn symmetric_pair_predicts_shared_value() {
        let obs = [([0.3, 0.5], 0.7), ([0.7, 0.5], 0.7), ([0.5, 0.95], -0.5)];
        let hyper = GpHyper {
            length_scales: [0.2, 0.2],
            ..GpHyper::default()
        };
        // the third point breaks nothing along the mirror axis x = 0.5
        let gp = gp_fit(&obs[..2], &hyper).unwrap();
        let (m, _) = gp_posterior(&gp, [0.5, 0.5]);
        assert!((m - 0.7).abs() < 1e-12);
        let gp3 = gp_fit(&obs, &hyper).unwrap();
        let (left, _) = gp_posterior(&gp3, [0.4, 0.5]);
        let (right, _) = gp_posterior(&gp3, [0.6, 0.5]);
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(gp_fit(&[], &GpHyper::default()).is_err());
        assert!(gp_fit(&[([1.5, 0.0], 0.0)], &GpHyper::default()).is_err());
        let bad = GpHyper {
            length_scales: [0.0, 1.0],
            ..GpHyper::default()
        };
        assert!(gp_fit(&[([0.5, 0.5], 0.0)], &bad).is_err());
    }

    #[test]
    fn incremental_matches_refit() {
        let obs = random_points(12, 21);
        let hyper = GpHyper::default();
        let mut inc = gp_fit(&obs[..3], &hyper).unwrap();
        for (x, y) in &obs[3..] {
            inc.add_observation(*x, *y).unwrap();
        }
        let full = gp_fit(&obs, &hyper).unwrap();
        for (q, _) in random_points(20, 22) {
            let (m1, v1) = gp_posterior(&inc, q);
            let (m2, v2) = gp_posterior(&full, q);
            assert!((m1 - m2).abs() < 1e-9 && (v1 - v2).abs() < 1e-9);
        }
        assert!((inc.log_marginal_likelihood() - full.log_marginal_likelihood()).abs() < 1e-8);
    }

    struct Flat {
        mean: f64,
    }

    impl Posterior for Flat {
        fn posterior(&self, _x: [f64; 2]) -> (f64, f64) {
            (self.mean, 0.0)
        }
    }

    #[test]
    fn zero_variance_gives_zero_ei_and_first_candidate() {
        let (x, ei) = acquire_ei(&Flat { mean: 0.5 }, 0.5, 64, 3);
        assert_eq!(ei, 0.0);
        let mut r = rng::seeded(3);
        let first = [r.random::<f64>(), r.random::<f64>()];
        assert_eq!(x, first);
    }

    #[test]
    fn positive_variance_at_incumbent_has_positive_ei() {
        assert!(expected_improvement(0.9, 0.01, 0.9) > 0.0);
        assert!((expected_improvement(0.9, 0.01, 0.9) - 0.1 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn acquisition_is_seeded_and_inside_box() {
        let obs = random_points(8, 5);
        let gp = gp_fit(&obs, &GpHyper::default()).unwrap();
        let a = acquire_ei(&gp, 0.5, 256, 17);
        let b = acquire_ei(&gp, 0.5, 256, 17);
        assert_eq!(a, b);
        assert!(a.0.iter().all(|c| (0.0..=1.0).contains(c)));
        assert_eq!(acquire_ei_gp(&gp, 0.5, 256, 17), a);
    }

    /// Composite Simpson integral of `max(0, f − best)·N(f; m, s²)`.
    fn ei_quadrature(m: f64, var: f64, best: f64) -> f64 {
        let s = var.sqrt();
        let lo = best.max(m - 12.0 * s);
        let hi = (m + 12.0 * s).max(lo);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| (x - best).max(0.0) * (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn ei_matches_quadrature() {
        let mut r = rng::seeded(99);
        for _ in 0..10 {
            let m = r.random_range(-2.0..2.0);
            let var = r.random_range(0.01..2.0);
            let best = r.random_range(-2.0..2.0);
            let ei = expected_improvement(m, var, best);
            let q = ei_quadrature(m, var, best);
            assert!((ei - q).abs() < 1e-6, "m={m} var={var} best={best}: {ei} vs {q}");
        }
    }

    fn model() -> SurrogateModel {
        let norm = Normalization {
            input_mean: vec![0.0, 0.0, 1.25, 8.0],
            input_std: vec![1.5, 1.0, 0.45, 4.0],
            output_mean: vec![0.0],
            output_std: vec![10.0],
        };
        SurrogateModel::new(&[4, 16, 16, 1], norm, 12).unwrap()
    }

    fn target(model: &SurrogateModel, theta: DeviceParams) -> TargetSpec {
        let grid = simulate_sweep(theta, &OracleConfig::default(), 0.1).unwrap();
        TargetSpec::new(model.predict_sweep(theta, &grid).unwrap(), Some(theta)).unwrap()
    }

    #[test]
    fn trivially_met_threshold_converges_during_init() {
        let m = model();
        let t = target(&m, DeviceParams::new(1.0, 6.0).unwrap());
        let cfg = BayesInverterConfig {
            stop: StopRule {
                r2_threshold: f64::MIN_POSITIVE,
                max_iters: 100,
            },
            ..BayesInverterConfig::default()
        };
        // any candidate on a self-generated target scores far above zero here
        let trace = invert_bayes(&m, &t, &Bounds::device_range(), &cfg, 1).unwrap();
        assert_eq!(trace.outcome, Outcome::Converged);
        assert!(trace.len() <= cfg.n_init);
    }

    #[test]
    fn bayes_trace_is_seeded_bounded_and_monotone() {
        let m = model();
        let t = target(&m, DeviceParams::new(1.7, 12.5).unwrap());
        let bounds = Bounds::new(DeviceParams { t_dl: 0.6, t_fl: 3.0 }, DeviceParams { t_dl: 1.9, t_fl: 13.0 }).unwrap();
        let cfg = BayesInverterConfig {
            stop: StopRule {
                r2_threshold: 0.999_999,
                max_iters: 40,
            },
            candidate_pool: 128,
            refit_every: 10,
            ..BayesInverterConfig::default()
        };
        let a = invert_bayes(&m, &t, &bounds, &cfg, 5).unwrap();
        let b = invert_bayes(&m, &t, &bounds, &cfg, 5).unwrap();
        assert_eq!(
            a.iterations.iter().map(|r| (r.theta, r.r2.to_bits())).collect::<Vec<_>>(),
            b.iterations.iter().map(|r| (r.theta, r.r2.to_bits())).collect::<Vec<_>>()
        );
        assert!(a.iterations.iter().all(|r| bounds.contains(r.theta)));
        assert!(a.best_so_far().windows(2).all(|w| w[0] <= w[1]));
        assert!(a.converged() || a.len() == 40);
        let best = a.iterations.iter().map(|r| r.r2).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best.r2, best);
    }

    #[test]
    fn subset_keeps_the_best() {
        let hist = vec![([0.1, 0.1], 0.1), ([0.2, 0.2], 0.9), ([0.3, 0.3], -1.0), ([0.4, 0.4], 0.5)];
        let s = gp_subset(&hist, 2);
        assert_eq!(s, vec![([0.2, 0.2], 0.9), ([0.4, 0.4], 0.5)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn posterior_matches_dense_solve(seed in any::<u64>()) {
            let obs = random_points(5, seed);
            let mut r = rng::seeded(seed ^ 1);
            let hyper = GpHyper {
                length_scales: [r.random_range(0.1..0.6), r.random_range(0.1..0.6)],
                signal_variance: r.random_range(0.5..2.0),
                jitter: 1e-6,
            };
            let gp = gp_fit(&obs, &hyper).unwrap();
            prop_assume!(gp.jitter() == hyper.jitter);
            for _ in 0..5 {
                let q = [r.random::<f64>(), r.random::<f64>()];
                let (m, v) = gp_posterior(&gp, q);
                let (mo, vo) = dense_posterior(&obs, &hyper, q);
                prop_assert!((m - mo).abs() < 1e-8, "mean {} vs {}", m, mo);
                prop_assert!((v - vo.max(0.0)).abs() < 1e-8, "var {} vs {}", v, vo);
                prop_assert!(v >= 0.0);
            }
        }

        #[test]
        fn gp_misses_observations_by_the_nugget_term(seed in any::<u64>()) {
            // with noise σ², m(x_i) = y_i − scale·σ²·α_i where α = (K + σ²I)⁻¹ỹ
            let obs = spread_points(10, seed, 0.05);
            let hyper = GpHyper { jitter: 1e-8, ..GpHyper::default() };
            let gp = gp_fit(&obs, &hyper).unwrap();
            prop_assume!(gp.jitter() == hyper.jitter);
            let scale = gp.output_scale();
            let n = obs.len();
            let k = DMatrix::from_fn(n, n, |i, j| {
                hyper.kernel(obs[i].0, obs[j].0) + if i == j { hyper.jitter } else { 0.0 }
            });
            let y = DVector::from_iterator(n, obs.iter().map(|o| (o.1 - gp.prior_mean()) / scale));
            let alpha = k.lu().solve(&y).unwrap();
            for (i, (x, yi)) in obs.iter().enumerate() {
                let resid = yi - gp_posterior(&gp, *x).0;
                prop_assert!((resid - scale * hyper.jitter * alpha[i]).abs() < 1e-7 * scale.max(1.0),
                    "point {}: residual {} nugget term {}", i, resid, scale * hyper.jitter * alpha[i]);
            }
        }

        #[test]
        fn ei_is_non_negative(m in -3.0f64..3.0, v in 0.0f64..4.0, best in -3.0f64..3.0) {
            prop_assert!(expected_improvement(m, v, best) >= 0.0);
        }
    }
}
