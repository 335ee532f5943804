//! Gradient-based reverse design through the frozen surrogate.

use serde::{Deserialize, Serialize};

use super::{score, Bounds, OptimizationTrace, StopRule, TargetSpec, TraceRecorder};
use crate::gradients::loss_gradient_theta;
use crate::oracle::DeviceParams;
use crate::surrogate::SurrogateModel;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// Uniform draw inside the bounds.
    Random,
    Fixed(DeviceParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradInverterConfig {
    /// Step size α_θ in nm per unit (normalized) gradient.
    pub learning_rate: f64,
    pub stop: StopRule,
    pub clip_to_bounds: bool,
    /// Divide the gradient by `max(1, ‖g‖)` before stepping.
    pub normalize_gradient: bool,
    pub init: InitSpec,
    /// Number of starts used by [`multi_start`].
    pub starts: usize,
}

impl Default for GradInverterConfig {
    fn default() -> Self {
        GradInverterConfig {
            learning_rate: 0.05,
            stop: StopRule::default(),
            clip_to_bounds: true,
            normalize_gradient: true,
            init: InitSpec::Random,
            starts: 1,
        }
    }
}

impl GradInverterConfig {
    pub fn validate(&self) -> Result<()> {
        self.stop.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "gradient learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.starts == 0 {
            return Err(Error::Config("grad.starts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Descends `∂L/∂θ` from the configured start: `θ ← θ − α_θ·g`, projected
/// onto the bounds when `clip_to_bounds` is set.
///
/// Every iteration evaluates the current θ once; the run stops as soon as an
/// evaluation reaches the R² threshold. The trace's `best` record is the
/// highest-R² iterate, which need not be the last one.
pub fn invert_gradient(
    model: &SurrogateModel,
    target: &TargetSpec,
    bounds: &Bounds,
    cfg: &GradInverterConfig,
    seed: u64,
) -> Result<OptimizationTrace> {
    cfg.validate()?;
    if target.curve.is_empty() {
        return Err(Error::domain("target curve is empty"));
    }
    let mut theta = match cfg.init {
        InitSpec::Random => bounds.sample_uniform(&mut rng::seeded(seed)),
        InitSpec::Fixed(p) => {
            if !bounds.contains(p) {
                return Err(Error::domain(format!("initial params {p:?} lie outside the bounds")));
            }
            p
        }
    };
    let target_p = target.polarization();
    let mut rec = TraceRecorder::new(cfg.stop);
    let mut aborted = false;

    while rec.budget_left() {
        let g = loss_gradient_theta(model, theta, &target.curve)?;
        let (r2, rmse) = score(&g.prediction, &target_p)?;
        if rec.record(theta, r2, rmse) {
            break;
        }
        if !g.is_finite() {
            rec.note(format!(
                "iteration {}: non-finite gradient {:?} at {theta:?}",
                rec.len(),
                g.d_theta
            ));
            aborted = true;
            break;
        }
        let scale = if cfg.normalize_gradient {
            1.0 / g.norm().max(1.0)
        } else {
            1.0
        };
        let next = DeviceParams {
            t_dl: theta.t_dl - cfg.learning_rate * scale * g.d_theta[0],
            t_fl: theta.t_fl - cfg.learning_rate * scale * g.d_theta[1],
        };
        theta = if cfg.clip_to_bounds {
            bounds.clamp(next)
        } else {
            next
        };
    }
    rec.finish(aborted)
}

/// Runs [`invert_gradient`] from `k_starts` starts and keeps the trace with the
/// highest best R² (lowest start index on ties).
///
/// The iteration budget `max_iters` is shared: start `i` gets
/// `max_iters / k_starts` iterations, plus one for the first
/// `max_iters % k_starts` starts. Start 0 uses `seed` itself, so a single
/// start reproduces [`invert_gradient`]. Remaining starts are skipped once one
/// converges.
pub fn multi_start(
    model: &SurrogateModel,
    target: &TargetSpec,
    bounds: &Bounds,
    cfg: &GradInverterConfig,
    k_starts: usize,
    seed: u64,
) -> Result<OptimizationTrace> {
    cfg.validate()?;
    if k_starts == 0 {
        return Err(Error::domain("k_starts must be at least 1"));
    }
    let base = cfg.stop.max_iters / k_starts;
    let extra = cfg.stop.max_iters % k_starts;
    let mut best: Option<OptimizationTrace> = None;
    for i in 0..k_starts {
        let budget = base + usize::from(i < extra);
        if budget == 0 {
            break;
        }
        let start_cfg = GradInverterConfig {
            stop: StopRule {
                max_iters: budget,
                ..cfg.stop
            },
            init: if i == 0 { cfg.init } else { InitSpec::Random },
            ..*cfg
        };
        let start_seed = if i == 0 { seed } else { rng::derive_seed(seed, i as u64) };
        let trace = invert_gradient(model, target, bounds, &start_cfg, start_seed)?;
        let converged = trace.converged();
        if best.as_ref().is_none_or(|b| trace.best.r2 > b.best.r2) {
            best = Some(trace);
        }
        if converged {
            break;
        }
    }
    Ok(best.expect("at least one start runs"))
}
