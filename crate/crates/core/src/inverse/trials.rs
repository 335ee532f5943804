//! Randomized multi-trial protocol: random oracle targets, random starts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bayes::{invert_bayes, BayesInverterConfig};
use super::grad::{multi_start, GradInverterConfig};
use super::{bounds_from_dataset, Bounds, OptimizationTrace, TargetSpec};
use crate::dataset::DatasetSplit;
use crate::oracle::{simulate_sweep, DeviceParams, OracleConfig, DEFAULT_V_STEP};
use crate::surrogate::SurrogateModel;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Grad,
    Bayes,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Grad => "grad",
            Method::Bayes => "bayes",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(Method::Grad),
            "bayes" => Ok(Method::Bayes),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected grad or bayes"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialsConfig {
    pub method: Method,
    pub n_trials: usize,
    pub seed: u64,
    /// Oracle used to build the targets.
    pub oracle: OracleConfig,
    pub v_step: f64,
    pub grad: GradInverterConfig,
    pub bayes: BayesInverterConfig,
    /// Redraw θ* whenever it coincides with a training device.
    pub exclude_training: bool,
}

impl Default for TrialsConfig {
    fn default() -> Self {
        TrialsConfig {
            method: Method::Grad,
            n_trials: 50,
            seed: 0,
            oracle: OracleConfig::default(),
            v_step: DEFAULT_V_STEP,
            grad: GradInverterConfig::default(),
            bayes: BayesInverterConfig::default(),
            exclude_training: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub theta_star: DeviceParams,
    /// `Err` holds the message of an inverter failure.
    pub trace: std::result::Result<OptimizationTrace, String>,
}

impl TrialResult {
    /// Recovered θ within `frac` of the box width of θ* in both coordinates.
    pub fn recovered_within(&self, bounds: &Bounds, frac: f64) -> bool {
        let Ok(trace) = &self.trace else {
            return false;
        };
        let w = bounds.width();
        let got = trace.best.theta;
        (got.t_dl - self.theta_star.t_dl).abs() <= frac * w[0]
            && (got.t_fl - self.theta_star.t_fl).abs() <= frac * w[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialsSummary {
    pub n_trials: usize,
    /// Trials whose inverter returned an error.
    pub failed: usize,
    pub converged: usize,
    pub mean_final_r2: f64,
    pub median_final_r2: f64,
    pub mean_iterations: f64,
    /// Fraction of all trials that converged.
    pub success_rate: f64,
    /// Fraction of converged trials whose recovered θ lies within 10% of the
    /// box width of θ* in each coordinate; NaN with no converged trials.
    pub recovery_rate: f64,
    /// Mean absolute recovery error in nm over successful traces.
    pub mean_abs_error_dl: f64,
    pub mean_abs_error_fl: f64,
}

pub const RECOVERY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialsReport {
    pub method: Method,
    pub bounds: Bounds,
    pub trials: Vec<TrialResult>,
    pub summary: TrialsSummary,
}

impl TrialsReport {
    /// `(trial, trace)` pairs for [`super::write_traces`]; failed trials have
    /// no rows.
    pub fn traces(&self) -> impl Iterator<Item = (usize, &OptimizationTrace)> {
        self.trials
            .iter()
            .filter_map(|t| t.trace.as_ref().ok().map(|tr| (t.trial, tr)))
    }

    /// Plain-text `key: value` summary document.
    pub fn render_summary(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k}: {v}\n"));
        line("method", self.method.to_string());
        line("n_trials", s.n_trials.to_string());
        line("failed", s.failed.to_string());
        line("converged", s.converged.to_string());
        line("success_rate", format!("{:.4}", s.success_rate));
        line("mean_final_r2", format!("{:.6}", s.mean_final_r2));
        line("median_final_r2", format!("{:.6}", s.median_final_r2));
        line("mean_iterations", format!("{:.2}", s.mean_iterations));
        line("recovery_rate", format!("{:.4}", s.recovery_rate));
        line("mean_abs_error_dl_nm", format!("{:.4}", s.mean_abs_error_dl));
        line("mean_abs_error_fl_nm", format!("{:.4}", s.mean_abs_error_fl));
        line(
            "bounds",
            format!(
                "t_dl [{}, {}] nm, t_fl [{}, {}] nm",
                self.bounds.lo.t_dl, self.bounds.hi.t_dl, self.bounds.lo.t_fl, self.bounds.hi.t_fl
            ),
        );
        for t in &self.trials {
            let detail = match &t.trace {
                Ok(tr) => format!(
                    "theta_star=({:.4}, {:.4}) best=({:.4}, {:.4}) r2={:.6} iters={} outcome={:?}",
                    t.theta_star.t_dl,
                    t.theta_star.t_fl,
                    tr.best.theta.t_dl,
                    tr.best.theta.t_fl,
                    tr.best.r2,
                    tr.len(),
                    tr.outcome
                ),
                Err(e) => format!(
                    "theta_star=({:.4}, {:.4}) error={e}",
                    t.theta_star.t_dl, t.theta_star.t_fl
                ),
            };
            line(&format!("trial {}", t.trial), detail);
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn summarize(trials: &[TrialResult], bounds: &Bounds) -> TrialsSummary {
    let ok: Vec<(&TrialResult, &OptimizationTrace)> = trials
        .iter()
        .filter_map(|t| t.trace.as_ref().ok().map(|tr| (t, tr)))
        .collect();
    let mut finals: Vec<f64> = ok.iter().map(|(_, tr)| tr.final_r2()).collect();
    let iters: Vec<f64> = ok.iter().map(|(_, tr)| tr.len() as f64).collect();
    let converged: Vec<&TrialResult> = ok
        .iter()
        .filter(|(_, tr)| tr.converged())
        .map(|(t, _)| *t)
        .collect();
    let recovered = converged
        .iter()
        .filter(|t| t.recovered_within(bounds, RECOVERY_TOLERANCE))
        .count();
    let err_dl: Vec<f64> = ok
        .iter()
        .map(|(t, tr)| (tr.best.theta.t_dl - t.theta_star.t_dl).abs())
        .collect();
    let err_fl: Vec<f64> = ok
        .iter()
        .map(|(t, tr)| (tr.best.theta.t_fl - t.theta_star.t_fl).abs())
        .collect();
    TrialsSummary {
        n_trials: trials.len(),
        failed: trials.len() - ok.len(),
        converged: converged.len(),
        mean_final_r2: mean(&finals),
        median_final_r2: median(&mut finals),
        mean_iterations: mean(&iters),
        success_rate: if trials.is_empty() {
            f64::NAN
        } else {
            converged.len() as f64 / trials.len() as f64
        },
        recovery_rate: if converged.is_empty() {
            f64::NAN
        } else {
            recovered as f64 / converged.len() as f64
        },
        mean_abs_error_dl: mean(&err_dl),
        mean_abs_error_fl: mean(&err_fl),
    }
}

fn is_training_device(theta: DeviceParams, train: &[DeviceParams]) -> bool {
    train
        .iter()
        .any(|p| (p.t_dl - theta.t_dl).abs() < 1e-9 && (p.t_fl - theta.t_fl).abs() < 1e-9)
}

/// Draws θ* for one trial. The same `(seed, trial)` always yields the same θ*,
/// independent of the method, so grad and bayes runs are paired.
pub fn draw_target_params(
    seed: u64,
    trial: usize,
    bounds: &Bounds,
    exclude: &[DeviceParams],
) -> DeviceParams {
    let mut r = rng::seeded(rng::derive_seed(seed, trial as u64));
    loop {
        let theta = bounds.sample_uniform(&mut r);
        if !is_training_device(theta, exclude) {
            return theta;
        }
    }
}

/// Runs one trial: oracle target at θ*, then the configured inverter.
pub fn run_trial(
    model: &SurrogateModel,
    bounds: &Bounds,
    exclude: &[DeviceParams],
    cfg: &TrialsConfig,
    trial: usize,
) -> TrialResult {
    let theta_star = draw_target_params(cfg.seed, trial, bounds, exclude);
    let inverter_seed = rng::derive_seed(rng::derive_seed(cfg.seed, trial as u64), 1);
    let trace = simulate_sweep(theta_star, &cfg.oracle, cfg.v_step)
        .and_then(|curve| TargetSpec::new(curve, Some(theta_star)))
        .and_then(|target| match cfg.method {
            Method::Grad => multi_start(model, &target, bounds, &cfg.grad, cfg.grad.starts, inverter_seed),
            Method::Bayes => invert_bayes(model, &target, bounds, &cfg.bayes, inverter_seed),
        })
        .map_err(|e| e.to_string());
    TrialResult {
        trial,
        theta_star,
        trace,
    }
}

/// Runs `cfg.n_trials` independent trials inside the training-data bounds.
///
/// Inverter failures are kept in the per-trial result and do not abort the
/// batch. Output is a pure function of the inputs.
pub fn run_trials(model: &SurrogateModel, split: &DatasetSplit, cfg: &TrialsConfig) -> Result<TrialsReport> {
    if cfg.n_trials == 0 {
        return Err(Error::domain("n_trials must be at least 1"));
    }
    cfg.oracle.validate()?;
    match cfg.method {
        Method::Grad => cfg.grad.validate()?,
        Method::Bayes => cfg.bayes.validate()?,
    }
    let bounds = bounds_from_dataset(split)?;
    let exclude = if cfg.exclude_training {
        split.train_params()
    } else {
        Vec::new()
    };
    let trials: Vec<TrialResult> = (0..cfg.n_trials)
        .map(|i| run_trial(model, &bounds, &exclude, cfg, i))
        .collect();
    let summary = summarize(&trials, &bounds);
    Ok(TrialsReport {
        method: cfg.method,
        bounds,
        trials,
        summary,
    })
}
