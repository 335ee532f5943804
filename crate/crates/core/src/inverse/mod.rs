//! Reverse design: find device parameters whose predicted sweep matches a
//! target sweep.
//!
//! Both inverters share the same loop shape: propose θ, predict the sweep with
//! the frozen surrogate, score it against the target, stop once R² reaches the
//! threshold or the iteration budget runs out. One iteration is one candidate
//! evaluation for either method.

pub mod bayes;
pub mod grad;
pub mod trials;

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSplit;
use crate::metrics::{r_squared, rmse};
use crate::oracle::{DeviceParams, SweepCurve};
use crate::rng::Rng;
use crate::surrogate::SurrogateModel;
use crate::{Error, Result};

pub use trials::{run_trials, Method, TrialResult, TrialsConfig, TrialsReport, TrialsSummary};

/// Desired behavior, with the generating parameters when they are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub curve: SweepCurve,
    /// Only used to score parameter recovery, never by the inverters.
    pub true_params: Option<DeviceParams>,
}

impl TargetSpec {
    pub fn new(curve: SweepCurve, true_params: Option<DeviceParams>) -> Result<Self> {
        if curve.is_empty() {
            return Err(Error::domain("target curve is empty"));
        }
        if let Some(p) = true_params {
            p.validate()?;
        }
        Ok(TargetSpec { curve, true_params })
    }

    pub fn polarization(&self) -> Vec<f64> {
        self.curve.polarization()
    }
}

/// Axis-aligned box over θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: DeviceParams,
    pub hi: DeviceParams,
}

impl Bounds {
    pub fn new(lo: DeviceParams, hi: DeviceParams) -> Result<Self> {
        if !(lo.t_dl < hi.t_dl && lo.t_fl < hi.t_fl) {
            return Err(Error::domain(format!(
                "degenerate bounds: lo {lo:?} must be below hi {hi:?} in every coordinate"
            )));
        }
        Ok(Bounds { lo, hi })
    }

    /// The full supported thickness box.
    pub fn device_range() -> Self {
        Bounds {
            lo: DeviceParams {
                t_dl: DeviceParams::DL_RANGE.0,
                t_fl: DeviceParams::FL_RANGE.0,
            },
            hi: DeviceParams {
                t_dl: DeviceParams::DL_RANGE.1,
                t_fl: DeviceParams::FL_RANGE.1,
            },
        }
    }

    pub fn width(&self) -> [f64; 2] {
        [self.hi.t_dl - self.lo.t_dl, self.hi.t_fl - self.lo.t_fl]
    }

    pub fn contains(&self, p: DeviceParams) -> bool {
        (self.lo.t_dl..=self.hi.t_dl).contains(&p.t_dl)
            && (self.lo.t_fl..=self.hi.t_fl).contains(&p.t_fl)
    }

    pub fn clamp(&self, p: DeviceParams) -> DeviceParams {
        DeviceParams {
            t_dl: p.t_dl.clamp(self.lo.t_dl, self.hi.t_dl),
            t_fl: p.t_fl.clamp(self.lo.t_fl, self.hi.t_fl),
        }
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> DeviceParams {
        self.from_unit([rng.random::<f64>(), rng.random::<f64>()])
    }

    /// Maps a point of `[0, 1]²` into the box.
    pub fn from_unit(&self, u: [f64; 2]) -> DeviceParams {
        let w = self.width();
        DeviceParams {
            t_dl: self.lo.t_dl + u[0] * w[0],
            t_fl: self.lo.t_fl + u[1] * w[1],
        }
    }

    pub fn to_unit(&self, p: DeviceParams) -> [f64; 2] {
        let w = self.width();
        [(p.t_dl - self.lo.t_dl) / w[0], (p.t_fl - self.lo.t_fl) / w[1]]
    }
}

/// Component-wise min/max of the training samples' thicknesses.
pub fn bounds_from_dataset(split: &DatasetSplit) -> Result<Bounds> {
    let first = split
        .train
        .first()
        .ok_or_else(|| Error::domain("cannot derive bounds from an empty training split"))?;
    let (mut lo, mut hi) = (first.params(), first.params());
    for s in &split.train[1..] {
        lo.t_dl = lo.t_dl.min(s.t_dl);
        lo.t_fl = lo.t_fl.min(s.t_fl);
        hi.t_dl = hi.t_dl.max(s.t_dl);
        hi.t_fl = hi.t_fl.max(s.t_fl);
    }
    Bounds::new(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub r2_threshold: f64,
    pub max_iters: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            r2_threshold: 0.97,
            max_iters: 1000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.r2_threshold > 0.0 && self.r2_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "r2_threshold must lie in (0, 1], got {}",
                self.r2_threshold
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub theta: DeviceParams,
    pub r2: f64,
    pub rmse: f64,
    /// Seconds since the start of the run.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    MaxIters,
    /// The run stopped on a numerical failure; see the trace note.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<IterationRecord>,
    pub outcome: Outcome,
    pub best: IterationRecord,
    pub notes: Vec<String>,
}

impl OptimizationTrace {
    pub fn final_r2(&self) -> f64 {
        self.best.r2
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }

    /// Running maximum of R² along the trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .scan(f64::NEG_INFINITY, |best, r| {
                *best = best.max(r.r2);
                Some(*best)
            })
            .collect()
    }
}

/// Wall clock for `elapsed_s`. Bare wasm32 has no time source, so it reads 0.
#[derive(Debug, Clone, Copy)]
struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed_s(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Accumulates iteration records and applies the stop rule.
pub(crate) struct TraceRecorder {
    rule: StopRule,
    start: Clock,
    iterations: Vec<IterationRecord>,
    best: Option<IterationRecord>,
    notes: Vec<String>,
}

impl TraceRecorder {
    pub(crate) fn new(rule: StopRule) -> Self {
        TraceRecorder {
            rule,
            start: Clock::start(),
            iterations: Vec::with_capacity(rule.max_iters.min(4096)),
            best: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.iterations.len()
    }

    pub(crate) fn budget_left(&self) -> bool {
        self.iterations.len() < self.rule.max_iters
    }

    pub(crate) fn best_r2(&self) -> f64 {
        self.best.map_or(f64::NEG_INFINITY, |b| b.r2)
    }

    pub(crate) fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }

    /// Records one evaluation; returns true when the run has converged.
    pub(crate) fn record(&mut self, theta: DeviceParams, r2: f64, rmse: f64) -> bool {
        let rec = IterationRecord {
            iter: self.iterations.len() + 1,
            theta,
            r2,
            rmse,
            elapsed_s: self.start.elapsed_s(),
        };
        // first record wins ties
        if self.best.is_none_or(|b| r2 > b.r2) {
            self.best = Some(rec);
        }
        self.iterations.push(rec);
        r2 >= self.rule.r2_threshold
    }

    pub(crate) fn finish(self, aborted: bool) -> Result<OptimizationTrace> {
        let best = self
            .best
            .ok_or_else(|| Error::State("optimization produced no evaluations".into()))?;
        let outcome = if best.r2 >= self.rule.r2_threshold {
            Outcome::Converged
        } else if aborted {
            Outcome::Aborted
        } else {
            Outcome::MaxIters
        };
        Ok(OptimizationTrace {
            iterations: self.iterations,
            outcome,
            best,
            notes: self.notes,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub r2: f64,
    pub rmse: f64,
    pub predicted: SweepCurve,
}

/// Predicts the sweep at θ on the target's `(v, dir)` grid and scores it.
pub fn evaluate_candidate(
    model: &SurrogateModel,
    theta: DeviceParams,
    target: &TargetSpec,
) -> Result<Evaluation> {
    if target.curve.is_empty() {
        return Err(Error::domain("target curve is empty"));
    }
    let predicted = model.predict_sweep(theta, &target.curve)?;
    let (r2, rmse) = score(&predicted.polarization(), &target.polarization())?;
    Ok(Evaluation {
        r2,
        rmse,
        predicted,
    })
}

pub(crate) fn score(pred: &[f64], target: &[f64]) -> Result<(f64, f64)> {
    Ok((r_squared(pred, target)?, rmse(pred, target)?))
}

pub const TRACE_HEADER: [&str; 7] = ["trial", "iter", "t_dl_nm", "t_fl_nm", "r2", "rmse", "elapsed_s"];

/// Whether measured wall time goes into the `elapsed_s` trace column.
///
/// Wall time is never reproducible, so the column is left empty unless asked
/// for; everything else in a trace file is a pure function of the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Omit,
    Record,
}

/// Writes `trial,iter,t_dl_nm,t_fl_nm,r2,rmse,elapsed_s` rows.
pub fn write_traces<'a, W: Write>(
    traces: impl IntoIterator<Item = (usize, &'a OptimizationTrace)>,
    timing: Timing,
    writer: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for (trial, trace) in traces {
        for r in &trace.iterations {
            let elapsed = match timing {
                Timing::Omit => String::new(),
                Timing::Record => r.elapsed_s.to_string(),
            };
            w.write_record([
                trial.to_string(),
                r.iter.to_string(),
                r.theta.t_dl.to_string(),
                r.theta.t_fl.to_string(),
                r.r2.to_string(),
                r.rmse.to_string(),
                elapsed,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
