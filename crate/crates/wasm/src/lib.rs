//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs nothing beyond `JSON.parse`. The surrogate is a small pretrained
//! network compiled into the module.

use std::sync::OnceLock;

use fecap::bench::{project_time, Scenario};
use fecap::inverse::bayes::{invert_bayes, BayesInverterConfig};
use fecap::inverse::grad::{invert_gradient, GradInverterConfig};
use fecap::inverse::trials::Method;
use fecap::inverse::{evaluate_candidate, Bounds, OptimizationTrace, TargetSpec};
use fecap::oracle::{simulate_sweep, DEFAULT_V_STEP};
use fecap::{DeviceParams, OracleConfig, SurrogateModel};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MODEL_JSON: &str = include_str!("../assets/model.json");

/// Iteration cap for demo inversions; keeps the page responsive.
pub const MAX_DEMO_ITERS: usize = 1000;

fn model() -> Result<&'static SurrogateModel, String> {
    static MODEL: OnceLock<Result<SurrogateModel, String>> = OnceLock::new();
    MODEL
        .get_or_init(|| SurrogateModel::from_json(MODEL_JSON).map_err(|e| e.to_string()))
        .as_ref()
        .map_err(Clone::clone)
}

fn target_for(t_dl: f64, t_fl: f64) -> Result<TargetSpec, String> {
    let theta = DeviceParams::new(t_dl, t_fl).map_err(|e| e.to_string())?;
    let curve = simulate_sweep(theta, &OracleConfig::default(), DEFAULT_V_STEP).map_err(|e| e.to_string())?;
    TargetSpec::new(curve, Some(theta)).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct SweepView {
    v: Vec<f64>,
    dir: Vec<i8>,
    oracle: Vec<f64>,
    model: Vec<f64>,
    r2: f64,
    rmse: f64,
}

/// Oracle loop and surrogate prediction for one device.
pub fn sweep_json(t_dl: f64, t_fl: f64) -> Result<String, String> {
    let target = target_for(t_dl, t_fl)?;
    let eval = evaluate_candidate(model()?, target.true_params.unwrap(), &target).map_err(|e| e.to_string())?;
    let pts = &target.curve.points;
    to_json(&SweepView {
        v: pts.iter().map(|p| p.v).collect(),
        dir: pts.iter().map(|p| p.dir.sign() as i8).collect(),
        oracle: target.polarization(),
        model: eval.predicted.polarization(),
        r2: eval.r2,
        rmse: eval.rmse,
    })
}

#[derive(Debug, Serialize)]
struct InversionView {
    method: String,
    outcome: fecap::inverse::Outcome,
    iterations: usize,
    t_dl: f64,
    t_fl: f64,
    r2: f64,
    rmse: f64,
    /// Best-so-far R² after each evaluation.
    progress: Vec<f64>,
    /// Every evaluated `[t_dl, t_fl]`.
    path: Vec<[f64; 2]>,
    target: Vec<f64>,
    fit: Vec<f64>,
    v: Vec<f64>,
}

/// Recovers thickness from the oracle loop of `(t_dl, t_fl)`.
pub fn invert_json(t_dl: f64, t_fl: f64, method: &str, seed: u64, max_iters: usize) -> Result<String, String> {
    let method: Method = method.parse().map_err(|e: fecap::Error| e.to_string())?;
    if max_iters == 0 || max_iters > MAX_DEMO_ITERS {
        return Err(format!("max_iters must be in 1..={MAX_DEMO_ITERS}, got {max_iters}"));
    }
    let model = model()?;
    let target = target_for(t_dl, t_fl)?;
    let bounds = Bounds::device_range();
    let trace: OptimizationTrace = match method {
        Method::Grad => {
            let mut cfg = GradInverterConfig::default();
            cfg.stop.max_iters = max_iters;
            invert_gradient(model, &target, &bounds, &cfg, seed)
        }
        Method::Bayes => {
            let mut cfg = BayesInverterConfig::default();
            cfg.stop.max_iters = max_iters;
            invert_bayes(model, &target, &bounds, &cfg, seed)
        }
    }
    .map_err(|e| e.to_string())?;
    let best = trace.best;
    let fit = evaluate_candidate(model, best.theta, &target).map_err(|e| e.to_string())?;
    to_json(&InversionView {
        method: method.to_string(),
        outcome: trace.outcome,
        iterations: trace.len(),
        t_dl: best.theta.t_dl,
        t_fl: best.theta.t_fl,
        r2: best.r2,
        rmse: best.rmse,
        progress: trace.best_so_far(),
        path: trace.iterations.iter().map(|r| r.theta.to_array()).collect(),
        target: target.polarization(),
        fit: fit.predicted.polarization(),
        v: target.curve.points.iter().map(|p| p.v).collect(),
    })
}

#[derive(Debug, Serialize)]
struct ProjectionView {
    total_s: f64,
    human: String,
}

/// Wall time for `n_cycles` design cycles of `cycle_time_s` each.
pub fn projection_json(cycle_time_s: f64, n_cycles: u64) -> Result<String, String> {
    let p = project_time(cycle_time_s, n_cycles, Scenario::Measured).map_err(|e| e.to_string())?;
    to_json(&ProjectionView {
        total_s: p.total_s,
        human: p.human(),
    })
}

#[wasm_bindgen]
pub fn sweep(t_dl: f64, t_fl: f64) -> Result<String, JsValue> {
    sweep_json(t_dl, t_fl).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn invert(t_dl: f64, t_fl: f64, method: &str, seed: u32, max_iters: u32) -> Result<String, JsValue> {
    invert_json(t_dl, t_fl, method, seed as u64, max_iters as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn projection(cycle_time_s: f64, n_cycles: u32) -> Result<String, JsValue> {
    projection_json(cycle_time_s, n_cycles as u64).map_err(|e| JsValue::from_str(&e))
}
