//! Run configuration: a TOML file of namespaced keys plus `key=value`
//! overrides.
//!
//! Keys are flat and dotted (`oracle.w`, `train.epochs`, `grad.alpha`,
//! `bayes.n_init`). Tables and dotted keys are equivalent, so
//! `[oracle]\nw = 0.4` and `oracle.w = 0.4` set the same field. Unknown keys
//! are rejected.

use std::path::Path;

use crate::inverse::bayes::BayesInverterConfig;
use crate::inverse::grad::{GradInverterConfig, InitSpec};
use crate::inverse::trials::{Method, TrialsConfig};
use crate::oracle::{DeviceParams, OracleConfig};
use crate::pipeline::{default_hidden, DataConfig};
use crate::surrogate::{Optimizer, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialsSettings {
    pub n: usize,
    pub method: Method,
    pub exclude_training: bool,
}

impl Default for TrialsSettings {
    fn default() -> Self {
        TrialsSettings {
            n: 50,
            method: Method::Grad,
            exclude_training: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub oracle: OracleConfig,
    pub data: DataConfig,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub grad: GradInverterConfig,
    pub bayes: BayesInverterConfig,
    pub trials: TrialsSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            oracle: OracleConfig::default(),
            data: DataConfig::default(),
            hidden: default_hidden(),
            train: TrainConfig::default(),
            grad: GradInverterConfig::default(),
            bayes: BayesInverterConfig::default(),
            trials: TrialsSettings::default(),
        }
    }
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "seed",
    "oracle.p_s0",
    "oracle.e_c",
    "oracle.v_dl",
    "oracle.w",
    "oracle.lambda",
    "oracle.grains_per_nm",
    "oracle.quantize",
    "oracle.v_step",
    "data.dl_grid",
    "data.fl_grid",
    "data.holdout",
    "data.val_fraction",
    "data.augment_sigma",
    "data.augment_copies",
    "train.hidden",
    "train.epochs",
    "train.batch_size",
    "train.learning_rate",
    "train.optimizer",
    "train.beta1",
    "train.beta2",
    "train.epsilon",
    "train.early_stop_patience",
    "grad.alpha",
    "grad.max_iters",
    "grad.r2_threshold",
    "grad.clip_to_bounds",
    "grad.normalize_gradient",
    "grad.starts",
    "grad.init",
    "bayes.n_init",
    "bayes.candidate_pool",
    "bayes.max_iters",
    "bayes.r2_threshold",
    "bayes.length_scale",
    "bayes.signal_variance",
    "bayes.jitter",
    "bayes.refit_every",
    "bayes.max_gp_points",
    "trials.n",
    "trials.method",
    "trials.exclude_training",
];

fn bad(key: &str, want: &str, v: &toml::Value) -> Error {
    Error::Config(format!("{key}: expected {want}, got {v}"))
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "a number", v)),
    }
}

fn as_u64(key: &str, v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(bad(key, "a non-negative integer", v)),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    as_u64(key, v).map(|x| x as usize)
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "true or false", v))
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "a string", v))
}

fn as_f64_list(key: &str, v: &toml::Value) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| bad(key, "an array of numbers", v))?;
    arr.iter().map(|x| as_f64(key, x)).collect()
}

fn as_params(key: &str, v: &toml::Value) -> Result<DeviceParams> {
    match as_f64_list(key, v)?.as_slice() {
        [dl, fl] => DeviceParams::new(*dl, *fl),
        _ => Err(bad(key, "a [t_dl, t_fl] pair", v)),
    }
}

/// Flattens nested tables into dotted keys, in document order.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

/// Parses the right-hand side of a `key=value` override as a TOML value,
/// falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.merge_toml_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Config::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn merge_toml_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        for (k, v) in &entries {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), &parse_override_value(raw.trim()))
    }

    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "seed" => self.seed = as_u64(key, v)?,
            "oracle.p_s0" => self.oracle.p_s0 = as_f64(key, v)?,
            "oracle.e_c" => self.oracle.e_c = as_f64(key, v)?,
            "oracle.v_dl" => self.oracle.v_dl = as_f64(key, v)?,
            "oracle.w" => self.oracle.w = as_f64(key, v)?,
            "oracle.lambda" => self.oracle.lambda = as_f64(key, v)?,
            "oracle.grains_per_nm" => self.oracle.grains_per_nm = as_f64(key, v)?,
            "oracle.quantize" => self.oracle.quantize = as_bool(key, v)?,
            "oracle.v_step" => self.data.v_step = as_f64(key, v)?,
            "data.dl_grid" => self.data.dl_grid = as_f64_list(key, v)?,
            "data.fl_grid" => self.data.fl_grid = as_f64_list(key, v)?,
            "data.holdout" => {
                let arr = v.as_array().ok_or_else(|| bad(key, "an array of [t_dl, t_fl] pairs", v))?;
                self.data.holdout = arr.iter().map(|p| as_params(key, p)).collect::<Result<_>>()?;
            }
            "data.val_fraction" => self.data.val_fraction = as_f64(key, v)?,
            "data.augment_sigma" => self.data.augment_sigma = as_f64(key, v)?,
            "data.augment_copies" => self.data.augment_copies = as_usize(key, v)?,
            "train.hidden" => {
                let arr = v.as_array().ok_or_else(|| bad(key, "an array of layer widths", v))?;
                self.hidden = arr.iter().map(|x| as_usize(key, x)).collect::<Result<_>>()?;
            }
            "train.epochs" => self.train.epochs = as_usize(key, v)?,
            "train.batch_size" => self.train.batch_size = as_usize(key, v)?,
            "train.learning_rate" => self.train.learning_rate = as_f64(key, v)?,
            "train.optimizer" => {
                self.train.optimizer = match as_str(key, v)? {
                    "adam" => Optimizer::Adam,
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(bad(key, "\"adam\" or \"sgd\"", v)),
                }
            }
            "train.beta1" => self.train.beta1 = as_f64(key, v)?,
            "train.beta2" => self.train.beta2 = as_f64(key, v)?,
            "train.epsilon" => self.train.epsilon = as_f64(key, v)?,
            "train.early_stop_patience" => self.train.early_stop_patience = as_usize(key, v)?,
            "grad.alpha" => self.grad.learning_rate = as_f64(key, v)?,
            "grad.max_iters" => self.grad.stop.max_iters = as_usize(key, v)?,
            "grad.r2_threshold" => self.grad.stop.r2_threshold = as_f64(key, v)?,
            "grad.clip_to_bounds" => self.grad.clip_to_bounds = as_bool(key, v)?,
            "grad.normalize_gradient" => self.grad.normalize_gradient = as_bool(key, v)?,
            "grad.starts" => self.grad.starts = as_usize(key, v)?,
            "grad.init" => {
                self.grad.init = match v {
                    toml::Value::String(s) if s == "random" => InitSpec::Random,
                    toml::Value::Array(_) => InitSpec::Fixed(as_params(key, v)?),
                    _ => return Err(bad(key, "\"random\" or a [t_dl, t_fl] pair", v)),
                }
            }
            "bayes.n_init" => self.bayes.n_init = as_usize(key, v)?,
            "bayes.candidate_pool" => self.bayes.candidate_pool = as_usize(key, v)?,
            "bayes.max_iters" => self.bayes.stop.max_iters = as_usize(key, v)?,
            "bayes.r2_threshold" => self.bayes.stop.r2_threshold = as_f64(key, v)?,
            "bayes.length_scale" => {
                self.bayes.hyper.length_scales = match v {
                    toml::Value::Array(_) => match as_f64_list(key, v)?.as_slice() {
                        [a, b] => [*a, *b],
                        _ => return Err(bad(key, "a number or a pair", v)),
                    },
                    _ => {
                        let l = as_f64(key, v)?;
                        [l, l]
                    }
                }
            }
            "bayes.signal_variance" => self.bayes.hyper.signal_variance = as_f64(key, v)?,
            "bayes.jitter" => self.bayes.hyper.jitter = as_f64(key, v)?,
            "bayes.refit_every" => self.bayes.refit_every = as_usize(key, v)?,
            "bayes.max_gp_points" => self.bayes.max_gp_points = as_usize(key, v)?,
            "trials.n" => self.trials.n = as_usize(key, v)?,
            "trials.method" => self.trials.method = as_str(key, v)?.parse()?,
            "trials.exclude_training" => self.trials.exclude_training = as_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Checks every section.
    pub fn validate(&self) -> Result<()> {
        self.oracle.validate()?;
        self.train.validate()?;
        self.grad.validate()?;
        self.bayes.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("train.hidden must list positive widths".into()));
        }
        if !(0.0..1.0).contains(&self.data.val_fraction) {
            return Err(Error::Config(format!(
                "data.val_fraction must lie in [0, 1), got {}",
                self.data.val_fraction
            )));
        }
        Ok(())
    }

    /// Trials settings combined with the inverter and oracle sections.
    pub fn trials_config(&self) -> TrialsConfig {
        TrialsConfig {
            method: self.trials.method,
            n_trials: self.trials.n,
            seed: self.seed,
            oracle: self.oracle,
            v_step: self.data.v_step,
            grad: self.grad,
            bayes: self.bayes,
            exclude_training: self.trials.exclude_training,
        }
    }
}
