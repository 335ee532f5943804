//! Training data: thickness grids, Gaussian target augmentation, hold-out
//! splits and the CSV interchange format.
//!
//! CSV layout, one row per sample:
//!
//! ```text
//! split,t_dl_nm,t_fl_nm,v_volts,dir,p_uc_cm2
//! train,0.5,2,2.1,-1,15
//! ```
//!
//! `split` is one of `train`, `val`, `test`; `dir` is `-1` or `1`. Floats are
//! written in shortest round-trip form so a save/load cycle is lossless.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::oracle::{simulate_sweep, DeviceParams, Direction, OracleConfig, SweepCurve};
use crate::{rng, Error, Result};

pub const DEFAULT_DL_GRID: [f64; 5] = [0.5, 0.875, 1.25, 1.625, 2.0];
pub const DEFAULT_FL_GRID: [f64; 5] = [2.0, 5.0, 8.0, 11.0, 14.0];

pub const CSV_HEADER: [&str; 6] = ["split", "t_dl_nm", "t_fl_nm", "v_volts", "dir", "p_uc_cm2"];

/// One network input `(v, dir, t_dl, t_fl)` with its polarization target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub v: f64,
    pub dir: Direction,
    pub t_dl: f64,
    pub t_fl: f64,
    pub p: f64,
}

impl Sample {
    pub const N_FEATURES: usize = 4;

    pub fn features(&self) -> [f64; 4] {
        [self.v, self.dir.sign(), self.t_dl, self.t_fl]
    }

    pub fn params(&self) -> DeviceParams {
        DeviceParams {
            t_dl: self.t_dl,
            t_fl: self.t_fl,
        }
    }
}

impl SweepCurve {
    pub fn samples(&self) -> Vec<Sample> {
        self.points
            .iter()
            .map(|pt| Sample {
                v: pt.v,
                dir: pt.dir,
                t_dl: self.params.t_dl,
                t_fl: self.params.t_fl,
                p: pt.p,
            })
            .collect()
    }
}

/// Flattens samples into a row-major `n × 4` feature matrix.
pub fn feature_matrix(samples: &[Sample]) -> Vec<f64> {
    samples.iter().flat_map(|s| s.features()).collect()
}

pub fn targets(samples: &[Sample]) -> Vec<f64> {
    samples.iter().map(|s| s.p).collect()
}

/// Simulates one curve per `(dl, fl)` pair, DL-major.
pub fn generate_grid(
    dl_values: &[f64],
    fl_values: &[f64],
    cfg: &OracleConfig,
    v_step: f64,
) -> Result<Vec<SweepCurve>> {
    if dl_values.is_empty() || fl_values.is_empty() {
        return Err(Error::domain("thickness grids must be non-empty"));
    }
    let mut curves = Vec::with_capacity(dl_values.len() * fl_values.len());
    for &t_dl in dl_values {
        for &t_fl in fl_values {
            curves.push(simulate_sweep(DeviceParams::new(t_dl, t_fl)?, cfg, v_step)?);
        }
    }
    Ok(curves)
}

/// Returns the originals followed by `copies` noisy replicas of every sample.
///
/// Only the polarization target is perturbed; the input features of each
/// replica are copied unchanged.
pub fn augment_gaussian(
    samples: &[Sample],
    sigma_p: f64,
    copies: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    if !(sigma_p >= 0.0) {
        return Err(Error::domain(format!("sigma_p must be non-negative, got {sigma_p}")));
    }
    let noise = Normal::new(0.0, sigma_p)
        .map_err(|_| Error::domain(format!("sigma_p must be non-negative, got {sigma_p}")))?;
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(samples.len() * (copies + 1));
    out.extend_from_slice(samples);
    for _ in 0..copies {
        out.extend(samples.iter().map(|s| Sample {
            p: s.p + noise.sample(&mut rng),
            ..*s
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFlag {
    /// Every device was held out; nothing is left to train on.
    EmptyTrain,
}

impl fmt::Display for SplitFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitFlag::EmptyTrain => f.write_str("empty-train"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Devices whose curves were kept out of `train` and `validation`.
    pub holdout_params: Vec<DeviceParams>,
}

impl DatasetSplit {
    pub fn flags(&self) -> Vec<SplitFlag> {
        let mut flags = Vec::new();
        if self.train.is_empty() {
            flags.push(SplitFlag::EmptyTrain);
        }
        flags
    }

    /// True when no training or validation sample comes from a held-out device.
    pub fn is_leak_free(&self) -> bool {
        self.train
            .iter()
            .chain(&self.validation)
            .all(|s| !self.holdout_params.contains(&s.params()))
    }

    /// Distinct device params of the training samples, in first-seen order.
    pub fn train_params(&self) -> Vec<DeviceParams> {
        distinct_params(&self.train)
    }

    /// Test samples of one held-out device, as a curve.
    pub fn test_curve(&self, params: DeviceParams) -> Option<SweepCurve> {
        let points: Vec<_> = self
            .test
            .iter()
            .filter(|s| s.params() == params)
            .map(|s| crate::oracle::SweepPoint {
                v: s.v,
                dir: s.dir,
                p: s.p,
            })
            .collect();
        (!points.is_empty()).then_some(SweepCurve { params, points })
    }
}

fn distinct_params(samples: &[Sample]) -> Vec<DeviceParams> {
    let mut out: Vec<DeviceParams> = Vec::new();
    for s in samples {
        let p = s.params();
        if out.last() != Some(&p) && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Moves the held-out devices' curves to `test` and shuffles the rest into
/// train/validation, with `round(val_fraction·n)` samples going to validation.
pub fn split_holdout(
    curves: &[SweepCurve],
    holdout: &[DeviceParams],
    val_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(Error::domain(format!(
            "val_fraction must lie in [0, 1], got {val_fraction}"
        )));
    }
    let missing: Vec<String> = holdout
        .iter()
        .filter(|h| curves.iter().filter(|c| c.params == **h).count() != 1)
        .map(|h| format!("(t_dl={}, t_fl={})", h.t_dl, h.t_fl))
        .collect();
    if !missing.is_empty() {
        return Err(Error::domain(format!(
            "holdout params do not match exactly one curve: {}",
            missing.join(", ")
        )));
    }

    let mut test = Vec::new();
    for h in holdout {
        let curve = curves.iter().find(|c| c.params == *h).expect("checked above");
        test.extend(curve.samples());
    }
    let mut rest: Vec<Sample> = curves
        .iter()
        .filter(|c| !holdout.contains(&c.params))
        .flat_map(SweepCurve::samples)
        .collect();
    rest.shuffle(&mut rng::seeded(seed));
    let n_val = (val_fraction * rest.len() as f64).round() as usize;
    let train = rest.split_off(n_val);
    Ok(DatasetSplit {
        train,
        validation: rest,
        test,
        holdout_params: holdout.to_vec(),
    })
}

pub fn write_csv<W: Write>(split: &DatasetSplit, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for (name, samples) in [
        ("train", &split.train),
        ("val", &split.validation),
        ("test", &split.test),
    ] {
        for s in samples {
            w.write_record([
                name.to_string(),
                s.t_dl.to_string(),
                s.t_fl.to_string(),
                s.v.to_string(),
                (s.dir.sign() as i64).to_string(),
                s.p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<()> {
    write_csv(split, BufWriter::new(File::create(path)?))
}

/// Parses the CSV format; `origin` is used in error messages.
pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<DatasetSplit> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(
            1,
            format!("expected header `{}`", CSV_HEADER.join(",")),
        ));
    }

    let mut split = DatasetSplit::default();
    for (i, record) in r.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", CSV_HEADER.len(), record.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64> {
            record[idx]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{}: {e}", CSV_HEADER[idx])))
        };
        let dir = record[4]
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(Direction::from_sign)
            .ok_or_else(|| parse_err(line, format!("dir must be -1 or 1, got `{}`", &record[4])))?;
        let sample = Sample {
            t_dl: num(1)?,
            t_fl: num(2)?,
            v: num(3)?,
            dir,
            p: num(5)?,
        };
        match record[0].trim() {
            "train" => split.train.push(sample),
            "val" => split.validation.push(sample),
            "test" => split.test.push(sample),
            other => return Err(parse_err(line, format!("unknown split `{other}`"))),
        }
    }
    split.holdout_params = distinct_params(&split.test);
    Ok(split)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DatasetSplit> {
    let path = path.as_ref();
    read_csv(File::open(path)?, path)
}
