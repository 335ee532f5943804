//! Dataset construction and surrogate fitting with the standard recipe.

use serde::{Deserialize, Serialize};

use crate::dataset::{
    augment_gaussian, generate_grid, split_holdout, DatasetSplit, DEFAULT_DL_GRID, DEFAULT_FL_GRID,
};
use crate::oracle::{DeviceParams, OracleConfig, DEFAULT_V_STEP};
use crate::surrogate::{train, EpochLoss, SurrogateModel, TrainConfig, DEFAULT_HIDDEN};
use crate::{rng, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub dl_grid: Vec<f64>,
    pub fl_grid: Vec<f64>,
    pub v_step: f64,
    pub holdout: Vec<DeviceParams>,
    pub val_fraction: f64,
    /// Std of the Gaussian noise added to augmented training targets, μC/cm².
    pub augment_sigma: f64,
    pub augment_copies: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dl_grid: DEFAULT_DL_GRID.to_vec(),
            fl_grid: DEFAULT_FL_GRID.to_vec(),
            v_step: DEFAULT_V_STEP,
            holdout: vec![DeviceParams { t_dl: 1.25, t_fl: 8.0 }],
            val_fraction: 0.1,
            augment_sigma: 0.5,
            augment_copies: 2,
        }
    }
}

/// Oracle grid, holdout split, then noise augmentation of the training rows.
pub fn build_dataset(oracle: &OracleConfig, data: &DataConfig, seed: u64) -> Result<DatasetSplit> {
    let curves = generate_grid(&data.dl_grid, &data.fl_grid, oracle, data.v_step)?;
    let mut split = split_holdout(&curves, &data.holdout, data.val_fraction, seed)?;
    split.train = augment_gaussian(
        &split.train,
        data.augment_sigma,
        data.augment_copies,
        rng::derive_seed(seed, 0xa06),
    )?;
    Ok(split)
}

/// Initializes a network with the given hidden widths, normalized on the
/// training split, and trains it.
pub fn fit_surrogate(
    split: &DatasetSplit,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(SurrogateModel, Vec<EpochLoss>)> {
    let model = SurrogateModel::for_samples(hidden, &split.train, cfg.seed)?;
    train(&model, split, cfg)
}

/// Default hidden widths as a vector.
pub fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dataset_shape() {
        let split = build_dataset(&OracleConfig::default(), &DataConfig::default(), 0).unwrap();
        assert!(split.is_leak_free());
        assert_eq!(split.holdout_params, vec![DeviceParams { t_dl: 1.25, t_fl: 8.0 }]);
        assert!(split.flags().is_empty());
        let again = build_dataset(&OracleConfig::default(), &DataConfig::default(), 0).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn augmentation_triples_training_rows() {
        let plain = DataConfig {
            augment_copies: 0,
            ..DataConfig::default()
        };
        let a = build_dataset(&OracleConfig::default(), &plain, 1).unwrap();
        let b = build_dataset(&OracleConfig::default(), &DataConfig::default(), 1).unwrap();
        assert_eq!(b.train.len(), 3 * a.train.len());
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
    }
}
