//! Loading a simulated dataset and splitting it into train, validation and test sets.

use std::path::{Path, PathBuf};

use cellhealth_core::config::KvConfig;
use cellhealth_core::solver::dataset::CONFIG_FILE;
use cellhealth_core::solver::{load_dataset, read_series, DatasetConfig, Series};
use cellhealth_core::NormalizationSpec;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// One kept sample with its resampled series.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub theta: [f64; 6],
    pub soh: f64,
    pub capacity_ah: f64,
    pub series: Series,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub config: DatasetConfig,
    pub spec: NormalizationSpec,
    pub fresh_capacity_ah: f64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Reads the manifest, the generation config and every kept series.
    pub fn load(dir: &Path) -> Result<Self> {
        let cfg_path = dir.join(CONFIG_FILE);
        if !cfg_path.exists() {
            return Err(Error::Ordering {
                path: cfg_path,
                hint: "generate the dataset first (gen-data)".into(),
            });
        }
        let config = DatasetConfig::from_config(&KvConfig::load(&cfg_path)?)?;
        let manifest = load_dataset(dir)?;
        let mut samples = Vec::new();
        for row in manifest.kept() {
            let series = read_series(&manifest.series_path(&row.sample_id))?;
            if series.current.len() != series.len() || series.c_ss_neg.len() != series.len() {
                return Err(Error::Input(format!(
                    "series for {} lacks current or concentration columns",
                    row.sample_id
                )));
            }
            samples.push(Sample {
                id: row.sample_id.clone(),
                theta: row.theta,
                soh: row.soh,
                capacity_ah: row.capacity_ah,
                series,
            });
        }
        if samples.is_empty() {
            return Err(Error::Input(format!("dataset {} has no kept samples", dir.display())));
        }
        let spec = NormalizationSpec::for_cell(&config.cell, &config.ranges, config.solver.c_rate)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            spec,
            fresh_capacity_ah: manifest.fresh_capacity_ah,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sample indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then `train_fraction` of the samples form the training
/// pool and the rest the test set. `val_fraction` of the pool is held out
/// for early stopping.
pub fn split_indices(n: usize, train_fraction: f64, val_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) || !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Input(format!(
            "split fractions out of range: train {train_fraction}, val {val_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_pool = ((n as f64) * train_fraction).round() as usize;
    let n_val = ((n_pool as f64) * val_fraction).round() as usize;
    if n_pool == n || n_pool <= n_val || n_pool == 0 {
        return Err(Error::Input(format!("{n} samples are too few to split")));
    }
    let test = idx.split_off(n_pool);
    let train = idx.split_off(n_val);
    Ok(Split { train, val: idx, test })
}
