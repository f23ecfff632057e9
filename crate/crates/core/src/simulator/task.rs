use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{stream, TAG_TASK};
use crate::error::{Error, Result};

/// Two Gaussian blobs with balanced labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    pub n: usize,
    pub dim: usize,
    /// Euclidean distance between the two class means.
    pub class_separation: f64,
    /// Per-coordinate standard deviation within a class.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    pub seed: u64,
}

fn default_noise_std() -> f64 {
    0.5
}

impl SyntheticTask {
    pub fn new(n: usize, dim: usize, class_separation: f64, seed: u64) -> Self {
        Self { n, dim, class_separation, noise_std: default_noise_std(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("task needs n >= 10, got {}", self.n)));
        }
        if self.dim == 0 {
            return Err(Error::Config("task needs dim >= 1".into()));
        }
        if !(self.class_separation >= 0.0 && self.noise_std > 0.0) {
            return Err(Error::Config("separation must be >= 0 and noise_std > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    /// Class label, 0 or 1.
    pub y: f64,
}

/// Private training split and public test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Class means sit at `±(sep/2)·(1,…,1)/√d`; the first 80% of the samples
/// form the training split.
pub fn make_task(spec: &SyntheticTask) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, TAG_TASK, 0);
    let offset = 0.5 * spec.class_separation / (spec.dim as f64).sqrt();
    let samples: Vec<Sample> = (0..spec.n)
        .map(|_| {
            let positive = rng.random_bool(0.5);
            let sign = if positive { 1.0 } else { -1.0 };
            let x = (0..spec.dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sign * offset + spec.noise_std * z
                })
                .collect();
            Sample { x, y: if positive { 1.0 } else { 0.0 } }
        })
        .collect();
    let n_train = (spec.n as f64 * 0.8).round() as usize;
    let mut train = samples;
    let test = train.split_off(n_train);
    Ok(Dataset { dim: spec.dim, train, test })
}
