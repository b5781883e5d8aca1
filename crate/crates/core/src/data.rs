//! Labelled datasets and the synthetic generators used for desk-scale runs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    RetrainSubset,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    labels: Vec<usize>,
    classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::dim(format!(
                "{} examples but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::dim(format!("label {bad} not below class count {classes}")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn batch(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.inputs.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Dataset {
        let (inputs, labels) = self.batch(indices);
        Dataset {
            inputs,
            labels,
            classes: self.classes,
            split,
        }
    }
}

/// Train and test splits plus the fixed retraining subset drawn from train.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: Dataset,
    pub retrain: Dataset,
    /// Indices into `train` that make up `retrain`, ascending.
    pub retrain_indices: Vec<usize>,
    pub test: Dataset,
}

impl TaskData {
    pub fn new(train: Dataset, test: Dataset, retrain_size: usize, seed: u64) -> Result<Self> {
        if train.features() != test.features() || train.classes() != test.classes() {
            return Err(Error::dim("train and test splits disagree on features or classes"));
        }
        if retrain_size == 0 || retrain_size > train.len() {
            return Err(Error::config(format!(
                "retrain subset size {retrain_size} must be in 1..={}",
                train.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut retrain_indices = sample(&mut rng, train.len(), retrain_size).into_vec();
        retrain_indices.sort_unstable();
        let retrain = train.subset(&retrain_indices, Split::RetrainSubset);
        Ok(Self {
            train: Dataset {
                split: Split::Train,
                ..train
            },
            retrain,
            retrain_indices,
            test: Dataset {
                split: Split::Test,
                ..test
            },
        })
    }

    pub fn features(&self) -> usize {
        self.train.features()
    }

    pub fn classes(&self) -> usize {
        self.train.classes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    GaussianBlobs,
    Spirals,
}

/// Parameters of a synthetic classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub classes: usize,
    pub features: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            generator: Generator::GaussianBlobs,
            classes: 3,
            features: 16,
            train_examples: 4096,
            test_examples: 1024,
            noise: 1.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("synthetic data needs at least 2 classes"));
        }
        if self.features == 0 || (self.generator == Generator::Spirals && self.features < 2) {
            return Err(Error::config("too few features for the chosen generator"));
        }
        if self.train_examples == 0 || self.test_examples == 0 {
            return Err(Error::config("both splits need at least one example"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be a finite nonnegative number"));
        }
        Ok(())
    }

    /// Draws `(train, test)`. Identical specs give identical data.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let total = self.train_examples + self.test_examples;
        let (rows, labels) = match self.generator {
            Generator::GaussianBlobs => self.blobs(total, &mut rng),
            Generator::Spirals => self.spirals(total, &mut rng),
        };
        let f = self.features;
        let split_at = self.train_examples * f;
        let train = Dataset::new(
            Matrix::new(self.train_examples, f, rows[..split_at].to_vec())?,
            labels[..self.train_examples].to_vec(),
            self.classes,
            Split::Train,
        )?;
        let test = Dataset::new(
            Matrix::new(self.test_examples, f, rows[split_at..].to_vec())?,
            labels[self.train_examples..].to_vec(),
            self.classes,
            Split::Test,
        )?;
        Ok((train, test))
    }

    fn blobs(&self, total: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
        let centers: Vec<Vec<f64>> = (0..self.classes)
            .map(|_| (0..self.features).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let noise = Normal::new(0.0, self.noise).expect("validated");
        let mut rows = Vec::with_capacity(total * self.features);
        let mut labels = Vec::with_capacity(total);
        for _ in 0..total {
            let c = rng.gen_range(0..self.classes);
            rows.extend(centers[c].iter().map(|&m| m + noise.sample(rng)));
            labels.push(c);
        }
        (rows, labels)
    }

    fn spirals(&self, total: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
        use std::f64::consts::PI;
        let noise = Normal::new(0.0, self.noise).expect("validated");
        let mut rows = Vec::with_capacity(total * self.features);
        let mut labels = Vec::with_capacity(total);
        for _ in 0..total {
            let c = rng.gen_range(0..self.classes);
            let t: f64 = rng.gen_range(0.0..1.0);
            let angle = 3.0 * PI * t + 2.0 * PI * c as f64 / self.classes as f64;
            let radius = 0.2 + t;
            rows.push(radius * angle.cos() + 0.1 * noise.sample(rng));
            rows.push(radius * angle.sin() + 0.1 * noise.sample(rng));
            rows.extend((2..self.features).map(|_| noise.sample(rng)));
            labels.push(c);
        }
        (rows, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_reproducible() {
        let spec = SyntheticSpec {
            train_examples: 50,
            test_examples: 20,
            ..Default::default()
        };
        assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
        let other = SyntheticSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(spec.generate().unwrap().0, other.generate().unwrap().0);
    }

    #[test]
    fn retrain_subset_comes_from_train() {
        let spec = SyntheticSpec {
            generator: Generator::Spirals,
            train_examples: 100,
            test_examples: 10,
            ..Default::default()
        };
        let (train, test) = spec.generate().unwrap();
        let task = TaskData::new(train.clone(), test, 25, 7).unwrap();
        assert_eq!(task.retrain.len(), 25);
        assert_eq!(task.retrain.split(), Split::RetrainSubset);
        for (k, &i) in task.retrain_indices.iter().enumerate() {
            assert_eq!(task.retrain.inputs().row(k), train.inputs().row(i));
            assert_eq!(task.retrain.labels()[k], train.labels()[i]);
        }
        assert!(task.retrain_indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SyntheticSpec {
            classes: 1,
            ..Default::default()
        }
        .generate()
        .is_err());
        let (train, test) = SyntheticSpec {
            train_examples: 10,
            test_examples: 5,
            ..Default::default()
        }
        .generate()
        .unwrap();
        assert!(TaskData::new(train, test, 11, 0).is_err());
    }
}
