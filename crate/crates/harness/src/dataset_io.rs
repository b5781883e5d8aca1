//! Plain-text dataset directories: `train.csv`, `test.csv` (label first, then
//! features) and `meta.json`. Floats are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use purl_core::data::{Dataset, Split, SyntheticSpec};
use purl_core::nn::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::idx::load_idx;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    classes: usize,
    features: usize,
    train_examples: usize,
    test_examples: usize,
    #[serde(default)]
    generator: Option<SyntheticSpec>,
}

fn write_split(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.features()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(ds.features() + 1);
    for (i, &label) in ds.labels().iter().enumerate() {
        row.clear();
        row.push(label.to_string());
        row.extend(ds.inputs().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_split(path: &Path, meta: &Meta, split: Split) -> Result<Dataset> {
    let bad = |line: u64, message: String| HarnessError::DataFormat {
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let mut r = csv::Reader::from_path(path)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != meta.features + 1 {
            return Err(bad(
                line,
                format!("expected {} fields, found {}", meta.features + 1, rec.len()),
            ));
        }
        labels.push(rec[0].parse::<usize>().map_err(|e| bad(line, e.to_string()))?);
        for field in rec.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(|e| bad(line, e.to_string()))?);
        }
    }
    let rows = labels.len();
    Ok(Dataset::new(
        Matrix::new(rows, meta.features, values)?,
        labels,
        meta.classes,
        split,
    )?)
}

/// Writes both splits and their metadata into `dir`.
pub fn write_dataset_dir(dir: &Path, train: &Dataset, test: &Dataset, spec: Option<&SyntheticSpec>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_split(&dir.join("train.csv"), train)?;
    write_split(&dir.join("test.csv"), test)?;
    let meta = Meta {
        classes: train.classes(),
        features: train.features(),
        train_examples: train.len(),
        test_examples: test.len(),
        generator: spec.cloned(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_dataset_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| HarnessError::DataFormat {
        path: meta_path.display().to_string(),
        message: e.to_string(),
    })?;
    let train = read_split(&dir.join("train.csv"), &meta, Split::Train)?;
    let test = read_split(&dir.join("test.csv"), &meta, Split::Test)?;
    Ok((train, test))
}

/// Generates a synthetic task and writes it to `dir`.
pub fn gen_data(spec: &SyntheticSpec, dir: &Path) -> Result<(Dataset, Dataset)> {
    let (train, test) = spec.generate()?;
    write_dataset_dir(dir, &train, &test, Some(spec))?;
    Ok((train, test))
}

/// Resolves the configured data source into `(train, test)`.
pub fn load_splits(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match &cfg.data {
        DataConfig::Synthetic(spec) => Ok(spec.generate()?),
        DataConfig::Dir(dir) => read_dataset_dir(dir),
        DataConfig::Idx(p) => Ok((
            load_idx(&p.train_images, &p.train_labels, Split::Train)?,
            load_idx(&p.test_images, &p.test_labels, Split::Test)?,
        )),
    }
}
