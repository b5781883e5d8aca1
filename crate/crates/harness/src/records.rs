//! Per-step metrics rows and their CSV stream.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use purl_core::driver::{Phase, StepLog, StepSink};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const CSV_HEADER: &str = "run,seed,episode,step,layer,alpha,layer_sparsity,global_sparsity,accuracy,reward,ms";

/// One metrics row. `run` is `<run id>:<phase>`; episode and step are
/// strictly increasing within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: String,
    pub seed: u64,
    pub episode: usize,
    pub step: usize,
    pub layer: Option<usize>,
    pub alpha: Option<f64>,
    pub layer_sparsity: Option<f64>,
    pub global_sparsity: f64,
    pub accuracy: f64,
    pub reward: Option<f64>,
    /// Milliseconds since the run started.
    pub ms: u64,
}

pub fn phase_tag(phase: Phase) -> &'static str {
    match phase {
        Phase::Train => "train",
        Phase::Stage2 => "stage2",
        Phase::Apply => "apply",
        Phase::FineTune => "finetune",
    }
}

/// Splits `"<id>:<phase>"` into its parts.
pub fn split_run(run: &str) -> (&str, &str) {
    run.rsplit_once(':').unwrap_or((run, ""))
}

impl RunRecord {
    pub fn from_log(run_id: &str, seed: u64, log: &StepLog, ms: u64) -> Self {
        Self {
            run: format!("{run_id}:{}", phase_tag(log.phase)),
            seed,
            episode: log.episode,
            step: log.step,
            layer: log.layer,
            alpha: log.alpha,
            layer_sparsity: log.layer_sparsity,
            global_sparsity: log.global_sparsity,
            accuracy: log.accuracy,
            reward: log.reward,
            ms,
        }
    }
}

/// Streams records to a CSV file, flushing after every row so a crash loses at most one.
pub struct CsvSink {
    writer: BufWriter<File>,
    run_id: String,
    seed: u64,
    started: Instant,
    rows: usize,
}

impl CsvSink {
    /// Creates (or truncates) `path` and writes the header.
    pub fn create(path: &Path, run_id: &str, seed: u64) -> Result<Self> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{CSV_HEADER}")?;
        writer.flush()?;
        Ok(Self {
            writer,
            run_id: run_id.to_string(),
            seed,
            started: Instant::now(),
            rows: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn write(&mut self, rec: &RunRecord) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.serialize(rec)?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.writer.write_all(&bytes)?;
        self.writer.flush()?;
        self.rows += 1;
        Ok(())
    }
}

impl StepSink for CsvSink {
    fn record(&mut self, log: &StepLog) -> purl_core::Result<()> {
        let ms = self.started.elapsed().as_millis() as u64;
        let rec = RunRecord::from_log(&self.run_id, self.seed, log, ms);
        self.write(&rec).map_err(|e| match e {
            crate::error::HarnessError::Io(io) => purl_core::Error::Io(io),
            other => purl_core::Error::Io(std::io::Error::other(other.to_string())),
        })
    }
}

/// Collects records in memory, stamping them like [`CsvSink`] would.
pub struct MemorySink {
    pub run_id: String,
    pub seed: u64,
    pub records: Vec<RunRecord>,
    started: Instant,
}

impl MemorySink {
    pub fn new(run_id: &str, seed: u64) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            records: Vec::new(),
            started: Instant::now(),
        }
    }
}

impl StepSink for MemorySink {
    fn record(&mut self, log: &StepLog) -> purl_core::Result<()> {
        let ms = self.started.elapsed().as_millis() as u64;
        self.records.push(RunRecord::from_log(&self.run_id, self.seed, log, ms));
        Ok(())
    }
}

/// Forwards every log to two sinks.
pub struct Tee<'a>(pub &'a mut dyn StepSink, pub &'a mut dyn StepSink);

impl StepSink for Tee<'_> {
    fn record(&mut self, log: &StepLog) -> purl_core::Result<()> {
        self.0.record(log)?;
        self.1.record(log)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
