//! Result files.
//!
//! `trajectories.csv` has the header
//! `repetition,seed,event,fitness_with_self,fitness_without_self`, one row
//! per fitness sample sorted by repetition then event. Floats use the
//! shortest text that parses back to the same value.
//!
//! `summary.json` is a [`SummaryRecord`]; `manifest.json` is a
//! [`RunManifest`]; `plot.csv` has columns `event,best,worst,mean`.
//! Agent snapshots are JSON arrays of the agents' serialized state.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::population::{summarize, summarize_without_self, ExperimentConfig, FitnessSample, RepetitionResult, Summary};
use crate::rng::GENERATOR;

pub const SCHEMA_VERSION: u32 = 1;
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_FILE: &str = "plot.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub generator: String,
    /// Absent when the manifest describes a summary recomputed from CSVs
    /// whose configuration is unknown.
    pub config: Option<ExperimentConfig>,
    pub seeds: Vec<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: Option<ExperimentConfig>, seeds: Vec<u64>) -> Self {
        let now = timestamp();
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: GENERATOR.to_string(),
            config,
            seeds,
            started: now.clone(),
            finished: now,
            outputs: Vec::new(),
        }
    }

    pub fn for_config(config: &ExperimentConfig) -> Self {
        Self::new(Some(*config), config.seeds())
    }

    pub fn finish(&mut self) {
        self.finished = timestamp();
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryBlock {
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub half_width: Option<f64>,
    pub peaks: Vec<f64>,
}

impl From<&Summary> for SummaryBlock {
    fn from(s: &Summary) -> Self {
        let interval = s.interval();
        SummaryBlock {
            mean: s.mean,
            ci_low: interval.map(|i| i.0),
            ci_high: interval.map(|i| i.1),
            half_width: s.half_width,
            peaks: s.peaks.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub schema_version: u32,
    pub with_self: SummaryBlock,
    pub without_self: SummaryBlock,
    pub aborted_repetitions: Vec<usize>,
    pub manifest: RunManifest,
}

impl SummaryRecord {
    pub fn from_results(results: &[RepetitionResult], manifest: RunManifest) -> Result<Self> {
        Ok(SummaryRecord {
            schema_version: SCHEMA_VERSION,
            with_self: (&summarize(results)?).into(),
            without_self: (&summarize_without_self(results)?).into(),
            aborted_repetitions: results.iter().filter(|r| !r.is_complete()).map(|r| r.repetition).collect(),
            manifest,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| SimError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    repetition: usize,
    seed: u64,
    event: usize,
    fitness_with_self: f64,
    fitness_without_self: f64,
}

pub fn write_trajectory_csv(results: &[RepetitionResult], path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(SimError::Contract("no results to write".into()));
    }
    let mut sorted: Vec<&RepetitionResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.repetition);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    for r in sorted {
        let mut samples = r.trajectory.clone();
        samples.sort_by_key(|s| s.event);
        for s in samples {
            writer
                .serialize(TrajectoryRow {
                    repetition: r.repetition,
                    seed: r.seed,
                    event: s.event,
                    fitness_with_self: s.fitness_with_self,
                    fitness_without_self: s.fitness_without_self,
                })
                .map_err(|e| SimError::format(path, e))?;
        }
    }
    writer.flush().map_err(|e| SimError::io(path, e))
}

/// Reads trajectories back, one result per repetition in file order.
/// Peaks are recomputed; negation rates and abort reasons are not stored.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<RepetitionResult>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| SimError::format(path, e))?;
    let mut results: Vec<RepetitionResult> = Vec::new();
    for row in reader.deserialize() {
        let row: TrajectoryRow = row.map_err(|e| SimError::format(path, e))?;
        let sample = FitnessSample {
            event: row.event,
            fitness_with_self: row.fitness_with_self,
            fitness_without_self: row.fitness_without_self,
        };
        match results.last_mut() {
            Some(r) if r.repetition == row.repetition => {
                if r.seed != row.seed {
                    return Err(SimError::format(path, format!("repetition {} has two seeds", row.repetition)));
                }
                r.trajectory.push(sample);
            }
            _ => results.push(RepetitionResult::new(row.repetition, row.seed, vec![sample])),
        }
    }
    for r in &mut results {
        *r = RepetitionResult::new(r.repetition, r.seed, std::mem::take(&mut r.trajectory));
    }
    if results.is_empty() {
        return Err(SimError::format(path, "no data rows"));
    }
    Ok(results)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| SimError::format(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| SimError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SimError::format(path, e))
}

pub fn write_summary_json(record: &SummaryRecord, path: &Path) -> Result<()> {
    write_json(record, path)
}

/// Indices into `results` of the repetitions with the highest and lowest
/// peak fitness with self-play; ties go to the earlier repetition.
pub fn best_and_worst(results: &[RepetitionResult]) -> Option<(usize, usize)> {
    let mut best = 0;
    let mut worst = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        if r.peak_with_self > results[best].peak_with_self {
            best = i;
        }
        if r.peak_with_self < results[worst].peak_with_self {
            worst = i;
        }
    }
    (!results.is_empty()).then_some((best, worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub event: usize,
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
}

/// Best, worst and mean fitness-with-self series. Events missing from a
/// shortened repetition are left out of its contributions.
pub fn plot_series(results: &[RepetitionResult]) -> Result<Vec<PlotRow>> {
    let (best, worst) = best_and_worst(results).ok_or_else(|| SimError::Contract("no results to plot".into()))?;
    let lookup = |r: &RepetitionResult, event: usize| {
        r.trajectory.iter().find(|s| s.event == event).map(|s| s.fitness_with_self)
    };
    let mut events: Vec<usize> = results.iter().flat_map(|r| r.trajectory.iter().map(|s| s.event)).collect();
    events.sort_unstable();
    events.dedup();
    Ok(events
        .into_iter()
        .map(|event| {
            let present: Vec<f64> = results.iter().filter_map(|r| lookup(r, event)).collect();
            PlotRow {
                event,
                best: lookup(&results[best], event).unwrap_or(f64::NAN),
                worst: lookup(&results[worst], event).unwrap_or(f64::NAN),
                mean: present.iter().sum::<f64>() / present.len() as f64,
            }
        })
        .collect())
}

pub fn emit_plot_data(results: &[RepetitionResult], path: &Path) -> Result<()> {
    let rows = plot_series(results)?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    for row in rows {
        writer.serialize(row).map_err(|e| SimError::format(path, e))?;
    }
    writer.flush().map_err(|e| SimError::io(path, e))
}

/// Paths of the standard outputs inside `dir`.
pub fn output_paths(dir: &Path) -> [PathBuf; 4] {
    [TRAJECTORY_FILE, SUMMARY_FILE, MANIFEST_FILE, PLOT_FILE].map(|f| dir.join(f))
}

/// Writes trajectories, summary, manifest and plot data into `dir`.
pub fn write_run(results: &[RepetitionResult], mut manifest: RunManifest, dir: &Path) -> Result<SummaryRecord> {
    let [trajectory, summary, manifest_path, plot] = output_paths(dir);
    manifest.outputs = [&trajectory, &summary, &manifest_path, &plot]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    write_trajectory_csv(results, &trajectory)?;
    emit_plot_data(results, &plot)?;
    let record = SummaryRecord::from_results(results, manifest.clone())?;
    write_summary_json(&record, &summary)?;
    write_json(&manifest, &manifest_path)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(rep: usize, values: &[f64]) -> RepetitionResult {
        let trajectory = values
            .iter()
            .enumerate()
            .map(|(i, &v)| FitnessSample {
                event: i * 100,
                fitness_with_self: v,
                fitness_without_self: v / 2.0,
            })
            .collect();
        RepetitionResult::new(rep, 42 + rep as u64, trajectory)
    }

    #[test]
    fn best_and_worst_by_peak() {
        let rs = [result(0, &[0.1, 0.5]), result(1, &[0.9, 0.2]), result(2, &[0.3, 0.3])];
        assert_eq!(best_and_worst(&rs), Some((1, 2)));
    }

    #[test]
    fn single_repetition_plot_is_degenerate() {
        let rows = plot_series(&[result(0, &[0.1, 0.4, 0.2])]).unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            assert_eq!(row.best, row.worst);
            assert_eq!(row.best, row.mean);
        }
    }

    #[test]
    fn csv_uses_lf_and_shortest_floats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory_csv(&[result(0, &[0.1, 1.0 / 3.0])], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "repetition,seed,event,fitness_with_self,fitness_without_self");
        assert_eq!(lines[1], "0,42,0,0.1,0.05");
        assert_eq!(lines[2], "0,42,100,0.3333333333333333,0.16666666666666666");
    }
}
